import json

import pytest

from geospread.corpus import Corpus, Message
from geospread.geodesy import GeoPoint


def make_message(
    id="m1",
    user_id="u1",
    timestamp=1000,
    lat=None,
    lon=None,
    language="en",
    text="hello",
    region=None,
    topic=None,
    geo_source="native",
):
    point = None if lat is None else GeoPoint(lat, lon)
    return Message(
        id=id,
        user_id=user_id,
        timestamp=timestamp,
        point=point,
        language=language,
        text=text,
        region=region,
        topic=topic,
        geo_source=geo_source,
    )


def make_corpus(*messages) -> Corpus:
    return Corpus(tuple(messages))


def write_ndjson(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return str(path)


@pytest.fixture
def msg_factory():
    return make_message
