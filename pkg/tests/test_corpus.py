import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geospread.corpus import (
    UserTrace,
    attach_estimated_locations,
    dedup,
    estimate_home,
    filter_keyword,
    load_corpus,
    load_traces,
    prune_languages,
    write_corpus,
)
from geospread.errors import FormatMismatch, InsufficientEvidence, UnreadableFile
from geospread.geodesy import GeoPoint

from conftest import make_corpus, make_message, write_ndjson


def record(i, lang="en", text="hello", lat=1.0, lon=2.0, ts=None):
    return {
        "id": f"m{i}",
        "user_id": f"u{i}",
        "timestamp": 1000 + i if ts is None else ts,
        "lat": lat,
        "lon": lon,
        "lang": lang,
        "text": text,
    }


class TestLoadCorpus:
    def test_empty_file(self, tmp_path):
        path = write_ndjson(tmp_path / "c.ndjson", [])
        corpus = load_corpus(path)
        assert len(corpus) == 0
        assert corpus.provenance.log[0]["malformed"] == 0

    def test_malformed_lines_skipped_and_counted(self, tmp_path):
        path = tmp_path / "c.ndjson"
        lines = [json.dumps(record(i)) for i in range(3)] + ["{not json"]
        path.write_text("\n".join(lines) + "\n")
        corpus = load_corpus(str(path))
        assert len(corpus) == 3
        assert corpus.provenance.log[0]["malformed"] == 1

    def test_malformed_line_mid_file_does_not_truncate(self, tmp_path):
        path = tmp_path / "c.ndjson"
        lines = [json.dumps(record(1)), "{broken", json.dumps(record(2)), json.dumps(record(3))]
        path.write_text("\n".join(lines) + "\n")
        corpus = load_corpus(str(path))
        assert [m.id for m in corpus] == ["m1", "m2", "m3"]
        assert corpus.provenance.log[0]["malformed"] == 1

    def test_duplicate_id_second_dropped(self, tmp_path):
        first = record(1, text="first")
        second = dict(record(1, text="second"), timestamp=999)
        path = write_ndjson(tmp_path / "c.ndjson", [first, second])
        corpus = load_corpus(path)
        assert len(corpus) == 1
        assert corpus.messages[0].text == "first"
        assert corpus.provenance.log[0]["duplicate_ids"] == 1

    def test_mostly_malformed_raises(self, tmp_path):
        path = tmp_path / "c.ndjson"
        path.write_text("{bad\n{worse\n" + json.dumps(record(1)) + "\n")
        with pytest.raises(FormatMismatch):
            load_corpus(str(path))

    def test_missing_file(self):
        with pytest.raises(UnreadableFile):
            load_corpus("/nonexistent/path.ndjson")

    def test_null_island_pair_required_together(self, tmp_path):
        bad = record(1)
        bad["lon"] = None
        path = write_ndjson(tmp_path / "c.ndjson", [bad, record(2)])
        corpus = load_corpus(path)
        assert len(corpus) == 1
        assert corpus.provenance.log[0]["malformed"] == 1

    def test_csv_roundtrip_fields(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text(
            "id,user_id,timestamp,lat,lon,lang,text\n"
            "m1,u1,1000,1.5,2.5,en,hello world\n"
            "m2,u2,1001,,,en,no geotag\n"
        )
        corpus = load_corpus(str(path), "csv")
        assert len(corpus) == 2
        assert corpus.messages[0].point == GeoPoint(1.5, 2.5)
        assert corpus.messages[1].point is None

    def test_csv_without_header_rejected(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("m1,u1,1000,1.5,2.5,en,hello\n")
        with pytest.raises(FormatMismatch):
            load_corpus(str(path), "csv")

    def test_messages_sorted_by_timestamp_then_id(self, tmp_path):
        recs = [record(3, ts=2000), record(1, ts=1000), record(2, ts=1000)]
        path = write_ndjson(tmp_path / "c.ndjson", recs)
        corpus = load_corpus(path)
        assert [m.id for m in corpus] == ["m1", "m2", "m3"]

    def test_write_then_load_is_identity(self, tmp_path):
        msgs = [
            make_message(id="a", timestamp=5, lat=1.0, lon=2.0, text="héllo"),
            make_message(id="b", timestamp=6, text="no point", region="US", topic=2),
        ]
        corpus = make_corpus(*msgs)
        out = tmp_path / "out.ndjson"
        write_corpus(corpus, str(out))
        back = load_corpus(str(out))
        assert [m.id for m in back] == ["a", "b"]
        assert back.messages[0].point == GeoPoint(1.0, 2.0)
        assert back.messages[1].region == "US"
        assert back.messages[1].topic == 2


class TestFilterKeyword:
    def test_casefold_substring_match(self):
        corpus = make_corpus(make_message(text="EBOLA!"))
        out = filter_keyword(corpus, {"en": ["ebola"]})
        assert len(out) == 1

    def test_token_mode_respects_boundaries(self):
        corpus = make_corpus(make_message(text="the ebolavirus genome"))
        assert len(filter_keyword(corpus, {"en": ["ebola"]}, mode="token")) == 0

    def test_substring_mode_matches_inside_words(self):
        # substring scan oracle: the keyword sits inside the longer word
        assert "ebola" in "ebolavirus"
        corpus = make_corpus(make_message(text="the ebolavirus genome"))
        assert len(filter_keyword(corpus, {"en": ["ebola"]}, mode="substring")) == 1

    def test_language_fallback_uses_union(self):
        corpus = make_corpus(make_message(language="fr", text="grippe aviaire"))
        out = filter_keyword(corpus, {"en": ["flu"], "de": ["grippe"]})
        assert len(out) == 1

    def test_star_entry_is_the_fallback(self):
        corpus = make_corpus(make_message(language="fr", text="grippe"))
        assert len(filter_keyword(corpus, {"*": ["flu"], "en": ["flu"]})) == 0

    def test_empty_keyword_rejected(self):
        corpus = make_corpus(make_message())
        with pytest.raises(ValueError):
            filter_keyword(corpus, {"en": ["  "]})
        with pytest.raises(ValueError):
            filter_keyword(corpus, {})

    def test_idempotent(self):
        corpus = make_corpus(
            make_message(id="a", text="ebola news"),
            make_message(id="b", text="weather"),
        )
        once = filter_keyword(corpus, {"en": ["ebola"]})
        twice = filter_keyword(once, {"en": ["ebola"]})
        assert [m.id for m in once] == [m.id for m in twice]


class TestDedup:
    def test_earliest_wins(self):
        corpus = make_corpus(
            make_message(id="late", timestamp=20, text="same text"),
            make_message(id="early", timestamp=10, text="same text"),
        )
        out = dedup(corpus)
        assert [m.id for m in out] == ["early"]

    def test_languages_are_separate_scopes(self):
        corpus = make_corpus(
            make_message(id="a", language="en", text="hola"),
            make_message(id="b", language="es", text="hola"),
        )
        assert len(dedup(corpus)) == 2

    def test_case_and_whitespace_normalized(self):
        # normalization oracle by hand: casefold + collapse runs of whitespace
        assert " ".join("Some  TEXT\there".casefold().split()) == "some text here"
        corpus = make_corpus(
            make_message(id="a", timestamp=1, text="Some  TEXT\there"),
            make_message(id="b", timestamp=2, text="some text here"),
        )
        out = dedup(corpus)
        assert [m.id for m in out] == ["a"]

    def test_idempotent_and_keeps_one_per_class(self):
        corpus = make_corpus(
            *[make_message(id=f"m{i}", timestamp=i + 1, text=f"text {i % 3}") for i in range(9)]
        )
        once = dedup(corpus)
        assert len(once) == 3
        assert [m.id for m in dedup(once)] == [m.id for m in once]


class TestPruneLanguages:
    def test_below_threshold_dropped(self):
        corpus = make_corpus(
            *[make_message(id=f"m{i}", timestamp=i + 1, text=f"t{i}") for i in range(99)]
        )
        assert len(prune_languages(corpus, 100)) == 0

    def test_exactly_at_threshold_kept(self):
        corpus = make_corpus(
            *[make_message(id=f"m{i}", timestamp=i + 1, text=f"t{i}") for i in range(100)]
        )
        assert len(prune_languages(corpus, 100)) == 100

    def test_min_count_one_is_identity(self):
        corpus = make_corpus(
            make_message(id="a", language="en"),
            make_message(id="b", language="xx"),
        )
        assert len(prune_languages(corpus, 1)) == 2

    def test_min_count_validated(self):
        with pytest.raises(ValueError):
            prune_languages(make_corpus(), 0)


class TestEstimateHome:
    def test_odd_count_takes_middle(self):
        trace = UserTrace("u", (GeoPoint(10, 20), GeoPoint(12, 24), GeoPoint(11, 30)))
        home = estimate_home(trace)
        assert (home.lat, home.lon) == (11.0, 24.0)

    def test_even_count_averages_middle_pair(self):
        trace = UserTrace("u", (GeoPoint(10, 20), GeoPoint(12, 24)))
        home = estimate_home(trace)
        assert (home.lat, home.lon) == (11.0, 22.0)

    def test_insufficient_evidence(self):
        with pytest.raises(InsufficientEvidence):
            estimate_home(UserTrace("u", (GeoPoint(10, 20),)), min_points=2)

    @given(st.lists(st.tuples(st.floats(-89, 89), st.floats(-179, 179)), min_size=2, max_size=9))
    @settings(max_examples=100)
    def test_permutation_invariant_and_in_bounding_box(self, coords):
        pts = tuple(GeoPoint(lat, lon) for lat, lon in coords)
        home = estimate_home(UserTrace("u", pts))
        home_rev = estimate_home(UserTrace("u", tuple(reversed(pts))))
        assert (home.lat, home.lon) == (home_rev.lat, home_rev.lon)
        assert min(p.lat for p in pts) <= home.lat <= max(p.lat for p in pts)
        assert min(p.lon for p in pts) <= home.lon <= max(p.lon for p in pts)


class TestAttachEstimatedLocations:
    def test_qualifying_trace_fills_point(self):
        corpus = make_corpus(make_message(id="a", text="x"))
        traces = {"u1": UserTrace("u1", (GeoPoint(1, 1), GeoPoint(3, 3), GeoPoint(2, 2)))}
        out = attach_estimated_locations(corpus, traces)
        (m,) = out.messages
        assert m.point == GeoPoint(2, 2)
        assert m.geo_source == "estimated"

    def test_short_trace_drops_message(self):
        corpus = make_corpus(make_message(id="a"))
        traces = {"u1": UserTrace("u1", (GeoPoint(1, 1),))}
        out = attach_estimated_locations(corpus, traces)
        assert len(out) == 0
        assert out.provenance.log[-1]["dropped_no_evidence"] == 1

    def test_native_geotag_untouched(self):
        corpus = make_corpus(make_message(id="a", lat=5.0, lon=6.0))
        out = attach_estimated_locations(corpus, {})
        (m,) = out.messages
        assert m.point == GeoPoint(5.0, 6.0)
        assert m.geo_source == "native"

    def test_every_survivor_has_a_point(self):
        corpus = make_corpus(
            make_message(id="a", lat=1.0, lon=1.0),
            make_message(id="b", user_id="u2", text="y"),
            make_message(id="c", user_id="u3", text="z"),
        )
        traces = {"u2": UserTrace("u2", (GeoPoint(0, 0), GeoPoint(2, 2)))}
        out = attach_estimated_locations(corpus, traces)
        assert all(m.point is not None for m in out)
        assert {m.id for m in out} == {"a", "b"}


class TestTracesFile:
    def test_load_traces(self, tmp_path):
        path = tmp_path / "traces.ndjson"
        path.write_text(
            json.dumps({"user_id": "u1", "points": [[1, 2], [3, 4]]})
            + "\n"
            + json.dumps({"user_id": "u2", "points": []})
            + "\n"
            + "{bad\n"
        )
        traces = load_traces(str(path))
        assert set(traces) == {"u1"}
        assert traces["u1"].points == (GeoPoint(1, 2), GeoPoint(3, 4))


class TestCorpusInvariants:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            make_corpus(make_message(id="a"), make_message(id="a", timestamp=2000))

    def test_message_invariants(self):
        with pytest.raises(ValueError):
            make_message(timestamp=0)
        with pytest.raises(ValueError):
            make_message(language="")
        with pytest.raises(ValueError):
            make_message(geo_source="estimated")  # estimated requires a point
