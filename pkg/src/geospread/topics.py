"""LDA topic modeling over per-user aggregated documents.

Training is collapsed Gibbs sampling with a jitted inner loop and an inline
xorshift64* RNG, so identical (documents, K, hyperparameters, iterations,
seed) reproduce byte-identical assignments on any machine. Held-out
perplexity uses fold-in sampling with the topic-word distributions fixed.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numba import njit

from .corpus import Corpus
from .errors import EmptyAfterPreprocess, NoTokens

_MASK64 = (1 << 64) - 1

_URL_RE = re.compile(r"https?://\S+|www\.\S+")
_MENTION_RE = re.compile(r"@\w+")
_TOKEN_RE = re.compile(r"[\w']+")


@dataclass(frozen=True)
class DocumentSet:
    """Per-user token documents plus the shared vocabulary.

    docs holds (user_id, tokens) pairs; every token of every document is a
    key of `vocabulary`, whose values are contiguous column indices.
    doc_freq counts the number of documents containing each token.
    """

    docs: tuple[tuple[str, tuple[str, ...]], ...]
    vocabulary: dict[str, int]
    doc_freq: dict[str, int]

    def subset(self, indices: Sequence[int]) -> "DocumentSet":
        """Same vocabulary, restricted document list, recomputed frequencies."""
        docs = tuple(self.docs[i] for i in indices)
        df: dict[str, int] = {}
        for _, tokens in docs:
            for tok in set(tokens):
                df[tok] = df.get(tok, 0) + 1
        return DocumentSet(docs, dict(self.vocabulary), df)


@dataclass(frozen=True, eq=False)
class TopicModel:
    """Trained LDA state: row-stochastic phi (K x V) and theta (D x K)."""

    K: int
    alpha: float
    beta: float
    phi: np.ndarray
    theta: np.ndarray
    assignments: np.ndarray  # flat per-token topic labels, doc d owns [doc_bounds[d], doc_bounds[d+1])
    doc_bounds: np.ndarray
    vocabulary: dict[str, int]
    doc_users: tuple[str, ...]
    seed: int
    iters: int
    tokens_per_iter: np.ndarray  # total assigned tokens recorded after each sweep


def tokenize(text: str) -> list[str]:
    """Lowercase, strip URLs and @-mentions, keep hashtag bodies, split to tokens."""
    text = text.lower()
    text = _URL_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    text = text.replace("#", " ")
    tokens = []
    for tok in _TOKEN_RE.findall(text):
        tok = tok.strip("'_")
        if tok:
            tokens.append(tok)
    return tokens


def preprocess(
    corpus: Corpus,
    language: str = "en",
    stopwords: Sequence[str] = (),
    min_df: int = 2,
    news_user_threshold: int | None = 20,
) -> DocumentSet:
    """Build one aggregated document per user from target-language messages.

    Tokens shorter than two characters, stopwords, and tokens whose document
    frequency falls below min_df are dropped, then empty documents are
    removed. Texts posted identically by more than news_user_threshold
    distinct users are discarded first (wire-copy heuristic); pass None to
    disable.
    """
    stop = {s.lower() for s in stopwords}
    messages = [m for m in corpus if m.language == language]

    if news_user_threshold is not None:
        users_by_text: dict[str, set[str]] = {}
        for m in messages:
            key = " ".join(m.text.casefold().split())
            users_by_text.setdefault(key, set()).add(m.user_id)
        messages = [
            m
            for m in messages
            if len(users_by_text[" ".join(m.text.casefold().split())]) <= news_user_threshold
        ]

    by_user: dict[str, list[str]] = {}
    for m in messages:  # corpus order, so documents concatenate chronologically
        tokens = [t for t in tokenize(m.text) if len(t) >= 2 and t not in stop]
        if tokens:
            by_user.setdefault(m.user_id, []).extend(tokens)

    df: dict[str, int] = {}
    for tokens in by_user.values():
        for tok in set(tokens):
            df[tok] = df.get(tok, 0) + 1

    docs = []
    for user_id in sorted(by_user):
        kept = tuple(t for t in by_user[user_id] if df[t] >= min_df)
        if kept:
            docs.append((user_id, kept))
    if not docs:
        raise EmptyAfterPreprocess("no documents survived preprocessing")

    kept_df = {}
    for _, tokens in docs:
        for tok in set(tokens):
            kept_df[tok] = kept_df.get(tok, 0) + 1
    vocabulary = {tok: i for i, tok in enumerate(sorted(kept_df))}
    return DocumentSet(tuple(docs), vocabulary, kept_df)


def _seed_state(seed: int) -> np.uint64:
    """splitmix64 of the seed; xorshift64* needs a nonzero state."""
    z = (seed + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return np.uint64(z if z else 0x9E3779B97F4A7C15)


@njit(cache=True)
def _init_assignments(n_tokens, k_topics, state):
    z = np.empty(n_tokens, np.int32)
    for t in range(n_tokens):
        state ^= state >> np.uint64(12)
        state ^= state << np.uint64(25)
        state ^= state >> np.uint64(27)
        r = ((state * np.uint64(2685821657736338717)) >> np.uint64(11)) * (1.0 / 9007199254740992.0)
        z[t] = np.int32(r * k_topics)
    return z, state


@njit(cache=True)
def _train_kernel(dw, ww, z, ndk, nkw, nk, alpha, beta, iters, state, tokens_per_iter):
    n_tokens = dw.shape[0]
    k_topics = nk.shape[0]
    vbeta = nkw.shape[1] * beta
    p = np.empty(k_topics, np.float64)
    for it in range(iters):
        for t in range(n_tokens):
            d = dw[t]
            w = ww[t]
            k = z[t]
            ndk[d, k] -= 1
            nkw[k, w] -= 1
            nk[k] -= 1
            total = 0.0
            for j in range(k_topics):
                total += (ndk[d, j] + alpha) * (nkw[j, w] + beta) / (nk[j] + vbeta)
                p[j] = total
            state ^= state >> np.uint64(12)
            state ^= state << np.uint64(25)
            state ^= state >> np.uint64(27)
            u = ((state * np.uint64(2685821657736338717)) >> np.uint64(11)) * (1.0 / 9007199254740992.0) * total
            k = 0
            while u > p[k] and k < k_topics - 1:
                k += 1
            z[t] = k
            ndk[d, k] += 1
            nkw[k, w] += 1
            nk[k] += 1
        count = 0
        for j in range(k_topics):
            count += nk[j]
        tokens_per_iter[it] = count
    return state


@njit(cache=True)
def _foldin_kernel(ww, z, nd_k, phi, alpha, iters, state):
    n_tokens = ww.shape[0]
    k_topics = phi.shape[0]
    p = np.empty(k_topics, np.float64)
    for it in range(iters):
        for t in range(n_tokens):
            w = ww[t]
            k = z[t]
            nd_k[k] -= 1
            total = 0.0
            for j in range(k_topics):
                total += (nd_k[j] + alpha) * phi[j, w]
                p[j] = total
            state ^= state >> np.uint64(12)
            state ^= state << np.uint64(25)
            state ^= state >> np.uint64(27)
            u = ((state * np.uint64(2685821657736338717)) >> np.uint64(11)) * (1.0 / 9007199254740992.0) * total
            k = 0
            while u > p[k] and k < k_topics - 1:
                k += 1
            z[t] = k
            nd_k[k] += 1
    return state


def gibbs_train(
    docs: DocumentSet,
    K: int,
    alpha: float | None = None,
    beta: float = 0.01,
    iters: int = 1000,
    seed: int = 0,
) -> TopicModel:
    """Collapsed Gibbs sampling; point estimates from the final sweep's counts."""
    if K < 2:
        raise ValueError("K must be >= 2")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    n_vocab = len(docs.vocabulary)
    if n_vocab == 0:
        raise ValueError("vocabulary is empty")
    if alpha is None:
        alpha = 50.0 / K
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")

    n_docs = len(docs.docs)
    doc_bounds = np.zeros(n_docs + 1, np.int64)
    dw_list: list[int] = []
    ww_list: list[int] = []
    for d, (_, tokens) in enumerate(docs.docs):
        for tok in tokens:
            dw_list.append(d)
            ww_list.append(docs.vocabulary[tok])
        doc_bounds[d + 1] = len(ww_list)
    dw = np.array(dw_list, np.int32)
    ww = np.array(ww_list, np.int32)
    n_tokens = dw.size

    state = _seed_state(seed)
    z, state = _init_assignments(n_tokens, K, state)
    state = np.uint64(state)  # numba hands uint64 back as a Python int
    ndk = np.zeros((n_docs, K), np.int32)
    nkw = np.zeros((K, n_vocab), np.int32)
    nk = np.zeros(K, np.int32)
    np.add.at(ndk, (dw, z), 1)
    np.add.at(nkw, (z, ww), 1)
    np.add.at(nk, z, 1)

    tokens_per_iter = np.zeros(iters, np.int64)
    _train_kernel(dw, ww, z, ndk, nkw, nk, alpha, beta, iters, state, tokens_per_iter)

    phi = (nkw + beta) / (nk[:, None] + n_vocab * beta)
    nd = np.diff(doc_bounds)
    theta = (ndk + alpha) / (nd[:, None] + K * alpha)
    return TopicModel(
        K=K,
        alpha=float(alpha),
        beta=float(beta),
        phi=phi,
        theta=theta,
        assignments=z,
        doc_bounds=doc_bounds,
        vocabulary=dict(docs.vocabulary),
        doc_users=tuple(user for user, _ in docs.docs),
        seed=seed,
        iters=iters,
        tokens_per_iter=tokens_per_iter,
    )


def _fold_in(model: TopicModel, word_ids: np.ndarray, fold_iters: int, state: np.uint64):
    """Document-topic estimate for unseen tokens with phi held fixed."""
    z, state = _init_assignments(word_ids.size, model.K, state)
    nd_k = np.zeros(model.K, np.int32)
    np.add.at(nd_k, z, 1)
    state = np.uint64(_foldin_kernel(word_ids, z, nd_k, model.phi, model.alpha, fold_iters, np.uint64(state)))
    theta = (nd_k + model.alpha) / (word_ids.size + model.K * model.alpha)
    return theta, state


def perplexity(
    model: TopicModel,
    heldout: DocumentSet,
    fold_iters: int = 50,
    seed: int = 0,
) -> float:
    """exp of the negative mean per-token held-out log likelihood.

    Out-of-vocabulary tokens are skipped (and excluded from the token count);
    NoTokens is raised when nothing remains.
    """
    state = _seed_state(seed)
    log_lik = 0.0
    n_scored = 0
    for _, tokens in heldout.docs:
        ids = [model.vocabulary[t] for t in tokens if t in model.vocabulary]
        if not ids:
            continue
        word_ids = np.array(ids, np.int32)
        theta_d, state = _fold_in(model, word_ids, fold_iters, state)
        log_lik += float(np.sum(np.log(theta_d @ model.phi[:, word_ids])))
        n_scored += word_ids.size
    if n_scored == 0:
        raise NoTokens("all held-out tokens are out of vocabulary")
    return float(np.exp(-log_lik / n_scored))


def choose_k(
    docs: DocumentSet,
    candidates: Sequence[int],
    heldout_frac: float = 0.1,
    seed: int = 0,
    alpha: float | None = None,
    beta: float = 0.01,
    iters: int = 1000,
    fold_iters: int = 50,
) -> int:
    """Train one model per candidate K, return the held-out perplexity argmin.

    The document split is seeded and shared across candidates; exact
    perplexity ties go to the smaller K.
    """
    if not candidates:
        raise ValueError("candidates must be non-empty")
    n_docs = len(docs.docs)
    n_heldout = max(1, round(heldout_frac * n_docs))
    if n_heldout >= n_docs:
        raise ValueError("heldout split leaves no training documents")
    order = list(range(n_docs))
    random.Random(seed).shuffle(order)
    heldout = docs.subset(sorted(order[:n_heldout]))
    train = docs.subset(sorted(order[n_heldout:]))

    best: tuple[float, int] | None = None
    for K in candidates:
        model = gibbs_train(train, K, alpha=alpha, beta=beta, iters=iters, seed=seed)
        ppl = perplexity(model, heldout, fold_iters=fold_iters, seed=seed)
        if best is None or (ppl, K) < best:
            best = (ppl, K)
    return best[1]


def dominant_topics(model: TopicModel) -> dict[str, int]:
    """Each document user's argmax-theta topic, 1-indexed; ties go low."""
    tops = np.argmax(model.theta, axis=1)  # argmax returns the first maximum
    return {user: int(tops[d]) + 1 for d, user in enumerate(model.doc_users)}


def assign_topics(
    model: TopicModel,
    docs: DocumentSet,
    corpus: Corpus,
    per_message: bool = False,
    fold_iters: int = 50,
    seed: int = 0,
) -> Corpus:
    """Label every message with a 1-indexed topic.

    By default a message inherits its author's dominant topic; users absent
    from the document set stay unlabeled (counted in the filter log). With
    per_message=True each message's own tokens are folded in instead, which
    leaves token-free messages unlabeled.
    """
    labeled = []
    unlabeled = 0
    if per_message:
        state = _seed_state(seed)
        for m in corpus:
            ids = [model.vocabulary[t] for t in tokenize(m.text) if t in model.vocabulary]
            if ids:
                theta_d, state = _fold_in(model, np.array(ids, np.int32), fold_iters, state)
                labeled.append(replace(m, topic=int(np.argmax(theta_d)) + 1))
            else:
                unlabeled += 1
                labeled.append(m)
    else:
        user_topic = dominant_topics(model)
        for m in corpus:
            topic = user_topic.get(m.user_id)
            if topic is None:
                unlabeled += 1
                labeled.append(m)
            else:
                labeled.append(replace(m, topic=topic))
    return corpus.derive(
        labeled,
        {
            "stage": "assign_topics",
            "mode": "per_message" if per_message else "dominant_user_topic",
            "in": len(corpus),
            "out": len(labeled),
            "unlabeled": unlabeled,
        },
    )


def dominant_topic_by_region(corpus: Corpus) -> dict[str, int]:
    """Per region, the topic label carried by the most messages; ties go low."""
    tallies: dict[str, dict[int, int]] = {}
    for m in corpus:
        if m.topic is None or m.region is None:
            continue
        tallies.setdefault(m.region, {}).setdefault(m.topic, 0)
        tallies[m.region][m.topic] += 1
    return {
        region: min(counts, key=lambda t: (-counts[t], t))
        for region, counts in tallies.items()
    }


def top_words(model: TopicModel, topic: int, n: int = 20) -> list[str]:
    """Highest-phi words of a 1-indexed topic; ties broken alphabetically."""
    row = model.phi[topic - 1]
    tokens = sorted(model.vocabulary, key=lambda t: (-row[model.vocabulary[t]], t))
    return tokens[:n]


def save_model(model: TopicModel, path: str) -> None:
    """Versioned JSON dump; assignments are not persisted."""
    vocab = [None] * len(model.vocabulary)
    for tok, idx in model.vocabulary.items():
        vocab[idx] = tok
    obj = {
        "format": "geospread-topic-model",
        "version": 1,
        "k": model.K,
        "alpha": model.alpha,
        "beta": model.beta,
        "seed": model.seed,
        "iters": model.iters,
        "vocabulary": vocab,
        "doc_users": list(model.doc_users),
        "phi": model.phi.tolist(),
        "theta": model.theta.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, separators=(",", ":"))


def load_model(path: str) -> TopicModel:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("format") != "geospread-topic-model" or obj.get("version") != 1:
        raise ValueError(f"{path}: not a version-1 topic model file")
    return TopicModel(
        K=obj["k"],
        alpha=obj["alpha"],
        beta=obj["beta"],
        phi=np.array(obj["phi"], np.float64),
        theta=np.array(obj["theta"], np.float64),
        assignments=np.empty(0, np.int32),
        doc_bounds=np.zeros(1, np.int64),
        vocabulary={tok: i for i, tok in enumerate(obj["vocabulary"])},
        doc_users=tuple(obj["doc_users"]),
        seed=obj["seed"],
        iters=obj["iters"],
        tokens_per_iter=np.empty(0, np.int64),
    )
