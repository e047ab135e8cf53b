"""Track embeddings from playlist co-occurrence and user taste vectors.

Tracks are trained with skip-gram + negative sampling, treating each playlist
as a sentence. A user's taste vector is the mean of the vectors of the tracks
they listened to in a time window; similarity is cosine.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit, prange

from ._index import save_npz


class ColdUserError(LookupError):
    """No in-window listens of known tracks; distinct from a zero vector."""


@dataclass
class EmbeddingConfig:
    dim: int = 80
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    ns_exponent: float = 0.75
    seed: int = 0
    workers: int = 1


@dataclass
class EmbeddingSpace:
    track_ids: np.ndarray
    vectors: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.track_ids = np.asarray(self.track_ids, dtype=np.int64)
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or len(self.vectors) != len(self.track_ids):
            raise ValueError("vectors must be (vocab, dim)")
        if np.any(np.diff(self.track_ids) <= 0):
            order = np.argsort(self.track_ids, kind="stable")
            self.track_ids, self.vectors = self.track_ids[order], self.vectors[order]
            if np.any(np.diff(self.track_ids) == 0):
                raise ValueError("duplicate track ids")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("non-finite embedding values")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.track_ids)

    def rows(self, tracks) -> np.ndarray:
        """Row index per track id, -1 when out of vocabulary."""
        tracks = np.asarray(tracks, dtype=np.int64)
        if len(self.track_ids) == 0:
            return np.full(tracks.shape, -1)
        pos = np.minimum(np.searchsorted(self.track_ids, tracks), len(self.track_ids) - 1)
        return np.where(self.track_ids[pos] == tracks, pos, -1)

    def vector(self, track: int) -> np.ndarray:
        r = int(self.rows([track])[0])
        if r < 0:
            raise KeyError(f"track {track} not in vocabulary")
        return self.vectors[r]

    # text form: JSON header line, then "track_id v1 ... vd" per row (repr floats)
    def save_text(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps({"dim": self.dim, "vocab_size": len(self), "meta": self.meta}) + "\n")
            for tid, vec in zip(self.track_ids.tolist(), self.vectors.tolist()):
                fh.write(str(tid) + " " + " ".join(repr(v) for v in vec) + "\n")

    @classmethod
    def load_text(cls, path) -> "EmbeddingSpace":
        with open(path) as fh:
            header = json.loads(fh.readline())
            ids, rows = [], []
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                ids.append(int(parts[0]))
                rows.append([float(x) for x in parts[1:]])
        vecs = np.array(rows, dtype=np.float64).reshape(len(ids), header["dim"])
        if len(ids) != header["vocab_size"]:
            raise ValueError("embedding file truncated")
        return cls(np.array(ids, dtype=np.int64), vecs, header.get("meta", {}))

    def save_binary(self, path) -> None:
        header = json.dumps({"dim": self.dim, "vocab_size": len(self), "meta": self.meta})
        with open(path, "wb") as fh:
            save_npz(fh, header=np.array(header), track_ids=self.track_ids, vectors=self.vectors)

    @classmethod
    def load_binary(cls, path) -> "EmbeddingSpace":
        with np.load(path) as d:
            header = json.loads(str(d["header"]))
            return cls(d["track_ids"], d["vectors"], header.get("meta", {}))


@dataclass(frozen=True)
class UserTasteVector:
    user: int
    vector: np.ndarray
    window: tuple


def read_corpus_jsonl(path) -> list[list[int]]:
    with open(path) as fh:
        return [[int(t) for t in json.loads(line)] for line in fh if line.strip()]


def write_corpus_jsonl(corpus, path) -> None:
    with open(path, "w") as fh:
        for pl in corpus:
            fh.write(json.dumps([int(t) for t in pl]) + "\n")


def _context_pairs(tokens, playlist_of, window):
    centers, contexts = [], []
    for off in range(1, window + 1):
        a, b = tokens[:-off], tokens[off:]
        same = playlist_of[:-off] == playlist_of[off:]
        centers += [a[same], b[same]]
        contexts += [b[same], a[same]]
    if not centers:
        e = np.zeros(0, dtype=np.int64)
        return e, e
    return np.concatenate(centers), np.concatenate(contexts)


@njit(cache=True, nogil=True)
def _sgns_serial(w_in, w_out, centers, contexts, negs, lr0, lr_min, step0, total):
    d = w_in.shape[1]
    k = negs.shape[1]
    grad = np.zeros(d)
    for p in range(len(centers)):
        lr = lr0 - (lr0 - lr_min) * (step0 + p) / total
        c = centers[p]
        grad[:] = 0.0
        for s in range(k + 1):
            if s == 0:
                t = contexts[p]
                label = 1.0
            else:
                t = negs[p, s - 1]
                if t == contexts[p]:
                    continue
                label = 0.0
            f = 0.0
            for q in range(d):
                f += w_in[c, q] * w_out[t, q]
            if f > 20.0:
                sig = 1.0
            elif f < -20.0:
                sig = 0.0
            else:
                sig = 1.0 / (1.0 + np.exp(-f))
            g = (label - sig) * lr
            for q in range(d):
                grad[q] += g * w_out[t, q]
                w_out[t, q] += g * w_in[c, q]
        for q in range(d):
            w_in[c, q] += grad[q]


@njit(cache=True, parallel=True)
def _sgns_hogwild(w_in, w_out, centers, contexts, negs, lr0, lr_min, step0, total, n_chunks):
    n = len(centers)
    size = (n + n_chunks - 1) // n_chunks
    for ch in prange(n_chunks):
        lo = ch * size
        hi = min(n, lo + size)
        if lo < hi:
            _sgns_serial(w_in, w_out, centers[lo:hi], contexts[lo:hi], negs[lo:hi],
                         lr0, lr_min, step0 + lo, total)


def train_track_embeddings(corpus, config: EmbeddingConfig | None = None) -> EmbeddingSpace:
    """Skip-gram with negative sampling over playlists.

    Deterministic for a given seed when ``workers == 1``; ``workers > 1`` runs
    lock-free parallel updates and is not reproducible.
    """
    cfg = config or EmbeddingConfig()
    corpus = [list(pl) for pl in corpus]
    if not corpus:
        raise ValueError("empty corpus")
    if any(len(pl) == 0 for pl in corpus):
        raise ValueError("playlists must be non-empty")
    if cfg.dim < 2:
        raise ValueError("dim must be >= 2")
    rng = np.random.default_rng(cfg.seed)
    flat = np.concatenate([np.asarray(pl, dtype=np.int64) for pl in corpus])
    playlist_of = np.repeat(np.arange(len(corpus)), [len(pl) for pl in corpus])
    vocab, tokens, counts = np.unique(flat, return_inverse=True, return_counts=True)
    V, d = len(vocab), cfg.dim
    w_in = (rng.random((V, d)) - 0.5) / d
    w_out = np.zeros((V, d))
    centers, contexts = _context_pairs(tokens.astype(np.int64), playlist_of, cfg.window)
    meta = {k: v for k, v in asdict(cfg).items()}
    meta["n_pairs"] = int(len(centers))
    if len(centers) == 0:
        warnings.warn("no training pairs: every playlist has a single track", RuntimeWarning)
        return EmbeddingSpace(vocab, w_in, meta)
    probs = counts.astype(np.float64) ** cfg.ns_exponent
    probs /= probs.sum()
    total = float(cfg.epochs * len(centers))
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(centers))
        c, o = centers[perm], contexts[perm]
        negs = rng.choice(V, size=(len(c), cfg.negatives), p=probs).astype(np.int64)
        step0 = epoch * len(centers)
        if cfg.workers > 1:
            _sgns_hogwild(w_in, w_out, c, o, negs, cfg.learning_rate, cfg.min_learning_rate,
                          step0, total, cfg.workers)
        else:
            _sgns_serial(w_in, w_out, c, o, negs, cfg.learning_rate, cfg.min_learning_rate,
                         step0, total)
    return EmbeddingSpace(vocab, w_in, meta)


@njit(cache=True, nogil=True)
def _segment_means(vectors, rows, seg_starts):
    n_seg = len(seg_starts) - 1
    out = np.zeros((n_seg, vectors.shape[1]))
    for s in range(n_seg):
        lo, hi = seg_starts[s], seg_starts[s + 1]
        for k in range(lo, hi):
            r = rows[k]
            for q in range(vectors.shape[1]):
                out[s, q] += vectors[r, q]
        if hi > lo:
            for q in range(vectors.shape[1]):
                out[s, q] /= hi - lo
    return out


def user_vectors(users, tracks, ts, space: EmbeddingSpace, window, dedup: bool = False):
    """Taste vectors for every user with in-window listens of known tracks.

    Returns ``(user_ids, matrix)``. Each listen contributes once unless ``dedup``.
    Summation runs in (user, track, ts) order so results do not depend on
    input order.
    """
    users = np.asarray(users, dtype=np.int64)
    tracks = np.asarray(tracks, dtype=np.int64)
    ts = np.asarray(ts, dtype=np.int64)
    t_a, t_b = window
    rows = space.rows(tracks)
    m = (ts >= t_a) & (ts < t_b) & (rows >= 0)
    u, tr, rw, t = users[m], tracks[m], rows[m], ts[m]
    order = np.lexsort((t, tr, u))
    u, tr, rw = u[order], tr[order], rw[order]
    if dedup and len(u):
        first = np.ones(len(u), dtype=bool)
        first[1:] = (u[1:] != u[:-1]) | (tr[1:] != tr[:-1])
        u, tr, rw = u[first], tr[first], rw[first]
    uid, starts = np.unique(u, return_index=True)
    seg = np.append(starts, len(u)).astype(np.int64)
    return uid, _segment_means(space.vectors, rw.astype(np.int64), seg)


def user_vector(user, listening, space: EmbeddingSpace, window, dedup: bool = False) -> UserTasteVector:
    listening = list(listening)
    tracks = np.array([t for t, _ in listening], dtype=np.int64)
    ts = np.array([s for _, s in listening], dtype=np.int64)
    uid, mat = user_vectors(np.full(len(tracks), user, dtype=np.int64), tracks, ts, space, window, dedup)
    if len(uid) == 0:
        raise ColdUserError(f"user {user} has no in-window listens of known tracks")
    return UserTasteVector(user, mat[0], tuple(window))


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite vector")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def cosine_rows(A, B) -> np.ndarray:
    """Row-wise cosine between two (n, d) matrices."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    num = np.einsum("ij,ij->i", A, B)
    den = np.linalg.norm(A, axis=1) * np.linalg.norm(B, axis=1)
    if np.any(den == 0):
        raise ValueError("zero-norm vector")
    return np.clip(num / den, -1.0, 1.0)


class TasteIndex:
    """Frozen user taste vectors plus the track space they live in."""

    def __init__(self, space: EmbeddingSpace, user_ids, matrix, window):
        self.space = space
        self.user_ids = np.asarray(user_ids, dtype=np.int64)
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.window = tuple(int(w) for w in window)

    @classmethod
    def from_playback(cls, space, playback, window, dedup=False) -> "TasteIndex":
        uid, mat = user_vectors(playback.user, playback.track, playback.ts, space, window, dedup)
        return cls(space, uid, mat, window)

    def rows(self, users) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        if len(self.user_ids) == 0:
            return np.full(users.shape, -1)
        pos = np.minimum(np.searchsorted(self.user_ids, users), len(self.user_ids) - 1)
        return np.where(self.user_ids[pos] == users, pos, -1)

    def vector(self, user) -> np.ndarray:
        r = int(self.rows([user])[0])
        if r < 0:
            raise ColdUserError(f"user {user} has no taste vector")
        return self.matrix[r]

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            save_npz(fh, user_ids=self.user_ids, matrix=self.matrix, window=np.array(self.window))

    @classmethod
    def load(cls, path, space) -> "TasteIndex":
        with np.load(path) as d:
            return cls(space, d["user_ids"], d["matrix"], tuple(d["window"].tolist()))
