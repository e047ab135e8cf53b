"""Three-layer temporal social network with as-of-time queries.

Layers: social listening sessions and collaborative playlists are undirected,
link shares are directed. Weights are interaction counts; every query takes an
``as_of`` timestamp and only sees events with ``timestamp < as_of``.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._index import AsOfCounter, IdMap, expand_spans, save_npz

NEVER = np.iinfo(np.int64).max


class LayerKind(enum.Enum):
    SOCIAL_LISTENING = "listening"
    COLLAB_PLAYLIST = "playlist"
    LINK_SHARE = "share"

    @property
    def directed(self) -> bool:
        return self is LayerKind.LINK_SHARE

    @classmethod
    def parse(cls, value) -> "LayerKind":
        if isinstance(value, LayerKind):
            return value
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown layer {value!r}") from None


@dataclass(frozen=True)
class InteractionEvent:
    layer: LayerKind
    src: int
    dst: int
    timestamp: int

    def __post_init__(self):
        object.__setattr__(self, "layer", LayerKind.parse(self.layer))
        if self.src == self.dst:
            raise ValueError(f"self-loop interaction for user {self.src}")

    def to_record(self) -> dict:
        return {"layer": self.layer.value, "src": int(self.src), "dst": int(self.dst),
                "ts": int(self.timestamp)}

    @classmethod
    def from_record(cls, rec: dict) -> "InteractionEvent":
        return cls(LayerKind.parse(rec["layer"]), int(rec["src"]), int(rec["dst"]), int(rec["ts"]))


class _Layer:
    def __init__(self):
        self.chunks: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self.pending: list[tuple[int, int, int]] = []

    def arrays(self):
        if self.pending:
            p = np.array(self.pending, dtype=np.int64).reshape(-1, 3)
            self.chunks.append((p[:, 0].copy(), p[:, 1].copy(), p[:, 2].copy()))
            self.pending = []
        if not self.chunks:
            e = np.zeros(0, dtype=np.int64)
            return e, e.copy(), e.copy()
        if len(self.chunks) > 1:
            self.chunks = [tuple(np.concatenate(c) for c in zip(*self.chunks))]
        return self.chunks[0]


class MultiplexNetwork:
    """Event log per layer plus lazily built as-of indexes.

    Writes go through :meth:`ingest_event` / :meth:`ingest_arrays`; the first
    query after a write rebuilds the indexes. Queries never mutate state.
    """

    def __init__(self):
        self._layers = {kind: _Layer() for kind in LayerKind}
        self._index = None

    # -- build phase ----------------------------------------------------
    def ingest_event(self, ev: InteractionEvent) -> int:
        src, dst = int(ev.src), int(ev.dst)
        if not ev.layer.directed and src > dst:
            src, dst = dst, src
        self._layers[ev.layer].pending.append((src, dst, int(ev.timestamp)))
        self._index = None
        return self.n_events(ev.layer)

    def ingest_arrays(self, layer, src, dst, ts) -> int:
        layer = LayerKind.parse(layer)
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        ts = np.asarray(ts, dtype=np.int64)
        if not (len(src) == len(dst) == len(ts)):
            raise ValueError("src, dst and ts must have equal length")
        if np.any(src == dst):
            raise ValueError("self-loop interaction in batch")
        if not layer.directed:
            src, dst = np.minimum(src, dst), np.maximum(src, dst)
        self._layers[layer].chunks.append((src.copy(), dst.copy(), ts.copy()))
        self._index = None
        return self.n_events(layer)

    def n_events(self, layer=None) -> int:
        kinds = [LayerKind.parse(layer)] if layer is not None else list(LayerKind)
        total = 0
        for k in kinds:
            lay = self._layers[k]
            total += len(lay.pending) + sum(len(c[0]) for c in lay.chunks)
        return total

    def layer_arrays(self, layer):
        """``(src, dst, ts)`` of one layer, undirected pairs canonicalized."""
        return self._layers[LayerKind.parse(layer)].arrays()

    def seal(self) -> "MultiplexNetwork":
        self._ensure()
        return self

    # -- indexes --------------------------------------------------------
    def _ensure(self):
        if self._index is None:
            self._index = _NetworkIndex({k: self._layers[k].arrays() for k in LayerKind})
        return self._index

    @property
    def users(self) -> np.ndarray:
        return self._ensure().users.ids

    # -- queries --------------------------------------------------------
    def layer_weight(self, layer, i: int, j: int, as_of: int) -> int:
        return int(self.layer_weights(layer, [i], [j], [as_of])[0])

    def layer_weights(self, layer, i, j, as_of) -> np.ndarray:
        """Vectorized L_{layer;ij} over events strictly before ``as_of``."""
        return self._ensure().pair_count(LayerKind.parse(layer), i, j, as_of)

    def share_out_degree(self, users, as_of) -> np.ndarray:
        """Row sums of the link-share layer: links sent before ``as_of``."""
        return self._ensure().out_deg.count(np.asarray(users, dtype=np.int64), as_of)

    def share_in_degree(self, users, as_of) -> np.ndarray:
        """Column sums of the link-share layer: links received before ``as_of``."""
        return self._ensure().in_deg.count(np.asarray(users, dtype=np.int64), as_of)

    def friends(self, i: int, as_of: int) -> set[int]:
        q, f = self.friends_batch([i], [as_of])
        return set(f.tolist())

    def friends_batch(self, users, as_of):
        """Friend lists for many (user, time) queries.

        Returns ``(query_index, friend_id)`` arrays; friends of query ``q`` are
        ``friend_id[query_index == q]``.
        """
        idx = self._ensure()
        users = np.asarray(users, dtype=np.int64)
        as_of = np.broadcast_to(np.asarray(as_of, dtype=np.int64), users.shape)
        start, stop = idx.friend_since.spans(users, as_of)
        query, pos = expand_spans(start, stop)
        return query, idx.friend_other[idx.friend_since.order[pos]]

    def friend_counts(self, users, as_of) -> np.ndarray:
        return self._ensure().friend_since.count(np.asarray(users, dtype=np.int64), as_of)

    def clustering_coefficient(self, i: int, as_of: int) -> float:
        """Fraction of friend pairs of ``i`` that are friends themselves; 0 if k < 2."""
        nbrs = sorted(self.friends(i, as_of))
        k = len(nbrs)
        if k < 2:
            return 0.0
        q, f = self.friends_batch(nbrs, [as_of] * k)
        nset = set(nbrs)
        links = sum(1 for a, b in zip(q.tolist(), f.tolist()) if b in nset and nbrs[a] < b)
        return links / (k * (k - 1) / 2)

    def edge_overlap(self, i: int, j: int, as_of: int) -> float:
        """Jaccard overlap of the two friend sets, endpoints excluded; 0 if both empty."""
        fi = self.friends(i, as_of) - {i, j}
        fj = self.friends(j, as_of) - {i, j}
        union = fi | fj
        if not union:
            return 0.0
        return len(fi & fj) / len(union)

    # -- persistence ----------------------------------------------------
    def save(self, path) -> None:
        """Lossless ``.npz`` snapshot: three int64 arrays per layer."""
        arrays = {}
        for kind in LayerKind:
            src, dst, ts = self.layer_arrays(kind)
            arrays[f"{kind.value}_src"] = src
            arrays[f"{kind.value}_dst"] = dst
            arrays[f"{kind.value}_ts"] = ts
        with open(path, "wb") as fh:
            save_npz(fh, **arrays)

    @classmethod
    def load(cls, path) -> "MultiplexNetwork":
        net = cls()
        with np.load(path) as data:
            for kind in LayerKind:
                src = data[f"{kind.value}_src"]
                if len(src):
                    net.ingest_arrays(kind, src, data[f"{kind.value}_dst"], data[f"{kind.value}_ts"])
        return net

    def iter_records(self):
        for kind in LayerKind:
            src, dst, ts = self.layer_arrays(kind)
            for s, d, t in zip(src.tolist(), dst.tolist(), ts.tolist()):
                yield {"layer": kind.value, "src": s, "dst": d, "ts": t}

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.iter_records():
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "MultiplexNetwork":
        buf = {kind: ([], [], []) for kind in LayerKind}
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    kind = LayerKind.parse(rec["layer"])
                    s, d, t = int(rec["src"]), int(rec["dst"]), int(rec["ts"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{Path(path).name}:{lineno}: bad interaction record ({exc})") from None
                if s == d:
                    raise ValueError(f"{Path(path).name}:{lineno}: self-loop interaction")
                b = buf[kind]
                b[0].append(s)
                b[1].append(d)
                b[2].append(t)
        net = cls()
        for kind, (s, d, t) in buf.items():
            if s:
                net.ingest_arrays(kind, s, d, t)
        return net


class _NetworkIndex:
    def __init__(self, layers):
        all_ids = [a for (s, d, _) in layers.values() for a in (s, d)]
        self.users = IdMap(np.concatenate(all_ids) if all_ids else np.zeros(0, dtype=np.int64))
        n = max(len(self.users), 1)
        self.n = n
        self.pairs = {}
        for kind, (s, d, t) in layers.items():
            self.pairs[kind] = AsOfCounter(self._pair_key(s, d, directed=True), t)
        ls, ld, lt = layers[LayerKind.LINK_SHARE]
        self.out_deg = AsOfCounter(ls, lt)
        self.in_deg = AsOfCounter(ld, lt)
        self._build_friendship(layers)

    def _pair_key(self, i, j, directed):
        a = self.users.lookup(i)
        b = self.users.lookup(j)
        if not directed:
            a, b = np.minimum(a, b), np.maximum(a, b)
        key = a * self.n + b
        return np.where((a < 0) | (b < 0), -1, key)

    def pair_count(self, kind, i, j, as_of):
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        key = self._pair_key(i, j, directed=kind.directed)
        out = self.pairs[kind].count(key, as_of)
        return np.where(key < 0, 0, out)

    def _build_friendship(self, layers):
        # since(a, b): earliest time at which the pair satisfies the friend condition
        cand_keys, cand_ts = [], []
        for kind in (LayerKind.SOCIAL_LISTENING, LayerKind.COLLAB_PLAYLIST):
            s, d, t = layers[kind]
            if len(s):
                k = self._pair_key(s, d, directed=False)
                cand_keys.append(k)
                cand_ts.append(t)
        s, d, t = layers[LayerKind.LINK_SHARE]
        if len(s):
            fwd = self._pair_key(s, d, directed=True)
            uk, inv = np.unique(fwd, return_inverse=True)
            first = np.full(len(uk), NEVER, dtype=np.int64)
            np.minimum.at(first, inv, t)
            a, b = uk // self.n, uk % self.n
            rev = b * self.n + a
            pos = np.minimum(np.searchsorted(uk, rev), len(uk) - 1)
            has_rev = uk[pos] == rev
            both = has_rev & (a < b)
            cand_keys.append(uk[both])
            cand_ts.append(np.maximum(first[both], first[pos[both]]))
        if cand_keys:
            keys = np.concatenate(cand_keys)
            ts = np.concatenate(cand_ts)
            uk, inv = np.unique(keys, return_inverse=True)
            since = np.full(len(uk), NEVER, dtype=np.int64)
            np.minimum.at(since, inv, ts)
        else:
            uk = np.zeros(0, dtype=np.int64)
            since = uk.copy()
        a, b = uk // self.n, uk % self.n
        ids = self.users.ids
        owner = np.concatenate([ids[a], ids[b]]) if len(uk) else uk
        other = np.concatenate([ids[b], ids[a]]) if len(uk) else uk
        both_since = np.concatenate([since, since])
        self.friend_since = AsOfCounter(owner, both_since)
        self.friend_other = other
