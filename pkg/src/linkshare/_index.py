"""Vectorized lookup structures shared by the stores.

All stores key their records by dense integer indices and answer
"how many records with key k happened strictly before time t" in batch,
using one composite sorted array and two ``searchsorted`` calls.
"""
from __future__ import annotations

import hashlib

import numpy as np

DAY = 86_400


def day_of(ts):
    """UTC calendar day index of an epoch-seconds timestamp (scalar or array)."""
    return np.floor_divide(ts, DAY)


def derive_seed(master: int, name: str) -> int:
    """Fixed derivation of a per-module seed from the master seed."""
    digest = hashlib.sha256(f"{int(master)}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


class IdMap:
    """Bijection between opaque int64 ids and dense indices ``0..n-1``."""

    def __init__(self, ids):
        self.ids = np.unique(np.asarray(ids, dtype=np.int64))

    def __len__(self):
        return len(self.ids)

    def lookup(self, ids):
        """Dense index per id, ``-1`` where the id is unknown."""
        ids = np.asarray(ids, dtype=np.int64)
        if len(self.ids) == 0:
            return np.full(ids.shape, -1, dtype=np.int64)
        pos = np.searchsorted(self.ids, ids)
        pos = np.minimum(pos, len(self.ids) - 1)
        return np.where(self.ids[pos] == ids, pos, -1).astype(np.int64)


class AsOfCounter:
    """Counts (or sums weights of) keyed, timestamped records before a cutoff.

    ``count(keys, t)`` returns, per query, the number of records with that key
    and ``ts < t``. Keys are arbitrary int64; timestamps int64.
    """

    def __init__(self, keys, ts, weights=None):
        keys = np.asarray(keys, dtype=np.int64)
        ts = np.asarray(ts, dtype=np.int64)
        order = np.lexsort((ts, keys))
        self.order = order
        keys, ts = keys[order], ts[order]
        self.keys, starts = np.unique(keys, return_index=True)
        self.starts = np.append(starts, len(keys)).astype(np.int64)
        self.tmin = int(ts.min()) if len(ts) else 0
        span = (int(ts.max()) - self.tmin) if len(ts) else 0
        self.stride = span + 2
        rank = np.repeat(np.arange(len(self.keys), dtype=np.int64), np.diff(self.starts))
        self.composite = rank * self.stride + (ts - self.tmin)
        self.ts = ts
        if weights is not None:
            w = np.asarray(weights, dtype=np.float64)[order]
            self.cum = np.concatenate([[0.0], np.cumsum(w)])
        else:
            self.cum = None

    def _positions(self, keys, t):
        keys = np.asarray(keys, dtype=np.int64)
        t = np.asarray(t, dtype=np.int64)
        keys, t = np.broadcast_arrays(keys, t)
        if len(self.keys) == 0:
            z = np.zeros(keys.shape, dtype=np.int64)
            return z, z
        rank = np.minimum(np.searchsorted(self.keys, keys), len(self.keys) - 1)
        found = self.keys[rank] == keys
        start = self.starts[rank]
        off = np.clip(t - self.tmin, 0, self.stride - 1)
        stop = np.searchsorted(self.composite, rank * self.stride + off, side="left")
        stop = np.where(found, stop, start)
        return start, stop

    def spans(self, keys, t):
        """``(start, stop)`` positions into the sorted record order."""
        return self._positions(keys, t)

    def count(self, keys, t):
        start, stop = self._positions(keys, t)
        return (stop - start).astype(np.int64)

    def total(self, keys, t):
        """Sum of record weights with ``ts < t`` (requires weights)."""
        start, stop = self._positions(keys, t)
        return self.cum[stop] - self.cum[start]

    def first_time(self, keys):
        """Earliest timestamp per key, or ``None``-like ``int64 max`` if absent."""
        keys = np.asarray(keys, dtype=np.int64)
        out = np.full(keys.shape, np.iinfo(np.int64).max, dtype=np.int64)
        if len(self.keys) == 0:
            return out
        rank = np.minimum(np.searchsorted(self.keys, keys), len(self.keys) - 1)
        found = self.keys[rank] == keys
        out[found] = self.ts[self.starts[rank[found]]]
        return out


def segment_sum_sorted(values, starts, stops):
    """Per-segment sums of ``values[start:stop]`` in ascending index order."""
    return _segment_sum(np.asarray(values, dtype=np.float64),
                        np.asarray(starts, dtype=np.int64),
                        np.asarray(stops, dtype=np.int64))


def _segment_sum(values, starts, stops):
    from ._kernels import segment_sum
    return segment_sum(values, starts, stops)


def expand_spans(start, stop):
    """Flatten ``[start, stop)`` ranges into ``(query_index, position)`` pairs."""
    start = np.asarray(start, dtype=np.int64)
    lengths = np.asarray(stop, dtype=np.int64) - start
    query = np.repeat(np.arange(len(start), dtype=np.int64), lengths)
    if len(query) == 0:
        return query, query.copy()
    offsets = np.cumsum(lengths) - lengths
    pos = np.arange(len(query), dtype=np.int64) - np.repeat(offsets, lengths) + np.repeat(start, lengths)
    return query, pos


_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_npz(path, compress: bool = False, **arrays) -> None:
    """``np.savez`` with fixed zip timestamps, so equal arrays give equal bytes."""
    import io
    import zipfile

    method = zipfile.ZIP_DEFLATED if compress else zipfile.ZIP_STORED
    with zipfile.ZipFile(path, "w", compression=method) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asanyarray(arr), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_EPOCH)
            info.compress_type = method
            info.external_attr = 0o644 << 16
            zf.writestr(info, buf.getvalue())
