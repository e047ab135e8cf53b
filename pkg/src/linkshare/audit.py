"""Temporal-hygiene audit: re-extract features from stores truncated at share time.

For each audited event a private set of stores is rebuilt holding only
records that precede the event: network interactions touching the sender or
receiver, playback of the sender, receiver and the receiver's friends, and the
receiver's account record. Taste vectors are recomputed from the truncated
playback in the same embedding space. The resulting feature vector must equal
the one computed against the full stores.

Platform-usage features are defined at the moment the share is opened, so the
account record is truncated at ``open_ts`` (``share_ts`` when unopened) rather
than at ``share_ts``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from ._index import day_of
from .accounts import AccountLog
from .embeddings import TasteIndex
from .engagement import PlaybackLog
from .features import FEATURE_COLUMNS, ExtractionContext, extract_batch
from .multiplex import LayerKind, MultiplexNetwork


@dataclass
class AuditResult:
    n_audited: int
    n_identical: int
    mismatches: list            # (event row, column, full value, truncated value)
    n_open_later_day: int       # events opened on a later day than they were shared

    @property
    def ok(self) -> bool:
        return self.n_identical == self.n_audited


class _Grouped:
    """Rows of columnar arrays grouped by an int64 key."""

    def __init__(self, key, *cols):
        order = np.argsort(key, kind="stable")
        self.key = key[order]
        self.cols = [c[order] for c in cols]

    def take(self, keys):
        keys = np.unique(np.asarray(keys, dtype=np.int64))
        lo = np.searchsorted(self.key, keys)
        hi = np.searchsorted(self.key, keys, side="right")
        idx = np.concatenate([np.arange(a, b) for a, b in zip(lo, hi)])
        return [c[idx] for c in self.cols]


class Truncator:
    """Builds per-event stores from full ones."""

    def __init__(self, ctx: ExtractionContext):
        self.ctx = ctx
        self.edges = {}
        for kind in LayerKind:
            src, dst, ts = ctx.network.layer_arrays(kind)
            eid = np.arange(len(src))
            # each edge is reachable from both endpoints
            self.edges[kind] = (_Grouped(np.concatenate([src, dst]), np.concatenate([eid, eid])), src, dst, ts)
        pb = ctx.playback
        self.plays = _Grouped(pb.user, pb.user, pb.track, pb.artist, pb.ts, pb.duration_s)

    def network(self, users, t) -> MultiplexNetwork:
        net = MultiplexNetwork()
        for kind, (by_user, src, dst, ts) in self.edges.items():
            (eid,) = by_user.take(users)
            eid = np.unique(eid)
            eid = eid[ts[eid] < t]
            if len(eid):
                net.ingest_arrays(kind, src[eid], dst[eid], ts[eid])
        return net

    def playback(self, users, t) -> PlaybackLog:
        u, tr, ar, ts, dur = self.plays.take(users)
        keep = ts < t
        return PlaybackLog(u[keep], tr[keep], ar[keep], ts[keep], dur[keep])

    def accounts(self, user, anchor_ts) -> AccountLog:
        row = int(self.ctx.accounts.users.lookup([user])[0])
        if row < 0:
            return AccountLog([])
        rec = self.ctx.accounts.records[row]
        keep_days = max(0, int(day_of(anchor_ts)) - rec.usage_start_day)
        sub = rec.subscriber_since
        if sub is not None and sub > anchor_ts:
            sub = None
        return AccountLog([replace(rec, subscriber_since=sub, daily_hours=list(rec.daily_hours[:keep_days]))])

    def context(self, ev) -> ExtractionContext:
        r, s, t = int(ev["receiver"]), int(ev["sender"]), int(ev["share_ts"])
        net = self.network([r, s], t)
        pb = self.playback([r, s, *net.friends(r, t)], t)
        taste = TasteIndex.from_playback(self.ctx.taste.space, pb, self.ctx.taste.window)
        anchor = t if pd.isna(ev["open_ts"]) else int(ev["open_ts"])
        return ExtractionContext(net, taste, pb, self.accounts(r, anchor), self.ctx.analysis_start_ts,
                                 self.ctx.aliases)


def temporal_audit(events: pd.DataFrame, ctx: ExtractionContext, n: int | None = None,
                   seed: int = 0) -> AuditResult:
    """Compare full-store features with truncated-store features for ``n`` random events."""
    events = events.reset_index(drop=True)
    rows = np.arange(len(events))
    if n is not None and n < len(events):
        rows = np.sort(np.random.default_rng(seed).choice(len(events), n, replace=False))
    full = extract_batch(events.iloc[rows], ctx).X
    tr = Truncator(ctx)
    mismatches, same = [], 0
    for k, i in enumerate(rows):
        ev = events.iloc[i]
        got = extract_batch(events.iloc[[i]], tr.context(ev)).X[0]
        diff = ~((got == full[k]) | (np.isnan(got) & np.isnan(full[k])))
        if diff.any():
            mismatches += [(int(i), FEATURE_COLUMNS[c], float(full[k, c]), float(got[c]))
                           for c in np.flatnonzero(diff)]
        else:
            same += 1
    opened = events["open_ts"].iloc[rows]
    later = opened.notna() & (day_of(opened.fillna(0).astype(np.int64)) > day_of(events["share_ts"].iloc[rows]))
    return AuditResult(len(rows), same, mismatches, int(later.sum()))
