"""User-artist engagement from playback logs.

Daily engagement is ``e = log10(n) + 1`` where ``n`` is the number of unique
tracks by the artist streamed for at least 30 s that UTC day (``e = 0`` when
``n = 0``). Window sums use half-open day ranges: ``K > 0`` covers
``[t0, t0 + K)``, ``K < 0`` covers ``[t0 + K, t0)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from ._index import AsOfCounter, IdMap, day_of, save_npz, segment_sum_sorted

MIN_STREAM_SECONDS = 30.0
RECEIVER_THRESHOLD = 1.3
FRIEND_THRESHOLD = 180.0
RECEIVER_WINDOW_DAYS = 7
FRIEND_WINDOW_DAYS = 180


def daily_engagement_value(n: int) -> float:
    return math.log10(n) + 1.0 if n >= 1 else 0.0


@lru_cache(maxsize=None)
def _value_table(size: int) -> np.ndarray:
    return np.array([daily_engagement_value(n) for n in range(size)], dtype=np.float64)


def engagement_values(n) -> np.ndarray:
    """Vectorized :func:`daily_engagement_value` (bitwise identical)."""
    n = np.asarray(n, dtype=np.int64)
    size = 1 << max(8, int(n.max(initial=0)).bit_length())
    return _value_table(size)[n]


@dataclass(frozen=True)
class PlaybackRecord:
    user: int
    track_id: int
    artist_id: int
    timestamp: int
    duration_s: float

    def __post_init__(self):
        if not self.duration_s >= 0:
            raise ValueError("duration_s must be non-negative")

    @property
    def counts(self) -> bool:
        return self.duration_s >= MIN_STREAM_SECONDS


@dataclass(frozen=True)
class DailyEngagement:
    user: int
    artist: int
    day: int
    n: int
    e: float


@dataclass(frozen=True)
class EngagementWindowSum:
    user: int
    artist: int
    t0: int
    K: int
    E: float

    @property
    def days(self) -> range:
        return window_days(self.t0, self.K)


def window_days(t0: int, K: int) -> range:
    if K == 0:
        raise ValueError("K must be non-zero")
    return range(t0, t0 + K) if K > 0 else range(t0 + K, t0)


def is_engaged_receiver(E7) -> bool:
    """Engaged receiver: 7-day post-open engagement strictly above 1.3."""
    if isinstance(E7, EngagementWindowSum):
        if E7.K != RECEIVER_WINDOW_DAYS:
            raise ValueError(f"receiver engagement needs K=7, got K={E7.K}")
        E7 = E7.E
    return bool(E7 > RECEIVER_THRESHOLD)


def is_engaged_friend(E180) -> bool:
    """Engaged friend: engagement over the 180 days before t0 strictly above 180."""
    if isinstance(E180, EngagementWindowSum):
        if E180.K != -FRIEND_WINDOW_DAYS:
            raise ValueError(f"friend engagement needs K=-180, got K={E180.K}")
        E180 = E180.E
    return bool(E180 > FRIEND_THRESHOLD)


class PlaybackLog:
    """Columnar playback records with per-(user, artist) daily engagement index."""

    COLUMNS = ("user", "track", "artist", "ts", "duration_s")

    def __init__(self, user, track, artist, ts, duration_s):
        self.user = np.asarray(user, dtype=np.int64)
        self.track = np.asarray(track, dtype=np.int64)
        self.artist = np.asarray(artist, dtype=np.int64)
        self.ts = np.asarray(ts, dtype=np.int64)
        self.duration_s = np.asarray(duration_s, dtype=np.float64)
        n = len(self.user)
        if not all(len(a) == n for a in (self.track, self.artist, self.ts, self.duration_s)):
            raise ValueError("playback columns must have equal length")
        if np.any(self.duration_s < 0) or np.any(np.isnan(self.duration_s)):
            raise ValueError("duration_s must be non-negative")
        self._idx = None

    def __len__(self):
        return len(self.user)

    @classmethod
    def empty(cls) -> "PlaybackLog":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, np.zeros(0))

    @classmethod
    def from_records(cls, records) -> "PlaybackLog":
        records = list(records)
        if not records:
            return cls.empty()
        cols = list(zip(*[(r.user, r.track_id, r.artist_id, r.timestamp, r.duration_s) for r in records]))
        return cls(*cols)

    def records(self):
        for u, tr, a, t, d in zip(self.user.tolist(), self.track.tolist(), self.artist.tolist(),
                                  self.ts.tolist(), self.duration_s.tolist()):
            yield PlaybackRecord(u, tr, a, t, d)

    @staticmethod
    def concat(logs) -> "PlaybackLog":
        logs = list(logs)
        return PlaybackLog(*(np.concatenate([getattr(lg, c) for lg in logs])
                             for c in ("user", "track", "artist", "ts", "duration_s")))

    def sorted(self) -> "PlaybackLog":
        """Copy ordered by (ts, user, artist, track) for canonical serialization."""
        order = np.lexsort((self.track, self.artist, self.user, self.ts))
        return self.select(order)

    def select(self, idx) -> "PlaybackLog":
        return PlaybackLog(self.user[idx], self.track[idx], self.artist[idx], self.ts[idx],
                           self.duration_s[idx])

    def truncated(self, t: int) -> "PlaybackLog":
        return self.select(self.ts < t)

    # -- persistence ----------------------------------------------------
    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for u, tr, a, t, d in zip(self.user.tolist(), self.track.tolist(), self.artist.tolist(),
                                      self.ts.tolist(), self.duration_s.tolist()):
                fh.write(json.dumps({"user": u, "track": tr, "artist": a, "ts": t, "duration_s": d}) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "PlaybackLog":
        cols = ([], [], [], [], [])
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    r = json.loads(line)
                    row = (int(r["user"]), int(r["track"]), int(r["artist"]), int(r["ts"]),
                           float(r["duration_s"]))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{Path(path).name}:{lineno}: bad playback record ({exc})") from None
                for c, v in zip(cols, row):
                    c.append(v)
        return cls(*cols)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            save_npz(fh, user=self.user, track=self.track, artist=self.artist, ts=self.ts,
                     duration_s=self.duration_s)

    @classmethod
    def load(cls, path) -> "PlaybackLog":
        with np.load(path) as d:
            return cls(d["user"], d["track"], d["artist"], d["ts"], d["duration_s"])

    # -- indexes --------------------------------------------------------
    def _ensure(self):
        if self._idx is None:
            self._idx = _PlaybackIndex(self)
        return self._idx

    def listened_before(self, users, artists, t) -> np.ndarray:
        """True where the user has any playback record of the artist before ``t``."""
        idx = self._ensure()
        key = idx.ua_key(users, artists)
        return np.where(key < 0, 0, idx.heard.count(key, t)) > 0

    def daily_counts(self, users, artists, days) -> np.ndarray:
        """n: unique qualifying tracks per (user, artist, day)."""
        idx = self._ensure()
        key = idx.ua_key(users, artists)
        days = np.asarray(days, dtype=np.int64)
        _, lo = idx.daily.spans(key, days)
        _, hi = idx.daily.spans(key, days + 1)
        hit = (key >= 0) & (hi > lo)
        out = np.zeros(np.broadcast(key, days).shape, dtype=np.int64)
        out[hit] = idx.daily_n_sorted[lo[hit]]
        return out

    def window_sums(self, users, artists, day_start, day_end) -> np.ndarray:
        """Sum of daily engagement over days ``[day_start, day_end)``, ascending order."""
        idx = self._ensure()
        key = idx.ua_key(users, artists)
        _, lo = idx.daily.spans(key, day_start)
        _, hi = idx.daily.spans(key, day_end)
        hi = np.where(key < 0, lo, np.maximum(hi, lo))
        return segment_sum_sorted(idx.daily_e_sorted, lo, hi)

    def aggregate_batch(self, users, artists, t0, K) -> np.ndarray:
        t0 = np.asarray(t0, dtype=np.int64)
        K = np.asarray(K, dtype=np.int64)
        if np.any(K == 0):
            raise ValueError("K must be non-zero")
        lo = np.where(K > 0, t0, t0 + K)
        hi = np.where(K > 0, t0 + K, t0)
        return self.window_sums(users, artists, lo, hi)

    def daily_engagement(self, user: int, artist: int, day: int) -> DailyEngagement:
        n = int(self.daily_counts([user], [artist], [day])[0])
        return DailyEngagement(user, artist, day, n, daily_engagement_value(n))

    def aggregate_engagement(self, user: int, artist: int, t0: int, K: int) -> EngagementWindowSum:
        window_days(t0, K)
        E = float(self.aggregate_batch([user], [artist], [t0], [K])[0])
        return EngagementWindowSum(user, artist, t0, K, E)

    def engaged_pairs(self, t0_day: int, window: int = FRIEND_WINDOW_DAYS):
        """All (user, artist) pairs whose engagement over ``[t0 - window, t0)`` exceeds 180."""
        idx = self._ensure()
        lo_day, hi_day = t0_day - window, t0_day
        days = idx.daily_day_sorted
        keys = idx.daily_key_sorted
        m = (days >= lo_day) & (days < hi_day)
        if not np.any(m):
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        cand = np.unique(keys[m])
        ua_u, ua_a = idx.decode(cand)
        E = self.window_sums(ua_u, ua_a, np.full(len(cand), lo_day), np.full(len(cand), hi_day))
        keep = E > FRIEND_THRESHOLD
        return ua_u[keep], ua_a[keep]

    def streamed_hours(self, users, t_start, t_end) -> np.ndarray:
        """Hours of playback in ``[t_start, t_end)`` per user."""
        idx = self._ensure()
        u = np.asarray(users, dtype=np.int64)
        return (idx.seconds.total(u, t_end) - idx.seconds.total(u, t_start)) / 3600.0


class _PlaybackIndex:
    def __init__(self, log: PlaybackLog):
        self.users = IdMap(log.user)
        self.artists = IdMap(log.artist)
        self.na = max(len(self.artists), 1)
        key = self.ua_key(log.user, log.artist)
        self.heard = AsOfCounter(key, log.ts)
        self.seconds = AsOfCounter(log.user, log.ts, weights=log.duration_s)
        q = log.duration_s >= MIN_STREAM_SECONDS
        day = day_of(log.ts[q])
        trip = np.stack([key[q], day, log.track[q]], axis=1)
        if len(trip):
            trip = np.unique(trip, axis=0)
            ud, n = np.unique(trip[:, :2], axis=0, return_counts=True)
        else:
            ud = np.zeros((0, 2), dtype=np.int64)
            n = np.zeros(0, dtype=np.int64)
        self.daily = AsOfCounter(ud[:, 0], ud[:, 1])
        order = self.daily.order
        self.daily_n_sorted = n[order]
        self.daily_e_sorted = engagement_values(n)[order]
        self.daily_key_sorted = ud[order, 0]
        self.daily_day_sorted = ud[order, 1]

    def ua_key(self, users, artists):
        u = self.users.lookup(users)
        a = self.artists.lookup(artists)
        return np.where((u < 0) | (a < 0), -1, u * self.na + a)

    def decode(self, keys):
        return self.users.ids[keys // self.na], self.artists.ids[keys % self.na]

