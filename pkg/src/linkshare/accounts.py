"""Per-user account data: registration, subscription and daily streaming hours.

One JSONL record per user::

    {"user": 17, "registered_ts": 1650000000, "subscriber_since": null,
     "usage_start_day": 19300, "daily_hours": [0.5, 1.25, ...]}

``daily_hours[k]`` is the hours streamed on UTC day ``usage_start_day + k``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._index import DAY, IdMap, day_of, segment_sum_sorted


class MissingAccountError(KeyError):
    pass


@dataclass
class AccountRecord:
    user: int
    registered_ts: int
    subscriber_since: int | None = None
    usage_start_day: int = 0
    daily_hours: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"user": self.user, "registered_ts": self.registered_ts,
                "subscriber_since": self.subscriber_since, "usage_start_day": self.usage_start_day,
                "daily_hours": list(self.daily_hours)}


class AccountLog:
    def __init__(self, records):
        records = sorted(records, key=lambda r: r.user)
        self.records = records
        self.users = IdMap([r.user for r in records])
        if len(self.users) != len(records):
            raise ValueError("duplicate account records")
        self.registered = np.array([r.registered_ts for r in records], dtype=np.int64)
        self.sub_since = np.array([-1 if r.subscriber_since is None else r.subscriber_since
                                   for r in records], dtype=np.int64)
        self.start_day = np.array([r.usage_start_day for r in records], dtype=np.int64)
        lengths = np.array([len(r.daily_hours) for r in records], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        self.hours = (np.concatenate([np.asarray(r.daily_hours, dtype=np.float64) for r in records])
                      if records else np.zeros(0))
        if np.any(self.hours < 0):
            raise ValueError("daily_hours must be non-negative")

    def __len__(self):
        return len(self.records)

    def _rows(self, users, strict=True):
        rows = self.users.lookup(users)
        if strict and np.any(rows < 0):
            missing = np.asarray(users)[rows < 0][:5].tolist()
            raise MissingAccountError(f"no account data for users {missing}")
        return rows

    def has_account(self, users) -> np.ndarray:
        return self._rows(users, strict=False) >= 0

    def is_subscriber(self, users, t) -> np.ndarray:
        r = self._rows(users)
        s = self.sub_since[r]
        return (s >= 0) & (s <= np.asarray(t, dtype=np.int64))

    def days_on_platform(self, users, t) -> np.ndarray:
        r = self._rows(users)
        return day_of(np.asarray(t, dtype=np.int64)) - day_of(self.registered[r])

    def streaming_hours(self, users, day_start, day_end) -> np.ndarray:
        """Hours streamed over UTC days ``[day_start, day_end)``."""
        r = self._rows(users)
        n = self.offsets[r + 1] - self.offsets[r]
        lo = np.clip(np.asarray(day_start) - self.start_day[r], 0, n)
        hi = np.clip(np.asarray(day_end) - self.start_day[r], 0, n)
        hi = np.maximum(hi, lo)
        return segment_sum_sorted(self.hours, self.offsets[r] + lo, self.offsets[r] + hi)

    def truncated(self, t: int) -> "AccountLog":
        """Only what was known before ``t``: days starting at or after ``t`` are dropped."""
        out = []
        for rec in self.records:
            if rec.registered_ts >= t:
                continue
            sub = rec.subscriber_since if rec.subscriber_since is not None and rec.subscriber_since < t else None
            keep = max(0, min(len(rec.daily_hours), -(-t // DAY) - rec.usage_start_day))
            out.append(AccountRecord(rec.user, rec.registered_ts, sub, rec.usage_start_day,
                                     list(rec.daily_hours[:keep])))
        return AccountLog(out)

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec.to_json()) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "AccountLog":
        recs = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    d = json.loads(line)
                    recs.append(AccountRecord(int(d["user"]), int(d["registered_ts"]),
                                              None if d.get("subscriber_since") is None else int(d["subscriber_since"]),
                                              int(d.get("usage_start_day", 0)),
                                              [float(h) for h in d.get("daily_hours", [])]))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{Path(path).name}:{lineno}: bad account record ({exc})") from None
        return cls(recs)
