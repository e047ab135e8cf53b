"""Per-share feature vectors and engagement labels, computed as-of share time.

Column order of the model matrix (``FEATURE_COLUMNS``) is fixed; the
missing-capable ``fraction_engaged_friends`` is stored as -1 with a separate
0/1 availability column. Anchors:

* network features and friend sets: events strictly before ``share_ts``
* sender-artist engagement: days ``[share_day - 7, share_day)``
* engaged friends: 180 days before the analysis start, as of that start
* platform usage: subscription at open time, streaming hours over the 7
  days before the open day, days since registration at open time
* label: receiver-artist engagement over ``[open_day, open_day + 7)`` > 1.3
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, fields

import numpy as np
import pandas as pd

from ._index import day_of
from .accounts import AccountLog, MissingAccountError
from .embeddings import ColdUserError, TasteIndex
from .engagement import FRIEND_WINDOW_DAYS, RECEIVER_THRESHOLD, RECEIVER_WINDOW_DAYS, PlaybackLog
from .multiplex import LayerKind, MultiplexNetwork
from .shares import AppMode, app_modes, events_to_frame, open_ts_array, sort_by_key

MISSING = -1.0

FEATURE_COLUMNS = (
    "sum_social_interactions",
    "direct_link_share",
    "reciprocal_link_sharing",
    "receiver_share_in_degree",
    "receiver_share_out_degree",
    "sender_share_out_degree",
    "fraction_engaged_friends",
    "fraction_engaged_friends_available",
    "sr_cosine",
    "rt_cosine",
    "artist_popularity_rank",
    "release_age_s",
    "sender_artist_engagement_7d",
    "is_subscriber",
    "receiver_streaming_hours_7d",
    "receiver_days_on_platform",
)
COL = {name: k for k, name in enumerate(FEATURE_COLUMNS)}
KEY_COLUMNS = ("share_ts", "sender", "receiver", "track_id")
AUX_COLUMNS = ("artist_id", "n_friends", "n_engaged_friends", "receiver_engagement_7d", "app_mode")


class FeatureSetId(enum.Enum):
    ST = "Social Tie Strength"
    SN = "Social Network"
    SC = "Social Cohesion"
    TS = "Taste Similarity"
    TC = "Track Characteristics"
    SA = "Sender-Artist Engagement"
    PU = "Receiver Platform Usage"

    @property
    def columns(self) -> tuple:
        return GROUP_COLUMNS[self]

    @property
    def indices(self) -> list:
        return [COL[c] for c in GROUP_COLUMNS[self]]


GROUP_COLUMNS = {
    FeatureSetId.ST: ("sum_social_interactions", "direct_link_share", "reciprocal_link_sharing"),
    FeatureSetId.SN: ("receiver_share_in_degree", "receiver_share_out_degree", "sender_share_out_degree"),
    FeatureSetId.SC: ("fraction_engaged_friends", "fraction_engaged_friends_available"),
    FeatureSetId.TS: ("sr_cosine", "rt_cosine"),
    FeatureSetId.TC: ("artist_popularity_rank", "release_age_s"),
    FeatureSetId.SA: ("sender_artist_engagement_7d",),
    FeatureSetId.PU: ("is_subscriber", "receiver_streaming_hours_7d", "receiver_days_on_platform"),
}


def group_indices() -> dict:
    """Group name -> column indices, in the group enumeration order."""
    return {g.name: g.indices for g in FeatureSetId}


@dataclass(frozen=True)
class FeatureVector:
    sum_social_interactions: int
    direct_link_share: bool
    reciprocal_link_sharing: bool
    receiver_share_in_degree: int
    receiver_share_out_degree: int
    sender_share_out_degree: int
    fraction_engaged_friends: float | None
    sr_cosine: float
    rt_cosine: float
    artist_popularity_rank: int
    release_age_s: int
    sender_artist_engagement_7d: float
    is_subscriber: bool
    receiver_streaming_hours_7d: float
    receiver_days_on_platform: int

    @property
    def fraction_engaged_friends_available(self) -> bool:
        return self.fraction_engaged_friends is not None

    def to_array(self) -> np.ndarray:
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals["fraction_engaged_friends_available"] = self.fraction_engaged_friends_available
        if vals["fraction_engaged_friends"] is None:
            vals["fraction_engaged_friends"] = MISSING
        return np.array([float(vals[c]) for c in FEATURE_COLUMNS])

    @classmethod
    def from_array(cls, row) -> "FeatureVector":
        row = np.asarray(row, dtype=np.float64)
        get = lambda c: row[COL[c]]
        return cls(
            int(get("sum_social_interactions")), bool(get("direct_link_share")),
            bool(get("reciprocal_link_sharing")), int(get("receiver_share_in_degree")),
            int(get("receiver_share_out_degree")), int(get("sender_share_out_degree")),
            float(get("fraction_engaged_friends")) if get("fraction_engaged_friends_available") else None,
            float(get("sr_cosine")), float(get("rt_cosine")), int(get("artist_popularity_rank")),
            int(get("release_age_s")), float(get("sender_artist_engagement_7d")),
            bool(get("is_subscriber")), float(get("receiver_streaming_hours_7d")),
            int(get("receiver_days_on_platform")))


class Reason(enum.IntEnum):
    OK = 0
    COLD_RECEIVER = 1
    COLD_SENDER = 2
    UNKNOWN_TRACK = 3
    MISSING_ACCOUNT = 4
    UNOPENED = 5


@dataclass
class ExtractionContext:
    """Immutable stores that every share is evaluated against."""

    network: MultiplexNetwork
    taste: TasteIndex
    playback: PlaybackLog
    accounts: AccountLog
    analysis_start_ts: int
    aliases: dict | None = None

    def __post_init__(self):
        self._engaged = None

    def engaged_friend_keys(self) -> np.ndarray:
        """Sorted ``user << 32 | artist`` keys of pairs engaged at the analysis start."""
        if self._engaged is None:
            u, a = self.playback.engaged_pairs(int(day_of(self.analysis_start_ts)), FRIEND_WINDOW_DAYS)
            self._engaged = np.unique(_pair_key(u, a))
        return self._engaged


def _pair_key(users, artists) -> np.ndarray:
    users = np.asarray(users, dtype=np.int64)
    artists = np.asarray(artists, dtype=np.int64)
    if len(users) and (users.min() < 0 or artists.min() < 0 or users.max() >= 2 ** 31
                       or artists.max() >= 2 ** 32):
        raise ValueError("user/artist ids must be non-negative and below 2**31 / 2**32")
    return (users << 32) | artists


def _isin_sorted(keys, table) -> np.ndarray:
    if len(table) == 0:
        return np.zeros(len(keys), dtype=bool)
    pos = np.minimum(np.searchsorted(table, keys), len(table) - 1)
    return table[pos] == keys


@dataclass
class Extraction:
    X: np.ndarray          # (n, len(FEATURE_COLUMNS))
    reason: np.ndarray     # Reason code per row
    aux: pd.DataFrame      # diagnostic columns, one row per event


def extract_batch(events, ctx: ExtractionContext, strict_accounts: bool = True) -> Extraction:
    """Features for every event in one vectorized pass.

    Rows that cannot be computed keep NaN in the affected columns and a
    non-zero reason code. Missing account data raises unless
    ``strict_accounts`` is False, in which case it becomes a reason code.
    """
    df = events_to_frame(events)
    n = len(df)
    r = df["receiver"].to_numpy(np.int64)
    s = df["sender"].to_numpy(np.int64)
    a = df["artist_id"].to_numpy(np.int64)
    t = df["share_ts"].to_numpy(np.int64)
    opened = df["open_ts"].notna().to_numpy()
    anchor = np.where(opened, open_ts_array(df), t)
    net = ctx.network
    X = np.full((n, len(FEATURE_COLUMNS)), np.nan)
    reason = np.zeros(n, dtype=np.int64)

    l_ij = net.layer_weights(LayerKind.LINK_SHARE, r, s, t)
    l_ji = net.layer_weights(LayerKind.LINK_SHARE, s, r, t)
    X[:, COL["sum_social_interactions"]] = (net.layer_weights(LayerKind.SOCIAL_LISTENING, r, s, t)
                                            + net.layer_weights(LayerKind.COLLAB_PLAYLIST, r, s, t) + l_ij + l_ji)
    modes = app_modes(df, ctx.aliases)
    X[:, COL["direct_link_share"]] = modes == AppMode.DIRECT.value
    X[:, COL["reciprocal_link_sharing"]] = l_ij > 0
    X[:, COL["receiver_share_in_degree"]] = net.share_in_degree(r, t)
    X[:, COL["receiver_share_out_degree"]] = net.share_out_degree(r, t)
    X[:, COL["sender_share_out_degree"]] = net.share_out_degree(s, t)

    q, friend = net.friends_batch(r, t)
    n_friends = np.bincount(q, minlength=n)
    hit = _isin_sorted(_pair_key(friend, a[q]), ctx.engaged_friend_keys())
    n_engaged = np.bincount(q, weights=hit, minlength=n).astype(np.int64)
    has = n_friends > 0
    X[:, COL["fraction_engaged_friends"]] = np.where(has, n_engaged / np.maximum(n_friends, 1), MISSING)
    X[:, COL["fraction_engaged_friends_available"]] = has

    taste = ctx.taste
    rr, rs = taste.rows(r), taste.rows(s)
    rt = taste.space.rows(df["track_id"].to_numpy(np.int64))
    ok_sr = (rr >= 0) & (rs >= 0)
    ok_rt = (rr >= 0) & (rt >= 0)
    X[ok_sr, COL["sr_cosine"]] = _cos(taste.matrix[rr[ok_sr]], taste.matrix[rs[ok_sr]])
    X[ok_rt, COL["rt_cosine"]] = _cos(taste.matrix[rr[ok_rt]], taste.space.vectors[rt[ok_rt]])
    reason[rt < 0] = Reason.UNKNOWN_TRACK
    reason[rs < 0] = Reason.COLD_SENDER
    reason[rr < 0] = Reason.COLD_RECEIVER

    X[:, COL["artist_popularity_rank"]] = df["artist_popularity_rank"].to_numpy()
    X[:, COL["release_age_s"]] = df["album_release_age"].to_numpy()
    X[:, COL["sender_artist_engagement_7d"]] = ctx.playback.window_sums(s, a, day_of(t) - 7, day_of(t))

    acct = ctx.accounts.has_account(r)
    if strict_accounts and not acct.all():
        missing = np.unique(r[~acct])[:5].tolist()
        raise MissingAccountError(f"no account data for receivers {missing}")
    reason[~acct] = Reason.MISSING_ACCOUNT
    ra, an = r[acct], anchor[acct]
    X[acct, COL["is_subscriber"]] = ctx.accounts.is_subscriber(ra, an)
    X[acct, COL["receiver_streaming_hours_7d"]] = ctx.accounts.streaming_hours(ra, day_of(an) - 7, day_of(an))
    X[acct, COL["receiver_days_on_platform"]] = ctx.accounts.days_on_platform(ra, an)
    reason[(reason == Reason.OK) & ~opened] = Reason.UNOPENED

    aux = pd.DataFrame({"artist_id": a, "n_friends": n_friends, "n_engaged_friends": n_engaged,
                        "app_mode": modes})
    return Extraction(X, reason, aux)


def _cos(A, B) -> np.ndarray:
    num = np.einsum("ij,ij->i", A, B)
    den = np.linalg.norm(A, axis=1) * np.linalg.norm(B, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.clip(np.where(den > 0, num / den, 0.0), -1.0, 1.0)


def extract_features(ev, ctx: ExtractionContext) -> FeatureVector:
    """Single-event form of :func:`extract_batch`.

    Raises :class:`ColdUserError` for a cold sender or receiver, ``KeyError``
    for a track without an embedding and :class:`MissingAccountError` when the
    receiver has no account data.
    """
    ext = extract_batch([ev], ctx)
    code = Reason(int(ext.reason[0]))
    if code in (Reason.COLD_RECEIVER, Reason.COLD_SENDER):
        raise ColdUserError(f"{code.name.lower()}: no taste vector")
    if code == Reason.UNKNOWN_TRACK:
        raise KeyError(f"track {ev.track_id} has no embedding")
    return FeatureVector.from_array(ext.X[0])


def engagement_labels(events, playback: PlaybackLog):
    """Receiver-artist engagement over the 7 days from the open day, and its threshold label."""
    df = events_to_frame(events)
    open_day = day_of(open_ts_array(df))
    E = playback.window_sums(df["receiver"].to_numpy(np.int64), df["artist_id"].to_numpy(np.int64),
                             open_day, open_day + RECEIVER_WINDOW_DAYS)
    E = np.where(df["open_ts"].notna().to_numpy(), E, 0.0)
    return E, E > RECEIVER_THRESHOLD


@dataclass
class ExtractionReport:
    n_events: int
    n_examples: int
    drops: dict
    positive_rate: float

    def to_dict(self) -> dict:
        return {"n_events": self.n_events, "n_examples": self.n_examples, "drops": self.drops,
                "positive_rate": self.positive_rate}


def build_dataset(events, ctx: ExtractionContext):
    """Labeled examples sorted by event key, plus a report of drops by reason."""
    df = sort_by_key(events_to_frame(events))
    ext = extract_batch(df, ctx, strict_accounts=False)
    E, label = engagement_labels(df, ctx.playback)
    keep = ext.reason == Reason.OK
    out = df.loc[keep, list(KEY_COLUMNS)].reset_index(drop=True)
    feats = pd.DataFrame(ext.X[keep], columns=list(FEATURE_COLUMNS))
    out = pd.concat([out, feats], axis=1)
    out["label"] = label[keep].astype(np.int64)
    aux = ext.aux.loc[keep].reset_index(drop=True)
    aux["receiver_engagement_7d"] = E[keep]
    for c in AUX_COLUMNS:
        out[c] = aux[c].to_numpy()
    drops = {Reason(code).name.lower(): int(np.sum(ext.reason == code))
             for code in Reason if code != Reason.OK and np.any(ext.reason == code)}
    rate = float(out["label"].mean()) if len(out) else float("nan")
    return out, ExtractionReport(len(df), int(keep.sum()), drops, rate)


INT_FEATURES = {"sum_social_interactions", "direct_link_share", "reciprocal_link_sharing",
                "receiver_share_in_degree", "receiver_share_out_degree", "sender_share_out_degree",
                "fraction_engaged_friends_available", "artist_popularity_rank", "release_age_s",
                "is_subscriber", "receiver_days_on_platform"}


def dataset_schema() -> dict:
    return {
        "key": list(KEY_COLUMNS),
        "features": list(FEATURE_COLUMNS),
        "groups": {g.name: {"label": g.value, "columns": list(g.columns)} for g in FeatureSetId},
        "label": "label",
        "auxiliary": list(AUX_COLUMNS),
        "sentinels": {"fraction_engaged_friends": {"missing": MISSING,
                                                   "flag": "fraction_engaged_friends_available"}},
        "integer_features": sorted(INT_FEATURES),
    }


def write_dataset(df: pd.DataFrame, path, schema_path=None) -> None:
    cols = list(KEY_COLUMNS) + list(FEATURE_COLUMNS) + ["label"] + list(AUX_COLUMNS)
    out = df[cols].copy()
    for c in INT_FEATURES:
        out[c] = out[c].astype(np.int64)
    out.to_csv(path, index=False, float_format="%.17g")
    if schema_path is not None:
        with open(schema_path, "w") as fh:
            json.dump(dataset_schema(), fh, indent=2)
            fh.write("\n")


def read_dataset(path) -> pd.DataFrame:
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in (*KEY_COLUMNS, *FEATURE_COLUMNS, "label") if c not in df.columns]
    if missing:
        raise ValueError(f"dataset missing columns {missing}")
    return df


def to_matrix(df: pd.DataFrame):
    """``(X, y)`` in the fixed model column order."""
    return (np.ascontiguousarray(df[list(FEATURE_COLUMNS)].to_numpy(np.float64)),
            df["label"].to_numpy(np.int64))
