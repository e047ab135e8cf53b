"""Link-share contact events: schema, app-mode classification, discovery
filtering and popularity-stratified sampling."""
from __future__ import annotations

import enum
import json
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import pandas as pd

DIRECT_APPS = frozenset({
    "whatsapp", "facebook_messenger", "sms", "line", "instagram_direct", "samsung_messenger",
})
BROADCAST_APPS = frozenset({
    "instagram_stories", "facebook_feed", "facebook_stories", "x_twitter",
})

# aliases resolve to canonical tokens before lookup; extend via load_aliases()
DEFAULT_ALIASES = {
    "twitter": "x_twitter",
    "x": "x_twitter",
    "messenger": "facebook_messenger",
    "text_message": "sms",
    "imessage": "sms",
}


class AppMode(enum.Enum):
    DIRECT = "direct"
    BROADCAST = "broadcast"
    UNKNOWN = "unknown"


def canonical_token(app_type: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", str(app_type).strip().lower()).strip("_")


def load_aliases(path) -> dict:
    """Read an alias file (JSON or YAML mapping alias -> canonical token)."""
    text = Path(path).read_text()
    if str(path).endswith((".yaml", ".yml")):
        import yaml
        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    return {canonical_token(k): canonical_token(v) for k, v in data.items()}


def classify_app_mode(app_type: str, aliases: dict | None = None) -> AppMode:
    tok = canonical_token(app_type)
    table = DEFAULT_ALIASES if aliases is None else {**DEFAULT_ALIASES, **aliases}
    tok = table.get(tok, tok)
    if tok in DIRECT_APPS:
        return AppMode.DIRECT
    if tok in BROADCAST_APPS:
        return AppMode.BROADCAST
    return AppMode.UNKNOWN


@dataclass(frozen=True)
class ShareEvent:
    sender: int
    receiver: int
    track_id: int
    album_id: int
    artist_id: int
    artist_popularity_rank: int
    album_release_age: int
    app_type: str
    share_ts: int
    open_ts: int | None = None
    playback_30s: bool = False

    def __post_init__(self):
        if self.sender == self.receiver:
            raise ValueError("sender and receiver must differ")
        if self.artist_popularity_rank < 1:
            raise ValueError("artist_popularity_rank must be >= 1")
        if self.open_ts is not None and self.open_ts < self.share_ts:
            raise ValueError("open_ts precedes share_ts")
        if self.playback_30s and self.open_ts is None:
            raise ValueError("playback_30s requires open_ts")

    @property
    def key(self) -> tuple:
        return (self.share_ts, self.sender, self.receiver, self.track_id)


SHARE_FIELDS = tuple(f.name for f in fields(ShareEvent))
_INT_COLS = ("sender", "receiver", "track_id", "album_id", "artist_id",
             "artist_popularity_rank", "album_release_age", "share_ts")


def events_to_frame(events) -> pd.DataFrame:
    if isinstance(events, pd.DataFrame):
        return events
    rows = [asdict(e) for e in events]
    return normalize_frame(pd.DataFrame(rows, columns=list(SHARE_FIELDS)))


def normalize_frame(df: pd.DataFrame) -> pd.DataFrame:
    """Coerce a share table to the canonical dtypes, validating invariants."""
    missing = [c for c in SHARE_FIELDS if c not in df.columns]
    if missing:
        raise ValueError(f"share table missing columns {missing}")
    nulls = [c for c in (*_INT_COLS, "app_type", "playback_30s") if df[c].isna().any()]
    if nulls:
        raise ValueError(f"null values in required columns {nulls}")
    out = pd.DataFrame({c: df[c].to_numpy(dtype=np.int64) for c in _INT_COLS})
    out["app_type"] = df["app_type"].astype(str).to_numpy()
    out["open_ts"] = pd.array(df["open_ts"], dtype="Int64")
    out["playback_30s"] = df["playback_30s"].astype(bool).to_numpy()
    out = out[list(SHARE_FIELDS)]
    if (out["sender"] == out["receiver"]).any():
        raise ValueError("share with sender == receiver")
    if (out["artist_popularity_rank"] < 1).any():
        raise ValueError("artist_popularity_rank must be >= 1")
    opened = out["open_ts"].notna()
    if (out.loc[opened, "open_ts"].astype(np.int64) < out.loc[opened, "share_ts"]).any():
        raise ValueError("open_ts precedes share_ts")
    if (out["playback_30s"] & ~opened).any():
        raise ValueError("playback_30s set on an unopened share")
    return out


def frame_to_events(df: pd.DataFrame) -> list[ShareEvent]:
    out = []
    for rec in df.to_dict("records"):
        rec["open_ts"] = None if pd.isna(rec["open_ts"]) else int(rec["open_ts"])
        rec = {k: (v.item() if hasattr(v, "item") else v) for k, v in rec.items()}
        out.append(ShareEvent(**rec))
    return out


def open_ts_array(df: pd.DataFrame, missing: int = -1) -> np.ndarray:
    return df["open_ts"].to_numpy(dtype=np.int64, na_value=missing)


def sort_by_key(df: pd.DataFrame) -> pd.DataFrame:
    return df.sort_values(["share_ts", "sender", "receiver", "track_id"], kind="mergesort").reset_index(drop=True)


def read_shares_jsonl(path) -> pd.DataFrame:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except ValueError as exc:
                raise ValueError(f"{Path(path).name}:{lineno}: bad JSON ({exc})") from None
    return normalize_frame(pd.DataFrame(rows, columns=list(SHARE_FIELDS)))


def write_shares_jsonl(df: pd.DataFrame, path) -> None:
    df = normalize_frame(df)
    cols = {c: df[c].tolist() for c in SHARE_FIELDS if c != "open_ts"}
    opens = [None if pd.isna(v) else int(v) for v in df["open_ts"]]
    with open(path, "w") as fh:
        for i in range(len(df)):
            rec = {c: cols[c][i] for c in cols}
            rec["open_ts"] = opens[i]
            fh.write(json.dumps({c: rec[c] for c in SHARE_FIELDS}) + "\n")


def app_modes(df: pd.DataFrame, aliases: dict | None = None) -> np.ndarray:
    """AppMode value string per row."""
    lut = {tok: classify_app_mode(tok, aliases).value for tok in pd.unique(df["app_type"])}
    return df["app_type"].map(lut).to_numpy()


def filter_discovery_shares(events, playback_log):
    """Keep opened shares with a >=30 s playback whose receiver never played the artist before."""
    as_list = not isinstance(events, pd.DataFrame)
    df = events_to_frame(events)
    opened = df["open_ts"].notna().to_numpy()
    heard = playback_log.listened_before(df["receiver"].to_numpy(), df["artist_id"].to_numpy(),
                                         df["share_ts"].to_numpy())
    keep = opened & df["playback_30s"].to_numpy() & ~heard
    out = df.loc[keep].reset_index(drop=True)
    return frame_to_events(out) if as_list else out


def decile_edges(ranks, n_bins: int = 10) -> np.ndarray:
    """Quantile bin edges over popularity rank (duplicates collapsed)."""
    ranks = np.asarray(ranks, dtype=np.float64)
    if len(ranks) == 0:
        raise ValueError("no ranks to bin")
    edges = np.unique(np.quantile(ranks, np.linspace(0, 1, n_bins + 1)))
    if len(edges) == 1:
        edges = np.array([edges[0], edges[0] + 1.0])
    return edges


def popularity_bins(ranks, edges) -> np.ndarray:
    """Bin index per rank: ``[e_k, e_{k+1})`` with the last bin closed; -1 outside."""
    edges = np.asarray(edges, dtype=np.float64)
    r = np.asarray(ranks, dtype=np.float64)
    b = np.searchsorted(edges, r, side="right") - 1
    b = np.where(r == edges[-1], len(edges) - 2, b)
    return np.where((r < edges[0]) | (r > edges[-1]), -1, b)


def stratified_sample_by_artist(events, bins, cap_per_bin: int, seed: int):
    """Uniformly sample up to ``cap_per_bin`` events per popularity-rank bin."""
    edges = np.asarray(bins, dtype=np.float64)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing with at least two edges")
    if cap_per_bin < 0:
        raise ValueError("cap_per_bin must be >= 0")
    as_list = not isinstance(events, pd.DataFrame)
    df = events_to_frame(events)
    b = popularity_bins(df["artist_popularity_rank"].to_numpy(), edges)
    rng = np.random.default_rng(seed)
    chosen = []
    for k in range(len(edges) - 1):
        members = np.flatnonzero(b == k)
        take = min(cap_per_bin, len(members))
        if take == len(members):
            chosen.append(members)
        elif take > 0:
            chosen.append(rng.choice(members, size=take, replace=False))
    idx = np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, dtype=np.int64)
    out = df.iloc[idx].reset_index(drop=True)
    return frame_to_events(out) if as_list else out
