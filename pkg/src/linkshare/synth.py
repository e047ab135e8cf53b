"""Synthetic worlds with planted homophily and a planted engagement outcome.

A world has genres, artists with Zipf popularity ranks, tracks grouped into
albums, users with Dirichlet genre tastes, a tie list whose wiring follows
taste similarity with strength ``homophily``, pre-period interactions on the
three network layers, genre-coherent playlists, listening histories, long-term
fans and per-user account data.

Share events are then sampled along ties. Their features are computed with
the real extraction code, the outcome probability is logistic in transformed,
standardized features, and the post-share playback that realizes each label
is written into the playback log. Ground truth goes to a sidecar that the
pipeline never reads.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd

from ._index import DAY, day_of, derive_seed, save_npz
from .accounts import AccountLog, AccountRecord
from .embeddings import EmbeddingConfig, TasteIndex, train_track_embeddings
from .engagement import PlaybackLog
from .features import COL, FEATURE_COLUMNS, ExtractionContext, Reason, extract_batch
from .model.metrics import roc_auc
from .multiplex import LayerKind, MultiplexNetwork
from .shares import BROADCAST_APPS, DIRECT_APPS, normalize_frame

DEFAULT_BETA = {
    "sum_social_interactions": 0.3,
    "direct_link_share": 0.2,
    "reciprocal_link_sharing": 0.1,
    "receiver_share_in_degree": 0.02,
    "receiver_share_out_degree": 0.02,
    "sender_share_out_degree": 0.02,
    "fraction_engaged_friends": 0.25,
    "sr_cosine": 0.2,
    "rt_cosine": 0.5,
    "artist_popularity_rank": 0.2,
    "release_age_s": -0.1,
    "sender_artist_engagement_7d": 1.0,
    "is_subscriber": 0.2,
    "receiver_streaming_hours_7d": 0.4,
    "receiver_days_on_platform": 0.1,
}
INTERACTION_CAP = 5


def planted_transform(X: np.ndarray) -> np.ndarray:
    """Per-feature transforms the outcome model is linear in (NaN kept)."""
    Z = np.array(X, dtype=np.float64, copy=True)
    c = COL
    Z[:, c["sum_social_interactions"]] = np.minimum(Z[:, c["sum_social_interactions"]], INTERACTION_CAP)
    for name in ("receiver_share_in_degree", "receiver_share_out_degree", "sender_share_out_degree",
                 "sender_artist_engagement_7d", "receiver_streaming_hours_7d", "receiver_days_on_platform"):
        Z[:, c[name]] = np.log1p(np.maximum(Z[:, c[name]], 0))
    Z[:, c["fraction_engaged_friends"]] = np.maximum(Z[:, c["fraction_engaged_friends"]], 0.0)
    Z[:, c["artist_popularity_rank"]] = -np.log(Z[:, c["artist_popularity_rank"]])
    Z[:, c["release_age_s"]] = np.log1p(np.maximum(Z[:, c["release_age_s"]], 0) / DAY)
    return Z


def logistic(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class SynthConfig:
    n_users: int = 30_000
    n_genres: int = 12
    n_artists: int = 2_000
    n_tracks_per_artist: int = 8
    n_albums_per_artist: int = 2
    zipf_exponent: float = 1.0
    taste_concentration: float = 0.3          # Dirichlet alpha per genre
    homophily: float = 0.8
    homophily_candidates: int = 30
    ties_per_user: float = 6.0
    # pre-period network interactions, per tie
    share_rate_mean: float = 1.5
    share_rate_shape: float = 0.8
    p_mutual_share: float = 0.0006
    p_listening_session: float = 0.0005
    p_collab_playlist: float = 0.0005
    pre_period_days: int = 180
    # playlists and listening
    n_playlists: int = 20_000
    playlist_length: tuple = (10, 30)
    playlist_genre_purity: float = 0.85
    listens_per_user: float = 40.0
    p_short_listen: float = 0.15
    p_fan: float = 0.15
    p_fan_if_friended: float = 0.8            # fans cluster among socially connected users
    # share events
    n_share_events: int = 100_000
    decoy_fraction: float = 0.2
    p_reverse_share: float = 0.0008
    p_fan_shares_fan_artist: float = 0.8
    p_share_friend_artist: float = 0.7
    p_sender_listened: float = 0.5
    p_broadcast: float = 0.3
    p_unknown_app: float = 0.05
    mean_open_delay_s: float = 3 * 3600.0
    # outcome model
    beta: dict = field(default_factory=lambda: dict(DEFAULT_BETA))
    target_positive_rate: float = 0.45
    # analysis period shared with the pipeline
    start_ts: int = 1_680_307_200
    analysis_days: int = 91
    taste_window_days: int = 90
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.embedding, dict):
            self.embedding = EmbeddingConfig(**self.embedding)
        self.playlist_length = tuple(self.playlist_length)
        self.validate()

    def validate(self) -> None:
        for name in ("n_users", "n_genres", "n_artists", "n_tracks_per_artist", "n_albums_per_artist",
                     "homophily_candidates", "n_playlists", "n_share_events", "pre_period_days",
                     "analysis_days", "taste_window_days"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_users < 2:
            raise ValueError("n_users must be >= 2")
        if self.n_tracks_per_artist < 2:
            raise ValueError("n_tracks_per_artist must be >= 2 so engaged playback can use a second track")
        if not 0.0 <= self.homophily <= 1.0:
            raise ValueError("homophily must be in [0, 1]")
        for name in ("zipf_exponent", "taste_concentration", "ties_per_user", "share_rate_mean",
                     "share_rate_shape", "listens_per_user", "mean_open_delay_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("p_mutual_share", "p_listening_session", "p_collab_playlist", "playlist_genre_purity",
                     "p_short_listen", "p_fan", "p_fan_if_friended", "decoy_fraction", "p_reverse_share",
                     "p_fan_shares_fan_artist", "p_share_friend_artist", "p_sender_listened", "p_broadcast", "p_unknown_app"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")
        if self.p_broadcast + self.p_unknown_app > 1:
            raise ValueError("p_broadcast + p_unknown_app must be <= 1")
        if not 0.0 < self.target_positive_rate < 1.0:
            raise ValueError("target_positive_rate must be in (0, 1)")
        lo, hi = self.playlist_length
        if not 1 <= lo <= hi:
            raise ValueError("playlist_length must be (lo, hi) with 1 <= lo <= hi")
        unknown = set(self.beta) - set(FEATURE_COLUMNS)
        if unknown:
            raise ValueError(f"beta for unknown features {sorted(unknown)}")
        if self.analysis_days < 9:
            raise ValueError("analysis_days must leave room for shares after the first week")
        if self.n_ties > self.n_users * (self.n_users - 1) // 2:
            raise ValueError("infeasible config: requested ties exceed the number of user pairs")

    @property
    def n_ties(self) -> int:
        return int(round(self.n_users * self.ties_per_user / 2))

    @property
    def start_day(self) -> int:
        return int(day_of(self.start_ts))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["playlist_length"] = list(self.playlist_length)
        return d


def preset(name: str, **overrides) -> SynthConfig:
    """Named configurations: ``default`` (desk-scale), ``small`` (tests), ``homophily``."""
    base = {
        "default": {},
        "small": dict(n_users=3_000, n_artists=400, n_playlists=3_000, n_share_events=6_000,
                      embedding=EmbeddingConfig(dim=32, epochs=3)),
        "homophily": dict(n_users=10_000, n_artists=600, n_playlists=8_000, n_share_events=1,
                          listens_per_user=30.0, taste_concentration=0.15,
                          embedding=EmbeddingConfig(dim=32, epochs=3)),
    }
    if name not in base:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(base)}")
    return SynthConfig(**{**base[name], **overrides})


@dataclass
class Catalog:
    artist_genre: np.ndarray
    artist_rank: np.ndarray           # 1 = most popular
    artist_weight: np.ndarray         # Zipf weight, used for sampling
    album_release_ts: np.ndarray      # (n_artists * n_albums)
    n_tracks_per_artist: int
    n_albums_per_artist: int

    @property
    def n_artists(self) -> int:
        return len(self.artist_genre)

    def track_of(self, artist, k):
        return artist * self.n_tracks_per_artist + k

    def artist_of(self, track):
        return track // self.n_tracks_per_artist

    def album_of(self, track):
        k = track % self.n_tracks_per_artist
        return self.artist_of(track) * self.n_albums_per_artist + k % self.n_albums_per_artist


@dataclass
class World:
    config: SynthConfig
    catalog: Catalog
    taste: np.ndarray                 # (n_users, n_genres) latent genre mixtures
    ties: pd.DataFrame                # u, v, rate
    network: MultiplexNetwork
    playlists: list
    playback: PlaybackLog
    accounts: AccountLog
    fans: pd.DataFrame                # user, artist

    @property
    def users(self) -> np.ndarray:
        return np.arange(self.config.n_users, dtype=np.int64)


class _ArtistSampler:
    """Popularity-weighted artist draws conditioned on genre."""

    def __init__(self, catalog: Catalog, n_genres: int):
        self.by_genre = []
        for g in range(n_genres):
            arts = np.flatnonzero(catalog.artist_genre == g)
            w = catalog.artist_weight[arts]
            self.by_genre.append((arts, np.cumsum(w) / w.sum()))

    def draw(self, rng, genres) -> np.ndarray:
        genres = np.asarray(genres)
        out = np.empty(len(genres), dtype=np.int64)
        u = rng.random(len(genres))
        for g, (arts, cdf) in enumerate(self.by_genre):
            m = genres == g
            if m.any():
                out[m] = arts[np.minimum(np.searchsorted(cdf, u[m], side="right"), len(arts) - 1)]
        return out


def _draw_genres(rng, taste_rows) -> np.ndarray:
    cdf = np.cumsum(taste_rows, axis=1)
    u = rng.random(len(taste_rows))[:, None] * cdf[:, -1:]
    return np.minimum((cdf <= u).sum(axis=1), taste_rows.shape[1] - 1)


def _make_catalog(cfg: SynthConfig, rng) -> Catalog:
    A = cfg.n_artists
    genre = np.arange(A) % cfg.n_genres
    rng.shuffle(genre)
    rank = rng.permutation(A) + 1
    weight = 1.0 / rank.astype(np.float64) ** cfg.zipf_exponent
    ages = rng.uniform(30, 20 * 365, A * cfg.n_albums_per_artist)
    release = (cfg.start_ts - ages * DAY).astype(np.int64)
    return Catalog(genre, rank.astype(np.int64), weight, release, cfg.n_tracks_per_artist,
                   cfg.n_albums_per_artist)


def _make_ties(cfg: SynthConfig, taste, rng) -> pd.DataFrame:
    n, M = cfg.n_users, cfg.n_ties
    unit = taste / np.linalg.norm(taste, axis=1, keepdims=True)
    us, vs = [], []
    have = np.zeros(0, dtype=np.int64)
    for _ in range(50):
        need = M - len(have)
        if need <= 0:
            break
        m = int(need * 1.2) + 16
        u = rng.integers(0, n, m)
        cand = rng.integers(0, n, (m, cfg.homophily_candidates))
        sims = np.einsum("md,mcd->mc", unit[u], unit[cand])
        sims[cand == u[:, None]] = -np.inf
        best = cand[np.arange(m), np.argmax(sims, axis=1)]
        rand = cand[:, 0]
        v = np.where(rng.random(m) < cfg.homophily, best, rand)
        ok = u != v
        a, b = np.minimum(u[ok], v[ok]), np.maximum(u[ok], v[ok])
        key = a * n + b
        _, first = np.unique(key, return_index=True)
        first = np.sort(first)
        key = key[first]
        fresh = ~np.isin(key, have)
        us.append(u[ok][first][fresh])
        vs.append(v[ok][first][fresh])
        have = np.concatenate([have, key[fresh]])
    u = np.concatenate(us)[:M]
    v = np.concatenate(vs)[:M]
    if len(u) < M:
        raise ValueError("infeasible config: could not place the requested number of ties")
    rate = rng.gamma(cfg.share_rate_shape, cfg.share_rate_mean / cfg.share_rate_shape, M)
    return pd.DataFrame({"u": u, "v": v, "rate": rate})


def _pre_period_network(cfg: SynthConfig, ties: pd.DataFrame, rng) -> MultiplexNetwork:
    net = MultiplexNetwork()
    t0, t1 = cfg.start_ts - cfg.pre_period_days * DAY, cfg.start_ts
    u, v = ties["u"].to_numpy(), ties["v"].to_numpy()

    def times(k):
        return rng.integers(t0, t1, k)

    c = rng.poisson(ties["rate"].to_numpy())
    src, dst = np.repeat(u, c), np.repeat(v, c)
    back = rng.random(len(u)) < cfg.p_mutual_share
    cb = np.where(back, 1 + rng.poisson(0.5, len(u)), 0)
    src = np.concatenate([src, np.repeat(v, cb)])
    dst = np.concatenate([dst, np.repeat(u, cb)])
    net.ingest_arrays(LayerKind.LINK_SHARE, src, dst, times(len(src)))
    for kind, p in ((LayerKind.SOCIAL_LISTENING, cfg.p_listening_session),
                    (LayerKind.COLLAB_PLAYLIST, cfg.p_collab_playlist)):
        has = rng.random(len(u)) < p
        k = np.where(has, 1 + rng.poisson(1.0, len(u)), 0)
        net.ingest_arrays(kind, np.repeat(u, k), np.repeat(v, k), times(int(k.sum())))
    return net


def _make_playlists(cfg: SynthConfig, catalog: Catalog, sampler: _ArtistSampler, taste, rng) -> list:
    P = cfg.n_playlists
    lo, hi = cfg.playlist_length
    lengths = rng.integers(lo, hi + 1, P)
    owner = rng.integers(0, cfg.n_users, P)
    main = _draw_genres(rng, taste[owner])
    pid = np.repeat(np.arange(P), lengths)
    genre = np.where(rng.random(len(pid)) < cfg.playlist_genre_purity, main[pid],
                     rng.integers(0, cfg.n_genres, len(pid)))
    artist = sampler.draw(rng, genre)
    track = catalog.track_of(artist, rng.integers(0, cfg.n_tracks_per_artist, len(pid)))
    bounds = np.concatenate([[0], np.cumsum(lengths)])
    tl = track.tolist()
    return [tl[bounds[i]:bounds[i + 1]] for i in range(P)]


def _listening(cfg: SynthConfig, catalog: Catalog, sampler: _ArtistSampler, taste, rng):
    n = cfg.n_users
    k = rng.poisson(cfg.listens_per_user, n)
    user = np.repeat(np.arange(n, dtype=np.int64), k)
    genre = _draw_genres(rng, taste[user])
    artist = sampler.draw(rng, genre)
    track = catalog.track_of(artist, rng.integers(0, cfg.n_tracks_per_artist, len(user)))
    ts = rng.integers(cfg.start_ts - cfg.taste_window_days * DAY, cfg.start_ts, len(user))
    dur = np.where(rng.random(len(user)) < cfg.p_short_listen, rng.uniform(1, 29, len(user)),
                   rng.uniform(30, 300, len(user)))
    return PlaybackLog(user, track, artist, ts, np.round(dur, 1))


def _fans(cfg: SynthConfig, catalog: Catalog, sampler: _ArtistSampler, taste, friended, rng):
    """Daily listeners over the 180 days before the start; the first day has two tracks."""
    p = np.where(friended, cfg.p_fan_if_friended, cfg.p_fan)
    fan_user = np.flatnonzero(rng.random(cfg.n_users) < p).astype(np.int64)
    fan_artist = sampler.draw(rng, _draw_genres(rng, taste[fan_user]))
    D = 180
    days = cfg.start_day - D + np.arange(D)
    user = np.repeat(fan_user, D + 1)
    artist = np.repeat(fan_artist, D + 1)
    day = np.tile(np.concatenate([days[:1], days]), len(fan_user))
    T = cfg.n_tracks_per_artist
    k = rng.integers(0, T, len(user))
    # the extra first-day listen uses a different track than the first one
    first = np.tile(np.r_[True, np.zeros(D, dtype=bool)], len(fan_user))
    second = np.roll(first, 1)
    k[second] = (k[first] + 1 + rng.integers(0, T - 1, first.sum())) % T
    ts = day * DAY + rng.integers(0, DAY, len(user))
    dur = np.round(rng.uniform(60, 240, len(user)), 1)
    log = PlaybackLog(user, catalog.track_of(artist, k), artist, ts, dur)
    return pd.DataFrame({"user": fan_user, "artist": fan_artist}), log


def _accounts(cfg: SynthConfig, rng) -> AccountLog:
    n = cfg.n_users
    reg = cfg.start_ts - rng.integers(30 * DAY, 3000 * DAY, n)
    sub = rng.random(n) < 0.5
    sub_since = reg + ((cfg.start_ts - reg) * rng.random(n)).astype(np.int64)
    start = np.maximum(day_of(reg), cfg.start_day - 14)
    end = cfg.start_day + cfg.analysis_days + 8
    level = rng.lognormal(np.log(0.8), 0.8, n)
    recs = []
    for u in range(n):
        L = int(end - start[u])
        hours = np.round(level[u] * rng.gamma(2.0, 0.5, L), 2)
        recs.append(AccountRecord(u, int(reg[u]), int(sub_since[u]) if sub[u] else None, int(start[u]),
                                  hours.tolist()))
    return AccountLog(recs)


def generate_world(cfg: SynthConfig) -> World:
    """Everything up to the analysis start; deterministic given ``cfg.seed``."""
    rng = np.random.default_rng(derive_seed(cfg.seed, "synth.world"))
    catalog = _make_catalog(cfg, rng)
    taste = rng.dirichlet(np.full(cfg.n_genres, cfg.taste_concentration), cfg.n_users)
    taste = np.maximum(taste, 1e-12)
    sampler = _ArtistSampler(catalog, cfg.n_genres)
    ties = _make_ties(cfg, taste, rng)
    net = _pre_period_network(cfg, ties, rng)
    playlists = _make_playlists(cfg, catalog, sampler, taste, rng)
    history = _listening(cfg, catalog, sampler, taste, rng)
    friended = net.friend_counts(np.arange(cfg.n_users), cfg.start_ts) > 0
    fans, fan_log = _fans(cfg, catalog, sampler, taste, friended, rng)
    accounts = _accounts(cfg, rng)
    return World(cfg, catalog, taste, ties, net, playlists, PlaybackLog.concat([history, fan_log]),
                 accounts, fans)


@dataclass
class GroundTruth:
    """Planted outcome per discovery share; rows align with the event keys."""

    share_ts: np.ndarray
    sender: np.ndarray
    receiver: np.ndarray
    track_id: np.ndarray
    p_star: np.ndarray
    label: np.ndarray
    extractable: np.ndarray           # features were computable (row survives build_dataset)
    intercept: float
    beta: dict
    center: np.ndarray                # standardization of the transformed features
    scale: np.ndarray
    bayes_auc: float
    positive_rate: float

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({"share_ts": self.share_ts, "sender": self.sender, "receiver": self.receiver,
                             "track_id": self.track_id, "p_star": self.p_star, "label": self.label,
                             "extractable": self.extractable})

    def summary(self) -> dict:
        return {"intercept": self.intercept, "beta": self.beta, "bayes_auc": self.bayes_auc,
                "positive_rate": self.positive_rate, "n_events": int(len(self.p_star)),
                "n_extractable": int(self.extractable.sum()),
                "dominant_feature": dominant_feature(self.beta, self.scale)}

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            save_npz(fh, share_ts=self.share_ts, sender=self.sender, receiver=self.receiver,
                     track_id=self.track_id, p_star=self.p_star, label=self.label,
                     extractable=self.extractable, center=self.center, scale=self.scale,
                     summary=np.array(json.dumps(self.summary())))

    @classmethod
    def load(cls, path) -> "GroundTruth":
        with np.load(path) as d:
            s = json.loads(str(d["summary"]))
            return cls(d["share_ts"], d["sender"], d["receiver"], d["track_id"], d["p_star"], d["label"],
                       d["extractable"], s["intercept"], s["beta"], d["center"], d["scale"],
                       s["bayes_auc"], s["positive_rate"])


def dominant_feature(beta: dict, scale) -> str:
    """Feature with the largest planted |beta| (coefficients act on standardized inputs)."""
    return max(beta, key=lambda k: (abs(beta[k]), k))


def _calibrate_intercept(eta, target, tol=1e-12) -> float:
    lo, hi = -50.0, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if logistic(eta + mid).mean() < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def plant_outcome(X, ok, beta: dict, target_rate: float):
    """Standardize transformed features, calibrate the intercept, return ``(p_star, b0, center, scale)``."""
    Z = planted_transform(X)
    center = np.nanmean(Z[ok], axis=0)
    scale = np.nanstd(Z[ok], axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    Zs = (Z - center) / scale
    Zs = np.where(np.isnan(Zs), 0.0, Zs)
    b = np.array([beta.get(c, 0.0) for c in FEATURE_COLUMNS])
    eta = Zs @ b
    b0 = _calibrate_intercept(eta[ok], target_rate)
    return logistic(eta + b0), b0, center, scale


@dataclass
class ShareWorld:
    """A world after share generation: the full set of pipeline inputs plus ground truth."""

    world: World
    events: pd.DataFrame
    playback: PlaybackLog
    network: MultiplexNetwork
    truth: GroundTruth
    kind: np.ndarray                  # per event row: discovery / unopened / short / heard


def _app_tokens(cfg: SynthConfig, rng, n):
    direct = sorted(DIRECT_APPS)
    broadcast = sorted(BROADCAST_APPS)
    u = rng.random(n)
    out = np.array([direct[i] for i in rng.integers(0, len(direct), n)], dtype=object)
    b = u < cfg.p_broadcast
    out[b] = [broadcast[i] for i in rng.integers(0, len(broadcast), int(b.sum()))]
    out[(u >= cfg.p_broadcast) & (u < cfg.p_broadcast + cfg.p_unknown_app)] = "copy_link"
    return out


def generate_share_events(world: World, cfg: SynthConfig | None = None) -> ShareWorld:
    cfg = cfg or world.config
    rng = np.random.default_rng(derive_seed(cfg.seed, "synth.shares"))
    cat = world.catalog
    T = cfg.n_tracks_per_artist
    sampler = _ArtistSampler(cat, cfg.n_genres)
    ties = world.ties
    n_disc = cfg.n_share_events
    n_decoy = int(round(n_disc * cfg.decoy_fraction))
    n_total = n_disc + n_decoy

    heard = np.unique((world.playback.user << 32) | world.playback.artist)
    fan_of = np.full(cfg.n_users, -1, dtype=np.int64)
    fan_of[world.fans["user"].to_numpy()] = world.fans["artist"].to_numpy()
    # one fan friend per receiver (as of the start), used to plant social cohesion
    q, f = world.network.friends_batch(world.users, np.full(cfg.n_users, cfg.start_ts))
    fan_friend = np.full(cfg.n_users, -1, dtype=np.int64)
    has_fan = fan_of[f] >= 0
    fan_friend[q[has_fan]] = fan_of[f[has_fan]]
    w_tie = ties["rate"].to_numpy() + 0.2
    w_tie = w_tie / w_tie.sum()

    chosen = None
    for attempt in range(6):
        M = int(n_total * (1.6 + attempt)) + 64
        tie = rng.choice(len(ties), M, p=w_tie)
        rev = rng.random(M) < cfg.p_reverse_share
        tu, tv = ties["u"].to_numpy()[tie], ties["v"].to_numpy()[tie]
        sender = np.where(rev, tv, tu)
        receiver = np.where(rev, tu, tv)
        artist = sampler.draw(rng, _draw_genres(rng, world.taste[sender]))
        use_fan = (fan_of[sender] >= 0) & (rng.random(M) < cfg.p_fan_shares_fan_artist)
        artist = np.where(use_fan, fan_of[sender], artist)
        cohesive = (fan_friend[receiver] >= 0) & (rng.random(M) < cfg.p_share_friend_artist)
        artist = np.where(cohesive, fan_friend[receiver], artist)
        rk = (receiver << 32) | artist
        sk = (sender << 32) | artist
        ok = ~np.isin(rk, heard) & ~np.isin(rk, sk)
        idx = np.flatnonzero(ok)
        _, first = np.unique(rk[idx], return_index=True)
        idx = np.sort(idx[first])
        if len(idx) >= n_total:
            chosen = idx[:n_total]
            break
    if chosen is None:
        raise ValueError("infeasible config: not enough distinct discovery (receiver, artist) pairs")
    sender, receiver, artist, fan_share = sender[chosen], receiver[chosen], artist[chosen], use_fan[chosen]

    kind = np.array(["discovery"] * n_disc + ["unopened", "short", "heard"] * (n_decoy // 3)
                    + ["unopened"] * (n_decoy % 3), dtype=object)
    # non-discovery decoys: swap in an artist the receiver has already played
    heard_rows = np.flatnonzero(kind == "heard")
    if len(heard_rows):
        pb = world.playback
        order = np.argsort(pb.user, kind="stable")
        pu = pb.user[order]
        lo = np.searchsorted(pu, receiver[heard_rows])
        hi = np.searchsorted(pu, receiver[heard_rows], side="right")
        has = hi > lo
        pick = lo + (rng.random(len(heard_rows)) * np.maximum(hi - lo, 1)).astype(np.int64)
        artist[heard_rows[has]] = pb.artist[order][pick[has]]
        kind[heard_rows[~has]] = "unopened"

    n = len(chosen)
    share_ts = rng.integers(cfg.start_ts + 7 * DAY, cfg.start_ts + cfg.analysis_days * DAY, n)
    share_day = day_of(share_ts)
    k_track = rng.integers(0, T, n)
    track = cat.track_of(artist, k_track)
    album = cat.album_of(track)
    release_age = share_ts - cat.album_release_ts[album]
    delay = rng.exponential(cfg.mean_open_delay_s, n).astype(np.int64)
    open_ts = np.minimum(share_ts + delay, (share_day + 2) * DAY - 1)
    opened = kind != "unopened"
    played = (kind == "discovery") | (kind == "heard")
    events = pd.DataFrame({
        "sender": sender, "receiver": receiver, "track_id": track, "album_id": album,
        "artist_id": artist, "artist_popularity_rank": cat.artist_rank[artist],
        "album_release_age": release_age, "app_type": _app_tokens(cfg, rng, n), "share_ts": share_ts,
        "open_ts": pd.array(np.where(opened, open_ts, 0), dtype="Int64"), "playback_30s": played,
    })
    events.loc[~opened, "open_ts"] = pd.NA
    events = normalize_frame(events)

    # sender listening in the week before the share
    p_listen = np.where(fan_share, 0.9, cfg.p_sender_listened)
    active = (rng.random(n) < p_listen) & (kind == "discovery")
    intensity = rng.beta(1.2, 1.5, n)
    sa_rows, sa_day, sa_k = [], [], []
    for d in range(1, 8):
        on = active & (rng.random(n) < intensity)
        extra = on & (rng.random(n) < intensity * 0.6)
        for rows, k in ((np.flatnonzero(on), 0), (np.flatnonzero(extra), 1)):
            sa_rows.append(rows)
            sa_day.append(share_day[rows] - d)
            sa_k.append(np.full(len(rows), k))
    sa_rows = np.concatenate(sa_rows)
    sa_day = np.concatenate(sa_day)
    sa_k = (k_track[sa_rows] + 1 + np.concatenate(sa_k)) % T
    sa_log = PlaybackLog(sender[sa_rows], cat.track_of(artist[sa_rows], sa_k), artist[sa_rows],
                         sa_day * DAY + rng.integers(0, DAY, len(sa_rows)),
                         np.round(rng.uniform(60, 240, len(sa_rows)), 1))

    o = np.flatnonzero(opened)
    open_dur = np.where(kind[o] == "short", 10.0, np.round(rng.uniform(30, 240, len(o)), 1))
    open_log = PlaybackLog(receiver[o], track[o], artist[o], open_ts[o], open_dur)

    network = _copy_network(world.network)
    network.ingest_arrays(LayerKind.LINK_SHARE, sender, receiver, share_ts)
    pre_label = PlaybackLog.concat([world.playback, sa_log, open_log])

    space = train_track_embeddings(world.playlists, replace(cfg.embedding,
                                                            seed=derive_seed(cfg.seed, "embedding")))
    taste = TasteIndex.from_playback(space, pre_label,
                                     (cfg.start_ts - cfg.taste_window_days * DAY, cfg.start_ts))
    ctx = ExtractionContext(network, taste, pre_label, world.accounts, cfg.start_ts)
    disc = np.flatnonzero(kind == "discovery")
    ext = extract_batch(events.iloc[disc].reset_index(drop=True), ctx)
    ok = ext.reason == Reason.OK
    p_star, b0, center, scale = plant_outcome(ext.X, ok, cfg.beta, cfg.target_positive_rate)
    label = rng.random(len(disc)) < p_star

    # realize engaged outcomes: more distinct tracks of the artist within the label week
    pos = disc[label]
    n_extra = np.minimum(1 + (rng.random(len(pos)) < 0.4) + (rng.random(len(pos)) < 0.2), T - 1)
    rows = np.repeat(pos, n_extra)
    rank = np.concatenate([np.arange(1, m + 1) for m in n_extra]) if len(pos) else np.zeros(0, np.int64)
    window_end = (day_of(open_ts[rows]) + 7) * DAY
    ts = open_ts[rows] + (rng.random(len(rows)) * (window_end - open_ts[rows])).astype(np.int64)
    label_log = PlaybackLog(receiver[rows], cat.track_of(artist[rows], (k_track[rows] + rank) % T),
                            artist[rows], ts, np.round(rng.uniform(30, 240, len(rows)), 1))
    playback = PlaybackLog.concat([pre_label, label_log])

    truth = GroundTruth(share_ts[disc], sender[disc], receiver[disc], track[disc], p_star,
                        label.astype(np.int64), ok, float(b0), dict(cfg.beta), center, scale,
                        float(roc_auc(p_star[ok], label[ok])) if 0 < label[ok].sum() < ok.sum() else float("nan"),
                        float(label[ok].mean()) if ok.any() else float("nan"))
    return ShareWorld(world, events, playback, network, truth, kind)


def _copy_network(net: MultiplexNetwork) -> MultiplexNetwork:
    out = MultiplexNetwork()
    for kind in LayerKind:
        s, d, t = net.layer_arrays(kind)
        if len(s):
            out.ingest_arrays(kind, s, d, t)
    return out


def generate(cfg: SynthConfig) -> ShareWorld:
    return generate_share_events(generate_world(cfg), cfg)
