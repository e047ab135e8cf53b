"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``criterion N: PASS/FAIL`` line and the session summary
repeats them. Criteria 5, 6, 7 and 10 share one default-size pipeline run
(100k share events); expect roughly a quarter of an hour on one core.
"""
import json
import math
import time
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

import oracles
from conftest import record_criterion
from linkshare._index import DAY, derive_seed
from linkshare.analyses import engagement_curve_family, homophily
from linkshare.audit import temporal_audit
from linkshare.config import RunConfig, load
from linkshare.embeddings import TasteIndex, train_track_embeddings
from linkshare.engagement import PlaybackLog, daily_engagement_value, is_engaged_receiver
from linkshare.features import COL, extract_batch, group_indices, read_dataset, to_matrix
from linkshare.model import average_precision, fit_forest, roc_auc
from linkshare.model.forest import Hyperparams
from linkshare.multiplex import LayerKind, MultiplexNetwork
from linkshare.pipeline import Run, run
from linkshare.shares import filter_discovery_shares, read_shares_jsonl
from linkshare.stats import ks_statistic
from linkshare.synth import generate_world, preset

pytestmark = pytest.mark.slow
DOMINANT = "sender_artist_engagement_7d"


def _check(number, ok, detail):
    record_criterion(number, bool(ok), detail)
    assert ok, detail


# -- 1, 2: engagement arithmetic ------------------------------------------

def _log(per_day):
    """Playback for user 0 / artist 0: ``per_day[d]`` distinct tracks played on day ``d``."""
    rows = [(0, 1000 * d + k, 0, d * DAY + 60 * k, 120.0) for d, n in enumerate(per_day) for k in range(n)]
    return PlaybackLog(*zip(*rows))


def _E(per_day):
    return float(_log(per_day).window_sums([0], [0], 0, len(per_day))[0])


def test_criterion_1_engagement_formula():
    want = {1: 1.0, 2: 1.30103, 10: 2.0}
    exact = all(abs(daily_engagement_value(n) - (math.log10(n) + 1)) <= 1e-9 and
                abs(daily_engagement_value(n) - v) <= 1e-5 for n, v in want.items())
    zero = daily_engagement_value(0) == 0.0
    two, one = is_engaged_receiver(_E([2])), is_engaged_receiver(_E([1]))
    _check(1, exact and zero and two and not one,
           f"e(1,2,10)={[round(daily_engagement_value(n), 9) for n in want]}, e(0)={daily_engagement_value(0)}; "
           f"two tracks in one day engaged={two}, one track engaged={one}")


def test_criterion_2_curve_family_and_spreading():
    t0 = time.perf_counter()
    fam = engagement_curve_family(max_tracks=10, max_days=7)
    fam_ok = np.allclose(fam["E"], fam["t_max"] * (np.log10(fam["n_tracks_per_day"]) + 1), rtol=0, atol=1e-12)
    from_logs = all(abs(_E([n] * t) - t * (math.log10(n) + 1)) <= 1e-12 for n in (1, 2, 5) for t in (1, 3, 7))
    spread = [_E([1] * m) > _E([m]) for m in range(2, 101)]
    dt = time.perf_counter() - t0
    _check(2, fam_ok and from_logs and all(spread) and dt < 1.0,
           f"family exact={fam_ok and from_logs}, spreading holds for {sum(spread)}/99 m in 2..100, "
           f"{dt * 1000:.0f} ms")


# -- 3: oracle equivalence -------------------------------------------------

def test_criterion_3_oracle_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    counts = dict.fromkeys(("ks", "auc", "ap", "clustering", "overlap"), 0)
    bad = []
    for inst in range(100):
        n = int(rng.integers(2, 501))
        # KS on tied, discrete samples
        na = int(rng.integers(1, n))
        x = rng.integers(0, 40, n).astype(float)
        a, b = x[:na].tolist(), x[na:].tolist()
        if ks_statistic(a, b) != float(oracles.ks_d(a, b)):
            bad.append(("ks", inst))
        counts["ks"] += 1
        # AUC and AP with ties
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        s = rng.integers(0, 25, n).astype(float) / 7
        if roc_auc(s, y) != float(oracles.auc_pairs(s.tolist(), y.tolist())):
            bad.append(("auc", inst))
        if abs(average_precision(s, y) - oracles.average_precision(s.tolist(), y.tolist())) > 1e-12:
            bad.append(("ap", inst))
        counts["auc"] += 1
        counts["ap"] += 1
        # clustering and overlap on a random multiplex graph of n events
        users = int(rng.integers(3, 40))
        layers = rng.choice(["listening", "playlist", "share"], n)
        src = rng.integers(0, users, n)
        dst = (src + rng.integers(1, users, n)) % users
        ts = rng.integers(0, 100, n)
        events = list(zip(layers.tolist(), src.tolist(), dst.tolist(), ts.tolist()))
        net = MultiplexNetwork()
        for kind in LayerKind:
            m = layers == kind.value
            if m.any():
                net.ingest_arrays(kind, src[m], dst[m], ts[m])
        as_of = int(rng.integers(0, 110))
        fr = oracles.friend_sets(events, as_of)
        for u in range(users):
            if net.clustering_coefficient(u, as_of) != oracles.clustering(fr, u):
                bad.append(("clustering", inst, u))
            v = (u + 1) % users
            if net.edge_overlap(u, v, as_of) != oracles.overlap(fr, u, v):
                bad.append(("overlap", inst, u))
        counts["clustering"] += 1
        counts["overlap"] += 1
    dt = time.perf_counter() - t0
    _check(3, not bad and min(counts.values()) >= 100 and dt < 60,
           f"{counts['ks']} instances per metric (size <= 500), {len(bad)} mismatches, {dt:.1f} s")


# -- 4: homophily ------------------------------------------------------------

def _homophily_world(h, seed=0):
    cfg = preset("homophily", homophily=h, seed=seed)
    w = generate_world(cfg)
    space = train_track_embeddings(w.playlists, replace(cfg.embedding, seed=derive_seed(seed, "embedding")))
    taste = TasteIndex.from_playback(space, w.playback, (cfg.start_ts - cfg.taste_window_days * DAY, cfg.start_ts))
    _, ks = homophily(w.ties[["u", "v"]].to_numpy(), taste, seed=derive_seed(seed, "analyze"))
    return cfg, ks


def test_criterion_4_homophily_recovery():
    t0 = time.perf_counter()
    cfg_hi, hi = _homophily_world(0.8)
    _, lo = _homophily_world(0.0)
    dt = time.perf_counter() - t0
    gap = hi["mean"][0] - hi["mean"][1]
    ok = cfg_hi.n_users == 10_000 and gap >= 0.1 and hi["p_value"] < 0.01 and lo["D"] < 0.05 and dt < 120
    _check(4, ok, f"h=0.8: mean gap {gap:.3f}, D={hi['D']:.3f}, p={hi['p_value']:.2g}; "
                  f"h=0: D={lo['D']:.4f}; {cfg_hi.n_users} users, {dt:.0f} s for both worlds")


# -- shared default-size run -------------------------------------------------

@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept") / "run"
    cfg = RunConfig(seed=0)
    r = Run(cfg, out)
    timings = {}
    t0 = time.perf_counter()
    for stage in ("generate", "ingest", "embed", "features", "train"):
        t = time.perf_counter()
        r.run(stage)
        timings[stage] = time.perf_counter() - t
    timings["end_to_end"] = time.perf_counter() - t0
    for stage in ("analyze", "isolate", "report"):
        t = time.perf_counter()
        r.run(stage)
        timings[stage] = time.perf_counter() - t
    return r, timings


def test_criterion_5_planted_model_recovery(default_run):
    r, _ = default_run
    truth = json.loads(r.path("truth", "summary.json").read_text())
    cv = json.loads(r.path("model", "cv.json").read_text())
    bayes, auc = truth["bayes_auc"], cv["summary"]["roc_auc"]
    fig9 = pd.read_csv(r.path("report", "fig9.csv"))
    top2 = fig9["feature"].head(2).tolist()
    table = pd.read_csv(r.path("isolate", "table2.csv"))
    groups = table[table["feature_set"] != "Full Model"]
    full = float(table.loc[table["feature_set"] == "Full Model", "roc_auc"].iloc[0])
    dom_group = next(g for g, idx in group_indices().items() if COL[DOMINANT] in idx)
    best_group = groups.loc[groups["roc_auc"].idxmax(), "feature_set"]
    ds = read_dataset(r.path("features", "dataset.csv"))
    ok = (truth["n_events"] == 100_000 and cv["k"] == 5 and bayes - 0.05 <= auc <= bayes + 0.01
          and truth["dominant_feature"] == DOMINANT and DOMINANT in top2
          and best_group == dom_group and full >= groups["roc_auc"].max())
    _check(5, ok, f"{truth['n_events']} events ({len(ds)} examples), 5-fold AUC {auc:.4f} vs Bayes {bayes:.4f} "
                  f"(window [{bayes - 0.05:.4f}, {bayes + 0.01:.4f}]); MDI top2 {top2}; best group {best_group} "
                  f"({groups['roc_auc'].max():.4f}) <= Full {full:.4f}")


def test_criterion_6_planted_effect_shapes(default_run):
    r, _ = default_run
    f4 = pd.read_csv(r.path("figures", "fig4a.csv"))
    f4 = f4[~f4["masked"]]
    mid = ((f4["bin_left"] + f4["bin_right"]) / 2).tolist()
    rho = oracles.spearman(mid, f4["p_hat"].tolist())
    f8 = pd.read_csv(r.path("figures", "fig8.csv"))
    plateau = f8[(f8["bin_left"] >= 5) & ~f8["masked"]]
    lo, hi = plateau["ci_low"].max(), plateau["ci_high"].min()
    ok = rho > 0.9 and len(plateau) >= 2 and lo <= hi
    _check(6, ok, f"rt_cosine bin Spearman {rho:.3f} over {len(f4)} bins; interaction bins >= 5 "
                  f"({len(plateau)} unmasked, p_hat {plateau['p_hat'].min():.3f}-{plateau['p_hat'].max():.3f}) "
                  f"share CI overlap [{lo:.3f}, {hi:.3f}]")


def test_criterion_7_sparse_feature(default_run):
    r, _ = default_run
    ds = read_dataset(r.path("features", "dataset.csv"))
    avail = float(ds["fraction_engaged_friends_available"].mean())
    table = pd.read_csv(r.path("isolate", "table2.csv")).set_index("feature_set")
    p, rc = table.loc["SC", "precision"], table.loc["SC", "recall"]
    _check(7, p - rc >= 0.3, f"fraction_engaged_friends available in {avail:.2%} of rows; "
                             f"SC precision {p:.3f} - recall {rc:.3f} = {p - rc:.3f}")


# -- 8: determinism ----------------------------------------------------------

def test_criterion_8_determinism(tmp_path):
    cfg = load("configs/small.yaml")
    for d in ("a", "b"):
        run("all", cfg, tmp_path / d)
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    differ = [str(f) for f in files_a if (tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes()]
    X, y = to_matrix(read_dataset(tmp_path / "a" / "features" / "dataset.csv"))
    hp = Hyperparams(n_estimators=24, max_depth=12, min_samples_leaf=5, seed=7)
    fit_forest(X, y, hp, n_jobs=1).save(tmp_path / "serial.npz")
    fit_forest(X, y, hp, n_jobs=4).save(tmp_path / "parallel.npz")
    same_forest = (tmp_path / "serial.npz").read_bytes() == (tmp_path / "parallel.npz").read_bytes()
    ok = files_a == files_b and not differ and same_forest
    _check(8, ok, f"{len(files_a)} artifacts across 8 stages, {len(differ)} differ between same-seed runs; "
                  f"serial vs 4-thread forest identical={same_forest}")


# -- 9: temporal hygiene -----------------------------------------------------

def test_criterion_9_temporal_hygiene(default_run):
    r, _ = default_run
    ctx = r.context()
    shares = read_shares_jsonl(r.path("store", "shares.jsonl"))
    a = r.cfg.analysis
    shares = shares[(shares["share_ts"] >= a.start_ts) & (shares["share_ts"] < a.start_ts + a.days * DAY)]
    events = filter_discovery_shares(shares.reset_index(drop=True), ctx.playback)
    t0 = time.perf_counter()
    res = temporal_audit(events, ctx, n=10_000, seed=derive_seed(r.cfg.seed, "audit"))
    dt = time.perf_counter() - t0
    _check(9, res.n_audited == 10_000 and res.ok,
           f"{res.n_identical}/{res.n_audited} audited events bit-identical after truncation "
           f"({res.n_open_later_day} opened on a later day; usage features cut at open time), {dt:.0f} s")


# -- 10: desk-scale performance ----------------------------------------------

def test_criterion_10_performance(default_run):
    r, timings = default_run
    ctx = r.context()
    events = read_dataset(r.path("features", "dataset.csv"))
    shares = read_shares_jsonl(r.path("store", "shares.jsonl"))
    keys = ["share_ts", "sender", "receiver", "track_id"]
    events = shares.merge(events[keys], on=keys)
    ctx.engaged_friend_keys()       # one-off index build, not per-event work
    t0 = time.perf_counter()
    extract_batch(events, ctx)
    rate = len(events) / (time.perf_counter() - t0)
    stages = ", ".join(f"{k} {v:.0f}s" for k, v in timings.items() if k != "end_to_end")
    ok = timings["end_to_end"] < 600 and rate >= 10_000
    _check(10, ok, f"generate->train {timings['end_to_end']:.0f} s (< 600); extraction {rate:,.0f} events/s "
                   f"on {len(events)} events; stages: {stages}")
