"""Figure-data tables computed from a labeled dataset and the stores.

Every function returns plain DataFrames / dicts; :func:`write_all` names the
files after the figure they mirror (see the README table).
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .engagement import RECEIVER_THRESHOLD, RECEIVER_WINDOW_DAYS, daily_engagement_value
from .features import FEATURE_COLUMNS
from .shares import AppMode, decile_edges, popularity_bins
from .stats import BinSpec, binned_probability_curve, ecdf, ks_two_sample, pearson_correlation, permutation_baseline

GRID = np.linspace(-1.0, 1.0, 201)
CURVE_COLUMNS = ["stratum", "bin_left", "bin_right", "count", "engaged", "p_hat", "ci_low", "ci_high", "masked"]


def curve_frame(curves) -> pd.DataFrame:
    if not isinstance(curves, dict):
        curves = {"all": curves}
    rows = []
    for key, c in curves.items():
        for k in range(len(c.count)):
            rows.append((str(key), float(c.edges[k]), float(c.edges[k + 1]), int(c.count[k]), int(c.engaged[k]),
                         float(c.p_hat[k]), float(c.ci_low[k]), float(c.ci_high[k]), bool(c.masked[k])))
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


def engagement_curve_family(max_tracks: int = 10, max_days: int = RECEIVER_WINDOW_DAYS) -> pd.DataFrame:
    """E for n unique tracks per day sustained over t_max days."""
    rows = [(n, t, sum(daily_engagement_value(n) for _ in range(t)))
            for t in range(1, max_days + 1) for n in range(1, max_tracks + 1)]
    return pd.DataFrame(rows, columns=["n_tracks_per_day", "t_max", "E"])


def ecdf_frame(values) -> pd.DataFrame:
    xs, F = ecdf(values).steps()
    return pd.DataFrame({"x": xs, "F": F})


def ecdf_grid(groups: dict) -> pd.DataFrame:
    out = {"cosine": GRID}
    for name, v in groups.items():
        out[f"F_{name}"] = ecdf(v)(GRID) if len(v) else np.full(len(GRID), np.nan)
    return pd.DataFrame(out)


def ks_summary(a, b, names) -> dict:
    if len(a) == 0 or len(b) == 0:
        return {"groups": list(names), "n": [len(a), len(b)], "D": None, "p_value": None}
    r = ks_two_sample(a, b)
    return {"groups": list(names), "n": [r.n_a, r.n_b], "D": r.D, "p_value": r.p_value,
            "mean": [float(np.mean(a)), float(np.mean(b))]}


def homophily(pairs, taste, seed: int):
    """Observed vs sender-shuffled pair cosines; unique pairs with taste vectors on both sides."""
    pairs = np.unique(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=0)
    ok = (taste.rows(pairs[:, 0]) >= 0) & (taste.rows(pairs[:, 1]) >= 0)
    obs, shuf = permutation_baseline(pairs[ok], taste, seed=seed)
    return ecdf_grid({"observed": obs, "shuffled": shuf}), ks_summary(obs, shuf, ("observed", "shuffled"))


def _spec(stats_cfg) -> BinSpec:
    return BinSpec(kind=stats_cfg.bin_kind, n_bins=stats_cfg.n_bins, min_count=stats_cfg.min_count)


def integer_edges(values, cap: int = 20) -> np.ndarray:
    top = int(np.max(values)) if len(values) else 0
    edges = np.arange(0, min(top, cap) + 1, dtype=np.float64)
    return np.append(edges, max(top, cap) + 1.0) if top >= cap else np.append(edges, top + 1.0)


def integer_curve(values, engaged, min_count, strata=None, cap: int = 20):
    spec = BinSpec(kind="edges", edges=tuple(integer_edges(values, cap)), min_count=min_count)
    return binned_probability_curve(values, engaged, spec, strata=strata)


def tie_strength(ds: pd.DataFrame, stats_cfg):
    """Reciprocity and app-mode panels: pair-cosine distributions and engagement curves."""
    y = ds["label"].to_numpy().astype(bool)
    sr, rt = ds["sr_cosine"].to_numpy(), ds["rt_cosine"].to_numpy()
    recip = np.where(ds["reciprocal_link_sharing"].to_numpy() > 0, "reciprocal", "non_reciprocal")
    mode = ds["app_mode"].to_numpy()
    known = mode != AppMode.UNKNOWN.value
    out = {
        "fig6a": ecdf_grid({k: sr[recip == k] for k in ("reciprocal", "non_reciprocal")}),
        "fig6a_ks": ks_summary(sr[recip == "reciprocal"], sr[recip == "non_reciprocal"],
                               ("reciprocal", "non_reciprocal")),
        "fig6b": curve_frame(binned_probability_curve(rt, y, _spec(stats_cfg), strata=recip)),
        "fig6c": ecdf_grid({k: sr[mode == k] for k in ("direct", "broadcast")}),
        "fig6c_ks": ks_summary(sr[mode == "direct"], sr[mode == "broadcast"], ("direct", "broadcast")),
    }
    out["fig6d"] = (curve_frame(binned_probability_curve(rt[known], y[known], _spec(stats_cfg), strata=mode[known]))
                    if known.any() else pd.DataFrame(columns=CURVE_COLUMNS))
    return out


def interactions(ds: pd.DataFrame, stats_cfg, cap: int = 20) -> pd.DataFrame:
    x = ds["sum_social_interactions"].to_numpy()
    return curve_frame(integer_curve(x, ds["label"].to_numpy().astype(bool), stats_cfg.min_count, cap=cap))


def cohesion(ds: pd.DataFrame, stats_cfg, friend_counts=(2, 3, 5), n_tiers: int = 3):
    y = ds["label"].to_numpy().astype(bool)
    nf = ds["n_friends"].to_numpy()
    ne = ds["n_engaged_friends"].to_numpy()
    dist = pd.Series(nf).value_counts().sort_index()
    out = {"fig7a": pd.DataFrame({"n_friends": dist.index.to_numpy(), "count": dist.to_numpy()})}
    sel = np.isin(nf, friend_counts)
    out["fig7b"] = (curve_frame(integer_curve(ne[sel], y[sel], stats_cfg.min_count,
                                              strata=np.array([f"friends_{k}" for k in nf[sel]])))
                    if sel.any() else pd.DataFrame(columns=CURVE_COLUMNS))
    has = nf > 0
    if has.any():
        ranks = ds["artist_popularity_rank"].to_numpy()[has]
        tier = popularity_bins(ranks, decile_edges(ranks, n_tiers))
        out["fig7c"] = curve_frame(integer_curve(ne[has], y[has], stats_cfg.min_count,
                                                 strata=np.array([f"popularity_tier_{t}" for t in tier])))
    else:
        out["fig7c"] = pd.DataFrame(columns=CURVE_COLUMNS)
    return out


def neighbourhood(ds: pd.DataFrame, network, stats_cfg):
    """Engagement against receiver clustering coefficient and sender-receiver edge overlap."""
    y = ds["label"].to_numpy().astype(bool)
    r, s, t = (ds[c].to_numpy() for c in ("receiver", "sender", "share_ts"))
    nf = ds["n_friends"].to_numpy()
    cc = np.zeros(len(ds))
    ov = np.zeros(len(ds))
    for i in np.flatnonzero(nf >= 2):
        cc[i] = network.clustering_coefficient(int(r[i]), int(t[i]))
    s_has = network.friend_counts(s, t) > 0
    for i in np.flatnonzero((nf > 0) | s_has):
        ov[i] = network.edge_overlap(int(r[i]), int(s[i]), int(t[i]))
    spec = BinSpec(kind="width", n_bins=stats_cfg.n_bins, min_count=stats_cfg.min_count)
    return {"cohesion_clustering": curve_frame(binned_probability_curve(cc, y, spec)),
            "cohesion_overlap": curve_frame(binned_probability_curve(ov, y, spec))}


def correlations(ds: pd.DataFrame) -> dict:
    y = ds["label"].to_numpy().astype(np.float64)
    out = {"feature_label_pearson": {}}
    for c in FEATURE_COLUMNS:
        x = ds[c].to_numpy(np.float64)
        if np.ptp(x) == 0 or np.ptp(y) == 0:
            out["feature_label_pearson"][c] = None
            continue
        r, p = pearson_correlation(x, y)
        out["feature_label_pearson"][c] = {"r": r, "p_value": p}
    si = ds["sum_social_interactions"]
    out["mean_interactions_by_mode"] = {k: float(v) for k, v in si.groupby(ds["app_mode"]).mean().items()}
    out["mean_interactions_by_reciprocity"] = {
        ("reciprocal" if k else "non_reciprocal"): float(v)
        for k, v in si.groupby(ds["reciprocal_link_sharing"] > 0).mean().items()}
    return out


def compute_all(ds: pd.DataFrame, network, taste, stats_cfg, seed: int) -> dict:
    y = ds["label"].to_numpy().astype(bool)
    out = {"fig2a": engagement_curve_family(), "fig2b": ecdf_frame(ds["receiver_engagement_7d"].to_numpy())}
    out["fig2b_threshold"] = {"threshold": RECEIVER_THRESHOLD,
                              "fraction_engaged": float(np.mean(ds["receiver_engagement_7d"] > RECEIVER_THRESHOLD)),
                              "fraction_at_one": float(np.mean(ds["receiver_engagement_7d"] == 1.0))}
    out["fig3"], out["fig3_ks"] = homophily(ds[["sender", "receiver"]].to_numpy(), taste, seed)
    spec = _spec(stats_cfg)
    out["fig4a"] = curve_frame(binned_probability_curve(ds["rt_cosine"].to_numpy(), y, spec))
    out["fig4b"] = curve_frame(binned_probability_curve(ds["sr_cosine"].to_numpy(), y, spec))
    out["fig5"] = curve_frame(binned_probability_curve(ds["sender_artist_engagement_7d"].to_numpy(), y, spec))
    out.update(tie_strength(ds, stats_cfg))
    out["fig8"] = interactions(ds, stats_cfg)
    out.update(cohesion(ds, stats_cfg))
    out.update(neighbourhood(ds, network, stats_cfg))
    out["correlations"] = correlations(ds)
    return out


def write_all(results: dict, outdir) -> list:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, obj in results.items():
        if isinstance(obj, pd.DataFrame):
            path = outdir / f"{name}.csv"
            obj.to_csv(path, index=False, float_format="%.10g")
        else:
            path = outdir / f"{name}.json"
            path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
        written.append(path)
    return written
