"""Descriptive statistics for the engagement analyses.

ECDFs, binned engagement-probability curves with Wilson 95% intervals,
two-sample Kolmogorov-Smirnov tests, Pearson correlation and the
shuffled-sender homophily baseline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

Z95 = 1.959963984540054
MIN_BIN_COUNT = 30


@dataclass(frozen=True)
class Ecdf:
    values: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.searchsorted(self.values, x, side="right") / len(self.values)
        return float(out) if out.ndim == 0 else out

    @property
    def n(self) -> int:
        return len(self.values)

    def steps(self):
        """Distinct values and F at each, for figure output."""
        xs, counts = np.unique(self.values, return_counts=True)
        return xs, np.cumsum(counts) / self.n


def ecdf(sample) -> Ecdf:
    v = np.sort(np.asarray(sample, dtype=np.float64))
    if len(v) == 0:
        raise ValueError("empty sample")
    if np.any(np.isnan(v)):
        raise ValueError("NaN in sample")
    return Ecdf(v)


def wilson_interval(k, n, z: float = Z95):
    k = np.asarray(k, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = k / n
        den = 1.0 + z * z / n
        center = (p + z * z / (2 * n)) / den
        half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
        lo = np.clip(center - half, 0.0, 1.0)
        hi = np.clip(center + half, 0.0, 1.0)
    # guard the boundary cases against rounding: the interval must contain p
    lo = np.where(k == 0, 0.0, np.minimum(lo, p))
    hi = np.where(k == n, 1.0, np.maximum(hi, p))
    return lo, hi


@dataclass(frozen=True)
class BinSpec:
    kind: str = "quantile"          # "quantile" | "width" | "edges"
    n_bins: int = 10
    edges: tuple | None = None
    min_count: int = MIN_BIN_COUNT

    def resolve(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        if self.kind == "edges":
            e = np.asarray(self.edges, dtype=np.float64)
            if e.ndim != 1 or len(e) < 2 or np.any(np.diff(e) <= 0):
                raise ValueError("custom bin edges must be strictly increasing")
            return e
        lo, hi = float(np.min(v)), float(np.max(v))
        if self.kind == "width":
            if lo == hi:
                return np.array([lo, lo + 1.0])
            return np.linspace(lo, hi, self.n_bins + 1)
        if self.kind == "quantile":
            e = np.unique(np.quantile(v, np.linspace(0, 1, self.n_bins + 1)))
            return e if len(e) > 1 else np.array([lo, lo + 1.0])
        raise ValueError(f"unknown bin kind {self.kind!r}")


@dataclass(frozen=True)
class BinnedCurve:
    edges: np.ndarray
    count: np.ndarray
    engaged: np.ndarray
    p_hat: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    masked: np.ndarray
    outside: int = 0

    def points(self):
        """Rows ``(left, right, count, engaged, p, lo, hi)`` for unmasked bins."""
        keep = ~self.masked
        return [(float(self.edges[k]), float(self.edges[k + 1]), int(self.count[k]),
                 int(self.engaged[k]), float(self.p_hat[k]), float(self.ci_low[k]),
                 float(self.ci_high[k])) for k in np.flatnonzero(keep)]


def assign_bins(values, edges) -> np.ndarray:
    """Left-closed bins, last bin closed on the right; -1 outside the edges."""
    v = np.asarray(values, dtype=np.float64)
    b = np.searchsorted(edges, v, side="right") - 1
    b = np.where(v == edges[-1], len(edges) - 2, b)
    return np.where((v < edges[0]) | (v > edges[-1]) | np.isnan(v), -1, b)


def binned_probability_curve(values, engaged, spec: BinSpec | None = None, strata=None):
    """p(engaged) per bin of a feature, with Wilson 95% intervals.

    With ``strata`` (one categorical key per pair) returns ``{key: BinnedCurve}``,
    all strata sharing the bin edges computed on the pooled values.
    """
    spec = spec or BinSpec()
    values = np.asarray(values, dtype=np.float64)
    engaged = np.asarray(engaged, dtype=bool)
    if len(values) == 0:
        raise ValueError("empty input")
    if len(values) != len(engaged):
        raise ValueError("values and engaged must have equal length")
    edges = spec.resolve(values)
    if strata is None:
        return _curve(values, engaged, edges, spec.min_count)
    strata = np.asarray(strata)
    return {key: _curve(values[strata == key], engaged[strata == key], edges, spec.min_count)
            for key in sorted(set(strata.tolist()), key=str)}


def _curve(values, engaged, edges, min_count):
    nb = len(edges) - 1
    b = assign_bins(values, edges)
    inside = b >= 0
    count = np.bincount(b[inside], minlength=nb)
    pos = np.bincount(b[inside], weights=engaged[inside].astype(np.float64), minlength=nb).astype(np.int64)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(count > 0, pos / np.maximum(count, 1), np.nan)
    lo, hi = wilson_interval(pos, np.maximum(count, 1))
    masked = count < max(min_count, 1)
    lo = np.where(count > 0, lo, np.nan)
    hi = np.where(count > 0, hi, np.nan)
    return BinnedCurve(edges, count, pos, p, lo, hi, masked, int((~inside).sum()))


@dataclass(frozen=True)
class KsResult:
    D: float
    p_value: float
    n_a: int
    n_b: int


def ks_statistic(a, b) -> float:
    """sup |F_a - F_b| via a merged-sort sweep over all sample points."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample")
    pts = np.concatenate([a, b])
    ca = np.searchsorted(a, pts, side="right")
    cb = np.searchsorted(b, pts, side="right")
    # integer numerator, one correctly rounded division
    na, nb = len(a), len(b)
    return int(np.max(np.abs(ca * nb - cb * na))) / (na * nb)


def kolmogorov_sf(lam: float, terms: int = 100) -> float:
    """P(K > lam) for the limiting Kolmogorov distribution."""
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        # theta-function form of the CDF converges fast for small lam
        s = sum(math.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8 * lam * lam)) for k in range(1, terms + 1))
        return float(min(1.0, max(0.0, 1.0 - math.sqrt(2 * math.pi) / lam * s)))
    s = sum((-1) ** (k - 1) * math.exp(-2 * k * k * lam * lam) for k in range(1, terms + 1))
    return float(min(1.0, max(0.0, 2.0 * s)))


def ks_two_sample(a, b) -> KsResult:
    D = ks_statistic(a, b)
    na, nb = len(a), len(b)
    en = na * nb / (na + nb)
    return KsResult(D, kolmogorov_sf(math.sqrt(en) * D), na, nb)


def pearson_correlation(x, y):
    """Returns ``(r, p_value)``; two-sided p from the t distribution with n-2 dof."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError("length mismatch")
    if len(x) < 2:
        raise ValueError("need at least 2 points")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = np.dot(dx, dx), np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance")
    r = float(np.clip(np.dot(dx, dy) / math.sqrt(sxx * syy), -1.0, 1.0))
    n = len(x)
    if n <= 2 or abs(r) == 1.0:
        return r, 0.0 if abs(r) == 1.0 else 1.0
    t = r * math.sqrt((n - 2) / (1 - r * r))
    return r, float(2 * sps.t.sf(abs(t), n - 2))


def permutation_baseline(pairs, vectors, seed: int = 0, permutation=None):
    """Cosines of observed (sender, receiver) pairs and of sender-shuffled pairs.

    ``vectors`` maps user id -> taste vector (dict or :class:`TasteIndex`).
    ``permutation`` overrides the seeded shuffle (used for testing).
    """
    from .embeddings import TasteIndex, cosine_rows

    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    senders, receivers = pairs[:, 0], pairs[:, 1]
    if isinstance(vectors, TasteIndex):
        rs, rr = vectors.rows(senders), vectors.rows(receivers)
        if np.any(rs < 0) or np.any(rr < 0):
            raise KeyError("missing taste vectors for some users")
        S, R = vectors.matrix[rs], vectors.matrix[rr]
    else:
        try:
            S = np.array([vectors[u] for u in senders.tolist()], dtype=np.float64)
            R = np.array([vectors[u] for u in receivers.tolist()], dtype=np.float64)
        except KeyError as exc:
            raise KeyError(f"missing taste vector for user {exc}") from None
    if permutation is None:
        permutation = np.random.default_rng(seed).permutation(len(pairs))
    permutation = np.asarray(permutation)
    observed = cosine_rows(S, R)
    shuffled = cosine_rows(S[permutation], R)
    return observed, shuffled
