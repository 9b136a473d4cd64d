"""Order-parameter diagnostics built on ensemble statistics.

Series values live in [0, 1]; correlation lengths come from least-squares
fits of log(value) against distance.  The growth of the fitted length with
round number is classified against three shapes (exponential / linear /
saturating) by comparing coefficients of determination in value space.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

VALUE_FLOOR = 1e-8
FLAT_SLOPE = 1e-6


@dataclass(frozen=True)
class CorrelatorSeries:
    kind: str                  # 'EA' | 'fidelity' | 'renyi2'
    round: int
    points: tuple              # ((distance, value, stderr), ...), distances increasing

    def __post_init__(self):
        dists = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(dists, dists[1:])):
            raise ValueError("distances must be strictly increasing")
        if any(not -1e-6 <= p[1] <= 1 + 1e-6 for p in self.points):
            raise ValueError("correlator values must lie in [0, 1]")


@dataclass(frozen=True)
class LengthFit:
    xi: float                  # np.inf flags a flat (non-decaying) series
    r_squared: float
    window: tuple
    n_points: int
    xi_stderr: float = np.nan  # delta-method error from the slope variance

    @property
    def diverged(self):
        return np.isinf(self.xi)


def ea_correlator(ensemble, i, j, round_index=-1):
    """Trajectory mean of <Z_i Z_j>^2 at the given round (default: last)."""
    pair = _locate_pair(ensemble, i, j)
    return float(ensemble.ea_mean[round_index, pair])


def fidelity_correlator(ensemble, i, j, round_index=-1):
    """Trajectory mean of F(rho, Z_i Z_j rho Z_i Z_j) at the given round."""
    pair = _locate_pair(ensemble, i, j)
    return float(ensemble.fid_mean[round_index, pair])


def _locate_pair(ensemble, i, j):
    for k, (a, b) in enumerate(ensemble.pairs):
        if {a, b} == {i, j}:
            return k
    raise ValueError(f"pair ({i}, {j}) not tracked; tracked: {ensemble.pairs}")


def renyi2_correlator(state, i, j):
    """tr(rho ZZ rho ZZ) / tr(rho^2) for the diagonal Z_i Z_j string."""
    mixed = state.to_mixed() if state.is_pure else state
    rho = mixed.rho
    purity = float((np.abs(rho) ** 2).sum())
    if purity <= 1e-12:
        raise NumericalError("purity below 1e-12; Renyi-2 correlator is degenerate")
    idx = np.arange(mixed.dim)
    si = 1.0 - 2.0 * ((idx >> i) & 1)
    sj = 1.0 - 2.0 * ((idx >> j) & 1)
    s = si * sj
    num = float(((s[:, None] * s[None, :]) * np.abs(rho) ** 2).sum())
    return num / purity


def map_discrete_to_continuous(beta, rounds):
    """Equivalent continuous strength-time product for `rounds` discrete
    layers of strength beta:  rounds * tanh(beta)^2 / 8."""
    if beta < 0 or rounds < 1:
        raise ValueError("need beta >= 0 and rounds >= 1")
    return rounds * np.tanh(beta) ** 2 / 8.0


def ensemble_series(ensemble, kind, round_index=-1):
    """Distance-indexed CorrelatorSeries from ensemble statistics."""
    if kind == "EA":
        mean, err = ensemble.ea_mean, ensemble.ea_stderr
    elif kind == "fidelity":
        mean, err = ensemble.fid_mean, ensemble.fid_stderr
    else:
        raise ValueError(f"unknown series kind {kind!r}")
    rnd = round_index if round_index >= 0 else ensemble.config.rounds + round_index
    order = np.argsort(ensemble.distances)
    pts = tuple(
        (int(ensemble.distances[k]), float(np.clip(mean[rnd, k], 0.0, 1.0)), float(err[rnd, k]))
        for k in order
    )
    return CorrelatorSeries(kind=kind, round=int(rnd) + 1, points=pts)


def default_window(L):
    """Fit distances 1 .. L-2 on open chains; the largest distance is edge
    dominated at small L."""
    return (1, L - 2)


def fit_correlation_length(series, window=None, floor=VALUE_FLOOR):
    """Least-squares slope of log(value) vs distance inside the window.

    xi = -1/slope; slopes above -1e-6 are reported as xi = +inf (flat).
    """
    if window is None:
        rmax = max(p[0] for p in series.points)
        window = (1, rmax)
    pts = [(r, v, e) for r, v, e in series.points if window[0] <= r <= window[1] and v > floor]
    if len(pts) < 3:
        raise ValueError(f"need >= 3 points above floor inside window {window}, got {len(pts)}")
    r = np.array([p[0] for p in pts], dtype=float)
    y = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(r, y, 1)
    pred = slope * r + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    # sampling variance of the (unweighted) slope: from propagated point
    # errors when the series carries them, residual-based otherwise
    sxx = float(((r - r.mean()) ** 2).sum())
    coeff = (r - r.mean()) / sxx
    sig_ln = np.array([e / v if (e > 0 and v > 0) else np.nan for _, v, e in pts])
    if np.isfinite(sig_ln).all() and (sig_ln > 0).all():
        slope_var = float((coeff ** 2 * sig_ln ** 2).sum())
    else:
        dof = len(pts) - 2
        slope_var = (ss_res / dof) / sxx if dof > 0 else np.nan
    if slope >= -FLAT_SLOPE:
        xi, xi_err = np.inf, np.nan
    else:
        xi = -1.0 / slope
        xi_err = np.sqrt(slope_var) * xi * xi if np.isfinite(slope_var) else np.nan
    return LengthFit(xi=float(xi), r_squared=float(r_squared), window=tuple(window),
                     n_points=len(pts), xi_stderr=float(xi_err))


def xi_vs_round(ensemble, kind, window=None, floor=VALUE_FLOOR, with_errors=False):
    """Fitted correlation length per round.  Rounds whose series cannot be
    fitted (too few points above floor) yield NaN.  with_errors=True appends
    the delta-method xi standard errors."""
    L = ensemble.config.L
    if window is None:
        window = default_window(L)
    rounds = ensemble.rounds
    xi = np.full(len(rounds), np.nan)
    r2 = np.full(len(rounds), np.nan)
    err = np.full(len(rounds), np.nan)
    for k in range(len(rounds)):
        try:
            series = ensemble_series(ensemble, kind, round_index=k)
            fit = fit_correlation_length(series, window=window, floor=floor)
        except ValueError:
            continue
        xi[k] = fit.xi
        r2[k] = fit.r_squared
        err[k] = fit.xi_stderr
    if with_errors:
        return rounds, xi, r2, err
    return rounds, xi, r2


@dataclass(frozen=True)
class GrowthClassification:
    label: str                 # 'exponential' | 'linear' | 'saturating'
    r2_linear: float
    r2_exponential: float
    r2_saturating: float

    def r_squared(self, label=None):
        return {"linear": self.r2_linear, "exponential": self.r2_exponential,
                "saturating": self.r2_saturating}[label or self.label]


def _r2_value_space(y, pred):
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 1.0 if ss_res < 1e-30 else 0.0
    return 1.0 - ss_res / ss_tot


def classify_growth(t, xi, sigma=None, tau_max_factor=2.0):
    """Classify a length-vs-round curve as exponential, linear or saturating.

    The candidate models are scored by (weighted) R^2 in value space:
      linear       xi = a + b t               (direct least squares)
      exponential  xi = A exp(b t), b > 0     (log-space seed, value-space refine)
      saturating   xi = c - a exp(-t / tau)   (tau scanned on a log grid)

    When per-point uncertainties are given, all fits and the R^2 scores use
    inverse-variance weights (late rounds carry xi noise amplified by xi^2).
    The saturation scale is capped at tau_max_factor times the fitted span:
    a curve only counts as saturating if its bend is visible in the window.
    """
    t = np.asarray(t, dtype=float)
    xi = np.asarray(xi, dtype=float)
    sig = None if sigma is None else np.asarray(sigma, dtype=float)
    keep = np.isfinite(xi) & (xi > 0)
    if sig is not None:
        keep &= np.isfinite(sig) & (sig > 0)
    t, xi = t[keep], xi[keep]
    if len(t) < 8:
        raise ValueError("need at least 8 finite points to classify growth")
    if sig is None:
        w = np.ones_like(xi)
    else:
        s = np.maximum(sig[keep], 0.05 * np.median(sig[keep]))
        w = 1.0 / s ** 2

    def wr2(pred):
        num = float((w * (xi - pred) ** 2).sum())
        mean = float((w * xi).sum() / w.sum())
        den = float((w * (xi - mean) ** 2).sum())
        if den == 0.0:
            return 1.0 if num < 1e-30 else 0.0
        return 1.0 - num / den

    sw = np.sqrt(w)
    reg_lin = np.column_stack([np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(reg_lin * sw[:, None], xi * sw, rcond=None)
    r2_lin = wr2(reg_lin @ coef)

    b_exp, a_exp = np.polyfit(t, np.log(xi), 1, w=sw * xi)
    if b_exp > 0:
        r2_exp = wr2(np.exp(a_exp + b_exp * t))
        try:
            from scipy.optimize import curve_fit

            popt, _ = curve_fit(lambda x, la, b: np.exp(la + b * x), t, xi,
                                p0=(a_exp, b_exp), maxfev=4000,
                                sigma=None if sigma is None else 1.0 / sw)
            if popt[1] > 0:
                r2_exp = max(r2_exp, wr2(np.exp(popt[0] + popt[1] * t)))
        except RuntimeError:
            pass
    else:
        r2_exp = -np.inf

    span = t[-1] - t[0]
    r2_sat = -np.inf
    for tau in np.geomspace(span / 50.0, span * tau_max_factor, 40):
        reg = np.column_stack([np.ones_like(t), np.exp(-t / tau)])
        coef, *_ = np.linalg.lstsq(reg * sw[:, None], xi * sw, rcond=None)
        r2_sat = max(r2_sat, wr2(reg @ coef))

    scores = {"linear": r2_lin, "exponential": r2_exp, "saturating": r2_sat}
    label = max(scores, key=scores.get)
    return GrowthClassification(label=label, r2_linear=r2_lin,
                                r2_exponential=r2_exp, r2_saturating=r2_sat)

