"""Mean-field engine for competing ZZ/X measurement on hypercubic lattices.

Order-parameter self-consistency, temporal propagators for the three readout
protocols, the single-site branch model behind the complete-readout kernel,
Landau quadratic coefficients, and the stationary critical points.

Every cosh/sinh/binomial-exponential expression is evaluated in log space;
the naive forms overflow doubles already around h * t_f ~ 350.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import NumericalError
from .qsim import hermitian_exp

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class MeanFieldParams:
    d: int
    J: float
    h: float
    t_f: float
    R: int = 1

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("spatial dimension d must be >= 1")
        if self.J <= 0:
            raise ValueError("ZZ rate J must be > 0")
        if self.h < 0:
            raise ValueError("X rate h must be >= 0")
        if self.t_f <= 0:
            raise ValueError("final time t_f must be > 0")
        if self.R < 1:
            raise ValueError("replica count R must be >= 1")


def _log_cosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - LOG2


def _log_sinh(x):
    # x > 0 assumed
    return x + np.log1p(-np.exp(-2.0 * x)) - LOG2


def _log_2cosh_sum(a, b):
    """log(2 cosh a + 2 cosh b), elementwise-safe."""
    stack = np.stack(np.broadcast_arrays(a, -a, b, -b))
    m = stack.max(axis=0)
    return m + np.log(np.exp(stack - m).sum(axis=0))


# ---------------------------------------------------------------------------
# order parameter and no-readout transition

def solve_qs(d, J, t_f):
    """Positive solution of the self-consistency equation Q = tanh(4 d J t_f Q),
    or 0 when the slope 4 d J t_f is at or below 1 (disordered side)."""
    a = 4.0 * d * J * t_f
    if a <= 1.0:
        return 0.0
    lo, hi = 1e-300, 1.0
    g_hi = math.tanh(a * hi) - hi
    if g_hi == 0.0:
        return 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = math.tanh(a * mid) - mid
        if g > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    q = 0.5 * (lo + hi)
    if abs(math.tanh(a * q) - q) > 1e-12:
        raise NumericalError(f"fixed-point residual too large at a={a}")
    return q


def swssb_critical_time(d, J):
    """Critical time 1/(4 d J) of the order-parameter transition."""
    return 1.0 / (4.0 * d * J)


def swssb_xi(d, J, t_f):
    """Disordered-side correlation length sqrt((8dJ t - 1)/(2d - 8 d^2 J t));
    valid for 1/(8dJ) <= t_f < 1/(4dJ), diverging at the critical time with
    exponent 1/2."""
    num = 8.0 * d * J * t_f - 1.0
    den = 2.0 * d - 8.0 * d * d * J * t_f
    if num < 0 or den <= 0:
        raise ValueError(
            f"t_f={t_f} outside the validity range [{1/(8*d*J)}, {swssb_critical_time(d, J)})"
        )
    return math.sqrt(num / den)


# ---------------------------------------------------------------------------
# partial readout

def dz_propagator(h, t_f, delta_t):
    """Temporal coupling cosh^2(2h(t_f - 2 dt)) sech^2(2 h t_f); reflection
    symmetric about t_f/2, identically 1 at h = 0."""
    delta_t = np.asarray(delta_t, dtype=float)
    if np.any(delta_t < -1e-15) or np.any(delta_t > t_f * (1 + 1e-12)):
        raise ValueError("delta_t outside [0, t_f]")
    out = np.exp(2.0 * (_log_cosh(2.0 * h * (t_f - 2.0 * delta_t)) - _log_cosh(2.0 * h * t_f)))
    return float(out) if out.ndim == 0 else out


def dz_stationary(h, delta_t):
    """Stationary limit exp(-8 h dt) of the partial-readout coupling."""
    if h <= 0:
        raise ValueError("h must be > 0 in the stationary limit")
    return float(np.exp(-8.0 * h * np.asarray(delta_t, dtype=float)))


def integrate_dz(h, t_f, epsrel=1e-11):
    """integral of D_Z over [0, t_f] by adaptive quadrature (the record),
    folded to [0, t_f/2] by the reflection symmetry."""
    if h == 0.0:
        return float(t_f)
    half = 0.5 * t_f
    tau = 1.0 / (8.0 * h)
    pts = sorted({min(half, tau * 10.0 ** k) for k in range(0, 6)})
    pts = [p for p in pts if 0.0 < p < half]
    val, _ = quad(lambda t: dz_propagator(h, t_f, t), 0.0, half,
                  points=pts or None, limit=400, epsabs=1e-300, epsrel=epsrel)
    return 2.0 * val


def partial_quadratic_coeff(d, J, h, t_f):
    """Quadratic Landau coefficient of the replica-coupling order parameter
    under partial readout:

        2 d J t_f - 8 d^2 J^2 t_f (1 + |Q^s|)^2 * integral(D_Z)

    Negative sign marks the long-range-entangled phase."""
    qs = solve_qs(d, J, t_f)
    return (2.0 * d * J * t_f
            - 8.0 * d * d * J * J * t_f * (1.0 + abs(qs)) ** 2 * integrate_dz(h, t_f))


def partial_stationary_hc(d, J):
    """Stationary critical X rate 4 d J for partial readout."""
    return 4.0 * d * J


def stationary_xi_r(d, J, tau):
    """Stationary spatial and temporal correlation lengths on the trivial
    side, as functions of the coupling range tau = 1/(8h):

        xi_x = sqrt((64 d J tau - 1)/(2d - 64 d^2 J tau))
        xi_t = sqrt(32 d J tau^3 / (1 - 32 d J tau))
    """
    tau_c = 1.0 / (32.0 * d * J)
    if not 1.0 / (64.0 * d * J) <= tau < tau_c:
        raise ValueError(f"tau={tau} outside [{1/(64*d*J)}, {tau_c})")
    num_x = 64.0 * d * J * tau - 1.0
    den_x = 2.0 * d - 64.0 * d * d * J * tau
    xi_x = math.sqrt(num_x / den_x)
    xi_t = math.sqrt(32.0 * d * J * tau ** 3 / (1.0 - 32.0 * d * J * tau))
    return xi_x, xi_t


# ---------------------------------------------------------------------------
# complete readout: branch model, saddle point, kernel

@dataclass(frozen=True)
class BranchModel:
    """Doubled single-qubit generator  L0 = gamma Z+Z- + sqrt(2h) xi (X+ + X-).

    Basis ordering (b+, b-) = 00, 01, 10, 11.
    """

    gamma: float
    xi: float
    h: float

    @classmethod
    def from_params(cls, d, J, h, qs, xi):
        return cls(gamma=4.0 * d * J * qs, xi=float(xi), h=float(h))

    def omega(self):
        return math.sqrt(0.25 * self.gamma ** 2 + 2.0 * self.h * self.xi ** 2)

    def generator(self):
        g = math.sqrt(2.0 * self.h) * self.xi
        zz = np.diag([1.0, -1.0, -1.0, 1.0])
        xp = np.zeros((4, 4))
        xp[[0, 2], [2, 0]] = 1.0
        xp[[1, 3], [3, 1]] = 1.0
        xm = np.zeros((4, 4))
        xm[[0, 1], [1, 0]] = 1.0
        xm[[2, 3], [3, 2]] = 1.0
        return self.gamma * zz + g * (xp + xm)


def l0_trace(branch, t_f):
    """tr exp(t_f L0), evaluated by the closed form 2cosh(2 t_f Omega) +
    2cosh(t_f Gamma) and cross-checked against the 4x4 matrix exponential."""
    omega = branch.omega()
    if max(2.0 * t_f * omega, t_f * abs(branch.gamma)) > 700.0:
        raise NumericalError("trace overflows doubles; use log_l0_trace")
    closed = 2.0 * math.cosh(2.0 * t_f * omega) + 2.0 * math.cosh(t_f * branch.gamma)
    matrix = float(np.trace(hermitian_exp(branch.generator(), t_f)).real)
    if abs(matrix - closed) > 1e-8 * abs(closed):
        raise NumericalError(
            f"branch-model trace mismatch: closed={closed!r} matrix={matrix!r}"
        )
    return closed


def log_l0_trace(branch, t_f):
    """log tr exp(t_f L0) via log-sum-exp; safe at any t_f."""
    return float(_log_2cosh_sum(2.0 * t_f * branch.omega(), t_f * branch.gamma))


def _omega(gamma, h, xi):
    return np.sqrt(0.25 * gamma * gamma + 2.0 * h * xi * xi)


def _saddle_gap(xi, gamma, h, t_f):
    """Omega(xi) - 4h sinh(2 t_f Omega)/(cosh(t_f Gamma) + cosh(2 t_f Omega)),
    in log space; roots are the stationary points of f0 at xi != 0."""
    om = _omega(gamma, h, xi)
    x = 2.0 * t_f * om
    with np.errstate(divide="ignore"):
        log_num = np.where(x > 0, _log_sinh(np.maximum(x, 1e-300)), -np.inf)
    log_den = _log_2cosh_sum(x, t_f * gamma) - LOG2
    ratio = np.exp(log_num - log_den)
    return om - 4.0 * h * ratio


def branch_free_energy(xi, d, J, h, t_f, qs):
    """f0(xi) = xi^2/2 - log tr exp(t_f L0) / t_f  for the constant saddle field."""
    gamma = 4.0 * d * J * qs
    om = _omega(gamma, h, np.asarray(xi, dtype=float))
    return 0.5 * np.asarray(xi, dtype=float) ** 2 - _log_2cosh_sum(2.0 * t_f * om, t_f * gamma) / t_f


def saddle_xi(d, J, h, t_f, qs, grid_points=201):
    """Global minimizer of the single-site free energy f0 over the constant
    saddle field, among 0 and the positive stationary points.

    Stationary points are bracketed on [0, sqrt(8h)+1]; in the long-time
    limit the positive root obeys xi^2 = 8h - 2 d^2 J^2 qs^2 / h (present
    only for h above d J qs / 2)."""
    if h == 0.0:
        return 0.0
    gamma = 4.0 * d * J * qs
    hi = math.sqrt(8.0 * h) + 1.0
    xs = np.linspace(0.0, hi, grid_points)
    f0 = branch_free_energy(xs, d, J, h, t_f, qs)
    gap = _saddle_gap(xs, gamma, h, t_f)

    candidates = [0.0]
    sign = np.sign(gap)
    for k in range(len(xs) - 1):
        if xs[k] == 0.0:
            continue
        if sign[k] == 0.0:
            candidates.append(float(xs[k]))
        elif sign[k] * sign[k + 1] < 0:
            root = brentq(lambda x: float(_saddle_gap(x, gamma, h, t_f)),
                          xs[k], xs[k + 1], xtol=1e-14, rtol=1e-15)
            candidates.append(float(root))

    f_cand = [float(branch_free_energy(x, d, J, h, t_f, qs)) for x in candidates]
    best = candidates[int(np.argmin(f_cand))]
    f_best = min(f_cand)

    # the returned point must beat the whole scan grid
    scale = max(1.0, abs(f_best))
    if f_best > f0.min() + 1e-9 * scale:
        raise NumericalError(
            "saddle bracketing failed: grid minimum "
            f"f0={f0.min()!r} at xi={xs[int(np.argmin(f0))]!r} "
            f"undercuts best stationary point f0={f_best!r} at xi={best!r}"
        )
    return best


class BranchKernel:
    """Edwards-Anderson-type temporal kernel of the complete-readout theory.

    Precomputes the branch-model eigensystem at the saddle so the kernel can
    be evaluated cheaply at many time separations:

        D(dt) = ((K^{++}(dt) + |K^{+-}(dt)|) / K0)^2,
        K^{ss'}(dt) = tr[Z^s e^{dt L0} Z^{s'} e^{(t_f - dt) L0}].

    Evaluation subtracts the top eigenvalue, so arbitrary t_f is safe.
    The kernel is symmetrized over the saddle-field sign (the two agree by
    symmetry, which is asserted).
    """

    def __init__(self, d, J, h, t_f, qs=None, xi=None):
        self.d, self.J, self.h, self.t_f = d, J, float(h), float(t_f)
        self.qs = solve_qs(d, J, t_f) if qs is None else float(qs)
        self.xi = saddle_xi(d, J, h, t_f, self.qs) if xi is None else float(xi)
        zp = np.diag([1.0, 1.0, -1.0, -1.0])
        zm = np.diag([1.0, -1.0, 1.0, -1.0])
        self._sides = []
        for sgn in (+1.0, -1.0):
            branch = BranchModel.from_params(d, J, h, self.qs, sgn * self.xi)
            lam, vec = np.linalg.eigh(branch.generator())
            ap = vec.T @ zp @ vec
            am = vec.T @ zm @ vec
            self._sides.append((lam, ap, am))
        if not np.isfinite(self._sides[0][0]).all():
            raise NumericalError("branch generator eigenvalues not finite")

    def _one_side(self, lam, ap, am, delta_t):
        t_f = self.t_f
        lmax = lam.max()
        dt = np.asarray(delta_t, dtype=float)
        scalar = dt.ndim == 0
        dt = np.atleast_1d(dt)
        if np.any(dt < -1e-12) or np.any(dt > t_f * (1 + 1e-12)):
            raise ValueError("delta_t outside [0, t_f]")
        k0 = np.exp(t_f * (lam - lmax)).sum()
        if not k0 > 1e-300:
            raise NumericalError("kernel normalization underflowed")
        expo = dt[:, None, None] * (lam[None, None, :] - lmax) \
            + (t_f - dt)[:, None, None] * (lam[None, :, None] - lmax)
        w = np.exp(expo)
        kpp = (ap * ap * w).sum(axis=(1, 2))
        kpm = (ap * am * w).sum(axis=(1, 2))
        val = ((kpp + np.abs(kpm)) / k0) ** 2
        return val[0] if scalar else val

    def value(self, delta_t):
        a = self._one_side(*self._sides[0], delta_t)
        b = self._one_side(*self._sides[1], delta_t)
        if not np.allclose(a, b, rtol=1e-9, atol=1e-12):
            raise NumericalError("kernel not symmetric under saddle-field sign flip")
        return 0.5 * (a + b)

    def decay_scale(self):
        """Characteristic time from the top eigenvalue gap (inf if gapless)."""
        lam = self._sides[0][0]
        gap = float(lam.max() - np.partition(lam, -2)[-2])
        return 1.0 / gap if gap > 1e-12 else math.inf


def dk_propagator(d, J, h, t_f, delta_t, qs=None, xi=None):
    """Complete-readout temporal kernel at the saddle point (see BranchKernel)."""
    return BranchKernel(d, J, h, t_f, qs=qs, xi=xi).value(delta_t)


def _integrate_kernel(kernel, epsrel=1e-9):
    """integral of D over [0, t_f], folded to [0, t_f/2] by symmetry."""
    t_f = kernel.t_f
    half = 0.5 * t_f
    tau = min(kernel.decay_scale(), t_f)
    pts = sorted({min(half, tau * 10.0 ** k) for k in range(0, 6)})
    pts = [p for p in pts if 0.0 < p < half]
    val, _ = quad(lambda t: float(kernel.value(t)), 0.0, half,
                  points=pts or None, limit=600, epsabs=1e-300, epsrel=epsrel)
    return 2.0 * val


def complete_quadratic_coeff(d, J, h, t_f, epsrel=1e-9):
    """Quadratic Landau coefficient under complete readout:

        2 d J t_f - 8 d^2 J^2 * (double time integral of D),

    where the double integral over [0, t_f]^2 of the reflection-symmetric
    kernel reduces to t_f * integral(D over [0, t_f])."""
    kernel = BranchKernel(d, J, h, t_f)
    return 2.0 * d * J * t_f - 8.0 * d * d * J * J * t_f * _integrate_kernel(kernel, epsrel)


def _mass_condition(x):
    """Long-wave stationary mass condition in x = h/(dJ):  2x - 1 = (1 + 1/(2x))^2."""
    return 2.0 * x - 1.0 - (1.0 + 0.5 / x) ** 2


def complete_stationary_hc(d, J):
    """Stationary critical X rate of the complete-readout transition: the
    root of the long-wave mass condition, ~= 1.4155 d J."""
    x = brentq(_mass_condition, 1.0 + 1e-9, 3.0, xtol=1e-12, rtol=8.9e-16)
    return x * d * J


def stationary_action_coefficients(d, J, h):
    """Alternative closed-form coefficient set (a, c, m) for the stationary
    long-wave action of the complete-readout theory.  Inspection only: taken
    literally, its mass-vanishing point is inconsistent with the ~1.42 d J
    critical rate, so the critical point is computed from the mass condition
    in complete_stationary_hc instead.  Values may come out complex where
    the radicands turn negative."""
    import cmath

    a = d * J * J * (2 * h + d * J) / (h * h * (2 * h - d * J)) - 2 * J
    c = 8 * (2 * h - d * J) * cmath.sqrt(
        1.0 / d - 2 * h * h * (2 * h - d * J) / (d * d * J * (2 * h + d * J))
    )
    m = (d * cmath.sqrt((2 * h + d * J) * (4 * d * J * h * h * (2 * h - d * J)
                                           - d * d * J * J * (2 * h + d * J)))
         / (8 * (2 * h - d * J) * (-2 * h * h * (2 * h - d * J) + d * J * (2 * h + d * J))))

    def realify(z):
        return z.real if getattr(z, "imag", 0.0) == 0.0 else z

    return realify(a), realify(c), realify(m)


# ---------------------------------------------------------------------------
# finite-replica propagator and critical point

def dr_propagator(R, h, t_f, delta_t):
    """R-replica temporal coupling from the binomial sums, via log-sum-exp.

    R = 1 and h = 0 are exactly 1; the kernel is reflection symmetric about
    t_f/2 and approaches exp(-16 h (R-1) dt) in the stationary limit.
    """
    if R < 1 or int(R) != R:
        raise ValueError("R must be a positive integer")
    R = int(R)
    delta_t = float(delta_t)
    if not 0.0 <= delta_t <= t_f * (1 + 1e-12):
        raise ValueError("delta_t outside [0, t_f]")
    if R == 1 or h == 0.0:
        return 1.0

    ht = h * t_f
    log_terms_plus = [math.log(math.comb(2 * R, a)) + ht * (2 * a - 2 * R) ** 2
                      for a in range(2 * R + 1)]
    log_d_plus = _lse(log_terms_plus)

    terms = [LOG2 + math.log(math.comb(2 * R - 2, R - 1)) + _lse([0.0, 4.0 * ht])]
    for a in range(R - 1):
        k = a + 1 - R
        base = math.log(4.0) + math.log(math.comb(2 * R - 2, a)) + 4.0 * ht * k * k
        terms.append(base)
        y = 8.0 * (ht - 2.0 * h * delta_t) * k
        terms.append(base + 4.0 * ht + float(_log_cosh(y)))
    log_d_minus = _lse(terms)
    return math.exp(log_d_minus - log_d_plus)


def _lse(values):
    m = max(values)
    return m + math.log(sum(math.exp(v - m) for v in values))


def r_replica_hc(R, d, J):
    """Finite-replica stationary critical rate d J / (2 (R - 1)); the replica
    limit R -> 1 is covered by complete_stationary_hc."""
    if R < 2 or int(R) != R:
        raise ValueError("finite-replica critical point needs integer R >= 2")
    return d * J / (2.0 * (R - 1))


# ---------------------------------------------------------------------------
# phase classification

LABELS = ("Trivial", "SWSSB", "LRE")


@dataclass(frozen=True)
class PhasePoint:
    h: float
    t_f: float
    q_s: float
    r_coeff: float
    label: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}")
        if self.label == "LRE":
            ok = self.r_coeff < 0
        elif self.label == "SWSSB":
            ok = self.q_s > 0 and self.r_coeff >= 0
        else:
            ok = self.q_s == 0 and self.r_coeff >= 0
        if not ok:
            raise ValueError(
                f"inconsistent phase point: label={self.label}, q_s={self.q_s}, "
                f"r_coeff={self.r_coeff}"
            )


def classify_point(mode, d, J, h, t_f):
    """Phase label of one (h, t_f) point under the given readout mode.

    none:     only the order-parameter transition exists (r fixed at 0).
    partial:  both transitions; three phases possible.
    complete: the order parameter is internal scaffolding of the kernel and
              physically absent, so q_s is reported as 0 and the label never
              reads SWSSB.
    """
    qs = solve_qs(d, J, t_f)
    if mode == "none":
        r = 0.0
        q_out = qs
    elif mode == "partial":
        r = partial_quadratic_coeff(d, J, h, t_f)
        q_out = qs
    elif mode == "complete":
        r = complete_quadratic_coeff(d, J, h, t_f)
        q_out = 0.0
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if r < 0:
        label = "LRE"
    elif q_out > 0:
        label = "SWSSB"
    else:
        label = "Trivial"
    return PhasePoint(h=float(h), t_f=float(t_f), q_s=float(q_out),
                      r_coeff=float(r), label=label)
