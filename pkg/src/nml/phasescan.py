"""Grid sweeps over (h, t_f) per readout mode: phase diagrams, refined
critical lines, and tabulated propagator curves."""

from dataclasses import dataclass, field

import numpy as np

from . import meanfield

DEFAULT_TF_RANGE = (1e-3, 10.0)


@dataclass(frozen=True)
class ScanGrid:
    mode: str
    d: int
    J: float
    h_values: tuple
    t_f_values: tuple

    def __post_init__(self):
        if self.mode not in ("complete", "none", "partial"):
            raise ValueError(f"unknown mode {self.mode!r}")
        for name, axis in (("h_values", self.h_values), ("t_f_values", self.t_f_values)):
            axis = tuple(float(v) for v in axis)
            if not axis:
                raise ValueError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, axis)

    @classmethod
    def default(cls, mode, d, J, n_h=80, n_tf=80):
        """80x80 grid: h linear up to 1.5 h_c, t_f log-spaced over [1e-3, 10]."""
        if mode == "complete":
            hc = meanfield.complete_stationary_hc(d, J)
        else:
            hc = meanfield.partial_stationary_hc(d, J)
        hs = np.linspace(0.0, 1.5 * hc, n_h)
        tfs = np.geomspace(*DEFAULT_TF_RANGE, n_tf)
        return cls(mode=mode, d=d, J=J, h_values=tuple(hs), t_f_values=tuple(tfs))


@dataclass(frozen=True)
class Transition:
    h: float
    t_f_low: float          # last grid t_f with the old label
    t_f_high: float         # first grid t_f with the new label
    t_f_refined: float
    from_label: str
    to_label: str


@dataclass
class ScanResult:
    grid: ScanGrid
    points: list                      # PhasePoint, h-major then t_f
    labels: np.ndarray                # (n_h, n_tf) of label strings
    transitions: dict = field(default_factory=dict)   # h -> [Transition, ...]

    @property
    def critical_line(self):
        """First label change along t_f for each h (None where single-phase)."""
        return {h: (trs[0] if trs else None) for h, trs in self.transitions.items()}

    def boundary(self, to_label):
        """Refined onset t_f of `to_label` per h (NaN where absent)."""
        out = {}
        for h, trs in self.transitions.items():
            hit = [t for t in trs if t.to_label == to_label]
            out[h] = hit[0].t_f_refined if hit else np.nan
        return out

    def check_label_monotonicity(self):
        """Trivial never reappears after SWSSB/LRE; SWSSB never after LRE."""
        rank = {"Trivial": 0, "SWSSB": 1, "LRE": 2}
        for row in self.labels:
            r = [rank[v] for v in row]
            if any(b < a for a, b in zip(r, r[1:])):
                return False
        return True


def _refine_transition(mode, d, J, h, t_lo, t_hi, lo_label, rtol):
    while (t_hi - t_lo) > rtol * t_hi:
        mid = np.sqrt(t_lo * t_hi) if t_lo > 0 else 0.5 * (t_lo + t_hi)
        if meanfield.classify_point(mode, d, J, h, mid).label == lo_label:
            t_lo = mid
        else:
            t_hi = mid
    return t_hi


def _scan_column(args):
    grid, i, refine, refine_rtol = args
    h = grid.h_values[i]
    column = [meanfield.classify_point(grid.mode, grid.d, grid.J, h, tf)
              for tf in grid.t_f_values]
    trs = []
    for j in range(len(column) - 1):
        if column[j + 1].label != column[j].label:
            t_lo, t_hi = grid.t_f_values[j], grid.t_f_values[j + 1]
            refined = (_refine_transition(grid.mode, grid.d, grid.J, h,
                                          t_lo, t_hi, column[j].label, refine_rtol)
                       if refine else t_hi)
            trs.append(Transition(h=h, t_f_low=t_lo, t_f_high=t_hi,
                                  t_f_refined=refined,
                                  from_label=column[j].label,
                                  to_label=column[j + 1].label))
    return i, column, trs


def scan(grid, refine=True, refine_rtol=1e-4, workers=1):
    """Classify every grid cell; then bisect each label change along t_f.

    Cells are independent and columns are gathered by index, so the result
    does not depend on evaluation order or worker count.  Refinement
    brackets each change of label between adjacent t_f grid points and
    bisects in log t_f.
    """
    n_h, n_tf = len(grid.h_values), len(grid.t_f_values)
    jobs = [(grid, i, refine, refine_rtol) for i in range(n_h)]
    if workers > 1 and n_h > 1:
        import multiprocessing
        from concurrent.futures import ProcessPoolExecutor

        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            results = list(pool.map(_scan_column, jobs))
    else:
        results = [_scan_column(job) for job in jobs]

    points = [None] * (n_h * n_tf)
    labels = np.empty((n_h, n_tf), dtype=object)
    transitions = {}
    for i, column, trs in results:
        for j, pt in enumerate(column):
            points[i * n_tf + j] = pt
            labels[i, j] = pt.label
        transitions[grid.h_values[i]] = trs
    return ScanResult(grid=grid, points=points, labels=labels, transitions=transitions)


PROPAGATOR_KINDS = ("dz", "dr", "dk")


@dataclass
class PropagatorCurve:
    kind: str
    params: dict
    delta_t: np.ndarray
    value: np.ndarray
    reflection_residual: np.ndarray

    columns = ("delta_t", "value", "reflection_residual")

    def rows(self):
        for k in range(len(self.delta_t)):
            yield (self.delta_t[k], self.value[k], self.reflection_residual[k])


def propagator_curve(kind, params, delta_t_samples):
    """Tabulate a temporal propagator over the given time separations,
    with the reflection-symmetry defect value(dt) - value(t_f - dt) as a
    diagnostic column."""
    if kind not in PROPAGATOR_KINDS:
        raise ValueError(f"kind must be one of {PROPAGATOR_KINDS}")
    dts = np.asarray(sorted(float(t) for t in delta_t_samples))
    t_f = float(params["t_f"])
    if dts.size == 0 or dts[0] < 0 or dts[-1] > t_f:
        raise ValueError("delta_t samples must lie within [0, t_f]")

    if kind == "dz":
        f = lambda dt: meanfield.dz_propagator(params["h"], t_f, dt)
        vals = np.array([f(dt) for dt in dts])
        mirror = np.array([f(t_f - dt) for dt in dts])
    elif kind == "dr":
        f = lambda dt: meanfield.dr_propagator(params["R"], params["h"], t_f, dt)
        vals = np.array([f(dt) for dt in dts])
        mirror = np.array([f(t_f - dt) for dt in dts])
    else:
        kern = meanfield.BranchKernel(params["d"], params["J"], params["h"], t_f)
        vals = np.atleast_1d(kern.value(dts))
        mirror = np.atleast_1d(kern.value(t_f - dts))

    return PropagatorCurve(kind=kind, params=dict(params), delta_t=dts,
                           value=vals, reflection_residual=vals - mirror)
