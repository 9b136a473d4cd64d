"""Round-based measurement experiments on a 1D qubit chain.

Each round applies one layer of nearest-neighbor ZZ weak measurements
followed by one layer of on-site X weak measurements.  Three readout modes:

  complete  ZZ and X outcomes both Born-sampled; the state stays pure
  partial   ZZ Born-sampled on a density matrix, X applied as dephasing
  none      both layers applied as dephasing channels (deterministic)

Trajectories draw from counter-based Philox substreams, so ensembles are
bit-reproducible for a given master seed regardless of worker count.
"""

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import multiprocessing
import numpy as np

from . import qsim
from .qsim import PauliOperatorSpec

READOUT_MODES = ("complete", "none", "partial")
BOUNDARIES = ("open", "periodic")


def center_pairs(L):
    """One tracked pair per distance, chosen symmetric about the chain center."""
    return tuple((int((L - r) // 2), int((L - r) // 2 + r)) for r in range(1, L))


@dataclass(frozen=True)
class ProtocolConfig:
    L: int
    beta_z: float
    beta_x: float
    rounds: int
    readout: str
    n_trajectories: int = 1
    master_seed: int = 0
    boundary: str = "open"
    observables: tuple = None  # pairs (i, j); default: center_pairs(L)

    def __post_init__(self):
        if not 2 <= self.L <= qsim.MAX_QUBITS:
            raise ValueError(f"chain length {self.L} outside [2, {qsim.MAX_QUBITS}]")
        if self.beta_z < 0 or self.beta_x < 0:
            raise ValueError("measurement strengths must be >= 0")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.readout not in READOUT_MODES:
            raise ValueError(f"readout must be one of {READOUT_MODES}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if self.observables is None:
            object.__setattr__(self, "observables", center_pairs(self.L))
        else:
            pairs = tuple((int(i), int(j)) for i, j in self.observables)
            for i, j in pairs:
                if not (0 <= i < self.L and 0 <= j < self.L and i != j):
                    raise ValueError(f"tracked pair {(i, j)} invalid for L={self.L}")
            object.__setattr__(self, "observables", pairs)

    def bonds(self):
        out = [(i, i + 1) for i in range(self.L - 1)]
        if self.boundary == "periodic":
            out.append((self.L - 1, 0))
        return out

    def pair_distances(self):
        if self.boundary == "periodic":
            return tuple(min(abs(j - i), self.L - abs(j - i)) for i, j in self.observables)
        return tuple(abs(j - i) for i, j in self.observables)


@dataclass
class TrajectoryOutcome:
    """Measurement record: only layers whose readout is kept are stored."""

    zz: np.ndarray            # (rounds, n_bonds) of +-1, or shape (0,) in none mode
    x: np.ndarray = None      # (rounds, L) of +-1, complete mode only


@dataclass
class TrajectoryRecord:
    zz_expectations: np.ndarray   # (rounds, n_pairs), signed <Z_i Z_j> per round
    fidelities: np.ndarray        # (rounds, n_pairs), F(rho, ZZ rho ZZ) per round
    outcome: TrajectoryOutcome
    states: list = None           # per-round snapshots when requested
    final_state: qsim.QuantumState = None


def trajectory_rng(master_seed, trajectory_index):
    """Counter-based substream: one Philox jump block per trajectory."""
    return np.random.Generator(np.random.Philox(key=master_seed).jumped(trajectory_index))


def _fidelities_for_pairs(state, ops):
    """F(rho, P rho P) for several diagonal Pauli strings, sharing one
    eigendecomposition of rho.  Equals <P>^2 for pure states."""
    if state.is_pure:
        return [qsim.expectation_pauli(state, op) ** 2 for op in ops]
    w, v = np.linalg.eigh(state.rho)
    sq = np.sqrt(np.clip(w, 0.0, None))
    vh = v.conj().T
    mats = np.empty((len(ops),) + state.rho.shape, dtype=v.dtype)
    for k, op in enumerate(ops):
        pv = qsim.apply_pauli_rows(v, op, state.n_qubits)
        m = (vh @ pv) * sq[None, :]
        m *= sq[:, None]
        mats[k] = 0.5 * (m + m.conj().T)
    lam = np.linalg.eigvalsh(mats)
    return list(np.abs(lam).sum(axis=1) ** 2)


def run_trajectory(config, trajectory_index, record_states=False, fidelity_stride=1):
    """Simulate one trajectory; record per-round tracked observables.

    fidelity_stride: compute the (eigendecomposition-heavy) fidelity
    correlator only every `stride` rounds; skipped rounds hold NaN.
    Pass 0 to skip fidelity entirely.
    """
    rng = trajectory_rng(config.master_seed, trajectory_index)
    mode = config.readout
    state = qsim.new_plus_state(config.L)
    if mode in ("none", "partial"):
        state = state.to_mixed()

    bonds = config.bonds()
    bond_ops = [PauliOperatorSpec.zz_bond(i, j) for i, j in bonds]
    site_ops = [PauliOperatorSpec.x_site(i) for i in range(config.L)]
    pair_ops = [PauliOperatorSpec.zz_bond(i, j) for i, j in config.observables]

    n_pairs = len(pair_ops)
    T = config.rounds
    zz_exp = np.zeros((T, n_pairs))
    fid = np.full((T, n_pairs), np.nan)
    zz_out = np.zeros((T, len(bonds)), dtype=np.int8) if mode != "none" else np.zeros((0,), dtype=np.int8)
    x_out = np.zeros((T, config.L), dtype=np.int8) if mode == "complete" else None
    states = [] if record_states else None

    for t in range(T):
        for b, op in enumerate(bond_ops):
            if mode == "none":
                state = qsim.apply_dephasing_channel(state, op, config.beta_z)
            else:
                s, state, _ = qsim.sample_weak_measurement(state, op, config.beta_z, rng)
                zz_out[t, b] = s
        for i, op in enumerate(site_ops):
            if mode == "complete":
                s, state, _ = qsim.sample_weak_measurement(state, op, config.beta_x, rng)
                x_out[t, i] = s
            else:
                state = qsim.apply_dephasing_channel(state, op, config.beta_x)
        zz_exp[t] = [qsim.expectation_pauli(state, op) for op in pair_ops]
        if fidelity_stride and (t + 1) % fidelity_stride == 0:
            fid[t] = _fidelities_for_pairs(state, pair_ops)
        if record_states:
            states.append(state.copy())

    return TrajectoryRecord(
        zz_expectations=zz_exp,
        fidelities=fid,
        outcome=TrajectoryOutcome(zz=zz_out, x=x_out),
        states=states,
        final_state=state,
    )


@dataclass
class EnsembleResult:
    """Per-round, per-pair ensemble statistics."""

    config: ProtocolConfig
    pairs: tuple
    distances: tuple
    n_trajectories: int
    ea_mean: np.ndarray        # (rounds, n_pairs): mean of <ZZ>^2
    ea_stderr: np.ndarray
    fid_mean: np.ndarray       # (rounds, n_pairs): mean of F(rho, ZZ rho ZZ)
    fid_stderr: np.ndarray
    zz_mean: np.ndarray = None        # (rounds, n_pairs): mean signed <ZZ>
    zz_stderr: np.ndarray = None

    @property
    def rounds(self):
        return np.arange(1, self.config.rounds + 1)


def _trajectory_stats(args):
    config, idx, fidelity_stride = args
    rec = run_trajectory(config, idx, fidelity_stride=fidelity_stride)
    return idx, rec.zz_expectations, rec.fidelities


def run_ensemble(config, workers=1, fidelity_stride=1):
    """Average <ZZ>^2 and the fidelity correlator over trajectories.

    The per-trajectory RNG streams depend only on (master_seed, index), and
    the reduction is performed in index order, so results are identical for
    any worker count.
    """
    n_traj = config.n_trajectories
    if config.readout == "none" and n_traj > 1:
        warnings.warn("none-mode evolution is deterministic; collapsing to 1 trajectory")
        n_traj = 1

    T = config.rounds
    n_pairs = len(config.observables)
    zz = np.zeros((n_traj, T, n_pairs))
    fi = np.zeros((n_traj, T, n_pairs))

    if workers > 1 and n_traj > 1:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            jobs = ((config, i, fidelity_stride) for i in range(n_traj))
            for idx, zz_i, fi_i in pool.map(_trajectory_stats, jobs, chunksize=16):
                zz[idx] = zz_i
                fi[idx] = fi_i
    else:
        for i in range(n_traj):
            _, zz[i], fi[i] = _trajectory_stats((config, i, fidelity_stride))

    def reduce(a):
        mean = a.mean(axis=0)
        if n_traj > 1:
            err = a.std(axis=0, ddof=1) / np.sqrt(n_traj)
        else:
            err = np.zeros_like(mean)
        return mean, err

    ea_mean, ea_err = reduce(zz ** 2)
    fi_mean, fi_err = reduce(fi)
    zz_mean, zz_err = reduce(zz)
    return EnsembleResult(
        config=config,
        pairs=config.observables,
        distances=config.pair_distances(),
        n_trajectories=n_traj,
        ea_mean=ea_mean,
        ea_stderr=ea_err,
        fid_mean=fi_mean,
        fid_stderr=fi_err,
        zz_mean=zz_mean,
        zz_stderr=zz_err,
    )
