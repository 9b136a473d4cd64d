"""Dense n-qubit state engine.

States are stored either as an amplitude vector (pure) or a density matrix
(mixed).  Operators are Pauli strings applied as index permutations plus
phases, never as dense 2^n x 2^n matrices, so weak-measurement sampling and
dephasing stay O(4^n) at worst.  Real-valued states stay real: the protocols
built on top of this engine never leave the real subspace, which roughly
halves the eigendecomposition cost.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericalError

MAX_QUBITS = 14

_ATOL_HERMITIAN = 1e-10
_ATOL_TRACE = 1e-6
_EIG_CLAMP = -1e-12


class QuantumState:
    """Pure (amplitude vector) or mixed (density matrix) register state."""

    def __init__(self, n_qubits, amplitudes=None, rho=None):
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise ValueError(f"register size {n_qubits} outside [1, {MAX_QUBITS}]")
        if (amplitudes is None) == (rho is None):
            raise ValueError("exactly one of amplitudes/rho must be given")
        self.n_qubits = int(n_qubits)
        dim = 1 << self.n_qubits
        if amplitudes is not None:
            amplitudes = np.asarray(amplitudes)
            if amplitudes.shape != (dim,):
                raise ValueError(f"amplitude vector must have length {dim}")
        if rho is not None:
            rho = np.asarray(rho)
            if rho.shape != (dim, dim):
                raise ValueError(f"density matrix must be {dim}x{dim}")
        self.amplitudes = amplitudes
        self.rho = rho

    @property
    def is_pure(self):
        return self.amplitudes is not None

    @property
    def dim(self):
        return 1 << self.n_qubits

    def to_mixed(self):
        """Promote to the density-matrix representation (copy if already mixed)."""
        if self.is_pure:
            psi = self.amplitudes
            return QuantumState(self.n_qubits, rho=np.outer(psi, psi.conj()))
        return QuantumState(self.n_qubits, rho=self.rho.copy())

    def copy(self):
        if self.is_pure:
            return QuantumState(self.n_qubits, amplitudes=self.amplitudes.copy())
        return QuantumState(self.n_qubits, rho=self.rho.copy())

    def validate(self):
        """Check the representation invariants; raises ValueError on failure."""
        if self.is_pure:
            norm = float(np.vdot(self.amplitudes, self.amplitudes).real)
            if abs(norm - 1.0) > 1e-10:
                raise ValueError(f"pure state norm^2 deviates from 1 by {norm - 1.0:.3e}")
        else:
            rho = self.rho
            herm = np.abs(rho - rho.conj().T).max()
            if herm > 1e-10:
                raise ValueError(f"density matrix non-Hermitian by {herm:.3e}")
            tr = float(np.trace(rho).real)
            if abs(tr - 1.0) > 1e-10:
                raise ValueError(f"density matrix trace deviates from 1 by {tr - 1.0:.3e}")
            wmin = float(np.linalg.eigvalsh(rho)[0])
            if wmin < -1e-8:
                raise ValueError(f"density matrix has eigenvalue {wmin:.3e} < -1e-8")
        return self


@dataclass(frozen=True)
class PauliOperatorSpec:
    """An involutory Pauli observable: a ZZ bond, an on-site X, or a general
    Pauli string given by per-site letters."""

    kind: str                 # 'zz' | 'x' | 'pauli'
    sites: tuple
    letters: str = ""         # only for kind='pauli', one of IXYZ per site

    @classmethod
    def zz_bond(cls, i, j):
        return cls(kind="zz", sites=(int(i), int(j)))

    @classmethod
    def x_site(cls, i):
        return cls(kind="x", sites=(int(i),))

    @classmethod
    def pauli_string(cls, letters, sites):
        letters = letters.upper()
        if len(letters) != len(sites):
            raise ValueError("one letter per site required")
        if any(c not in "IXYZ" for c in letters):
            raise ValueError(f"invalid Pauli letters {letters!r}")
        return cls(kind="pauli", sites=tuple(int(s) for s in sites), letters=letters)

    def site_letters(self):
        if self.kind == "zz":
            return "ZZ", self.sites
        if self.kind == "x":
            return "X", self.sites
        return self.letters, self.sites


class _PauliAction:
    """Cached action of a Pauli string:  P|k> = phase[k] |perm[k]>.

    perm is an involution; diagonal strings (no X/Y) keep perm = identity and
    admit fused elementwise fast paths.
    """

    __slots__ = ("perm", "phase", "diagonal", "trivial_phase", "phase_perm", "sign_outer")

    def __init__(self, perm, phase, diagonal):
        self.perm = perm
        self.phase = phase
        self.diagonal = diagonal
        self.trivial_phase = bool(np.all(phase == 1.0))
        self.phase_perm = phase[perm]
        self.sign_outer = np.outer(phase, phase).real if diagonal else None


@lru_cache(maxsize=512)
def _pauli_action(op: PauliOperatorSpec, n_qubits: int):
    letters, sites = op.site_letters()
    if any(not 0 <= s < n_qubits for s in sites):
        raise ValueError(f"operator sites {sites} outside register of {n_qubits} qubits")
    if len(set(sites)) != len(sites):
        raise ValueError("repeated sites in operator spec")
    dim = 1 << n_qubits
    idx = np.arange(dim)
    flip = 0
    phase = np.ones(dim)
    ny = 0
    for letter, s in zip(letters, sites):
        bit = (idx >> s) & 1
        if letter == "X":
            flip |= 1 << s
        elif letter == "Y":
            flip |= 1 << s
            phase = phase * np.where(bit, -1.0, 1.0)
            ny += 1
        elif letter == "Z":
            phase = phase * np.where(bit, -1.0, 1.0)
    if ny:
        # global i^ny from Y|b> = i(-1)^b |1-b>; imaginary only for odd ny
        if ny % 2:
            phase = phase * (1j ** (ny % 4))
        elif ny % 4 == 2:
            phase = -phase
    perm = idx ^ flip
    return _PauliAction(perm, phase, diagonal=(flip == 0))


def apply_pauli_vec(psi, op, n_qubits):
    """P |psi> for a Pauli string, as permutation + phases."""
    a = _pauli_action(op, n_qubits)
    if a.diagonal:
        return a.phase * psi
    return a.phase_perm * psi[a.perm] if not a.trivial_phase else psi[a.perm]


def pauli_conjugate_rho(rho, op, n_qubits):
    """P rho P for a Pauli string (P Hermitian, involutory)."""
    a = _pauli_action(op, n_qubits)
    if a.diagonal:
        return a.sign_outer * rho
    out = rho[a.perm][:, a.perm]
    if not a.trivial_phase:
        ph = a.phase_perm
        out = (ph[:, None] * ph.conj()[None, :]) * out
    return out


def pauli_left_rho(rho, op, n_qubits):
    """P rho."""
    a = _pauli_action(op, n_qubits)
    if a.diagonal:
        return a.phase[:, None] * rho
    out = rho[a.perm, :]
    if not a.trivial_phase:
        out = a.phase_perm[:, None] * out
    return out


def pauli_matrix(op, n_qubits):
    """Dense matrix of the Pauli string (test/inspection helper)."""
    a = _pauli_action(op, n_qubits)
    dim = 1 << n_qubits
    m = np.zeros((dim, dim), dtype=complex if np.iscomplexobj(a.phase) else float)
    m[a.perm, np.arange(dim)] = a.phase
    return m


@dataclass(frozen=True)
class WeakKraus:
    """One Kraus element  M(s) = exp(beta s O / 2) / sqrt(2 cosh beta)  of the
    two-outcome weak measurement of an involutory observable O."""

    operator: PauliOperatorSpec
    beta: float
    outcome: int

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("measurement strength beta must be >= 0")
        if self.outcome not in (-1, 1):
            raise ValueError("outcome must be +1 or -1")

    def matrix(self, n_qubits):
        p = pauli_matrix(self.operator, n_qubits)
        dim = 1 << n_qubits
        b2 = self.beta / 2.0
        return (np.cosh(b2) * np.eye(dim) + self.outcome * np.sinh(b2) * p) / np.sqrt(
            2.0 * np.cosh(self.beta)
        )


def new_plus_state(n):
    """Product state with every qubit in the +1 eigenstate of X."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"register size must be an integer in [1, {MAX_QUBITS}]")
    dim = 1 << n
    return QuantumState(n, amplitudes=np.full(dim, dim ** -0.5))


def expectation_pauli(state, op):
    """<P> for pure states, tr(P rho) for mixed ones.  Always real."""
    a = _pauli_action(op, state.n_qubits)
    if state.is_pure:
        psi = state.amplitudes
        if a.diagonal:
            return float((a.phase.real * np.abs(psi) ** 2).sum())
        phi = apply_pauli_vec(psi, op, state.n_qubits)
        return float(np.vdot(psi, phi).real)
    if a.diagonal:
        return float((a.phase.real * np.diagonal(state.rho).real).sum())
    idx = np.arange(state.dim)
    return float((a.phase_perm * state.rho[a.perm, idx]).sum().real)


def sample_weak_measurement(state, op, beta, rng):
    """Born-sample one weak measurement of an involutory Pauli observable.

    Returns (outcome, post_state, prob) where prob is the Born probability of
    the drawn outcome and post_state is normalized.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    exp = expectation_pauli(state, op)
    t = np.tanh(beta)
    p_plus = 0.5 * (1.0 + t * exp)
    p_plus = min(max(p_plus, 0.0), 1.0)
    s = 1 if rng.random() < p_plus else -1
    prob = p_plus if s == 1 else 1.0 - p_plus
    c, sh = np.cosh(beta / 2.0), np.sinh(beta / 2.0)
    norm = 2.0 * np.cosh(beta) * prob
    if norm <= 0.0:
        raise NumericalError("zero-probability branch drawn in weak measurement")
    a = _pauli_action(op, state.n_qubits)
    if state.is_pure:
        psi = state.amplitudes
        phi = apply_pauli_vec(psi, op, state.n_qubits)
        post = (c * psi + s * sh * phi) / np.sqrt(norm)
        return s, QuantumState(state.n_qubits, amplitudes=post), prob
    rho = state.rho
    if a.diagonal:
        # M rho M with diagonal M = (c + s sh P): a single fused outer product
        u = c + s * sh * a.phase.real
        post = (np.outer(u, u) * rho) / norm
        return s, QuantumState(state.n_qubits, rho=post), prob
    prho = pauli_left_rho(rho, op, state.n_qubits)
    rhop = prho.conj().T if np.iscomplexobj(prho) else prho.T
    prhop = pauli_conjugate_rho(rho, op, state.n_qubits)
    post = (c * c * rho + s * c * sh * (prho + rhop) + sh * sh * prhop) / norm
    return s, QuantumState(state.n_qubits, rho=post), prob


def apply_dephasing_channel(state, op, beta):
    """Outcome-averaged weak measurement:  rho -> sum_s M(s) rho M(s)^dag.

    Requires the mixed representation; promote pure inputs first.
    """
    if state.is_pure:
        raise ValueError("dephasing channel needs a density matrix; promote with to_mixed()")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    sech = 1.0 / np.cosh(beta)
    a, b = 0.5 * (1.0 + sech), 0.5 * (1.0 - sech)
    rho = a * state.rho + b * pauli_conjugate_rho(state.rho, op, state.n_qubits)
    return QuantumState(state.n_qubits, rho=rho)


def psd_sqrt(m):
    """Hermitian PSD square root with eigenvalue clamping against round-off."""
    w, v = np.linalg.eigh(m)
    if w[0] < _EIG_CLAMP - 1e-8:
        raise ValueError(f"matrix is not PSD (eigenvalue {w[0]:.3e})")
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ v.conj().T


def uhlmann_fidelity(state_a, state_b):
    """F(rho, sigma) = tr(sqrt(sqrt(rho) sigma sqrt(rho)))^2  (squared convention)."""
    rho_a = state_a.to_mixed().rho if state_a.is_pure else state_a.rho
    rho_b = state_b.to_mixed().rho if state_b.is_pure else state_b.rho
    if rho_a.shape != rho_b.shape:
        raise ValueError("states live on different registers")
    for r in (rho_a, rho_b):
        if abs(float(np.trace(r).real) - 1.0) > _ATOL_TRACE:
            raise ValueError("density matrix trace deviates from 1 beyond 1e-6")
    s = psd_sqrt(rho_a)
    mid = s @ rho_b @ s
    mid = 0.5 * (mid + mid.conj().T)
    w = np.clip(np.linalg.eigvalsh(mid), 0.0, None)
    return float(np.sqrt(w).sum() ** 2)


def fidelity_pauli_conjugation(state, op):
    """F(rho, P rho P) for an involutory Pauli P.

    Uses  F = ||sqrt(rho) P sqrt(rho)||_1^2 : the eigenvalues of the Hermitian
    matrix sqrt(rho) P sqrt(rho) coincide with those of P rho, so a single
    eigendecomposition of rho suffices.  Pure states reduce to <P>^2.
    """
    if state.is_pure:
        return expectation_pauli(state, op) ** 2
    w, v = np.linalg.eigh(state.rho)
    sq = np.sqrt(np.clip(w, 0.0, None))
    pv = apply_pauli_rows(v, op, state.n_qubits)
    m = (v.conj().T @ pv) * sq[None, :]
    m *= sq[:, None]
    m = 0.5 * (m + m.conj().T)
    lam = np.linalg.eigvalsh(m)
    return float(np.abs(lam).sum() ** 2)


def apply_pauli_rows(mat, op, n_qubits):
    """P @ mat for a Pauli string, applied to the row index."""
    a = _pauli_action(op, n_qubits)
    if a.diagonal:
        return a.phase[:, None] * mat
    out = mat[a.perm, :]
    if not a.trivial_phase:
        out = a.phase_perm[:, None] * out
    return out


def hermitian_exp(m, t):
    """exp(t M) of a Hermitian matrix via eigendecomposition."""
    m = np.asarray(m)
    scale = max(np.abs(m).max(), 1.0)
    if np.abs(m - m.conj().T).max() > _ATOL_HERMITIAN * scale:
        raise ValueError("matrix is not Hermitian to 1e-10")
    w, v = np.linalg.eigh(m)
    return (v * np.exp(t * w)) @ v.conj().T
