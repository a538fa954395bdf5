"""Exact finite-dimensional quantum math for two-qubit certification.

Density matrices, binary (+/-1) observables, the Bell basis, twirling,
Jordan-block decomposition of observable pairs, entropies and fidelity.
Everything here is deterministic linear algebra; all randomness lives in
the simulation layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
EIG_CLIP_TOL = 1e-10
BELL_DIAG_TOL = 1e-10
ENTROPY_EIG_CUTOFF = 1e-12

# Pauli matrices
I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, SIGMA_X, SIGMA_Y, SIGMA_Z)

# Bell basis column vectors, ordered (Phi+, Phi-, Psi+, Psi-).
_s = 1 / math.sqrt(2)
BELL_BASIS = np.array(
    [
        [_s, _s, 0, 0],
        [0, 0, _s, _s],
        [0, 0, _s, -_s],
        [_s, -_s, 0, 0],
    ],
    dtype=complex,
)
BELL_LABELS = ("phi_plus", "phi_minus", "psi_plus", "psi_minus")


class ValidationError(ValueError):
    """Raised when a matrix fails a physicality check."""


def _check_density(matrix: np.ndarray, tol: float = HERMITICITY_TOL) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"density matrix must be square, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > tol:
        raise ValidationError("density matrix is not Hermitian within tolerance")
    if abs(np.trace(m).real - 1.0) > TRACE_TOL or abs(np.trace(m).imag) > TRACE_TOL:
        raise ValidationError(f"density matrix trace is {np.trace(m)}, expected 1")
    eigvals = np.linalg.eigvalsh(m)
    if eigvals.min() < -PSD_TOL:
        raise ValidationError(f"density matrix has negative eigenvalue {eigvals.min()}")
    return m


@dataclass(frozen=True)
class TwoQubitState:
    """A 4x4 density matrix on two qubits (A tensor B)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _check_density(self.matrix)
        if m.shape != (4, 4):
            raise ValidationError(f"two-qubit state must be 4x4, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @staticmethod
    def from_vector(psi: np.ndarray) -> "TwoQubitState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return TwoQubitState(np.outer(psi, psi.conj()))


@dataclass(frozen=True)
class Observable:
    """A d x d Hermitian matrix with eigenvalues in {-1, +1} (a reflection)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"observable must be square, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise ValidationError("observable is not Hermitian within tolerance")
        if np.max(np.abs(m @ m - np.eye(m.shape[0]))) > HERMITICITY_TOL:
            raise ValidationError("observable does not square to the identity")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def projector(self, outcome: int) -> np.ndarray:
        """Projector onto the outcome-`outcome` eigenspace (0 -> +1, 1 -> -1)."""
        sign = 1.0 if outcome == 0 else -1.0
        return (np.eye(self.dim) + sign * self.matrix) / 2


@dataclass(frozen=True)
class BellDiagonalSpectrum:
    """Eigenvalues of a Bell-diagonal state, ordered (Phi+, Phi-, Psi+, Psi-)."""

    lambda_phi_plus: float
    lambda_phi_minus: float
    lambda_psi_plus: float
    lambda_psi_minus: float

    def __post_init__(self):
        vec = self.as_array()
        if np.any(vec < -ENTROPY_EIG_CUTOFF):
            raise ValidationError(f"spectrum has negative entry: {vec}")
        if abs(vec.sum() - 1.0) > 1e-12:
            raise ValidationError(f"spectrum sums to {vec.sum()}, expected 1")

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.lambda_phi_plus,
                self.lambda_phi_minus,
                self.lambda_psi_plus,
                self.lambda_psi_minus,
            ]
        )

    def to_state(self) -> TwoQubitState:
        diag = np.clip(self.as_array(), 0.0, 1.0)
        diag = diag / diag.sum()
        return TwoQubitState(BELL_BASIS @ np.diag(diag).astype(complex) @ BELL_BASIS.conj().T)


@dataclass(frozen=True)
class JordanBlock:
    """One 2x2 common block of a pair of reflections.

    In `block_basis` (two orthonormal d-vectors, as rows) the first
    observable acts as sigma_z and the second as
    cos(angle) sigma_z + sin(angle) sigma_x.
    """

    angle: float
    block_basis: np.ndarray


def partial_trace(state: TwoQubitState, keep: str) -> np.ndarray:
    """Reduced 2x2 density matrix of one side of a two-qubit state.

    `keep` is "A" or "B".
    """
    m = state.matrix.reshape(2, 2, 2, 2)
    if keep == "A":
        return np.einsum("ikjk->ij", m)
    if keep == "B":
        return np.einsum("kikj->ij", m)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def clean_eigenvalues(eigvals: np.ndarray) -> np.ndarray:
    """Clamp eigenvalues to [0, 1], rejecting anything beyond tolerance."""
    eigvals = np.asarray(eigvals, dtype=float)
    if eigvals.min() < -EIG_CLIP_TOL:
        raise ValidationError(f"eigenvalue {eigvals.min()} below -{EIG_CLIP_TOL}")
    if eigvals.max() > 1 + EIG_CLIP_TOL:
        raise ValidationError(f"eigenvalue {eigvals.max()} above 1+{EIG_CLIP_TOL}")
    return np.clip(eigvals, 0.0, 1.0)


def shannon_entropy(probs: np.ndarray) -> float:
    """Shannon entropy in bits; entries below 1e-12 contribute zero."""
    p = np.asarray(probs, dtype=float)
    p = p[p > ENTROPY_EIG_CUTOFF]
    return float(-(p * np.log2(p)).sum())


def von_neumann_entropy(density: np.ndarray | TwoQubitState) -> float:
    """H(rho) = -Tr(rho log2 rho) in bits."""
    m = density.matrix if isinstance(density, TwoQubitState) else _check_density(density)
    eigvals = clean_eigenvalues(np.linalg.eigvalsh(m))
    return shannon_entropy(eigvals)


def conditional_entropy(state: TwoQubitState) -> float:
    """Conditional entropy H(A|B) = H(AB) - H(B) of a two-qubit state, in bits."""
    return von_neumann_entropy(state) - von_neumann_entropy(partial_trace(state, "B"))


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity F(rho, sigma) = ||sqrt(rho) sqrt(sigma)||_1^2."""
    r = np.asarray(rho, dtype=complex)
    s = np.asarray(sigma, dtype=complex)
    if r.shape != s.shape:
        raise ValidationError(f"dimension mismatch: {r.shape} vs {s.shape}")
    _check_density(r)
    _check_density(s)
    vals, vecs = np.linalg.eigh(r)
    vals = clean_eigenvalues(vals)
    sqrt_r = (vecs * np.sqrt(vals)) @ vecs.conj().T
    inner = sqrt_r @ s @ sqrt_r
    ev = clean_eigenvalues(np.linalg.eigvalsh(inner))
    return float(np.sqrt(ev).sum() ** 2)


def twirl(state: TwoQubitState) -> TwoQubitState:
    """Average of U (x) U conjugations over the four Paulis.

    Projects onto the Bell-diagonal states while preserving the Bell-basis
    diagonal of the input.
    """
    m = state.matrix
    out = np.zeros_like(m)
    for u in PAULIS:
        uu = np.kron(u, u)
        out += uu @ m @ uu.conj().T
    return TwoQubitState(out / 4)


def bell_diagonal_entries(state: TwoQubitState) -> np.ndarray:
    """The state expressed in the Bell basis (full 4x4 matrix)."""
    return BELL_BASIS.conj().T @ state.matrix @ BELL_BASIS


def bell_spectrum(state: TwoQubitState) -> BellDiagonalSpectrum:
    """Spectrum of a Bell-diagonal state; rejects non-Bell-diagonal input."""
    in_bell = bell_diagonal_entries(state)
    off = in_bell - np.diag(np.diag(in_bell))
    max_off = float(np.max(np.abs(off)))
    if max_off > BELL_DIAG_TOL:
        raise ValidationError(
            f"state is not Bell-diagonal: max off-diagonal magnitude {max_off:.3e}"
        )
    diag = clean_eigenvalues(np.diag(in_bell).real)
    return BellDiagonalSpectrum(*diag)


def werner_state(xi: float) -> TwoQubitState:
    """(1 - xi)|Phi+><Phi+| + xi I/4 for xi in [0, 1]."""
    if not 0.0 <= xi <= 1.0:
        raise ValidationError(f"xi must lie in [0, 1], got {xi}")
    phi_plus = np.outer(BELL_BASIS[:, 0], BELL_BASIS[:, 0].conj())
    return TwoQubitState((1 - xi) * phi_plus + xi * np.eye(4) / 4)


def werner_spectrum(xi: float) -> BellDiagonalSpectrum:
    return BellDiagonalSpectrum(1 - 3 * xi / 4, xi / 4, xi / 4, xi / 4)


def jordan_blocks(obs0: Observable, obs1: Observable, tol: float = 1e-8) -> list[JordanBlock]:
    """Decompose a pair of reflections into common 2x2 blocks.

    Uses the spectral decomposition of the symmetrised product
    (obs0 obs1 + obs1 obs0)/2, which commutes with both observables and
    whose eigenvalues are cos(angle), each doubly degenerate per block.
    Returns d/2 blocks with angles in [0, pi].
    """
    a0, a1 = obs0.matrix, obs1.matrix
    d = obs0.dim
    if obs1.dim != d:
        raise ValidationError(f"observable dimensions differ: {d} vs {obs1.dim}")
    if d % 2 != 0:
        raise ValidationError(f"observable dimension must be even, got {d}")

    sym = (a0 @ a1 + a1 @ a0) / 2
    cos_vals, vecs = np.linalg.eigh(sym)

    blocks: list[JordanBlock] = []
    i = 0
    while i < d:
        # group the degenerate eigenspace of this cos(angle)
        j = i + 1
        while j < d and cos_vals[j] - cos_vals[i] < tol:
            j += 1
        c = float(np.clip(np.mean(cos_vals[i:j]), -1.0, 1.0))
        angle = math.acos(c)
        space = vecs[:, i:j]  # columns span the eigenspace, dimension 2m
        blocks.extend(_split_eigenspace(a0, a1, space, angle, tol))
        i = j
    blocks.sort(key=lambda b: b.angle)
    return blocks


def _split_eigenspace(a0, a1, space, angle, tol):
    """Split one cos-eigenspace of the symmetrised product into 2x2 blocks."""
    dim = space.shape[1]
    if dim % 2 != 0:
        raise ValidationError("odd-dimensional Jordan eigenspace; input is not a reflection pair")
    c, s = math.cos(angle), math.sin(angle)
    # diagonalise obs0 restricted to the eigenspace
    a0_r = space.conj().T @ a0 @ space
    vals, v = np.linalg.eigh(a0_r)
    plus = space @ v[:, vals > 0]
    minus = space @ v[:, vals < 0]

    blocks = []
    if abs(s) > tol:
        # pair each +1 vector u with w = (a1 u - c u)/s, automatically orthonormal
        for k in range(plus.shape[1]):
            u = plus[:, k]
            w = (a1 @ u - c * u) / s
            w = w / np.linalg.norm(w)
            blocks.append(JordanBlock(angle=angle, block_basis=np.vstack([u, w])))
    else:
        # degenerate (angle 0 or pi): obs1 = +/- obs0 on the block, any pairing works
        for k in range(plus.shape[1]):
            blocks.append(
                JordanBlock(angle=angle, block_basis=np.vstack([plus[:, k], minus[:, k]]))
            )
    return blocks


def block_projectors(blocks: list[JordanBlock]) -> list[np.ndarray]:
    """Rank-2 projector onto each block's subspace."""
    return [b.block_basis.T @ b.block_basis.conj() for b in blocks]


def observables_from_blocks(blocks: list[JordanBlock]) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruct the observable pair encoded by a block list."""
    d = blocks[0].block_basis.shape[1]
    a0 = np.zeros((d, d), dtype=complex)
    a1 = np.zeros((d, d), dtype=complex)
    for b in blocks:
        v = b.block_basis.T  # columns u, w
        c, s = math.cos(b.angle), math.sin(b.angle)
        a0 += v @ SIGMA_Z @ v.conj().T
        a1 += v @ (c * SIGMA_Z + s * SIGMA_X) @ v.conj().T
    return a0, a1
