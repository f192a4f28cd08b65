"""Assembly of the 16x16 generator of the coherence-vector flow.

The master equation becomes a linear ODE ``d/dt v = M(u) v`` on the
16-vector ``(c0, vA, vAB, vB)``.  ``M`` is built here along two
independent routes:

* :func:`assemble_generator` places closed-form 3x3 / 3x9 blocks
  (rotation generators, coupling blocks, dissipation blocks) into the
  16x16 layout;
* :func:`numeric_generator` projects the GKSL generator column by
  column onto the Lambda basis, with no block-structure assumptions.

The two must agree to machine precision; the test suite certifies this
on randomized models, which pins every sign and orientation convention
used below.

Block conventions.  For a traceless 2x2 Hamiltonian ``h`` with
``alpha_j = Tr(h sigma_j)``, the single-qubit rotation generator is
``sum_j alpha_j T_j`` where ``T_j`` represents ``-i [sigma_j / 2, . ]``
on the span of the Pauli matrices.  Dissipation enters through a 3x3
matrix ``d_hat`` and a drive vector ``v0`` computed from the one-qubit
dissipator; in the 16x16 layout ``d_hat`` acts on ``vA``, ``d_hat x I_3``
on ``vAB``, ``v0`` sits in the ``c0`` column of the ``vA`` rows and
``v0 x I_3`` couples ``vB`` into the ``vAB`` rows.  The first row is
identically zero (trace preservation), so ``c0`` stays at ``1/2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coherence import VA, VAB, VB, lambda_basis
from .model import TwoQubitModel
from .quantum import lindblad_apply, pauli

__all__ = [
    "t_matrices",
    "dissipator_blocks",
    "GeneratorBlocks",
    "assemble_blocks",
    "assemble_generator",
    "generator",
    "numeric_generator",
    "control_generators",
]

_T = np.array(
    [
        [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
        [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    ]
)
_T.setflags(write=False)

_I3 = np.eye(3)


def t_matrices() -> np.ndarray:
    """The so(3) generators ``T_j`` representing ``-i [sigma_j / 2, . ]``.

    Returned as a read-only (3, 3, 3) array; ``[T_i, T_j] = eps_ijk T_k``.
    """
    return _T


def _pauli_coefficients(h: np.ndarray) -> np.ndarray:
    """Coefficients ``alpha_j = Tr(h sigma_j)`` of a traceless 2x2 matrix."""
    h = np.asarray(h, dtype=complex)
    if abs(np.trace(h)) > 1e-12:
        raise ValueError("Hamiltonian part must be traceless")
    return np.array([np.trace(h @ pauli(j)).real for j in (1, 2, 3)])


def _rotation_generator(h: np.ndarray) -> np.ndarray:
    """3x3 antisymmetric generator of the Bloch rotation induced by ``h``."""
    alpha = _pauli_coefficients(h)
    return np.einsum("j,jkl->kl", alpha, _T)


def dissipator_blocks(jumps) -> tuple[np.ndarray, np.ndarray]:
    """One-qubit dissipation blocks ``(d_hat, v0)``.

    ``d_hat[i, j] = Tr(sigma_i D(sigma_j)) / 2`` is the action of the
    dissipator on the Bloch components, and
    ``v0[i] = Tr(sigma_i D(I_2)) / 2`` is the affine drive, so that the
    single-qubit Bloch equation reads ``d/dt vA = v0 / 2 + d_hat vA``
    (the 1/2 is the ``c0`` component the drive multiplies).
    """
    d_hat = np.zeros((3, 3))
    v0 = np.zeros(3)
    if not jumps:
        return d_hat, v0
    for j in (1, 2, 3):
        img = lindblad_apply(pauli(j), None, jumps)
        for i in (1, 2, 3):
            d_hat[i - 1, j - 1] = 0.5 * np.trace(pauli(i) @ img).real
    img0 = lindblad_apply(np.eye(2, dtype=complex), None, jumps)
    for i in (1, 2, 3):
        v0[i - 1] = 0.5 * np.trace(pauli(i) @ img0).real
    return d_hat, v0


@dataclass(frozen=True, eq=False)
class GeneratorBlocks:
    """Closed-form blocks of the 16x16 generator.

    ``h_a`` and ``h_b`` are the 3x3 rotation generators of the two
    qubits, ``h_it`` (3x9) and ``h_ib`` (3x9) the coupling blocks acting
    on the correlation coordinates from the ``vA`` and ``vB`` rows, and
    ``h_il = -h_it.T``, ``h_ir = -h_ib.T`` their partners fixed by
    antisymmetry of the Hamiltonian part.  ``d_hat`` and ``v0`` are the
    dissipation blocks of :func:`dissipator_blocks`.
    """

    h_a: np.ndarray
    h_b: np.ndarray
    h_it: np.ndarray
    h_il: np.ndarray
    h_ir: np.ndarray
    h_ib: np.ndarray
    d_hat: np.ndarray
    v0: np.ndarray


def assemble_blocks(model: TwoQubitModel, u) -> GeneratorBlocks:
    """Compute all generator blocks for a model at control value ``u``.

    The coupling blocks are ``h_it = sum_j T_j x lam[j, :]`` and
    ``h_ib = sum_j lam[:, j] x T_j`` (rows of ``lam`` against the
    A rotation generators, columns against the B ones).
    """
    u = np.asarray(u, dtype=float).reshape(3)
    h_a = _rotation_generator(model.hamiltonian_a(u))
    h_b = _rotation_generator(model.hamiltonian_b())
    lam = model.lam
    h_it = np.zeros((3, 9))
    h_ib = np.zeros((3, 9))
    for j in (1, 2, 3):
        h_it += np.kron(_T[j - 1], lam[j - 1, :].reshape(1, 3))
        h_ib += np.kron(lam[:, j - 1].reshape(1, 3), _T[j - 1])
    d_hat, v0 = dissipator_blocks(model.jumps)
    return GeneratorBlocks(
        h_a=h_a,
        h_b=h_b,
        h_it=h_it,
        h_il=-h_it.T,
        h_ir=-h_ib.T,
        h_ib=h_ib,
        d_hat=d_hat,
        v0=v0,
    )


def assemble_generator(blocks: GeneratorBlocks) -> np.ndarray:
    """Place the blocks into the 16x16 layout ``(c0, vA, vAB, vB)``."""
    m = np.zeros((16, 16))
    m[VA, 0] = blocks.v0
    m[VA, VA] = blocks.h_a + blocks.d_hat
    m[VA, VAB] = blocks.h_it
    m[VAB, VA] = blocks.h_il
    m[VAB, VAB] = (
        np.kron(blocks.h_a, _I3)
        + np.kron(_I3, blocks.h_b)
        + np.kron(blocks.d_hat, _I3)
    )
    m[VAB, VB] = blocks.h_ir + np.kron(blocks.v0.reshape(3, 1), _I3)
    m[VB, VAB] = blocks.h_ib
    m[VB, VB] = blocks.h_b
    return m


def generator(model: TwoQubitModel, u) -> np.ndarray:
    """Shorthand for ``assemble_generator(assemble_blocks(model, u))``."""
    return assemble_generator(assemble_blocks(model, u))


def numeric_generator(model: TwoQubitModel, u) -> np.ndarray:
    """16x16 generator obtained by projecting the GKSL map onto the basis.

    Column ``j`` holds the coherence coordinates of the generator
    applied to the basis element ``L_j``; no block structure is assumed,
    which makes this the reference implementation the closed-form
    assembly is checked against.
    """
    u = np.asarray(u, dtype=float).reshape(3)
    h = model.hamiltonian(u)
    jumps = model.full_jumps()
    lam_basis = lambda_basis()
    images = np.array([lindblad_apply(lam_basis[j], h, jumps) for j in range(16)])
    m = np.einsum("ikl,jlk->ij", lam_basis, images)
    if np.max(np.abs(m.imag)) > 1e-12:
        raise AssertionError("generator projection produced complex entries")
    return m.real


def control_generators(model: TwoQubitModel) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear decomposition ``M(u) = M0 + sum_j u_j Mc[j]``.

    Returns the drift-plus-dissipation generator ``M0`` and a (3, 16, 16)
    stack of control generators, each independent of drift and noise.
    """
    m0 = generator(model, np.zeros(3))
    mc = np.empty((3, 16, 16))
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1.0
        mc[j] = generator(model, e) - m0
    return m0, mc
