"""Purity protection of the indirectly controlled qubit.

Keeping the reduced state of qubit B pure forces the coherence vector
onto the factorized form ``(1/2, vA, 2 vA (x) vB, vB)`` with
``|vB| = 1/2``.  The central object here is the *factorization drift*:
the rate at which the correlation block departs from that product form,

    drift = d/dt vAB - 2 (d/dt vA) (x) vB - 2 vA (x) (d/dt vB),

evaluated through the assembled generator.  On factorized states the
drift is independent of the controls, the local frequencies and the
jump operators; only the coupling matrix enters.  Closed forms for the
dispersive and resonant couplings are provided as transcription
oracles, and the case-study tooling (invariant submanifolds,
dissipation compatibility, the protecting control law and the reduced
B dynamics) lives here as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coherence import VA, VAB, VB, BlochVector, embed_factorized
from .dynamics import ControlLaw, Trajectory, integrate
from .generator import dissipator_blocks, generator, t_matrices
from .model import TwoQubitModel

__all__ = [
    "Coupling",
    "FactorizedState",
    "random_factorized_states",
    "make_model",
    "factorization_drift",
    "drift_batch",
    "closed_form_drift",
    "transcription_report",
    "compatibility",
    "IncompatibleDissipationError",
    "protecting_control",
    "protecting_law",
    "reduced_b_generator",
    "dispersive_zero_pattern",
    "dispersive_invariant_report",
    "resonant_obstruction_report",
    "axis1_escape_report",
]

COUPLING_TAGS = ("dispersive", "resonant", "sigma3-sigma1")

#: residual threshold of the amplitude-damping compatibility condition
COMPATIBILITY_TOL = 1e-10


@dataclass(frozen=True)
class Coupling:
    """Named coupling case with strength ``g``.

    The coupling matrix entries are the ``lam`` coefficients of
    ``H_I = (1/2) sum lam[i, j] sigma_i x sigma_j``:

    * ``dispersive``    -> ``lam[3, 3] = g``
    * ``resonant``      -> ``lam[1, 1] = lam[2, 2] = g``
    * ``sigma3-sigma1`` -> ``lam[3, 1] = g``
    """

    tag: str
    g: float

    def __post_init__(self):
        if self.tag not in COUPLING_TAGS:
            raise ValueError(f"unknown coupling tag {self.tag!r}; expected one of {COUPLING_TAGS}")

    def lambda_matrix(self) -> np.ndarray:
        lam = np.zeros((3, 3))
        if self.tag == "dispersive":
            lam[2, 2] = self.g
        elif self.tag == "resonant":
            lam[0, 0] = self.g
            lam[1, 1] = self.g
        else:
            lam[2, 0] = self.g
        return lam


def make_model(
    coupling: Coupling,
    omega_a: float = 0.0,
    omega_b: float = 0.0,
    jumps=(),
) -> TwoQubitModel:
    """Model with the given coupling case, local frequencies and noise."""
    return TwoQubitModel(omega_a, omega_b, coupling.lambda_matrix(), tuple(jumps))


@dataclass(frozen=True, eq=False)
class FactorizedState:
    """Blocks ``(vA, vB)`` of a state with a pure reduced B qubit.

    ``|vB|`` must equal ``1/2`` (B on its Bloch sphere) and ``|vA|`` may
    not exceed ``1/2``; the full coherence vector is recovered with
    :meth:`embed`.
    """

    va: np.ndarray
    vb: np.ndarray

    def __post_init__(self):
        va = np.asarray(self.va, dtype=float).reshape(3)
        vb = np.asarray(self.vb, dtype=float).reshape(3)
        if abs(vb @ vb - 0.25) > 1e-10:
            raise ValueError(f"|vB|^2 must be 1/4, got {vb @ vb:.12f}")
        if va @ va > 0.25 + 1e-10:
            raise ValueError(f"|vA|^2 must not exceed 1/4, got {va @ va:.12f}")
        object.__setattr__(self, "va", va)
        object.__setattr__(self, "vb", vb)

    def embed(self) -> BlochVector:
        return embed_factorized(self.va, self.vb)


def random_factorized_states(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Arrays ``(vA (n,3), vB (n,3))``: vA uniform in the half-ball radius, vB on the sphere."""
    va = rng.normal(size=(n, 3))
    va /= np.linalg.norm(va, axis=1, keepdims=True)
    va *= 0.5 * rng.uniform(0.0, 1.0, (n, 1)) ** (1.0 / 3.0)
    vb = rng.normal(size=(n, 3))
    vb /= 2.0 * np.linalg.norm(vb, axis=1, keepdims=True)
    return va, vb


# -- factorization drift ------------------------------------------------------


def drift_batch(m: np.ndarray, vas: np.ndarray, vbs: np.ndarray) -> np.ndarray:
    """Factorization drift of many factorized states under a fixed generator.

    ``m`` is a 16x16 generator, ``vas``/``vbs`` are (n, 3) stacks.
    Returns an (n, 9) array.
    """
    vas = np.atleast_2d(vas)
    vbs = np.atleast_2d(vbs)
    n = vas.shape[0]
    states = np.empty((n, 16))
    states[:, 0] = 0.5
    states[:, VA] = vas
    states[:, VAB] = 2.0 * np.einsum("ni,nj->nij", vas, vbs).reshape(n, 9)
    states[:, VB] = vbs
    rates = states @ m.T
    coupled = np.einsum("ni,nj->nij", rates[:, VA], vbs) + np.einsum(
        "ni,nj->nij", vas, rates[:, VB]
    )
    return rates[:, VAB] - 2.0 * coupled.reshape(n, 9)


def factorization_drift(model: TwoQubitModel, state: FactorizedState, u) -> np.ndarray:
    """Drift of the product form at ``state`` under ``model`` and control ``u``.

    Computed through the assembled generator (single source of truth);
    the closed forms in :func:`closed_form_drift` are checked against
    this function, never the other way around.
    """
    m = generator(model, np.asarray(u, dtype=float).reshape(3))
    return drift_batch(m, state.va[None, :], state.vb[None, :])[0]


def closed_form_drift(coupling: Coupling, state: FactorizedState) -> np.ndarray:
    """Transcribed closed form of the factorization drift.

    Supported for the dispersive and resonant couplings; the
    ``sigma3-sigma1`` case has no published closed form and is handled
    through :func:`factorization_drift` directly.
    """
    va = state.va
    vb = state.vb
    return _closed_form_drift_arrays(coupling, va[None, :], vb[None, :])[0]


def _closed_form_drift_arrays(coupling: Coupling, va: np.ndarray, vb: np.ndarray) -> np.ndarray:
    a1, a2, a3 = va[:, 0], va[:, 1], va[:, 2]
    b1, b2, b3 = vb[:, 0], vb[:, 1], vb[:, 2]
    g = coupling.g
    if coupling.tag == "dispersive":
        w = np.stack(
            [
                4.0 * (a2 * b1 * b3 + a1 * a3 * b2),
                4.0 * (a2 * b2 * b3 - a1 * a3 * b1),
                -a2 * (1.0 - 4.0 * b3**2),
                4.0 * (a2 * a3 * b2 - a1 * b1 * b3),
                -4.0 * (a1 * b2 * b3 + a2 * a3 * b1),
                a1 * (1.0 - 4.0 * b3**2),
                -b2 * (1.0 - 4.0 * a3**2),
                b1 * (1.0 - 4.0 * a3**2),
                np.zeros_like(a1),
            ],
            axis=1,
        )
        return g * w
    if coupling.tag == "resonant":
        d12 = a2 * b1 - a1 * b2
        cross = 1.0 - 4.0 * a3 * b3
        w = np.stack(
            [
                -4.0 * (a3 * b1 * b2 + a1 * a2 * b3),
                -(a3 * (4.0 * b2**2 - 1.0) + b3 * (1.0 - 4.0 * a1**2)),
                4.0 * a1 * d12 + b2 * cross,
                a3 * (4.0 * b1**2 - 1.0) + b3 * (1.0 - 4.0 * a2**2),
                4.0 * (a3 * b1 * b2 + a1 * a2 * b3),
                4.0 * a2 * d12 - b1 * cross,
                -4.0 * b1 * d12 + a2 * cross,
                -4.0 * b2 * d12 - a1 * cross,
                4.0 * d12 * (a3 - b3),
            ],
            axis=1,
        )
        return g * w
    raise ValueError(f"no closed-form drift for coupling {coupling.tag!r}")


def transcription_report(
    coupling: Coupling,
    n_samples: int = 500,
    seed: int = 0,
    omega_a: float = 0.7,
    omega_b: float = 1.3,
    jumps=None,
    u=(0.4, -0.3, 0.6),
) -> dict:
    """Compare closed-form and generator-route drifts on random states.

    The comparison model deliberately carries local frequencies,
    a control offset and dissipation: the generator route must shed all
    of them on factorized states, so a match certifies both the
    transcription and the cancellation structure.
    """
    from .quantum import SIGMA_MINUS

    if jumps is None:
        jumps = (0.5 * SIGMA_MINUS,)
    rng = np.random.default_rng(seed)
    vas, vbs = random_factorized_states(rng, n_samples)
    model = make_model(coupling, omega_a, omega_b, jumps)
    m = generator(model, np.asarray(u, dtype=float))
    numeric = drift_batch(m, vas, vbs)
    closed = _closed_form_drift_arrays(coupling, vas, vbs)
    residuals = np.max(np.abs(numeric - closed), axis=1)
    worst = int(np.argmax(residuals))
    return {
        "coupling": coupling.tag,
        "g": coupling.g,
        "n_samples": int(n_samples),
        "seed": int(seed),
        "max_residual": float(residuals[worst]),
        "worst_sample": {"va": vas[worst].tolist(), "vb": vbs[worst].tolist()},
    }


# -- dissipation compatibility and the protecting control --------------------


class IncompatibleDissipationError(ValueError):
    """The jump operators cannot hold ``vA3`` at the requested pole."""


def compatibility(model: TwoQubitModel, target_va3: float) -> tuple[bool, float]:
    """Test whether the dissipation can freeze ``vA3`` at ``target_va3``.

    Returns ``(ok, residual)`` with ``residual = |v0_3 / 2 + target * d33|``;
    the pole is a fixed point of the dissipative ``vA3`` dynamics exactly
    when the residual vanishes.  Amplitude damping along ``sigma_3``
    satisfies this for one sign of the target, pure ``sigma_3`` dephasing
    for both, and generic noise for neither.
    """
    d_hat, v0 = dissipator_blocks(model.jumps)
    residual = abs(0.5 * v0[2] + float(target_va3) * d_hat[2, 2])
    return residual <= COMPATIBILITY_TOL, residual


def protecting_control(model: TwoQubitModel, va3: float) -> tuple[float, float]:
    """Constant control ``(u1, u2)`` freezing ``vA = (0, 0, va3)``.

    With the default control set (``sigma_1``, ``sigma_2``, ``sigma_3``)
    the two transverse Bloch rates at the pole are cancelled by

        ``u1 =  (v0_2 + 2 va3 d23) / (4 va3)``
        ``u2 = -(v0_1 + 2 va3 d13) / (4 va3)``

    and the longitudinal rate vanishes by the compatibility condition,
    which is checked first.  ``u3`` is free and taken to be zero.
    """
    va3 = float(va3)
    if abs(abs(va3) - 0.5) > 1e-10:
        raise ValueError(f"va3 must be +/- 1/2, got {va3}")
    if not model.has_default_controls():
        raise ValueError("the protecting control law assumes the default Pauli controls")
    ok, residual = compatibility(model, va3)
    if not ok:
        raise IncompatibleDissipationError(
            f"dissipation violates v0_3/2 + va3*d33 = 0 (residual {residual:.3e}); "
            f"vA3 = {va3} cannot be held constant by any control"
        )
    d_hat, v0 = dissipator_blocks(model.jumps)
    u1 = (v0[1] + 2.0 * va3 * d_hat[1, 2]) / (4.0 * va3)
    u2 = -(v0[0] + 2.0 * va3 * d_hat[0, 2]) / (4.0 * va3)
    return float(u1), float(u2)


def protecting_law(model: TwoQubitModel, va3: float, bound: float | None = None) -> ControlLaw:
    """The protecting control packaged as a (constant) control law."""
    u1, u2 = protecting_control(model, va3)
    return ControlLaw.constant([u1, u2, 0.0], bound=bound)


def reduced_b_generator(coupling: Coupling, va3: float, omega_b: float) -> np.ndarray:
    """3x3 rotation generator of ``vB`` on the protected manifold.

    With ``vA`` frozen at ``(0, 0, va3)`` and the correlation block in
    product form, ``vB`` rotates with generator

    * dispersive:      ``(2 omega_b + 2 g va3) T_3``
    * sigma3-sigma1:   ``2 omega_b T_3 + 2 g va3 T_1``

    i.e. the coupling shifts the precession rate (dispersive) or tilts
    the rotation axis (sigma3-sigma1); neither case is affected by the
    control.  The resonant coupling admits no such protected rotation
    and is rejected.
    """
    t = t_matrices()
    if coupling.tag == "dispersive":
        return (2.0 * omega_b + 2.0 * coupling.g * va3) * t[2]
    if coupling.tag == "sigma3-sigma1":
        return 2.0 * omega_b * t[2] + 2.0 * coupling.g * va3 * t[0]
    raise ValueError("the resonant coupling has no dissipation-protected B rotation")


# -- dispersive invariant submanifold -----------------------------------------

# Flat indices of the coordinates that must stay zero when B is pinned
# at a sigma_3 pole: all vAB slots with second subscript 1 or 2, plus
# vB1 and vB2.
_Z2_INDICES = np.array([4, 5, 7, 8, 10, 11, 13, 14])
_NON_Z2_COLUMNS = np.array([c for c in range(16) if c not in set(_Z2_INDICES.tolist())])


def dispersive_zero_pattern(model: TwoQubitModel, u_samples=None) -> float:
    """Largest generator entry coupling the pinned block to the rest.

    For a dispersive coupling the rows of the pinned coordinates must
    have exactly zero entries against every other column (including the
    affine one), for every control value and any dissipation; the
    returned magnitude is the worst violation over ``u_samples``.
    """
    if u_samples is None:
        u_samples = [np.zeros(3), np.array([1.3, -0.7, 0.4]), np.array([-2.0, 2.0, 1.0])]
    worst = 0.0
    for u in u_samples:
        m = generator(model, u)
        worst = max(worst, float(np.max(np.abs(m[np.ix_(_Z2_INDICES, _NON_Z2_COLUMNS)]))))
    return worst


def dispersive_invariant_report(
    model: TwoQubitModel,
    va0: np.ndarray,
    sign: int,
    law: ControlLaw,
    horizon: float,
    step: float,
) -> dict:
    """Integrate from ``rho_A x (I +/- sigma_3)/2`` and track the pinned block.

    Reports the worst excursion of the coordinates that must stay zero
    and of ``|vB3| - 1/2``, plus the structural zero-pattern magnitude.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    vb = np.array([0.0, 0.0, 0.5 * sign])
    v0 = embed_factorized(np.asarray(va0, dtype=float), vb)
    traj = integrate(model, v0, law, horizon, step)
    z2 = traj.states[:, _Z2_INDICES]
    max_z2 = float(np.max(np.linalg.norm(z2, axis=1)))
    max_vb3_dev = float(np.max(np.abs(np.abs(traj.states[:, 15]) - 0.5)))
    return {
        "max_z2": max_z2,
        "max_vb3_deviation": max_vb3_dev,
        "structure_defect": dispersive_zero_pattern(model),
        "horizon": float(horizon),
        "step": float(step),
    }


# -- resonant obstruction ------------------------------------------------------


def _affine_solution_set(d_hat: np.ndarray, v0: np.ndarray) -> dict:
    """Classify the solutions of ``v0 / 2 + d_hat vA = 0``."""
    rhs = -0.5 * v0
    u_svd, s, vt = np.linalg.svd(d_hat)
    tol = max(d_hat.shape) * np.finfo(float).eps * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > max(tol, 1e-12)))
    # consistency: rhs must live in the column span
    proj = u_svd[:, :rank] @ (u_svd[:, :rank].T @ rhs)
    if np.linalg.norm(rhs - proj) > 1e-9 * max(1.0, np.linalg.norm(rhs)):
        return {"kind": "empty", "dimension": None, "min_norm": None, "has_norm_half": False}
    particular = vt[:rank].T @ ((u_svd[:, :rank].T @ rhs) / s[:rank])
    dim = 3 - rank
    min_norm = float(np.linalg.norm(particular))
    kinds = {0: "point", 1: "line", 2: "plane", 3: "space"}
    # the affine set contains a norm-1/2 point iff its minimum norm is
    # at most 1/2 (norms are unbounded above along null directions)
    if dim == 0:
        has_half = abs(min_norm - 0.5) <= 1e-9
    else:
        has_half = min_norm <= 0.5 + 1e-9
    return {
        "kind": kinds[dim],
        "dimension": dim,
        "min_norm": min_norm,
        "solution": particular.tolist(),
        "has_norm_half": bool(has_half),
    }


def resonant_obstruction_report(
    g: float,
    grid_step: float = 0.05,
    n_random: int = 10_000,
    seed: int = 0,
    model: TwoQubitModel | None = None,
    drift_tol: float = 1e-9,
    chunk: int = 400_000,
) -> dict:
    """Sweep the factorized constraint set of the resonant coupling.

    Part (a): evaluate the factorization drift on a grid over
    ``vA`` (cube grid intersected with the ball) times ``vB`` (angular
    grid on the sphere) plus ``n_random`` random samples, and record the
    smallest ``|vA|`` among points where the drift vanishes.  Every such
    point must have ``|vA| = 1/2``, i.e. a fully pure state: keeping B
    pure without keeping the whole state pure is obstructed.

    Part (b): solve ``v0 / 2 + d_hat vA = 0`` for the supplied model's
    dissipation and report whether any solution has norm ``1/2`` (the
    only way full purity can survive the noise).
    """
    coupling = Coupling("resonant", g)
    if model is None:
        from .quantum import SIGMA_MINUS

        model = make_model(coupling, omega_a=0.9, omega_b=1.1, jumps=(SIGMA_MINUS,))
    m = generator(model, np.array([0.3, -0.2, 0.1]))

    axis = np.arange(-0.5, 0.5 + grid_step / 2.0, grid_step)
    ga, gb, gc = np.meshgrid(axis, axis, axis, indexing="ij")
    va_grid = np.column_stack([ga.ravel(), gb.ravel(), gc.ravel()])
    va_grid = va_grid[np.einsum("ij,ij->i", va_grid, va_grid) <= 0.25 + 1e-12]

    theta = np.arange(0.0, np.pi + grid_step / 2.0, grid_step)
    phi = np.arange(0.0, 2.0 * np.pi, grid_step)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    vb_grid = 0.5 * np.column_stack(
        [
            (np.sin(tt) * np.cos(pp)).ravel(),
            (np.sin(tt) * np.sin(pp)).ravel(),
            np.cos(tt).ravel(),
        ]
    )

    rng = np.random.default_rng(seed)
    va_rand, vb_rand = random_factorized_states(rng, n_random)

    zero_count = 0
    min_norm_at_zero = np.inf
    worst_point = None
    smallest_drift_offsphere = np.inf

    def scan(vas, vbs):
        nonlocal zero_count, min_norm_at_zero, worst_point, smallest_drift_offsphere
        w = drift_batch(m, vas, vbs)
        wnorm = np.linalg.norm(w, axis=1)
        va_norm = np.sqrt(np.einsum("ij,ij->i", vas, vas))
        mask = wnorm <= drift_tol
        if np.any(mask):
            zero_count += int(np.sum(mask))
            idx = np.argmin(va_norm[mask])
            cand = va_norm[mask][idx]
            if cand < min_norm_at_zero:
                min_norm_at_zero = float(cand)
                sel = np.flatnonzero(mask)[idx]
                worst_point = {"va": vas[sel].tolist(), "vb": vbs[sel].tolist()}
        off = va_norm < 0.5 - 1e-6
        if np.any(off):
            smallest_drift_offsphere = min(
                smallest_drift_offsphere, float(np.min(wnorm[off]))
            )

    n_vb = vb_grid.shape[0]
    rows_per_chunk = max(1, chunk // max(n_vb, 1))
    for start in range(0, va_grid.shape[0], rows_per_chunk):
        block = va_grid[start : start + rows_per_chunk]
        vas = np.repeat(block, n_vb, axis=0)
        vbs = np.tile(vb_grid, (block.shape[0], 1))
        scan(vas, vbs)
    scan(va_rand, vb_rand)

    d_hat, v0 = dissipator_blocks(model.jumps)
    solve = _affine_solution_set(d_hat, v0)

    return {
        "coupling": "resonant",
        "g": float(g),
        "grid_step": float(grid_step),
        "n_random": int(n_random),
        "seed": int(seed),
        "drift_tol": float(drift_tol),
        "n_drift_zero_points": zero_count,
        "min_va_norm_at_zero": None if zero_count == 0 else min_norm_at_zero,
        "worst_zero_point": worst_point,
        "min_drift_off_sphere": smallest_drift_offsphere,
        "purity_fixed_point": solve,
    }


# -- sigma3-sigma1: rejection of the axis-1 branch -----------------------------


def axis1_escape_report(
    model: TwoQubitModel,
    bound: float = 2.0,
    n_levels: int = 5,
    seed: int = 0,
    n_states: int = 20,
) -> dict:
    """First-order escape rate from ``rho_A x (I +/- sigma_1)/2`` states.

    Pinning B at a ``sigma_1`` pole makes the factorization drift vanish
    identically, yet the configuration cannot persist: the free rotation
    of B moves ``vB`` off the pole at rate ``|omega_b|`` regardless of
    the control, which acts on A only.  The report returns the minimum,
    over a control grid and random ``vA``, of the instantaneous rate at
    which the pole constraints ``(vB2, vB3) = 0`` are violated.  The
    rate degenerates to zero exactly when ``omega_b = 0``, in which case
    the branch is not excluded by this first-order argument.
    """
    rng = np.random.default_rng(seed)
    vas, _ = random_factorized_states(rng, n_states)
    levels = np.linspace(-bound, bound, n_levels)
    grid = np.array(np.meshgrid(levels, levels, levels, indexing="ij")).reshape(3, -1).T
    min_rate = np.inf
    for sign in (1, -1):
        vb = np.array([0.5 * sign, 0.0, 0.0])
        for u in grid:
            m = generator(model, u)
            states = np.empty((n_states, 16))
            states[:, 0] = 0.5
            states[:, VA] = vas
            states[:, VAB] = 2.0 * np.einsum("ni,j->nij", vas, vb).reshape(n_states, 9)
            states[:, VB] = vb
            rates = states @ m.T
            escape = np.linalg.norm(rates[:, [14, 15]], axis=1)
            min_rate = min(min_rate, float(np.min(escape)))
    return {
        "min_escape_rate": min_rate,
        "omega_b": model.omega_b,
        "expected_rate": abs(model.omega_b),
        "control_bound": float(bound),
        "note": "rate vanishes iff omega_b = 0; the exclusion is first-order only",
    }


# -- convenience for closed-loop protection runs -------------------------------


def protected_run(
    model: TwoQubitModel,
    coupling: Coupling,
    va3: float,
    vb0: np.ndarray,
    horizon: float,
    step: float,
) -> tuple[Trajectory, np.ndarray]:
    """Close the loop with the protecting control and integrate.

    Returns the trajectory together with the reduced rotation generator
    the realized ``vB(t)`` should follow.  ``model`` must carry the
    coupling matrix of ``coupling``.
    """
    if np.max(np.abs(model.lam - coupling.lambda_matrix())) > 1e-12:
        raise ValueError("model coupling matrix does not match the stated coupling case")
    law = protecting_law(model, va3)
    state = FactorizedState(np.array([0.0, 0.0, va3]), np.asarray(vb0, dtype=float))
    traj = integrate(model, state.embed(), law, horizon, step)
    rot = reduced_b_generator(coupling, va3, model.omega_b)
    return traj, rot
