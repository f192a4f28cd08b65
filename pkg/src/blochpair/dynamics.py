"""Trajectory integration of the coherence-vector flow.

Fixed-step classical Runge-Kutta of order 4.  For piecewise-constant
controls the generator is constant within each step, so the RK4 update
is applied as the degree-4 polynomial ``I + hM + ... + (hM)^4 / 24``
precomputed per segment; this is the standard stage evaluation written
as a single matrix and keeps long sweeps fast.  Sampled and
state-feedback laws use explicit stage evaluation, with feedback laws
seeing the stage state.

Trajectories record every step.  The ``c0`` component has identically
zero derivative (first generator row is zero), so it stays at exactly
``1/2`` without enforcement.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .coherence import BlochVector, VA, VB, physicality_defect, from_coherence
from .generator import assemble_blocks, control_generators
from .model import TwoQubitModel

__all__ = [
    "ControlLaw",
    "Trajectory",
    "PhysicalityError",
    "BoundaryStateError",
    "integrate",
    "purity_rate_b",
    "purification_scan",
    "random_control_laws",
    "write_trajectory_csv",
    "write_trajectory_json",
    "atomic_write_text",
]

#: worst constraint violation tolerated before a run is aborted
ABORT_TOL = 1e-6
#: violation level recorded as a warning in the trajectory report
WARN_TOL = 1e-8


class PhysicalityError(RuntimeError):
    """A trajectory state violated the norm constraints beyond tolerance."""

    def __init__(self, t: float, defect: float):
        super().__init__(
            f"state at t={t:.6g} violates physicality bounds by {defect:.3e} "
            f"(limit {ABORT_TOL:.1e}); check the model or reduce the step"
        )
        self.t = t
        self.defect = defect


class BoundaryStateError(ValueError):
    """An operation required a strictly interior (non-singular) state."""


@dataclass(frozen=True, eq=False)
class ControlLaw:
    """Control signal ``u(t)`` or ``u(t, v)`` for the three channels.

    kind is one of ``"piecewise-constant"``, ``"sampled"`` or
    ``"state-feedback"``.  Piecewise-constant laws hold ``values[k]`` on
    ``[times[k], times[k+1])`` with breakpoints snapped to the step
    grid; sampled laws interpolate linearly between samples;
    state-feedback laws call ``callback(t, v)`` with the current
    16-component coherence vector.  If ``bound`` is set, every evaluated
    value must satisfy ``max|u_i| <= bound``.
    """

    kind: str
    times: np.ndarray | None = None
    values: np.ndarray | None = None
    callback: Callable | None = None
    bound: float | None = None

    @classmethod
    def constant(cls, u, bound: float | None = None) -> "ControlLaw":
        values = np.asarray(u, dtype=float).reshape(1, 3)
        return cls.piecewise_constant([0.0], values, bound=bound)

    @classmethod
    def piecewise_constant(cls, times, values, bound: float | None = None) -> "ControlLaw":
        times = np.asarray(times, dtype=float).reshape(-1)
        values = np.asarray(values, dtype=float).reshape(-1, 3)
        if times.shape[0] != values.shape[0]:
            raise ValueError("need one control value per breakpoint")
        if times[0] != 0.0:
            raise ValueError("first breakpoint must be t = 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        law = cls("piecewise-constant", times=times, values=values, bound=bound)
        law._check_bound(values)
        return law

    @classmethod
    def sampled(cls, times, values, bound: float | None = None) -> "ControlLaw":
        times = np.asarray(times, dtype=float).reshape(-1)
        values = np.asarray(values, dtype=float).reshape(-1, 3)
        if times.shape[0] != values.shape[0] or times.shape[0] < 2:
            raise ValueError("sampled law needs matching times/values, at least two")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        law = cls("sampled", times=times, values=values, bound=bound)
        law._check_bound(values)
        return law

    @classmethod
    def feedback(cls, callback: Callable, bound: float | None = None) -> "ControlLaw":
        return cls("state-feedback", callback=callback, bound=bound)

    def _check_bound(self, u: np.ndarray) -> np.ndarray:
        if self.bound is not None:
            worst = float(np.max(np.abs(u)))
            if worst > self.bound + 1e-12:
                raise ValueError(
                    f"control value {worst:.6g} exceeds declared bound {self.bound:.6g}"
                )
        return u

    def __call__(self, t: float, v: np.ndarray | None = None) -> np.ndarray:
        if self.kind == "piecewise-constant":
            k = int(np.searchsorted(self.times, t, side="right") - 1)
            return self.values[max(k, 0)]
        if self.kind == "sampled":
            return self._check_bound(
                np.array([np.interp(t, self.times, self.values[:, i]) for i in range(3)])
            )
        u = np.asarray(self.callback(t, v), dtype=float).reshape(3)
        return self._check_bound(u)

    def describe(self) -> dict:
        info = {"kind": self.kind}
        if self.bound is not None:
            info["bound"] = self.bound
        if self.times is not None:
            info["segments"] = int(self.times.shape[0])
        return info


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time grid, recorded states, control samples and run metadata."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.times.shape[0]

    def state(self, k: int) -> BlochVector:
        return BlochVector.from_array(self.states[k])

    @property
    def purity_full(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.states, self.states)

    @property
    def purity_a(self) -> np.ndarray:
        block = self.states[:, VA]
        return 0.5 + 2.0 * np.einsum("ij,ij->i", block, block)

    @property
    def purity_b(self) -> np.ndarray:
        block = self.states[:, VB]
        return 0.5 + 2.0 * np.einsum("ij,ij->i", block, block)


def _rk4_matrix(m: np.ndarray, h: float) -> np.ndarray:
    """Degree-4 Taylor polynomial of ``exp(hM)``: the RK4 one-step map."""
    a = h * m
    eye = np.eye(m.shape[0])
    return eye + a @ (eye + a @ (eye + a @ (eye + a / 4.0) / 3.0) / 2.0)


def _as_state_array(v0) -> np.ndarray:
    if isinstance(v0, BlochVector):
        return v0.as_array()
    return np.asarray(v0, dtype=float).reshape(16).copy()


def _segment_bounds(law: ControlLaw, n_steps: int, step: float) -> list[tuple[int, int, np.ndarray]]:
    """Breakpoints snapped to the step grid; (start, stop, value) triples."""
    idx = np.round(law.times / step).astype(int)
    idx = np.clip(idx, 0, n_steps)
    segments = []
    for k in range(idx.shape[0]):
        start = idx[k]
        stop = idx[k + 1] if k + 1 < idx.shape[0] else n_steps
        if stop > start:
            segments.append((int(start), int(stop), law.values[k]))
    if not segments:
        segments.append((0, n_steps, law.values[-1]))
    return segments


def integrate(
    model: TwoQubitModel,
    v0,
    law: ControlLaw,
    horizon: float,
    step: float,
    *,
    abort_tol: float = ABORT_TOL,
    warn_tol: float = WARN_TOL,
) -> Trajectory:
    """Integrate the controlled flow from ``v0`` over ``[0, horizon]``.

    Parameters
    ----------
    model : TwoQubitModel
    v0 : BlochVector or (16,) array
        Initial state; must satisfy the norm constraints.
    law : ControlLaw
    horizon, step : float
        ``horizon`` is snapped to the nearest integer number of steps.

    Raises
    ------
    PhysicalityError
        If any recorded state violates the norm constraints by more
        than ``abort_tol``.  Smaller violations (above ``warn_tol``) are
        reported in ``metadata["physicality"]`` without aborting.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if horizon < step:
        raise ValueError("horizon must be at least one step")
    n_steps = int(round(horizon / step))
    times = np.arange(n_steps + 1) * step

    start = _as_state_array(v0)
    start_defect = float(physicality_defect(start))
    if start_defect > abort_tol:
        raise PhysicalityError(0.0, start_defect)

    m0, mc = control_generators(model)
    states = np.empty((n_steps + 1, 16))
    controls = np.empty((n_steps + 1, 3))
    states[0] = start

    if law.kind == "piecewise-constant":
        for seg_start, seg_stop, u in _segment_bounds(law, n_steps, step):
            law._check_bound(u)
            r = _rk4_matrix(m0 + np.einsum("j,jkl->kl", u, mc), step)
            controls[seg_start:seg_stop] = u
            v = states[seg_start]
            for k in range(seg_start, seg_stop):
                v = r @ v
                states[k + 1] = v
        controls[n_steps] = controls[n_steps - 1]
    elif law.kind == "sampled":
        v = start
        for k in range(n_steps):
            t = times[k]
            u1 = law(t)
            u2 = law(t + 0.5 * step)
            u4 = law(t + step)
            m1 = m0 + np.einsum("j,jkl->kl", u1, mc)
            m2 = m0 + np.einsum("j,jkl->kl", u2, mc)
            m4 = m0 + np.einsum("j,jkl->kl", u4, mc)
            k1 = m1 @ v
            k2 = m2 @ (v + 0.5 * step * k1)
            k3 = m2 @ (v + 0.5 * step * k2)
            k4 = m4 @ (v + step * k3)
            controls[k] = u1
            v = v + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            states[k + 1] = v
        controls[n_steps] = law(times[n_steps])
    elif law.kind == "state-feedback":
        v = start

        def rhs(t, y):
            u = law(t, y)
            return (m0 + np.einsum("j,jkl->kl", u, mc)) @ y, u

        for k in range(n_steps):
            t = times[k]
            k1, u1 = rhs(t, v)
            k2, _ = rhs(t + 0.5 * step, v + 0.5 * step * k1)
            k3, _ = rhs(t + 0.5 * step, v + 0.5 * step * k2)
            k4, _ = rhs(t + step, v + step * k3)
            controls[k] = u1
            v = v + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            states[k + 1] = v
        controls[n_steps] = law(times[n_steps], states[n_steps])
    else:
        raise ValueError(f"unknown control-law kind {law.kind!r}")

    defects = np.atleast_1d(physicality_defect(states))
    worst = int(np.argmax(defects))
    report = {
        "max_defect": float(defects[worst]),
        "t_worst": float(times[worst]),
        "within_warn_tol": bool(defects[worst] <= warn_tol),
    }
    if defects[worst] > abort_tol:
        raise PhysicalityError(float(times[worst]), float(defects[worst]))

    metadata = {
        "model_hash": model.hash_hex(),
        "step": float(step),
        "horizon": float(times[-1]),
        "law": law.describe(),
        "physicality": report,
    }
    return Trajectory(times=times, states=states, controls=controls, metadata=metadata)


def purity_rate_b(model: TwoQubitModel, v) -> float:
    """Instantaneous time derivative of ``Tr(rho_B^2)``.

    Equals ``4 (<vB, h_b vB> + <vB, h_ib vAB>)``; the first inner
    product vanishes identically because ``h_b`` is antisymmetric, so
    only the coupling term can change the reduced purity of B.  The
    value does not depend on the control or on the jump operators.
    """
    flat = _as_state_array(v)
    blocks = assemble_blocks(model, np.zeros(3))
    vb = flat[VB]
    return 4.0 * float(vb @ (blocks.h_b @ vb) + vb @ (blocks.h_ib @ flat[4:13]))


def require_interior(v0, *, purity_margin: float = 1e-6, eig_margin: float = 1e-9) -> None:
    """Raise :class:`BoundaryStateError` unless ``v0`` is strictly interior.

    Interior means the reassembled density matrix is strictly positive
    (all eigenvalues above ``eig_margin``), which also implies full
    purity below one; the explicit purity margin guards against states
    numerically glued to the pure-state sphere.
    """
    flat = _as_state_array(v0)
    full_purity = float(flat @ flat)
    if full_purity >= 1.0 - purity_margin:
        raise BoundaryStateError(
            f"initial state has full purity {full_purity:.9f}; "
            "a strictly interior (mixed, non-singular) state is required"
        )
    eigs = np.linalg.eigvalsh(from_coherence(flat))
    if eigs.min() < eig_margin:
        raise BoundaryStateError(
            f"initial state is singular (min eigenvalue {eigs.min():.3e}); "
            "boundary states are excluded from purification scans"
        )


def purification_scan(
    model: TwoQubitModel,
    v0,
    laws,
    horizons,
    step: float,
) -> dict:
    """Record how close ``Tr(rho_B^2)`` gets to one under each control law.

    For every law the flow is integrated once to the largest horizon and
    the running maximum of the reduced purity of B is read off at each
    requested horizon.  The reported margins ``1 - max_t Tr(rho_B^2)``
    are numerical evidence only; no finite sample of control laws can
    prove unreachability.
    """
    horizons = [float(h) for h in np.atleast_1d(horizons)]
    t_max = max(horizons)
    require_interior(v0)
    entries = []
    min_margin = np.inf
    for idx, law in enumerate(laws):
        traj = integrate(model, v0, law, t_max, step)
        running_max = np.maximum.accumulate(traj.purity_b)
        per_horizon = []
        for t_h in horizons:
            k = int(round(t_h / step))
            peak = float(running_max[min(k, len(traj) - 1)])
            margin = 1.0 - peak
            min_margin = min(min_margin, margin)
            per_horizon.append(
                {"horizon": t_h, "max_purity_b": peak, "margin": margin}
            )
        entries.append({"law": idx, "law_info": law.describe(), "per_horizon": per_horizon})
    return {
        "label": "numerical evidence",
        "step": float(step),
        "horizons": horizons,
        "entries": entries,
        "min_margin": float(min_margin),
    }


def random_control_laws(
    rng: np.random.Generator,
    n_laws: int,
    bound: float,
    horizon: float,
    max_segments: int = 8,
) -> list[ControlLaw]:
    """Seeded piecewise-constant laws with values uniform in the bound box."""
    laws = []
    for _ in range(n_laws):
        n_seg = int(rng.integers(1, max_segments + 1))
        cuts = np.sort(rng.uniform(0.0, horizon, n_seg - 1))
        times = np.concatenate([[0.0], cuts])
        times = np.unique(times)
        values = rng.uniform(-bound, bound, (times.shape[0], 3))
        laws.append(ControlLaw.piecewise_constant(times, values, bound=bound))
    return laws


# -- export -----------------------------------------------------------------

_CSV_HEADER = (
    "t,u1,u2,u3,c0,vA1,vA2,vA3,vAB1,vAB2,vAB3,vAB4,vAB5,vAB6,vAB7,vAB8,vAB9,"
    "vB1,vB2,vB3,purity_full,purity_A,purity_B"
)


def _trajectory_table(traj: Trajectory) -> np.ndarray:
    cols = [
        traj.times,
        traj.controls[:, 0],
        traj.controls[:, 1],
        traj.controls[:, 2],
    ]
    cols.extend(traj.states[:, i] for i in range(16))
    cols.extend([traj.purity_full, traj.purity_a, traj.purity_b])
    return np.column_stack(cols)


def atomic_write_text(path, text: str) -> None:
    """Write a file via a temporary sibling and an atomic rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """CSV export with 17-significant-digit decimal fields."""
    table = _trajectory_table(traj)
    lines = [_CSV_HEADER]
    for row in table:
        lines.append(",".join(f"{x:.17g}" for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_trajectory_json(traj: Trajectory, path) -> None:
    """JSON export mirroring the CSV columns, plus run metadata."""
    table = _trajectory_table(traj)
    names = _CSV_HEADER.split(",")
    doc = {
        "columns": {name: table[:, i].tolist() for i, name in enumerate(names)},
        "metadata": traj.metadata,
    }
    atomic_write_text(path, json.dumps(doc) + "\n")
