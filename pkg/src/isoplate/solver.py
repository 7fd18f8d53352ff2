"""Proximal Galerkin iteration for the isometry constraint.

Each outer step solves, for ``(y, mu, gamma)`` with the previous gradient
snapshot ``G`` fixed,

    a_h(y, w) + (mu, grad w) + l_h(G; grad w, gamma) = (f, w) + F_h(w)
    sum_T (Exp_G(tau mu) - grad y, v)_T            = 0
    l_h(G; mu, zeta)                               = 0

by Newton's method, then moves ``G`` along the exponential map of the
tangential part of ``mu``.
"""

from __future__ import annotations

import dataclasses
import logging
import time
import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import forms, stiefel
from .dgspace import DGSpace, FEFunction, M, S, V, flat_deformation

logger = logging.getLogger("isoplate")


class SolverError(RuntimeError):
    pass


class NewtonDiverged(SolverError):
    pass


class SingularJacobian(SolverError):
    pass


class OuterMaxExceeded(SolverError):
    pass


class EnergyIncreaseWarning(RuntimeWarning):
    pass


@dataclasses.dataclass
class SolverConfig:
    tau: float = 2.0
    tol: float = 1e-4
    mu_tol: float = 0.0
    newton_tol: float = 1e-10
    cell_tol: float = 1e-13
    newton_max: int = 50
    outer_max: int = 1000
    tau_backoff: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.mu_tol < 0:
            raise ValueError("mu_tol must be non-negative")
        if not self.newton_tol > 0 or not self.cell_tol > 0 or self.newton_max < 1 or self.outer_max < 1:
            raise ValueError("newton_tol, newton_max and outer_max must be positive")


@dataclasses.dataclass
class DGState:
    y: FEFunction
    mu: FEFunction
    gamma: FEFunction
    G: np.ndarray  # (n, 3, 2), each slice on St(3, 2)
    k: int = 0

    def copy(self) -> "DGState":
        return DGState(self.y.copy(), self.mu.copy(), self.gamma.copy(), self.G.copy(), self.k)


@dataclasses.dataclass
class IterationRecord:
    k: int
    energy: float
    reported_energy: float
    increment: float  # |E_h(y^k) - E_h(y^{k+1})| / tau
    defect: float
    mu_norm: float
    newton_steps: int
    tau: float

    def line(self) -> str:
        return (
            f"k={self.k:4d}  E_h={self.reported_energy: .6e}  dE/tau={self.increment:.3e}  "
            f"D_h={self.defect:.3e}  |mu|={self.mu_norm:.3e}  newton={self.newton_steps}  tau={self.tau:g}"
        )


@dataclasses.dataclass
class IterationLog:
    records: list = dataclasses.field(default_factory=list)
    energy_increases: int = 0

    def append(self, rec: IterationRecord) -> None:
        self.records.append(rec)

    @property
    def outer_iterations(self) -> int:
        return len(self.records)

    @property
    def newton_total(self) -> int:
        return sum(r.newton_steps for r in self.records)

    def __len__(self):
        return len(self.records)


class PlateProblem:
    """Discrete plate problem on a fixed mesh: bending matrix, loads, boundary data.

    ``reported_energy`` adds the data-only constant
    ``(eta0 int h^-3 |y_D|^2 + eta1 int h^-1 |G_D|^2) / 2`` to ``E_h`` so that a
    deformation matching the boundary data exactly with zero bending has zero
    energy. Differences, and hence the stopping rule, are unaffected.
    """

    def __init__(self, space: DGSpace, f, params: forms.PenaltyParams, data: forms.BoundaryData, *, _shared=None):
        self.space = space
        self.f = f
        self.params = params
        self.data = data
        if _shared is None:
            _shared = {
                "A": forms.assemble_a_h(space, params),
                "C": forms.assemble_coupling(space),
                "load": forms.assemble_load(space, f),
            }
        self._shared = _shared
        self.A = _shared["A"]
        self.C = _shared["C"]
        self.load = _shared["load"]
        self.F = forms.assemble_F_h(space, params, data)
        self.b = self.load + self.F
        self.offset = 0.5 * forms.boundary_data_offset(space, params, data)

    @property
    def dofmap(self):
        return self.space.dofmap

    def with_data(self, data: forms.BoundaryData) -> "PlateProblem":
        return PlateProblem(self.space, self.f, self.params, data, _shared=self._shared)

    def energy(self, y: FEFunction) -> float:
        c = y.coefficients
        return float(0.5 * c @ (self.A @ c) - self.b @ c)

    def reported_energy(self, y: FEFunction) -> float:
        return self.energy(y) + self.offset

    def residual(self, G, tau, y: FEFunction, mu: FEFunction, gamma: FEFunction, L1, L2) -> np.ndarray:
        r_y = self.A @ y.coefficients + self.C @ mu.coefficients + L1 @ gamma.coefficients - self.b
        r_mu = forms.exp_block_residual(self.space, G, mu, y, tau)
        r_g = L2 @ mu.coefficients
        return np.concatenate([r_y, r_mu, r_g])

    def jacobian(self, G, tau, mu: FEFunction, L1, L2) -> sp.csc_matrix:
        Jexp = forms.exp_block_jacobian(self.space, G, mu, tau)
        return sp.bmat([[self.A, self.C, L1], [-self.C.T, Jexp, None], [None, L2, None]], format="csc")


def initial_state(space: DGSpace, y0=None, G0=None) -> DGState:
    """Start from ``y0`` (default: the flat map) with ``G0 = grad y0`` at barycenters."""
    y = space.interpolate(V, flat_deformation if y0 is None else y0) if not isinstance(y0, FEFunction) else y0.copy()
    G = space.grad_at_barycenters(y) if G0 is None else np.array(G0, dtype=float)
    forms.validate_stiefel_field(G)
    return DGState(y, space.zero(M), space.zero(S), G, 0)


def _rounding_floor(problem: PlateProblem, y: FEFunction) -> float:
    # attainable 2-norm of the linear y-equation residual in double precision
    absA = abs(problem.A)
    scale = absA @ np.abs(y.coefficients) + np.abs(problem.b)
    return 4 * np.finfo(float).eps * float(np.linalg.norm(scale))


def newton_step_problem(problem: PlateProblem, state: DGState, config: SolverConfig, tau: float | None = None,
                        warm_gamma: bool = False):
    """Solve one proximal subproblem by Newton's method from ``(y^k, 0, 0)``
    (or ``(y^k, 0, gamma^k)`` with ``warm_gamma``).

    Returns ``(new_state, newton_steps, residual_history)``. The returned state
    still carries the old ``G``; call :func:`g_update` afterwards.

    Convergence needs all three blocks: the linear y-equation residual below
    ``newton_tol`` or at its rounding floor, the gamma-equation residual below
    ``newton_tol``, and the per-cell mismatch ``|Exp_G(tau mu) - grad y(x_T)|``
    below ``cell_tol``. The last one is what keeps ``D_h`` at rounding level.
    """
    tau = config.tau if tau is None else tau
    space = problem.space
    dm = space.dofmap
    G = state.G
    L1, L2 = forms.assemble_l_h_blocks(space, G)
    y, mu = state.y.copy(), space.zero(M)
    gamma = state.gamma.copy() if warm_gamma else space.zero(S)

    def unpack(x):
        a, b, c = dm.split(x)
        return FEFunction(V, a), FEFunction(M, b), FEFunction(S, c)

    x = np.concatenate([y.coefficients, mu.coefficients, gamma.coefficients])
    R = problem.residual(G, tau, y, mu, gamma, L1, L2)
    history = [float(np.linalg.norm(R))]
    steps = 0

    areas = space.geometry.areas
    ny, nm = dm.n_y, dm.n_mu

    def converged(R, y):
        if np.linalg.norm(R[ny + nm :]) > config.newton_tol:
            return False
        mismatch = np.abs(R[ny : ny + nm].reshape(-1, 6)).max(axis=1) / areas
        if mismatch.max(initial=0.0) > config.cell_tol:
            return False
        ry = np.linalg.norm(R[:ny])
        return ry <= config.newton_tol or ry <= _rounding_floor(problem, y)

    while not converged(R, y):
        if steps >= config.newton_max:
            raise NewtonDiverged(f"no convergence after {steps} Newton steps; residual history {history}")
        J = problem.jacobian(G, tau, mu, L1, L2)
        try:
            lu = spla.splu(J, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularJacobian(f"factorization failed at Newton step {steps}: {exc}") from exc
        dx = -lu.solve(R)
        if not np.all(np.isfinite(dx)):
            raise SingularJacobian(f"non-finite Newton update at step {steps}")
        steps += 1
        r0 = np.linalg.norm(R)
        alpha = 1.0
        while True:
            xt = x + alpha * dx
            yt, mut, gt = unpack(xt)
            Rt = problem.residual(G, tau, yt, mut, gt, L1, L2)
            rt = np.linalg.norm(Rt)
            # the first step from (y^k, 0, 0) mostly fixes the linear blocks; accept it
            if rt < r0 or steps == 1 or converged(Rt, yt):
                break
            alpha *= 0.5
            if alpha < 2.0**-10:
                raise NewtonDiverged(f"line search stalled at Newton step {steps}; residual history {history}")
        x, R = xt, Rt
        y, mu, gamma = yt, mut, gt
        history.append(float(rt))
        logger.debug("newton %d: |R| = %.3e (alpha %g)", steps, rt, alpha)

    y, mu, gamma = unpack(x)
    new = DGState(FEFunction(V, y.coefficients.copy()), FEFunction(M, mu.coefficients.copy()),
                  FEFunction(S, gamma.coefficients.copy()), G, state.k + 1)
    return new, steps, history


def g_update(state: DGState, tau: float) -> np.ndarray:
    """``G'(x_T) = Exp_G(tau * Pi_G mu)`` per cell, validated on St(3, 2)."""
    G = state.G
    W = stiefel.batch_tangent_project(G, state.mu.cellwise())
    Gn = stiefel.batch_exp_map(G, W, tau)
    forms.validate_stiefel_field(Gn)
    return Gn


def proximal_loop(problem: PlateProblem, state: DGState, config: SolverConfig, log: IterationLog | None = None,
                  on_iteration=None):
    """Run the outer proximal Galerkin iteration to the energy-increment stopping rule.

    Stops when ``|E_h(y^k) - E_h(y^{k+1})| / tau < tol`` or, if ``mu_tol > 0``,
    when ``||mu||_{L2} < mu_tol``. An energy increase triggers a warning (and,
    with ``tau_backoff``, one retry with half the step).
    """
    log = IterationLog() if log is None else log
    space = problem.space
    tau = config.tau
    E_prev = problem.energy(state.y)
    for _ in range(config.outer_max):
        new, steps, _ = newton_step_problem(problem, state, config, tau)
        E_new = problem.energy(new.y)
        if E_new > E_prev and config.tau_backoff:
            retry, rsteps, _ = newton_step_problem(problem, state, config, 0.5 * tau)
            steps += rsteps
            E_retry = problem.energy(retry.y)
            if E_retry <= E_prev:
                tau *= 0.5
                new, E_new = retry, E_retry
                logger.info("energy increase; tau halved to %g", tau)
        if E_new > E_prev:
            log.energy_increases += 1
            warnings.warn(f"E_h increased by {E_new - E_prev:.3e} at outer step {new.k}", EnergyIncreaseWarning,
                          stacklevel=2)
        new.G = g_update(new, tau)
        mu_norm = forms.l2_norm_p0(space, new.mu)
        inc = abs(E_prev - E_new) / tau
        rec = IterationRecord(new.k, E_new, E_new + problem.offset, inc, forms.isometry_defect(space, new.y),
                              mu_norm, steps, tau)
        log.append(rec)
        logger.info(rec.line())
        if on_iteration is not None:
            on_iteration(new, rec)
        state = new
        E_prev = E_new
        if inc < config.tol or (config.mu_tol > 0 and mu_norm < config.mu_tol):
            return state, log
    raise OuterMaxExceeded(f"stopping rule not met after {config.outer_max} outer iterations")


@dataclasses.dataclass
class Snapshot:
    t: float
    state: DGState
    problem: PlateProblem
    outer_iterations: int
    newton_steps: int


def continuation_drive(problem: PlateProblem, state: DGState, config: SolverConfig, data_at, delta_t: float,
                       snapshot_times=(), on_step=None):
    """Ramp the boundary data over pseudo-time ``t`` in steps of ``delta_t`` up to 1.

    ``data_at(t)`` returns the :class:`~isoplate.forms.BoundaryData` for load
    level ``t``. Every step runs :func:`proximal_loop` warm-started from the
    previous one. Returns the snapshots at ``snapshot_times`` (plus ``t = 0``
    if requested) and the final state.
    """
    n_steps = int(round(1.0 / delta_t))
    if n_steps < 1 or abs(n_steps * delta_t - 1.0) > 1e-9:
        raise ValueError("delta_t must divide 1")
    wanted = {round(float(t), 9) for t in snapshot_times}
    snaps = []
    if 0.0 in wanted:
        snaps.append(Snapshot(0.0, state.copy(), problem.with_data(data_at(0.0)), 0, 0))
    for j in range(1, n_steps + 1):
        t = j * delta_t
        prob_t = problem.with_data(data_at(t))
        t0 = time.perf_counter()
        try:
            state, log = proximal_loop(prob_t, state, config)
        except SolverError as exc:
            raise SolverError(f"load step t={t:.6g} failed: {exc}") from exc
        logger.info("t=%.4f  outer=%d  newton=%d  D_h=%.2e  (%.1fs)", t, log.outer_iterations, log.newton_total,
                    log.records[-1].defect, time.perf_counter() - t0)
        if on_step is not None:
            on_step(t, state, log)
        if round(t, 9) in wanted:
            snaps.append(Snapshot(t, state.copy(), prob_t, log.outer_iterations, log.newton_total))
    return snaps, state
