"""Density-based inverse design of planar dielectric layouts.

A rectangular design region is parameterized by a per-cell density in
[0, 1].  The density is smoothed by a normalized conic filter, pushed
toward binary by a tanh projection with a sharpness that is stepped up
during the run, and mapped linearly onto permittivity between the
cladding and core values.  The figure of merit rewards matching a set of
modal power goals at monitor ports under one or more excitation
conditions; its gradient comes from one adjoint solve per condition,
reusing the forward factorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import Diverged, SolverFailure
from .solver import (FieldSolver, PortSpec, SimulationGrid, mode_overlap,
                     mode_source, monitor_lines, solve_with_cache)

# projection sharpness ladder; each value holds for a quarter of the run
BETA_SCHEDULE = (1.0, 4.0, 16.0, 64.0)


def project(rho, beta, eta=0.5):
    """Smoothed threshold of a density field, exact at 0 and 1."""
    rho = np.asarray(rho)
    num = np.tanh(beta * eta) + np.tanh(beta * (rho - eta))
    den = np.tanh(beta * eta) + np.tanh(beta * (1.0 - eta))
    return num / den


def project_derivative(rho, beta, eta=0.5):
    rho = np.asarray(rho)
    den = np.tanh(beta * eta) + np.tanh(beta * (1.0 - eta))
    return beta * (1.0 - np.tanh(beta * (rho - eta)) ** 2) / den


def conic_filter_ops(shape, radius, dx):
    """Forward and transpose of a normalized conic smoothing filter.

    The kernel weight falls linearly from the center to zero at the given
    radius (in nm).  Normalization by the local kernel mass keeps constant
    fields exactly constant, including at the region edges.
    """
    cells = radius / dx
    n = int(math.floor(cells))
    if n < 1:
        return (lambda x: np.asarray(x, dtype=float).copy(),) * 2
    offs = np.arange(-n, n + 1)
    rr = np.hypot(offs[:, None], offs[None, :])
    kernel = np.maximum(0.0, 1.0 - rr / cells)
    norm = fftconvolve(np.ones(shape), kernel, mode="same")

    def forward(x):
        return fftconvolve(x, kernel, mode="same") / norm

    def backward(g):
        return fftconvolve(g / norm, kernel, mode="same")

    return forward, backward


@dataclass(frozen=True)
class PowerTarget:
    """Desired modal power fraction at a monitor port."""

    port: PortSpec
    goal: float
    weight: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.goal <= 1.0):
            raise ValueError("goal must be a power fraction in [0, 1]")
        if self.weight < 0.0:
            raise ValueError("weight must be non-negative")


@dataclass(frozen=True)
class ExcitationCondition:
    """One source excitation with its set of power goals."""

    name: str
    source: PortSpec
    targets: tuple[PowerTarget, ...]
    wavelength: float
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if not self.targets:
            raise ValueError("condition needs at least one target")
        if self.source.role != "source":
            raise ValueError("condition source port must have role 'source'")
        if self.wavelength <= 0.0:
            raise ValueError("wavelength must be positive")


class DesignProblem:
    """Geometry, excitations and goals for one inverse-design run.

    base_eps is the full-domain permittivity with the feed and output
    waveguides drawn in; region = (x0, x1, y0, y1) bounds the block that
    the density controls.  Injected power for each condition is measured
    once on a reference layout in which the source's own cross-section
    continues straight through the domain.
    """

    def __init__(self, base_eps, dx, region, eps_lo, eps_hi, conditions,
                 filter_radius=120.0, grid_kwargs=None):
        self.base_eps = np.array(base_eps, dtype=float)
        self.dx = float(dx)
        x0, x1, y0, y1 = (int(v) for v in region)
        nx, ny = self.base_eps.shape
        if not (0 <= x0 < x1 <= nx and 0 <= y0 < y1 <= ny):
            raise ValueError("design region out of bounds")
        self.region = (x0, x1, y0, y1)
        self.eps_lo = float(eps_lo)
        self.eps_hi = float(eps_hi)
        if self.eps_lo <= 0.0 or self.eps_hi <= self.eps_lo:
            raise ValueError("need 0 < eps_lo < eps_hi")
        self.conditions = list(conditions)
        if not self.conditions:
            raise ValueError("need at least one excitation condition")
        self.filter_radius = float(filter_radius)
        self.design_shape = (x1 - x0, y1 - y0)
        self._filter_fwd, self._filter_bwd = conic_filter_ops(
            self.design_shape, self.filter_radius, self.dx)
        self._grid_kwargs = dict(grid_kwargs or {})
        self._p_inj = {}

    def _grid(self, eps):
        return SimulationGrid(eps_r=eps, dx=self.dx, **self._grid_kwargs)

    def density_to_eps(self, rho, beta):
        """Full-domain permittivity for a raw density field."""
        rho_f = self._filter_fwd(np.asarray(rho, dtype=float))
        rho_p = project(rho_f, beta)
        return self._assemble_eps(rho_p), rho_f, rho_p

    def _assemble_eps(self, level):
        x0, x1, y0, y1 = self.region
        eps = self.base_eps.copy()
        eps[x0:x1, y0:y1] = self.eps_lo + level * (self.eps_hi - self.eps_lo)
        return eps

    def injected_power(self, source, wavelength):
        """Modal power launched by a source, from a straight-guide run."""
        key = (source.name, source.x_index, float(wavelength))
        if key in self._p_inj:
            return self._p_inj[key]
        ref_eps = np.tile(self.base_eps[source.x_index, :],
                          (self.base_eps.shape[0], 1))
        grid = self._grid(ref_eps)
        fld = solve_with_cache(grid, wavelength,
                               mode_source(grid, source, wavelength))
        mon = PortSpec("_inj", source.x_index + 8 * source.direction,
                       source.y_start, source.y_stop, source.direction)
        p = abs(mode_overlap(fld, mon)) ** 2
        if not p > 0.0:
            raise SolverFailure("source injects no measurable power")
        self._p_inj[key] = p
        return p

    def _forward(self, eps, wavelength_override=None):
        """Solve every condition on one layout; share factorizations."""
        solvers = {}
        out = []
        for cond in self.conditions:
            wl = (cond.wavelength if wavelength_override is None
                  else float(wavelength_override))
            if wl not in solvers:
                solvers[wl] = FieldSolver(self._grid(eps), wl)
            solver = solvers[wl]
            fld = solver.solve(mode_source(solver.grid, cond.source, wl))
            p_inj = self.injected_power(cond.source, wl)
            amps = [mode_overlap(fld, t.port) for t in cond.targets]
            powers = [abs(a) ** 2 / p_inj for a in amps]
            out.append((cond, solver, fld, amps, powers, p_inj))
        return out

    @staticmethod
    def _score(cond, powers):
        return 1.0 - sum(t.weight * (p - t.goal) ** 2
                         for t, p in zip(cond.targets, powers))

    def objective(self, rho, beta):
        """Figure of merit only; one forward solve per condition."""
        eps, _, _ = self.density_to_eps(rho, beta)
        runs = self._forward(eps)
        return sum(cond.weight * self._score(cond, powers)
                   for cond, _, _, _, powers, _ in runs)

    def objective_and_gradient(self, rho, beta, return_details=False):
        """Figure of merit and its gradient w.r.t. the raw density.

        Adds exactly one adjoint solve per condition on top of the forward
        pass; the adjoint right-hand side combines all targets of a
        condition so the count does not grow with the number of goals.
        """
        eps, rho_f, _ = self.density_to_eps(rho, beta)
        x0, x1, y0, y1 = self.region
        total = 0.0
        grad_eps = np.zeros(self.design_shape)
        powers_out = {}
        for cond, solver, fld, amps, powers, p_inj in self._forward(eps):
            total += cond.weight * self._score(cond, powers)
            rhs_adj = np.zeros(self.base_eps.shape, dtype=complex)
            for tgt, a, p in zip(cond.targets, amps, powers):
                scale = (4.0 * cond.weight * tgt.weight * (p - tgt.goal)
                         / p_inj) * np.conj(a)
                cols, lines = monitor_lines(solver.grid, tgt.port,
                                            solver.wavelength)
                for x, line in zip(cols, lines):
                    rhs_adj[x, tgt.port.y_start:tgt.port.y_stop] += (
                        scale * line)
                powers_out[f"{cond.name}:{tgt.port.name}"] = p
            adj = solver.solve(rhs_adj)
            grad_eps += np.real(
                solver.diag_scale[x0:x1, y0:y1]
                * fld.values[x0:x1, y0:y1]
                * adj.values[x0:x1, y0:y1])
        g_filtered = grad_eps * (self.eps_hi - self.eps_lo) \
            * project_derivative(rho_f, beta)
        grad = self._filter_bwd(g_filtered)
        if return_details:
            return total, grad, {"powers": powers_out}
        return total, grad

    def evaluate_pattern(self, level, wavelength=None):
        """Score a density level map directly, skipping filter/projection.

        Meant for binarized or externally produced patterns; level is
        interpreted as the fraction of the core/cladding contrast.
        """
        runs = self._forward(self._assemble_eps(np.asarray(level, float)),
                             wavelength_override=wavelength)
        powers = {}
        total = 0.0
        for cond, _, _, _, pw, _ in runs:
            total += cond.weight * self._score(cond, pw)
            for tgt, p in zip(cond.targets, pw):
                powers[f"{cond.name}:{tgt.port.name}"] = p
        return total, powers


@dataclass
class OptimizeResult:
    rho: np.ndarray
    rho_binary: np.ndarray
    history: list
    objective: float
    binary_objective: float
    binary_powers: dict
    seed: int


def optimize(problem: DesignProblem, iterations: int, seed: int,
             lr=0.05, beta_schedule=BETA_SCHEDULE):
    """Gradient-ascent run with moment smoothing and beta continuation.

    The density starts flat at 0.5 and every step is deterministic, so a
    given (problem, iterations, seed) triple reproduces bit-identical
    trajectories.  The seed is recorded in the result for provenance and
    reserved for stochastic variants.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rho = np.full(problem.design_shape, 0.5)
    m = np.zeros_like(rho)
    v = np.zeros_like(rho)
    b1, b2, tiny = 0.9, 0.999, 1e-8
    quarter = max(1, math.ceil(iterations / len(beta_schedule)))
    history = []
    beta = beta_schedule[0]
    fom = -np.inf
    for it in range(iterations):
        beta = beta_schedule[min(it // quarter, len(beta_schedule) - 1)]
        fom, grad, det = problem.objective_and_gradient(
            rho, beta, return_details=True)
        if not (np.isfinite(fom) and np.all(np.isfinite(grad))):
            raise Diverged(f"non-finite objective or gradient at step {it}")
        history.append({"iteration": it, "objective": fom, "beta": beta,
                        **det["powers"]})
        m = b1 * m + (1.0 - b1) * grad
        v = b2 * v + (1.0 - b2) * grad ** 2
        mh = m / (1.0 - b1 ** (it + 1))
        vh = v / (1.0 - b2 ** (it + 1))
        rho = np.clip(rho + lr * mh / (np.sqrt(vh) + tiny), 0.0, 1.0)

    _, _, rho_p = problem.density_to_eps(rho, beta)
    rho_binary = (rho_p >= 0.5).astype(float)
    binary_objective, binary_powers = problem.evaluate_pattern(rho_binary)
    return OptimizeResult(rho=rho, rho_binary=rho_binary, history=history,
                          objective=fom, binary_objective=binary_objective,
                          binary_powers=binary_powers, seed=int(seed))
