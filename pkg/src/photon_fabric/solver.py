"""Scalar frequency-domain solver on a uniform 2D grid.

Solves the out-of-plane component of the electric field for 2D dielectric
layouts,

    d/dx(1/sx d/dx e) / sx + d/dy(1/sy d/dy e) / sy + k0^2 eps e = j,

where sx, sy are stretched-coordinate absorbing-layer factors.  The
discrete operator is assembled in symmetrized form (multiplied through by
sx*sy and dx^2), which keeps the matrix complex-symmetric: reciprocity
holds to solver precision and the same factorization serves forward and
adjoint solves.

Conventions: arrays are indexed [ix, iy], x is the propagation axis,
lengths are in nanometers, fields are dimensionless up to an arbitrary
linear normalization.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import SolverFailure
from .modes import ModeProfile, slab_modes

CACHE_ENV_VAR = "PHOTON_FABRIC_CACHE"

# Incremented on every sparse triangular solve; lets optimization tests pin
# the exact number of field solves per iteration.
_solve_count = 0


def reset_solve_count() -> None:
    global _solve_count
    _solve_count = 0


def get_solve_count() -> int:
    return _solve_count


@dataclass(frozen=True)
class SimulationGrid:
    """Uniform square-cell permittivity map with absorbing boundaries.

    eps_r:       relative permittivity, shape (nx, ny)
    dx:          cell pitch in nm (same in x and y)
    pml_cells:   absorbing-layer thickness per side, in cells
    pml_order:   polynomial grading order of the layer conductivity
    pml_reflection: target round-trip power reflectivity used to derive the
                 peak conductivity when pml_sigma_max is None
    """

    eps_r: np.ndarray
    dx: float
    pml_cells: int = 15
    pml_order: int = 3
    pml_reflection: float = 1.0e-4
    pml_sigma_max: float | None = None

    def __post_init__(self):
        eps = np.asarray(self.eps_r, dtype=float)
        if eps.ndim != 2:
            raise ValueError("eps_r must be 2D")
        if not np.all(np.isfinite(eps)) or np.any(eps <= 0.0):
            raise ValueError("eps_r must be finite and positive")
        if self.dx <= 0.0:
            raise ValueError("dx must be positive")
        if 2 * self.pml_cells >= min(eps.shape):
            raise ValueError("grid smaller than twice the absorber thickness")
        object.__setattr__(self, "eps_r", eps)

    @property
    def shape(self) -> tuple[int, int]:
        return self.eps_r.shape

    def with_eps(self, eps_r: np.ndarray) -> "SimulationGrid":
        return replace(self, eps_r=eps_r)

    def sigma_max(self, wavelength: float) -> float:
        if self.pml_sigma_max is not None:
            return self.pml_sigma_max
        k0 = 2.0 * np.pi / wavelength
        depth = self.pml_cells * self.dx
        return ((self.pml_order + 1.0) * np.log(1.0 / self.pml_reflection)
                / (4.0 * k0 * depth))


@dataclass(frozen=True)
class ComplexField:
    """Solution field on a grid, shape (nx, ny), complex."""

    values: np.ndarray
    grid: SimulationGrid
    wavelength: float


@dataclass(frozen=True)
class PortSpec:
    """A mode port on a vertical cut of the grid.

    The cut runs along y at column x_index, covering cells
    [y_start, y_stop).  direction +1 launches (or faces) toward +x,
    -1 toward -x.  weight is a linear amplitude factor for sources and a
    dimensionless objective weight for targets; phase is applied to
    sources only.
    """

    name: str
    x_index: int
    y_start: int
    y_stop: int
    direction: int
    role: str = "monitor"
    mode_index: int = 0
    phase: float = 0.0
    weight: float = 1.0

    def __post_init__(self):
        if self.direction not in (-1, 1):
            raise ValueError("direction must be +1 or -1")
        if self.role not in ("source", "monitor"):
            raise ValueError("role must be 'source' or 'monitor'")
        if self.weight < 0.0:
            raise ValueError("weight must be non-negative")
        if self.y_stop - self.y_start < 3:
            raise ValueError("cut must span at least 3 cells")


def _stretch_profiles(n: int, grid: SimulationGrid, wavelength: float):
    """Complex stretch factors at cell centers and at interior half-cells."""
    dx = grid.dx
    npml = grid.pml_cells
    depth = npml * dx
    smax = grid.sigma_max(wavelength)

    def sigma(x):
        d = np.maximum(0.0, np.maximum(depth - x, x - (n * dx - depth)))
        return smax * (d / depth) ** grid.pml_order

    x_c = (np.arange(n) + 0.5) * dx
    x_h = np.arange(1, n) * dx
    # sigma is normalized by k0 (folded into sigma_max) so the stretch
    # factors are dimensionless
    s_c = 1.0 + 1j * sigma(x_c)
    s_h = 1.0 + 1j * sigma(x_h)
    return s_c, s_h


def assemble_operator(grid: SimulationGrid, wavelength: float):
    """Return (A, diag_scale) for the symmetrized dx^2-scaled operator.

    diag_scale[i, j] = (k0*dx)^2 * sx[i] * sy[j] is the diagonal derivative
    dA/d(eps[i, j]) needed by adjoint gradients.
    """
    nx, ny = grid.shape
    dx = grid.dx
    k0 = 2.0 * np.pi / wavelength

    sx_c, sx_h = _stretch_profiles(nx, grid, wavelength)
    sy_c, sy_h = _stretch_profiles(ny, grid, wavelength)

    # bond conductances of the symmetrized stencil
    gx = sy_c[None, :] / sx_h[:, None]          # (nx-1, ny)
    gy = sx_c[:, None] / sy_h[None, :]          # (nx, ny-1)
    sxsy = sx_c[:, None] * sy_c[None, :]        # (nx, ny)

    diag_scale = (k0 * dx) ** 2 * sxsy
    diag = diag_scale * grid.eps_r
    diag = diag.astype(complex)
    diag[:-1, :] -= gx
    diag[1:, :] -= gx
    diag[:, :-1] -= gy
    diag[:, 1:] -= gy

    def flat(i, j):
        return i * ny + j

    n = nx * ny
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    rows = [flat(ii, jj).ravel()]
    cols = [flat(ii, jj).ravel()]
    vals = [diag.ravel()]

    ix, jx = np.meshgrid(np.arange(nx - 1), np.arange(ny), indexing="ij")
    rows += [flat(ix, jx).ravel(), flat(ix + 1, jx).ravel()]
    cols += [flat(ix + 1, jx).ravel(), flat(ix, jx).ravel()]
    vals += [gx.ravel(), gx.ravel()]

    iy, jy = np.meshgrid(np.arange(nx), np.arange(ny - 1), indexing="ij")
    rows += [flat(iy, jy).ravel(), flat(iy, jy + 1).ravel()]
    cols += [flat(iy, jy + 1).ravel(), flat(iy, jy).ravel()]
    vals += [gy.ravel(), gy.ravel()]

    A = sp.coo_matrix(
        (np.concatenate(vals),
         (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsc()
    return A, diag_scale


class FieldSolver:
    """Factorized operator for one (grid, wavelength) pair.

    The LU factors are reused across any number of right-hand sides, which
    is what makes forward plus adjoint solves cheap within an optimization
    iteration.
    """

    def __init__(self, grid: SimulationGrid, wavelength: float):
        self.grid = grid
        self.wavelength = float(wavelength)
        A, diag_scale = assemble_operator(grid, wavelength)
        self.diag_scale = diag_scale
        try:
            self._lu = splu(A)
        except Exception as exc:  # RuntimeError from SuperLU
            raise SolverFailure(f"factorization failed: {exc}") from exc

    def solve(self, rhs: np.ndarray) -> ComplexField:
        global _solve_count
        nx, ny = self.grid.shape
        if rhs.shape != (nx, ny):
            raise ValueError("rhs shape does not match grid")
        x = self._lu.solve(rhs.astype(complex).ravel())
        _solve_count += 1
        if not np.all(np.isfinite(x)):
            raise SolverFailure("solve produced non-finite values")
        return ComplexField(values=x.reshape(nx, ny), grid=self.grid,
                            wavelength=self.wavelength)


def port_mode(grid: SimulationGrid, port: PortSpec,
              wavelength: float) -> ModeProfile:
    """Guided mode of the index cut under a port."""
    eps_line = grid.eps_r[port.x_index, port.y_start:port.y_stop]
    return slab_modes(eps_line, grid.dx, wavelength,
                      n_modes=port.mode_index + 1)[port.mode_index]


def _discrete_beta(n_eff: float, wavelength: float, dx: float) -> float:
    """Propagation constant of the discrete lead, per cell of size dx."""
    beta_c = 2.0 * np.pi * n_eff / wavelength
    s = beta_c * dx / 2.0
    if s >= 1.0:
        return beta_c
    return 2.0 / dx * np.arcsin(s)


def mode_source(grid: SimulationGrid, port: PortSpec, wavelength: float,
                mode: ModeProfile | None = None) -> np.ndarray:
    """Two-line directional current source injecting a guided mode.

    A second source line one cell behind the port, phase-advanced by the
    discrete propagation constant, cancels the backward-launched half so
    monitors behind the source see reflections only.
    """
    if mode is None:
        mode = port_mode(grid, port, wavelength)
    nx, ny = grid.shape
    rhs = np.zeros((nx, ny), dtype=complex)
    amp = port.weight * np.exp(1j * port.phase)
    beta = _discrete_beta(mode.n_eff, wavelength, grid.dx)
    x0 = port.x_index
    x1 = x0 - port.direction
    if not (0 <= x1 < nx):
        raise ValueError("port too close to the grid edge for its direction")
    line = amp * mode.amplitude
    rhs[x0, port.y_start:port.y_stop] += line
    rhs[x1, port.y_start:port.y_stop] -= line * np.exp(1j * beta * grid.dx)
    return rhs


def monitor_lines(grid: SimulationGrid, port: PortSpec, wavelength: float,
                  mode: ModeProfile | None = None):
    """Direction-resolved overlap stencil for a port.

    Returns (columns, line_vectors) such that the modal amplitude of the
    wave travelling in the port direction is
    sum_k line_vectors[k] . field[columns[k], y_start:y_stop].  Sampling
    the cut at two adjacent columns separates the forward from the
    backward wave; the two-line form also mirrors the source stencil,
    which makes transmission measurements exactly reciprocal.
    """
    if mode is None:
        mode = port_mode(grid, port, wavelength)
    beta = _discrete_beta(mode.n_eff, wavelength, grid.dx)
    x0 = port.x_index
    x1 = x0 + port.direction
    nx = grid.shape[0]
    if not (0 <= x1 < nx):
        raise ValueError("port too close to the grid edge for its direction")
    phase = np.exp(1j * beta * grid.dx)
    denom = phase - np.conj(phase)  # 2i sin(beta dx)
    base = mode.amplitude * mode.dy
    return (x0, x1), (-np.conj(phase) / denom * base, base / denom)


def mode_overlap(fld: ComplexField, port: PortSpec,
                 mode: ModeProfile | None = None) -> complex:
    """Complex modal amplitude of the wave entering a port.

    The mode is normalized so that overlapping the mode field with itself
    returns 1; |overlap|^2 is the modal power in the port normalization.
    Only the component travelling in the port direction is measured.
    """
    if mode is None:
        mode = port_mode(fld.grid, port, fld.wavelength)
    cols, lines = monitor_lines(fld.grid, port, fld.wavelength, mode)
    amp = 0.0 + 0.0j
    for x, line in zip(cols, lines):
        amp += np.sum(line * fld.values[x, port.y_start:port.y_stop])
    return complex(amp)


def _cache_key(grid: SimulationGrid, wavelength: float,
               rhs: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(grid.eps_r).tobytes())
    h.update(np.float64([grid.dx, wavelength, grid.pml_cells,
                         grid.pml_order, grid.pml_reflection,
                         grid.sigma_max(wavelength)]).tobytes())
    h.update(np.ascontiguousarray(rhs).tobytes())
    return h.hexdigest()


def solve_with_cache(grid: SimulationGrid, wavelength: float,
                     rhs: np.ndarray,
                     solver: FieldSolver | None = None) -> ComplexField:
    """Solve one right-hand side, consulting the on-disk field cache.

    The cache directory is taken from the environment variable named by
    CACHE_ENV_VAR; when unset the call is a plain solve.
    """
    cache_dir = os.environ.get(CACHE_ENV_VAR)
    key = None
    if cache_dir:
        key = _cache_key(grid, wavelength, rhs)
        path = os.path.join(cache_dir, key + ".npz")
        if os.path.exists(path):
            values = np.load(path)["field"]
            return ComplexField(values=values, grid=grid,
                                wavelength=wavelength)
    if solver is None:
        solver = FieldSolver(grid, wavelength)
    fld = solver.solve(rhs)
    if cache_dir and key is not None:
        os.makedirs(cache_dir, exist_ok=True)
        # savez appends .npz itself; keep the suffix so the rename source
        # matches what was written
        tmp = os.path.join(cache_dir, f".{key}.{os.getpid()}.tmp.npz")
        np.savez_compressed(tmp, field=fld.values)
        os.replace(tmp, os.path.join(cache_dir, key + ".npz"))
    return fld
