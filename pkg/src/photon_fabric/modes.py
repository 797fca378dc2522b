"""Guided modes of 1D index cuts.

The 2D solver treats the out-of-plane electric field as a scalar, so a
waveguide port is characterized by the guided TE modes of the permittivity
profile sampled along a transverse line cut.  Modes are eigenvectors of the
1D Helmholtz operator

    m'' + k0^2 eps(y) m = beta^2 m

discretized with second-order central differences and zero boundary values.
All lengths are in nanometers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NoGuidedMode

# margin (in units of k0^2) separating guided eigenvalues from the
# radiation continuum at the cut edges
_GUIDED_MARGIN = 1e-9


@dataclass(frozen=True)
class ModeProfile:
    """A single guided mode on a transverse cut.

    amplitude is real, sign-fixed (largest-magnitude sample positive) and
    normalized so that sum(|m|^2) * dy == 1.  n_eff is the modal effective
    index beta / k0.
    """

    amplitude: np.ndarray
    n_eff: float
    wavelength: float
    dy: float
    mode_index: int


def slab_modes(eps_line: np.ndarray, dy: float, wavelength: float,
               n_modes: int = 1) -> list[ModeProfile]:
    """Solve for the n_modes strongest-confined guided modes of a cut.

    Only eigenvectors whose effective index satisfies
    n_eff^2 > eps at both cut endpoints are considered guided; anything
    else belongs to the (discretized) radiation continuum.  Raises
    NoGuidedMode when fewer than n_modes guided solutions exist.
    """
    eps_line = np.asarray(eps_line, dtype=float)
    if eps_line.ndim != 1 or eps_line.size < 3:
        raise ValueError("eps_line must be a 1D array with at least 3 samples")
    n = eps_line.size
    k0 = 2.0 * np.pi / wavelength
    inv_dy2 = 1.0 / (dy * dy)

    diag = -2.0 * inv_dy2 + k0 * k0 * eps_line
    off = np.full(n - 1, inv_dy2)
    vals, vecs = eigh_tridiagonal(diag, off)

    # guided modes sit above the larger edge permittivity
    eps_edge = max(eps_line[0], eps_line[-1])
    cutoff = k0 * k0 * (eps_edge + _GUIDED_MARGIN)
    guided = np.nonzero(vals > cutoff)[0]
    if guided.size < n_modes:
        raise NoGuidedMode(
            f"cut supports {guided.size} guided mode(s), {n_modes} requested")

    # strongest confinement first (largest beta^2)
    order = guided[np.argsort(vals[guided])[::-1]]
    out = []
    for rank in range(n_modes):
        idx = order[rank]
        m = vecs[:, idx].astype(float)
        norm = np.sqrt(np.sum(m * m) * dy)
        m = m / norm
        peak = np.argmax(np.abs(m))
        if m[peak] < 0.0:
            m = -m
        n_eff = float(np.sqrt(vals[idx]) / k0)
        out.append(ModeProfile(amplitude=m, n_eff=n_eff,
                               wavelength=float(wavelength), dy=float(dy),
                               mode_index=rank))
    return out
