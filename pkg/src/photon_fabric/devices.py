"""The three concrete inverse-design problems and their metric extraction.

All devices share one 4-port geometry: two input rails entering from the
left, two output rails leaving to the right, and a square design region
bridging them.  The full-scale preset mirrors the reference platform
(10x10 um region, rails 9 um apart, 20 nm pixels); the desk preset is a
shrunk variant that factors and solves in seconds per wavelength.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .errors import NoResonance
from .solver import PortSpec
from .topopt import DesignProblem, ExcitationCondition, PowerTarget

EPS_CORE = 12.1
EPS_CLAD = 2.07


@dataclass(frozen=True)
class DeviceGeometry:
    """Shared 4-port layout parameters, lengths in nm.

    film_thickness is carried as platform metadata only; the simulation
    is 2D.
    """

    region: float = 10000.0
    wg_width: float = 500.0
    rail_spacing: float = 9000.0
    dx: float = 20.0
    lead: float = 1500.0
    film_thickness: float = 220.0

    def __post_init__(self):
        if self.rail_spacing + self.wg_width > self.region:
            raise ValueError("rails with their width must fit inside the "
                             "design region height")
        if min(self.region, self.wg_width, self.rail_spacing, self.dx,
               self.lead) <= 0.0:
            raise ValueError("all geometry lengths must be positive")


def full_geometry() -> DeviceGeometry:
    return DeviceGeometry()


def desk_geometry() -> DeviceGeometry:
    """Small variant for interactive work and CI."""
    return DeviceGeometry(region=4000.0, rail_spacing=2000.0, dx=40.0)


@dataclass(frozen=True)
class PortLayout:
    """Geometry realized on a grid: base permittivity plus the four ports
    and the design-region bounds."""

    base_eps: np.ndarray
    dx: float
    region: tuple
    in_top: PortSpec
    in_bot: PortSpec
    out_top: PortSpec
    out_bot: PortSpec


def build_port_layout(geom: DeviceGeometry) -> PortLayout:
    dx = geom.dx
    lead_c = int(round(geom.lead / dx))
    region_c = int(round(geom.region / dx))
    w_c = int(round(geom.wg_width / dx))
    rs_c = int(round(geom.rail_spacing / dx))
    nx = ny = lead_c + region_c + lead_c
    yc = ny // 2
    y_top = yc + rs_c // 2
    y_bot = yc - rs_c // 2
    eps = np.full((nx, ny), EPS_CLAD)
    x0r, x1r = lead_c, lead_c + region_c

    def rail(y):
        return slice(y - w_c // 2, y - w_c // 2 + w_c)

    for y in (y_top, y_bot):
        eps[:x0r, rail(y)] = EPS_CORE
        eps[x1r:, rail(y)] = EPS_CORE

    hw = min(rs_c // 2 - 2, int(round(2000.0 / dx)))
    src_x = max(18, x0r // 2)
    out_x = x1r + lead_c // 2

    def port(name, x, y, direction, role):
        return PortSpec(name, x, y - hw, y + hw, direction, role=role)

    return PortLayout(
        base_eps=eps, dx=dx,
        region=(x0r, x1r, yc - region_c // 2, yc + region_c // 2),
        in_top=port("in_top", src_x, y_top, +1, "source"),
        in_bot=port("in_bot", src_x, y_bot, +1, "source"),
        out_top=port("out_top", out_x, y_top, +1, "monitor"),
        out_bot=port("out_bot", out_x, y_bot, +1, "monitor"))


def _problem(layout: PortLayout, conditions) -> DesignProblem:
    return DesignProblem(base_eps=layout.base_eps, dx=layout.dx,
                         region=layout.region, eps_lo=EPS_CLAD,
                         eps_hi=EPS_CORE, conditions=conditions,
                         filter_radius=120.0)


def make_splitter_problem(geom: DeviceGeometry) -> DesignProblem:
    """50:50 power split from either input onto both outputs at 1550 nm."""
    lay = build_port_layout(geom)
    targets = (PowerTarget(lay.out_top, goal=0.5),
               PowerTarget(lay.out_bot, goal=0.5))
    return _problem(lay, [
        ExcitationCondition("top_in", lay.in_top, targets, 1550.0),
        ExcitationCondition("bottom_in", lay.in_bot, targets, 1550.0)])


def make_crossover_problem(geom: DeviceGeometry) -> DesignProblem:
    """Full transfer to the diagonally opposite port at 1550 nm."""
    lay = build_port_layout(geom)
    return _problem(lay, [
        ExcitationCondition("top_in", lay.in_top,
                            (PowerTarget(lay.out_bot, goal=1.0),
                             PowerTarget(lay.out_top, goal=0.0)), 1550.0),
        ExcitationCondition("bottom_in", lay.in_bot,
                            (PowerTarget(lay.out_top, goal=1.0),
                             PowerTarget(lay.out_bot, goal=0.0)), 1550.0)])


def make_resonator_problem(geom: DeviceGeometry) -> DesignProblem:
    """All-forward add-drop: drop the center wavelength, pass its
    neighbors.  Single top-left excitation at three wavelengths."""
    lay = build_port_layout(geom)
    return _problem(lay, [
        ExcitationCondition("drop_1550", lay.in_top,
                            (PowerTarget(lay.out_bot, goal=1.0),), 1550.0),
        ExcitationCondition("through_1548", lay.in_top,
                            (PowerTarget(lay.out_top, goal=1.0),), 1548.0),
        ExcitationCondition("through_1552", lay.in_top,
                            (PowerTarget(lay.out_top, goal=1.0),), 1552.0)])


def insertion_loss_db(intended_powers, injected=1.0):
    """IL from the power delivered to where it was supposed to go."""
    total = float(np.sum(intended_powers))
    if total <= 0.0:
        return float("inf")
    return -10.0 * np.log10(total / injected)


def crosstalk_db(unintended_powers, injected=1.0):
    """Worst leaked power relative to everything that was injected."""
    if len(unintended_powers) == 0:
        return None
    worst = float(np.max(unintended_powers))
    if worst <= 0.0:
        return -200.0
    return 10.0 * np.log10(worst / injected)


@dataclass(frozen=True)
class DeviceMetrics:
    condition: str
    wavelength: float
    powers: dict
    insertion_loss_db: float
    crosstalk_db: float | None


def evaluate_device(level, problem: DesignProblem) -> list[DeviceMetrics]:
    """Per-condition metrics of a density level map (binary or gray).

    The map is applied directly as the core/cladding mix, matching how
    binarized designs are stored; powers are fractions of each
    condition's injected power.  Ports with a positive goal count as
    intended, zero-goal ports as crosstalk paths.
    """
    _, powers = problem.evaluate_pattern(level)
    out = []
    for cond in problem.conditions:
        pmap = {t.port.name: powers[f"{cond.name}:{t.port.name}"]
                for t in cond.targets}
        intended = [pmap[t.port.name] for t in cond.targets if t.goal > 0.0]
        unintended = [pmap[t.port.name] for t in cond.targets
                      if t.goal == 0.0]
        out.append(DeviceMetrics(
            condition=cond.name, wavelength=cond.wavelength, powers=pmap,
            insertion_loss_db=insertion_loss_db(intended),
            crosstalk_db=crosstalk_db(unintended)))
    return out


def sweep_device(level, geom: DeviceGeometry, wl_start, wl_stop, wl_step,
                 jobs=1):
    """Top-input transmission spectra of a density level map.

    Returns (wavelengths_nm, p_through, p_drop) where through is the
    top-right port and drop the bottom-right.  One solve per wavelength;
    wavelengths are independent so they can run on a thread pool.
    """
    if wl_step <= 0.0:
        raise ValueError("wavelength step must be positive")
    lay = build_port_layout(geom)
    problem = _problem(lay, [ExcitationCondition(
        "sweep", lay.in_top,
        (PowerTarget(lay.out_top, goal=1.0),
         PowerTarget(lay.out_bot, goal=0.0)), 1550.0)])
    npts = int(round((wl_stop - wl_start) / wl_step)) + 1
    wavelengths = wl_start + wl_step * np.arange(npts)
    level = np.asarray(level, dtype=float)

    def one(wl):
        _, powers = problem.evaluate_pattern(level, wavelength=wl)
        return powers["sweep:out_top"], powers["sweep:out_bot"]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, wavelengths))
    else:
        rows = [one(wl) for wl in wavelengths]
    p_through = np.array([r[0] for r in rows])
    p_drop = np.array([r[1] for r in rows])
    return wavelengths, p_through, p_drop


@dataclass(frozen=True)
class ResonanceFit:
    lambda_r: float
    q: float
    extinction_db: float
    fit_residual: float


def fit_lorentzian(wavelengths, powers) -> ResonanceFit:
    """Least-squares Lorentzian resonance fit of a drop spectrum.

    P(l) = A (G/2)^2 / ((l - l_r)^2 + (G/2)^2) + B with Q = l_r / G.
    Raises NoResonance when the peak stands less than 3 dB above the
    band floor or the fitted center leaves the swept band.
    """
    wl = np.asarray(wavelengths, dtype=float)
    p = np.asarray(powers, dtype=float)
    if wl.size < 5:
        raise NoResonance("spectrum too short to fit")
    peak = float(np.max(p))
    floor = max(float(np.min(p)), 1e-30)
    if peak <= 0.0 or 10.0 * np.log10(peak / floor) < 3.0:
        raise NoResonance("no peak at least 3 dB above the band floor")

    i_pk = int(np.argmax(p))
    # half-width guess from the half-maximum crossings
    above = p >= (peak + floor) / 2.0
    hw0 = max(np.count_nonzero(above) * 0.5 * np.median(np.diff(wl)),
              np.median(np.diff(wl)))

    def model(x, lr, hw, a, b):
        return a * hw ** 2 / ((x - lr) ** 2 + hw ** 2) + b

    p0 = (wl[i_pk], hw0, peak - floor, floor)
    lo = (wl[0], 1e-9, 0.0, 0.0)
    hi = (wl[-1], wl[-1] - wl[0], 10.0 * peak, peak)
    try:
        popt, _ = curve_fit(model, wl, p, p0=p0, bounds=(lo, hi),
                            maxfev=20000)
    except RuntimeError as exc:
        raise NoResonance(f"fit did not converge: {exc}") from exc
    lr, hw, a, b = popt
    if not (wl[0] < lr < wl[-1]) or hw <= 0.0 or a <= 0.0:
        raise NoResonance("fitted resonance outside the swept band")
    resid = float(np.sqrt(np.mean((model(wl, *popt) - p) ** 2)) / peak)
    ext = (10.0 * np.log10((a + b) / b) if b > 0.0 else float("inf"))
    return ResonanceFit(lambda_r=float(lr), q=float(lr / (2.0 * hw)),
                        extinction_db=ext, fit_residual=resid)
