"""Behavioral 2x2 scattering models and a feed-forward transfer engine.

Models are forward-only (back-reflections neglected) and phases follow one
convention throughout: the cross or drop path carries the +90 degree factor.
A circuit response is the ordered product of per-column block matrices over
the rails, so any layout built from these placements composes exactly.

Default parameters are the published nominal set: 0.26 dB splitter excess
loss, 0.29 dB / -27 dB crossovers with a 28 nm flat band, and Q 4500
add-drop resonators with 20 dB extinction. The resonator bar (detuned)
state is idealized as fully parked off resonance: a clean pass at the
through loss. The measured bias is two linewidths, which would leave a
small on-peak dip; path loss bookkeeping stays exact this way.
"""

from dataclasses import dataclass, field, replace
from functools import reduce
import math

import numpy as np

from .errors import UnresolvedControl

DB_FLOOR = -200.0


def _amp(db_loss):
    return 10.0 ** (-db_loss / 20.0)


@dataclass(frozen=True)
class CouplerParams:
    split_ratio: float = 0.5        # power fraction to the cross port
    excess_loss: float = 0.26       # dB
    crosstalk_floor: float = -60.0  # dB, reserved for imbalance modeling

    def __post_init__(self):
        if not 0.0 <= self.split_ratio <= 1.0:
            raise ValueError("split_ratio must be in [0, 1]")
        if self.excess_loss < 0.0:
            raise ValueError("excess_loss must be >= 0 dB")


@dataclass(frozen=True)
class CrossoverParams:
    insertion_loss: float = 0.29  # dB, cross path
    crosstalk: float = -27.0      # dB, in-band through leakage
    bandwidth: float = 28.0       # nm, full flat-band width
    center_nm: float = 1550.0

    def __post_init__(self):
        if self.insertion_loss < 0.0:
            raise ValueError("insertion_loss must be >= 0 dB")
        if self.crosstalk > -10.0:
            raise ValueError("crosstalk must be <= -10 dB")


@dataclass(frozen=True)
class ResonatorParams:
    lambda_r0: float = 1550.0   # nm, nominal resonance
    q: float = 4500.0
    drop_loss: float = 0.5      # dB
    through_loss: float = 0.1   # dB; no published value, declared default
    extinction: float = 20.0    # dB
    n_g: float = 6.75           # group index calibrating delta_n tuning
    delta_n: float = 0.003      # index shift applied in the detuned state

    def __post_init__(self):
        if self.q <= 0.0:
            raise ValueError("Q must be positive")
        if self.extinction <= 0.0:
            raise ValueError("extinction must be positive dB")

    @property
    def linewidth(self):
        return self.lambda_r0 / self.q

    @property
    def lambda_r(self):
        return self.lambda_r0 * (1.0 + self.delta_n / self.n_g)


@dataclass(frozen=True)
class DeviceParams:
    """Parameter sets keyed by placement kind plus the abstract pieces."""
    coupler: CouplerParams = field(default_factory=CouplerParams)
    crossover: CrossoverParams = field(default_factory=CrossoverParams)
    resonator: ResonatorParams = field(default_factory=ResonatorParams)
    block_loss: float = 0.5  # dB, abstract shuffle region of the 4x4x4


def paper_nominal():
    return DeviceParams()


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Rail-to-rail field amplitudes at one wavelength; entry (j, i) maps
    input rail i to output rail j."""
    wavelength: float
    matrix: np.ndarray


def coupler_matrix(p: CouplerParams, wavelength=1550.0):
    t = math.sqrt(1.0 - p.split_ratio)
    c = math.sqrt(p.split_ratio)
    return _amp(p.excess_loss) * np.array([[t, 1j * c], [1j * c, t]])


def _crossover_leak_db(p: CrossoverParams, wavelength):
    detune = abs(wavelength - p.center_nm)
    if detune <= p.bandwidth / 2.0:
        return p.crosstalk
    # linear-in-dB degradation: back to half the in-band figure one full
    # bandwidth out, clamped at total leakage
    return min(0.0, p.crosstalk * (1.5 - detune / p.bandwidth))


def crossover_matrix(p: CrossoverParams, wavelength=1550.0):
    a2 = 10.0 ** (-p.insertion_loss / 10.0)
    leak2_band = 10.0 ** (p.crosstalk / 10.0)
    leak2 = 10.0 ** (_crossover_leak_db(p, wavelength) / 10.0)
    # total output power held at the in-band figure, so out-of-band leakage
    # grows at the expense of the cross path
    cross2 = max(a2 + leak2_band - leak2, 0.0)
    eps = math.sqrt(leak2)
    x = math.sqrt(cross2)
    return np.array([[eps, 1j * x], [1j * x, eps]])


def resonator_matrix(p: ResonatorParams, wavelength):
    """All-forward add-drop: [[t, d], [d, t]] with a Lorentzian drop.

    The through dip is floored by the extinction spec; the drop carries the
    complementary sqrt(1 - eps^2) so |t|^2 + |d|^2 stays exactly at the
    loss budget for every detuning.
    """
    h = p.lambda_r0 / p.q / 2.0
    delta = wavelength - p.lambda_r
    eps = 10.0 ** (-p.extinction / 20.0)
    den = 1j * delta + h
    t = _amp(p.through_loss) * (1j * delta + h * eps) / den
    d = _amp(p.drop_loss) * math.sqrt(1.0 - eps * eps) * h / den
    return np.array([[t, d], [d, t]])


def mzi_matrix(p: CouplerParams, phase, wavelength=1550.0):
    """Two-coupler interferometer with the phase shifter on the lower arm.

    Ports are labeled so that zero phase is the bar state and pi the cross
    state (the physical pair of 3-dB couplers alone would swap them).
    """
    c = coupler_matrix(p, wavelength)
    shifter = np.array([[1.0, 0.0], [0.0, np.exp(1j * phase)]])
    relabel = np.array([[0.0, 1.0], [1.0, 0.0]])
    return relabel @ c @ shifter @ c


# --- circuit composition -----------------------------------------------------

def _actuation(state):
    if state is None:
        return {}
    return getattr(state, "actuation", state)


def _placement_block(p, wavelength, actuation, params):
    if p.kind == "crossover":
        return crossover_matrix(params.crossover, wavelength)
    if p.kind == "colored":
        rp = replace(params.resonator, lambda_r0=p.color_nm, delta_n=0.0)
        return resonator_matrix(rp, wavelength)
    if p.kind in ("switch", "colored_switch", "tap"):
        setting = actuation.get(p.control)
        if setting is None:
            raise UnresolvedControl(f"no state for control {p.control!r}")
        if setting == "cross":
            lam0 = p.color_nm if p.color_nm is not None \
                else params.resonator.lambda_r0
            rp = replace(params.resonator, lambda_r0=lam0, delta_n=0.0)
            return resonator_matrix(rp, wavelength)
        a = _amp(params.resonator.through_loss)
        return np.array([[a, 0.0], [0.0, a]], dtype=complex)
    if p.kind == "mzi":
        setting = actuation.get(p.control)
        if setting is None:
            raise UnresolvedControl(f"no state for control {p.control!r}")
        return mzi_matrix(params.coupler,
                          0.0 if setting == "bar" else math.pi, wavelength)
    raise ValueError(f"no behavioral model for placement kind {p.kind!r}")


def column_matrices(layout, state, wavelength, params=None):
    """Ordered factors whose left-to-right product is the rail response.

    Terminator masks appear as their own diagonal factors so the product
    can be split and regrouped anywhere.
    """
    params = params or paper_nominal()
    actuation = _actuation(state)
    n = layout.n_rails
    absorbers = {}
    for rail, col in layout.terminators:
        absorbers.setdefault(col, []).append(rail)

    def mask(rails):
        d = np.ones(n, dtype=complex)
        d[list(rails)] = 0.0
        return np.diag(d)

    factors = []
    for ci, col in enumerate(layout.columns):
        if ci in absorbers:
            factors.append(mask(absorbers[ci]))
        m = np.eye(n, dtype=complex)
        for p in col:
            m[p.rail:p.rail + 2, p.rail:p.rail + 2] = \
                _placement_block(p, wavelength, actuation, params)
        factors.append(m)
    if len(layout.columns) in absorbers:
        factors.append(mask(absorbers[len(layout.columns)]))
    return factors


def _wcc_matrix(layout, state, wavelength, params):
    """Tap-cascade composition for the wavelength cross-connect.

    Each input bus runs through its taps in column order; a tuned tap pulls
    the resonant share toward its target's merge, the residue falls through
    to the last output. Dropped signals then cross the abstract shuffle
    region (flat loss) and a 4:1 merge."""
    actuation = _actuation(state)
    n = layout.n_rails
    total = np.zeros((n, n), dtype=complex)
    merge_amp = 1.0 / math.sqrt(len(layout.input_rails))
    block_amp = _amp(params.block_loss)
    for rail_in in layout.input_rails:
        bus = 1.0 + 0.0j
        arriving = {}
        for col in layout.columns:
            for p in col:
                if p.kind != "tap" or p.rail != rail_in:
                    continue
                blk = _placement_block(p, wavelength, actuation, params)
                if blk[1, 0] != 0.0:
                    arriving[p.target] = arriving.get(p.target, 0.0) \
                        + bus * blk[1, 0]
                bus = bus * blk[0, 0]
        last = len(layout.output_rails) - 1
        arriving[last] = arriving.get(last, 0.0) + bus
        for k, amp in arriving.items():
            total[layout.output_rails[k], rail_in] += \
                amp * block_amp * merge_amp
    return total


def circuit_response(layout, state, wavelengths, params=None):
    """TransferMatrix per wavelength for a layout under a switch state.

    Raises UnresolvedControl if any placement's control id is missing from
    the state. Wavelengths are independent, pure evaluations."""
    params = params or paper_nominal()
    out = []
    for wl in np.atleast_1d(np.asarray(wavelengths, dtype=float)):
        if layout.kind == "wcc_4x4x4":
            m = _wcc_matrix(layout, state, float(wl), params)
        else:
            factors = column_matrices(layout, state, float(wl), params)
            m = reduce(lambda acc, f: f @ acc,
                       factors, np.eye(layout.n_rails, dtype=complex))
        out.append(TransferMatrix(wavelength=float(wl), matrix=m))
    return out


def path_metrics(response: TransferMatrix, intended, floor_db=DB_FLOOR):
    """Per-path insertion loss and worst-case crosstalk, in dB.

    intended maps input rail -> output rail. Crosstalk for a path is the
    strongest arrival from its input on any other rail; zeros report the
    floor instead of -inf."""
    t = response.matrix
    floor_power = 10.0 ** (floor_db / 10.0)
    il = {}
    xt = {}
    for i, j in intended.items():
        p_want = abs(t[j, i]) ** 2
        il[i] = -10.0 * math.log10(max(p_want, floor_power))
        others = np.abs(np.delete(t[:, i], j)) ** 2
        p_leak = float(others.max()) if others.size else 0.0
        xt[i] = 10.0 * math.log10(max(p_leak, floor_power))
    return {"il_db": il, "crosstalk_db": xt,
            "worst_il_db": max(il.values()) if il else 0.0,
            "worst_crosstalk_db": max(xt.values()) if xt else floor_db}
