"""Switch-state solvers plus the path-trace oracle that audits them.

The trace is purely topological: a crossover always exchanges its two rails,
an actuated device exchanges or passes per its state, and a wavelength-
dedicated device acts on its own color only (cross within half a linewidth
of its resonance, bar otherwise). Terminators absorb. Solvers are exact and
deterministic; every documented tie-break is fixed so identical requests
yield identical states.
"""

from dataclasses import dataclass, field
from itertools import product

from .errors import Unroutable, UnresolvedControl

RESONATOR_KINDS = ("switch", "colored_switch", "tap")
DELTA_N_BAR = 0.003   # index shift parking a resonator off its color
TRACE_Q = 4500.0      # linewidth reference for the color-match rule


@dataclass(frozen=True)
class SwitchState:
    """Actuation per control id, with the index-shift bookkeeping for
    resonator-type devices (bar means detuned by delta_n, cross untuned)."""
    actuation: dict
    delta_n: dict = field(default_factory=dict)

    def __post_init__(self):
        for ctrl, setting in self.actuation.items():
            if setting not in ("cross", "bar"):
                raise ValueError(f"bad actuation {setting!r} for {ctrl!r}")
        for ctrl, dn in self.delta_n.items():
            setting = self.actuation.get(ctrl)
            if setting == "cross" and dn != 0.0:
                raise ValueError(f"{ctrl!r}: cross state must be untuned")
            if setting == "bar" and dn == 0.0:
                raise ValueError(f"{ctrl!r}: bar state needs a nonzero shift")

    @property
    def non_ambient(self):
        # populated by state_for; kept here for reports
        return dict(self.actuation)


def state_for(layout, actuation):
    """Wrap an actuation map for a layout, filling delta_n for resonator
    devices and checking completeness."""
    shifts = {}
    for col in layout.columns:
        for p in col:
            if p.control is None:
                continue
            setting = actuation.get(p.control)
            if setting is None:
                raise UnresolvedControl(f"no state for control {p.control!r}")
            if p.kind in RESONATOR_KINDS:
                shifts[p.control] = DELTA_N_BAR if setting == "bar" else 0.0
    return SwitchState(actuation=dict(actuation), delta_n=shifts)


def non_ambient_count(layout, state):
    actuation = getattr(state, "actuation", state)
    n = 0
    for col in layout.columns:
        for p in col:
            if p.control is not None and actuation[p.control] != p.ambient:
                n += 1
    return n


# --- trace oracle -------------------------------------------------------------

def _color_match(placement, color):
    if color is None:
        raise ValueError("tracing a wavelength-dedicated device needs a color")
    return abs(color - placement.color_nm) < placement.color_nm / TRACE_Q / 2.0


def _exchanges(placement, actuation, color):
    kind = placement.kind
    if kind == "crossover":
        return True
    if kind == "colored":
        return _color_match(placement, color)
    if kind in ("switch", "mzi", "colored_switch", "tap"):
        setting = actuation.get(placement.control)
        if setting is None:
            raise UnresolvedControl(
                f"no state for control {placement.control!r}")
        if setting != "cross":
            return False
        if placement.color_nm is None:
            return True
        return _color_match(placement, color)
    raise ValueError(f"cannot trace placement kind {kind!r}")


class Tracer:
    """Reusable walker over one layout; builds rail lookup tables once so
    batch verification over many states stays cheap."""

    def __init__(self, layout):
        self.layout = layout
        self.n_cols = len(layout.columns)
        self.maps = []
        for col in layout.columns:
            lut = {}
            for p in col:
                lut[p.rail] = p
                lut[p.rail + 1] = p
            self.maps.append(lut)
        self.terminators = layout.terminators
        self.out_index = {r: k for k, r in enumerate(layout.output_rails)}

    def trace(self, state, color=None, details=False):
        """Map input index -> output index, "terminated", or ("rail", r).

        With details, also return per-input traversal tallies keyed
        "kind:cross" / "kind:bar"."""
        if self.layout.kind == "wcc_4x4x4":
            return self._trace_wcc(state, color, details)
        actuation = getattr(state, "actuation", state if state else {})
        results = {}
        stats = {}
        for idx, start in enumerate(self.layout.input_rails):
            rail = start
            tally = {}
            outcome = None
            for ci in range(self.n_cols):
                if (rail, ci) in self.terminators:
                    outcome = "terminated"
                    break
                p = self.maps[ci].get(rail)
                if p is None:
                    continue
                exch = _exchanges(p, actuation, color)
                if details:
                    key = f"{p.kind}:{'cross' if exch else 'bar'}"
                    tally[key] = tally.get(key, 0) + 1
                if exch:
                    rail = p.rail + 1 if rail == p.rail else p.rail
            if outcome is None:
                if (rail, self.n_cols) in self.terminators:
                    outcome = "terminated"
                else:
                    outcome = self.out_index.get(rail, ("rail", rail))
            results[idx] = outcome
            if details:
                stats[idx] = tally
        return (results, stats) if details else results

    def _trace_wcc(self, state, color, details):
        # first tuned tap along the bus wins; untouched signals fall
        # through to the last output
        actuation = getattr(state, "actuation", state if state else {})
        if color is None:
            raise ValueError("wavelength cross-connect trace needs a color")
        last = len(self.layout.output_rails) - 1
        results = {}
        stats = {}
        for idx, rail in enumerate(self.layout.input_rails):
            out = last
            tally = {}
            for ci in range(self.n_cols):
                p = self.maps[ci].get(rail)
                if p is None or p.kind != "tap":
                    continue
                exch = _exchanges(p, actuation, color)
                if details:
                    key = f"tap:{'cross' if exch else 'bar'}"
                    tally[key] = tally.get(key, 0) + 1
                if exch:
                    out = p.target
                    break
            results[idx] = out
            if details:
                stats[idx] = tally
        return (results, stats) if details else results


def trace_paths(layout, state, color=None):
    return Tracer(layout).trace(state, color)


# --- permutation plumbing -----------------------------------------------------

def _as_perm(request, n):
    if isinstance(request, dict):
        try:
            sigma = [request[i] for i in range(n)]
        except KeyError as missing:
            raise ValueError(f"request is not total: missing input {missing}")
    else:
        sigma = [int(x) for x in request]
    if sorted(sigma) != list(range(n)):
        raise ValueError(f"request is not a permutation of 0..{n - 1}")
    return sigma


def _complete_partial(partial, n):
    """Extend a partial input->output map to a full permutation, pairing
    leftover inputs with leftover outputs in ascending order."""
    sigma = dict(partial)
    free_out = sorted(set(range(n)) - set(sigma.values()))
    for i in range(n):
        if i not in sigma:
            sigma[i] = free_out.pop(0)
    return [sigma[i] for i in range(n)]


# --- per-kind solvers ---------------------------------------------------------

def _solve_crosspoint(layout, request):
    n = layout.meta["n"]
    sigma = _as_perm(request, n)
    actuation = {f"sw_{i}_{j}": "cross" for i in range(n) for j in range(n)}
    for i in range(n):
        actuation[f"sw_{i}_{sigma[i]}"] = "bar"
    return state_for(layout, actuation)


def _solve_spanke_benes(layout, request):
    n = layout.meta["n"]
    tokens = _as_perm(request, n)
    actuation = {}
    for c in range(n):
        for r in range(c % 2, n - 1, 2):
            if tokens[r] > tokens[r + 1]:
                tokens[r], tokens[r + 1] = tokens[r + 1], tokens[r]
                actuation[f"el_{c}_{r}"] = "cross"
            else:
                actuation[f"el_{c}_{r}"] = "bar"
    if tokens != sorted(tokens):
        raise Unroutable("transposition columns exhausted before sorting")
    return state_for(layout, actuation)


def _piloss_reach(n):
    """reach[p][m]: bitmask of switch pairs reachable from pair p using m
    crossover columns (one +-1 pair move each, stalls at the edges)."""
    reach = [[0] * n for _ in range(n)]
    for p in range(n):
        reach[p][0] = 1 << p
    for m in range(1, n):
        for p in range(n):
            up = p - 1 if p > 0 else 0
            down = p + 1 if p < n - 1 else n - 1
            reach[p][m] = reach[up][m - 1] | reach[down][m - 1]
    return reach


def _solve_piloss(layout, request):
    n = layout.meta["n"]
    sigma = _as_perm(request, n)
    targets = tuple(layout.output_rails[sigma[i]] for i in range(n))
    reach = _piloss_reach(n)
    top = 2 * n - 1
    failed = set()

    def dfs(stage, rails):
        if (stage, rails) in failed:
            return None
        pairs = sorted({r // 2 for r in rails})
        for combo in product(("cross", "bar"), repeat=len(pairs)):
            setting = dict(zip(pairs, combo))
            switched = tuple(
                r ^ 1 if setting[r // 2] == "cross" else r for r in rails)
            if stage == n - 1:
                if switched == targets:
                    return [setting]
                continue
            shifted = tuple(
                (r + 1 if r % 2 else r - 1) if 0 < r < top else r
                for r in switched)
            remaining = n - 2 - stage
            ok = True
            for i, r in enumerate(shifted):
                if not (reach[r // 2][remaining] >> (targets[i] // 2)) & 1:
                    ok = False
                    break
            if not ok:
                continue
            rest = dfs(stage + 1, shifted)
            if rest is not None:
                return [setting] + rest
        failed.add((stage, rails))
        return None

    plan = dfs(0, tuple(layout.input_rails))
    if plan is None:
        raise Unroutable("no conflict-free switch assignment found")
    actuation = {}
    for stage in range(n):
        for p in range(n):
            actuation[f"sw_{stage}_{p}"] = plan[stage].get(p, "cross")
    return state_for(layout, actuation)


def _route_benes(n, sigma, prefix, out):
    """Looping assignment over the recursive two-plane structure.

    Tie-breaks are fixed: the lowest-index unrouted input starts each loop
    and is assigned the upper subnet; the 3x3 triangle takes the first
    realizing combination in cross-first order."""
    if n == 2:
        out[f"{prefix}m"] = "bar" if sigma[0] == 0 else "cross"
        return
    if n == 3:
        stages = ((f"{prefix}a", 0), (f"{prefix}b", 1), (f"{prefix}c", 0))
        for combo in product(("cross", "bar"), repeat=3):
            # occupant[r] is the input sitting on rail r after each stage,
            # so the realized permutation must satisfy occupant[sigma[i]] == i
            occupant = list(range(3))
            for (_, rail), setting in zip(stages, combo):
                if setting == "cross":
                    occupant[rail], occupant[rail + 1] = (
                        occupant[rail + 1], occupant[rail])
            if all(occupant[sigma[i]] == i for i in range(3)):
                for (name, _), setting in zip(stages, combo):
                    out[name] = setting
                return
        raise Unroutable("3x3 triangle cannot realize the sub-permutation")
    half = n // 2
    inverse = [0] * n
    for i, o in enumerate(sigma):
        inverse[o] = i
    subnet = [None] * n
    while None in subnet:
        start = subnet.index(None)
        subnet[start] = 0
        i = start
        while True:
            partner_out = sigma[i] ^ 1
            i2 = inverse[partner_out]
            if subnet[i2] is not None:
                break
            subnet[i2] = 1 - subnet[i]
            i3 = i2 ^ 1
            if subnet[i3] is not None:
                break
            subnet[i3] = 1 - subnet[i2]
            i = i3
    for k in range(half):
        out[f"{prefix}e{k}"] = "bar" if subnet[2 * k] == 0 else "cross"
    for m in range(half):
        out[f"{prefix}x{m}"] = "bar" if subnet[inverse[2 * m]] == 0 else "cross"
    tau_up = [0] * half
    tau_lo = [0] * half
    for k in range(half):
        up_in = 2 * k if subnet[2 * k] == 0 else 2 * k + 1
        lo_in = 2 * k + 1 if subnet[2 * k] == 0 else 2 * k
        tau_up[k] = sigma[up_in] // 2
        tau_lo[k] = sigma[lo_in] // 2
    _route_benes(half, tau_up, prefix + "u", out)
    _route_benes(half, tau_lo, prefix + "l", out)


def _solve_clos_benes(layout, request):
    n = layout.meta["n"]
    sigma = _as_perm(request, n)
    if any(sigma[i] % 2 != i % 2 for i in range(n)):
        raise Unroutable(
            "the two-plane construction only realizes parity-preserving "
            "permutations (even inputs to even outputs)")
    tau_a = [sigma[2 * k] // 2 for k in range(n // 2)]
    tau_b = [sigma[2 * k + 1] // 2 for k in range(n // 2)]
    actuation = {}
    _route_benes(n // 2, tau_a, "a", actuation)
    _route_benes(n // 2, tau_b, "b", actuation)
    return state_for(layout, actuation)


def _solve_select(layout, request, n_lines=8):
    if isinstance(request, dict):
        if len(request) != 1:
            raise ValueError("selector requests name exactly one line")
        ((key, value),) = request.items()
        line = key if layout.kind == "select_8to1" else value
    else:
        line = int(request)
    if not 0 <= line < n_lines:
        raise ValueError(f"selected line {line} out of range")
    actuation = {f"sel_{k}": "cross" for k in range(n_lines)}
    if line > 0:
        actuation[f"sel_{line - 1}"] = "bar"
    return state_for(layout, actuation)


def _solve_passive(layout, request):
    state = state_for(layout, {})
    if request:
        tracer = Tracer(layout)
        for (inp, lam), want in request.items():
            got = tracer.trace(state, color=lam).get(inp)
            if got != want:
                raise Unroutable(
                    f"passive chain sends input {inp} at {lam} nm to {got}, "
                    f"not {want}")
    return state


def _color_index(layout, lam):
    for ci, c in enumerate(layout.colors):
        if abs(lam - c) < c / TRACE_Q / 2.0:
            return ci
    raise ValueError(f"{lam} nm is not a palette color of this layout")


def solve_wavelength_routing(layout, request):
    """State realizing a {(input, color) -> output} request per color."""
    n_in = len(layout.input_rails)
    n_out = len(layout.output_rails)
    per_color = {ci: {} for ci in range(len(layout.colors))}
    used = set()
    for (inp, lam), out in request.items():
        ci = _color_index(layout, lam)
        if not (0 <= inp < n_in and 0 <= out < n_out):
            raise ValueError(f"request ({inp}, {lam}) -> {out} out of range")
        if (out, ci) in used:
            raise Unroutable(
                f"two signals collide on output {out} at color index {ci}")
        used.add((out, ci))
        per_color[ci][inp] = out

    kind = layout.kind
    actuation = {}
    if kind == "multicrossbar":
        for ci, sub in per_color.items():
            full = _complete_partial(sub, 2)
            actuation[f"xb_{ci}"] = "bar" if full == [0, 1] else "cross"
    elif kind in ("wss_6x6x4", "wss_8x8x3"):
        n = layout.meta["n"]
        conditioned = layout.meta.get("conditioned", False)
        for ci, sub in per_color.items():
            sigma = _complete_partial(sub, n)
            if conditioned:
                # undo the fixed input conditioning column (adjacent swaps)
                sigma = [sigma[r ^ 1] for r in range(n)]
            plan = {}
            _route_benes(n, sigma, "g", plan)
            for name, setting in plan.items():
                actuation[f"{name}_c{ci}"] = setting
    elif kind == "wcc_4x4x4":
        for ctrl in layout.control_ids:
            actuation[ctrl] = "bar"
        last = n_out - 1
        for ci, sub in per_color.items():
            for inp, out in sub.items():
                if out != last:
                    actuation[f"tap_i{inp}_c{ci}_k{out}"] = "cross"
    else:
        raise ValueError(f"{kind!r} is not a wavelength-routed layout")
    return state_for(layout, actuation)


def solve_state(layout, request):
    """Switch state realizing a permutation (or wavelength request) on a
    layout; raises Unroutable when the topology cannot."""
    kind = layout.kind
    if kind == "crosspoint":
        return _solve_crosspoint(layout, request)
    if kind == "spanke_benes":
        return _solve_spanke_benes(layout, request)
    if kind == "piloss":
        return _solve_piloss(layout, request)
    if kind == "clos_benes_16":
        return _solve_clos_benes(layout, request)
    if kind in ("select_8to1", "select_1to8"):
        return _solve_select(layout, request)
    if kind in ("mux8", "demux8"):
        return _solve_passive(layout, request)
    if kind in ("multicrossbar", "wss_6x6x4", "wss_8x8x3", "wcc_4x4x4"):
        return solve_wavelength_routing(layout, request)
    raise ValueError(f"no solver for layout kind {kind!r}")
