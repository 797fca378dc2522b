"""Generators for switch-fabric layouts on the parallel-rail framework.

A layout is a column-ordered list of two-port placements. Every device spans
a pair of adjacent rails (rail r and r+1); signals enter at the left edge and
exit at the right, so composition is strictly feed-forward. The wavelength
cross-connect is the one exception: it carries an abstract shuffle block
between its tap and merge stages because that region is explicitly not
realizable as adjacent-rail crossovers.
"""

from dataclasses import dataclass, field, replace
import json

from .errors import PaletteTooSmall, UnsupportedSize

ACTIVE_KINDS = ("switch", "mzi", "colored_switch", "tap")

# default channel plans, nm
PALETTE_3 = (1548.0, 1550.0, 1552.0)
PALETTE_4 = (1544.0, 1548.0, 1552.0, 1556.0)
PALETTE_8 = (1543.0, 1545.0, 1547.0, 1549.0, 1551.0, 1553.0, 1555.0, 1557.0)

RAIL_PITCH_UM = 9.0
COLUMN_PITCH_UM = 12.0  # 10 um device + 2 um margin


@dataclass(frozen=True)
class Placement:
    """One two-port device spanning rails (rail, rail+1) in its column.

    kind: "switch" active resonator, "mzi" active interferometer switch,
    "crossover" passive broadband, "colored" passive wavelength-dedicated
    add-drop, "colored_switch" active wavelength-dedicated, "tap" colored
    active with a routed destination, "merge" passive combiner, "block"
    abstract shuffle region.
    ambient is the unactuated trace state of an active device.
    """

    rail: int
    kind: str
    control: str = None
    color_nm: float = None
    ambient: str = "cross"
    target: int = None


@dataclass(frozen=True)
class ArchitectureSpec:
    kind: str
    n: int = None
    palette: tuple = None


@dataclass(frozen=True)
class CircuitLayout:
    kind: str
    n_rails: int
    columns: tuple
    input_rails: tuple
    output_rails: tuple
    terminators: frozenset = frozenset()
    colors: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        controls = set()
        for ci, col in enumerate(self.columns):
            used = set()
            for p in col:
                if not 0 <= p.rail < self.n_rails - 1:
                    raise ValueError(f"placement rail {p.rail} out of range in column {ci}")
                if p.rail in used or p.rail + 1 in used:
                    raise ValueError(f"overlapping placements in column {ci}")
                used.update((p.rail, p.rail + 1))
                if p.control is not None:
                    if p.control in controls:
                        raise ValueError(f"duplicate control id {p.control}")
                    controls.add(p.control)
        for rail, col in self.terminators:
            if not 0 <= rail < self.n_rails or not 0 <= col <= len(self.columns):
                raise ValueError(f"terminator ({rail}, {col}) out of range")

    @property
    def control_ids(self):
        return tuple(p.control for col in self.columns for p in col
                     if p.control is not None)


def count_components(layout):
    counts = {"active": 0, "passive_crossovers": 0, "passive_colored": 0,
              "passive_merges": 0, "abstract_blocks": 0,
              "terminators": len(layout.terminators),
              "rails": layout.n_rails, "columns": len(layout.columns)}
    for col in layout.columns:
        for p in col:
            if p.kind in ACTIVE_KINDS:
                counts["active"] += 1
            elif p.kind == "crossover":
                counts["passive_crossovers"] += 1
            elif p.kind == "colored":
                counts["passive_colored"] += 1
            elif p.kind == "merge":
                counts["passive_merges"] += 1
            elif p.kind == "block":
                counts["abstract_blocks"] += 1
    return counts


def _perm_columns(dest, n_rails):
    """Realize a rail permutation as columns of adjacent crossovers.

    dest[r] is the rail the signal currently on r must reach. Odd-even
    transposition sorting gives a triangular array with exactly inv(dest)
    crossovers, which is minimal.
    """
    cur = list(dest)
    cols = []
    parity = 0
    while cur != sorted(cur):
        placed = []
        for r in range(parity, n_rails - 1, 2):
            if cur[r] > cur[r + 1]:
                cur[r], cur[r + 1] = cur[r + 1], cur[r]
                placed.append(Placement(rail=r, kind="crossover"))
        if placed:
            cols.append(tuple(placed))
        parity ^= 1
    return cols


# --- Benes stage plans -------------------------------------------------------
#
# A stage plan is a list of entries, either ("sw", [(rail, ctrl), ...]) for one
# switch stage or ("perm", dest_map) for a fixed inter-stage permutation. The
# routing module rebuilds the same plan, so control names must stay stable.

def _benes_plan(n, rail0, prefix):
    if n == 2:
        return [("sw", [(rail0, f"{prefix}m")])]
    if n == 3:
        # planar triangle, the standard rearrangeable 3x3
        return [("sw", [(rail0, f"{prefix}a")]),
                ("sw", [(rail0 + 1, f"{prefix}b")]),
                ("sw", [(rail0, f"{prefix}c")])]
    if n % 2:
        raise UnsupportedSize(f"no stage plan for odd n={n}")
    half = n // 2
    entry = ("sw", [(rail0 + 2 * k, f"{prefix}e{k}") for k in range(half)])
    exit_ = ("sw", [(rail0 + 2 * k, f"{prefix}x{k}") for k in range(half)])
    unshuffle = {rail0 + 2 * k + b: rail0 + b * half + k
                 for k in range(half) for b in (0, 1)}
    shuffle = {v: k for k, v in unshuffle.items()}
    up = _benes_plan(half, rail0, prefix + "u")
    lo = _benes_plan(half, rail0 + half, prefix + "l")
    mid = []
    for su, sl in zip(up, lo):
        if su[0] == "sw" and sl[0] == "sw":
            mid.append(("sw", su[1] + sl[1]))
        elif su[0] == "perm" and sl[0] == "perm":
            mid.append(("perm", {**su[1], **sl[1]}))
        else:
            raise AssertionError("subnet stage plans out of phase")
    return [entry, ("perm", unshuffle), *mid, ("perm", shuffle), exit_]


def _plan_to_columns(plan, n_rails, kind="switch", ambient="cross",
                     colors=(), color_suffix=True):
    """Expand a stage plan into placement columns.

    With colors, every switch stage becomes len(colors) columns holding one
    wavelength-dedicated device per switch group (the cascade element of the
    multi-crossbar)."""
    cols = []
    for entry, payload in plan:
        if entry == "perm":
            dest = list(range(n_rails))
            for a, b in payload.items():
                dest[a] = b
            cols.extend(_perm_columns(dest, n_rails))
        elif not colors:
            cols.append(tuple(Placement(rail=r, kind=kind, control=c,
                                        ambient=ambient)
                              for r, c in payload))
        else:
            for ci, lam in enumerate(colors):
                tag = f"_c{ci}" if color_suffix else ""
                cols.append(tuple(Placement(rail=r, kind="colored_switch",
                                            control=f"{c}{tag}", color_nm=lam,
                                            ambient="cross")
                                  for r, c in payload))
    return cols


# --- generators --------------------------------------------------------------

def _gen_crosspoint(n):
    if not 2 <= n <= 16:
        raise UnsupportedSize(f"crosspoint supports N in 2..16, got {n}")
    cols = []
    for c in range(2 * n - 1):
        col = []
        for j in range(max(0, c - n + 1), min(c, n - 1) + 1):
            i = c - j
            col.append(Placement(rail=n - 1 + i - j, kind="switch",
                                 control=f"sw_{i}_{j}", ambient="cross"))
        # keep rail order within the column
        cols.append(tuple(sorted(col, key=lambda p: p.rail)))
    return CircuitLayout(
        kind="crosspoint", n_rails=2 * n, columns=tuple(cols),
        input_rails=tuple(n + i for i in range(n)),
        output_rails=tuple(2 * n - 1 - j for j in range(n)),
        meta={"n": n, "rail_pitch_um": RAIL_PITCH_UM,
              "column_pitch_um": COLUMN_PITCH_UM})


def _gen_spanke_benes(n):
    if not 2 <= n <= 16:
        raise UnsupportedSize(f"spanke_benes supports N in 2..16, got {n}")
    cols = []
    for c in range(n):
        start = c % 2
        cols.append(tuple(Placement(rail=r, kind="mzi", control=f"el_{c}_{r}",
                                    ambient="bar")
                          for r in range(start, n - 1, 2)))
    return CircuitLayout(
        kind="spanke_benes", n_rails=n, columns=tuple(cols),
        input_rails=tuple(range(n)), output_rails=tuple(range(n)),
        meta={"n": n, "rail_pitch_um": RAIL_PITCH_UM,
              "column_pitch_um": COLUMN_PITCH_UM})


def _gen_piloss(n):
    if not 2 <= n <= 16 or n % 2:
        raise UnsupportedSize(f"piloss supports even N in 2..16, got {n}")
    cols = []
    for s in range(n):
        cols.append(tuple(Placement(rail=2 * p, kind="switch",
                                    control=f"sw_{s}_{p}", ambient="cross")
                          for p in range(n)))
        if s < n - 1:
            cols.append(tuple(Placement(rail=2 * p + 1, kind="crossover")
                              for p in range(n - 1)))
    return CircuitLayout(
        kind="piloss", n_rails=2 * n, columns=tuple(cols),
        input_rails=tuple(2 * i for i in range(n)),
        output_rails=tuple(2 * j for j in range(n)),
        meta={"n": n, "rail_pitch_um": RAIL_PITCH_UM,
              "column_pitch_um": COLUMN_PITCH_UM})


def _gen_clos_benes_16():
    n = 16
    cols = []
    # triangular shuffle: even inputs to the upper 8x8 plane, odd to the lower
    interleave = [(i % 2) * 8 + i // 2 for i in range(n)]
    cols.extend(_perm_columns(interleave, n))
    plan_a = _benes_plan(8, 0, "a")
    plan_b = _benes_plan(8, 8, "b")
    merged = []
    for sa, sb in zip(plan_a, plan_b):
        if sa[0] == "sw":
            merged.append(("sw", sa[1] + sb[1]))
        else:
            merged.append(("perm", {**sa[1], **sb[1]}))
    # interferometer switches here, resting in the bar state
    cols.extend(_plan_to_columns(merged, n, kind="mzi", ambient="bar"))
    deinterleave = [0] * n
    for i, r in enumerate(interleave):
        deinterleave[r] = i
    cols.extend(_perm_columns(deinterleave, n))
    return CircuitLayout(
        kind="clos_benes_16", n_rails=n, columns=tuple(cols),
        input_rails=tuple(range(n)), output_rails=tuple(range(n)),
        meta={"n": n, "rail_pitch_um": RAIL_PITCH_UM,
              "column_pitch_um": COLUMN_PITCH_UM})


def _gen_select_8to1():
    cols = tuple((Placement(rail=k, kind="switch", control=f"sel_{k}",
                            ambient="cross"),)
                 for k in range(8))
    term = frozenset((r, 8) for r in range(7))
    return CircuitLayout(
        kind="select_8to1", n_rails=9, columns=cols,
        input_rails=tuple(range(8)), output_rails=(8,), terminators=term,
        meta={"n": 8, "rail_pitch_um": RAIL_PITCH_UM,
              "column_pitch_um": COLUMN_PITCH_UM})


def _gen_select_1to8():
    cols = tuple((Placement(rail=7 - c, kind="switch", control=f"sel_{7 - c}",
                            ambient="cross"),)
                 for c in range(8))
    return CircuitLayout(
        kind="select_1to8", n_rails=9, columns=cols,
        input_rails=(8,), output_rails=tuple(range(8)),
        meta={"n": 8, "rail_pitch_um": RAIL_PITCH_UM,
              "column_pitch_um": COLUMN_PITCH_UM})


def _demux_columns(palette):
    # color k drops off the bus pair (7,8) at column 2k, then falls one rail
    # per column down a diagonal of crossovers to its output rail k
    n_cols = 15
    cols = [[] for _ in range(n_cols)]
    for k, lam in enumerate(palette):
        cols[2 * k].append(Placement(rail=7, kind="colored", color_nm=lam))
        for t in range(7 - k):
            cols[2 * k + 1 + t].append(Placement(rail=6 - t, kind="crossover"))
    return [tuple(sorted(c, key=lambda p: p.rail)) for c in cols]


def _gen_demux8(palette):
    palette = _check_palette(palette, 8, PALETTE_8)
    return CircuitLayout(
        kind="demux8", n_rails=9, columns=tuple(_demux_columns(palette)),
        input_rails=(8,), output_rails=tuple(range(8)), colors=palette,
        meta={"n": 8, "rail_pitch_um": RAIL_PITCH_UM,
              "column_pitch_um": COLUMN_PITCH_UM})


def _gen_mux8(palette):
    palette = _check_palette(palette, 8, PALETTE_8)
    cols = tuple(reversed(_demux_columns(palette)))
    return CircuitLayout(
        kind="mux8", n_rails=9, columns=cols,
        input_rails=tuple(range(8)), output_rails=(8,), colors=palette,
        meta={"n": 8, "rail_pitch_um": RAIL_PITCH_UM,
              "column_pitch_um": COLUMN_PITCH_UM})


def _gen_multicrossbar(palette):
    palette = _check_palette(palette, None, PALETTE_3)
    if not 1 <= len(palette) <= 8:
        raise UnsupportedSize("multicrossbar supports 1..8 colors")
    cols = tuple((Placement(rail=0, kind="colored_switch", control=f"xb_{c}",
                            color_nm=lam, ambient="cross"),)
                 for c, lam in enumerate(palette))
    return CircuitLayout(
        kind="multicrossbar", n_rails=2, columns=cols,
        input_rails=(0, 1), output_rails=(0, 1), colors=palette,
        meta={"n": 2, "rail_pitch_um": RAIL_PITCH_UM,
              "column_pitch_um": COLUMN_PITCH_UM})


def _gen_wss(kind, n, palette, condition):
    cols = []
    if condition:
        # input conditioning: each adjacent bus pair crossed once, matching
        # the published passive count for the 6x6
        cols.append(tuple(Placement(rail=2 * k, kind="crossover")
                          for k in range(n // 2)))
    plan = _benes_plan(n, 0, "g")
    cols.extend(_plan_to_columns(plan, n, colors=palette))
    return CircuitLayout(
        kind=kind, n_rails=n, columns=tuple(cols),
        input_rails=tuple(range(n)), output_rails=tuple(range(n)),
        colors=palette,
        meta={"n": n, "conditioned": bool(condition),
              "rail_pitch_um": RAIL_PITCH_UM,
              "column_pitch_um": COLUMN_PITCH_UM})


def _gen_wcc_4x4x4(palette):
    palette = _check_palette(palette, 4, PALETTE_4)
    cols = []
    # selection stage: per input bus, three cascaded taps per color; an
    # actuated tap pulls its color out toward merge column `target`, an
    # untouched (input, color) pair falls through to output 3
    for c in range(4):
        for k in range(3):
            cols.append(tuple(
                Placement(rail=2 * i, kind="tap", control=f"tap_i{i}_c{c}_k{k}",
                          color_nm=palette[c], ambient="bar", target=k)
                for i in range(4)))
    cols.append((Placement(rail=0, kind="block"),))
    for c in range(4):
        cols.append(tuple(Placement(rail=2 * j, kind="merge",
                                    color_nm=palette[c])
                          for j in range(4)))
    return CircuitLayout(
        kind="wcc_4x4x4", n_rails=8, columns=tuple(cols),
        input_rails=(0, 2, 4, 6), output_rails=(0, 2, 4, 6), colors=palette,
        meta={"n": 4, "rail_pitch_um": RAIL_PITCH_UM,
              "column_pitch_um": COLUMN_PITCH_UM})


def _check_palette(palette, need, default):
    if palette is None:
        palette = default if need is None else default[:need]
    palette = tuple(float(x) for x in palette)
    if len(set(palette)) != len(palette):
        raise PaletteTooSmall("palette entries must be distinct")
    if need is not None and len(palette) < need:
        raise PaletteTooSmall(f"need {need} colors, got {len(palette)}")
    if need is not None:
        palette = palette[:need]
    return palette


def generate(spec):
    """Build the layout for an architecture spec (kind, size, palette)."""
    if isinstance(spec, str):
        spec = ArchitectureSpec(kind=spec)
    kind, n = spec.kind, spec.n
    if kind == "crosspoint":
        return _gen_crosspoint(8 if n is None else n)
    if kind == "spanke_benes":
        return _gen_spanke_benes(8 if n is None else n)
    if kind == "piloss":
        return _gen_piloss(8 if n is None else n)
    if kind == "clos_benes_16":
        if n not in (None, 16):
            raise UnsupportedSize("clos_benes_16 is fixed at N=16")
        return _gen_clos_benes_16()
    if kind == "select_8to1":
        if n not in (None, 8):
            raise UnsupportedSize("select_8to1 is fixed at N=8")
        return _gen_select_8to1()
    if kind == "select_1to8":
        if n not in (None, 8):
            raise UnsupportedSize("select_1to8 is fixed at N=8")
        return _gen_select_1to8()
    if kind == "demux8":
        return _gen_demux8(spec.palette)
    if kind == "mux8":
        return _gen_mux8(spec.palette)
    if kind == "multicrossbar":
        return _gen_multicrossbar(spec.palette)
    if kind == "wss_6x6x4":
        pal = _check_palette(spec.palette, 4, PALETTE_4)
        return _gen_wss(kind, 6, pal, condition=True)
    if kind == "wss_8x8x3":
        pal = _check_palette(spec.palette, 3, PALETTE_3)
        return _gen_wss(kind, 8, pal, condition=False)
    if kind == "wcc_4x4x4":
        return _gen_wcc_4x4x4(spec.palette)
    raise UnsupportedSize(f"unknown architecture kind {kind!r}")


def assign_colors(layout, palette):
    """Retag every wavelength-dedicated placement from a new palette."""
    palette = tuple(float(x) for x in palette)
    if len(set(palette)) != len(palette):
        raise PaletteTooSmall("palette entries must be distinct")
    if len(palette) < len(layout.colors):
        raise PaletteTooSmall(
            f"layout uses {len(layout.colors)} colors, palette has {len(palette)}")
    lut = {old: palette[i] for i, old in enumerate(layout.colors)}
    cols = tuple(tuple(replace(p, color_nm=lut[p.color_nm])
                       if p.color_nm is not None else p
                       for p in col)
                 for col in layout.columns)
    return replace(layout, columns=cols,
                   colors=tuple(palette[:len(layout.colors)]))


# --- serialization -----------------------------------------------------------

def layout_to_json(layout):
    doc = {
        "kind": layout.kind,
        "n_rails": layout.n_rails,
        "input_rails": list(layout.input_rails),
        "output_rails": list(layout.output_rails),
        "colors": list(layout.colors),
        "columns": [
            {"placements": [
                {"rail": p.rail, "kind": p.kind, "control": p.control,
                 "color_nm": p.color_nm, "ambient": p.ambient,
                 "target": p.target}
                for p in col]}
            for col in layout.columns],
        "terminators": sorted([r, c] for r, c in layout.terminators),
        "meta": dict(layout.meta),
    }
    return doc


def layout_to_json_str(layout):
    return json.dumps(layout_to_json(layout), indent=2, sort_keys=True)


def layout_from_json(doc):
    if isinstance(doc, str):
        doc = json.loads(doc)
    cols = tuple(
        tuple(Placement(rail=p["rail"], kind=p["kind"],
                        control=p.get("control"), color_nm=p.get("color_nm"),
                        ambient=p.get("ambient", "cross"),
                        target=p.get("target"))
              for p in col["placements"])
        for col in doc["columns"])
    return CircuitLayout(
        kind=doc["kind"], n_rails=doc["n_rails"], columns=cols,
        input_rails=tuple(doc["input_rails"]),
        output_rails=tuple(doc["output_rails"]),
        terminators=frozenset((r, c) for r, c in doc.get("terminators", [])),
        colors=tuple(doc.get("colors", [])), meta=doc.get("meta", {}))
