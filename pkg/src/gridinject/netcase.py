"""MATPOWER case parsing, bus indexing and case replication.

Only the columns the injection kernels need are captured:

* bus:    BUS_I, GS, BS, VM, VA
* branch: F_BUS, T_BUS, BR_R, BR_X, BR_B, TAP, SHIFT, BR_STATUS

Everything else in the file (gen, gencost, areas, extra columns) is ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    CaseParseError,
    CaseStructureError,
    CaseValidationError,
    DomainError,
    IndexingError,
    SingularBranchError,
)

# 0-based MATPOWER column positions
BUS_I, GS, BS, VM, VA = 0, 4, 5, 7, 8
F_BUS, T_BUS, BR_R, BR_X, BR_B, TAP, SHIFT, BR_STATUS = 0, 1, 2, 3, 4, 8, 9, 10

_BLOCK_START = re.compile(r"^\s*(?:\w+\.)?(\w+)\s*=\s*([\[{])(.*)$")
_BASE_MVA = re.compile(r"^\s*(?:\w+\.)?baseMVA\s*=\s*([^;%]+)")
_FUNCTION = re.compile(r"^\s*function\s+(?:\w+\s*=\s*)?(\w+)")


@dataclass(frozen=True)
class RawCase:
    """Captured MATPOWER columns, in file units (MW/MVAr at 1 pu, degrees)."""

    base_mva: float
    bus_id: np.ndarray
    gs: np.ndarray
    bs: np.ndarray
    vm: np.ndarray
    va: np.ndarray
    f_bus: np.ndarray
    t_bus: np.ndarray
    r: np.ndarray
    x: np.ndarray
    b: np.ndarray
    tap: np.ndarray
    shift: np.ndarray
    status: np.ndarray
    name: str = "case"

    @property
    def n_buses(self) -> int:
        return len(self.bus_id)

    @property
    def n_branches(self) -> int:
        return len(self.f_bus)


@dataclass(frozen=True)
class IndexedNetwork:
    """Network with contiguous 0-based bus numbering, all quantities in pu/rad.

    Branch arrays hold in-service branches only, in file order.
    """

    n_b: int
    from_idx: np.ndarray
    to_idx: np.ndarray
    y_series: np.ndarray
    y_sh_from: np.ndarray
    y_sh_to: np.ndarray
    tap_m: np.ndarray
    tap_phi: np.ndarray
    bus_shunt: np.ndarray
    vm0: np.ndarray
    va0: np.ndarray
    name: str = "case"
    has_self_loops: bool = False
    bus_ids: np.ndarray = field(default=None, repr=False)

    @property
    def n_l(self) -> int:
        return len(self.from_idx)


def _strip_comment(line: str) -> str:
    # '%' inside a quoted string is not a comment
    in_quote = False
    for i, ch in enumerate(line):
        if ch == "'":
            in_quote = not in_quote
        elif ch == "%" and not in_quote:
            return line[:i]
    return line


def _to_float(token: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise CaseParseError(f"malformed numeric token {token!r}", lineno) from None


def _read_blocks(text: str):
    """Return (base_mva, name, {block: [(lineno, [tokens]), ...]})."""
    base_mva = None
    name = None
    blocks: dict[str, list[tuple[int, list[str]]]] = {}
    current = None
    closer = "]"

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if current is None:
            if name is None:
                m = _FUNCTION.match(line)
                if m:
                    name = m.group(1)
                    continue
            m = _BASE_MVA.match(line)
            if m:
                base_mva = _to_float(m.group(1).strip(), lineno)
                continue
            m = _BLOCK_START.match(line)
            if not m:
                continue
            current = m.group(1)
            closer = "]" if m.group(2) == "[" else "}"
            rows = blocks.setdefault(current, []) if closer == "]" else None
            if rows is not None and rows:
                raise CaseValidationError(f"block {current!r} defined twice (line {lineno})")
            line = m.group(3)

        end = line.find(closer)
        body = line if end < 0 else line[:end]
        if closer == "]":
            # ';' and newline both terminate a matrix row
            for piece in body.split(";"):
                tokens = piece.replace(",", " ").split()
                if tokens:
                    blocks[current].append((lineno, tokens))
        if end >= 0:
            current = None

    if current is not None:
        raise CaseStructureError(f"block {current!r} is not closed")
    return base_mva, name, blocks


def _numeric_rows(rows, block: str, min_cols: int) -> np.ndarray:
    out = np.empty((len(rows), min_cols))
    for r, (lineno, tokens) in enumerate(rows):
        if len(tokens) < min_cols:
            raise CaseStructureError(
                f"{block} row at line {lineno} has {len(tokens)} columns, need {min_cols}"
            )
        for c in range(min_cols):
            out[r, c] = _to_float(tokens[c], lineno)
    return out


def _as_ids(values: np.ndarray, what: str) -> np.ndarray:
    ids = values.astype(np.int64)
    if not np.array_equal(ids, values):
        raise CaseValidationError(f"non-integer {what}")
    return ids


def parse_matpower(text: str, name: str | None = None) -> RawCase:
    """Parse MATPOWER ``.m`` case text into a :class:`RawCase`.

    Rows of the ``bus`` and ``branch`` matrices are captured whole, including
    out-of-service branches. Angles stay in degrees.
    """
    base_mva, func_name, blocks = _read_blocks(text)
    if base_mva is None:
        raise CaseStructureError("missing baseMVA")
    if not base_mva > 0:
        raise CaseValidationError(f"baseMVA must be positive, got {base_mva}")
    for required in ("bus", "branch"):
        if required not in blocks:
            raise CaseStructureError(f"missing {required} block")

    bus = _numeric_rows(blocks["bus"], "bus", VA + 1)
    branch = _numeric_rows(blocks["branch"], "branch", BR_STATUS + 1)

    bus_id = _as_ids(bus[:, BUS_I], "bus id")
    uniq, counts = np.unique(bus_id, return_counts=True)
    if np.any(counts > 1):
        raise CaseValidationError(f"duplicate bus id {uniq[counts > 1][0]}")

    f_bus = _as_ids(branch[:, F_BUS], "branch from-bus")
    t_bus = _as_ids(branch[:, T_BUS], "branch to-bus")

    return RawCase(
        base_mva=float(base_mva),
        bus_id=bus_id,
        gs=bus[:, GS].copy(),
        bs=bus[:, BS].copy(),
        vm=bus[:, VM].copy(),
        va=bus[:, VA].copy(),
        f_bus=f_bus,
        t_bus=t_bus,
        r=branch[:, BR_R].copy(),
        x=branch[:, BR_X].copy(),
        b=branch[:, BR_B].copy(),
        tap=branch[:, TAP].copy(),
        shift=branch[:, SHIFT].copy(),
        status=branch[:, BR_STATUS].astype(np.int64),
        name=name or func_name or "case",
    )


def format_matpower(case: RawCase) -> str:
    """Serialize the captured columns back to MATPOWER text.

    Unused columns are written as zeros; floats use ``repr`` so that parsing
    the output reproduces every captured value exactly.
    """
    lines = [f"function mpc = {case.name}", "mpc.version = '2';",
             f"mpc.baseMVA = {case.base_mva!r};", "", "mpc.bus = ["]
    for i in range(case.n_buses):
        row = ["0"] * (VA + 1)
        row[BUS_I] = str(case.bus_id[i])
        row[1] = "1"
        row[GS], row[BS] = repr(float(case.gs[i])), repr(float(case.bs[i]))
        row[VM], row[VA] = repr(float(case.vm[i])), repr(float(case.va[i]))
        lines.append("\t" + "\t".join(row) + ";")
    lines += ["];", "", "mpc.branch = ["]
    for i in range(case.n_branches):
        row = ["0"] * (BR_STATUS + 1)
        row[F_BUS], row[T_BUS] = str(case.f_bus[i]), str(case.t_bus[i])
        for col, arr in ((BR_R, case.r), (BR_X, case.x), (BR_B, case.b),
                         (TAP, case.tap), (SHIFT, case.shift)):
            row[col] = repr(float(arr[i]))
        row[BR_STATUS] = str(case.status[i])
        lines.append("\t" + "\t".join(row) + ";")
    lines.append("];")
    return "\n".join(lines) + "\n"


def index_network(case: RawCase, allow_self_loops: bool = False) -> IndexedNetwork:
    """Map bus ids to 0..n_b-1 in file order and convert to pu/radians."""
    lookup = {int(bid): i for i, bid in enumerate(case.bus_id)}
    live = case.status != 0

    try:
        from_idx = np.array([lookup[int(b)] for b in case.f_bus[live]], dtype=np.int64)
        to_idx = np.array([lookup[int(b)] for b in case.t_bus[live]], dtype=np.int64)
    except KeyError as exc:
        raise IndexingError(f"branch references unknown bus id {exc.args[0]}") from None

    r, x = case.r[live], case.x[live]
    dead = (r == 0) & (x == 0)
    if np.any(dead):
        first = int(np.flatnonzero(live)[np.flatnonzero(dead)[0]])
        raise SingularBranchError(f"branch {first} has r = x = 0")

    loops = from_idx == to_idx
    if np.any(loops) and not allow_self_loops:
        raise CaseValidationError(
            f"branch {int(np.flatnonzero(live)[np.flatnonzero(loops)[0]])} connects a bus to itself"
        )

    tap = case.tap[live].astype(float)
    tap = np.where(tap == 0.0, 1.0, tap)
    if np.any(tap <= 0):
        raise CaseValidationError("tap ratio must be positive")
    y_sh = 0.5j * case.b[live]

    return IndexedNetwork(
        n_b=case.n_buses,
        from_idx=from_idx,
        to_idx=to_idx,
        y_series=1.0 / (r + 1j * x),
        y_sh_from=y_sh.copy(),
        y_sh_to=y_sh.copy(),
        tap_m=tap,
        tap_phi=np.deg2rad(case.shift[live]),
        bus_shunt=(case.gs + 1j * case.bs) / case.base_mva,
        vm0=case.vm.astype(float).copy(),
        va0=np.deg2rad(case.va),
        name=case.name,
        has_self_loops=bool(np.any(loops)),
        bus_ids=case.bus_id.copy(),
    )


def replicate_case(net: IndexedNetwork, k: int) -> IndexedNetwork:
    """Stack ``k`` uncoupled copies of ``net``; copy ``c`` owns buses ``c*n_b ..``."""
    if k < 1:
        raise DomainError(f"replication factor must be >= 1, got {k}")
    if k == 1:
        return net
    offsets = np.repeat(np.arange(k, dtype=np.int64) * net.n_b, net.n_l)
    return IndexedNetwork(
        n_b=k * net.n_b,
        from_idx=np.tile(net.from_idx, k) + offsets,
        to_idx=np.tile(net.to_idx, k) + offsets,
        y_series=np.tile(net.y_series, k),
        y_sh_from=np.tile(net.y_sh_from, k),
        y_sh_to=np.tile(net.y_sh_to, k),
        tap_m=np.tile(net.tap_m, k),
        tap_phi=np.tile(net.tap_phi, k),
        bus_shunt=np.tile(net.bus_shunt, k),
        vm0=np.tile(net.vm0, k),
        va0=np.tile(net.va0, k),
        name=f"{net.name}x{k}",
        has_self_loops=net.has_self_loops,
        bus_ids=None,
    )


def bundled_cases() -> list[str]:
    """Names of the MATPOWER cases shipped with the package."""
    root = resources.files(__package__) / "cases"
    return sorted(p.name[:-2] for p in root.iterdir() if p.name.endswith(".m"))


def resolve_case_path(case: str | Path) -> Path:
    """Return an existing path for ``case``, falling back to bundled cases by stem."""
    path = Path(case)
    if path.exists():
        return path
    stem = path.name[:-2] if path.name.endswith(".m") else path.name
    bundled = resources.files(__package__) / "cases" / f"{stem}.m"
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"no case file {case!s} (bundled: {', '.join(bundled_cases())})")


def load_case(case: str | Path, allow_self_loops: bool = False) -> IndexedNetwork:
    """Read, parse and index a case file or bundled case name."""
    path = resolve_case_path(case)
    raw = parse_matpower(path.read_text(encoding="utf-8", errors="replace"), name=path.stem)
    return index_network(raw, allow_self_loops=allow_self_loops)
