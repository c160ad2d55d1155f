"""Reader for MATPOWER-style case files.

Only ``baseMVA`` and the ``bus``, ``gen``, ``branch`` and ``gencost`` tables
are read.  Loads and generator limits are converted to per-unit on the
system base; branch ratings stay in MVA because the polygon geometry works
in MVA.  Out-of-service branches and generators are dropped while parsing.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Literal

from .polygeom import CircleLimit

BusKind = Literal["slack", "pv", "pq"]
_BUS_TYPES = {1: "pq", 2: "pv", 3: "slack"}
_TYPE_CODES = {v: k for k, v in _BUS_TYPES.items()}
_MIN_COLS = {"bus": 13, "gen": 10, "branch": 11, "gencost": 4}


class CaseFormatError(ValueError):
    """Base class for case-file diagnostics; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class MissingTableError(CaseFormatError):
    pass


class MalformedRowError(CaseFormatError):
    pass


class UnknownBusError(CaseFormatError):
    pass


class InvalidBaseError(CaseFormatError):
    pass


class SlackBusError(CaseFormatError):
    pass


@dataclass(frozen=True)
class Bus:
    id: int
    kind: BusKind
    pd: float
    qd: float
    vmin: float
    vmax: float
    gs: float = 0.0
    bs: float = 0.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    rate_mva: float
    b: float = 0.0
    tap: float = 0.0
    shift: float = 0.0
    status: bool = True


@dataclass(frozen=True)
class Gen:
    bus: int
    pmin: float
    pmax: float
    qmin: float
    qmax: float
    status: bool = True


@dataclass(frozen=True)
class CostFn:
    """Polynomial cost ``c2*P**2 + c1*P + c0`` with ``P`` in MW."""

    coefficients: tuple[float, float, float]
    kind: str = "polynomial"
    startup: float = 0.0
    shutdown: float = 0.0

    def __call__(self, p_mw: float) -> float:
        c2, c1, c0 = self.coefficients
        return (c2 * p_mw + c1) * p_mw + c0


@dataclass(frozen=True)
class CaseData:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    gens: tuple[Gen, ...]
    costs: tuple[CostFn, ...]
    name: str = ""

    @property
    def slack(self) -> Bus:
        return next(b for b in self.buses if b.kind == "slack")

    def bus_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}


# tokenizing -------------------------------------------------------------------

_ASSIGN = re.compile(r"^\s*(?:\w+\.)?(\w+)\s*=\s*(.*)$")
_NUMBER = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")


def _number(tok: str, line: int) -> float:
    if not _NUMBER.match(tok) and tok.lower() not in ("inf", "-inf", "+inf"):
        raise MalformedRowError(f"not a number: {tok!r}", line)
    return float(tok)


def _scan(text: str):
    """Collect ``baseMVA`` and the raw numeric rows of each wanted table."""
    base = None
    tables: dict[str, list[tuple[int, list[float]]]] = {}
    current: str | None = None
    pending: list[str] = []
    pending_line = 0

    def flush():
        nonlocal pending
        if pending and current is not None:
            row = [_number(t, pending_line) for t in pending]
            tables[current].append((pending_line, row))
        pending = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0]
        if current is None:
            m = _ASSIGN.match(line)
            if not m:
                continue
            name, rest = m.group(1), m.group(2).strip()
            if name == "baseMVA":
                val = rest.rstrip(";").strip()
                try:
                    base = (float(val), lineno)
                except ValueError:
                    raise MalformedRowError(f"bad baseMVA value {val!r}", lineno) from None
                continue
            if name not in _MIN_COLS or not rest.startswith("["):
                continue
            current = name
            tables[current] = []
            line = rest[1:]
        # inside a table: rows end at ';' or at end of line
        closed = False
        if "]" in line:
            line, closed = line.split("]", 1)[0], True
        chunks = line.split(";")
        for k, chunk in enumerate(chunks):
            toks = chunk.replace(",", " ").split()
            if toks and not pending:
                pending_line = lineno
            pending.extend(toks)
            if k < len(chunks) - 1:
                flush()
        flush()
        if closed:
            current = None
    if current is not None:
        raise MalformedRowError(f"table '{current}' is never closed", None)
    return base, tables


# parsing ----------------------------------------------------------------------


def _require(tables, name):
    if name not in tables:
        raise MissingTableError(f"missing table '{name}'")
    rows = tables[name]
    for line, row in rows:
        if len(row) < _MIN_COLS[name]:
            raise MalformedRowError(
                f"{name} row has {len(row)} columns, need at least {_MIN_COLS[name]}", line
            )
    return rows


def _cost(line: int, row: list[float]) -> CostFn:
    model, startup, shutdown, n = row[0], row[1], row[2], row[3]
    if model != 2:
        raise MalformedRowError(f"only polynomial costs (model 2) are supported, got {model:g}", line)
    if n != int(n) or not 1 <= n <= 3:
        raise MalformedRowError(f"polynomial cost must have 1 to 3 coefficients, got n={n:g}", line)
    n = int(n)
    coeffs = row[4:4 + n]
    if len(coeffs) != n:
        raise MalformedRowError(f"cost row declares {n} coefficients but has {len(coeffs)}", line)
    padded = [0.0] * (3 - n) + coeffs
    return CostFn(coefficients=tuple(padded), startup=startup, shutdown=shutdown)


def parse_case(text: str, name: str = "") -> CaseData:
    base, tables = _scan(text)
    if base is None:
        raise MissingTableError("missing baseMVA")
    base_mva, base_line = base
    if not (math.isfinite(base_mva) and base_mva > 0):
        raise InvalidBaseError(f"baseMVA must be positive, got {base_mva:g}", base_line)
    bus_rows = _require(tables, "bus")
    gen_rows = _require(tables, "gen")
    branch_rows = _require(tables, "branch")
    cost_rows = _require(tables, "gencost")

    buses = []
    seen: dict[int, int] = {}
    slack_line = None
    for line, row in bus_rows:
        bid = int(row[0])
        code = int(row[1])
        if bid in seen:
            raise MalformedRowError(f"duplicate bus id {bid}", line)
        if code not in _BUS_TYPES:
            raise MalformedRowError(f"unsupported bus type {code} at bus {bid}", line)
        if code == 3:
            if slack_line is not None:
                raise SlackBusError(f"second slack bus {bid} (first at line {slack_line})", line)
            slack_line = line
        vmax, vmin = row[11], row[12]
        if vmin > vmax:
            raise MalformedRowError(f"bus {bid}: Vmin {vmin:g} exceeds Vmax {vmax:g}", line)
        seen[bid] = line
        buses.append(Bus(
            id=bid, kind=_BUS_TYPES[code], pd=row[2] / base_mva, qd=row[3] / base_mva,
            vmin=vmin, vmax=vmax, gs=row[4], bs=row[5],
        ))
    if slack_line is None:
        raise SlackBusError("no slack (type 3) bus")

    if len(cost_rows) < len(gen_rows):
        raise MissingTableError(
            f"gencost has {len(cost_rows)} rows for {len(gen_rows)} generators"
        )
    gens, costs = [], []
    for (line, row), (cline, crow) in zip(gen_rows, cost_rows):
        bus = int(row[0])
        if bus not in seen:
            raise UnknownBusError(f"generator at unknown bus {bus}", line)
        cost = _cost(cline, crow)
        if row[7] <= 0:
            continue
        pmin, pmax, qmin, qmax = row[9], row[8], row[4], row[3]
        if pmin > pmax or qmin > qmax:
            raise MalformedRowError(f"generator at bus {bus} has inverted limits", line)
        gens.append(Gen(bus=bus, pmin=pmin / base_mva, pmax=pmax / base_mva,
                        qmin=qmin / base_mva, qmax=qmax / base_mva))
        costs.append(cost)

    branches = []
    for line, row in branch_rows:
        f, t = int(row[0]), int(row[1])
        for end in (f, t):
            if end not in seen:
                raise UnknownBusError(f"branch {f}-{t} references unknown bus {end}", line)
        if row[10] <= 0:
            continue
        if row[3] == 0:
            raise MalformedRowError(f"branch {f}-{t} has zero reactance", line)
        if row[5] < 0:
            raise MalformedRowError(f"branch {f}-{t} has negative rating", line)
        tap = row[8] if len(row) > 8 else 0.0
        shift = row[9] if len(row) > 9 else 0.0
        branches.append(Branch(from_bus=f, to_bus=t, r=row[2], x=row[3], b=row[4],
                               rate_mva=row[5], tap=tap, shift=shift))

    return CaseData(base_mva=base_mva, buses=tuple(buses), branches=tuple(branches),
                    gens=tuple(gens), costs=tuple(costs), name=name)


def branch_limits(case: CaseData) -> list[CircleLimit]:
    """One limit per rated in-service branch; ``index`` is the branch position."""
    return [CircleLimit(br.rate_mva, index=k)
            for k, br in enumerate(case.branches) if br.status and br.rate_mva > 0]


# bundled fixtures -----------------------------------------------------------------


def bundled_cases() -> list[str]:
    files = resources.files("branchpoly") / "data"
    return sorted(p.name[:-2] for p in files.iterdir() if p.name.endswith(".m"))


def resolve_case(ref: str | Path) -> Path:
    """Accept a file path or the name of a bundled case (``case30``, ``2bus``)."""
    path = Path(ref)
    if path.is_file():
        return path
    stem = path.name[:-2] if path.name.endswith(".m") else path.name
    for cand in (stem, "case" + stem):
        res = resources.files("branchpoly") / "data" / f"{cand}.m"
        if res.is_file():
            return Path(str(res))
    raise FileNotFoundError(f"no such case file or bundled case: {ref}")


def load_case(ref: str | Path) -> CaseData:
    path = resolve_case(ref)
    return parse_case(path.read_text(), name=path.stem)


# serialization ---------------------------------------------------------------------


def _scaled(pu: float, base: float) -> str:
    """Text for ``pu * base`` that parses back to exactly ``pu`` after division."""
    x = pu * base
    if x / base == pu:
        return repr(x)
    lo = hi = x
    for _ in range(8):
        lo, hi = math.nextafter(lo, -math.inf), math.nextafter(hi, math.inf)
        for cand in (lo, hi):
            if cand / base == pu:
                return repr(cand)
    return repr(x)


def dump_case(case: CaseData) -> str:
    """Emit ``case`` as a MATPOWER-style text that parses back to an equal CaseData."""
    base = case.base_mva
    name = case.name or "case"
    out = [f"function mpc = {name}", "mpc.version = '2';", f"mpc.baseMVA = {base!r};", ""]
    out.append("%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin")
    out.append("mpc.bus = [")
    for b in case.buses:
        cols = [str(b.id), str(_TYPE_CODES[b.kind]), _scaled(b.pd, base), _scaled(b.qd, base),
                repr(b.gs), repr(b.bs), "1", "1", "0", "0", "1", repr(b.vmax), repr(b.vmin)]
        out.append("\t" + "\t".join(cols) + ";")
    out += ["];", ""]
    out.append("%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin")
    out.append("mpc.gen = [")
    for g in case.gens:
        cols = [str(g.bus), "0", "0", _scaled(g.qmax, base), _scaled(g.qmin, base), "1",
                repr(base), "1", _scaled(g.pmax, base), _scaled(g.pmin, base)]
        out.append("\t" + "\t".join(cols) + ";")
    out += ["];", ""]
    out.append("%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus")
    out.append("mpc.branch = [")
    for br in case.branches:
        cols = [str(br.from_bus), str(br.to_bus), repr(br.r), repr(br.x), repr(br.b),
                repr(br.rate_mva), repr(br.rate_mva), repr(br.rate_mva), repr(br.tap),
                repr(br.shift), "1"]
        out.append("\t" + "\t".join(cols) + ";")
    out += ["];", ""]
    out.append("%\t2\tstartup\tshutdown\tn\tc2\tc1\tc0")
    out.append("mpc.gencost = [")
    for c in case.costs:
        cols = ["2", repr(c.startup), repr(c.shutdown), "3"] + [repr(v) for v in c.coefficients]
        out.append("\t" + "\t".join(cols) + ";")
    out += ["];", ""]
    return "\n".join(out)


def case_to_json(case: CaseData) -> str:
    doc = dataclasses.asdict(case)
    for br in doc["branches"]:
        br["from"] = br.pop("from_bus")
        br["to"] = br.pop("to_bus")
    return json.dumps(doc, indent=1)
