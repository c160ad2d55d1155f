"""Linear optimal power flow with polygonal branch apparent-power limits.

Network model: a flat-start, first-order decoupled linearization.  For a
branch ``i -> j`` with series admittance ``g + jb`` (``g = r/(r^2+x^2)``,
``b = -x/(r^2+x^2)``)::

    p_ij = g (v_i - v_j) - b (delta_i - delta_j)
    q_ij = -b (v_i - v_j) - g (delta_i - delta_j)

so ``p_ij = -p_ji`` and the network is lossless.  Line charging, taps and
shunts are ignored.  Each rated branch's disk limit is replaced by the
half-planes of an inscribed regular or irregular polygon, applied to the
flow in MVA.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import lp
from .caseio import CaseData
from .halfplanes import ConstraintSet, polygon_to_constraints
from .polygeom import CircleLimit, DomainError, Kind, build_polygon

logger = logging.getLogger(__name__)

COST_SEGMENTS = 10
BALANCE_TOL = 1e-6
BINDING_TOL = 1e-7


class OpfError(RuntimeError):
    """Base class for LOPF solve failures."""


class OpfInfeasibleError(OpfError):
    def __init__(self, family: str):
        self.family = family
        super().__init__(f"linear OPF is infeasible; violated row family: {family}")


class OpfModelError(OpfError):
    pass


@dataclass(frozen=True)
class LinearFlowModel:
    """Per-branch coefficient rows mapping the ``[v, delta]`` block to p.u. flows."""

    p_coef: np.ndarray  # shape (n_branch, 2 * n_bus)
    q_coef: np.ndarray

    @classmethod
    def from_case(cls, case: CaseData) -> "LinearFlowModel":
        nb = len(case.buses)
        idx = case.bus_index()
        p = np.zeros((len(case.branches), 2 * nb))
        q = np.zeros_like(p)
        for k, br in enumerate(case.branches):
            z2 = br.r * br.r + br.x * br.x
            g, b = br.r / z2, -br.x / z2
            i, j = idx[br.from_bus], idx[br.to_bus]
            p[k, i], p[k, j] = g, -g
            p[k, nb + i], p[k, nb + j] = -b, b
            q[k, i], q[k, j] = -b, b
            q[k, nb + i], q[k, nb + j] = -g, g
        return cls(p, q)


@dataclass
class LopfModel:
    problem: lp.LpProblem
    case: CaseData
    flow: LinearFlowModel
    constraint_sets: dict[int, ConstraintSet]
    polygon_rows: dict[int, slice]
    offset: float
    kind: Kind
    e: float

    @property
    def n_bus(self) -> int:
        return len(self.case.buses)

    @property
    def n_gen(self) -> int:
        return len(self.case.gens)

    @property
    def n_polygon_rows(self) -> int:
        return sum(len(cs) for cs in self.constraint_sets.values())


@dataclass
class OpfSolution:
    objective: float
    v: dict[int, float]
    delta: dict[int, float]
    pg: list[float]
    qg: list[float]
    flows: list[tuple[float, float]]
    binding: list[tuple[int, int]]
    kind: Kind = "irregular"
    e: float = 0.0
    max_balance_residual: float = 0.0
    polygon_rows: int = 0
    iterations: int = 0
    limits: list[CircleLimit] = field(default_factory=list)

    def to_json(self) -> str:
        norm = normalized_flows(self, self.limits)
        doc = {
            "objective": self.objective,
            "kind": self.kind,
            "e": self.e,
            "polygon_rows": self.polygon_rows,
            "v": {str(k): val for k, val in self.v.items()},
            "delta": {str(k): val for k, val in self.delta.items()},
            "pg": self.pg,
            "qg": self.qg,
            "flows": [{"branch": k, "p": p, "q": q} for k, (p, q) in enumerate(self.flows)],
            "normalized_flows": [
                {"branch": lim.index, "p": p, "q": q} for lim, (p, q) in zip(self.limits, norm)
            ],
            "binding": [{"branch": b, "side_index": s} for b, s in self.binding],
        }
        return json.dumps(doc, indent=1)


def _cost_terms(case: CaseData):
    """Split generator costs into linear coefficients, epigraph cuts and a constant."""
    base = case.base_mva
    lin = np.zeros(len(case.gens))
    cuts = []  # (gen, slope $/h per p.u., intercept $/h)
    offset = 0.0
    for k, (gen, cost) in enumerate(zip(case.gens, case.costs)):
        c2, c1, c0 = cost.coefficients
        lo, hi = gen.pmin * base, gen.pmax * base
        if hi == lo:
            offset += cost(lo)
        elif c2 == 0:
            lin[k] = c1 * base
            offset += c0
        else:
            # secants of a convex quadratic; their maximum is the interpolant
            pts = np.linspace(lo, hi, COST_SEGMENTS + 1)
            vals = np.array([cost(x) for x in pts])
            for s in range(COST_SEGMENTS):
                slope = (vals[s + 1] - vals[s]) / (pts[s + 1] - pts[s])
                cuts.append((k, slope * base, vals[s] - slope * pts[s]))
    return lin, cuts, offset


def assemble(case: CaseData, e: float, kind: Kind, with_polygons: bool = True) -> LopfModel:
    nb, ng = len(case.buses), len(case.gens)
    base = case.base_mva
    idx = case.bus_index()
    flow = LinearFlowModel.from_case(case)
    lin, cuts, offset = _cost_terms(case)
    cut_gens = sorted({k for k, _, _ in cuts})
    tcol = {k: 2 * nb + 2 * ng + pos for pos, k in enumerate(cut_gens)}
    n = 2 * nb + 2 * ng + len(cut_gens)

    names = ([f"v[{b.id}]" for b in case.buses] + [f"delta[{b.id}]" for b in case.buses]
             + [f"pg[{k}]" for k in range(ng)] + [f"qg[{k}]" for k in range(ng)]
             + [f"cost[{k}]" for k in cut_gens])

    c = np.zeros(n)
    c[2 * nb:2 * nb + ng] = lin
    for k in cut_gens:
        c[tcol[k]] = 1.0

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    for i, bus in enumerate(case.buses):
        if bus.vmin > bus.vmax:
            raise DomainError(f"bus {bus.id}: vmin exceeds vmax")
        if bus.kind == "slack":
            lower[i] = upper[i] = 1.0
            lower[nb + i] = upper[nb + i] = 0.0
        else:
            lower[i], upper[i] = bus.vmin, bus.vmax
    for k, gen in enumerate(case.gens):
        lower[2 * nb + k], upper[2 * nb + k] = gen.pmin, gen.pmax
        lower[2 * nb + ng + k], upper[2 * nb + ng + k] = gen.qmin, gen.qmax

    # nodal balance: outgoing flow - generation = -load
    a_eq = np.zeros((2 * nb, n))
    b_eq = np.zeros(2 * nb)
    for k, br in enumerate(case.branches):
        i, j = idx[br.from_bus], idx[br.to_bus]
        a_eq[i, :2 * nb] += flow.p_coef[k]
        a_eq[j, :2 * nb] -= flow.p_coef[k]
        a_eq[nb + i, :2 * nb] += flow.q_coef[k]
        a_eq[nb + j, :2 * nb] -= flow.q_coef[k]
    for k, gen in enumerate(case.gens):
        i = idx[gen.bus]
        a_eq[i, 2 * nb + k] -= 1.0
        a_eq[nb + i, 2 * nb + ng + k] -= 1.0
    for i, bus in enumerate(case.buses):
        b_eq[i], b_eq[nb + i] = -bus.pd, -bus.qd
    eq_names = [f"pbal[{b.id}]" for b in case.buses] + [f"qbal[{b.id}]" for b in case.buses]

    rows, rhs, ge_names = [], [], []
    for k, slope, icpt in cuts:
        row = np.zeros(n)
        row[tcol[k]] = 1.0
        row[2 * nb + k] = -slope
        rows.append(row)
        rhs.append(icpt)
        ge_names.append(f"costcut[{k}]")

    sets: dict[int, ConstraintSet] = {}
    spans: dict[int, slice] = {}
    if with_polygons:
        for k, br in enumerate(case.branches):
            if br.rate_mva <= 0:
                continue
            limit = CircleLimit(br.rate_mva, index=k)
            try:
                cs = polygon_to_constraints(build_polygon(limit, e, kind), branch=k)
            except DomainError as exc:
                raise DomainError(f"branch {k} ({br.from_bus}-{br.to_bus}): {exc}") from exc
            sets[k] = cs
            start = len(rows)
            for side, h in enumerate(cs.halfplanes, start=1):
                row = np.zeros(n)
                row[:2 * nb] = base * (h.a * flow.p_coef[k] + h.b * flow.q_coef[k])
                rows.append(row)
                rhs.append(-h.c)
                ge_names.append(f"limit[{k},{side}]")
            spans[k] = slice(start, len(rows))

    a_ge = np.array(rows) if rows else np.zeros((0, n))
    problem = lp.LpProblem(c=c, a_eq=a_eq, b_eq=b_eq, a_ge=a_ge, b_ge=np.array(rhs),
                           lower=lower, upper=upper, var_names=names, eq_names=eq_names,
                           ge_names=ge_names)
    return LopfModel(problem=problem, case=case, flow=flow, constraint_sets=sets,
                     polygon_rows=spans, offset=offset, kind=kind, e=e)


def build_model(case: CaseData, e: float, kind: Kind) -> lp.LpProblem:
    return assemble(case, e, kind).problem


def _diagnose(model: LopfModel) -> str:
    """Name the first row family whose removal makes the model feasible."""
    p = model.problem
    nb, ng = model.n_bus, model.n_gen
    families = []

    poly = np.array([not n.startswith("limit[") for n in p.ge_names], dtype=bool)
    families.append(("branch polygon limits",
                     replace(p, a_ge=p.a_ge[poly], b_ge=p.b_ge[poly],
                             ge_names=[n for n, keep in zip(p.ge_names, poly) if keep])))

    def relaxed(cols):
        lo, up = p.lower.copy(), p.upper.copy()
        lo[cols], up[cols] = -np.inf, np.inf
        return replace(p, lower=lo, upper=up)

    vcols = [i for i, b in enumerate(model.case.buses) if b.kind != "slack"]
    families.append(("bus voltage bounds", relaxed(vcols)))
    families.append(("generator reactive-power limits", relaxed(range(2 * nb + ng, 2 * nb + 2 * ng))))
    families.append(("generator active-power limits", relaxed(range(2 * nb, 2 * nb + ng))))
    for name, prob in families:
        if lp.solve(prob).status != "infeasible":
            return name
    return "nodal power balance"


def solve_model(model: LopfModel) -> OpfSolution:
    p = model.problem
    sol = lp.solve(p)
    if sol.status == "infeasible":
        raise OpfInfeasibleError(_diagnose(model))
    if sol.status == "unbounded":
        raise OpfModelError("linear OPF is unbounded; check generator limits and costs")

    case = model.case
    nb, ng = model.n_bus, model.n_gen
    base = case.base_mva
    x = sol.x
    vd = x[:2 * nb]
    p_mva = base * (model.flow.p_coef @ vd)
    q_mva = base * (model.flow.q_coef @ vd)
    binding = []
    for k, span in model.polygon_rows.items():
        cs = model.constraint_sets[k]
        for side, h in enumerate(cs.halfplanes, start=1):
            if h.value(p_mva[k], q_mva[k]) <= BINDING_TOL * cs.limit.s:
                binding.append((k, side))
    residual = float(np.max(np.abs(p.a_eq @ x - p.b_eq))) if p.b_eq.size else 0.0
    if residual > BALANCE_TOL:
        logger.warning("balance residual %.3g exceeds %.1g", residual, BALANCE_TOL)
    limits = [cs.limit for _, cs in sorted(model.constraint_sets.items())]
    return OpfSolution(
        objective=sol.objective + model.offset,
        v={b.id: float(x[i]) for i, b in enumerate(case.buses)},
        delta={b.id: float(x[nb + i]) for i, b in enumerate(case.buses)},
        pg=[float(v) for v in x[2 * nb:2 * nb + ng]],
        qg=[float(v) for v in x[2 * nb + ng:2 * nb + 2 * ng]],
        flows=[(float(a), float(b)) for a, b in zip(p_mva, q_mva)],
        binding=binding,
        kind=model.kind,
        e=model.e,
        max_balance_residual=residual,
        polygon_rows=model.n_polygon_rows,
        iterations=sol.iterations,
        limits=limits,
    )


def solve_opf(case: CaseData, e: float, kind: Kind) -> OpfSolution:
    return solve_model(assemble(case, e, kind))


def normalized_flows(sol: OpfSolution, limits: list[CircleLimit]) -> list[tuple[float, float]]:
    out = []
    for lim in limits:
        p, q = sol.flows[lim.index]
        out.append((p / lim.s, q / lim.s))
    return out


def flows_csv(sol: OpfSolution) -> str:
    lines = ["branch,s_mva,p_mva,q_mva,p_norm,q_norm"]
    rated = {lim.index: lim.s for lim in sol.limits}
    for k, (p, q) in enumerate(sol.flows):
        s = rated.get(k)
        if s is None:
            lines.append(f"{k},,{p:.12g},{q:.12g},,")
        else:
            lines.append(f"{k},{s:.12g},{p:.12g},{q:.12g},{p / s:.12g},{q / s:.12g}")
    return "\n".join(lines) + "\n"


__all__ = [
    "LinearFlowModel", "LopfModel", "assemble", "OpfSolution", "OpfError", "OpfInfeasibleError",
    "OpfModelError", "build_model", "solve_opf", "solve_model", "normalized_flows",
    "flows_csv",
]
