"""Core data model for dual-fleet delivery routing with in-motion charging.

Customers 1..n (hospitals) are served by battery-electric medical transport
vehicles (MTEVs). Mobile charging trucks (MCTs) can recharge an MTEV while
both drive the same arc. Node 0 is the departure depot and node n+1 is its
physical copy acting as the return depot, so the distance matrix is
(n+2) x (n+2). Travel time equals distance throughout (one matrix serves
both roles).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

EPS = 1e-6

CONSTRAINT_FAMILIES = (
    "flow",
    "coverage",
    "timing",
    "sync",
    "energy-mtev",
    "energy-mct",
    "capacity",
    "usage",
)

INSTANCE_FIELDS = (
    "n", "dist", "demand", "P", "B", "Q", "rho_t", "rho_e", "rho_c",
    "gamma", "phi", "max_mtev", "max_mct",
)


class RouteStructureError(ValueError):
    """A route or pattern is malformed: missing depot anchors, bad width."""


class InfeasibleInstanceError(RuntimeError):
    """No coverage-complete solution can exist for the instance."""


@dataclass(eq=False)
class Instance:
    """Immutable problem data. Safe to share across concurrent workers."""

    n: int
    dist: np.ndarray          # (n+2) x (n+2) symmetric distances, zero diagonal
    demand: list[int]         # demand[i-1] is the demand of customer i
    P: float                  # MTEV battery capacity
    B: float                  # MCT battery capacity
    Q: float                  # MTEV load capacity
    rho_t: float              # MTEV energy consumed per unit distance
    rho_e: float              # acquisition cost per deployed MTEV
    rho_c: float              # acquisition cost per deployed MCT
    gamma: float              # energy delivered per unit distance while co-traveling
    phi: float                # MCT energy consumed per unit distance
    max_mtev: int
    max_mct: int
    big_m: float = 1e5        # reporting constant only; no big-M reformulation here

    def __post_init__(self):
        self.dist = np.asarray(self.dist, dtype=float)
        self.demand = [int(d) for d in self.demand]
        self.validate()

    @property
    def depot_end(self) -> int:
        return self.n + 1

    @property
    def customers(self) -> range:
        return range(1, self.n + 1)

    def demand_of(self, node: int) -> int:
        return self.demand[node - 1]

    def route_distance(self, nodes) -> float:
        d = self.dist
        total = 0.0
        for i, j in zip(nodes, nodes[1:]):
            total += d[i, j]
        return float(total)

    def validate(self) -> None:
        size = self.n + 2
        if self.dist.shape != (size, size):
            raise ValueError(f"dist must be {size}x{size}, got {self.dist.shape}")
        if not np.array_equal(self.dist, self.dist.T):
            raise ValueError("dist must be symmetric")
        if (self.dist < 0).any():
            raise ValueError("dist entries must be nonnegative")
        if np.diagonal(self.dist).any():
            raise ValueError("dist diagonal must be zero")
        if not np.array_equal(self.dist[-1], self.dist[0]):
            raise ValueError("row for node n+1 must equal row for node 0")
        if len(self.demand) != self.n:
            raise ValueError(f"expected {self.n} demands, got {len(self.demand)}")
        if any(d < 1 for d in self.demand):
            raise ValueError("demands must be >= 1")
        for name in ("P", "B", "Q", "rho_t", "rho_e", "rho_c", "gamma", "phi"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.max_mtev < 0 or self.max_mct < 0:
            raise ValueError("fleet caps must be >= 0")
        if self.gamma <= self.rho_t:
            warnings.warn(
                "gamma <= rho_t: in-motion charging yields no net energy gain",
                stacklevel=2,
            )

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "dist": [[float(x) for x in row] for row in self.dist],
            "demand": list(self.demand),
            "P": float(self.P),
            "B": float(self.B),
            "Q": float(self.Q),
            "rho_t": float(self.rho_t),
            "rho_e": float(self.rho_e),
            "rho_c": float(self.rho_c),
            "gamma": float(self.gamma),
            "phi": float(self.phi),
            "max_mtev": int(self.max_mtev),
            "max_mct": int(self.max_mct),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Instance":
        missing = [k for k in INSTANCE_FIELDS if k not in data]
        if missing:
            raise ValueError(f"instance JSON missing fields: {missing}")
        return cls(**{k: data[k] for k in INSTANCE_FIELDS})

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, sort_keys=True)

    @classmethod
    def load(cls, path) -> "Instance":
        with open(path) as f:
            return cls.from_json(json.load(f))


@dataclass
class Route:
    """Ordered node sequence of one vehicle: depot 0 ... depot n+1."""

    vehicle: int
    nodes: list[int]

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.nodes, self.nodes[1:]))

    @property
    def interior(self) -> list[int]:
        return self.nodes[1:-1]

    def serves_customers(self) -> bool:
        return len(self.nodes) > 2

    def copy(self) -> "Route":
        return Route(self.vehicle, list(self.nodes))


def make_route(vehicle: int, interior, inst: Instance) -> Route:
    return Route(vehicle, [0, *interior, inst.depot_end])


@dataclass
class Violation:
    family: str               # one of CONSTRAINT_FAMILIES
    vehicle: str              # "mtev:3", "mct:0", or "" for global findings
    detail: str
    magnitude: float = 0.0


@dataclass
class FeasibilityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def families(self) -> set[str]:
        return {v.family for v in self.violations}

    def __str__(self) -> str:
        if self.passed:
            return "feasible"
        lines = [f"{len(self.violations)} violation(s):"]
        for v in self.violations:
            lines.append(f"  [{v.family}] {v.vehicle} {v.detail} (magnitude {v.magnitude:g})")
        return "\n".join(lines)


@dataclass
class Solution:
    """Routes for both fleets plus per-edge charging assignments and traces.

    charge_assign[r][e] is the serving MCT index for edge e of MTEV route r,
    or None when no charging happens on that edge.
    """

    mtev_routes: list[Route] = field(default_factory=list)
    charge_assign: list[list[int | None]] = field(default_factory=list)
    mct_routes: list[Route] = field(default_factory=list)
    mtev_times: list[list[float]] = field(default_factory=list)
    mct_times: list[list[float]] = field(default_factory=list)
    mtev_battery: list[list[float]] = field(default_factory=list)
    mct_battery: list[list[float]] = field(default_factory=list)
    used_mtev: list[bool] = field(default_factory=list)
    used_mct: list[bool] = field(default_factory=list)
    total_cost: float = 0.0

    @classmethod
    def from_routes(cls, routes: list[Route]) -> "Solution":
        return cls(
            mtev_routes=[r.copy() for r in routes],
            charge_assign=[[None] * (len(r.nodes) - 1) for r in routes],
        )

    def copy(self) -> "Solution":
        return Solution(
            mtev_routes=[r.copy() for r in self.mtev_routes],
            charge_assign=[list(a) for a in self.charge_assign],
            mct_routes=[r.copy() for r in self.mct_routes],
            mtev_times=[list(t) for t in self.mtev_times],
            mct_times=[list(t) for t in self.mct_times],
            mtev_battery=[list(b) for b in self.mtev_battery],
            mct_battery=[list(b) for b in self.mct_battery],
            used_mtev=list(self.used_mtev),
            used_mct=list(self.used_mct),
            total_cost=self.total_cost,
        )

    def to_json(self) -> dict:
        mtev = []
        for idx, route in enumerate(self.mtev_routes):
            assign = self.charge_assign[idx] if idx < len(self.charge_assign) else []
            edges = [
                {"tail": int(i), "head": int(j),
                 "mct_id": None if e >= len(assign) or assign[e] is None else int(assign[e])}
                for e, (i, j) in enumerate(route.edges())
            ]
            mtev.append({
                "vehicle": int(route.vehicle),
                "nodes": [int(u) for u in route.nodes],
                "arrival_times": [float(t) for t in (self.mtev_times[idx] if idx < len(self.mtev_times) else [])],
                "battery": [float(b) for b in (self.mtev_battery[idx] if idx < len(self.mtev_battery) else [])],
                "edges": edges,
            })
        mct = []
        for idx, route in enumerate(self.mct_routes):
            mct.append({
                "vehicle": int(route.vehicle),
                "nodes": [int(u) for u in route.nodes],
                "arrival_times": [float(t) for t in (self.mct_times[idx] if idx < len(self.mct_times) else [])],
                "battery": [float(b) for b in (self.mct_battery[idx] if idx < len(self.mct_battery) else [])],
            })
        return {
            "mtev": mtev,
            "mct": mct,
            "used_mtev": [bool(u) for u in self.used_mtev],
            "used_mct": [bool(u) for u in self.used_mct],
            "total_cost": float(self.total_cost),
        }

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, data: dict) -> "Solution":
        sol = cls()
        for entry in data.get("mtev", []):
            sol.mtev_routes.append(Route(entry["vehicle"], list(entry["nodes"])))
            sol.charge_assign.append([e.get("mct_id") for e in entry.get("edges", [])])
            sol.mtev_times.append(list(entry.get("arrival_times", [])))
            sol.mtev_battery.append(list(entry.get("battery", [])))
        for entry in data.get("mct", []):
            sol.mct_routes.append(Route(entry["vehicle"], list(entry["nodes"])))
            sol.mct_times.append(list(entry.get("arrival_times", [])))
            sol.mct_battery.append(list(entry.get("battery", [])))
        sol.used_mtev = [bool(u) for u in data.get("used_mtev", [])]
        sol.used_mct = [bool(u) for u in data.get("used_mct", [])]
        sol.total_cost = float(data.get("total_cost", 0.0))
        return sol


def _require_anchors(route: Route, inst: Instance) -> None:
    nodes = route.nodes
    if len(nodes) < 2 or nodes[0] != 0 or nodes[-1] != inst.depot_end:
        raise RouteStructureError(
            f"route of vehicle {route.vehicle} must start at depot 0 and end at depot {inst.depot_end}"
        )


def pattern_bits(pattern, width: int) -> list[int]:
    """Normalize a charging pattern (mask object or 0/1 sequence) to a bit list."""
    if hasattr(pattern, "mask") and hasattr(pattern, "width"):
        if pattern.width != width:
            raise RouteStructureError(
                f"pattern width {pattern.width} does not match edge count {width}"
            )
        return [(pattern.mask >> e) & 1 for e in range(width)]
    bits = [int(b) for b in pattern]
    if len(bits) != width:
        raise RouteStructureError(
            f"pattern length {len(bits)} does not match edge count {width}"
        )
    if any(b not in (0, 1) for b in bits):
        raise ValueError("pattern bits must be 0 or 1")
    return bits


def realized_bits(sol: Solution, route_idx: int) -> list[int]:
    """Charging bits actually assigned on a route's edges (1 iff an MCT serves it)."""
    assign = sol.charge_assign[route_idx]
    return [0 if a is None else 1 for a in assign]


def route_energy_profile(route: Route, pattern, inst: Instance) -> list[float]:
    """Battery level at every node of the route under a charging pattern.

    Starts full at P; each edge consumes rho_t*c and, when its bit is set,
    gains gamma*c, clamped at P. The trace may go negative (diagnostic use).
    """
    edges = route.edges()
    bits = pattern_bits(pattern, len(edges))
    level = inst.P
    trace = [level]
    for (i, j), bit in zip(edges, bits):
        c = float(inst.dist[i, j])
        level = min(level - inst.rho_t * c + inst.gamma * c * bit, inst.P)
        trace.append(level)
    return trace


def mtev_arrival_times(route: Route, inst: Instance) -> list[float]:
    """Earliest arrival times along an MTEV route (travel time = distance)."""
    t = 0.0
    times = [0.0]
    for i, j in route.edges():
        t += float(inst.dist[i, j])
        times.append(t)
    return times


def routing_cost(routes: list[Route], inst: Instance) -> float:
    """Travel energy plus MTEV acquisition cost for a set of MTEV routes."""
    total = 0.0
    used = 0
    for route in routes:
        total += inst.rho_t * inst.route_distance(route.nodes)
        if route.serves_customers():
            used += 1
    return total + inst.rho_e * used


def evaluate_cost(sol: Solution, inst: Instance) -> float:
    """Objective value: MTEV travel energy plus acquisition costs of both fleets.

    A vehicle counts as deployed iff its route serves at least one customer.
    MCT travel distance carries no cost term.
    """
    total = 0.0
    used_e = 0
    for route in sol.mtev_routes:
        _require_anchors(route, inst)
        total += inst.rho_t * inst.route_distance(route.nodes)
        if route.serves_customers():
            used_e += 1
    used_c = 0
    for route in sol.mct_routes:
        _require_anchors(route, inst)
        if route.serves_customers():
            used_c += 1
    return total + inst.rho_e * used_e + inst.rho_c * used_c


def _duties_per_mct(sol: Solution, inst: Instance, mtev_times: list[list[float]]):
    """Group charging obligations by serving MCT; drop entries with invalid ids."""
    per_mct = [[] for _ in sol.mct_routes]
    bad = []
    for r, route in enumerate(sol.mtev_routes):
        assign = sol.charge_assign[r] if r < len(sol.charge_assign) else []
        for e, (i, j) in enumerate(route.edges()):
            if e >= len(assign) or assign[e] is None:
                continue
            c = assign[e]
            dist = float(inst.dist[i, j])
            duty = {
                "route": r, "edge": e, "tail": i, "head": j,
                "start": mtev_times[r][e], "distance": dist,
                "transfer": inst.gamma * dist,
            }
            if not isinstance(c, int) or not (0 <= c < len(sol.mct_routes)):
                bad.append((c, duty))
            else:
                per_mct[c].append(duty)
    for duties in per_mct:
        duties.sort(key=lambda d: (d["start"], d["route"], d["edge"]))
    return per_mct, bad


def _match_duties(route: Route, duties: list[dict]):
    """Match an MCT's duties to its route edges in order of duty start time.

    Returns (per-edge duty or None, unmatched duties).
    """
    pending = list(duties)
    matches: list[dict | None] = [None] * (len(route.nodes) - 1)
    for k, (i, j) in enumerate(route.edges()):
        hit = None
        for duty in pending:
            if duty["tail"] == i and duty["head"] == j:
                hit = duty
                break
        if hit is not None:
            matches[k] = hit
            pending.remove(hit)
    return matches, pending


def build_schedule(sol: Solution, inst: Instance, transfer_depletes: bool = True) -> Solution:
    """Fill arrival times and battery traces using earliest-arrival semantics.

    MTEVs depart as soon as they arrive. An MCT waits at the tail of a
    charging arc until its MTEV arrives, then the pair departs together;
    if the MCT shows up late the schedule still advances (the feasibility
    checker reports the synchronization violation).
    """
    out = sol.copy()
    out.mtev_times = [mtev_arrival_times(r, inst) for r in out.mtev_routes]
    out.mtev_battery = [
        route_energy_profile(r, realized_bits(out, idx), inst)
        for idx, r in enumerate(out.mtev_routes)
    ]
    per_mct, _bad = _duties_per_mct(out, inst, out.mtev_times)
    out.mct_times = []
    out.mct_battery = []
    for c_idx, route in enumerate(out.mct_routes):
        matches, _missing = _match_duties(route, per_mct[c_idx])
        times = [0.0]
        level = inst.B
        trace = [level]
        now = 0.0
        for k, (i, j) in enumerate(route.edges()):
            duty = matches[k]
            depart = now if duty is None else max(now, duty["start"])
            c = float(inst.dist[i, j])
            now = depart + c
            times.append(now)
            level -= inst.phi * c
            if duty is not None and transfer_depletes:
                level -= duty["transfer"]
            trace.append(level)
        out.mct_times.append(times)
        out.mct_battery.append(trace)
    return out


def finalize_solution(sol: Solution, inst: Instance, transfer_depletes: bool = True) -> Solution:
    """Schedule, battery traces, usage flags and objective value in one pass."""
    out = build_schedule(sol, inst, transfer_depletes)
    out.used_mtev = [r.serves_customers() for r in out.mtev_routes]
    out.used_mct = [r.serves_customers() for r in out.mct_routes]
    out.total_cost = float(evaluate_cost(out, inst))
    return out


def _check_route_structure(sol: Solution, inst: Instance, out: list[Violation]) -> None:
    n_end = inst.depot_end
    for kind, routes in (("mtev", sol.mtev_routes), ("mct", sol.mct_routes)):
        for idx, route in enumerate(routes):
            tag = f"{kind}:{idx}"
            nodes = route.nodes
            if len(nodes) < 2 or nodes[0] != 0 or nodes[-1] != n_end:
                out.append(Violation("flow", tag, "route must run from depot 0 to the return depot"))
                continue
            interior = nodes[1:-1]
            if any(u in (0, n_end) for u in interior):
                out.append(Violation("flow", tag, "depot appears mid-route"))
            if any(not (1 <= u <= inst.n) for u in interior):
                out.append(Violation("flow", tag, "unknown node in route"))
            if kind == "mtev" and len(set(interior)) != len(interior):
                out.append(Violation("flow", tag, "customer repeated within route"))


def _sanitized_copy(sol: Solution, inst: Instance) -> Solution:
    """Copy whose charge assignments match each route's edge count, so the
    checker can derive schedules from malformed inputs without raising."""
    out = sol.copy()
    rows = []
    for idx, route in enumerate(out.mtev_routes):
        width = max(len(route.nodes) - 1, 0)
        row = list(out.charge_assign[idx]) if idx < len(out.charge_assign) else []
        row = (row + [None] * width)[:width]
        rows.append(row)
    out.charge_assign = rows
    return out


def _stored_or_derived_times(sol: Solution, inst: Instance):
    """Use stored schedules when shapes line up, else derive earliest-arrival ones."""
    ok_mtev = len(sol.mtev_times) == len(sol.mtev_routes) and all(
        len(t) == len(r.nodes) for t, r in zip(sol.mtev_times, sol.mtev_routes)
    )
    ok_mct = len(sol.mct_times) == len(sol.mct_routes) and all(
        len(t) == len(r.nodes) for t, r in zip(sol.mct_times, sol.mct_routes)
    )
    if ok_mtev and ok_mct:
        return sol.mtev_times, sol.mct_times
    scheduled = build_schedule(_sanitized_copy(sol, inst), inst)
    mtev = sol.mtev_times if ok_mtev else scheduled.mtev_times
    mct = sol.mct_times if ok_mct else scheduled.mct_times
    return mtev, mct


def check_feasibility(sol: Solution, inst: Instance, transfer_depletes: bool = True) -> FeasibilityReport:
    """Path-wise verification of every model constraint family.

    Battery and time quantities are recomputed along the visited sequences;
    stored traces are presentation data and are not trusted. All findings
    are returned in the report, nothing raises.
    """
    out: list[Violation] = []
    _check_route_structure(sol, inst, out)

    # unique coverage of every customer
    count = {u: 0 for u in inst.customers}
    for route in sol.mtev_routes:
        for u in route.interior:
            if u in count:
                count[u] += 1
    for u, k in count.items():
        if k != 1:
            out.append(Violation("coverage", "", f"customer {u} served {k} times", abs(k - 1)))

    # load capacity per MTEV
    for idx, route in enumerate(sol.mtev_routes):
        load = sum(inst.demand_of(u) for u in route.interior if 1 <= u <= inst.n)
        if load > inst.Q + EPS:
            out.append(Violation("capacity", f"mtev:{idx}",
                                 f"load {load} exceeds capacity {inst.Q}", load - inst.Q))

    mtev_times, mct_times = _stored_or_derived_times(sol, inst)

    # time propagation along visited sequences
    for kind, routes, times in (("mtev", sol.mtev_routes, mtev_times),
                                ("mct", sol.mct_routes, mct_times)):
        for idx, (route, t) in enumerate(zip(routes, times)):
            tag = f"{kind}:{idx}"
            if not t:
                continue
            if abs(t[0]) > EPS:
                out.append(Violation("timing", tag, "departure time at depot is not 0", abs(t[0])))
            for k, (i, j) in enumerate(route.edges()):
                need = t[k] + float(inst.dist[i, j])
                if t[k + 1] < need - EPS:
                    out.append(Violation("timing", tag,
                                         f"arrival at position {k + 1} precedes travel time",
                                         need - t[k + 1]))

    # charging assignment shape
    for idx, route in enumerate(sol.mtev_routes):
        assign = sol.charge_assign[idx] if idx < len(sol.charge_assign) else []
        if len(assign) != len(route.nodes) - 1:
            out.append(Violation("sync", f"mtev:{idx}",
                                 "charge assignment length does not match edge count"))

    per_mct, bad_ids = _duties_per_mct(sol, inst, mtev_times)
    for c, duty in bad_ids:
        out.append(Violation("sync", f"mtev:{duty['route']}",
                             f"edge ({duty['tail']},{duty['head']}) assigned to unknown truck {c}"))

    # MTEV battery recursion under the realized pattern
    for idx, route in enumerate(sol.mtev_routes):
        if len(sol.charge_assign[idx] if idx < len(sol.charge_assign) else []) != len(route.nodes) - 1:
            continue
        trace = route_energy_profile(route, realized_bits(sol, idx), inst)
        for k, level in enumerate(trace):
            if level < -EPS:
                i, j = route.edges()[k - 1]
                out.append(Violation("energy-mtev", f"mtev:{idx}",
                                     f"battery {level:.6g} after edge {k} ({i},{j})", -level))
                break

    # MCT duties: co-traversal, synchronization, battery
    for c_idx, route in enumerate(sol.mct_routes):
        duties = per_mct[c_idx]
        matches, missing = _match_duties(route, duties)
        tag = f"mct:{c_idx}"
        for duty in missing:
            out.append(Violation("sync", tag,
                                 f"assigned arc ({duty['tail']},{duty['head']}) is never traversed"))
        times = mct_times[c_idx] if c_idx < len(mct_times) else []
        level = inst.B
        for k, (i, j) in enumerate(route.edges()):
            duty = matches[k]
            c = float(inst.dist[i, j])
            if duty is not None:
                if times and times[k] > duty["start"] + EPS:
                    out.append(Violation("sync", tag,
                                         f"arrives at node {i} after its MTEV (arc ({i},{j}))",
                                         times[k] - duty["start"]))
                if level < duty["transfer"] - EPS:
                    out.append(Violation("energy-mct", tag,
                                         f"stored energy {level:.6g} below transfer {duty['transfer']:.6g} at node {i}",
                                         duty["transfer"] - level))
            level -= inst.phi * c
            if duty is not None and transfer_depletes:
                level -= duty["transfer"]
            if level < -EPS:
                out.append(Violation("energy-mct", tag,
                                     f"battery {level:.6g} after arc ({i},{j})", -level))
                break

    # stored usage flags must agree with served customers
    if sol.used_mtev:
        derived = [r.serves_customers() for r in sol.mtev_routes]
        if list(sol.used_mtev) != derived:
            out.append(Violation("usage", "", "MTEV usage flags disagree with routes"))
    if sol.used_mct:
        derived = [r.serves_customers() for r in sol.mct_routes]
        if list(sol.used_mct) != derived:
            out.append(Violation("usage", "", "MCT usage flags disagree with routes"))

    return FeasibilityReport(out)
