"""Charging coordination: pick one pattern per route and route the charging trucks.

Routing fixes the travel-energy and MTEV acquisition terms of the objective,
so this layer minimizes the MCT acquisition term (truck count), breaking ties
by total deadhead distance. Deadhead distance itself carries no cost and is
reported as a diagnostic only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import prod

from .bdp import BdpResult, ChargePattern
from .model import (
    EPS,
    FeasibilityReport,
    Instance,
    Route,
    Solution,
    Violation,
    finalize_solution,
    mtev_arrival_times,
    routing_cost,
)

DEFAULT_EXACT_CAP = 1_000_000
DEFAULT_NODE_BUDGET = 200_000


@dataclass(frozen=True)
class ChargingDuty:
    """One charging obligation: an MCT must co-travel this arc with this MTEV."""

    mtev: int            # index of the MTEV route
    edge: int            # edge index within that route
    tail: int
    head: int
    start: float         # MTEV arrival time at the tail node
    end: float           # MTEV arrival time at the head node
    distance: float
    transfer: float      # energy delivered while co-traveling


@dataclass
class ConfigurationChoice:
    """Exactly one charging pattern per MTEV route, index aligned."""

    patterns: list[ChargePattern]


@dataclass
class CoordinationPlan:
    duties: list[ChargingDuty]
    assignment: list[int]                    # duty index -> MCT index
    mct_duties: list[list[ChargingDuty]]
    mct_routes: list[Route]
    total_deadhead: float
    certified: bool

    @property
    def mct_count(self) -> int:
        return len(self.mct_routes)


@dataclass
class CoordinationResult:
    choice: ConfigurationChoice
    plan: CoordinationPlan
    cost: float


@dataclass
class _TruckState:
    position: int
    ready: float
    battery: float
    deadhead: float
    closed: bool         # parked at the return depot, takes no further duties


def duties_from_choice(routes: list[Route], choice: ConfigurationChoice,
                       inst: Instance) -> list[ChargingDuty]:
    duties = []
    for r_idx, (route, pattern) in enumerate(zip(routes, choice.patterns)):
        times = mtev_arrival_times(route, inst)
        for e in pattern.edges():
            i, j = route.edges()[e]
            c = float(inst.dist[i, j])
            duties.append(ChargingDuty(
                mtev=r_idx, edge=e, tail=i, head=j,
                start=times[e], end=times[e + 1],
                distance=c, transfer=inst.gamma * c,
            ))
    duties.sort(key=lambda d: (d.start, d.mtev, d.edge))
    return duties


def mct_lower_bound(duties: list[ChargingDuty]) -> int:
    """Interval-graph clique bound: max number of duties open at one instant."""
    if not duties:
        return 0
    events = []
    for d in duties:
        if d.end > d.start:
            events.append((d.start, 1))
            events.append((d.end, -1))
    events.sort(key=lambda ev: (ev[0], ev[1]))
    cur = best = 0
    for _, delta in events:
        cur += delta
        best = max(best, cur)
    return max(best, 1)


def _try_serve(state: _TruckState, duty: ChargingDuty, inst: Instance,
               transfer_depletes: bool):
    """Next truck state after deadheading to and co-traveling a duty arc, or None."""
    if state.closed:
        return None
    leg = float(inst.dist[state.position, duty.tail])
    if state.ready + leg > duty.start + EPS:
        return None
    battery = state.battery - inst.phi * (leg + duty.distance)
    if transfer_depletes:
        battery -= duty.transfer
    if battery < -EPS:
        return None
    if state.battery - inst.phi * leg < duty.transfer - EPS:
        return None
    return _TruckState(
        position=duty.head,
        ready=duty.end,
        battery=battery,
        deadhead=state.deadhead + leg,
        closed=duty.head == inst.depot_end,
    )


def _return_leg(state: _TruckState, inst: Instance) -> float | None:
    """Deadhead distance home, or None when the battery cannot cover it."""
    if state.closed:
        return 0.0
    leg = float(inst.dist[state.position, inst.depot_end])
    if state.battery - inst.phi * leg < -EPS:
        return None
    return leg


def _fresh_truck(inst: Instance) -> _TruckState:
    return _TruckState(position=0, ready=0.0, battery=inst.B, deadhead=0.0, closed=False)


def _assign_exact(duties: list[ChargingDuty], inst: Instance, max_mct: int,
                  transfer_depletes: bool, node_budget: int):
    """Minimum-truck duty assignment by chaining duties in start order.

    Full backtracking over existing-truck and new-truck choices, pruned by
    the incumbent (count, deadhead). Returns (count, deadhead, assignment,
    certified) or None when no assignment exists. When the node budget runs
    out the best assignment found so far is returned uncertified.
    """
    if not duties:
        return 0, 0.0, [], True
    best: list = [None]     # (count, total deadhead, assignment tuple)
    nodes = [0]
    exhausted = [False]
    assignment = [0] * len(duties)

    def finish(trucks: list[_TruckState]) -> None:
        total = 0.0
        for t in trucks:
            leg = _return_leg(t, inst)
            if leg is None:
                return
            total += t.deadhead + leg
        cand = (len(trucks), total, tuple(assignment))
        if best[0] is None or cand[:2] < best[0][:2]:
            best[0] = cand

    def rec(idx: int, trucks: list[_TruckState]) -> None:
        if exhausted[0]:
            return
        nodes[0] += 1
        if nodes[0] > node_budget:
            exhausted[0] = True
            return
        if best[0] is not None:
            count, dh = best[0][0], best[0][1]
            if len(trucks) > count:
                return
            if len(trucks) == count and sum(t.deadhead for t in trucks) >= dh:
                return
        if idx == len(duties):
            finish(trucks)
            return
        duty = duties[idx]
        for t_idx, state in enumerate(trucks):
            nxt = _try_serve(state, duty, inst, transfer_depletes)
            if nxt is None:
                continue
            trucks[t_idx] = nxt
            assignment[idx] = t_idx
            rec(idx + 1, trucks)
            trucks[t_idx] = state
        if len(trucks) < max_mct:
            nxt = _try_serve(_fresh_truck(inst), duty, inst, transfer_depletes)
            if nxt is not None:
                trucks.append(nxt)
                assignment[idx] = len(trucks) - 1
                rec(idx + 1, trucks)
                trucks.pop()

    rec(0, [])
    if best[0] is None:
        if exhausted[0]:
            greedy = _assign_greedy(duties, inst, max_mct, transfer_depletes)
            if greedy is None:
                return None
            count, dh, assign = greedy
            return count, dh, assign, False
        return None
    count, dh, assign = best[0]
    return count, dh, list(assign), not exhausted[0]


def _assign_greedy(duties: list[ChargingDuty], inst: Instance, max_mct: int,
                   transfer_depletes: bool):
    """First-feasible-cheapest chaining: each duty goes to the truck whose
    added deadhead (plus acquisition when opening a new truck) is least."""
    trucks: list[_TruckState] = []
    assignment = []
    for duty in duties:
        options = []
        for t_idx, state in enumerate(trucks):
            nxt = _try_serve(state, duty, inst, transfer_depletes)
            if nxt is None:
                continue
            if _return_leg(nxt, inst) is None:
                continue
            leg = nxt.deadhead - state.deadhead
            options.append((leg, t_idx, nxt))
        if len(trucks) < max_mct:
            nxt = _try_serve(_fresh_truck(inst), duty, inst, transfer_depletes)
            if nxt is not None and _return_leg(nxt, inst) is not None:
                options.append((inst.rho_c + nxt.deadhead, len(trucks), nxt))
        if not options:
            return None
        options.sort(key=lambda o: (o[0], o[1]))
        _, t_idx, nxt = options[0]
        if t_idx == len(trucks):
            trucks.append(nxt)
        else:
            trucks[t_idx] = nxt
        assignment.append(t_idx)
    total = 0.0
    for t in trucks:
        leg = _return_leg(t, inst)
        if leg is None:
            return None
        total += t.deadhead + leg
    return len(trucks), total, assignment


def _build_plan(duties: list[ChargingDuty], assignment: list[int],
                inst: Instance, certified: bool) -> CoordinationPlan:
    count = max(assignment) + 1 if assignment else 0
    mct_duties: list[list[ChargingDuty]] = [[] for _ in range(count)]
    for duty, t_idx in zip(duties, assignment):
        mct_duties[t_idx].append(duty)
    for lst in mct_duties:
        lst.sort(key=lambda d: (d.start, d.mtev, d.edge))
    routes = []
    total_deadhead = 0.0
    for t_idx, lst in enumerate(mct_duties):
        nodes = [0]
        pos = 0
        for duty in lst:
            if duty.tail != pos:
                total_deadhead += float(inst.dist[pos, duty.tail])
                nodes.append(duty.tail)
            nodes.append(duty.head)
            pos = duty.head
        if pos != inst.depot_end:
            total_deadhead += float(inst.dist[pos, inst.depot_end])
            nodes.append(inst.depot_end)
        routes.append(Route(t_idx, nodes))
    return CoordinationPlan(
        duties=list(duties),
        assignment=list(assignment),
        mct_duties=mct_duties,
        mct_routes=routes,
        total_deadhead=total_deadhead,
        certified=certified,
    )


def _sorted_patterns(result: BdpResult) -> list[ChargePattern]:
    return [p for p, _ in result.patterns]


def coordinate_exact(routes: list[Route], bdp_results: list[BdpResult],
                     inst: Instance, *,
                     exact_cap: int = DEFAULT_EXACT_CAP,
                     node_budget: int = DEFAULT_NODE_BUDGET,
                     transfer_depletes: bool = True) -> CoordinationResult | None:
    """Exhaustive search over per-route pattern choices and duty assignments.

    Branches over configuration combinations depth first, pruning a prefix
    when the truck count already forced by its duty overlaps cannot beat the
    incumbent. Returns None when every combination is uncoordinatable.
    """
    pattern_sets = [_sorted_patterns(res) for res in bdp_results]
    if any(not s for s in pattern_sets):
        return None
    combos = prod(len(s) for s in pattern_sets)
    if combos > exact_cap:
        raise ValueError(f"{combos} combinations exceed the exact cap {exact_cap}")
    fixed = routing_cost(routes, inst)
    all_times = [mtev_arrival_times(r, inst) for r in routes]
    all_edges = [r.edges() for r in routes]
    best: list = [None]      # (count, deadhead, choice list, duties, assignment, certified)

    def leaf(chosen: list[ChargePattern], duties_so_far: list[ChargingDuty]) -> None:
        duties = sorted(duties_so_far, key=lambda d: (d.start, d.mtev, d.edge))
        outcome = _assign_exact(duties, inst, inst.max_mct, transfer_depletes, node_budget)
        if outcome is None:
            return
        count, dh, assignment, certified = outcome
        cand = (count, dh)
        if best[0] is None or cand < (best[0][0], best[0][1]):
            best[0] = (count, dh, list(chosen), duties, assignment, certified)

    chosen: list[ChargePattern] = []

    def dfs(r_idx: int, duties_so_far: list[ChargingDuty]) -> None:
        if best[0] is not None:
            if best[0][0] == 0 and best[0][1] == 0.0:
                return
            bound = mct_lower_bound(duties_so_far)
            if bound > best[0][0]:
                return
        if r_idx == len(routes):
            leaf(chosen, duties_so_far)
            return
        times = all_times[r_idx]
        edges = all_edges[r_idx]
        for pattern in pattern_sets[r_idx]:
            added = []
            for e in pattern.edges():
                i, j = edges[e]
                c = float(inst.dist[i, j])
                added.append(ChargingDuty(
                    mtev=r_idx, edge=e, tail=i, head=j,
                    start=times[e], end=times[e + 1],
                    distance=c, transfer=inst.gamma * c,
                ))
            chosen.append(pattern)
            dfs(r_idx + 1, duties_so_far + added)
            chosen.pop()

    dfs(0, [])
    if best[0] is None:
        return None
    count, _dh, patterns, duties, assignment, certified = best[0]
    plan = _build_plan(duties, assignment, inst, certified)
    cost = fixed + inst.rho_c * count
    return CoordinationResult(ConfigurationChoice(patterns), plan, cost)


def coordinate_heuristic(routes: list[Route], bdp_results: list[BdpResult],
                         inst: Instance, *,
                         max_retries: int = 50,
                         transfer_depletes: bool = True) -> CoordinationResult | None:
    """Greedy coordination for scales beyond exhaustive search.

    Starts from the fewest-charging-arcs pattern of every route and assigns
    duties greedily; when a duty cannot be served, the offending route falls
    back to its next pattern (sorted by cardinality, then mask value), with
    a bounded number of retries.
    """
    ordered = []
    for res in bdp_results:
        pats = _sorted_patterns(res)
        if not pats:
            return None
        ordered.append(sorted(pats, key=lambda p: (p.cardinality, p.mask)))
    idx = [0] * len(routes)
    fixed = routing_cost(routes, inst)
    for _ in range(max_retries + 1):
        choice = ConfigurationChoice([ordered[r][idx[r]] for r in range(len(routes))])
        duties = duties_from_choice(routes, choice, inst)
        trucks: list[_TruckState] = []
        assignment: list[int] = []
        failed_route = None
        for duty in duties:
            options = []
            for t_idx, state in enumerate(trucks):
                nxt = _try_serve(state, duty, inst, transfer_depletes)
                if nxt is None or _return_leg(nxt, inst) is None:
                    continue
                options.append((nxt.deadhead - state.deadhead, t_idx, nxt))
            if len(trucks) < inst.max_mct:
                nxt = _try_serve(_fresh_truck(inst), duty, inst, transfer_depletes)
                if nxt is not None and _return_leg(nxt, inst) is not None:
                    options.append((inst.rho_c + nxt.deadhead, len(trucks), nxt))
            if not options:
                failed_route = duty.mtev
                break
            options.sort(key=lambda o: (o[0], o[1]))
            _, t_idx, nxt = options[0]
            if t_idx == len(trucks):
                trucks.append(nxt)
            else:
                trucks[t_idx] = nxt
            assignment.append(t_idx)
        if failed_route is None:
            total = 0.0
            feasible = True
            for t in trucks:
                leg = _return_leg(t, inst)
                if leg is None:
                    feasible = False
                    break
                total += t.deadhead + leg
            if feasible:
                plan = _build_plan(duties, assignment, inst, certified=False)
                cost = fixed + inst.rho_c * len(trucks)
                return CoordinationResult(choice, plan, cost)
            failed_route = duties[0].mtev if duties else None
        if failed_route is None:
            return None
        if idx[failed_route] + 1 >= len(ordered[failed_route]):
            return None
        idx[failed_route] += 1
    return None


def validate_sync(plan: CoordinationPlan, sol: Solution, inst: Instance,
                  transfer_depletes: bool = True) -> FeasibilityReport:
    """Re-check every duty of a plan against the MTEV schedule from scratch:
    arc co-traversal on both fleets, arrive-no-later timing, truck battery
    under travel and transfer depletion, depot anchoring of truck routes."""
    out: list[Violation] = []
    mtev_times = (sol.mtev_times if len(sol.mtev_times) == len(sol.mtev_routes)
                  else [mtev_arrival_times(r, inst) for r in sol.mtev_routes])
    for t_idx, route in enumerate(plan.mct_routes):
        tag = f"mct:{t_idx}"
        nodes = route.nodes
        if len(nodes) < 2 or nodes[0] != 0 or nodes[-1] != inst.depot_end:
            out.append(Violation("flow", tag, "truck route must run depot to depot"))
        elif any(u in (0, inst.depot_end) for u in nodes[1:-1]):
            out.append(Violation("flow", tag, "depot appears mid-route"))
    for d_idx, duty in enumerate(plan.duties):
        t_idx = plan.assignment[d_idx]
        tag = f"mct:{t_idx}"
        if not (0 <= duty.mtev < len(sol.mtev_routes)):
            out.append(Violation("sync", tag, f"duty references unknown MTEV route {duty.mtev}"))
            continue
        route = sol.mtev_routes[duty.mtev]
        edges = route.edges()
        if duty.edge >= len(edges) or edges[duty.edge] != (duty.tail, duty.head):
            out.append(Violation("sync", tag,
                                 f"arc ({duty.tail},{duty.head}) is not edge {duty.edge} of mtev:{duty.mtev}"))
        start = mtev_times[duty.mtev][duty.edge]
        if abs(start - duty.start) > EPS:
            out.append(Violation("sync", tag,
                                 f"duty start {duty.start:g} disagrees with MTEV schedule {start:g}",
                                 abs(start - duty.start)))
    for t_idx, lst in enumerate(plan.mct_duties):
        tag = f"mct:{t_idx}"
        route_arcs = plan.mct_routes[t_idx].edges() if t_idx < len(plan.mct_routes) else []
        state = _fresh_truck(inst)
        for duty in lst:
            if (duty.tail, duty.head) not in route_arcs:
                out.append(Violation("sync", tag,
                                     f"assigned arc ({duty.tail},{duty.head}) missing from truck route"))
            leg = float(inst.dist[state.position, duty.tail])
            arrive = state.ready + leg
            if arrive > duty.start + EPS:
                out.append(Violation("sync", tag,
                                     f"reaches node {duty.tail} at {arrive:g}, after its MTEV at {duty.start:g}",
                                     arrive - duty.start))
            if state.battery - inst.phi * leg < duty.transfer - EPS:
                out.append(Violation("energy-mct", tag,
                                     f"stored energy below transfer {duty.transfer:g} at node {duty.tail}",
                                     duty.transfer - (state.battery - inst.phi * leg)))
            battery = state.battery - inst.phi * (leg + duty.distance)
            if transfer_depletes:
                battery -= duty.transfer
            if battery < -EPS:
                out.append(Violation("energy-mct", tag,
                                     f"battery {battery:.6g} after arc ({duty.tail},{duty.head})",
                                     -battery))
            state = _TruckState(duty.head, max(arrive, duty.start) + duty.distance,
                                battery, state.deadhead + leg,
                                duty.head == inst.depot_end)
        leg = _return_leg(state, inst)
        if leg is None:
            out.append(Violation("energy-mct", tag, "battery cannot cover the return leg"))
    return FeasibilityReport(out)


def assemble_solution(routes: list[Route], result: CoordinationResult,
                      inst: Instance, transfer_depletes: bool = True) -> Solution:
    """Full solution from MTEV routes plus a coordination result."""
    sol = Solution.from_routes(routes)
    for d_idx, duty in enumerate(result.plan.duties):
        sol.charge_assign[duty.mtev][duty.edge] = result.plan.assignment[d_idx]
    sol.mct_routes = [r.copy() for r in result.plan.mct_routes]
    return finalize_solution(sol, inst, transfer_depletes)


def plan_to_json(plan: CoordinationPlan, inst: Instance,
                 transfer_depletes: bool = True) -> dict:
    """Plan dump: per truck, the ordered duty list with times, transfers and
    the battery trace along its route."""
    mcts = []
    for t_idx, lst in enumerate(plan.mct_duties):
        state = _fresh_truck(inst)
        trace = [state.battery]
        duties = []
        for duty in lst:
            leg = float(inst.dist[state.position, duty.tail])
            battery = state.battery - inst.phi * (leg + duty.distance)
            if transfer_depletes:
                battery -= duty.transfer
            if leg > 0:
                trace.append(state.battery - inst.phi * leg)
            trace.append(battery)
            duties.append({
                "mtev": duty.mtev, "tail": duty.tail, "head": duty.head,
                "start": duty.start, "end": duty.end,
                "distance": duty.distance, "transfer": duty.transfer,
            })
            state = _TruckState(duty.head, duty.end, battery,
                                state.deadhead + leg, duty.head == inst.depot_end)
        leg = _return_leg(state, inst)
        if leg:
            trace.append(state.battery - inst.phi * leg)
        mcts.append({
            "vehicle": t_idx,
            "route": list(plan.mct_routes[t_idx].nodes),
            "duties": duties,
            "battery": trace,
        })
    return {
        "mct_count": plan.mct_count,
        "total_deadhead": plan.total_deadhead,
        "certified": plan.certified,
        "mcts": mcts,
    }


def plan_to_json_str(plan: CoordinationPlan, inst: Instance) -> str:
    return json.dumps(plan_to_json(plan, inst), sort_keys=True)


def summary_line(mtev_count: int, mct_count: int, cost: float) -> str:
    return f"E={mtev_count} C={mct_count} cost={cost:.2f}"
