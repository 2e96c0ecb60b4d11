"""Solver configuration with JSON round-trip for reproducible experiments."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields


@dataclass
class SolverConfig:
    # stopping rule: iteration budget or wall-clock cap, whichever hits first
    iterations: int = 5000
    time_limit: float | None = None

    # adaptive operator weights
    segment_size: int = 100
    reaction: float = 0.5            # smoothing toward segment score/uses
    score_best: float = 33.0
    score_improve: float = 9.0       # better than incumbent, not a new best
    score_accept_worse: float = 13.0
    weight_floor: float = 1e-6

    # simulated-annealing acceptance for the incumbent
    init_temp_factor: float = 0.05
    cooling: float = 0.9975

    # removal sizing
    removal_min_frac: float = 0.1
    removal_max_frac: float = 0.3
    string_min: int = 2
    string_max: int = 6

    # relatedness weights for similarity removal
    shaw_distance_weight: float = 0.75
    shaw_demand_weight: float = 0.25

    # charging layer
    bdp_max_edges: int = 20
    exact_cap: int = 1_000_000
    assign_node_budget: int = 50_000
    heuristic_retries: int = 50
    mct_transfer_depletes: bool = True
    # in-loop coordination stays exact only while cheap; the standalone
    # coordinator keeps the full exact_cap
    lns_exact_combos: int = 256
    lns_exact_duties: int = 12

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "SolverConfig":
        with open(path) as f:
            return cls.from_json(json.load(f))
