"""Bundled datasets: the synthetic price file and the small oracle instances."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .market_data import Moments, ScenarioSet, empirical_moments
from .outer_solver import FeasibleRegion
from .restrictions import RestrictionSet


def data_path(name: str):
    return resources.files("drpo") / "data" / name


SYNTHETIC_PRICES = "synthetic_etf.csv"


@dataclass(frozen=True)
class Instance:
    name: str
    s0: np.ndarray
    scenarios: np.ndarray
    alpha_tilde: float
    epsilon: float
    grid_box: float
    grid_step: float
    deltas_wc: tuple[float, ...]
    deltas_bc: tuple[float, ...]
    note: str = ""

    @property
    def n(self) -> int:
        return self.s0.shape[0]

    def scenario_set(self) -> ScenarioSet:
        return ScenarioSet(self.s0, self.scenarios)

    def moments(self) -> Moments:
        return empirical_moments(self.scenario_set())

    def region(self, restrictions=None) -> FeasibleRegion:
        return FeasibleRegion(self.s0, self.moments().mean, self.alpha_tilde, self.epsilon,
                              restrictions or RestrictionSet())


def load_instances() -> list[Instance]:
    raw = json.loads(data_path("instances.json").read_text())
    return [Instance(name=r["name"], s0=np.array(r["s0"], dtype=float),
                     scenarios=np.array(r["scenarios"], dtype=float),
                     alpha_tilde=float(r["alpha_tilde"]), epsilon=float(r["epsilon"]),
                     grid_box=float(r["grid_box"]), grid_step=float(r["grid_step"]),
                     deltas_wc=tuple(r["deltas_wc"]), deltas_bc=tuple(r["deltas_bc"]),
                     note=r.get("note", ""))
            for r in raw]


def get_instance(name: str) -> Instance:
    for inst in load_instances():
        if inst.name == name:
            return inst
    raise KeyError(name)
