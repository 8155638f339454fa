"""Trained model bundle: nominal trajectory, both energy fields, the safety
samples they were fitted on, and the gains needed to run the controller.
Immutable after training."""

from __future__ import annotations

from dataclasses import dataclass

from .energyfields import EnergyField
from .safeset import SafetySamples
from .trajgen import GeneratorModel, NominalTrajectory

BUNDLE_VERSION = 1


@dataclass
class PnpfModel:
    mode: str  # "point-to-point" | "periodic"
    dim: int
    nominal: NominalTrajectory
    nominal_field: EnergyField
    safety_field: EnergyField
    samples: SafetySamples
    s_w: float  # energy window, arc-length units
    lambda_slope: float  # safety rectification slope used for targets
    alpha: float  # control gain
    v_max: float  # velocity cap, state units per second
    generator: GeneratorModel | None = None

    @property
    def s0(self) -> float:
        return self.nominal.s0

    @property
    def s_period(self) -> float | None:
        return self.nominal.s_period
