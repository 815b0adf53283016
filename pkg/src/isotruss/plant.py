"""Simulated robot: executes roller commands with gain errors, failures, and encoder noise.

Stands in for the physical testbed. Commanded roller rates are scaled by
per-roller gains (a failed roller's rate is forced to zero), tube positions
advance exactly, and the ground-truth configuration is integrated with the
shared substepped forward-kinematics integrator at a 10x finer substep count
than the estimator, making the plant the reference the estimator is judged
against. Triangle perimeters are conserved by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import estimator, truss
from .estimator import EncoderFrame
from .truss import TrussTopology, as_flat

GROUND_TRUTH_SUBSTEPS = 100


@dataclass
class PlantConfig:
    """Actuation imperfections and encoder model for one simulated robot."""

    gains: np.ndarray | None = None
    failed: frozenset[int] = frozenset()
    encoder_noise_std: float = 0.0
    encoder_quantum: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.gains is not None:
            self.gains = np.asarray(self.gains, dtype=float).ravel()
            if np.any(self.gains < 0):
                raise ValueError("gains must be nonnegative")
        self.failed = frozenset(int(i) for i in self.failed)
        if self.encoder_noise_std < 0 or self.encoder_quantum < 0:
            raise ValueError("noise and quantum must be nonnegative")


@dataclass
class PlantState:
    """Ground truth: vertex configuration, roller tube positions, clock."""

    x_true: np.ndarray
    d_true: np.ndarray
    time: float = 0.0

    def copy(self) -> "PlantState":
        return PlantState(self.x_true.copy(), self.d_true.copy(), self.time)


class Plant:
    """Lock-step simulated robot for one topology."""

    def __init__(self, topo: TrussTopology, x0, config: PlantConfig | None = None):
        self.topo = topo
        self.config = config or PlantConfig()
        gains = self.config.gains
        if gains is None:
            gains = np.ones(topo.roller_count)
        if gains.shape != (topo.roller_count,):
            raise ValueError(
                f"gains must have {topo.roller_count} entries, got {gains.shape}"
            )
        self.gains = gains.copy()
        self.failed: set[int] = set(self.config.failed)
        for i in self.failed:
            if not (0 <= i < topo.roller_count):
                raise ValueError(f"failed roller {i} out of range")
        self.state = PlantState(
            x_true=as_flat(x0).copy(),
            d_true=np.zeros(topo.roller_count),
            time=0.0,
        )
        self._rng = np.random.default_rng(self.config.seed)

    def set_failed(self, roller: int, failed: bool = True):
        if not (0 <= roller < self.topo.roller_count):
            raise ValueError(f"roller {roller} out of range")
        if failed:
            self.failed.add(roller)
        else:
            self.failed.discard(roller)

    def actual_rates(self, ddot_cmd) -> np.ndarray:
        """Gain-scaled rates with failed rollers pinned to zero."""
        actual = self.gains * np.asarray(ddot_cmd, dtype=float).ravel()
        for i in self.failed:
            actual[i] = 0.0
        return actual

    def apply_command(self, ddot_cmd, dt: float) -> PlantState:
        """Execute one control period of roller commands against ground truth."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        actual = self.actual_rates(ddot_cmd)
        self.state.d_true = self.state.d_true + actual * dt
        self.state.x_true = estimator.integrate_positions(
            self.topo, self.state.x_true, actual, dt, GROUND_TRUTH_SUBSTEPS
        )
        self.state.time += dt
        return self.state.copy()

    def read_encoders(self) -> EncoderFrame:
        """Sample the encoders: truth plus optional Gaussian noise and quantization."""
        d = self.state.d_true.copy()
        if self.config.encoder_noise_std > 0:
            d = d + self._rng.normal(0.0, self.config.encoder_noise_std, size=d.shape)
        if self.config.encoder_quantum > 0:
            q = self.config.encoder_quantum
            d = np.round(d / q) * q
        return EncoderFrame(time=self.state.time, d_real=d)

    def triangle_perimeters(self) -> np.ndarray:
        lengths = truss.edge_length_vector(self.topo, self.state.x_true)
        return self.topo._triangle_indicator @ lengths
