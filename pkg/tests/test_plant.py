import numpy as np
import pytest

from isotruss import truss
from isotruss.plant import Plant, PlantConfig


class TestApplyCommand:
    def test_unit_gains_exact_transfer(self, topo, x0):
        plant = Plant(topo, x0)
        cmd = np.array([0.02, -0.01, 0.0, 0.01, -0.02, 0.015])
        state = plant.apply_command(cmd, 0.5)
        assert np.array_equal(state.d_true, cmd * 0.5)
        assert state.time == 0.5

    def test_failed_roller_never_moves(self, topo, x0):
        plant = Plant(topo, x0, PlantConfig(failed=frozenset({3})))
        for _ in range(5):
            plant.apply_command(np.full(6, 0.05), 0.5)
        assert plant.state.d_true[3] == 0.0
        assert np.all(plant.state.d_true[[0, 1, 2, 4, 5]] > 0)

    def test_gain_scaling(self, topo, x0):
        gains = np.ones(6)
        gains[5] = 1.0 / 1.5
        plant = Plant(topo, x0, PlantConfig(gains=gains))
        cmd = np.zeros(6)
        cmd[5] = 0.03
        state = plant.apply_command(cmd, 0.5)
        assert state.d_true[5] == pytest.approx(0.01)

    def test_perimeter_constant_per_step(self, topo, x0, rng):
        plant = Plant(topo, x0)
        before = plant.triangle_perimeters()
        for k in range(50):
            cmd = 0.03 * np.sin(0.1 * k + np.arange(6))
            plant.apply_command(cmd, 0.5)
            after = plant.triangle_perimeters()
            assert np.abs(after - before).max() <= 1e-6
            before = after


class TestEncoders:
    def test_noiseless_reads_truth(self, topo, x0):
        plant = Plant(topo, x0)
        plant.apply_command(np.full(6, 0.01), 0.5)
        frame = plant.read_encoders()
        assert np.array_equal(frame.d_real, plant.state.d_true)
        assert frame.time == 0.5

    def test_quantization(self, topo, x0):
        plant = Plant(topo, x0, PlantConfig(encoder_quantum=1e-4))
        plant.apply_command(np.array([0.0123, 0, 0, 0, 0, 0]), 0.5)
        frame = plant.read_encoders()
        steps = frame.d_real / 1e-4
        assert np.allclose(steps, np.round(steps), atol=1e-9)

    def test_noise_std_oracle(self, topo, x0):
        plant = Plant(topo, x0, PlantConfig(encoder_noise_std=1e-3, seed=5))
        reads = np.array([plant.read_encoders().d_real for _ in range(10000)])
        measured = reads.std(axis=0).mean()
        assert measured == pytest.approx(1e-3, rel=0.05)

    def test_replay_determinism(self, topo, x0):
        def run():
            plant = Plant(topo, x0, PlantConfig(encoder_noise_std=1e-3, seed=42))
            out = []
            for k in range(20):
                plant.apply_command(0.02 * np.sin(0.2 * k + np.arange(6)), 0.5)
                out.append(plant.read_encoders().d_real.copy())
            return np.array(out), plant.state.x_true.copy()

        a_reads, a_x = run()
        b_reads, b_x = run()
        assert np.array_equal(a_reads, b_reads)
        assert np.array_equal(a_x, b_x)

    def test_rejects_bad_config(self, topo, x0):
        with pytest.raises(ValueError):
            PlantConfig(gains=[-1.0] * 6)
        with pytest.raises(ValueError):
            Plant(topo, x0, PlantConfig(gains=np.ones(4)))
        with pytest.raises(ValueError):
            Plant(topo, x0, PlantConfig(failed=frozenset({11})))
