import numpy as np
import pytest

from attnplan import (
    CFG_WISE,
    STEP_WISE,
    ModelConfig,
    ShapeError,
    SimilarityError,
    ToyDiT,
    cosine_similarity,
    mrae,
    sample,
    similarity_report,
)
from attnplan.metrics import write_similarity_csv


class TestMrae:
    def test_identical_tensors(self):
        x = np.linspace(-2, 2, 12, dtype=np.float32)
        assert mrae(x, x) == 0.0

    def test_worked_example_half(self):
        assert abs(mrae([2.0], [1.0]) - 1.0 / (2.0 + 1e-6)) < 1e-7

    def test_zero_pair_guarded_by_epsilon(self):
        assert mrae([0.0], [0.0]) == 0.0

    def test_sign_flip_approaches_two(self):
        assert abs(mrae([1.0], [-1.0]) - 2.0 / (1.0 + 1e-6)) < 1e-7

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            a = rng.standard_normal(16) * rng.uniform(0.01, 10)
            b = rng.standard_normal(16) * rng.uniform(0.01, 10)
            value = mrae(a, b)
            assert value == mrae(b, a)
            assert 0.0 <= value <= 2.0

    def test_scale_invariance_away_from_zero(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            # Epsilon perturbs exactness near zero, so magnitudes stay >= 1.
            a = rng.choice([-1.0, 1.0], 16) * rng.uniform(1.0, 10.0, 16)
            b = rng.choice([-1.0, 1.0], 16) * rng.uniform(1.0, 10.0, 16)
            c = rng.uniform(0.5, 20.0)
            assert abs(mrae(c * a, c * b) - mrae(a, b)) < 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mrae(np.zeros(3), np.zeros(4))


class TestCosineSimilarity:
    def test_self_similarity(self):
        x = np.array([1.0, 2.0, 3.0])
        assert cosine_similarity(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_opposite(self):
        x = np.array([1.0, -2.0, 0.5])
        assert cosine_similarity(x, -x) == pytest.approx(-1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_zero_norm_rejected(self):
        with pytest.raises(SimilarityError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])


def traced_run(**overrides):
    base = dict(num_layers=2, num_steps=3, seq_len=16, num_heads=2, head_dim=4, seed=5)
    base.update(overrides)
    cfg = ModelConfig(**base)
    _, traces, _ = sample(ToyDiT(cfg), None, trace=True)
    return cfg, traces


class TestSimilarityReport:
    def test_single_step_matrix_is_one(self):
        _, traces = traced_run(num_steps=1)
        report = similarity_report(traces, STEP_WISE)
        for matrix in report.values():
            np.testing.assert_array_equal(matrix.values, np.ones((1, 1)))

    def test_step_wise_symmetric_with_unit_diagonal(self):
        cfg, traces = traced_run()
        report = similarity_report(traces, STEP_WISE)
        assert sorted(report) == list(range(cfg.num_layers))
        for matrix in report.values():
            assert matrix.values.shape == (cfg.num_steps, cfg.num_steps)
            np.testing.assert_array_equal(matrix.values, matrix.values.T)
            np.testing.assert_array_equal(np.diag(matrix.values), np.ones(cfg.num_steps))

    def test_time_independent_model_has_unit_offdiagonals(self):
        # With identical timestep rows and a frozen latent, every step's
        # evaluation is identical, so all pairwise similarities are 1.
        cfg, _ = traced_run()
        model = ToyDiT(cfg)
        model.time_embed = np.tile(model.time_embed[:1], (cfg.num_steps, 1))
        from attnplan import CacheState, RunRecorder, Strategy, initial_latent, step_eps

        recorder = RunRecorder(trace=True)
        cache = CacheState()
        x = initial_latent(cfg)
        strategies = [Strategy.FULL] * cfg.num_layers
        for t in range(cfg.num_steps):
            step_eps(model, x, t, 0, strategies, cache, recorder)
            cache.end_step(t)
        report = similarity_report(recorder.traces(), STEP_WISE)
        for matrix in report.values():
            np.testing.assert_allclose(matrix.values, 1.0, atol=1e-6)

    def test_cfg_wise_vector_shape_and_range(self):
        cfg, traces = traced_run()
        report = similarity_report(traces, CFG_WISE)
        for matrix in report.values():
            assert matrix.values.shape == (cfg.num_steps,)
            assert np.all(np.abs(matrix.values) <= 1.0 + 1e-12)

    def test_missing_traces_rejected(self):
        with pytest.raises(ValueError):
            similarity_report([], STEP_WISE)

    def test_unknown_mode_rejected(self):
        _, traces = traced_run()
        with pytest.raises(ValueError):
            similarity_report(traces, "sideways")


class TestCsvSerialization:
    def test_step_wise_round_trip(self, tmp_path):
        cfg, traces = traced_run()
        report = similarity_report(traces, STEP_WISE)
        path = tmp_path / "sim_step_layer0.csv"
        write_similarity_csv(report[0], path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == ",".join(str(t) for t in range(cfg.num_steps))
        assert len(lines) == cfg.num_steps + 1
        parsed = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
        np.testing.assert_array_equal(parsed, report[0].values)

    def test_cfg_wise_is_single_row(self, tmp_path):
        cfg, traces = traced_run()
        report = similarity_report(traces, CFG_WISE)
        path = tmp_path / "sim_cfg_layer0.csv"
        write_similarity_csv(report[0], path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 2
        assert len(lines[1].split(",")) == cfg.num_steps
