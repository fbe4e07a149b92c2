import numpy as np
import pytest

from tgraph.errors import TrainingDivergedError
from tgraph.metrics import camera_center_accuracy, rotation_accuracy
from tgraph.mlp import Mlp
from tgraph.regressor import (LOG_COLUMNS, JointModel, TrainConfig,
                              baseline_predict, init_model, load_checkpoint,
                              save_checkpoint, tgraph_forward, train_joint)
from tgraph.synth import gen_center_facing


def small_dataset(count=24, n=4, seed0=100):
    return [gen_center_facing(n, look_jitter_deg=6.0, radial_jitter=0.3,
                              seed=seed0 + k, noise_sigma=0.02)
            for k in range(count)]


class TestTrainConfig:
    def test_rejects_unknown_representation(self):
        with pytest.raises(ValueError):
            TrainConfig(representation="both")

    def test_rejects_bad_hyperparameters(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(val_fraction=1.0)


class TestInitModel:
    def test_none_has_no_graph_head(self):
        model = init_model(16, TrainConfig(representation="none"))
        assert model.tgraph_head is None

    @pytest.mark.parametrize("rep,width", [("relative-t", 3), ("pair-t", 6)])
    def test_graph_head_depth_and_width(self, rep, width):
        config = TrainConfig(representation=rep)
        model = init_model(16, config)
        assert model.tgraph_head.n_layers == 6
        assert model.tgraph_head.out_width == width
        assert model.tgraph_head.in_width == 2 * config.d_latent

    def test_seeded_init_reproducible(self):
        a = init_model(16, TrainConfig(seed=5))
        b = init_model(16, TrainConfig(seed=5))
        assert np.array_equal(a.encoder.params[0][0], b.encoder.params[0][0])


class TestTgraphForward:
    def test_payload_widths(self, rng):
        for rep, width in (("relative-t", 3), ("pair-t", 6)):
            head = Mlp([8, 16, width], rng=rng)
            out = tgraph_forward(head, rng.normal(size=4), rng.normal(size=4), rep)
            assert out.shape == (width,)

    def test_width_mismatch_rejected(self, rng):
        head = Mlp([8, 16, 3], rng=rng)
        with pytest.raises(ValueError):
            tgraph_forward(head, rng.normal(size=4), rng.normal(size=4), "pair-t")
        with pytest.raises(ValueError):
            tgraph_forward(head, rng.normal(size=5), rng.normal(size=4), "relative-t")


class TestTrainJoint:
    @pytest.mark.parametrize("rep", ["none", "relative-t", "pair-t"])
    def test_loss_decreases(self, rep):
        data = small_dataset()
        config = TrainConfig(representation=rep, epochs=60, lr=3e-3, seed=0,
                             patience=60)
        model, log = train_joint(data, config)
        assert log[-1]["l_full"] < log[0]["l_full"]
        assert (model.tgraph_head is None) == (rep == "none")

    def test_log_columns(self):
        _, log = train_joint(small_dataset(count=12), TrainConfig(epochs=3))
        assert tuple(log[0].keys()) == LOG_COLUMNS
        assert [row["epoch"] for row in log] == list(range(len(log)))

    def test_ablation_has_zero_graph_loss(self):
        _, log = train_joint(small_dataset(count=12),
                             TrainConfig(representation="none", epochs=3))
        assert all(row["l_tgraph"] == 0.0 for row in log)

    def test_deterministic(self):
        data = small_dataset(count=12)
        config = TrainConfig(epochs=5, seed=3)
        a, log_a = train_joint(data, config)
        b, log_b = train_joint(data, config)
        assert log_a == log_b
        assert np.array_equal(a.encoder.params[0][0], b.encoder.params[0][0])

    def test_learns_task(self):
        # joint training on an easy configuration reaches useful accuracy;
        # rotations converge slower than centers at this budget, hence the
        # asymmetric thresholds
        data = small_dataset(count=48)
        config = TrainConfig(representation="pair-t", epochs=150, lr=3e-3,
                             seed=0, patience=150)
        model, _ = train_joint(data, config)
        holdout = small_dataset(count=16, seed0=9_000)
        rot = np.mean([rotation_accuracy(baseline_predict(model, s.features), s.poses)
                       for s in holdout])
        center = np.mean([camera_center_accuracy(baseline_predict(model, s.features), s.poses)
                          for s in holdout])
        assert rot > 0.2
        assert center > 0.5

    def test_divergence_raises(self):
        # non-finite features poison the forward pass; training must fail
        # loudly instead of logging NaN losses
        data = small_dataset(count=12)
        bad = data[0].features.copy()
        bad[0, 0] = np.nan
        data[0] = type(data[0])(poses=data[0].poses, features=bad,
                                scenario=data[0].scenario, seed=data[0].seed,
                                params=data[0].params)
        with pytest.raises(TrainingDivergedError):
            train_joint(data, TrainConfig(epochs=5))

    def test_early_stopping_can_shorten_run(self):
        data = small_dataset(count=16)
        config = TrainConfig(epochs=500, lr=0.0, patience=5)
        _, log = train_joint(data, config)
        assert len(log) <= 10  # lr 0 never improves; patience cuts it off

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train_joint([], TrainConfig())

    def test_mixed_camera_counts_supported(self):
        data = small_dataset(count=8, n=3) + small_dataset(count=8, n=5, seed0=500)
        _, log = train_joint(data, TrainConfig(epochs=3))
        assert len(log) == 3


class TestBaselinePredict:
    def test_first_camera_is_canonical(self):
        data = small_dataset(count=12)
        model, _ = train_joint(data, TrainConfig(epochs=5))
        poses = baseline_predict(model, data[0].features)
        assert len(poses) == 4
        assert np.allclose(poses[0].rotation, np.eye(3), atol=1e-9)
        assert np.allclose(poses[0].translation, np.zeros(3), atol=1e-9)

    def test_outputs_valid_rotations(self):
        model, _ = train_joint(small_dataset(count=12), TrainConfig(epochs=5))
        for scene in small_dataset(count=4, seed0=800):
            for p in baseline_predict(model, scene.features):
                assert np.allclose(p.rotation @ p.rotation.T, np.eye(3), atol=1e-9)


class TestCheckpoints:
    def test_roundtrip_without_graph_head(self, tmp_path):
        model, _ = train_joint(small_dataset(count=12),
                               TrainConfig(representation="pair-t", epochs=3))
        path = tmp_path / "model.json"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert loaded.tgraph_head is None  # inference never sees the graph head
        assert loaded.representation == "pair-t"
        features = small_dataset(count=1, seed0=700)[0].features
        a = baseline_predict(model, features)
        b = baseline_predict(loaded, features)
        for pa, pb in zip(a, b):
            assert np.allclose(pa.rotation, pb.rotation, atol=1e-12)
            assert np.allclose(pa.translation, pb.translation, atol=1e-12)

    def test_opt_in_graph_head_loading(self, tmp_path):
        model, _ = train_joint(small_dataset(count=12),
                               TrainConfig(representation="relative-t", epochs=3))
        path = tmp_path / "model.json"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path, with_tgraph_head=True)
        assert loaded.tgraph_head is not None
        assert loaded.tgraph_head.out_width == 3
