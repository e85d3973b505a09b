import json
import math

import numpy as np
import pytest

from tbnet.data.dataset import DatasetManifest, ImageRecord, split_dataset, scan_dataset
from tbnet.data.batches import batch_iter
from tbnet.engine import ops
from tbnet.engine.tensor import Tensor, backward, no_grad
from tbnet.errors import (
    ArchitectureMismatchError,
    ConfigError,
    ContractError,
    FormatError,
    IntegrityError,
    ManifestError,
    NonFiniteLossError,
)
from tbnet.models import build_squeezenet
from tbnet.training import (
    SGD,
    Adam,
    ConfusionMatrix,
    EvalReport,
    TrainConfig,
    adam_step,
    evaluate,
    load_checkpoint,
    metrics_from_cm,
    predict_image,
    predict_split,
    save_checkpoint,
    sgd_step,
    train,
    write_history,
)
from tbnet.training.checkpoint import MAGIC
from tbnet.training.metrics import confusion_table, metrics_table
from tbnet.utils.config import validate_config
from tbnet.utils.formatting import format_percent


class TestSGD:
    def test_plain_step(self):
        w = np.array([1.0])
        sgd_step([w], [np.array([0.5])], [np.zeros(1)], lr=0.1, momentum=0.0)
        assert w[0] == pytest.approx(0.95)

    def test_zero_gradient_is_fixed_point(self):
        w = np.array([1.0, -2.0])
        sgd_step([w], [np.zeros(2)], [np.zeros(2)], lr=0.1, momentum=0.9)
        assert np.array_equal(w, [1.0, -2.0])

    def test_momentum_two_steps(self):
        w, v = np.array([0.0]), np.zeros(1)
        sgd_step([w], [np.ones(1)], [v], lr=0.1, momentum=0.9)
        assert w[0] == pytest.approx(-0.1)
        sgd_step([w], [np.ones(1)], [v], lr=0.1, momentum=0.9)
        assert w[0] == pytest.approx(-0.29)

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            sgd_step([np.zeros(3)], [np.zeros(2)], [np.zeros(3)], lr=0.1)

    def test_class_reads_tensor_gradients(self):
        p = Tensor([1.0], requires_grad=True)
        p.grad[:] = 0.5
        SGD([p], lr=0.1, momentum=0.0).step()
        assert p.data[0] == pytest.approx(0.95)

    def test_non_positive_learning_rate(self):
        with pytest.raises(ContractError):
            SGD([Tensor([1.0], requires_grad=True)], lr=0.0)


class TestAdam:
    def test_first_step_moves_by_lr(self):
        for g in (1e-3, 0.5, -7.0):
            w = np.array([1.0])
            adam_step([w], [np.array([g])], [np.zeros(1)], [np.zeros(1)], lr=0.01, t=1)
            assert abs(w[0] - 1.0) == pytest.approx(0.01, rel=1e-4)
            assert np.sign(1.0 - w[0]) == np.sign(g)

    def test_zero_gradient_is_fixed_point(self):
        w = np.array([3.0])
        m, v = np.zeros(1), np.zeros(1)
        for t in range(1, 6):
            adam_step([w], [np.zeros(1)], [m], [v], lr=0.1, t=t)
        assert w[0] == 3.0

    def test_step_counter_starts_at_one(self):
        with pytest.raises(ContractError):
            adam_step([np.zeros(1)], [np.zeros(1)], [np.zeros(1)], [np.zeros(1)], lr=0.1, t=0)

    def test_deterministic_trajectory(self):
        def run():
            rng = np.random.default_rng(0)
            p = Tensor(rng.normal(size=4), requires_grad=True, dtype=np.float64)
            opt = Adam([p], lr=0.05)
            for _ in range(10):
                p.grad[:] = rng.normal(size=4)
                opt.step()
            return p.data.copy()
        assert np.array_equal(run(), run())

    def test_minimises_quadratic(self, float64):
        p = Tensor([5.0, -3.0], requires_grad=True)
        opt = Adam([p], lr=0.1)
        for _ in range(300):
            backward(ops.sum_all(ops.square(p)))
            opt.step()
            opt.zero_grads()
        assert np.allclose(p.data, 0.0, atol=1e-2)


class TestMetrics:
    def test_squeezenet_row(self):
        m = metrics_from_cm(ConfusionMatrix(tp=80, fn=20, fp=2, tn=99))
        assert m.accuracy == pytest.approx(0.8905, abs=1e-4)
        assert m.precision == pytest.approx(0.9756, abs=1e-4)
        assert m.recall == pytest.approx(0.8000, abs=1e-4)
        assert m.f1 == pytest.approx(0.8791, abs=1e-4)
        assert [format_percent(v) for v in (m.accuracy, m.precision, m.recall)] == ["89%", "98%", "80%"]
        # these counts give an F1 that rounds to 88 against a target row of 87
        assert abs(m.f1 * 100 - 87) <= 1

    def test_resnet_row(self):
        m = metrics_from_cm(ConfusionMatrix(tp=52, fn=48, fp=7, tn=94))
        assert m.accuracy == pytest.approx(0.7264, abs=1e-4)
        assert m.precision == pytest.approx(0.8814, abs=1e-4)
        assert m.recall == pytest.approx(0.5200, abs=1e-4)
        assert m.f1 == pytest.approx(0.6541, abs=1e-4)
        assert [format_percent(v) for v in (m.accuracy, m.precision, m.recall, m.f1)] == ["73%", "88%", "52%", "65%"]

    def test_degenerate_predictor(self):
        m = metrics_from_cm(ConfusionMatrix(tp=0, fn=10, fp=0, tn=10))
        assert m.recall == 0.0
        assert m.precision == 0.0 and m.undefined["precision"]
        assert m.f1 == 0.0 and m.undefined["f1"]
        assert not m.undefined["recall"]

    def test_constant_normal_on_test_split(self):
        report = EvalReport.build(ConfusionMatrix(tp=0, fn=100, fp=0, tn=101), mean_loss=0.7)
        assert report.accuracy == pytest.approx(101 / 201)
        assert report.recall == 0.0
        assert report.undefined["precision"]

    def test_perfect_classifier(self):
        report = EvalReport.build(ConfusionMatrix(tp=100, fn=0, fp=0, tn=101), mean_loss=0.01)
        assert (report.accuracy, report.precision, report.recall, report.f1) == (1.0, 1.0, 1.0, 1.0)
        assert report.samples == 201

    def test_empty_matrix(self):
        with pytest.raises(ContractError):
            metrics_from_cm(ConfusionMatrix())

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionMatrix(tp=-1)

    def test_brute_force_agreement(self, rng):
        for _ in range(50):
            labels = rng.integers(0, 2, size=40)
            preds = rng.integers(0, 2, size=40)
            cm = ConfusionMatrix.from_predictions(preds, labels)
            assert cm.total == 40
            m = metrics_from_cm(cm)
            tp = sum(1 for p, y in zip(preds, labels) if p == 1 and y == 1)
            fp = sum(1 for p, y in zip(preds, labels) if p == 1 and y == 0)
            fn = sum(1 for p, y in zip(preds, labels) if p == 0 and y == 1)
            assert m.accuracy == np.mean(preds == labels)
            if tp + fp:
                assert m.precision == tp / (tp + fp)
            if tp + fn:
                assert m.recall == tp / (tp + fn)
            if not m.undefined["f1"] and not m.undefined["precision"] and not m.undefined["recall"]:
                assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12

    def test_matrices_add(self):
        total = ConfusionMatrix(tp=1, fn=2, fp=3, tn=4) + ConfusionMatrix(tp=1, fn=1, fp=1, tn=1)
        assert total == ConfusionMatrix(tp=2, fn=3, fp=4, tn=5)

    def test_report_json_schema(self):
        report = EvalReport.build(ConfusionMatrix(tp=80, fn=20, fp=2, tn=99), 0.32, arch="squeezenet", split="test")
        data = json.loads(report.model_dump_json())
        assert set(data) == {"arch", "split", "samples", "confusion", "accuracy", "precision", "recall", "f1", "mean_loss", "undefined"}
        assert data["confusion"] == {"tp": 80, "fn": 20, "fp": 2, "tn": 99}
        assert EvalReport.model_validate_json(report.model_dump_json()) == report

    def test_tables_render_rows(self):
        from rich.console import Console
        report = EvalReport.build(ConfusionMatrix(tp=80, fn=20, fp=2, tn=99), 0.32)
        console = Console(record=True, width=100)
        console.print(metrics_table({"SqueezeNet": report}))
        console.print(confusion_table(report.confusion))
        text = console.export_text()
        for row in ("F1 Score", "Accuracy", "Loss", "Precision", "Recall"):
            assert row in text
        assert "89%" in text and "32%" in text


class TestCheckpoint:
    def test_round_trip_is_bitwise(self, tmp_path, rng):
        model = build_squeezenet(seed=3, simple_bypass=True)
        path = save_checkpoint(model, tmp_path / "model.tbdl")
        loaded = load_checkpoint(path)
        assert loaded.architecture == "squeezenet"
        assert loaded.spec.simple_bypass
        for name, array in model.state_dict().items():
            assert np.array_equal(loaded.state_dict()[name], array), name

        x = Tensor(rng.uniform(size=(2, 3, 64, 64)))
        with no_grad():
            a = model.eval()(x).data
            b = loaded.eval()(x).data
        assert np.array_equal(a, b)

    def test_header(self, tmp_path):
        path = save_checkpoint(build_squeezenet(seed=0), tmp_path / "m.tbdl")
        raw = path.read_bytes()
        assert raw[:4] == MAGIC
        assert int.from_bytes(raw[4:8], "little") == 1

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.tbdl"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_unsupported_version(self, tmp_path):
        path = save_checkpoint(build_squeezenet(seed=0), tmp_path / "m.tbdl")
        raw = bytearray(path.read_bytes())
        raw[4:8] = (2).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_truncated_file(self, tmp_path):
        path = save_checkpoint(build_squeezenet(seed=0), tmp_path / "m.tbdl")
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(IntegrityError):
            load_checkpoint(path)

    def test_trailing_bytes(self, tmp_path):
        path = save_checkpoint(build_squeezenet(seed=0), tmp_path / "m.tbdl")
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(IntegrityError):
            load_checkpoint(path)

    def test_architecture_mismatch(self, tmp_path):
        path = save_checkpoint(build_squeezenet(seed=0), tmp_path / "m.tbdl")
        with pytest.raises(ArchitectureMismatchError):
            load_checkpoint(path, expected_arch="resnet50")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / "absent.tbdl")


def tiny_config(**overrides) -> TrainConfig:
    values = dict(arch="squeezenet", epochs=1, batch_size=6, lr=1e-3, seed=0)
    values.update(overrides)
    return TrainConfig(**values)


class TestTrain:
    def test_zero_epochs_is_config_error(self):
        with pytest.raises(ConfigError, match="epochs"):
            validate_config(TrainConfig, epochs=0)

    def test_unknown_optimizer_is_config_error(self):
        with pytest.raises(ConfigError):
            validate_config(TrainConfig, optimizer="rmsprop")

    def test_one_epoch_history_and_checkpoint(self, tiny_manifest, tmp_path):
        cfg = tiny_config(checkpoint_path=tmp_path / "model.tbdl")
        epochs_seen = []
        result = train(cfg, tiny_manifest, on_epoch=epochs_seen.append)
        assert len(result.history) == 1 and epochs_seen == result.history
        assert result.best_epoch == 1
        record = result.history[0]
        assert 0.0 <= record.train_acc <= 1.0 and 0.0 <= record.val_acc <= 1.0
        assert (tmp_path / "model.tbdl").exists()
        assert not result.model.training

    def test_serial_training_is_reproducible(self, tiny_manifest, tmp_path):
        a = train(tiny_config(epochs=2), tiny_manifest)
        b = train(tiny_config(epochs=2), tiny_manifest)
        assert a.history == b.history
        path_a = write_history(a.history, tmp_path / "a.csv")
        path_b = write_history(b.history, tmp_path / "b.csv")
        assert path_a.read_bytes() == path_b.read_bytes()
        assert len(path_a.read_text().splitlines()) == 2

    def test_threaded_decoding_matches_serial(self, tiny_manifest):
        serial = train(tiny_config(workers=1), tiny_manifest)
        threaded = train(tiny_config(workers=3), tiny_manifest)
        assert serial.history == threaded.history

    def test_best_epoch_is_restored(self, tiny_manifest):
        result = train(tiny_config(epochs=3), tiny_manifest)
        best = result.best
        assert best is not None
        assert all(best.val_acc >= r.val_acc for r in result.history)
        _, val_loss = predict_split(result.model, tiny_manifest, "val")
        assert val_loss == pytest.approx(best.val_loss, rel=1e-5)

    def test_patience_stops_early(self, tiny_manifest, monkeypatch):
        from tbnet.training import trainer
        from tbnet.training.evaluate import Prediction
        frozen = [Prediction("a.png", 1, 1, (0.4, 0.6)), Prediction("b.png", 0, 1, (0.4, 0.6))]
        monkeypatch.setattr(trainer, "predict_split", lambda *args, **kwargs: (frozen, 0.5))
        result = train(tiny_config(epochs=6, patience=2), tiny_manifest)
        assert result.stopped_early
        assert [r.epoch for r in result.history] == [1, 2, 3]
        assert result.best_epoch == 1

    def test_non_finite_loss_aborts(self, tiny_manifest):
        model = build_squeezenet(seed=0)
        for tensor in model.parameters():
            tensor.data[...] = np.nan
        with pytest.raises(NonFiniteLossError) as excinfo:
            train(tiny_config(lr=0.5), tiny_manifest, model=model)
        assert excinfo.value.epoch == 1
        assert excinfo.value.batch == 0
        assert excinfo.value.lr == 0.5

    def test_missing_val_split(self, tiny_manifest):
        records = tuple(r for r in tiny_manifest.records if r.split != "val")
        with pytest.raises(ManifestError, match="0 'val' images"):
            train(tiny_config(), DatasetManifest(records, tiny_manifest.seed))

    def test_single_train_image_is_rejected(self, tiny_manifest):
        train_records = [r for r in tiny_manifest.records if r.split == "train"]
        records = tuple(r for r in tiny_manifest.records if r.split != "train") + (train_records[0],)
        with pytest.raises(ManifestError, match="at least 2"):
            train(tiny_config(), DatasetManifest(records, tiny_manifest.seed))

    def test_fixed_batch_descent(self, tiny_manifest):
        model = build_squeezenet(seed=0)
        opt = Adam(model.parameters(), lr=1e-3)
        batch = next(batch_iter(tiny_manifest, "train", 8))
        losses = []
        for _ in range(50):
            loss = ops.softmax_cross_entropy(model(batch.pixels), batch.labels)
            losses.append(loss.item())
            backward(loss)
            opt.step()
            opt.zero_grads()
        assert losses[-1] < losses[0]


class TestEvaluate:
    def test_report_is_deterministic(self, tiny_manifest):
        model = build_squeezenet(seed=1)
        a = evaluate(model, tiny_manifest, "test")
        b = evaluate(model, tiny_manifest, "test", workers=2, batch_size=1)
        assert a.confusion == b.confusion
        assert a.mean_loss == pytest.approx(b.mean_loss, rel=1e-5)
        assert a.samples == 4
        assert a.arch == "squeezenet" and a.split == "test"

    def test_empty_split(self, tiny_manifest):
        records = tuple(r for r in tiny_manifest.records if r.split != "test")
        with pytest.raises(ManifestError, match="'test'"):
            evaluate(build_squeezenet(seed=0), DatasetManifest(records, 0), "test")

    def test_evaluate_leaves_mode_untouched(self, tiny_manifest):
        model = build_squeezenet(seed=0)
        evaluate(model, tiny_manifest, "val")
        assert model.training

    def test_predict_image_matches_split_prediction(self, tiny_manifest):
        model = build_squeezenet(seed=2)
        predictions, _ = predict_split(model, tiny_manifest, "test")
        for prediction in predictions:
            label, probs = predict_image(model, prediction.path)
            assert math.isclose(sum(probs.values()), 1.0, abs_tol=1e-6)
            assert label == ("TB" if prediction.prediction == 1 else "Normal")


@pytest.mark.slow
class TestAcceptance:
    @pytest.mark.parametrize("arch", ["squeezenet", "resnet50"])
    def test_overfits_sixteen_images(self, tmp_path, arch):
        from tbnet.data.synthetic import write_synthetic_dataset
        from tbnet.models import build_model
        root = write_synthetic_dataset(tmp_path / "d", per_class=8, seed=1)
        records = tuple(ImageRecord(r.path, r.label, "train") for r in scan_dataset(root).records)
        manifest = DatasetManifest(records, 0)
        model = build_model(arch, seed=0)
        opt = Adam(model.parameters(), lr=1e-3)
        batch = next(batch_iter(manifest, "train", 16))
        for _ in range(200):
            loss = ops.softmax_cross_entropy(model(batch.pixels), batch.labels)
            backward(loss)
            opt.step()
            opt.zero_grads()
        model.eval()
        with no_grad():
            predicted = model(batch.pixels).data.argmax(axis=1)
        assert np.array_equal(predicted, batch.labels)

    @pytest.mark.parametrize("arch", ["squeezenet", "resnet50"])
    def test_synthetic_end_to_end(self, tmp_path, arch):
        from tbnet.data.dataset import SplitCounts
        from tbnet.data.synthetic import write_synthetic_dataset
        root = write_synthetic_dataset(tmp_path / "d", per_class=250, seed=0)
        counts = SplitCounts(train_per_class=200, val_fraction=0.1, test_tb=50, test_normal=50)
        manifest = split_dataset(scan_dataset(root), counts, seed=0)
        result = train(TrainConfig(arch=arch, epochs=10), manifest)
        assert result.history[0].train_loss < math.log(2)
        assert evaluate(result.model, manifest, "test").accuracy >= 0.9
