import time

import numpy as np
import pytest

from pointdream.classifier import Model, ModelConfig, TrainConfig, evaluate, train
from pointdream.synthgen import DatasetSpec, build_dataset


def linear_toy_model(bias: float = 1.0) -> Model:
    """One pooled feature relu(x + y + z + bias) passed straight through as the only logit."""
    cfg = ModelConfig(point_widths=(3, 1), head_widths=(1, 1), num_classes=1)
    params = {
        "point.0.W": np.ones((3, 1), np.float32),
        "point.0.b": np.full((1,), bias, np.float32),
        "head.0.W": np.ones((1, 1), np.float32),
        "head.0.b": np.zeros((1,), np.float32),
    }
    return Model(cfg, params, ["up"])


def random_model(seed: int, widths=(3, 16, 32), head=(32, 16, 5), scale: float = 1.0) -> Model:
    cfg = ModelConfig(point_widths=widths, head_widths=head, num_classes=head[-1])
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in cfg.param_shapes().items():
        params[name] = (scale * rng.normal(size=shape) / np.sqrt(shape[0])).astype(np.float32)
    return Model(cfg, params)


@pytest.fixture(scope="session")
def default_dataset():
    return build_dataset(DatasetSpec())


@pytest.fixture(scope="session")
def trained(default_dataset):
    """Desk-scale model on the default synthetic dataset with default hyperparameters."""
    ds = default_dataset
    start = time.perf_counter()
    model, history = train(ds.train, ModelConfig(), TrainConfig(), ds.label_names)
    elapsed = time.perf_counter() - start
    return {
        "model": model,
        "history": history,
        "seconds": elapsed,
        "test_eval": evaluate(model, ds.test),
    }


_criteria: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record and print a PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        _criteria[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        ok, detail = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
