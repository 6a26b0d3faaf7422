import numpy as np
import pytest

from tcwvnet import nn
from tcwvnet.nn import Layer, LayerSpec, MlpParams


def fd_gradients(params: MlpParams, x, y, h=1e-6):
    """Central finite differences of the single-sample loss (y - F(x))^2
    with respect to every weight and bias, using only ``nn.forward``."""
    def loss(p):
        return (y - nn.forward(p, x)[0]) ** 2

    work = params.copy()
    out = []
    for arr in work.arrays():
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss(work)
            flat[i] = orig - h
            down = loss(work)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def random_params(specs, rng, bias_scale=0.1):
    layers = []
    for s in specs:
        w = rng.normal(0, np.sqrt(2.0 / s.input_dim), size=(s.output_dim, s.input_dim))
        b = rng.normal(0, bias_scale, size=s.output_dim)
        layers.append(Layer(w, b, s))
    return MlpParams(layers)


def one_one(w, b, activation="linear"):
    return MlpParams([Layer([[w]], [b], LayerSpec(1, 1, activation))])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL summary line per acceptance criterion."""
    def record(name: str, ok: bool, detail: str = ""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
