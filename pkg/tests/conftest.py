import os
from pathlib import Path

import numpy as np
import pytest

from nn2evm.inference import quantize_model
from nn2evm.model_ir import ArchSpec, Model

ROOT = Path(__file__).resolve().parents[1]
MNIST = ROOT / "data" / "mnist"

# a local solcjs install is picked up when nothing else is configured
_SOLCJS = Path("/opt/solcjs/node_modules/.bin/solcjs")
if "NN2EVM_SOLC" not in os.environ and _SOLCJS.exists():
    os.environ["NN2EVM_SOLC"] = str(_SOLCJS)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")


def random_model(rng, dims, scale=1.0) -> Model:
    arch = ArchSpec(dims[0], tuple(dims[1:]))
    n = len(dims) - 1
    ws = tuple(rng.normal(scale=scale, size=(dims[k + 1], dims[k])) for k in range(n))
    bs = tuple(rng.normal(scale=scale, size=dims[k + 1]) for k in range(n))
    return Model(arch, ws, bs)


def random_dims(rng, max_layers=3, max_width=6):
    n = int(rng.integers(1, max_layers + 1))
    return [int(v) for v in rng.integers(1, max_width + 1, size=n + 1)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mnist_root():
    if not (MNIST / "train-images-idx3-ubyte.gz").exists():
        pytest.skip("MNIST files not present")
    return MNIST


@pytest.fixture(scope="session")
def model_784():
    """A 784-4-10 model with trained-like weight magnitudes (no training needed)."""
    r = np.random.default_rng(7)
    return random_model(r, [784, 4, 10], scale=0.05)


@pytest.fixture(scope="session")
def qm_784(model_784):
    return quantize_model(model_784, 18)


FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def toy_122():
    """The hand-traced 1-2-2 model: (quantized model, fixture document)."""
    import json

    from nn2evm.fixed_point import fp_from_decimal
    from nn2evm.inference import QuantizedModel

    doc = json.loads((FIXTURES / "mlp_1_2_2.json").read_text())
    raw = lambda s: fp_from_decimal(s).raw  # noqa: E731
    ws = tuple(tuple(tuple(raw(v) for v in row) for row in layer) for layer in doc["weights"])
    bs = tuple(tuple(raw(v) for v in layer) for layer in doc["biases"])
    return QuantizedModel(ArchSpec(1, (2, 2)), 18, ws, bs), doc
