"""
Train, quantize and compare
===========================

A 784-4-10 MLP trained on 6,000 MNIST images, evaluated in float and in
bit-exact fixed point, then swept over weight precisions.
"""

import sys
from pathlib import Path

from nn2evm.data import load_mnist
from nn2evm.inference import evaluate, precision_sweep, quantize_model
from nn2evm.model_ir import parse_arch_notation
from nn2evm.trainer import HyperParams, train_mlp

root = Path(sys.argv[1] if len(sys.argv) > 1 else "data/mnist")
train_x, train_y = load_mnist(root, "train")
test_x, test_y = load_mnist(root, "test")

# "2L4N10N": two layers, 4 hidden neurons, 10 outputs
arch = parse_arch_notation("2L4N10N", 784)
print(arch.notation(), arch.n_params, "parameters")

first = slice(0, 6000)
history = []
model = train_mlp(arch, train_x.subset(first), train_y.subset(first), HyperParams(seed=0), history)
print("loss per epoch:", [round(v, 3) for v in history[::5]])

# float and fixed point side by side on 1,000 held-out images
qm = quantize_model(model, 18)
rep = evaluate(model, test_x, test_y, 1000, fixed=qm)
print(f"float {rep.accuracy:.3f}  fixed {rep.fixed_accuracy:.3f}  disagreements {len(rep.disagreements)}")

# shrinking the weights' decimals barely matters until nothing is left
print(precision_sweep(model, test_x, test_y, [18, 10, 4, 2, 1, 0], 40).to_csv())
