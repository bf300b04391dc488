"""Command-line entry point: ``nn2evm <subcommand> [flags]``.

Every subcommand writes its results only below ``--out``. Failures print a
single JSON line to stderr, ``{"error": ..., "exit_code": ..., "message": ...}``,
and exit with the code of the failing stage.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .codegen import LEVELS, generate_contract, plan_weight_upload
from .data import ImageSet, LabelSet, load_images, load_labels, load_mnist
from .errors import Nn2EvmError, TrainingError
from .gas import GasConfig, estimate_deploy_gas, estimate_upload_gas, reports_to_csv
from .inference import (
    evaluate,
    precision_sweep,
    predict_fixed,
    predict_float,
    quantize_model,
)
from .model_ir import Model, load_model_manifest, parse_arch_notation, save_model_manifest
from .trainer import HyperParams, init_params, train_mlp

EXIT_USAGE = 2
EXIT_MISSING_FILE = 11
DEFAULT_DATA = os.environ.get("NN2EVM_DATA", "data/mnist")
_GAS_KEYS = {f.name for f in fields(GasConfig)}


class UsageError(Nn2EvmError):
    exit_code = EXIT_USAGE


# -- argument parsing ----------------------------------------------------------


def _levels(text: str) -> list[str]:
    text = text.strip().upper()
    if "-" in text:
        a, b = text.split("-", 1)
        if a not in LEVELS or b not in LEVELS or LEVELS.index(a) > LEVELS.index(b):
            raise argparse.ArgumentTypeError(f"bad level range {text!r}")
        return list(LEVELS[LEVELS.index(a) : LEVELS.index(b) + 1])
    out = [t for t in text.split(",") if t]
    if not out or any(t not in LEVELS for t in out):
        raise argparse.ArgumentTypeError(f"levels must be drawn from {','.join(LEVELS)}")
    return out


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _precision(text: str) -> int:
    d = int(text)
    if not 0 <= d <= 18:
        raise argparse.ArgumentTypeError("precision must be in 0..18")
    return d


def _margin(text: str) -> float:
    m = float(text)
    if not 0 < m <= 1:
        raise argparse.ArgumentTypeError("margin must be in (0, 1]")
    return m


def _positive_int(text: str) -> int:
    v = int(float(text))
    if v <= 0:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p, *, model=False, data=False, gas=False, quant=False):
    p.add_argument("--out", default="out", help="output directory (created if missing)")
    p.add_argument("--config", help="JSON file with flag defaults (keys as flag names)")
    p.add_argument("--seed", type=int, default=0)
    if model:
        p.add_argument("--model", required=True, help="model manifest (JSON)")
    if quant:
        p.add_argument("--precision", type=_precision, default=18, help="weight decimals kept, 0..18")
    if data:
        p.add_argument("--data-dir", default=DEFAULT_DATA, help="directory holding the MNIST IDX files")
        p.add_argument("--split", choices=("train", "test"), default="test")
        p.add_argument("--images", help="IDX image file (overrides --data-dir)")
        p.add_argument("--labels", help="IDX label file (overrides --data-dir)")
    if gas:
        p.add_argument("--gas-limit", type=_positive_int, default=15_000_000)
        p.add_argument("--margin", type=_margin, default=0.9)
        p.add_argument("--gas-price-gwei", type=float, default=GasConfig.gas_price_gwei)
        p.add_argument("--eth-usd", type=float, default=GasConfig.eth_usd)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nn2evm", description="Convert trained MLPs to EVM inference contracts.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("train", help="train an MLP on MNIST and write its manifest")
    _common(s, data=True)
    s.set_defaults(split="train")
    s.add_argument("--arch", default="2L4N10N")
    s.add_argument("--input-dim", type=_positive_int, default=784)
    s.add_argument("--n-train", type=_positive_int, help="use only the first N training images")
    s.add_argument("--epochs", type=int, default=HyperParams.epochs)
    s.add_argument("--batch-size", type=_positive_int, default=HyperParams.batch_size)
    s.add_argument("--learning-rate", type=float, default=HyperParams.learning_rate)

    s = sub.add_parser("transpile", help="emit the Solidity contract and its parameter layout")
    _common(s, model=True, quant=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--level", type=_levels, default=["D"])
    g.add_argument("--levels", dest="level", type=_levels)
    s.add_argument("--compile", action="store_true", help="also compile with solc (see $NN2EVM_SOLC)")

    s = sub.add_parser("plan-upload", help="split the weight upload into transactions")
    _common(s, model=True, quant=True, gas=True)

    s = sub.add_parser("estimate-gas", help="deployment and upload gas with fiat cost")
    _common(s, model=True, quant=True, gas=True)
    s.add_argument("--level", type=str.upper, choices=LEVELS, default="D")

    s = sub.add_parser("infer", help="classify one image in float and fixed point")
    _common(s, model=True, quant=True, data=True)
    s.add_argument("--index", type=int, default=0)

    s = sub.add_parser("evaluate", help="per-image predictions and accuracy")
    _common(s, model=True, quant=True, data=True)
    s.add_argument("--n", type=_positive_int)

    s = sub.add_parser("sweep-precision", help="correct predictions per weight precision")
    _common(s, model=True, data=True)
    s.add_argument("--precisions", type=_int_list, default=[18, 10, 4, 2, 1, 0])
    s.add_argument("--n", type=_positive_int)

    s = sub.add_parser("report", help="gas versus hidden width for an architecture family")
    _common(s, quant=True, gas=True)
    s.add_argument("--input-dim", type=_positive_int, default=784)
    s.add_argument("--n-classes", type=_positive_int, default=10)
    s.add_argument("--hidden", type=_int_list, default=[2, 4, 8, 16, 32])
    s.add_argument("--level", type=str.upper, choices=LEVELS, default="D")
    return p


def _load_config(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must hold a table of settings")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def parse_args(argv) -> tuple[argparse.Namespace, dict]:
    """Flags override config-file values, which override built-in defaults.

    Returns the namespace and any extra gas constants from the config file.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        return args, {}
    conf = _load_config(args.config)
    extra_gas = {k: conf.pop(k) for k in list(conf) if k in _GAS_KEYS and k not in vars(args)}
    unknown = set(conf) - set(vars(args)) - {"command", "config"}
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    # re-parse with config values as defaults so explicit flags still win
    sub = parser._subparsers._group_actions[0].choices[args.command]
    for k, v in conf.items():
        action = next(a for a in sub._actions if a.dest == k)
        if action.type is not None and not isinstance(v, list):
            v = action.type(str(v))
        sub.set_defaults(**{k: v})
    return parser.parse_args(argv), extra_gas


# -- helpers -------------------------------------------------------------------


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(out: Path, name: str, text: str) -> Path:
    path = out / name
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def _model(args) -> Model:
    return load_model_manifest(Path(args.model).read_text(encoding="utf-8"))


def _dataset(args) -> tuple[ImageSet, LabelSet]:
    if args.images or args.labels:
        if not (args.images and args.labels):
            raise UsageError("--images and --labels must be given together")
        return load_images(args.images), load_labels(args.labels)
    return load_mnist(args.data_dir, args.split)


def _gas_config(args, extra: dict) -> GasConfig:
    values = dict(extra)
    values["gas_price_gwei"] = args.gas_price_gwei
    values["eth_usd"] = args.eth_usd
    return GasConfig.from_mapping(values)


# -- subcommands ---------------------------------------------------------------


def cmd_train(args, extra) -> str:
    arch = parse_arch_notation(args.arch, args.input_dim)
    images, labels = _dataset(args)
    if args.n_train is not None:
        if args.n_train > images.count:
            raise TrainingError(f"--n-train {args.n_train} exceeds the {images.count} available images")
        first = slice(0, args.n_train)
        images, labels = images.subset(first), labels.subset(first)
    hp = HyperParams(args.epochs, args.batch_size, args.learning_rate, args.seed)
    model = train_mlp(arch, images, labels, hp)
    path = _write(_outdir(args), "model.json", save_model_manifest(model))
    return f"wrote {path}"


def _layout_doc(art) -> dict:
    return {
        "arch": art.arch.notation(),
        "input_dim": art.arch.input_dim,
        "opt_level": art.opt_level,
        "source_bytes": art.source_bytes,
        "functions": art.function_signatures,
        "param_layout": [{"layer": b.layer, "kind": b.kind, "offset": b.offset, "length": b.length} for b in art.param_layout],
    }


def cmd_transpile(args, extra) -> str:
    qm = quantize_model(_model(args), args.precision)
    out = _outdir(args)
    lines = []
    for level in args.level:
        art = generate_contract(qm, level)
        doc = _layout_doc(art)
        if args.compile:
            from .codegen.compiler import with_bytecode

            art = with_bytecode(art)
            doc["bytecode_bytes"] = len(art.bytecode)
            doc["runtime_bytecode_bytes"] = art.bytecode_bytes
        _write(out, f"MLPClassifier_{level}.sol", art.source)
        _write(out, f"layout_{level}.json", json.dumps(doc, indent=1) + "\n")
        lines.append(f"level {level}: {art.source_bytes} source bytes")
    return "\n".join(lines)


def cmd_plan_upload(args, extra) -> str:
    qm = quantize_model(_model(args), args.precision)
    plan = plan_weight_upload(qm, args.gas_limit, args.margin, _gas_config(args, extra))
    path = _write(_outdir(args), "plan.json", plan.to_json())
    return f"{len(plan)} batches; wrote {path}"


def cmd_estimate_gas(args, extra) -> str:
    cfg = _gas_config(args, extra)
    qm = quantize_model(_model(args), args.precision)
    plan = plan_weight_upload(qm, args.gas_limit, args.margin, cfg)
    reports = [estimate_deploy_gas(generate_contract(qm, args.level), cfg), estimate_upload_gas(plan, cfg)]
    text = reports_to_csv(reports)
    _write(_outdir(args), "gas.csv", text)
    return text.rstrip("\n")


def cmd_infer(args, extra) -> str:
    model = _model(args)
    images, labels = _dataset(args)
    if not 0 <= args.index < images.count:
        raise UsageError(f"--index {args.index} outside 0..{images.count - 1}")
    px = images.pixels[args.index]
    doc = {
        "image_index": args.index,
        "label": int(labels.labels[args.index]) if args.index < labels.count else None,
        "pred_float": predict_float(model, px),
        "pred_fixed": predict_fixed(quantize_model(model, args.precision), px),
        "precision": args.precision,
    }
    text = json.dumps(doc)
    _write(_outdir(args), "infer.json", text + "\n")
    return text


def cmd_evaluate(args, extra) -> str:
    model = _model(args)
    images, labels = _dataset(args)
    rep = evaluate(model, images, labels, args.n, fixed=quantize_model(model, args.precision))
    _write(_outdir(args), "accuracy.csv", rep.to_csv())
    return f"float {rep.n_correct}/{rep.n_total} ({rep.accuracy:.4f}); fixed {rep.fixed_correct}/{rep.n_total} ({rep.fixed_accuracy:.4f})"


def cmd_sweep_precision(args, extra) -> str:
    model = _model(args)
    images, labels = _dataset(args)
    if any(not 0 <= d <= 18 for d in args.precisions):
        raise UsageError("precisions must be in 0..18")
    rep = precision_sweep(model, images, labels, args.precisions, args.n)
    text = rep.to_csv()
    _write(_outdir(args), "sweep.csv", text)
    return text.rstrip("\n")


def cmd_report(args, extra) -> str:
    cfg = _gas_config(args, extra)
    rows = ["arch,hidden,n_params,n_batches,upload_gas,deploy_gas,classify_gas"]
    for h in args.hidden:
        if h <= 0:
            raise UsageError("hidden sizes must be positive")
        arch = parse_arch_notation(f"2L{h}N{args.n_classes}N", args.input_dim)
        ws, bs = init_params(arch, np.random.default_rng(args.seed))
        qm = quantize_model(Model(arch, tuple(ws), tuple(bs)), args.precision)
        plan = plan_weight_upload(qm, args.gas_limit, args.margin, cfg)
        up = estimate_upload_gas(plan, cfg).gas
        dep = estimate_deploy_gas(generate_contract(qm, args.level), cfg).gas
        # classify is a view function and costs nothing when called off-chain
        rows.append(f"{arch.notation()},{h},{arch.n_params},{len(plan)},{up},{dep},0")
    text = "\n".join(rows) + "\n"
    _write(_outdir(args), "report.csv", text)
    return text.rstrip("\n")


COMMANDS = {
    "train": cmd_train,
    "transpile": cmd_transpile,
    "plan-upload": cmd_plan_upload,
    "estimate-gas": cmd_estimate_gas,
    "infer": cmd_infer,
    "evaluate": cmd_evaluate,
    "sweep-precision": cmd_sweep_precision,
    "report": cmd_report,
}


def _fail(kind: str, code: int, message: str) -> int:
    print(json.dumps({"error": kind, "exit_code": code, "message": message}), file=sys.stderr)
    return code


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args, extra = parse_args(argv)
        msg = COMMANDS[args.command](args, extra)
    except Nn2EvmError as exc:
        return _fail(type(exc).__name__, exc.exit_code, str(exc))
    except FileNotFoundError as exc:
        return _fail("FileNotFoundError", EXIT_MISSING_FILE, f"{exc.strerror}: {exc.filename}")
    except ValueError as exc:
        return _fail(type(exc).__name__, EXIT_USAGE, str(exc))
    if msg:
        print(msg)
    return 0


def main() -> None:
    sys.exit(run())


__all__ = ["COMMANDS", "build_parser", "main", "run"]
