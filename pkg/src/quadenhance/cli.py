"""Command-line entry point: ``quadenhance <command> ...``.

Progress goes to stderr; reports go to files or stdout.  Failures print one
line ``error[<category>]: <message>`` and exit with the category's code.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .color import mean_lab_l2
from .dataset import (
    make_synthetic_corpus,
    make_unpaired_split,
    read_pair_manifest,
    write_pair_manifest,
    write_split_manifest,
)
from .gradcheck import CHECKS, TOLERANCE, run_gradcheck
from .imageio import ImageError, is_image_path, list_images, load_image, save_image
from .metrics import evaluate_pairs
from .model import Model, enhance
from .nn import ModelFormatError
from .train_paired import PairedDataset, TrainConfig, TrainingDiverged, train_paired
from .train_paired import write_history as write_paired_history
from .train_unpaired import (
    ABLATIONS,
    GanConfig,
    Phase1Config,
    Phase2Config,
    UnpairedDataset,
    ablation_config,
    load_result,
    save_result,
    train_phase1,
    train_phase2,
)
from .train_unpaired import write_history as write_unpaired_history
from .transform import RankDeficientError, apply_transform, fit_least_squares, load_theta, save_theta

log = logging.getLogger("quadenhance")

EXIT_CODES = {"usage": 2, "io": 3, "numeric": 4, "config": 5}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", f"{self.prog}: {message}")


# ---------------------------------------------------------------- config files

def _coerce(text: str, current, key: str):
    try:
        if isinstance(current, bool):
            lowered = text.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return lowered in ("true", "1", "yes")
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, tuple):
            return tuple(int(v) for v in text.replace(",", " ").split())
        if current is None or isinstance(current, str):
            return None if text.lower() == "none" else text
    except ValueError:
        raise CliError("config", f"bad value for {key}: {text!r}") from None
    raise CliError("config", f"key {key} cannot be set from a config file")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError("config", f"{source}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _apply_settings(config, settings: dict, prefix: str = ""):
    """Return a copy of dataclass ``config`` with dotted ``settings`` applied."""
    fields = {f.name for f in dataclasses.fields(config)}
    changes, nested = {}, {}
    for key, value in settings.items():
        head, _, rest = key.partition(".")
        if head not in fields:
            raise CliError("config", f"unknown config key: {prefix}{key}")
        current = getattr(config, head)
        if dataclasses.is_dataclass(current):
            if not rest:
                raise CliError("config", f"config key {prefix}{key} needs a sub-key")
            nested.setdefault(head, {})[rest] = value
        elif rest:
            raise CliError("config", f"unknown config key: {prefix}{key}")
        else:
            changes[head] = _coerce(value, current, prefix + key)
    for head, sub in nested.items():
        changes[head] = _apply_settings(getattr(config, head), sub, f"{prefix}{head}.")
    try:
        return dataclasses.replace(config, **changes)
    except (TypeError, ValueError) as exc:
        raise CliError("config", str(exc)) from None


def build_config(default, config_path=None, overrides=(), seed=None):
    """Defaults, then the config file, then ``--set`` overrides, then ``--seed``."""
    settings = {}
    if config_path is not None:
        try:
            text = Path(config_path).read_text()
        except OSError as exc:
            raise CliError("io", f"cannot read config {config_path}: {exc.strerror}") from None
        settings.update(parse_config_text(text, str(config_path)))
    for item in overrides:
        if "=" not in item:
            raise CliError("usage", f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        settings[key.strip()] = value.strip()
    if seed is not None:
        settings["seed"] = str(seed)
    return _apply_settings(default, settings)


# ---------------------------------------------------------------- helpers

def _load_image(path):
    try:
        return load_image(path)
    except FileNotFoundError:
        raise CliError("io", f"no such image: {path}") from None
    except (ImageError, OSError) as exc:
        raise CliError("io", f"{path}: {exc}") from None


def _load_model(path) -> Model:
    try:
        return Model.load(path)
    except FileNotFoundError:
        raise CliError("io", f"no such model: {path}") from None
    except (ModelFormatError, OSError) as exc:
        raise CliError("io", f"{path}: {exc}") from None


def _load_theta(path):
    try:
        return load_theta(path)
    except FileNotFoundError:
        raise CliError("io", f"no such theta file: {path}") from None
    except (ValueError, OSError) as exc:
        raise CliError("io", f"{path}: {exc}") from None


def _out_bits(path, bits):
    return bits if Path(path).suffix.lower() == ".png" else 8


# ---------------------------------------------------------------- commands

def cmd_enhance(args) -> int:
    model = _load_model(args.model)
    src, dst = Path(args.input), Path(args.output)
    if not src.exists():
        raise CliError("io", f"no such input: {src}")
    if src.is_dir():
        names = [p.name for p in list_images(src)]
        if not names:
            raise CliError("io", f"no supported images in {src}")
        dst.mkdir(parents=True, exist_ok=True)
        theta_dir = Path(args.theta_out) if args.theta_out else None
        if theta_dir is not None:
            theta_dir.mkdir(parents=True, exist_ok=True)
        jobs = [(src / n, dst / n, theta_dir / f"{Path(n).stem}.theta.txt" if theta_dir else None) for n in names]
    else:
        if not is_image_path(src):
            raise CliError("io", f"unsupported image format: {src}")
        jobs = [(src, dst, Path(args.theta_out) if args.theta_out else None)]

    def run(job):
        inp, out, theta_path = job
        image = _load_image(inp)
        result, theta = enhance(model, image, return_theta=True)
        try:
            save_image(result, out, bits=_out_bits(out, args.bits))
            if theta_path is not None:
                save_theta(theta, theta_path)
        except OSError as exc:
            raise CliError("io", f"cannot write {out}: {exc.strerror}") from None
        log.info("enhanced %s -> %s", inp, out)

    workers = max(1, min(args.jobs or os.cpu_count() or 1, len(jobs)))
    with ThreadPoolExecutor(workers) as pool:
        list(pool.map(run, jobs))
    return 0


def cmd_apply_theta(args) -> int:
    theta = _load_theta(args.theta)
    image = _load_image(args.input)
    try:
        save_image(apply_transform(image, theta), args.output, bits=_out_bits(args.output, args.bits))
    except OSError as exc:
        raise CliError("io", f"cannot write {args.output}: {exc.strerror}") from None
    return 0


def cmd_fit_theta(args) -> int:
    x, y = _load_image(args.input), _load_image(args.target)
    if x.shape != y.shape:
        raise CliError("io", f"input {x.shape} and target {y.shape} differ in shape")
    try:
        theta = fit_least_squares(x, y, ridge=args.ridge)
    except RankDeficientError as exc:
        raise CliError("numeric", f"{exc}; pass --ridge to regularise") from None
    save_theta(theta, args.theta_out)
    print(f"residual_mean_lab_l2 {mean_lab_l2(apply_transform(x, theta), y):.6g}")
    return 0


def cmd_train_paired(args) -> int:
    config = build_config(TrainConfig(), args.config, args.set, args.seed)
    dataset = _dataset(lambda: PairedDataset.from_manifest(args.manifest, config.resolution))
    validation = None
    if args.validation:
        validation = _dataset(lambda: PairedDataset.from_manifest(args.validation, config.resolution))
    result = train_paired(dataset, config, validation)
    out = Path(args.out_model)
    result.model.save(out)
    write_paired_history(out.with_suffix(".history.csv"), result.history)
    print(f"final_mean_loss {result.history[-1][1]:.6g}")
    return 0


def _dataset(build):
    try:
        return build()
    except FileNotFoundError as exc:
        raise CliError("io", f"no such file: {exc.filename}") from None
    except (ImageError, OSError) as exc:
        raise CliError("io", str(exc)) from None
    except ValueError as exc:
        raise CliError("config", str(exc)) from None


def cmd_train_unpaired(args) -> int:
    config = build_config(GanConfig(), args.config, args.set, args.seed)
    if args.ablation:
        config = ablation_config(args.ablation, config)
    dataset = _dataset(lambda: UnpairedDataset.from_lists(args.manifest_x, args.manifest_y, config.resolution))
    out = Path(args.out_model)
    if args.phase == "2":
        if not args.init:
            raise CliError("usage", "--phase 2 needs --init pointing at a phase-1 model")
        try:
            result = load_result(args.init)
        except FileNotFoundError as exc:
            raise CliError("io", f"no such model: {exc.filename}") from None
        except ModelFormatError as exc:
            raise CliError("io", str(exc)) from None
    else:
        result = train_phase1(dataset, config)
        write_unpaired_history(out.with_suffix(".phase1.csv"), result.phase1_history)
    if args.phase == "2" or (args.phase == "both" and config.phase2.enabled):
        result = train_phase2(result, dataset, config)
        write_unpaired_history(out.with_suffix(".phase2.csv"), result.phase2_history)
    save_result(result, out)
    return 0


def cmd_evaluate(args) -> int:
    model = _load_model(args.model)
    pairs = _dataset(lambda: read_pair_manifest(args.manifest))
    outputs = []
    for inp, tgt in pairs:
        x, y = _load_image(inp), _load_image(tgt)
        if x.shape != y.shape:
            raise CliError("io", f"{inp} and {tgt} differ in shape")
        outputs.append((enhance(model, x), y))
    report = evaluate_pairs(outputs, ids=[Path(a).stem for a, _ in pairs])
    try:
        report.write_csv(args.report)
    except OSError as exc:
        raise CliError("io", f"cannot write {args.report}: {exc.strerror}") from None
    print(report.table())
    return 0


def cmd_gradcheck(args) -> int:
    kinds = None if args.layer == "all" else [args.layer]
    if kinds and kinds[0] not in CHECKS:
        raise CliError("usage", f"unknown layer {args.layer!r}; choose from all, {', '.join(CHECKS)}")
    results = run_gradcheck(kinds, cases=args.cases, seed=args.seed or 0)
    failed = [k for k, e in results.items() if not e <= TOLERANCE]
    for kind, err in results.items():
        print(f"{kind:<16} {err:.3e}  {'ok' if kind not in failed else 'FAIL'}")
    if failed:
        raise CliError("numeric", f"gradient check failed for {', '.join(failed)}")
    return 0


def cmd_make_synthetic(args) -> int:
    theta = _load_theta(args.theta) if args.theta else None
    if args.count < 1 or args.size < 1:
        raise CliError("usage", "--count and --size must be positive")
    try:
        corpus = make_synthetic_corpus(args.count, args.size, theta_star=theta, noise=args.noise,
                                       seed=args.seed or 0, out_dir=args.out_dir)
    except OSError as exc:
        raise CliError("io", f"cannot write corpus: {exc}") from None
    if args.unpaired:
        try:
            xs, ys, test = make_unpaired_split(corpus.ids, args.unpaired, seed=args.seed or 0)
        except ValueError as exc:
            raise CliError("usage", str(exc)) from None
        out = Path(args.out_dir)
        write_split_manifest(out / "split.tsv", {"train_x": xs, "train_y": ys, "test": test})
        (out / "train_x.txt").write_text("".join(f"{i}_in.png\n" for i in xs))
        (out / "train_y.txt").write_text("".join(f"{i}_target.png\n" for i in ys))
        write_pair_manifest(out / "test_pairs.tsv", [f"{i}_in.png" for i in test], [f"{i}_target.png" for i in test])
    print(f"wrote {args.count} pairs to {args.out_dir}")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="quadenhance", description="Colour enhancement with a per-image quadratic transform.")
    parser.add_argument("-q", "--quiet", action="store_true", help="only warnings on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("enhance", help="enhance one image or a directory")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--theta-out", help="theta file (or directory in directory mode)")
    p.add_argument("--jobs", type=int, default=None, help="worker threads (default: CPU count)")
    p.add_argument("--bits", type=int, choices=(8, 16), default=8)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("apply-theta", help="apply a stored coefficient matrix")
    p.add_argument("--theta", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--bits", type=int, choices=(8, 16), default=8)
    p.set_defaults(func=cmd_apply_theta)

    p = sub.add_parser("fit-theta", help="least-squares coefficients mapping input to target")
    p.add_argument("--input", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--theta-out", required=True)
    p.add_argument("--ridge", type=float, default=0.0)
    p.set_defaults(func=cmd_fit_theta)

    for name, func, desc in (("train-paired", cmd_train_paired, "supervised training on input/target pairs"),
                             ("train-unpaired", cmd_train_unpaired, "two-phase training on unpaired image sets")):
        p = sub.add_parser(name, help=desc)
        if name == "train-paired":
            p.add_argument("--manifest", required=True, help="input<TAB>target lines")
            p.add_argument("--validation", help="held-out manifest for best-checkpoint selection")
        else:
            p.add_argument("--manifest-x", required=True, help="list of input-style images")
            p.add_argument("--manifest-y", required=True, help="list of target-style images")
            p.add_argument("--phase", choices=("1", "2", "both"), default="both")
            p.add_argument("--ablation", choices=tuple(ABLATIONS))
            p.add_argument("--init", help="phase-1 model to refine with --phase 2")
        p.add_argument("--config", help="key = value file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--seed", type=int)
        p.add_argument("--out-model", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", help="metric report for a model on a pair manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--layer", default="all")
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("make-synthetic", help="procedural corpus with a planted transform")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--theta")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--unpaired", type=int, metavar="N", help="also write an unpaired split of N training ids")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_make_synthetic)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, stream=sys.stderr,
                            format="%(message)s")
        return args.func(args)
    except CliError as exc:
        message, category = str(exc), exc.category
    except TrainingDiverged as exc:
        message, category = str(exc), "numeric"
    except FloatingPointError as exc:
        message, category = str(exc), "numeric"
    print(f"error[{category}]: {' '.join(message.split())}", file=sys.stderr)
    return EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())
