"""Command-line interface: ``signbow {train,predict,evaluate,synth,validate}``.

Exit codes: 0 success, 1 usage error, 2 data validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .classifier import (FeatureMask, ModelConfig, combine, extract_features,
                         fit_from_features, rank)
from .dataset import load_dataset, read_samples, save_dataset, validate_dataset
from .evaluation import (EvalConfig, backend_factors, run_subject_dependent,
                         run_subject_independent, subset_weights, weighted_subset_mean)
from .exceptions import ModelFormatError, NumericalError, SignDataError
from .hmm import HMMConfig, fit_hmm_from_features
from .model_io import load_model, save_model
from .synth import (GeneratorConfig, SeparationError, factorial_prototypes, generate_dataset,
                    sample_prototypes, save_prototypes)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
SUBSET_NAMES = {"all": "all", "1h": "one_handed", "2h": "two_handed"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return p


def _mask_list(text: str) -> list[str]:
    try:
        return [FeatureMask.parse(m).name for m in text.split(",") if m.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _subset_list(text: str) -> list[str]:
    out = []
    for s in text.split(","):
        if s.strip() not in SUBSET_NAMES:
            raise argparse.ArgumentTypeError(f"unknown subset {s!r}; use all, 1h or 2h")
        out.append(SUBSET_NAMES[s.strip()])
    return out


def _add_model_options(p):
    g = p.add_argument_group("model")
    g.add_argument("--backend", choices=("bow", "hmm"), default="bow")
    g.add_argument("--bins", type=int, default=16, help="direction bins D")
    g.add_argument("--codewords", type=int, default=32, help="handshape codebook size C")
    g.add_argument("--alpha", type=float, default=1.0, help="categorical smoothing")
    g.add_argument("--gate-threshold", type=float, default=5.0,
                   help="mean amount of movement (cm) at or below which trajectory is ignored")
    g.add_argument("--presence-fraction", type=float, default=0.5)
    g.add_argument("--hs-quantizer", choices=("codebook", "argmax"), default="codebook")
    g.add_argument("--states", type=int, default=4, help="HMM states")
    g.add_argument("--mix", type=int, default=1, help="Gaussian components per HMM state")
    g.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="signbow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model and write it as JSON")
    p.add_argument("--data", type=_existing, required=True, help="samples JSONL")
    p.add_argument("--manifest", type=_existing, required=True)
    p.add_argument("--model", required=True, help="output model file")
    _add_model_options(p)

    p = sub.add_parser("predict", help="classify samples with a trained model")
    p.add_argument("--model", type=_existing, required=True)
    p.add_argument("--data", type=_existing, required=True)
    p.add_argument("--output", help="CSV path (default: standard output)")
    p.add_argument("--top", type=int, default=3, help="alternatives per row")
    p.add_argument("--features", type=_mask_list, default=["all"])

    p = sub.add_parser("evaluate", help="run an evaluation protocol")
    p.add_argument("--data", type=_existing, required=True)
    p.add_argument("--manifest", type=_existing, required=True)
    p.add_argument("--protocol", choices=("dependent", "independent"), default="dependent")
    p.add_argument("--subset", type=_subset_list, default=["all"],
                   help="all, 1h, 2h, or a comma list such as 1h,2h")
    p.add_argument("--masks", type=_mask_list, default=["all"])
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", help="report JSON path")
    p.add_argument("--confusion", help="confusion matrix CSV path (first mask)")
    _add_model_options(p)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--classes", type=int, default=64)
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--offset", type=float, default=1.0, help="subject offset scale (cm)")
    p.add_argument("--one-handed", type=float, default=42 / 64, help="fraction of classes")
    p.add_argument("--low-movement", type=float, default=0.2, help="fraction of classes")
    p.add_argument("--design", choices=("random", "factorial"), default="random")
    p.add_argument("--mismatch", action="store_true", help="add arc-shaped curvature")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("validate", help="check a dataset against its manifest")
    p.add_argument("--data", type=_existing, required=True)
    p.add_argument("--manifest", type=_existing, required=True)
    return parser


def _configs(args):
    try:
        return _build_configs(args)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _build_configs(args):
    model = ModelConfig(n_direction_bins=args.bins, n_codewords=args.codewords, alpha=args.alpha,
                        gate_threshold=args.gate_threshold,
                        presence_fraction=args.presence_fraction,
                        hs_quantizer=args.hs_quantizer, seed=args.seed)
    return model, HMMConfig(n_states=args.states, n_mix=args.mix)


# ------------------------------------------------------------ commands

def cmd_train(args) -> int:
    model_cfg, hmm_cfg = _configs(args)
    d = load_dataset(args.data, args.manifest)
    feats = [extract_features(s, model_cfg) for s in d.samples]
    if args.backend == "hmm":
        model = fit_hmm_from_features(feats, d.labels, d.manifest, model_cfg, hmm_cfg)
    else:
        model = fit_from_features(feats, d.labels, d.manifest, model_cfg)
    save_model(model, args.model)
    summary = []
    for c in model.classes:
        hands = {h: {"n_samples": hm.n_samples, "gate_active": hm.gate.active}
                 for h in ("left", "right") if (hm := c.hand(h)) is not None}
        summary.append({"id": c.class_id, "n_samples": c.n_samples, "hands": hands})
    print(json.dumps({"backend": args.backend, "classes": summary}))
    return EXIT_OK


def cmd_predict(args) -> int:
    if args.top < 0:
        raise UsageError("--top must be >= 0")
    model = load_model(args.model)
    samples = read_samples(args.data, model.handshape_dim)
    cfg = model.config
    factors, impossible = backend_factors([extract_features(s, cfg) for s in samples], model)
    mask = FeatureMask.parse(args.features[0])
    scores = combine(factors, impossible, mask)
    ids = model.class_ids
    header = ["sample_id", "predicted_class", "log_score", "impossible"]
    for k in range(1, args.top + 1):
        header += [f"alt{k}_class", f"alt{k}_log_score"]
    out = open(args.output, "w", newline="", encoding="utf-8") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        for s, row, imp in zip(samples, scores, impossible):
            order = rank(row, ids)
            best = order[0]
            rest = [j for j in order[1:] if not imp[j]] if not imp.all() else list(order[1:])
            cells = [s.id, int(ids[best]), repr(float(row[best])), str(bool(imp[best])).lower()]
            for k in range(args.top):
                cells += [int(ids[rest[k]]), repr(float(row[rest[k]]))] if k < len(rest) else ["", ""]
            w.writerow(cells)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    model_cfg, hmm_cfg = _configs(args)
    d = load_dataset(args.data, args.manifest)
    try:
        configs = {s: EvalConfig(runs=args.runs, train_fraction=args.train_fraction,
                                 seed=args.seed, masks=tuple(args.masks), backend=args.backend,
                                 subset=s, model=model_cfg, hmm=hmm_cfg)
                   for s in args.subset}
    except ValueError as e:
        raise UsageError(str(e)) from None
    run = run_subject_independent if args.protocol == "independent" else run_subject_dependent
    reports = {s: run(d, cfg, threads=args.threads) for s, cfg in configs.items()}

    for subset, r in reports.items():
        if len(reports) > 1:
            print(f"[{subset}]")
        for line in r.table_rows():
            print(line)
        print(f"wall-clock {r.wall_clock:.1f} s")
    if len(reports) == 1:
        (report,) = reports.values()
        text = report.to_json()
    else:
        weights = subset_weights(d)
        body = {"subsets": {k: r.to_dict() for k, r in reports.items()}}
        if set(reports) == {"one_handed", "two_handed"} and args.protocol == "dependent":
            body["weighted_mean"] = {m: weighted_subset_mean(reports, weights, m)
                                     for m in args.masks}
            for m, v in body["weighted_mean"].items():
                print(f"weighted mean {m:8s} {100 * v:6.2f}")
        text = json.dumps(body, indent=1, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    if args.confusion:
        first = next(iter(reports.values()))
        mask = args.masks[0]
        cm = first.confusion(mask) if args.protocol == "independent" else first.results[mask].confusion
        Path(args.confusion).write_text(cm.to_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        cfg = GeneratorConfig(num_classes=args.classes, num_subjects=args.subjects,
                              reps_per_subject=args.reps, seed=args.seed,
                              subject_offset_scale=args.offset,
                              fraction_one_handed=args.one_handed,
                              fraction_low_movement=args.low_movement, mismatch=args.mismatch)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if args.design == "factorial":
        protos = factorial_prototypes(cfg)
        cfg = GeneratorConfig(**{**cfg.to_dict(), "num_classes": len(protos)})
    else:
        try:
            protos = sample_prototypes(cfg)
        except SeparationError as e:
            raise UsageError(str(e)) from None
    d = generate_dataset(protos, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(d, out / "samples.jsonl", out / "manifest.json")
    save_prototypes(protos, cfg, out / "prototypes.json")
    print(json.dumps({"samples": len(d), "classes": len(protos), "out_dir": str(out)}))
    return EXIT_OK


def cmd_validate(args) -> int:
    d = load_dataset(args.data, args.manifest)
    problems = validate_dataset(d)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return EXIT_DATA
    print(json.dumps({"valid": True, "samples": len(d), "classes": d.manifest.num_classes}))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate,
            "synth": cmd_synth, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"signbow: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SignDataError, ModelFormatError) as e:
        print(f"signbow: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"signbow: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
