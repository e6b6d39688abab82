"""Command-line entry point: ``glpn synth | build-graph | pseudo-label | run | sweep``.

Settings resolve as flags > JSON config file (``--config``) > built-in defaults.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Any, Iterator, Optional, Sequence

from threadpoolctl import threadpool_limits

from glpn.dataset import Dataset, load_dataset, save_dataset
from glpn.gcn import save_model
from glpn.graph import build_graph, save_graph
from glpn.pipeline import Mode, RunConfig, SweepParameter, obtain_pseudo_labels, run_pipeline, sweep
from glpn.pseudolabel.client import API_KEY_ENV, save_pseudo_labels
from glpn.pseudolabel.prompts import PromptStyle
from glpn.synthetic import SynthConfig, generate_synthetic

log = logging.getLogger("glpn")

METRICS_FILE = "metrics.json"
SWEEP_FILE = "sweep.json"
GRAPH_FILE = "graph.jsonl"
PSEUDO_FILE = "pseudo.jsonl"
MODEL_FILE = "model.bin"

_RUN_DEFAULTS = RunConfig()
_SYNTH_DEFAULTS = SynthConfig()

# (flag, RunConfig field, type, help); choices come from the field's enum where one exists
_RUN_FLAGS = (
    ("--theta", "theta", float, "strict cosine threshold for an edge"),
    ("--rho", "rho", float, "global random mask rate"),
    ("--pseudo-fraction", "pseudo_fraction", float, "share of the test set given pseudo labels"),
    ("--hidden", "hidden", int, "hidden width of the GCN"),
    ("--lr", "learning_rate", float, "Adam learning rate"),
    ("--epochs", "epochs", int, "training epochs per run"),
    ("--runs", "runs", int, "independent trainings; run r uses seed + r"),
    ("--seed", "seed", int, "base training seed"),
    ("--lp-iterations", "lp_iterations", int, "propagation steps of the LP baselines"),
    ("--oracle-accuracy", "oracle_accuracy", float, "accuracy of the simulated labeler"),
    ("--oracle-sharpness", "oracle_sharpness", float, "how strongly simulated confidence tracks correctness"),
    ("--oracle-seed", "oracle_seed", int, "seed of the simulated labeler"),
    ("--fixtures", "fixtures", str, "fixture JSONL to replay (fixture) or record into (live)"),
    ("--pseudo-file", "pseudo_file", str, "pseudo-label JSONL for --pseudo file"),
    ("--endpoint-url", "endpoint_url", str, "chat-completion URL for --pseudo live"),
    ("--model", "endpoint_model", str, "model name sent to the endpoint"),
)


class UsageError(Exception):
    pass


def _with_default(text: str, value: Any) -> str:
    if isinstance(value, (Mode, PromptStyle)):
        value = value.value
    return f"{text} (default: {value})"


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("common")
    g.add_argument("--config", type=Path, help="JSON file of settings; flags override it")
    g.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="cap on numeric and request worker threads (default: library choice)")
    g.add_argument("--deterministic", action="store_true", default=argparse.SUPPRESS,
                   help="single-threaded numerics and requests, for byte-identical outputs")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")


def _dataset_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", type=Path, default=argparse.SUPPRESS,
                        help="dataset JSONL (default: the built-in synthetic dataset)")


def _out_dir(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, default=argparse.SUPPRESS,
                        help="output directory (default: current directory)")


def _run_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("pipeline")
    g.add_argument("--mode", choices=[m.value for m in Mode], default=argparse.SUPPRESS,
                   help=_with_default("ablation tier", _RUN_DEFAULTS.mode))
    g.add_argument("--pseudo", dest="pseudo_source", choices=["oracle", "fixture", "live", "file"],
                   default=argparse.SUPPRESS,
                   help=_with_default(f"pseudo-label source; live reads the key from ${API_KEY_ENV}",
                                      _RUN_DEFAULTS.pseudo_source))
    g.add_argument("--prompt-style", dest="prompt_style", choices=[s.value for s in PromptStyle],
                   default=argparse.SUPPRESS, help=_with_default("prompt template", _RUN_DEFAULTS.prompt_style))
    for flag, dest, typ, text in _RUN_FLAGS:
        g.add_argument(flag, dest=dest, type=typ, default=argparse.SUPPRESS,
                       help=_with_default(text, getattr(_RUN_DEFAULTS, dest)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glpn", description="Graph label propagation fake-news detection.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", help="write a synthetic dataset")
    _common(p)
    p.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="dataset file (default: synthetic.jsonl)")
    synth_flags = (
        ("--seed", "seed", int), ("--n-train", "n_per_class_train", int), ("--n-test", "n_per_class_test", int),
        ("--d-t", "d_t", int), ("--d-v", "d_v", int), ("--separation", "class_separation", float),
        ("--noise", "noise_sigma", float), ("--modality-correlation", "modality_correlation", float),
        ("--story-size", "story_size", int), ("--story-spread", "story_spread", float),
        ("--heldout-stories", "heldout_story_fraction", float),
    )
    for flag, dest, typ in synth_flags:
        p.add_argument(flag, dest=dest, type=typ, default=argparse.SUPPRESS,
                       help=_with_default(dest.replace("_", " "), getattr(_SYNTH_DEFAULTS, dest)))
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("build-graph", help=f"build the similarity graph into {GRAPH_FILE}")
    _common(p)
    _dataset_flag(p)
    _out_dir(p)
    p.add_argument("--theta", type=float, default=argparse.SUPPRESS,
                   help=_with_default("strict cosine threshold", _RUN_DEFAULTS.theta))
    p.set_defaults(handler=cmd_build_graph)

    p = sub.add_parser("pseudo-label", help=f"label every test record into {PSEUDO_FILE}")
    _common(p)
    _dataset_flag(p)
    _out_dir(p)
    _run_flags(p)
    p.set_defaults(handler=cmd_pseudo_label)

    p = sub.add_parser("run", help=f"train and evaluate, writing {METRICS_FILE} and {MODEL_FILE}")
    _common(p)
    _dataset_flag(p)
    _out_dir(p)
    _run_flags(p)
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("sweep", help=f"sweep one parameter, writing {SWEEP_FILE}")
    _common(p)
    _dataset_flag(p)
    _out_dir(p)
    _run_flags(p)
    p.add_argument("--parameter", choices=[s.value for s in SweepParameter], default=argparse.SUPPRESS,
                   help="parameter to sweep (default: mask_rate)")
    p.add_argument("--grid", default=argparse.SUPPRESS,
                   help="comma-separated values (default: 0.1,0.2,...,0.9)")
    p.set_defaults(handler=cmd_sweep)
    return parser


def _load_config_file(path: Optional[Path]) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return data


def resolve_settings(args: argparse.Namespace) -> dict:
    """Config-file values overlaid with the flags actually given on the command line."""
    settings = _load_config_file(args.config)
    settings.update({k: v for k, v in vars(args).items() if k not in ("config", "handler", "command", "verbose")})
    return settings


def _take(settings: dict, keys: Sequence[str]) -> dict:
    return {k: settings.pop(k) for k in list(settings) if k in keys}


def _reject_unknown(settings: dict) -> None:
    if settings:
        raise UsageError(f"unknown settings: {', '.join(sorted(settings))}")


@contextlib.contextmanager
def _numeric_threads(settings: dict) -> Iterator[Optional[int]]:
    deterministic = bool(settings.pop("deterministic", False))
    threads = settings.pop("threads", None)
    if threads is not None and threads < 1:
        raise UsageError("--threads must be >= 1")
    limit = 1 if deterministic else threads
    if limit is None:
        yield None
        return
    with threadpool_limits(limits=limit):
        yield limit


def _load_or_synthesize(settings: dict) -> Dataset:
    path = settings.pop("dataset", None)
    if path is None:
        log.info("no --dataset given; using the built-in synthetic dataset")
        return generate_synthetic(_SYNTH_DEFAULTS)
    return load_dataset(path)


def _run_config(settings: dict, workers: Optional[int]) -> RunConfig:
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    kwargs = _take(settings, fields)
    if workers is not None:
        kwargs["llm_concurrency"] = workers
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _out_path(settings: dict, name: str) -> Path:
    out = Path(settings.pop("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _write_json(obj: Any, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_synth(settings: dict) -> int:
    out = Path(settings.pop("out", "synthetic.jsonl"))
    with _numeric_threads(settings):
        fields = {f.name for f in dataclasses.fields(SynthConfig)}
        kwargs = _take(settings, fields)
        _reject_unknown(settings)
        try:
            cfg = SynthConfig(**kwargs)
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from None
        ds = generate_synthetic(cfg)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_dataset(ds, out)
    print(f"wrote {ds.n} records to {out}")
    return 0


def cmd_build_graph(settings: dict) -> int:
    with _numeric_threads(settings):
        theta = settings.pop("theta", _RUN_DEFAULTS.theta)
        ds = _load_or_synthesize(settings)
        path = _out_path(settings, GRAPH_FILE)
        _reject_unknown(settings)
        graph = build_graph(ds, theta)
        save_graph(graph, path)
    print(f"wrote {graph.num_edges} edges to {path}")
    return 0


def cmd_pseudo_label(settings: dict) -> int:
    with _numeric_threads(settings) as workers:
        ds = _load_or_synthesize(settings)
        path = _out_path(settings, PSEUDO_FILE)
        cfg = _run_config(settings, workers)
        _reject_unknown(settings)
        pseudo = obtain_pseudo_labels(ds, cfg)
        save_pseudo_labels(pseudo, path)
    print(f"wrote {len(pseudo)} pseudo labels for {ds.n_test} test records to {path}")
    return 0


def cmd_run(settings: dict) -> int:
    with _numeric_threads(settings) as workers:
        ds = _load_or_synthesize(settings)
        path = _out_path(settings, METRICS_FILE)
        cfg = _run_config(settings, workers)
        _reject_unknown(settings)
        outcome = run_pipeline(ds, cfg)
        _write_json(outcome.to_dict(), path)
        if outcome.model is not None:
            save_model(outcome.model, path.with_name(MODEL_FILE), dataclasses.asdict(cfg.train_config(cfg.runs - 1)))
    mean, std = outcome.aggregate.mean, outcome.aggregate.std
    print(f"{cfg.mode.value}: accuracy {mean['accuracy']:.4f} +/- {std['accuracy']:.4f}, "
          f"macro F1 {mean['macro_f1']:.4f} over {cfg.runs} runs; wrote {path}")
    return 0


def _parse_grid(text: Any) -> list[float]:
    if isinstance(text, list):
        values = text
    else:
        values = [v for v in str(text).split(",") if v.strip()]
    try:
        grid = [float(v) for v in values]
    except ValueError:
        raise UsageError(f"grid values must be numbers, got {text!r}") from None
    if not grid:
        raise UsageError("sweep grid is empty")
    return grid


def cmd_sweep(settings: dict) -> int:
    parameter = SweepParameter(settings.pop("parameter", SweepParameter.MASK_RATE.value))
    grid = _parse_grid(settings.pop("grid", [round(0.1 * k, 1) for k in range(1, 10)]))
    with _numeric_threads(settings) as workers:
        ds = _load_or_synthesize(settings)
        path = _out_path(settings, SWEEP_FILE)
        cfg = _run_config(settings, workers)
        _reject_unknown(settings)
        result = sweep(ds, parameter, grid, cfg)
        _write_json(result.to_dict(), path)
    for value, mean in zip(result.grid, result.means()):
        print(f"{parameter.value}={value:g}: accuracy {mean:.4f}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(resolve_settings(args))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"glpn {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # any module failure becomes a diagnostic and exit 1
        log.debug("command failed", exc_info=True)
        print(f"glpn {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
