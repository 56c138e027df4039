"""
Command-line surface for SuperMAN runs.

Every command writes its artifacts under ``--out`` (default
``$SUPERMAN_OUTPUT_ROOT/<command>``), starting with ``run_config.json`` and
ending with ``manifest.json``. Exit codes: 0 success, 2 configuration error,
3 data error, 4 numerical error, 1 anything else.
"""

import argparse
import contextlib
import logging
import os
import sys
from typing import Any, Dict, Iterator, List, Optional, Sequence

from threadpoolctl import threadpool_limits

from .controllers import RunConfig, SupermanController
from .controllers.superman.run_config import default_output_root
from .core.extgnan import DeltaMode
from .core.interpret import NoiseKind
from .core.signal_graphs import DeltaPolicy, Direction
from .core.superman import ModelAblation
from .core.synth import SynthKind, SynthSpec
from .core.training import TrainConfig
from .errors import ConfigError, SupermanError
from .utils.csv_import import IngestSchema
from .utils.json_export import fingerprint, load_partition_config, write_json, write_manifest

logger = logging.getLogger(__name__)

ABLATIONS = [a.value for a in ModelAblation]


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


@contextlib.contextmanager
def _execution_mode(deterministic: bool) -> Iterator[None]:
    """Pin BLAS to one thread in deterministic mode."""
    if deterministic:
        with threadpool_limits(limits=1):
            yield
    else:
        yield


def _out_dir(args: argparse.Namespace) -> str:
    out = args.out or os.path.join(default_output_root(), args.command)
    os.makedirs(out, exist_ok=True)
    return out


def _command_config(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "verbose")}


class _Provenance:
    """run_config.json first, manifest.json last, for commands without a RunConfig."""

    def __init__(self, args: argparse.Namespace, seeds: Sequence[int] = ()) -> None:
        self.out_dir = _out_dir(args)
        self.config = _command_config(args)
        self.seeds = list(seeds)
        self.files = [write_json(self.config, os.path.join(self.out_dir, "run_config.json"))]

    def finish(self, command: str, files: Sequence[str]) -> None:
        self.files.extend(files)
        write_manifest(self.out_dir, command, fingerprint(self.config), self.seeds, self.files)
        logger.info(f"Wrote {len(self.files)} artifacts to {self.out_dir}")


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "dataset": args.dataset,
        "partition": args.partition if isinstance(args.partition, str) else None,
        "seeds": args.seeds,
        "ablation": getattr(args, "ablation", None),
        "delta_mode": args.delta_mode,
        "delta_policy": args.delta_policy,
        "window": args.window,
        "time_scale": args.time_scale,
        "deterministic": True if args.deterministic else None,
        "workers": args.workers,
        "train.epochs": args.epochs,
        "train.batch_size": args.batch_size,
        "train.lr_max": args.lr,
        "train.dropout": args.dropout,
        "train.hidden": args.hidden,
        "train.layers": args.layers,
    }
    run = RunConfig.load(args.config, overrides)
    run.out_dir = _out_dir(args)
    if not run.dataset:
        raise ConfigError("A dataset is required (--dataset or 'dataset' in --config)")
    return run


def _load_session(controller: SupermanController, dataset: str, checkpoint: Optional[str] = None) -> None:
    controller.load_dataset(dataset)
    if checkpoint is not None:
        controller.load_model(checkpoint)


def cmd_ingest(args: argparse.Namespace, controller: SupermanController) -> None:
    provenance = _Provenance(args)
    schema = IngestSchema(
        vocabulary=args.vocabulary,
        label_column=args.label_column,
        labels_path=args.labels,
        direction=args.direction,
        time_unit=args.time_unit,
        extra_features=args.extra_features or [],
    )
    result = controller.ingest(args.csv, schema, provenance.out_dir)
    summary = result["summary"]
    print(f"Ingested {summary['entities']} entities, {summary['graphs']} graphs, {summary['nodes']} nodes")
    provenance.finish("ingest", result["files"])


def cmd_synth(args: argparse.Namespace, controller: SupermanController) -> None:
    provenance = _Provenance(args, [args.seed])
    spec = SynthSpec(
        kind=args.kind,
        n_samples=args.n_samples,
        seed=args.seed,
        trend_coef=args.trend_coef,
        gap_coef=args.gap_coef,
        label_noise=args.label_noise,
        base_gap=args.base_gap,
    )
    result = controller.synthesize(spec, grouped=not args.split, out_dir=provenance.out_dir)
    print(f"Generated {result['summary']['entities']} entities ({spec.kind.value})")
    provenance.finish("synth", result["files"])


def cmd_train(args: argparse.Namespace, controller: SupermanController) -> None:
    run = _run_config(args)
    controller.load_dataset(run.dataset)
    if run.partition:
        controller.load_partition(run.partition)
    with _execution_mode(run.deterministic):
        result = controller.train_run(run, run.out_dir)
    auprc = result["metrics"]["summary"]["auprc"]
    print(f"Test AUPRC {auprc['mean']:.4f} ± {auprc['std']:.4f} over seeds {run.seeds}")


def cmd_eval(args: argparse.Namespace, controller: SupermanController) -> None:
    provenance = _Provenance(args)
    _load_session(controller, args.dataset, args.checkpoint)
    result = controller.evaluate(provenance.out_dir, args.bins)
    print(f"ECE {result['metrics']['ece']:.4f}, AUPRC {result['metrics']['auprc']:.4f}")
    provenance.finish("eval", result["files"])


def cmd_explain(args: argparse.Namespace, controller: SupermanController) -> None:
    provenance = _Provenance(args)
    _load_session(controller, args.dataset, args.checkpoint)
    explained = controller.explain_entities(args.entities, provenance.out_dir)
    curves = controller.perturbation_curves(args.subsets, out_dir=provenance.out_dir)
    print(f"Explained {len(explained['reports'])} entities, {len(curves['curves'])} perturbation curves")
    provenance.finish("explain", explained["files"] + curves["files"])


def cmd_robustness(args: argparse.Namespace, controller: SupermanController) -> None:
    provenance = _Provenance(args, args.seeds)
    _load_session(controller, args.dataset, args.checkpoint)
    files: List[str] = []
    with _execution_mode(args.deterministic):
        for kind in args.kinds:
            files.extend(controller.robustness(kind, args.levels, args.seeds, provenance.out_dir)["files"])
    provenance.finish("robustness", files)


def cmd_treemetric(args: argparse.Namespace, controller: SupermanController) -> None:
    provenance = _Provenance(args)
    if args.action == "check":
        result = controller.check_tree_metric(args.matrix)
        files = [write_json(result, os.path.join(provenance.out_dir, "verdict.json"))]
        print("OK" if result["tree_metric"] else f"NOT A TREE METRIC {result['violation']}")
    else:
        result = controller.reconstruct(args.matrix, provenance.out_dir)
        files = result["files"]
        print(f"Order {result['order']}")
    provenance.finish(f"treemetric {args.action}", files)


def cmd_xor_bench(args: argparse.Namespace, controller: SupermanController) -> None:
    out_dir = _out_dir(args)
    grouped = {"both": None, "grouped": True, "split": False}[args.configuration]
    train = TrainConfig(
        epochs=args.epochs,
        batch_size=4,
        lr_max=args.lr,
        dropout=0.0,
        hidden=args.hidden,
        layers=3,
        upsample_minority=False,
    )
    with _execution_mode(True):
        result = controller.xor_bench(args.kind, grouped, args.seeds or list(range(20)), train, out_dir)
    for name, stats in result["summary"].items():
        print(f"{args.kind}/{name}: mean accuracy {stats['mean']:.3f}, max {stats['max']:.3f}")


def cmd_ablate(args: argparse.Namespace, controller: SupermanController) -> None:
    run = _run_config(args)
    controller.load_dataset(run.dataset)
    configs = {os.path.splitext(os.path.basename(p))[0]: load_partition_config(p) for p in args.partition or []}
    with _execution_mode(run.deterministic):
        result = controller.ablate(run, args.variants, configs or None, run.out_dir)
    for row in result["rows"]:
        label = f"{row['configuration']:>16} {row['variant']:>10}"
        print(f"{label} {row['auprc_mean']:.4f} (drop {row['auprc_drop']:+.4f})")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="RunConfig JSON; flags override it")
    parser.add_argument("--dataset", help="Canonical dataset JSON")
    parser.add_argument("--seeds", type=_int_list, help="Comma-separated seeds")
    parser.add_argument("--delta-mode", choices=[m.value for m in DeltaMode])
    parser.add_argument("--delta-policy", choices=[p.value for p in DeltaPolicy])
    parser.add_argument("--window", type=int)
    parser.add_argument("--time-scale", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--hidden", type=int)
    parser.add_argument("--layers", type=int)
    parser.add_argument("--deterministic", action="store_true", help="Single-threaded, sequential seeds")
    parser.add_argument("--workers", type=int, help="Processes for seed-parallel training")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="superman", description="Super Mixing Additive Networks toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="Measurement CSV to canonical dataset JSON")
    p.add_argument("csv")
    p.add_argument("--labels", help="Sidecar CSV with entity_id,label")
    p.add_argument("--label-column", default="label")
    p.add_argument("--vocabulary", type=_str_list, help="Allowed signal types")
    p.add_argument("--direction", default=Direction.FORWARD.value, choices=[d.value for d in Direction])
    p.add_argument("--time-unit", default="days")
    p.add_argument("--extra-features", type=_str_list)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="Generate a synthetic dataset")
    p.add_argument("--kind", default=SynthKind.IRREGULAR_SIGNAL.value, choices=[k.value for k in SynthKind])
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trend-coef", type=float, default=1.0)
    p.add_argument("--gap-coef", type=float, default=1.0)
    p.add_argument("--label-noise", type=float, default=0.5)
    p.add_argument("--base-gap", type=float, default=10.0)
    p.add_argument("--split", action="store_true", help="Univariate grouping / singleton subsets for the XOR kinds")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="Train one model per seed")
    _add_run_flags(p)
    p.add_argument("--partition", help="Partition config JSON")
    p.add_argument("--ablation", choices=ABLATIONS)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Metrics, ECE and reliability diagram")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--bins", type=int, default=10)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="Exact contributions and PCA perturbation curves")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--entities", type=_str_list)
    p.add_argument("--subsets", type=_str_list)
    _add_common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("robustness", help="Relative metric change under test-time noise")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--kinds", type=_str_list, default=[k.value for k in NoiseKind])
    p.add_argument("--levels", type=_float_list)
    p.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3, 4])
    p.add_argument("--deterministic", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("treemetric", help="Four-point check or path reconstruction of a distance matrix")
    p.add_argument("action", choices=["check", "reconstruct"])
    p.add_argument("matrix", help="Square distance matrix CSV")
    _add_common(p)
    p.set_defaults(func=cmd_treemetric)

    p = sub.add_parser("xor-bench", help="XOR separation benchmark")
    p.add_argument("kind", choices=["feature", "set"])
    p.add_argument("--configuration", choices=["both", "grouped", "split"], default="both")
    p.add_argument("--seeds", type=_int_list)
    p.add_argument("--epochs", type=int, default=600)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--hidden", type=int, default=32)
    _add_common(p)
    p.set_defaults(func=cmd_xor_bench)

    p = sub.add_parser("ablate", help="AUPRC drop per ablation variant")
    _add_run_flags(p)
    p.add_argument("--partition", action="append", help="Partition config JSON; repeat to compare groupings")
    p.add_argument("--variants", type=_str_list, help=f"Subset of {ABLATIONS}")
    _add_common(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    controller = SupermanController()
    try:
        args.func(args, controller)
    except SupermanError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
