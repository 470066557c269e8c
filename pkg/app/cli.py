"""catkit command line.

Usage:
    python catkit.py gen-toy --out data/toy
    python catkit.py prep --manifest data/toy/manifest.csv
    python catkit.py train --manifest data/toy/manifest.csv --out runs/cat --seed 7
    python catkit.py sweep --manifest data/toy/manifest.csv --out runs/sweep
    python catkit.py eval --manifest data/toy/manifest.csv --checkpoint runs/cat/model.ckpt --mode open --threshold auto
    python catkit.py embed --manifest data/toy/manifest.csv --checkpoint runs/cat/model.ckpt --out runs/embed
    python catkit.py attribute --checkpoint runs/cat/model.ckpt --wav some.wav

Exit codes:
    0 - success
    1 - the run failed (bad data, config, checkpoint or I/O)
    2 - usage error
"""

import argparse
import json
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError
from threadpoolctl import threadpool_limits

from app.artifacts import provenance, write_csv, write_json
from app.config import DspSettings, config
from app.data import LabeledSet, Manifest, default_toy_spec, gen_toy, load_manifest, load_spectrogram_set, prepare_cache
from app.dsp import read_wav, spectrogram
from app.embed import TsneConfig, cluster_report, stratified_subsample, tsne
from app.evaluation import attribute_open, baseline_constant, build_report, evaluate_probabilities, threshold_sweep, write_predictions
from app.exceptions import CatkitError, ConfigError, LabelError
from app.logger import define_log_level, logger
from app.models import CheckpointMeta, load_checkpoint, model_config_for, predict, save_checkpoint
from app.schema import ArchKind, AttributionMode, BaselineKind, LossKind, OptimizerKind, ProbabilitySet, Split
from app.train import fit, sweep_epsilon, train_config_for, write_history

AUTO = "auto"
SWEEP_GRID = np.round(np.arange(0.05, 1.0, 0.05), 2)
EMBED_COLUMNS = ["sample_path", "synthesizer", "known_flag", "y1", "y2"]
CHOICE_OPTIONS = {
    "arch": ArchKind,
    "optimizer": OptimizerKind,
    "loss": LossKind,
    "mode": AttributionMode,
    "split": Split,
}


class RunConfig(BaseModel):
    """Fully resolved options of one invocation; recorded in every artifact it writes."""

    command: str
    seed: int
    options: Dict[str, Any] = Field(default_factory=dict)
    dsp: DspSettings

    def get(self, key: str, default: Any = None) -> Any:
        value = self.options.get(key)
        return default if value is None else value

    def stamp(self) -> Dict[str, Any]:
        return provenance(self.model_dump(mode="json"), self.seed)


def _threshold_arg(text: str) -> Union[str, float]:
    if text.strip().lower() == AUTO:
        return AUTO
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threshold must be a number or 'auto', got {text!r}") from None


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file of option values (flags win)")
    common.add_argument("--seed", type=int, help="Run seed (default: [runtime].seed)")
    common.add_argument("--log-level", help="stderr log level (default: [runtime].log_level)")
    common.add_argument("--threads", type=int, help="Worker thread cap (default: CATKIT_THREADS or CPU count)")
    common.add_argument("--hop", type=int, help="STFT frame shift in samples")
    common.add_argument("--freq-crop", choices=["low", "high", "center"], help="Which 128 frequency bins are kept")
    return common


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="Output directory")
    p.add_argument("--cache-dir", type=Path, help="Spectrogram cache written by 'prep'")
    p.add_argument("--arch", choices=[a.value for a in ArchKind])
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--micro-batch-size", type=int)
    p.add_argument("--validation-fraction", type=float)
    p.add_argument("--optimizer", choices=[o.value for o in OptimizerKind])
    p.add_argument("--loss", choices=[k.value for k in LossKind])
    p.add_argument("--epsilon", type=float, help="Poly-1 coefficient")
    p.add_argument("--gamma", type=float, help="Focal exponent")
    p.add_argument("--lr", type=float)
    p.add_argument("--wd", type=float, help="Weight decay")
    p.add_argument("--known-recall-target", type=float, help="Known-class retention for the calibrated T")
    p.add_argument("--embed-dim", type=int, help="CAT token width")
    p.add_argument("--num-layers", type=int, help="CAT encoder blocks")
    p.add_argument("--num-heads", type=int, help="CAT attention heads")
    p.add_argument("--dense-units", type=int, help="CNN dense width")
    p.add_argument("--hidden", type=int, nargs=2, metavar=("H1", "H2"), help="MLP hidden widths")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="catkit", description="Synthetic speech attribution toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-toy", parents=[common], help="Generate the pseudo-synthesizer corpus")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--known-k", type=int)
    p.add_argument("--unknown-k", type=int)
    p.add_argument("--train-per-class", type=int)
    p.add_argument("--test-per-class", type=int)

    p = sub.add_parser("prep", parents=[common], help="Cache spectrograms for a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--cache-dir", type=Path, help="Default: <manifest dir>/cache")

    p = sub.add_parser("train", parents=[common], help="Train a classifier")
    _add_training_flags(p)

    p = sub.add_parser("sweep", parents=[common], help="Poly-1 epsilon gridsearch")
    _add_training_flags(p)
    p.add_argument("--epsilons", type=float, nargs="+")

    p = sub.add_parser("eval", parents=[common], help="Closed- or open-set evaluation")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--cache-dir", type=Path)
    p.add_argument("--mode", choices=[m.value for m in AttributionMode])
    p.add_argument("--threshold", type=_threshold_arg, help="T in (0, 1) or 'auto' for the calibrated value")

    p = sub.add_parser("embed", parents=[common], help="tSNE of the latent space")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--cache-dir", type=Path)
    p.add_argument("--split", choices=[s.value for s in Split])
    p.add_argument("--max-points", type=int)
    p.add_argument("--perplexity", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--learning-rate", type=float)

    p = sub.add_parser("attribute", parents=[common], help="Attribute one WAV file")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--wav", type=Path, required=True)
    p.add_argument("--threshold", type=_threshold_arg)
    return parser


def _check_choices(options: Dict[str, Any]) -> None:
    """Options from a run file skip argparse, so their enum values and threshold are checked here."""
    for key, kind in CHOICE_OPTIONS.items():
        value = options.get(key)
        if value is None:
            continue
        try:
            options[key] = kind(value).value
        except ValueError:
            raise ConfigError(f"invalid {key} {value!r}; choose from {[k.value for k in kind]}") from None
    threshold = options.get("threshold")
    if isinstance(threshold, str):
        try:
            options["threshold"] = _threshold_arg(threshold)
        except argparse.ArgumentTypeError as e:
            raise ConfigError(str(e)) from None


def resolve_run(args: argparse.Namespace) -> RunConfig:
    """config.toml defaults < ``--config`` JSON < explicit flags."""
    options: Dict[str, Any] = {}
    if args.config is not None:
        if not args.config.exists():
            raise FileNotFoundError(f"run config not found: {args.config}")
        try:
            loaded = json.loads(args.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{args.config}: invalid JSON ({e.msg})") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
        options.update({key.replace("-", "_"): value for key, value in loaded.items()})
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        options[key] = str(value) if isinstance(value, Path) else value
    _check_choices(options)

    dsp =config.dsp.model_copy(
        update={k: options[k] for k in ("hop", "freq_crop") if options.get(k) is not None}
    )
    try:
        dsp = DspSettings(**dsp.model_dump())
    except ValueError as e:
        raise ConfigError(f"invalid DSP settings: {e}") from e
    seed = options.pop("seed", None)
    try:
        seed = config.runtime.seed if seed is None else int(seed)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an integer, got {seed!r}") from None
    return RunConfig(
        command=args.command,
        seed=seed,
        options=options,
        dsp=dsp,
    )


def _load_set(run: RunConfig, manifest: Manifest, split: Split, known: Optional[bool]) -> LabeledSet:
    return load_spectrogram_set(
        manifest,
        split,
        known,
        settings=run.dsp,
        cache_dir=run.get("cache_dir"),
        threads=run.get("threads"),
    )


def _truths(synthesizers: Sequence[str], known: Sequence[bool], class_names: List[str]) -> np.ndarray:
    """Class indices under the checkpoint's class order; -1 for unknown synthesizers."""
    truths = []
    for name, is_known in zip(synthesizers, known):
        if not is_known:
            truths.append(-1)
        elif name in class_names:
            truths.append(class_names.index(name))
        else:
            raise LabelError(f"known synthesizer {name!r} is not one of the checkpoint classes {class_names}")
    return np.asarray(truths, dtype=np.int64)


def _resolve_threshold(run: RunConfig, meta: CheckpointMeta) -> float:
    threshold = run.get("threshold", config.eval.threshold)
    if threshold == AUTO:
        if meta.threshold is None:
            raise ConfigError("checkpoint has no calibrated threshold; pass --threshold T")
        return meta.threshold
    return float(threshold)


def _train_setup(run: RunConfig, data: LabeledSet):
    arch = ArchKind(run.get("arch", ArchKind.CAT.value))
    # an explicit --loss starts from that loss's defaults, otherwise from the protocol's loss
    loss = {} if run.get("loss") is not None else train_config_for(arch).loss.model_dump()
    loss.update({k: run.get(k) for k in ("loss", "epsilon", "gamma") if run.get(k) is not None})
    if "loss" in loss:
        loss["kind"] = loss.pop("loss")
    train_cfg = train_config_for(
        arch,
        seed=run.seed,
        epochs=run.get("epochs"),
        patience=run.get("patience"),
        batch_size=run.get("batch_size"),
        micro_batch_size=run.get("micro_batch_size"),
        validation_fraction=run.get("validation_fraction"),
        optimizer=run.get("optimizer"),
        lr=run.get("lr"),
        weight_decay=run.get("wd"),
        known_recall_target=run.get("known_recall_target", config.eval.known_recall_target),
        loss=loss,
    )

    widths: Dict[str, Any] = dict(run.get("model", {}))
    width_flags = {
        ArchKind.CAT: ("embed_dim", "num_layers", "num_heads"),
        ArchKind.CNN: ("dense_units",),
        ArchKind.MLP: ("hidden",),
    }
    for key in width_flags[arch]:
        if run.get(key) is not None:
            widths[key] = run.get(key)
    widths["num_classes"] = data.num_classes
    return train_cfg, model_config_for(arch, widths)


def cmd_gen_toy(run: RunConfig) -> int:
    known_k = run.get("known_k", 6)
    unknown_k = run.get("unknown_k", 2)
    spec = default_toy_spec(known_k, unknown_k, seed=run.seed)
    manifest = gen_toy(
        spec,
        known_k,
        unknown_k,
        run.get("train_per_class", 200),
        run.get("test_per_class", 100),
        run.get("out"),
        threads=run.get("threads"),
    )
    print(f"Wrote {len(manifest)} files to {run.get('out')}")
    return 0


def cmd_prep(run: RunConfig) -> int:
    manifest = load_manifest(run.get("manifest"))
    cache_dir = run.get("cache_dir", str(manifest.root / "cache"))
    count = prepare_cache(
        manifest, cache_dir, settings=run.dsp, threads=run.get("threads"),
        run_config=run.model_dump(mode="json"), seed=run.seed,
    )
    print(f"Cached {count} spectrograms in {cache_dir}")
    return 0


def cmd_train(run: RunConfig) -> int:
    manifest = load_manifest(run.get("manifest"))
    data = _load_set(run, manifest, Split.TRAIN, True)
    train_cfg, model_cfg = _train_setup(run, data)
    result = fit(model_cfg, data, train_cfg)

    out = Path(run.get("out"))
    stamp = run.stamp()
    write_history(out / "history.csv", result.history, stamp)
    meta = CheckpointMeta(
        class_names=data.class_names,
        seed=run.seed,
        threshold=result.threshold,
        best_epoch=result.best_epoch,
        val_loss=result.best_val_loss,
        run_config=run.model_dump(mode="json"),
    )
    save_checkpoint(out / "model.ckpt", result.model, meta)
    write_json(
        out / "train_report.json",
        {
            **stamp,
            "train_config": train_cfg.model_dump(mode="json"),
            "model_config": model_cfg.model_dump(mode="json"),
            "param_count": result.model.param_count(),
            "best_epoch": result.best_epoch,
            "best_val_loss": result.best_val_loss,
            "stopped_early": result.stopped_early,
            "threshold": result.threshold,
        },
    )
    best = result.history[result.best_epoch - 1]
    print(f"best epoch {result.best_epoch}: val_loss={best.val_loss:.4f} val_acc={best.val_acc:.4f} T={result.threshold:.4f}")
    return 0


def cmd_sweep(run: RunConfig) -> int:
    manifest = load_manifest(run.get("manifest"))
    data = _load_set(run, manifest, Split.TRAIN, True)
    train_cfg, model_cfg = _train_setup(run, data)
    result = sweep_epsilon(model_cfg, data, train_cfg, run.get("epsilons"))
    write_csv(Path(run.get("out")) / "sweep.csv", result.frame(), run.stamp())
    print(f"best epsilon {result.best.epsilon:g}: val_acc={result.best.val_acc:.4f}")
    return 0


def _baselines(manifest: Manifest, class_names: List[str], truths: np.ndarray, open_set: bool) -> Dict[str, Any]:
    train = manifest.select(Split.TRAIN, True)
    if not train:
        return {}
    counts = [sum(1 for e in train if e.synthesizer == name) for name in class_names]
    return {
        kind.value: baseline_constant(kind, counts, truths.tolist(), open_set).model_dump()
        for kind in (BaselineKind.MAJORITY, BaselineKind.MINORITY)
    }


def cmd_eval(run: RunConfig) -> int:
    manifest = load_manifest(run.get("manifest"))
    model, meta = load_checkpoint(run.get("checkpoint"))
    mode = AttributionMode(run.get("mode", AttributionMode.CLOSED.value))
    open_set = mode == AttributionMode.OPEN
    data = _load_set(run, manifest, Split.TEST, None if open_set else True)
    truths = _truths(data.synthesizers, data.known, meta.class_names)
    threshold = _resolve_threshold(run, meta) if open_set else config.eval.threshold

    probs = predict(model, data.x, threads=run.get("threads")).probabilities
    evaluation = evaluate_probabilities(probs, truths, mode, threshold, meta.class_names)

    out = Path(run.get("out"))
    stamp = run.stamp()
    extra: Dict[str, Any] = {"checkpoint": str(run.get("checkpoint")), "baselines": _baselines(manifest, meta.class_names, truths, open_set)}
    write_json(out / "report.json", build_report(evaluation, stamp["run_config"], run.seed, extra))
    write_predictions(out / "predictions.csv", evaluation, data.paths, stamp)
    if open_set:
        write_csv(out / "threshold_sweep.csv", threshold_sweep(probs, truths, SWEEP_GRID), stamp)

    m = evaluation.metrics
    print(
        f"{mode.value}-set accuracy={m.accuracy:.4f} precision={m.precision:.4f} "
        f"recall={m.recall:.4f} f1={m.f1:.4f}"
    )
    return 0


def cmd_embed(run: RunConfig) -> int:
    manifest = load_manifest(run.get("manifest"))
    model, _ = load_checkpoint(run.get("checkpoint"))
    data = _load_set(run, manifest, Split(run.get("split", Split.TEST.value)), None)
    keep = stratified_subsample(data.synthesizers, run.get("max_points", config.embed.max_points), run.seed)
    data = data.subset(keep)

    latent = predict(model, data.x, threads=run.get("threads")).latent
    tsne_cfg = TsneConfig(
        perplexity=run.get("perplexity", config.embed.perplexity),
        iterations=run.get("iterations", config.embed.iterations),
        learning_rate=run.get("learning_rate", config.embed.learning_rate),
        seed=run.seed,
    )
    result = tsne(latent, tsne_cfg)
    clusters = cluster_report(result.Y, data.synthesizers, seed=run.seed)

    out = Path(run.get("out"))
    stamp = run.stamp()
    frame = pd.DataFrame(
        {
            "sample_path": data.paths,
            "synthesizer": data.synthesizers,
            "known_flag": data.known.astype(bool),
            "y1": result.Y[:, 0],
            "y2": result.Y[:, 1],
        },
        columns=EMBED_COLUMNS,
    )
    write_csv(out / "embedding.csv", frame, stamp)
    write_json(
        out / "clusters.json",
        {**stamp, **clusters.model_dump(), "kl_trace": result.kl_trace, "points": len(data)},
    )
    print(f"tSNE KL {result.kl_initial:.4f} -> {result.kl_final:.4f}; cluster purity {clusters.purity:.4f}")
    return 0


def cmd_attribute(run: RunConfig) -> int:
    model, meta = load_checkpoint(run.get("checkpoint"))
    threshold = _resolve_threshold(run, meta)
    pixels = spectrogram(read_wav(run.get("wav")), run.dsp).pixels
    probs = ProbabilitySet.of(predict(model, pixels[None], threads=1).probabilities[0].astype(np.float64))
    names = meta.class_names or [str(i) for i in range(len(probs))]
    for name, p in zip(names, probs.probs):
        print(f"{name}\t{p:.6f}")
    decision = attribute_open(probs, threshold)
    print(f"p_m={decision.confidence:.6f} T={threshold:.6f}")
    print(f"decision: {decision.display(names)}")
    return 0


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "gen-toy": cmd_gen_toy,
    "prep": cmd_prep,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "eval": cmd_eval,
    "embed": cmd_embed,
    "attribute": cmd_attribute,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    define_log_level(args.log_level or config.runtime.log_level, log_dir=config.runtime.log_dir, name=args.command)
    try:
        run_cfg = resolve_run(args)
        with threadpool_limits(limits=run_cfg.get("threads", config.runtime.worker_threads)):
            return COMMANDS[args.command](run_cfg)
    except (CatkitError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    except ValidationError as e:
        logger.error(f"{args.command} failed: invalid settings: {e}")
        return 1


def main() -> None:
    raise SystemExit(run())
