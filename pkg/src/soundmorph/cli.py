"""Command-line entry points.

Subcommands:

* ``train``         fit a model on a digit/drum corpus, write a run directory
* ``eval``          1-NN accuracy, deviation report, 2-D projection export
* ``centers``       decode each class's latent center to a WAV
* ``morph``         decode a latent path between two anchors
* ``serve``         run the HTTP service on a checkpoint
* ``cluster-drums`` label a drum corpus by attack-feature k-means
* ``demo-data``     generate the synthetic demo corpora

Every failure prints one line ``error: <Type>: <message>`` on stderr and
exits nonzero.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import audio, evaluation, features, models, morphing, synthdata, training
from .config import ExperimentConfig, ServiceConfig, load_config, write_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="soundmorph",
        description="Sound-morphing VAE toolkit: train, evaluate, morph, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write a run directory")
    p_train.add_argument("--data", help="corpus directory of WAV files")
    p_train.add_argument("--manifest", help="reuse an existing dataset manifest")
    p_train.add_argument("--data-root", help="override the manifest's data root")
    p_train.add_argument("--arch", choices=["DC", "CC"], help="architecture override")
    p_train.add_argument("--config", help="YAML experiment config")
    p_train.add_argument("--preset", choices=["digits", "drums"], default="digits")
    p_train.add_argument("--epochs", type=int, help="epoch override")
    p_train.add_argument("--batch-size", type=int, help="batch size override")
    p_train.add_argument("--seed", type=int, help="training seed override")
    p_train.add_argument("--out", help="run directory (default runs/<stamp>-<arch>)")
    p_train.add_argument("--progress", action="store_true", help="print per-epoch losses")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on its dataset")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--data-root", help="override the manifest's data root")
    p_eval.add_argument("--config", help="YAML experiment config (MFCC settings)")
    p_eval.add_argument("--preset", choices=["digits", "drums"], default="digits")
    p_eval.add_argument("--out", help="output directory (default <run>/eval)")
    p_eval.add_argument(
        "--skip-deviation",
        action="store_true",
        help="only compute 1-NN accuracy and projections",
    )

    p_centers = sub.add_parser("centers", help="decode class centers to WAV files")
    p_centers.add_argument("--checkpoint", required=True)
    p_centers.add_argument("--manifest", required=True)
    p_centers.add_argument("--data-root")
    p_centers.add_argument("--out", help="output directory (default <run>/centers)")

    p_morph = sub.add_parser("morph", help="decode a latent path between two anchors")
    p_morph.add_argument("--checkpoint", required=True)
    p_morph.add_argument("--manifest", help="needed for class:/id: anchors")
    p_morph.add_argument("--data-root")
    p_morph.add_argument(
        "--from",
        dest="anchor_from",
        required=True,
        help="anchor: class:<label> | id:<source_id> | vec:<v1,v2,...>",
    )
    p_morph.add_argument("--to", dest="anchor_to", required=True, help="anchor (same forms)")
    p_morph.add_argument("--steps", type=int, default=10)
    p_morph.add_argument("--gap-ms", type=float, default=morphing.DEFAULT_GAP_MS)
    p_morph.add_argument("--out", help="output directory (default <run>/morphs/<stamp>)")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--checkpoint", required=True)
    p_serve.add_argument("--manifest", required=True)
    p_serve.add_argument("--data-root")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--decode-mode", choices=["mean", "sample"], default="mean")

    p_cluster = sub.add_parser(
        "cluster-drums", help="label a drum corpus by k-means over attack features"
    )
    p_cluster.add_argument("--data", required=True, help="drum corpus directory")
    p_cluster.add_argument("--k", type=int, default=5)
    p_cluster.add_argument("--seed", type=int, default=0)
    p_cluster.add_argument("--out", help="manifest path (default <data>/manifest.tsv)")
    p_cluster.add_argument("--centroids", help="optional npz path for the fitted centroids")

    p_demo = sub.add_parser("demo-data", help="generate synthetic demo corpora")
    p_demo.add_argument("--out", required=True, help="output directory")
    p_demo.add_argument("--kind", choices=["digits", "drums"], default="digits")
    p_demo.add_argument("--seed", type=int, default=0)

    return parser


def _load_experiment(args) -> ExperimentConfig:
    return load_config(getattr(args, "config", None), preset=getattr(args, "preset", "digits"))


def _load_split(args, cfg: ExperimentConfig) -> audio.DatasetSplit:
    if getattr(args, "manifest", None):
        return audio.load_manifest(args.manifest, root=getattr(args, "data_root", None))
    if not getattr(args, "data", None):
        raise ValueError("either --data or --manifest is required")
    if cfg.dataset.kind == "drums":
        vectors = _drum_vectors(args.data)
        cluster = features.kmeans_fit(vectors, cfg.model.num_classes, cfg.dataset.seed)
        return audio.build_drum_dataset(args.data, cluster)
    return audio.build_digit_dataset(args.data, cfg.dataset.seed)


def _drum_vectors(data_dir) -> list[np.ndarray]:
    paths = sorted(Path(data_dir).glob("*.wav"))
    if not paths:
        raise ValueError(f"{data_dir}: no WAV files found")
    vectors = []
    for path in paths:
        clip = audio.fit_length(
            audio.peak_normalize(audio.load_wav(path)), audio.DRUM_FIXED_LENGTH
        )
        vectors.append(features.drum_attack_features(clip))
    return vectors


def _cmd_train(args) -> int:
    cfg = _load_experiment(args)
    model_cfg = cfg.model
    train_cfg = cfg.train
    if args.arch:
        model_cfg = type(model_cfg)(**{**_cfg_dict(model_cfg), "arch": args.arch})
    overrides = {}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        train_cfg = type(train_cfg)(**{**_cfg_dict(train_cfg), **overrides})

    split = _load_split(args, cfg)

    stamp = time.strftime("%Y%m%d-%H%M%S")
    run_dir = Path(args.out or f"runs/{stamp}-{model_cfg.arch.lower()}-seed{train_cfg.seed}")
    (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)

    build = models.build_dcvae if model_cfg.arch == "DC" else models.build_ccvae
    model = build(
        input_len=split.fixed_length,
        latent_dim=model_cfg.latent_dim,
        seed=model_cfg.seed,
        num_classes=split.num_classes,
        classifier_hidden=model_cfg.classifier_hidden,
        sample_rate=split.sample_rate,
    )

    if getattr(args, "data", None):
        audio.write_manifest(split, run_dir / "manifest.tsv", root=args.data)
    write_config(cfg, run_dir / "config.yaml")

    checkpoint = run_dir / "checkpoints" / "model.npz"
    training.train(
        model,
        split,
        train_cfg,
        checkpoint_path=checkpoint,
        log_path=run_dir / "losses.csv",
        progress=args.progress,
    )
    print(f"checkpoint={checkpoint}")
    print(f"losses={run_dir / 'losses.csv'}")
    return 0


def _cfg_dict(dc) -> dict:
    from dataclasses import fields

    return {f.name: getattr(dc, f.name) for f in fields(dc)}


def _cmd_eval(args) -> int:
    cfg = _load_experiment(args)
    model = models.load_checkpoint(args.checkpoint)
    split = audio.load_manifest(args.manifest, root=args.data_root)
    out_dir = Path(args.out or Path(args.checkpoint).parent.parent / "eval")
    out_dir.mkdir(parents=True, exist_ok=True)

    train_latent = evaluation.project_dataset(model, split.train)
    if split.test:
        test_latent = evaluation.project_dataset(model, split.test)
        accuracy = evaluation.knn1_accuracy(train_latent, test_latent)
        shown = test_latent
    else:
        accuracy = evaluation.knn1_accuracy_loo(train_latent)
        shown = train_latent
    print(f"knn1_accuracy={accuracy:.6f}")

    meta = {"arch": model.arch, "seed": model.seed, "checkpoint": args.checkpoint}
    lines = [f"# {k}={v}" for k, v in sorted(meta.items())]
    lines += ["metric,value", f"knn1_accuracy,{accuracy:.6f}"]
    (out_dir / "knn.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    projection = evaluation.export_projection_2d(shown)
    evaluation.write_projection_csv(projection, out_dir / "projection.csv")
    evaluation.write_latents_csv(shown, out_dir / "latents.csv")

    if split.test and not args.skip_deviation:
        report = evaluation.deviation_report(model, split, cfg.mfcc, metadata=meta)
        evaluation.write_deviation_csv(report, out_dir / "deviation.csv")
        print(f"deviation_overall_mean={report.overall_mean:.6f}")
    elif not split.test:
        print("deviation_skipped=no_test_split")
    return 0


def _cmd_centers(args) -> int:
    model = models.load_checkpoint(args.checkpoint)
    split = audio.load_manifest(args.manifest, root=args.data_root)
    clips = split.test if split.test else split.train
    latent = evaluation.project_dataset(model, clips)
    out_dir = Path(args.out or Path(args.checkpoint).parent.parent / "centers")
    centers = morphing.decode_centers(model, latent, out_dir=out_dir)
    print(f"centers={len(centers)} out={out_dir}")
    return 0


def _resolve_anchor(spec: str, model, latent) -> np.ndarray:
    kind, _, value = spec.partition(":")
    if not value:
        raise ValueError(
            f"anchor {spec!r} must look like class:<label>, id:<source_id> or vec:<v,...>"
        )
    if kind == "vec":
        return np.array([float(v) for v in value.split(",")], dtype=np.float64)
    if latent is None:
        raise ValueError(f"anchor {spec!r} needs --manifest to resolve")
    if kind == "class":
        return evaluation.class_center(latent, int(value))
    if kind == "id":
        for entry in latent.entries:
            if entry.source_id == value:
                return entry.mu
        raise ValueError(f"source_id {value!r} not found in manifest")
    raise ValueError(f"unknown anchor kind {kind!r} (use class:, id: or vec:)")


def _cmd_morph(args) -> int:
    model = models.load_checkpoint(args.checkpoint)
    latent = None
    if args.manifest:
        split = audio.load_manifest(args.manifest, root=args.data_root)
        clips = split.test if split.test else split.train
        latent = evaluation.project_dataset(model, clips)

    z_start = _resolve_anchor(args.anchor_from, model, latent)
    z_end = _resolve_anchor(args.anchor_to, model, latent)
    req = morphing.MorphRequest(
        z_start=z_start, z_end=z_end, steps=args.steps, gap_ms=args.gap_ms
    )
    stamp = time.strftime("%Y%m%d-%H%M%S")
    out_dir = Path(args.out or Path(args.checkpoint).parent.parent / "morphs" / stamp)
    result = morphing.render_morph(model, req, out_dir=out_dir)
    print(f"steps={len(result.step_clips)} out={out_dir}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = ServiceConfig(
        checkpoint=args.checkpoint,
        manifest=args.manifest,
        data_root=args.data_root,
        host=args.host,
        port=args.port,
        decode_mode=args.decode_mode,
    )
    app = create_app(cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")
    return 0


def _cmd_cluster_drums(args) -> int:
    vectors = _drum_vectors(args.data)
    cluster = features.kmeans_fit(vectors, args.k, args.seed)
    split = audio.build_drum_dataset(args.data, cluster)
    out = Path(args.out or Path(args.data) / "manifest.tsv")
    audio.write_manifest(split, out, root=args.data)
    if args.centroids:
        np.savez(args.centroids, centroids=cluster.centroids, k=cluster.k, seed=cluster.seed)
    counts = np.bincount([item.label for item in split.train], minlength=args.k)
    print(f"manifest={out} clusters={','.join(str(c) for c in counts)}")
    return 0


def _cmd_demo_data(args) -> int:
    if args.kind == "digits":
        paths = synthdata.generate_digit_corpus(args.out, seed=args.seed)
    else:
        paths = synthdata.generate_drum_corpus(args.out, seed=args.seed)
    print(f"files={len(paths)} out={args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "centers": _cmd_centers,
    "morph": _cmd_morph,
    "serve": _cmd_serve,
    "cluster-drums": _cmd_cluster_drums,
    "demo-data": _cmd_demo_data,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # uniform one-line diagnostics for scripting
        if os.environ.get("SOUNDMORPH_DEBUG"):
            raise
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
