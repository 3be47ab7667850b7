"""Command line entry points.

    fieldguide synth --config cfg.json --out data/
    fieldguide train --data data/ --model model.json --seed 0
    fieldguide sweep --config sweep.json --out curves.csv
    fieldguide export-latents --data data/ --model model.json --out latents.csv
    fieldguide serve --data data/ --model model.json --sessions sessions/

Every command exits 0 on success and nonzero with a message on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from . import bench
from .dataset import (
    DatasetFormatError,
    SynthConfig,
    generate_synthetic,
    load_dataset,
    normalize_attributes,
    save_dataset,
)
from .learner import ModelConfig, load_model, save_model, train_embedding_model
from .session import load_transcript


def _load_json(path: str):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _model_config(doc: dict | None, seed: int | None) -> ModelConfig:
    doc = dict(doc or {})
    for k in ("hidden_dims", "loss_weights"):
        if k in doc:
            doc[k] = tuple(doc[k])
    cfg = ModelConfig(**doc)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg


def cmd_synth(args) -> int:
    doc = _load_json(args.config) if args.config else {}
    cfg = SynthConfig(**doc)
    ds = generate_synthetic(cfg)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds.classes)} classes, {ds.features.shape[0]} feature rows to {args.out}")
    return 0


def cmd_train(args) -> int:
    ds = load_dataset(args.data)
    if ds.norm_stats is None:
        ds = normalize_attributes(ds)
    cfg = _model_config(_load_json(args.config) if args.config else None, args.seed)
    model = train_embedding_model(ds, cfg)
    save_model(model, args.model)
    print(
        f"trained embedding model (loss {model.loss_history[0]:.4f} -> "
        f"{model.loss_history[-1]:.4f}) -> {args.model}"
    )
    return 0


def cmd_sweep(args) -> int:
    cfg = bench.sweep_config_from_dict(_load_json(args.config))
    rows = bench.run_budget_sweep(cfg)
    bench.write_curves(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_export_latents(args) -> int:
    ds = load_dataset(args.data)
    if ds.norm_stats is None:
        ds = normalize_attributes(ds)
    model = load_model(args.model)
    descriptors = {y: ds.attributes_of(y) for y in sorted(ds.novel)}
    transcripts = [load_transcript(p) for p in sorted(args.transcript or [])]
    n = bench.export_latents(model, ds, descriptors, args.out, transcripts=transcripts)
    print(f"wrote {n} latent rows to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    ds = load_dataset(args.data)
    if ds.norm_stats is None:
        ds = normalize_attributes(ds)
    model = load_model(args.model)
    app = create_app(
        ds,
        model,
        sessions_dir=args.sessions,
        static_dir=args.static,
        workers=args.workers,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fieldguide", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic dataset directory")
    sp.add_argument("--config", help="JSON file of SynthConfig fields (defaults used if omitted)")
    sp.add_argument("--out", required=True, help="output dataset directory")
    sp.set_defaults(fn=cmd_synth)

    sp = sub.add_parser("train", help="train the embedding model on a dataset")
    sp.add_argument("--data", required=True, help="dataset directory")
    sp.add_argument("--model", required=True, help="output checkpoint path")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--config", help="JSON file of ModelConfig fields")
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("sweep", help="run a budget sweep and write curves.csv")
    sp.add_argument("--config", required=True, help="sweep config JSON")
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("export-latents", help="export latent coordinates as CSV")
    sp.add_argument("--data", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument(
        "--transcript",
        action="append",
        help="session transcript JSON to include per-round descriptors (repeatable)",
    )
    sp.set_defaults(fn=cmd_export_latents)

    sp = sub.add_parser("serve", help="serve the annotation HTTP API")
    sp.add_argument("--data", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--sessions", default="sessions", help="directory for session transcripts")
    sp.add_argument("--static", default=None, help="frontend bundle directory served at /")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--workers", type=int, default=1, help="training job worker threads")
    sp.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (DatasetFormatError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
