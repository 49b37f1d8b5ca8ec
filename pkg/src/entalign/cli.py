"""Command-line surface: synth, train, eval, score, report.

Exit codes: 0 success, 1 runtime/data error, 2 usage error. CSV output uses
'.' decimals, '\\n' line endings and a leading header row.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from .errors import InvalidInputError
from .metrics import plcc, srcc
from .model_io import ModelMeta, load_model, save_model
from .training import TrainConfig, evaluate, inference_geometry, predict_scores, train

REPORT_HEADER = (
    "group_id,score,prediction,distance,exterior_angle,aperture,"
    "image_space_norm,text_space_norm"
)


def _add_geometry_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--curvature", type=float, default=1.0, help="hyperboloid curvature c")
    p.add_argument("--k", type=float, default=0.1, help="cone aperture boundary constant")
    p.add_argument("--contraction", type=float, default=0.8,
                   help="max aperture contraction at perfect alignment")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="entalign",
                                 description="alignment scoring with entailment-cone geometry")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a planted synthetic embedding file")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train on an embedding file, report test metrics")
    p.add_argument("--data", required=True)
    p.add_argument("--model", default="model.txt")
    p.add_argument("--history", default="history.csv")
    p.add_argument("--manifest", default="manifest.json")
    _add_geometry_flags(p)
    p.add_argument("--lambda", dest="entail_weight", type=float, default=0.1,
                   help="entailment loss weight")
    p.add_argument("--lr", type=float, default=4e-4)
    p.add_argument("--wd", type=float, default=0.005)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--patience", type=int, default=6)
    p.add_argument("--lr-step", type=int, default=10)
    p.add_argument("--lr-gamma", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", default=None,
                   help="multiple seeds: comma list '1,2,3' or range '1..10'")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--val-fraction", type=float, default=0.1)

    p = sub.add_parser("eval", help="evaluate a model on a scored embedding file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="optional CSV of (index, score, prediction)")

    p = sub.add_parser("score", help="write per-sample predictions")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="write per-sample geometry columns")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    return ap


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _seeded_path(path: str, seed: int, multi: bool) -> str:
    if not multi:
        return path
    p = Path(path)
    return str(p.with_name(f"{p.stem}.seed{seed}{p.suffix}"))


def _write_history_csv(path: str, history) -> None:
    lines = ["epoch,lr,loss_total,loss_reg,loss_entail,val_srcc,val_plcc"]
    for e in history.epochs:
        lines.append(
            f"{e.epoch},{e.lr!r},{e.loss_total!r},{e.loss_reg!r},"
            f"{e.loss_entail!r},{e.val_srcc!r},{e.val_plcc!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _config_from_args(args, seed: int) -> TrainConfig:
    return TrainConfig(
        entail_weight=args.entail_weight,
        lr=args.lr,
        weight_decay=args.wd,
        batch_size=args.batch,
        max_epochs=args.epochs,
        lr_step=args.lr_step,
        lr_gamma=args.lr_gamma,
        patience=args.patience,
        seed=seed,
        curvature=args.curvature,
        k=args.k,
        contraction=args.contraction,
    )


def cmd_synth(args) -> int:
    ds = data_mod.synthetic_dataset(args.n, args.dim, args.seed, args.noise)
    data_mod.save_embeddings(ds, args.out)
    print(f"wrote {len(ds)} samples (dim {ds.dim}) to {args.out}")
    return 0


def cmd_train(args) -> int:
    seeds = _parse_seeds(args.seeds) if args.seeds else [args.seed]
    multi = len(seeds) > 1
    ds = data_mod.load_embeddings(args.data)

    results = []
    for seed in seeds:
        cfg = _config_from_args(args, seed)
        trainval, test = data_mod.prompt_disjoint_split(ds, args.train_fraction, seed)
        train_ds, val_ds = data_mod.prompt_disjoint_split(trainval, 1.0 - args.val_fraction, seed)
        params, history = train(train_ds, val_ds, cfg)
        test_srcc, test_plcc, _ = evaluate(test, params, cfg)

        model_path = _seeded_path(args.model, seed, multi)
        history_path = _seeded_path(args.history, seed, multi)
        meta = ModelMeta(
            curvature=cfg.curvature, k=cfg.k, contraction=cfg.contraction,
            alpha_max=cfg.alpha_max, dim=params.dim, hidden=params.modnet.hidden,
            bottleneck=params.image_adapter.bottleneck, seed=seed,
            epochs_run=history.epochs_run, best_val_srcc=history.best_val_srcc,
        )
        save_model(model_path, params, meta)
        _write_history_csv(history_path, history)
        results.append({
            "seed": seed,
            "model": model_path,
            "history": history_path,
            "epochs_run": history.epochs_run,
            "best_epoch": history.best_epoch,
            "best_val_srcc": history.best_val_srcc,
            "test_srcc": test_srcc,
            "test_plcc": test_plcc,
        })
        print(f"seed {seed}: epochs {history.epochs_run}  "
              f"test SRCC {test_srcc:.4f}  PLCC {test_plcc:.4f}")

    srccs = np.array([r["test_srcc"] for r in results])
    plccs = np.array([r["test_plcc"] for r in results])
    manifest = {
        "data": args.data,
        "train_fraction": args.train_fraction,
        "val_fraction": args.val_fraction,
        "config": {
            "lambda": args.entail_weight, "lr": args.lr, "wd": args.wd,
            "batch": args.batch, "epochs": args.epochs, "patience": args.patience,
            "lr_step": args.lr_step, "lr_gamma": args.lr_gamma,
            "curvature": args.curvature, "k": args.k, "contraction": args.contraction,
        },
        "seeds": seeds,
        "results": results,
        "aggregate": {
            "srcc_mean": float(srccs.mean()), "srcc_std": float(srccs.std()),
            "plcc_mean": float(plccs.mean()), "plcc_std": float(plccs.std()),
        },
    }
    Path(args.manifest).write_text(json.dumps(manifest, indent=2) + "\n")
    if multi:
        print(f"mean SRCC {srccs.mean():.4f} (std {srccs.std():.4f})  "
              f"mean PLCC {plccs.mean():.4f} (std {plccs.std():.4f})")
    return 0


def _load_model_and_data(args):
    params, meta = load_model(args.model)
    ds = data_mod.load_embeddings(args.data)
    if ds.dim != meta.dim:
        raise InvalidInputError(
            f"model dimension {meta.dim} does not match data dimension {ds.dim}"
        )
    cfg = TrainConfig(curvature=meta.curvature, k=meta.k, contraction=meta.contraction,
                      alpha_max=meta.alpha_max, seed=meta.seed)
    return params, meta, ds, cfg


def cmd_eval(args) -> int:
    params, _, ds, cfg = _load_model_and_data(args)
    e_srcc, e_plcc, preds = evaluate(ds, params, cfg)
    print(f"SRCC {e_srcc:.4f}")
    print(f"PLCC {e_plcc:.4f}")
    if args.out:
        lines = ["index,score,prediction"]
        truths = ds.scores()
        for i, (t, p) in enumerate(zip(truths, preds)):
            lines.append(f"{i},{float(t)!r},{float(p)!r}")
        Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def cmd_score(args) -> int:
    params, _, ds, cfg = _load_model_and_data(args)
    preds = predict_scores(ds, params, cfg)
    lines = ["group_id,prediction"]
    for s, p in zip(ds.samples, preds):
        lines.append(f"{s.group_id},{float(p)!r}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {len(preds)} predictions to {args.out}")
    return 0


def cmd_report(args) -> int:
    params, _, ds, cfg = _load_model_and_data(args)
    geo = inference_geometry(ds, params, cfg)
    lines = [REPORT_HEADER]
    for i, s in enumerate(ds.samples):
        cols = [s.score, geo["pred"][i], geo["distance"][i], geo["exterior_angle"][i],
                geo["aperture"][i], geo["image_space_norm"][i], geo["text_space_norm"][i]]
        lines.append(f"{s.group_id}," + ",".join(repr(float(v)) for v in cols))
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote geometry report for {len(ds)} samples to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "synth" and args.n <= 0:
        ap.error("--n must be positive")
    if args.command == "synth" and args.dim <= 0:
        ap.error("--dim must be positive")
    handlers = {
        "synth": cmd_synth,
        "train": cmd_train,
        "eval": cmd_eval,
        "score": cmd_score,
        "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
