"""Command-line orchestration: gen, train, eval, yosida, graphdist, verify, reproduce.

Configs are JSON; every flag overrides the matching config field.
`--scale` shrinks an experiment toward desk scale: sample counts scale
linearly (floors 8/4), epochs scale linearly with floor 30, and the grid
scales like the cube root of the factor within task-specific power-of-two
bounds, so frequency ranges always stay at or below Nyquist. Mode
cutoffs are clamped to the scaled grid. Independent runs inside
`reproduce` execute on a thread pool capped by MGL_THREADS (default 1).
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .datagen import (ConfigError, Dataset, FourierFieldConfig, build_dataset, dataset_operator,
                      load, save)
from .graphdist import CompactWindow, SoftGraphParams, graph_distance
from .hilbert import Grid1D, Grid2D
from .metrics import COLUMNS, EvalReport, aggregate, evaluate, report_write, write_reports_csv
from .model import StructuredModel, build_model, load_checkpoint, save_checkpoint
from .operators import (AbsSubdifferential, DerivativePeriodic1D, GraphSample, PLaplacian2D,
                        StepOperator, op_from_dict, yosida)
from .train import (L2Loss, SoftGraphLoss, SoftGraphStructuredLoss, SoftLinfLoss, TrainConfig,
                    train, write_history_csv)
from .util import round_pow2
from .verify import (default_edap_outcome, run_all, verify_lp_counterexample,
                     verify_step_counterexample, verify_uniform_counterexample,
                     verify_yosida_graph_convergence)

VARIANTS = ["l2", "soft_linf", "graph", "graph_structured"]


def table_defaults(table: int) -> dict:
    if table == 1:
        return {
            "task": "derivative1d",
            "grid": 128,
            "n_train": 2000,
            "n_test": 400,
            "data_seed": 1234,
            "operator": {"kind": "DerivativePeriodic1D"},
            "datagen": {"k_min": 3, "k_max": 6, "n_min": 2, "n_max": 30, "beta": 0.5},
            "test_datagen": {"k_min": 3, "k_max": 6, "n_min": 2, "n_max": 30, "beta": 0.5},
            "model": {"kind": "spectral", "dim": 1, "layers": 3, "modes": 34,
                      "channels": 100, "activation": "gelu"},
            "train": {"epochs": 80, "batch_size": 64, "learning_rate": 2e-3,
                      "weight_decay": 1e-6, "clip_threshold": 1.0},
            "loss_params": {"tau_inf": 0.02, "tau_in": 0.01, "tau_out": 0.01,
                            "w1": 0.5, "w2": 1.0},
            "structured": {"lambda": 0.01, "gamma": 0.01, "n_nonexp_pairs": 512,
                           "mode": "hard"},
            "eval": {"n_mono_pairs": 128 ** 2, "mono_on_train": False, "eval_seed": 0},
        }
    if table == 2:
        return {
            "task": "plaplacian2d",
            "grid": 32,
            "n_train": 2000,
            "n_test": 400,
            "data_seed": 1234,
            "operator": {"kind": "PLaplacian2D", "p": 1.2, "eps": 1e-8},
            "datagen": {"k_min": 1, "k_max": 8, "n_min": 2, "n_max": 6, "beta": 0.0},
            "test_datagen": {"k_min": 1, "k_max": 8, "n_min": 9, "n_max": 16, "beta": 0.0},
            "model": {"kind": "spectral", "dim": 2, "layers": 3, "modes": 16,
                      "channels": 96, "activation": "gelu"},
            "train": {"epochs": 100, "batch_size": 32, "learning_rate": 3e-4,
                      "weight_decay": 1e-6, "clip_threshold": 0.3},
            "loss_params": {"tau_inf": 0.1, "tau_in": 1e-4, "tau_out": 1e-4,
                            "w1": 1e-4, "w2": 1.0},
            "structured": {"lambda": 7e-3, "gamma": 2e-5, "n_nonexp_pairs": 64,
                           "mode": "hard"},
            "eval": {"n_mono_pairs": 5000, "mono_on_train": False, "eval_seed": 0},
        }
    raise ConfigError(f"no defaults for table {table}")


def task_defaults(task: str) -> dict:
    return table_defaults({"derivative1d": 1, "plaplacian2d": 2}[task])


def apply_scale(cfg: dict, scale: float) -> dict:
    if scale <= 0:
        raise ConfigError(f"--scale must be positive, got {scale}")
    out = copy.deepcopy(cfg)
    out["n_train"] = max(8, round(cfg["n_train"] * scale))
    out["n_test"] = max(4, round(cfg["n_test"] * scale))
    out["train"]["epochs"] = max(30, round(cfg["train"]["epochs"] * scale))
    # keep steps-per-epoch roughly constant under data scaling
    out["train"]["batch_size"] = max(4, round(cfg["train"]["batch_size"] * scale))
    if cfg["task"] == "derivative1d":
        out["grid"] = round_pow2(128 * scale ** (1 / 3), 64, 128)
    else:
        out["grid"] = round_pow2(32 * scale ** (1 / 3), 32, 64)
    if out["model"]["kind"] == "encdec":
        out["model"]["m"] = min(cfg["model"]["m"], out["grid"] // 2)
    else:
        out["model"]["modes"] = min(cfg["model"]["modes"], out["grid"] // 2)
        # capacity shrinks with scale so the shortened optimizer budget
        # still trains to near-convergence; mode cutoffs keep covering
        # the data's frequency ranges
        out["model"]["channels"] = max(16, round(cfg["model"]["channels"] * scale))
    out["eval"]["n_mono_pairs"] = max(256, round(cfg["eval"]["n_mono_pairs"] * scale))
    out["structured"]["n_nonexp_pairs"] = max(16, round(cfg["structured"]["n_nonexp_pairs"] * scale))
    return out


def validate_config(cfg: dict) -> None:
    def need(path, cond, msg):
        if not cond:
            raise ConfigError(f"{path}: {msg}")

    need("task", cfg.get("task") in ("derivative1d", "plaplacian2d"),
         f"unknown task {cfg.get('task')!r}")
    grid = cfg["grid"]
    need("grid", grid >= 4 and grid % 2 == 0, f"grid must be even and >= 4, got {grid}")
    for key in ("datagen", "test_datagen"):
        dg = cfg[key]
        need(f"{key}.k_min", 1 <= dg["k_min"] <= dg["k_max"], "need 1 <= k_min <= k_max")
        need(f"{key}.n_min", 1 <= dg["n_min"] <= dg["n_max"], "need 1 <= n_min <= n_max")
        need(f"{key}.n_max", dg["n_max"] <= grid // 2,
             f"frequency {dg['n_max']} exceeds the grid Nyquist mode {grid // 2}")
        need(f"{key}.beta", dg["beta"] >= 0, "beta must be nonnegative")
    model = cfg["model"]
    if model["kind"] == "encdec":
        need("model.m", 0 < model["m"] <= grid // 2,
             f"cutoff m={model['m']} outside (0, {grid // 2}]")
    elif model["kind"] == "spectral":
        need("model.modes", 0 < model["modes"] <= grid // 2,
             f"modes {model['modes']} outside (0, {grid // 2}]")
    else:
        raise ConfigError(f"model.kind: unknown kind {model['kind']!r}")
    tr = cfg["train"]
    for k in ("epochs", "batch_size"):
        need(f"train.{k}", tr[k] >= 0 if k == "epochs" else tr[k] >= 1, "out of range")
    for k in ("learning_rate", "clip_threshold"):
        need(f"train.{k}", tr[k] > 0, "must be positive")
    need("train.weight_decay", tr["weight_decay"] >= 0, "must be nonnegative")
    lp = cfg["loss_params"]
    for k in ("tau_inf", "tau_in", "tau_out"):
        need(f"loss_params.{k}", lp[k] > 0, "temperature must be positive")
    for k in ("w1", "w2"):
        need(f"loss_params.{k}", lp[k] >= 0, "weights must be nonnegative")
    st = cfg["structured"]
    need("structured.lambda", st["lambda"] > 0, "must be positive")
    need("structured.gamma", st["gamma"] >= 0, "must be nonnegative")
    need("structured.mode", st["mode"] in ("penalty", "hard"), "must be 'penalty' or 'hard'")
    need("eval.n_mono_pairs", cfg["eval"]["n_mono_pairs"] >= 1, "need at least one pair")


def load_config(path: str | None, task: str | None, scale: float) -> dict:
    if path:
        with open(path) as f:
            cfg = json.load(f)
        base = task_defaults(cfg.get("task", task or "derivative1d"))
        for k, v in cfg.items():
            if isinstance(v, dict) and isinstance(base.get(k), dict):
                base[k].update(v)
            else:
                base[k] = v
        cfg = base
    else:
        if task is None:
            raise ConfigError("either --task or --config is required")
        cfg = task_defaults(task)
    if scale != 1.0:
        cfg = apply_scale(cfg, scale)
    validate_config(cfg)
    return cfg


def make_datasets(cfg: dict, data_seed: int | None = None):
    seed = cfg["data_seed"] if data_seed is None else data_seed
    op = op_from_dict(cfg["operator"])
    dim = 1 if cfg["task"] == "derivative1d" else 2
    grid = Grid1D(cfg["grid"]) if dim == 1 else Grid2D(cfg["grid"])
    dg_tr = FourierFieldConfig(dim=dim, seed=seed, **cfg["datagen"])
    dg_te = FourierFieldConfig(dim=dim, seed=seed + 1, **cfg["test_datagen"])
    train_ds = build_dataset(op, dg_tr, grid, cfg["n_train"], label="train")
    test_ds = build_dataset(op, dg_te, grid, cfg["n_test"], label="test")
    return train_ds, test_ds


def make_loss(cfg: dict, variant: str):
    lp = cfg["loss_params"]
    gp = SoftGraphParams(tau_in=lp["tau_in"], tau_out=lp["tau_out"], w1=lp["w1"], w2=lp["w2"])
    if variant == "l2":
        return L2Loss()
    if variant == "soft_linf":
        return SoftLinfLoss(lp["tau_inf"])
    if variant == "graph":
        return SoftGraphLoss(gp)
    if variant == "graph_structured":
        st = cfg["structured"]
        return SoftGraphStructuredLoss(gp, st["gamma"], st["n_nonexp_pairs"])
    raise ConfigError(f"unknown loss variant {variant!r}")


def make_variant_model(cfg: dict, variant: str, seed: int):
    core = build_model(cfg["model"], cfg["grid"], seed=seed)
    if variant != "graph_structured":
        return core
    st = cfg["structured"]
    if st["mode"] == "hard" and cfg["model"].get("activation", "gelu") not in ("relu", "tanh"):
        hard_cfg = dict(cfg["model"], activation="relu")
        core = build_model(hard_cfg, cfg["grid"], seed=seed)
    return StructuredModel(core, st["lambda"], st["mode"])


def run_one(cfg: dict, train_ds: Dataset, test_ds: Dataset, variant: str, seed: int,
            out_dir: Path, skip_selftest: bool = False):
    out_dir.mkdir(parents=True, exist_ok=True)
    model = make_variant_model(cfg, variant, seed)
    tcfg = TrainConfig(loss=make_loss(cfg, variant), seed=seed, skip_selftest=skip_selftest,
                       **{k: cfg["train"][k] for k in
                          ("epochs", "batch_size", "learning_rate", "weight_decay",
                           "clip_threshold")})
    history = train(model, train_ds, tcfg)
    save_checkpoint(model, out_dir / "checkpoint.bin")
    write_history_csv(history, out_dir / "history.csv")
    lp = cfg["loss_params"]
    mono_inputs = train_ds.inputs if cfg["eval"].get("mono_on_train") else None
    report = evaluate(model, test_ds, cfg["eval"]["n_mono_pairs"], cfg["eval"]["eval_seed"],
                      lp["w1"], lp["w2"], mono_inputs=mono_inputs)
    echo = {"config": cfg, "variant": variant, "seed": seed}
    report_write(report, out_dir / "metrics.csv", out_dir / "metrics.json", echo)
    with open(out_dir / "run_config.json", "w") as f:
        json.dump(echo, f, indent=1, sort_keys=True)
    return report


def ranking_check(per_seed: dict[int, dict[str, EvalReport]]):
    """The directional reproduction gate: graph beats l2 on the graph
    metric and the structured model beats l2 on the violation fraction,
    each in at least three quarters of the seeds."""
    seeds = sorted(per_seed)
    graph_wins = sum(per_seed[s]["graph"].test_graph < per_seed[s]["l2"].test_graph
                     for s in seeds)
    mono_wins = sum(per_seed[s]["graph_structured"].mono_frac < per_seed[s]["l2"].mono_frac
                    for s in seeds)
    needed = int(np.ceil(0.75 * len(seeds)))
    ok = graph_wins >= needed and mono_wins >= needed
    return ok, graph_wins, mono_wins, needed


def reproduce(table: int, scale: float, n_seeds: int, out_dir: Path,
              structured_mode: str | None = None, epochs: int | None = None,
              skip_selftest: bool = False, quiet: bool = False):
    cfg = apply_scale(table_defaults(table), scale) if scale != 1.0 else table_defaults(table)
    if structured_mode:
        cfg["structured"]["mode"] = structured_mode
    if epochs is not None:
        cfg["train"]["epochs"] = epochs
    validate_config(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = list(range(n_seeds))
    datasets = {}
    for s in seeds:
        train_ds, test_ds = make_datasets(cfg, data_seed=cfg["data_seed"] + s)
        save(train_ds, out_dir / f"train_seed{s}.mgl")
        save(test_ds, out_dir / f"test_seed{s}.mgl")
        datasets[s] = (train_ds, test_ds)

    jobs = [(s, v) for s in seeds for v in VARIANTS]
    per_seed: dict[int, dict[str, EvalReport]] = {s: {} for s in seeds}

    def _job(sv):
        s, v = sv
        tr, te = datasets[s]
        return s, v, run_one(cfg, tr, te, v, s, out_dir / f"run_{v}_seed{s}",
                             skip_selftest=skip_selftest)

    workers = max(1, int(os.environ.get("MGL_THREADS", "1")))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            for s, v, rep in ex.map(_job, jobs):
                per_seed[s][v] = rep
    else:
        for job in jobs:
            s, v, rep = _job(job)
            per_seed[s][v] = rep
            if not quiet:
                print(f"  run variant={v} seed={s}: test_graph={rep.test_graph:.4g} "
                      f"mono_frac={rep.mono_frac:.4g}")

    agg_path = out_dir / "aggregate_table.csv"
    with open(agg_path, "w") as f:
        f.write("variant," + ",".join(f"{c},{c}_std" for c in COLUMNS) + "\n")
        for v in VARIANTS:
            stats = aggregate([per_seed[s][v] for s in seeds])
            cells = [f"{stats[c][0]!r},{stats[c][1]!r}" for c in COLUMNS]
            f.write(v + "," + ",".join(cells) + "\n")
    if not quiet:
        print(f"wrote {agg_path}")
        for v in VARIANTS:
            stats = aggregate([per_seed[s][v] for s in seeds])
            pretty = "  ".join(f"{c}={stats[c][0]:.4g}±{stats[c][1]:.2g}" for c in COLUMNS[:5])
            print(f"  {v:16s} {pretty}")
    ok, gw, mw, needed = ranking_check(per_seed)
    verdict = "PASS" if ok else "FAIL"
    print(f"ranking check: graph<l2 on test_graph in {gw}/{len(seeds)} seeds, "
          f"structured<l2 on mono_frac in {mw}/{len(seeds)} seeds (need {needed}): {verdict}")
    return per_seed, ok


# ---- subcommand handlers ----

def cmd_gen(args) -> int:
    cfg = load_config(args.config, args.task, args.scale)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_ds, test_ds = make_datasets(cfg, data_seed=args.seed)
    save(train_ds, out / "train.mgl")
    save(test_ds, out / "test.mgl")
    with open(out / "gen_config.json", "w") as f:
        json.dump(cfg, f, indent=1, sort_keys=True)
    print(f"wrote {out/'train.mgl'} ({len(train_ds)} samples) and "
          f"{out/'test.mgl'} ({len(test_ds)} samples) on grid {cfg['grid']}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.task, args.scale)
    if args.epochs is not None:
        cfg["train"]["epochs"] = args.epochs
    if args.structured_mode:
        cfg["structured"]["mode"] = args.structured_mode
    validate_config(cfg)
    train_ds = load(args.data)
    report_dir = Path(args.out)
    report_dir.mkdir(parents=True, exist_ok=True)
    model = make_variant_model(cfg, args.loss, args.seed)
    tcfg = TrainConfig(loss=make_loss(cfg, args.loss), seed=args.seed,
                       skip_selftest=args.skip_selftest,
                       **{k: cfg["train"][k] for k in
                          ("epochs", "batch_size", "learning_rate", "weight_decay",
                           "clip_threshold")})
    history = train(model, train_ds, tcfg)
    save_checkpoint(model, report_dir / "checkpoint.bin")
    write_history_csv(history, report_dir / "history.csv")
    with open(report_dir / "run_config.json", "w") as f:
        json.dump({"config": cfg, "variant": args.loss, "seed": args.seed}, f,
                  indent=1, sort_keys=True)
    last = history.epoch_losses[-1] if history.epoch_losses else float("nan")
    print(f"trained {args.loss} for {tcfg.epochs} epochs; final loss {last:.6g}; "
          f"checkpoint at {report_dir/'checkpoint.bin'}")
    return 0


def cmd_eval(args) -> int:
    run_dir = Path(args.run)
    ckpt = run_dir / "checkpoint.bin" if run_dir.is_dir() else run_dir
    model = load_checkpoint(ckpt)
    test_ds = load(args.data)
    cfg_path = run_dir / "run_config.json" if run_dir.is_dir() else None
    w1, w2, n_mono, eval_seed = args.w1, args.w2, args.mono_pairs, args.eval_seed
    if cfg_path and cfg_path.exists():
        with open(cfg_path) as f:
            echo = json.load(f)
        lp = echo["config"]["loss_params"]
        ev = echo["config"]["eval"]
        w1 = lp["w1"] if w1 is None else w1
        w2 = lp["w2"] if w2 is None else w2
        n_mono = ev["n_mono_pairs"] if n_mono is None else n_mono
        eval_seed = ev["eval_seed"] if eval_seed is None else eval_seed
    w1 = 1.0 if w1 is None else w1
    w2 = 1.0 if w2 is None else w2
    n_mono = 5000 if n_mono is None else n_mono
    eval_seed = 0 if eval_seed is None else eval_seed
    mono_inputs = load(args.mono_train).inputs if args.mono_train else None
    report = evaluate(model, test_ds, n_mono, eval_seed, w1, w2, mono_inputs=mono_inputs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_write(report, out / "metrics.csv", out / "metrics.json",
                 {"checkpoint": str(ckpt), "data": str(args.data), "w1": w1, "w2": w2})
    print(f"test_mse={report.test_mse:.6g} test_graph={report.test_graph:.6g} "
          f"mono_frac={report.mono_frac:.4g} -> {out/'metrics.csv'}")
    return 0


def cmd_yosida(args) -> int:
    ops = {"abs": AbsSubdifferential(), "step": StepOperator(),
           "derivative": DerivativePeriodic1D()}
    op = ops[args.op]
    try:
        x = float(args.input)
        print(repr(yosida(op, args.lam, x)))
        return 0
    except ValueError:
        pass
    ds = load(args.input)
    outputs = np.stack([yosida(op, args.lam, ds.input_field(i)).values for i in range(len(ds))])
    out_ds = Dataset(ds.grid_n, ds.dim, ds.inputs, outputs,
                     {**ds.manifest, "yosida_lambda": args.lam})
    out_path = args.out or (str(args.input) + f".yosida{args.lam:g}.mgl")
    save(out_ds, out_path)
    norms = np.sqrt(np.sum(outputs.reshape(len(ds), -1) ** 2, axis=1) / ds.grid_n ** ds.dim)
    print(f"wrote {out_path}; output norm range [{norms.min():.4g}, {norms.max():.4g}]")
    return 0


def _parse_window(text: str) -> CompactWindow:
    if text.strip().lower() == "unbounded":
        return CompactWindow.unbounded()
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 2:
        raise ConfigError("window must be 'Ru,Rv' or 'unbounded'")
    return CompactWindow(parts[0], parts[1])


def cmd_graphdist(args) -> int:
    a, b = load(args.a), load(args.b)
    ga = GraphSample(a.inputs, a.targets, label=str(args.a))
    gb = GraphSample(b.inputs, b.targets, label=str(args.b))
    print(repr(graph_distance(ga, gb, _parse_window(args.window))))
    return 0


def cmd_verify(args) -> int:
    if args.all or not args.names:
        outcomes = run_all()
    else:
        table = {
            "uniform": verify_uniform_counterexample,
            "lp": verify_lp_counterexample,
            "step": lambda: verify_step_counterexample(maximal=False),
            "step_maximal": lambda: verify_step_counterexample(maximal=True),
            "yosida": verify_yosida_graph_convergence,
            "edap": default_edap_outcome,
        }
        unknown = [n for n in args.names if n not in table]
        if unknown:
            raise ConfigError(f"unknown verifier names {unknown}; choose from {sorted(table)}")
        outcomes = [table[n]() for n in args.names]
    for oc in outcomes:
        print(f"[{'PASS' if oc.passed else 'FAIL'}] {oc.name}")
    with open(args.out, "w") as f:
        json.dump([oc.to_dict() for oc in outcomes], f, indent=1, sort_keys=True)
    print(f"wrote {args.out}")
    return 0 if all(oc.passed for oc in outcomes) else 1


def cmd_reproduce(args) -> int:
    _, ok = reproduce(args.table, args.scale, args.seeds, Path(args.out),
                      structured_mode=args.structured_mode, epochs=args.epochs,
                      skip_selftest=args.skip_selftest)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mgl", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate train/test datasets")
    p.add_argument("--task", choices=["derivative1d", "plaplacian2d"])
    p.add_argument("--config")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None, help="override the data seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one model variant")
    p.add_argument("--data", required=True)
    p.add_argument("--loss", choices=VARIANTS, required=True)
    p.add_argument("--task", choices=["derivative1d", "plaplacian2d"])
    p.add_argument("--config")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--structured-mode", choices=["penalty", "hard"], default=None)
    p.add_argument("--skip-selftest", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--run", required=True, help="run directory or checkpoint file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--w1", type=float, default=None)
    p.add_argument("--w2", type=float, default=None)
    p.add_argument("--mono-pairs", type=int, default=None)
    p.add_argument("--eval-seed", type=int, default=None)
    p.add_argument("--mono-train", default=None,
                   help="dataset whose inputs feed the monotonicity pairs")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("yosida", help="apply a Yosida regularization")
    p.add_argument("--op", choices=["abs", "step", "derivative"], required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--input", required=True, help="a number (scalar ops) or a dataset path")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_yosida)

    p = sub.add_parser("graphdist", help="local graph distance between two sampled graphs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--window", default="unbounded", help="'Ru,Rv' or 'unbounded'")
    p.set_defaults(func=cmd_graphdist)

    p = sub.add_parser("verify", help="run the numerical verifiers")
    p.add_argument("--all", action="store_true")
    p.add_argument("names", nargs="*",
                   help="uniform lp step step_maximal yosida edap (default: all)")
    p.add_argument("--out", default="verify.json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reproduce", help="train all four variants across seeds and aggregate")
    p.add_argument("--table", type=int, choices=[1, 2], required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seeds", type=int, default=4)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--structured-mode", choices=["penalty", "hard"], default=None)
    p.add_argument("--skip-selftest", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
