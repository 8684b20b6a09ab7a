"""Command-line entry point wiring generation, training and evaluation.

Subcommands::

    navoffset generate --config cfg.json --out DIR
    navoffset train    --dataset DIR [--lambda1 L] [--lambda2 L] [--verify-oracle] --out DIR
    navoffset eval     --model PATH [--preset NAME|--profile P] [--modes M] [--runs N] --out DIR

Every command is a pure function of (config, inputs, seed); rerunning with
the same arguments reproduces every output byte for byte.  Exit codes:
0 success, 1 usage/config/IO error, 2 numerical failure, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import jsonschema

from . import metrics, simulator, storage
from .errors import (
    DimensionMismatch,
    InvalidProfile,
    NonFiniteObjective,
    NotConverged,
    SingularSystem,
)
from .model import ModalityLayout
from .oracle import oracle_fit
from .solver import fit

ORACLE_GAP_LIMIT = 1e-3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok]
    except ValueError as exc:
        raise _UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _build_parser() -> _Parser:
    parser = _Parser(prog="navoffset", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="experiment config JSON")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=Path, help="output directory")

    gen = sub.add_parser("generate", help="generate episodes and a training set")
    common(gen)
    gen.add_argument("--preset", help="terrain preset name")
    gen.add_argument("--c", type=int, help="history window length")
    gen.add_argument("--episodes", type=int, help="number of training episodes")
    gen.add_argument("--steps", type=int, help="steps per episode")

    tr = sub.add_parser("train", help="fit weights on a generated dataset")
    common(tr)
    tr.add_argument("--dataset", type=Path, required=True, help="dataset directory")
    tr.add_argument("--lambda1", type=_float_list, help="comma-separated sweep values")
    tr.add_argument("--lambda2", type=_float_list, help="comma-separated sweep values")
    tr.add_argument(
        "--verify-oracle",
        action="store_true",
        help="cross-check the fit against the independent convex solver",
    )

    ev = sub.add_parser("eval", help="closed-loop evaluation of a trained model")
    common(ev)
    ev.add_argument("--model", type=Path, required=True, help="model JSON file")
    ev.add_argument("--preset", help="terrain preset name")
    ev.add_argument("--profile", type=Path, help="terrain profile JSON file")
    ev.add_argument("--modes", help="comma-separated: feedforward,with_offset")
    ev.add_argument("--runs", type=int, help="seeded runs per mode")
    return parser


def _config_from_args(args) -> dict:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "preset", None):
        overrides["terrain"] = {"preset": args.preset}
    if getattr(args, "profile", None):
        overrides["terrain"] = {"profile": str(args.profile)}
    if getattr(args, "c", None) is not None:
        overrides.setdefault("layout", {})["c"] = args.c
    if getattr(args, "episodes", None) is not None:
        overrides.setdefault("episodes", {})["count"] = args.episodes
    if getattr(args, "steps", None) is not None:
        overrides.setdefault("episodes", {})["n_steps"] = args.steps
    if getattr(args, "runs", None) is not None:
        overrides.setdefault("eval", {})["runs"] = args.runs
    if getattr(args, "modes", None):
        overrides.setdefault("eval", {})["modes"] = [
            m for m in args.modes.split(",") if m
        ]
    if getattr(args, "lambda1", None):
        overrides["lambda1"] = args.lambda1[0]
    if getattr(args, "lambda2", None):
        overrides["lambda2"] = args.lambda2[0]
    return storage.load_config(args.config, overrides)


def _out_dir(args, cfg) -> Path:
    return args.out if args.out is not None else Path(cfg["out_dir"])


def cmd_generate(args) -> int:
    cfg = _config_from_args(args)
    lay_cfg = cfg["layout"]
    layout = ModalityLayout(widths=tuple(lay_cfg["widths"]), c=lay_cfg["c"], r=lay_cfg["r"])
    ep_cfg = cfg["episodes"]
    if ep_cfg["n_steps"] < layout.c:
        raise _UsageError(
            f"episodes.n_steps={ep_cfg['n_steps']} is shorter than the window "
            f"c={layout.c}; every episode needs at least c steps"
        )
    profile = storage.config_profile(cfg)
    setbacks = storage.config_setbacks(cfg)
    expert = storage.config_expert(cfg)
    seed = cfg["seed"]
    episode_seeds = [seed + i for i in range(ep_cfg["count"])]
    episodes = [
        simulator.generate_episode(
            profile, ep_cfg["n_steps"], ep_cfg["dt"], ep_seed, setbacks, expert
        )
        for ep_seed in episode_seeds
    ]
    data = simulator.episodes_to_training_set(episodes, layout, ep_cfg["stride"])
    out = _out_dir(args, cfg) / "dataset"
    storage.save_dataset(
        out,
        episodes,
        data,
        profile,
        {
            "seed": seed,
            "episode_seeds": episode_seeds,
            "n_steps": ep_cfg["n_steps"],
            "dt": ep_cfg["dt"],
            "stride": ep_cfg["stride"],
            "preset": cfg["terrain"].get("preset"),
            "setbacks": dataclasses.asdict(setbacks),
            "expert": dataclasses.asdict(expert),
        },
    )
    print(f"wrote dataset with {data.n} windows to {out}")
    return 0


def _model_paths(out: Path, lam1s, lam2s) -> dict[tuple[float, float], tuple[Path, Path]]:
    if len(lam1s) == 1 and len(lam2s) == 1:
        return {(lam1s[0], lam2s[0]): (out / "model.json", out / "trace.csv")}
    paths = {}
    for lam1 in lam1s:
        for lam2 in lam2s:
            stem = f"lam1_{lam1:g}_lam2_{lam2:g}"
            paths[(lam1, lam2)] = (out / f"model_{stem}.json", out / f"trace_{stem}.csv")
    return paths


def cmd_train(args) -> int:
    cfg = storage.load_config(args.config, {"seed": args.seed} if args.seed is not None else {})
    data, manifest = storage.load_dataset(args.dataset)
    lam1s = args.lambda1 or [cfg["lambda1"]]
    lam2s = args.lambda2 or [cfg["lambda2"]]
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)

    status = 0
    for (lam1, lam2), (model_path, trace_path) in _model_paths(out, lam1s, lam2s).items():
        opts = dataclasses.replace(storage.config_fit_options(cfg), lam1=lam1, lam2=lam2)
        result = fit(data, opts)
        storage.save_model(
            model_path,
            result,
            opts,
            extra={"dataset": str(args.dataset), "n_windows": data.n},
        )
        storage.save_trace(trace_path, result.trace)
        print(
            f"lambda1={lam1:g} lambda2={lam2:g}: converged={result.converged} "
            f"iterations={result.iterations} total={result.trace[-1].total:.6g} "
            f"-> {model_path}"
        )
        if args.verify_oracle:
            _, _, oracle_total = oracle_fit(data, lam1, lam2)
            gap = abs(result.trace[-1].total - oracle_total) / max(oracle_total, 1e-12)
            print(f"  oracle total={oracle_total:.6g} relative gap={gap:.3g}")
            if gap > ORACLE_GAP_LIMIT:
                print(
                    f"  verification FAILED: gap {gap:.3g} > {ORACLE_GAP_LIMIT:g}",
                    file=sys.stderr,
                )
                status = 3
    return status


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    w, u, model_doc = storage.load_model(args.model)
    profile = storage.config_profile(cfg)
    ev = cfg["eval"]
    per_mode = simulator.evaluate_model(
        profile,
        w,
        u,
        ev["modes"],
        ev["runs"],
        seed0=ev["seed0"],
        n_steps=ev["n_steps"],
        dt=cfg["episodes"]["dt"],
        setbacks=storage.config_setbacks(cfg),
        expert=storage.config_expert(cfg),
        corridor_half_width=ev["corridor_half_width"],
    )
    summaries = {mode: metrics.aggregate(runs) for mode, runs in per_mode.items()}
    out = _out_dir(args, cfg)
    storage.save_summary(
        out,
        per_mode,
        summaries,
        {
            "model": str(args.model),
            "profile": storage.profile_to_json(profile),
            "n_runs": ev["runs"],
            "seed0": ev["seed0"],
            "n_steps": ev["n_steps"],
            "dt": cfg["episodes"]["dt"],
        },
    )
    print(storage.summary_table(summaries), end="")
    return 0


_COMMANDS = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except (InvalidProfile, DimensionMismatch) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1
    except (SingularSystem, NonFiniteObjective) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except NotConverged as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
