"""Persistent formats: datasets, models, traces, summaries and configs.

Everything is JSON plus headered CSV so artifacts stay human-inspectable.
CSV floats are written with 17 significant digits and JSON floats with
Python's shortest-roundtrip repr, so both are lossless for 64-bit values and
byte-identical across repeated runs with the same seeds.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import jsonschema
import numpy as np

from .errors import DimensionMismatch, InvalidProfile
from .metrics import AggregateSummary, RunMetrics
from .model import ModalityLayout, TrainingSet, WeightU, WeightW
from .norms import ObjectiveBreakdown
from .simulator import Episode, ExpertPolicy, SetbackModel, TerrainProfile, TerrainSegment
from .solver import FitOptions, FitResult

CSV_FMT = "%.17g"

DATASET_FORMAT = "navoffset-dataset-v1"
MODEL_FORMAT = "navoffset-model-v1"

BEHAVIOR_NAMES = ("speed", "yaw_rate")


def _dump_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _save_csv(path: Path, rows: np.ndarray, header: list[str]) -> None:
    np.savetxt(path, rows, delimiter=",", fmt=CSV_FMT, header=",".join(header), comments="")


def _load_csv(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


# ---------------------------------------------------------------------------
# layout / profile


def layout_to_json(layout: ModalityLayout) -> dict:
    return {"widths": list(layout.widths), "c": layout.c, "r": layout.r}


def layout_from_json(doc: dict) -> ModalityLayout:
    return ModalityLayout(widths=tuple(doc["widths"]), c=int(doc["c"]), r=int(doc["r"]))


def feature_names(layout: ModalityLayout) -> list[str]:
    """Column names for a stacked window, mirroring the row order of X."""
    names = []
    for k in range(layout.c):
        for i, width in enumerate(layout.widths, start=1):
            names.extend(f"mod{i}_f{k}_dim{l}" for l in range(width))
    return names


def difference_names(layout: ModalityLayout) -> list[str]:
    return [f"f{k}_{b}" for k in range(layout.c) for b in BEHAVIOR_NAMES]


def profile_to_json(profile: TerrainProfile) -> dict:
    return {
        "name": profile.name,
        "segments": [dataclasses.asdict(seg) for seg in profile.segments],
        "widths": list(profile.widths),
        "feature_noise": profile.feature_noise,
        "bearing_noise": profile.bearing_noise,
        "noise_modality": profile.noise_modality,
    }


def profile_from_json(doc: dict) -> TerrainProfile:
    try:
        return TerrainProfile(
            name=str(doc["name"]),
            segments=tuple(TerrainSegment(**seg) for seg in doc["segments"]),
            widths=tuple(doc.get("widths", (2, 2, 2))),
            feature_noise=float(doc.get("feature_noise", 0.05)),
            bearing_noise=float(doc.get("bearing_noise", 0.01)),
            noise_modality=doc.get("noise_modality"),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidProfile(f"malformed profile document: {exc}") from exc


def load_profile(path) -> TerrainProfile:
    return profile_from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# dataset


def save_dataset(
    out_dir,
    episodes: list[Episode],
    data: TrainingSet,
    profile: TerrainProfile,
    manifest_extra: dict,
) -> Path:
    """Write a dataset directory: manifest, matrices, and per-episode logs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "episodes").mkdir(exist_ok=True)

    manifest = {
        "format": DATASET_FORMAT,
        "layout": layout_to_json(data.layout),
        "profile": profile_to_json(profile),
        "n_windows": data.n,
        "n_episodes": len(episodes),
        **manifest_extra,
    }
    _dump_json(out / "manifest.json", manifest)

    _save_csv(out / "X.csv", data.X.T, feature_names(data.layout))
    _save_csv(out / "Y.csv", data.Y.T, list(BEHAVIOR_NAMES))
    _save_csv(out / "Yhat.csv", data.Yhat.T, list(BEHAVIOR_NAMES))
    _save_csv(out / "E.csv", data.E.T, difference_names(data.layout))

    q = profile.q
    ep_header = (
        [f"feat_{l}" for l in range(q)]
        + [f"expected_{b}" for b in BEHAVIOR_NAMES]
        + [f"command_{b}" for b in BEHAVIOR_NAMES]
        + [f"actual_{b}" for b in BEHAVIOR_NAMES]
        + ["pose_x", "pose_y", "pose_heading"]
    )
    for i, ep in enumerate(episodes):
        rows = np.hstack([ep.features, ep.expected, ep.commands, ep.actual, ep.poses])
        _save_csv(out / "episodes" / f"ep_{i:03d}.csv", rows, ep_header)
    return out


def load_dataset(path) -> tuple[TrainingSet, dict]:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    if manifest.get("format") != DATASET_FORMAT:
        raise DimensionMismatch(f"{root} is not a {DATASET_FORMAT} directory")
    layout = layout_from_json(manifest["layout"])
    data = TrainingSet(
        layout=layout,
        X=_load_csv(root / "X.csv").T,
        Y=_load_csv(root / "Y.csv").T,
        Yhat=_load_csv(root / "Yhat.csv").T,
        E=_load_csv(root / "E.csv").T,
    )
    return data, manifest


# ---------------------------------------------------------------------------
# model + trace


def _objective_to_json(ob: ObjectiveBreakdown) -> dict:
    return {
        "loss": ob.loss,
        "modality_penalty": ob.modality_penalty,
        "temporal_penalty": ob.temporal_penalty,
        "total": ob.total,
    }


def save_model(path, result: FitResult, opts: FitOptions, extra: dict | None = None) -> None:
    layout = result.W.layout
    doc = {
        "format": MODEL_FORMAT,
        "layout": layout_to_json(layout),
        "options": {
            "lambda1": opts.lam1,
            "lambda2": opts.lam2,
            "eps": opts.eps,
            "ridge": opts.ridge,
            "tol": opts.tol,
            "max_iters": opts.max_iters,
            "seed": opts.seed,
        },
        "w": result.W.values.tolist(),
        "u": result.U.values.tolist(),
        "converged": result.converged,
        "iterations": result.iterations,
        "final_objective": _objective_to_json(result.trace[-1]),
        **(extra or {}),
    }
    _dump_json(Path(path), doc)


def load_model(path) -> tuple[WeightW, WeightU, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise DimensionMismatch(f"{path} is not a {MODEL_FORMAT} file")
    layout = layout_from_json(doc["layout"])
    w = WeightW(np.asarray(doc["w"], dtype=float), layout)
    u = WeightU(np.asarray(doc["u"], dtype=float), layout)
    return w, u, doc


def save_trace(path, trace: list[ObjectiveBreakdown]) -> None:
    rows = np.array(
        [
            [i, ob.loss, ob.modality_penalty, ob.temporal_penalty, ob.total]
            for i, ob in enumerate(trace)
        ]
    )
    _save_csv(Path(path), rows, ["iter", "loss", "modality_penalty", "temporal_penalty", "total"])


# ---------------------------------------------------------------------------
# evaluation summaries


def _metrics_to_json(m: RunMetrics) -> dict:
    return {
        "failed": m.failed,
        "traversal_time": m.traversal_time,
        "inconsistency": m.inconsistency,
        "jerkiness": m.jerkiness,
        "failure_reason": m.failure_reason,
    }


def _aggregate_to_json(a: AggregateSummary) -> dict:
    return {
        "n_runs": a.n_runs,
        "n_failed": a.n_failed,
        "failure_rate": a.failure_rate,
        "traversal_time": a.traversal_time,
        "inconsistency": a.inconsistency,
        "jerkiness": a.jerkiness,
    }


def summary_table(summaries: dict[str, AggregateSummary]) -> str:
    """Aligned text table, one row per mode."""
    headers = ["mode", "failure_rate", "traversal_time_s", "inconsistency", "jerkiness_m_s3"]
    rows = []
    for mode, agg in summaries.items():
        def cell(v):
            return "-" if v is None else f"{v:.4g}"

        rows.append(
            [mode, f"{agg.failure_rate:.2f}", cell(agg.traversal_time),
             cell(agg.inconsistency), cell(agg.jerkiness)]
        )
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    for r in rows:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(headers))))
    return "\n".join(lines) + "\n"


def save_summary(
    out_dir,
    per_mode_runs: dict[str, list[RunMetrics]],
    summaries: dict[str, AggregateSummary],
    extra: dict,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "modes": {
            mode: {
                "aggregate": _aggregate_to_json(summaries[mode]),
                "runs": [_metrics_to_json(m) for m in per_mode_runs[mode]],
            }
            for mode in per_mode_runs
        },
        **extra,
    }
    _dump_json(out / "summary.json", doc)
    (out / "table.txt").write_text(summary_table(summaries))


# ---------------------------------------------------------------------------
# experiment configuration

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "navoffset experiment configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "layout": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "widths": {"type": "array", "items": {"type": "integer", "minimum": 1},
                           "minItems": 1},
                "c": {"type": "integer", "minimum": 1},
                "r": {"type": "integer", "const": 2},
            },
        },
        "lambda1": {"type": "number", "minimum": 0},
        "lambda2": {"type": "number", "minimum": 0},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "ridge": {"type": "number", "minimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
                "seed": {"type": ["integer", "null"]},
            },
        },
        "terrain": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"type": "string"},
                "profile": {"type": "string"},
                "noise_modality": {"type": ["integer", "null"]},
            },
        },
        "setbacks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "slip": {"type": "number", "minimum": 0},
                "drag": {"type": "number", "minimum": 0},
                "roughness": {"type": "number", "minimum": 0},
                "noise_std": {"type": "array", "items": {"type": "number", "minimum": 0},
                              "minItems": 2, "maxItems": 2},
                "inertia": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            },
        },
        "expert": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "v_max": {"type": "number", "exclusiveMinimum": 0},
                "v_min": {"type": "number", "minimum": 0},
                "slow_gain": {"type": "number", "minimum": 0},
                "k_heading": {"type": "number", "minimum": 0},
                "omega_max": {"type": "number", "exclusiveMinimum": 0},
                "v_cap": {"type": "number", "exclusiveMinimum": 0},
                "stop_at_goal": {"type": "boolean"},
            },
        },
        "episodes": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "n_steps": {"type": "integer", "minimum": 1},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "stride": {"type": "integer", "minimum": 1},
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "runs": {"type": "integer", "minimum": 1},
                "n_steps": {"type": "integer", "minimum": 4},
                "modes": {"type": "array",
                          "items": {"enum": ["feedforward", "with_offset"]}},
                "seed0": {"type": "integer"},
                "corridor_half_width": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "seed": {"type": "integer"},
        "out_dir": {"type": "string"},
    },
}

DEFAULT_CONFIG = {
    "layout": {"widths": [2, 2, 2], "c": 15, "r": 2},
    "lambda1": 0.1,
    "lambda2": 10.0,
    "solver": {"eps": 1e-8, "ridge": 1e-10, "tol": 1e-8, "max_iters": 200, "seed": None},
    "terrain": {"preset": "grass_to_large_rock"},
    "setbacks": {"slip": 0.0, "drag": 0.0, "roughness": 0.0,
                 "noise_std": [0.02, 0.01], "inertia": 0.45},
    "expert": {"v_max": 1.0, "v_min": 0.15, "slow_gain": 0.5, "k_heading": 2.5,
               "omega_max": 1.2, "v_cap": 2.0, "stop_at_goal": True},
    "episodes": {"count": 2, "n_steps": 620, "dt": 1.0 / 30.0, "stride": 6},
    "eval": {"runs": 10, "n_steps": 900, "modes": ["feedforward", "with_offset"],
             "seed0": 0, "corridor_half_width": 1.0},
    "seed": 0,
    "out_dir": "navoffset_out",
}


def reference_config() -> dict:
    """The small desk-scale experiment: c=5 over the two-terrain track,
    exactly 100 training windows."""
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    cfg["layout"]["c"] = 5
    cfg["episodes"] = {"count": 2, "n_steps": 604, "dt": 1.0 / 30.0, "stride": 12}
    return cfg


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, overlaid with a config file, overlaid with flag overrides."""
    cfg = DEFAULT_CONFIG
    if path is not None:
        cfg = _deep_merge(cfg, json.loads(Path(path).read_text()))
    if overrides:
        cfg = _deep_merge(cfg, overrides)
    jsonschema.validate(cfg, CONFIG_SCHEMA)
    return cfg


def config_profile(cfg: dict) -> TerrainProfile:
    terrain = cfg.get("terrain", {})
    if "profile" in terrain and "preset" in terrain:
        raise InvalidProfile("config must set either terrain.preset or terrain.profile")
    if "profile" in terrain:
        profile = load_profile(terrain["profile"])
    else:
        from .simulator import terrain_preset

        profile = terrain_preset(terrain.get("preset", "grass_to_large_rock"))
    noise_mod = terrain.get("noise_modality")
    if noise_mod is not None:
        profile = dataclasses.replace(profile, noise_modality=noise_mod)
    if tuple(cfg["layout"]["widths"]) != profile.widths:
        profile = dataclasses.replace(profile, widths=tuple(cfg["layout"]["widths"]))
    return profile


def config_setbacks(cfg: dict) -> SetbackModel:
    sb = cfg["setbacks"]
    return SetbackModel(
        slip=sb["slip"],
        drag=sb["drag"],
        roughness=sb["roughness"],
        noise_std=tuple(sb["noise_std"]),
        inertia=sb["inertia"],
    )


def config_expert(cfg: dict) -> ExpertPolicy:
    return ExpertPolicy(**cfg["expert"])


def config_fit_options(cfg: dict) -> FitOptions:
    sol = cfg["solver"]
    return FitOptions(
        lam1=cfg["lambda1"],
        lam2=cfg["lambda2"],
        eps=sol["eps"],
        ridge=sol["ridge"],
        tol=sol["tol"],
        max_iters=sol["max_iters"],
        seed=sol["seed"],
    )
