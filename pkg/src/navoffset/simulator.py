"""Deterministic synthetic ground-vehicle world for training and evaluation.

A track runs along the +x axis through an ordered list of terrain segments.
Each segment carries setback parameters (wheel slip, drag, roughness) and a
per-modality feature signature; observed features are parametric functions of
arc position plus seeded noise, with one goal-bearing channel (the last
feature dimension) that lets a linear model close the steering loop.

Behavior vectors are r=2 (linear speed m/s, yaw rate rad/s) driving unicycle
kinematics at 30 Hz.  A scripted expert supplies expected behaviors: a target
speed derated by roughness, and proportional heading control toward the goal.
Actual behaviors blend commanded behavior through an attenuation-plus-inertia
setback model with additive noise.

All randomness flows from one seeded generator per episode, so every run is
bit-reproducible; the per-step loop itself lives in ``_kernels``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import _kernels, metrics
from ._kernels import (
    KIND_BEARING,
    KIND_SINE,
    KIND_SQUARE,
    MODE_EXPERT,
    MODE_FEEDFORWARD,
    MODE_WITH_OFFSET,
    N_RUN_PARAMS,
)
from .errors import DimensionMismatch, InvalidProfile, SingularTemporalBlock
from .metrics import RunMetrics
from .model import ModalityLayout, TrainingSet, WeightU, WeightW, build_differences, build_instance
from .predictor import invert_temporal_blocks

DT_DEFAULT = 1.0 / 30.0
BEHAVIOR_DIM = 2

# Per-modality-role constants for the feature synthesizer: role cycles
# sine ("texture"), square ("shape"), sine ("geometry") over modality index.
_LEVEL_BASE = (0.9, 0.4, 0.2)
_LEVEL_ROUGH = (1.1, -0.5, 1.0)
_LEVEL_GRIP = (-0.6, 1.3, 0.8)
_DIM_SCALES = (1.0, 0.65, 0.4)
_GOLDEN_ANGLE = 2.39996322972865332


@dataclass(frozen=True)
class TerrainSegment:
    """One stretch of terrain: length in meters plus its setback levels."""

    length: float
    slip: float = 0.0
    drag: float = 0.0
    roughness: float = 0.0


@dataclass(frozen=True)
class TerrainProfile:
    """An ordered track of segments plus the feature-generator structure."""

    name: str
    segments: tuple[TerrainSegment, ...]
    widths: tuple[int, ...] = (2, 2, 2)
    feature_noise: float = 0.05
    bearing_noise: float = 0.01
    noise_modality: int | None = None  # 0-based; that modality becomes pure noise

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if not self.segments:
            raise InvalidProfile("profile needs at least one segment")
        for seg in self.segments:
            if seg.length <= 0:
                raise InvalidProfile(f"segment length must be > 0, got {seg.length}")
            if not 0 <= seg.slip < 1 or not 0 <= seg.drag < 1:
                raise InvalidProfile(f"slip and drag must be in [0, 1): {seg}")
            if seg.roughness < 0:
                raise InvalidProfile(f"roughness must be >= 0: {seg}")
        if any(w < 1 for w in self.widths):
            raise InvalidProfile(f"modality widths must be >= 1, got {self.widths}")
        if self.noise_modality is not None:
            if not 0 <= self.noise_modality < len(self.widths):
                raise InvalidProfile(f"noise modality {self.noise_modality} out of range")
            if self.noise_modality == len(self.widths) - 1:
                raise InvalidProfile("the last modality carries the bearing channel")
        if self.feature_noise < 0 or self.bearing_noise < 0:
            raise InvalidProfile("feature noise levels must be >= 0")

    @property
    def m(self) -> int:
        return len(self.widths)

    @property
    def q(self) -> int:
        return sum(self.widths)

    @property
    def total_length(self) -> float:
        return float(sum(seg.length for seg in self.segments))

    def layout(self, c: int) -> ModalityLayout:
        return ModalityLayout(widths=self.widths, c=c, r=BEHAVIOR_DIM)


@dataclass(frozen=True)
class SetbackModel:
    """Robot-level setbacks applied on top of the terrain's own values.

    slip/drag/roughness are added to every segment's values (payload, tire
    pressure); noise_std perturbs each behavior channel, scaled by (1 +
    roughness); inertia blends the previous actual behavior into the next.
    """

    slip: float = 0.0
    drag: float = 0.0
    roughness: float = 0.0
    noise_std: tuple[float, float] = (0.02, 0.01)
    inertia: float = 0.45

    def __post_init__(self):
        object.__setattr__(self, "noise_std", tuple(float(s) for s in self.noise_std))
        if not 0 <= self.inertia < 1:
            raise InvalidProfile(f"inertia must be in [0, 1), got {self.inertia}")
        if any(s < 0 for s in self.noise_std) or len(self.noise_std) != BEHAVIOR_DIM:
            raise InvalidProfile(f"noise_std must be {BEHAVIOR_DIM} nonnegative values")
        if self.slip < 0 or self.drag < 0 or self.roughness < 0:
            raise InvalidProfile("slip, drag and roughness additions must be >= 0")

    @classmethod
    def none(cls) -> "SetbackModel":
        return cls(slip=0.0, drag=0.0, roughness=0.0, noise_std=(0.0, 0.0), inertia=0.0)


@dataclass(frozen=True)
class ExpertPolicy:
    """Scripted stand-in for the human operator plus actuator limits."""

    v_max: float = 1.0
    v_min: float = 0.15
    slow_gain: float = 0.5  # target speed derating per unit roughness
    k_heading: float = 2.5
    omega_max: float = 1.2
    v_cap: float = 2.0  # command clipping bound for any controller
    stop_at_goal: bool = True


@dataclass(frozen=True)
class Episode:
    """One simulated run; arrays have one row per step.

    features (n, q), expected/commands/actual (n, 2) as (speed, yaw rate),
    poses (n, 3) as (x, y, heading) recorded after each step.
    """

    profile_name: str
    mode: str
    dt: float
    seed: int
    features: np.ndarray
    expected: np.ndarray
    commands: np.ndarray
    actual: np.ndarray
    poses: np.ndarray
    goal_x: float
    finish_step: int | None

    @property
    def n_steps(self) -> int:
        return self.features.shape[0]


_MODE_IDS = {
    "expert": MODE_EXPERT,
    "feedforward": MODE_FEEDFORWARD,
    "with_offset": MODE_WITH_OFFSET,
}


def _feature_constants(profile: TerrainProfile):
    """Per-dimension synthesizer constants derived from the profile layout."""
    q = profile.q
    f_mod = np.empty(q, dtype=np.int32)
    f_kind = np.empty(q, dtype=np.int32)
    f_scale = np.zeros(q)
    f_amp = np.zeros(q)
    f_freq = np.zeros(q)
    f_phase = np.zeros(q)
    f_noise = np.zeros(q)
    idx = 0
    for j, width in enumerate(profile.widths):
        role = j % 3
        noisy = profile.noise_modality == j
        for l in range(width):
            f_mod[idx] = j
            last_dim = j == profile.m - 1 and l == width - 1
            if last_dim:
                f_kind[idx] = KIND_BEARING
                f_noise[idx] = profile.bearing_noise
            else:
                f_kind[idx] = KIND_SQUARE if role == 1 else KIND_SINE
                f_scale[idx] = 0.0 if noisy else _DIM_SCALES[l % 3]
                f_amp[idx] = 0.0 if noisy else 0.25 * _DIM_SCALES[l % 3]
                f_freq[idx] = 0.22 + 0.13 * idx
                f_phase[idx] = _GOLDEN_ANGLE * idx
                f_noise[idx] = profile.feature_noise * (6.0 if noisy else 1.0)
            idx += 1
    return f_mod, f_kind, f_scale, f_amp, f_freq, f_phase, f_noise


def _terrain_arrays(profile: TerrainProfile, setbacks: SetbackModel):
    segs = profile.segments
    seg_end = np.cumsum([seg.length for seg in segs]).astype(float)
    seg_slip = np.array([seg.slip for seg in segs])
    seg_drag = np.array([seg.drag for seg in segs])
    seg_rough = np.array([seg.roughness for seg in segs])
    seg_level = np.empty((len(segs), profile.m))
    for g, seg in enumerate(segs):
        grip = min(seg.slip + setbacks.slip + seg.drag + setbacks.drag, 0.95)
        rough = seg.roughness + setbacks.roughness
        for j in range(profile.m):
            role = j % 3
            seg_level[g, j] = (
                _LEVEL_BASE[role] + _LEVEL_ROUGH[role] * rough + _LEVEL_GRIP[role] * grip
            )
        if profile.noise_modality is not None:
            seg_level[g, profile.noise_modality] = 0.0
    return seg_end, seg_slip, seg_drag, seg_rough, seg_level


def _run_params(profile: TerrainProfile, expert: ExpertPolicy, setbacks: SetbackModel):
    params = np.zeros(N_RUN_PARAMS)
    params[_kernels.P_V_MAX] = expert.v_max
    params[_kernels.P_V_MIN] = expert.v_min
    params[_kernels.P_SLOW_GAIN] = expert.slow_gain
    params[_kernels.P_K_HEADING] = expert.k_heading
    params[_kernels.P_OMEGA_MAX] = expert.omega_max
    params[_kernels.P_V_CAP] = expert.v_cap
    params[_kernels.P_GOAL_X] = profile.total_length
    params[_kernels.P_STOP_AT_GOAL] = 1.0 if expert.stop_at_goal else 0.0
    params[_kernels.P_EXTRA_SLIP] = setbacks.slip
    params[_kernels.P_EXTRA_DRAG] = setbacks.drag
    params[_kernels.P_EXTRA_ROUGH] = setbacks.roughness
    params[_kernels.P_INERTIA] = setbacks.inertia
    return params


def _rollout(
    profile: TerrainProfile,
    mode: str,
    n_steps: int,
    dt: float,
    seed: int,
    setbacks: SetbackModel,
    expert: ExpertPolicy,
    w: WeightW | None = None,
    u: WeightU | None = None,
    pseudo_inverse: bool = False,
) -> Episode:
    if n_steps < 1:
        raise InvalidProfile(f"n_steps must be >= 1, got {n_steps}")
    if dt <= 0:
        raise InvalidProfile(f"dt must be > 0, got {dt}")
    mode_id = _MODE_IDS[mode]
    q = profile.q

    if mode_id == MODE_EXPERT:
        c = 1
        w_arr = np.zeros((q, BEHAVIOR_DIM))
        u_arr = np.zeros((BEHAVIOR_DIM, BEHAVIOR_DIM))
        u_inv = np.zeros((1, BEHAVIOR_DIM, BEHAVIOR_DIM))
    else:
        if w is None or u is None:
            raise DimensionMismatch("feedforward/with_offset modes need trained weights")
        if w.layout != u.layout:
            raise DimensionMismatch("W and U use different layouts")
        if w.layout.widths != profile.widths or w.layout.r != BEHAVIOR_DIM:
            raise DimensionMismatch(
                f"model layout {w.layout.widths} does not match profile {profile.widths}"
            )
        c = w.layout.c
        w_arr = np.ascontiguousarray(w.values)
        u_arr = np.ascontiguousarray(u.values)
        if mode_id == MODE_WITH_OFFSET:
            u_inv = np.ascontiguousarray(invert_temporal_blocks(u, pseudo_inverse))
        else:
            u_inv = np.zeros((c, BEHAVIOR_DIM, BEHAVIOR_DIM))

    rng = np.random.default_rng(seed)
    feat_noise = rng.standard_normal((n_steps, q))
    beh_noise = rng.standard_normal((n_steps, BEHAVIOR_DIM))

    seg_end, seg_slip, seg_drag, seg_rough, seg_level = _terrain_arrays(profile, setbacks)
    consts = _feature_constants(profile)
    params = _run_params(profile, expert, setbacks)
    noise_std = np.asarray(setbacks.noise_std, dtype=float)

    out_feat = np.empty((n_steps, q))
    out_expected = np.empty((n_steps, BEHAVIOR_DIM))
    out_cmd = np.empty((n_steps, BEHAVIOR_DIM))
    out_actual = np.empty((n_steps, BEHAVIOR_DIM))
    out_pose = np.empty((n_steps, 3))

    _kernels.rollout(
        seg_end,
        seg_slip,
        seg_drag,
        seg_rough,
        seg_level,
        *consts,
        params,
        noise_std,
        mode_id,
        c,
        w_arr,
        u_arr,
        u_inv,
        dt,
        0.0,
        0.0,
        0.0,
        feat_noise,
        beh_noise,
        out_feat,
        out_expected,
        out_cmd,
        out_actual,
        out_pose,
    )

    reached = out_pose[:, 0] >= profile.total_length
    finish_step = int(np.argmax(reached)) if bool(reached.any()) else None
    return Episode(
        profile_name=profile.name,
        mode=mode,
        dt=dt,
        seed=seed,
        features=out_feat,
        expected=out_expected,
        commands=out_cmd,
        actual=out_actual,
        poses=out_pose,
        goal_x=profile.total_length,
        finish_step=finish_step,
    )


def generate_episode(
    profile: TerrainProfile,
    n_steps: int,
    dt: float = DT_DEFAULT,
    seed: int = 0,
    setbacks: SetbackModel | None = None,
    expert: ExpertPolicy | None = None,
) -> Episode:
    """Expert-driven episode for training data collection.

    The expert's targets are both commanded and recorded as the expected
    behaviors; the setback model produces the actual behaviors.
    """
    return _rollout(
        profile,
        "expert",
        n_steps,
        dt,
        seed,
        setbacks if setbacks is not None else SetbackModel(),
        expert if expert is not None else ExpertPolicy(),
    )


def closed_loop_run(
    profile: TerrainProfile,
    w: WeightW,
    u: WeightU,
    mode: str,
    n_steps: int,
    dt: float = DT_DEFAULT,
    seed: int = 0,
    setbacks: SetbackModel | None = None,
    expert: ExpertPolicy | None = None,
    pseudo_inverse: bool = False,
) -> Episode:
    """Run trained weights in closed loop.

    mode "feedforward" commands the plain feature prediction W'x; mode
    "with_offset" commands the full offset-compensated behavior.  Both warm
    up under expert control for the first c steps while the history window
    fills.  Raises SingularTemporalBlock when the offset predictor cannot
    invert a temporal block (callers record such runs as failures).
    """
    if mode not in ("feedforward", "with_offset"):
        raise ValueError(f"unknown closed-loop mode {mode!r}")
    return _rollout(
        profile,
        mode,
        n_steps,
        dt,
        seed,
        setbacks if setbacks is not None else SetbackModel(),
        expert if expert is not None else ExpertPolicy(),
        w=w,
        u=u,
        pseudo_inverse=pseudo_inverse,
    )


def reference_trajectory(
    profile: TerrainProfile,
    n_steps: int,
    dt: float = DT_DEFAULT,
    expert: ExpertPolicy | None = None,
) -> np.ndarray:
    """Expected pose stream: the expert on an ideal plant (no setbacks)."""
    episode = _rollout(profile, "expert", n_steps, dt, 0, SetbackModel.none(),
                       expert if expert is not None else ExpertPolicy())
    return episode.poses


def episodes_to_training_set(episodes, layout: ModalityLayout, stride: int = 1) -> TrainingSet:
    """Slice episodes into stacked windows, one training column per position.

    A window position is any step t >= c-1; ``stride`` subsamples positions
    (stride=1 keeps every window).  X columns stack the window's frames most
    recent first; E columns stack the window's behavior differences.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    episodes = list(episodes)
    if not episodes:
        raise DimensionMismatch("need at least one episode")
    cols_x, cols_y, cols_yhat, cols_e = [], [], [], []
    c = layout.c
    for ep in episodes:
        if ep.features.shape[1] != layout.q:
            raise DimensionMismatch(
                f"episode has {ep.features.shape[1]} feature dims, layout wants {layout.q}"
            )
        if ep.n_steps < c:
            raise DimensionMismatch(f"episode of {ep.n_steps} steps is shorter than c={c}")
        for t in range(c - 1, ep.n_steps, stride):
            frames = [ep.features[t - k] for k in range(c)]
            expected = [ep.expected[t - k] for k in range(c)]
            actual = [ep.actual[t - k] for k in range(c)]
            cols_x.append(build_instance(frames, layout))
            cols_y.append(ep.expected[t])
            cols_yhat.append(ep.actual[t])
            cols_e.append(build_differences(expected, actual, layout))
    return TrainingSet(
        layout=layout,
        X=np.column_stack(cols_x),
        Y=np.column_stack(cols_y),
        Yhat=np.column_stack(cols_yhat),
        E=np.column_stack(cols_e),
    )


def run_metrics(
    episode: Episode,
    reference_poses: np.ndarray,
    corridor_half_width: float = 1.0,
    stopped_speed: float = 0.01,
    stopped_duration: float = 2.0,
) -> RunMetrics:
    """Score one run against the reference trajectory.

    A run fails if it leaves the corridor around the reference path or its
    speed stays below ``stopped_speed`` for ``stopped_duration`` seconds
    before finishing.  Metrics cover the task span: up to the finish step,
    or the whole horizon when the goal was never reached (the reference
    stream stays parked at the goal, so lag is counted as inconsistency).
    """
    n = episode.n_steps
    end = episode.finish_step + 1 if episode.finish_step is not None else n
    if reference_poses.shape[0] < end:
        raise DimensionMismatch("reference trajectory shorter than the evaluated run")

    reason = None
    lateral = np.abs(episode.poses[:end, 1])
    if bool((lateral > corridor_half_width).any()):
        reason = "left_corridor"
    else:
        k = max(int(round(stopped_duration / episode.dt)), 1)
        slow = np.abs(episode.actual[:end, 0]) < stopped_speed
        if slow.size >= k:
            run_lengths = np.convolve(slow.astype(int), np.ones(k, dtype=int), mode="valid")
            if bool((run_lengths >= k).any()):
                reason = "stopped"
    if reason is not None:
        return RunMetrics(
            failed=True,
            traversal_time=None,
            inconsistency=None,
            jerkiness=None,
            failure_reason=reason,
        )
    return RunMetrics(
        failed=False,
        traversal_time=end * episode.dt,
        inconsistency=metrics.inconsistency(reference_poses[:end], episode.poses[:end]),
        jerkiness=metrics.jerkiness(episode.poses[:end], episode.dt),
        failure_reason=None,
    )


def evaluate_model(
    profile: TerrainProfile,
    w: WeightW,
    u: WeightU,
    modes,
    n_runs: int,
    seed0: int = 0,
    n_steps: int = 900,
    dt: float = DT_DEFAULT,
    setbacks: SetbackModel | None = None,
    expert: ExpertPolicy | None = None,
    corridor_half_width: float = 1.0,
) -> dict[str, list[RunMetrics]]:
    """Closed-loop evaluation: n_runs seeded runs per mode.

    Runs aborted by a singular temporal block are recorded as failures.
    """
    expert = expert if expert is not None else ExpertPolicy()
    reference = reference_trajectory(profile, n_steps, dt, expert)
    results: dict[str, list[RunMetrics]] = {}
    for mode in modes:
        per_mode = []
        for i in range(n_runs):
            try:
                episode = closed_loop_run(
                    profile, w, u, mode, n_steps, dt, seed0 + i, setbacks, expert
                )
            except SingularTemporalBlock:
                per_mode.append(
                    RunMetrics(
                        failed=True,
                        traversal_time=None,
                        inconsistency=None,
                        jerkiness=None,
                        failure_reason="singular_temporal_block",
                    )
                )
                continue
            per_mode.append(run_metrics(episode, reference, corridor_half_width))
        results[mode] = per_mode
    return results


def _single(name: str, length: float = 14.0) -> TerrainProfile:
    kind = _TERRAIN_TYPES[name]
    return TerrainProfile(name=name, segments=(TerrainSegment(length, *kind),))


_TERRAIN_TYPES = {
    # (slip, drag, roughness)
    "grass": (0.05, 0.02, 0.10),
    "sand": (0.12, 0.25, 0.30),
    "gravel": (0.10, 0.10, 0.40),
    "medium_rock": (0.18, 0.10, 0.60),
    "large_rock": (0.30, 0.10, 0.90),
}


def terrain_preset(name: str) -> TerrainProfile:
    """Named terrain profiles used by the experiments and the CLI."""
    if name in _TERRAIN_TYPES:
        return _single(name)
    if name == "grass_to_large_rock":
        return TerrainProfile(
            name=name,
            segments=(
                TerrainSegment(7.0, *_TERRAIN_TYPES["grass"]),
                TerrainSegment(7.0, *_TERRAIN_TYPES["large_rock"]),
            ),
        )
    if name == "mixed_1":
        return TerrainProfile(
            name=name,
            segments=(
                TerrainSegment(5.0, *_TERRAIN_TYPES["grass"]),
                TerrainSegment(5.0, *_TERRAIN_TYPES["gravel"]),
                TerrainSegment(5.0, *_TERRAIN_TYPES["medium_rock"]),
            ),
        )
    if name == "mixed_2":
        return TerrainProfile(
            name=name,
            segments=(
                TerrainSegment(4.0, *_TERRAIN_TYPES["sand"]),
                TerrainSegment(4.0, *_TERRAIN_TYPES["gravel"]),
                TerrainSegment(4.0, *_TERRAIN_TYPES["large_rock"]),
                TerrainSegment(4.0, *_TERRAIN_TYPES["grass"]),
            ),
        )
    raise InvalidProfile(f"unknown terrain preset {name!r}; known: {sorted(PRESET_NAMES)}")


PRESET_NAMES = tuple(sorted([*_TERRAIN_TYPES, "grass_to_large_rock", "mixed_1", "mixed_2"]))


def with_noise_modality(profile: TerrainProfile, modality: int) -> TerrainProfile:
    """Variant of a profile where one modality carries no terrain signal."""
    return dataclasses.replace(profile, noise_modality=modality)
