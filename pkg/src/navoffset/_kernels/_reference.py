"""Pure-Python rollout loop; the authoritative definition of the kernel.

The compiled Cython kernel in ``_core.pyx`` replicates this loop operation
for operation.  The two implementations agree to floating-point roundoff
(matrix-vector products use different summation orders), which the test
suite checks on short horizons.

Behavior vectors are (linear speed, yaw rate); poses are (x, y, heading).
All randomness enters through the pregenerated ``feat_noise``/``beh_noise``
arrays, so the loop itself is deterministic.
"""

import math

import numpy as np

# Command-source modes.
MODE_EXPERT = 0
MODE_FEEDFORWARD = 1
MODE_WITH_OFFSET = 2

# Feature channel kinds.
KIND_SINE = 0
KIND_SQUARE = 1
KIND_BEARING = 2

# Indices into the run_params vector.
P_V_MAX = 0
P_V_MIN = 1
P_SLOW_GAIN = 2
P_K_HEADING = 3
P_OMEGA_MAX = 4
P_V_CAP = 5
P_GOAL_X = 6
P_STOP_AT_GOAL = 7
P_EXTRA_SLIP = 8
P_EXTRA_DRAG = 9
P_EXTRA_ROUGH = 10
P_INERTIA = 11
N_RUN_PARAMS = 12

# Bearing aims at a point this far past the finish line so the heading
# reference stays stable while crossing it.
AIM_MARGIN = 5.0

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap a single angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a > math.pi:
        a -= TWO_PI
    elif a <= -math.pi:
        a += TWO_PI
    return a


def rollout(
    seg_end,
    seg_slip,
    seg_drag,
    seg_rough,
    seg_level,
    f_mod,
    f_kind,
    f_scale,
    f_amp,
    f_freq,
    f_phase,
    f_noise,
    run_params,
    noise_std,
    mode,
    c,
    W,
    U,
    u_inv_t,
    dt,
    x0,
    y0,
    th0,
    feat_noise,
    beh_noise,
    out_feat,
    out_expected,
    out_cmd,
    out_actual,
    out_pose,
):
    n_steps, q = out_feat.shape
    r = out_expected.shape[1]
    d = c * q

    v_max = run_params[P_V_MAX]
    v_min = run_params[P_V_MIN]
    slow_gain = run_params[P_SLOW_GAIN]
    k_heading = run_params[P_K_HEADING]
    omega_max = run_params[P_OMEGA_MAX]
    v_cap = run_params[P_V_CAP]
    goal_x = run_params[P_GOAL_X]
    stop_at_goal = run_params[P_STOP_AT_GOAL] != 0.0
    extra_slip = run_params[P_EXTRA_SLIP]
    extra_drag = run_params[P_EXTRA_DRAG]
    extra_rough = run_params[P_EXTRA_ROUGH]
    inertia = run_params[P_INERTIA]
    aim_x = goal_x + AIM_MARGIN
    track_end = seg_end[-1]

    window = np.zeros(d)
    hist_x = np.zeros((c, q))
    hist_y = np.zeros((c, r))
    hist_yhat = np.zeros((c, r))
    frame = np.zeros(q)
    yhat = np.zeros(r)
    cmd = np.zeros(r)
    x, y, th = x0, y0, th0

    for t in range(n_steps):
        # --- terrain at the current position
        s = min(max(x, 0.0), track_end)
        g = 0
        while g < seg_end.shape[0] - 1 and s > seg_end[g]:
            g += 1
        rough = seg_rough[g] + extra_rough
        att = 1.0 - min(seg_slip[g] + extra_slip + seg_drag[g] + extra_drag, 0.95)
        bearing = wrap_angle(math.atan2(0.0 - y, aim_x - x) - th)

        # --- observed feature frame
        for l in range(q):
            kind = f_kind[l]
            if kind == KIND_BEARING:
                val = bearing
            else:
                base = seg_level[g, f_mod[l]] * f_scale[l]
                wave = math.sin(TWO_PI * f_freq[l] * s + f_phase[l])
                if kind == KIND_SQUARE:
                    wave = 1.0 if wave >= 0.0 else -1.0
                val = base + f_amp[l] * wave
            frame[l] = val + f_noise[l] * feat_noise[t, l]
        out_feat[t] = frame

        # --- expert target
        v_e = v_max * (1.0 - slow_gain * rough)
        v_e = min(max(v_e, v_min), v_max)
        w_e = min(max(k_heading * bearing, -omega_max), omega_max)
        if stop_at_goal and x >= goal_x:
            v_e = 0.0
            w_e = 0.0
        out_expected[t, 0] = v_e
        out_expected[t, 1] = w_e

        # --- command
        if mode == MODE_EXPERT or t < c:
            cmd[0] = v_e
            cmd[1] = w_e
        else:
            window[q:] = window[: d - q].copy()
            window[:q] = frame
            cmd[:] = W.T @ window
            if mode == MODE_WITH_OFFSET:
                e = (hist_yhat - hist_y).ravel()
                cmd += U.T @ e
                for k in range(c):
                    residual = hist_y[k] - W[k * q : (k + 1) * q].T @ hist_x[k]
                    cmd += u_inv_t[k] @ residual
        cmd[0] = min(max(cmd[0], 0.0), v_cap)
        cmd[1] = min(max(cmd[1], -omega_max), omega_max)
        out_cmd[t] = cmd

        # --- setback dynamics and physical speed cap
        for j in range(r):
            yhat[j] = inertia * yhat[j] + (1.0 - inertia) * (att * cmd[j])
            yhat[j] += noise_std[j] * (1.0 + rough) * beh_noise[t, j]
        cap = abs(cmd[0]) * (1.0 + rough)
        yhat[0] = min(max(yhat[0], -cap), cap)
        out_actual[t] = yhat

        # --- unicycle pose update (displacement uses the pre-update heading)
        x += yhat[0] * math.cos(th) * dt
        y += yhat[0] * math.sin(th) * dt
        th = wrap_angle(th + yhat[1] * dt)
        out_pose[t, 0] = x
        out_pose[t, 1] = y
        out_pose[t, 2] = th

        # --- history ring (slot 0 = most recent completed step)
        hist_x[1:] = hist_x[: c - 1].copy()
        hist_y[1:] = hist_y[: c - 1].copy()
        hist_yhat[1:] = hist_yhat[: c - 1].copy()
        hist_x[0] = frame
        hist_y[0] = out_expected[t]
        hist_yhat[0] = yhat

        # the stacked window is otherwise advanced inside the command block;
        # during warm-up it must still accumulate frames here
        if mode != MODE_EXPERT and t < c:
            window[q:] = window[: d - q].copy()
            window[:q] = frame
