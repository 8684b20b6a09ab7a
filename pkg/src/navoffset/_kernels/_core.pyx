# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled rollout loop; mirrors ``_reference.rollout`` operation for
operation (keep the two in sync).  Behaviors are fixed at r=2."""

import numpy as np

from libc.math cimport atan2, cos, fabs, fmod, sin, M_PI

# Keep in sync with _reference.py.
cdef enum:
    MODE_EXPERT = 0
    MODE_FEEDFORWARD = 1
    MODE_WITH_OFFSET = 2
    KIND_SINE = 0
    KIND_SQUARE = 1
    KIND_BEARING = 2
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

cdef double AIM_MARGIN = 5.0
cdef double TWO_PI = 2.0 * M_PI


cdef inline double _wrap(double a) noexcept:
    a = fmod(a, TWO_PI)
    if a > M_PI:
        a -= TWO_PI
    elif a <= -M_PI:
        a += TWO_PI
    return a


cdef inline double _clip(double v, double lo, double hi) noexcept:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def rollout(
    double[::1] seg_end,
    double[::1] seg_slip,
    double[::1] seg_drag,
    double[::1] seg_rough,
    double[:, ::1] seg_level,
    int[::1] f_mod,
    int[::1] f_kind,
    double[::1] f_scale,
    double[::1] f_amp,
    double[::1] f_freq,
    double[::1] f_phase,
    double[::1] f_noise,
    double[::1] run_params,
    double[::1] noise_std,
    int mode,
    int c,
    double[:, ::1] W,
    double[:, ::1] U,
    double[:, :, ::1] u_inv_t,
    double dt,
    double x0,
    double y0,
    double th0,
    double[:, ::1] feat_noise,
    double[:, ::1] beh_noise,
    double[:, ::1] out_feat,
    double[:, ::1] out_expected,
    double[:, ::1] out_cmd,
    double[:, ::1] out_actual,
    double[:, ::1] out_pose,
):
    cdef Py_ssize_t n_steps = out_feat.shape[0]
    cdef Py_ssize_t q = out_feat.shape[1]
    cdef Py_ssize_t d = c * q
    cdef Py_ssize_t n_seg = seg_end.shape[0]

    if out_expected.shape[1] != 2:
        raise ValueError("compiled kernel supports r=2 behaviors only")

    cdef double v_max = run_params[P_V_MAX]
    cdef double v_min = run_params[P_V_MIN]
    cdef double slow_gain = run_params[P_SLOW_GAIN]
    cdef double k_heading = run_params[P_K_HEADING]
    cdef double omega_max = run_params[P_OMEGA_MAX]
    cdef double v_cap = run_params[P_V_CAP]
    cdef double goal_x = run_params[P_GOAL_X]
    cdef bint stop_at_goal = run_params[P_STOP_AT_GOAL] != 0.0
    cdef double extra_slip = run_params[P_EXTRA_SLIP]
    cdef double extra_drag = run_params[P_EXTRA_DRAG]
    cdef double extra_rough = run_params[P_EXTRA_ROUGH]
    cdef double inertia = run_params[P_INERTIA]
    cdef double aim_x = goal_x + AIM_MARGIN
    cdef double track_end = seg_end[n_seg - 1]

    buf_window = np.zeros(d)
    buf_hist_x = np.zeros((c, q))
    buf_hist_y = np.zeros((c, 2))
    buf_hist_yhat = np.zeros((c, 2))
    buf_frame = np.zeros(q)
    cdef double[::1] window = buf_window
    cdef double[:, ::1] hist_x = buf_hist_x
    cdef double[:, ::1] hist_y = buf_hist_y
    cdef double[:, ::1] hist_yhat = buf_hist_yhat
    cdef double[::1] frame = buf_frame

    cdef double x = x0, y = y0, th = th0
    cdef double yhat0 = 0.0, yhat1 = 0.0
    cdef double cmd0, cmd1, s, rough, att, bearing, base, wave, val
    cdef double v_e, w_e, grip, resid0, resid1, ev, cap
    cdef Py_ssize_t t, g, l, k, i, kk

    for t in range(n_steps):
        # --- terrain at the current position
        s = x
        if s < 0.0:
            s = 0.0
        elif s > track_end:
            s = track_end
        g = 0
        while g < n_seg - 1 and s > seg_end[g]:
            g += 1
        rough = seg_rough[g] + extra_rough
        grip = seg_slip[g] + extra_slip + seg_drag[g] + extra_drag
        if grip > 0.95:
            grip = 0.95
        att = 1.0 - grip
        bearing = _wrap(atan2(0.0 - y, aim_x - x) - th)

        # --- observed feature frame
        for l in range(q):
            if f_kind[l] == KIND_BEARING:
                val = bearing
            else:
                base = seg_level[g, f_mod[l]] * f_scale[l]
                wave = sin(TWO_PI * f_freq[l] * s + f_phase[l])
                if f_kind[l] == KIND_SQUARE:
                    wave = 1.0 if wave >= 0.0 else -1.0
                val = base + f_amp[l] * wave
            frame[l] = val + f_noise[l] * feat_noise[t, l]
            out_feat[t, l] = frame[l]

        # --- expert target
        v_e = v_max * (1.0 - slow_gain * rough)
        v_e = _clip(v_e, v_min, v_max)
        w_e = _clip(k_heading * bearing, -omega_max, omega_max)
        if stop_at_goal and x >= goal_x:
            v_e = 0.0
            w_e = 0.0
        out_expected[t, 0] = v_e
        out_expected[t, 1] = w_e

        # --- command
        if mode == MODE_EXPERT or t < c:
            cmd0 = v_e
            cmd1 = w_e
        else:
            for i in range(d - 1, q - 1, -1):
                window[i] = window[i - q]
            for i in range(q):
                window[i] = frame[i]
            cmd0 = 0.0
            cmd1 = 0.0
            for i in range(d):
                cmd0 += W[i, 0] * window[i]
                cmd1 += W[i, 1] * window[i]
            if mode == MODE_WITH_OFFSET:
                for k in range(c):
                    for i in range(2):
                        ev = hist_yhat[k, i] - hist_y[k, i]
                        cmd0 += U[2 * k + i, 0] * ev
                        cmd1 += U[2 * k + i, 1] * ev
                for k in range(c):
                    resid0 = hist_y[k, 0]
                    resid1 = hist_y[k, 1]
                    for i in range(q):
                        resid0 -= W[k * q + i, 0] * hist_x[k, i]
                        resid1 -= W[k * q + i, 1] * hist_x[k, i]
                    cmd0 += u_inv_t[k, 0, 0] * resid0 + u_inv_t[k, 0, 1] * resid1
                    cmd1 += u_inv_t[k, 1, 0] * resid0 + u_inv_t[k, 1, 1] * resid1
        cmd0 = _clip(cmd0, 0.0, v_cap)
        cmd1 = _clip(cmd1, -omega_max, omega_max)
        out_cmd[t, 0] = cmd0
        out_cmd[t, 1] = cmd1

        # --- setback dynamics and physical speed cap
        yhat0 = inertia * yhat0 + (1.0 - inertia) * (att * cmd0)
        yhat0 += noise_std[0] * (1.0 + rough) * beh_noise[t, 0]
        yhat1 = inertia * yhat1 + (1.0 - inertia) * (att * cmd1)
        yhat1 += noise_std[1] * (1.0 + rough) * beh_noise[t, 1]
        cap = fabs(cmd0) * (1.0 + rough)
        yhat0 = _clip(yhat0, -cap, cap)
        out_actual[t, 0] = yhat0
        out_actual[t, 1] = yhat1

        # --- unicycle pose update (displacement uses the pre-update heading)
        x += yhat0 * cos(th) * dt
        y += yhat0 * sin(th) * dt
        th = _wrap(th + yhat1 * dt)
        out_pose[t, 0] = x
        out_pose[t, 1] = y
        out_pose[t, 2] = th

        # --- history ring (slot 0 = most recent completed step)
        for kk in range(c - 1, 0, -1):
            for i in range(q):
                hist_x[kk, i] = hist_x[kk - 1, i]
            for i in range(2):
                hist_y[kk, i] = hist_y[kk - 1, i]
                hist_yhat[kk, i] = hist_yhat[kk - 1, i]
        for i in range(q):
            hist_x[0, i] = frame[i]
        hist_y[0, 0] = out_expected[t, 0]
        hist_y[0, 1] = out_expected[t, 1]
        hist_yhat[0, 0] = yhat0
        hist_yhat[0, 1] = yhat1

        # during warm-up the window must still accumulate frames
        if mode != MODE_EXPERT and t < c:
            for i in range(d - 1, q - 1, -1):
                window[i] = window[i - q]
            for i in range(q):
                window[i] = frame[i]
