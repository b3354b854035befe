"""Compiled inner loop for planning-time cost accumulation."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def lam_max_sym3(P):
    """Largest eigenvalue of a symmetric 3x3 matrix by cyclic Jacobi sweeps.

    The trigonometric closed form loses about sqrt(machine eps) near repeated
    eigenvalues, which isotropic covariances hit constantly.
    """
    a = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            a[i, j] = 0.5 * (P[i, j] + P[j, i])
    for _ in range(30):
        off = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
        scale = a[0, 0] ** 2 + a[1, 1] ** 2 + a[2, 2] ** 2
        if off <= 1e-32 * scale or off == 0.0:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[p, q]
            if apq == 0.0:
                continue
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
            if theta < 0.0:
                t = -t
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            k = 3 - p - q
            akp, akq = a[k, p], a[k, q]
            a[k, p] = a[p, k] = c * akp - s * akq
            a[k, q] = a[q, k] = s * akp + c * akq
            a[p, p] -= t * apq
            a[q, q] += t * apq
            a[p, q] = a[q, p] = 0.0
    return max(a[0, 0], max(a[1, 1], a[2, 2]))


@njit(cache=True)
def _cross(ux, uy, vx, vy):
    return ux * vy - uy * vx


@njit(cache=True)
def _pt_seg_dist(px, py, ax, ay, bx, by):
    abx, aby = bx - ax, by - ay
    den = abx * abx + aby * aby
    t = 0.0
    if den > 0.0:
        t = ((px - ax) * abx + (py - ay) * aby) / den
        t = min(1.0, max(0.0, t))
    dx = px - (ax + t * abx)
    dy = py - (ay + t * aby)
    return math.sqrt(dx * dx + dy * dy)


@njit(cache=True)
def blocked(ax, ay, bx, by, obstacles):
    eps = 1e-9
    rx, ry = bx - ax, by - ay
    for k in range(obstacles.shape[0]):
        cx, cy = obstacles[k, 0, 0], obstacles[k, 0, 1]
        dx, dy = obstacles[k, 1, 0], obstacles[k, 1, 1]
        sx, sy = dx - cx, dy - cy
        o1 = _cross(rx, ry, cx - ax, cy - ay)
        o2 = _cross(rx, ry, dx - ax, dy - ay)
        o3 = _cross(sx, sy, ax - cx, ay - cy)
        o4 = _cross(sx, sy, bx - cx, by - cy)
        if o1 * o2 < 0.0 and o3 * o4 < 0.0:
            return True
        if (_pt_seg_dist(cx, cy, ax, ay, bx, by) <= eps
                or _pt_seg_dist(dx, dy, ax, ay, bx, by) <= eps
                or _pt_seg_dist(ax, ay, cx, cy, dx, dy) <= eps
                or _pt_seg_dist(bx, by, cx, cy, dx, dy) <= eps):
            return True
    return False


@njit(cache=True)
def _sigma(ell, sp):
    # sp = max_range, near, far, sigma_near, slope, intercept, sigma_far
    if ell <= sp[1]:
        return sp[3]
    if ell <= sp[2]:
        return sp[4] * ell + sp[5]
    return sp[6]


@njit(cache=True)
def cost_kernel(P, F, Q, f_identity, xs, meas_t, meas_q, obstacles, t_lo, sp):
    """Advance covariance blocks ``P`` in place from ``t_lo`` over ``xs``.

    ``xs[i]`` holds the predicted target means at ``t_lo + 1 + i``; ``meas_t``
    must be sorted. Returns the summed largest eigenvalue over those steps.
    """
    n_steps = xs.shape[0]
    n_t = P.shape[0]
    n_meas = meas_t.shape[0]
    tmp = np.empty((3, 3))
    ph = np.empty(3)
    cost = 0.0
    m = 0
    while m < n_meas and meas_t[m] <= t_lo:
        m += 1
    for i in range(n_steps):
        t = t_lo + 1 + i
        for a in range(n_t):
            if not f_identity:
                for r in range(3):
                    for c in range(3):
                        acc = 0.0
                        for k in range(3):
                            acc += F[a, r, k] * P[a, k, c]
                        tmp[r, c] = acc
                for r in range(3):
                    for c in range(3):
                        acc = 0.0
                        for k in range(3):
                            acc += tmp[r, k] * F[a, c, k]
                        P[a, r, c] = acc
            for r in range(3):
                for c in range(3):
                    P[a, r, c] += Q[a, r, c]
        while m < n_meas and meas_t[m] == t:
            qx, qy = meas_q[m, 0], meas_q[m, 1]
            for a in range(n_t):
                dx = xs[i, a, 0] - qx
                dy = xs[i, a, 1] - qy
                dz = xs[i, a, 2]
                ell = math.sqrt(dx * dx + dy * dy + dz * dz)
                if ell > sp[0] or ell < 1e-6:
                    continue
                if blocked(qx, qy, xs[i, a, 0], xs[i, a, 1], obstacles):
                    continue
                h0, h1, h2 = dx / ell, dy / ell, dz / ell
                sig = _sigma(ell, sp)
                for r in range(3):
                    ph[r] = P[a, r, 0] * h0 + P[a, r, 1] * h1 + P[a, r, 2] * h2
                s = h0 * ph[0] + h1 * ph[1] + h2 * ph[2] + sig * sig
                for r in range(3):
                    for c in range(3):
                        P[a, r, c] -= ph[r] * ph[c] / s
                for r in range(3):
                    for c in range(r + 1, 3):
                        v = 0.5 * (P[a, r, c] + P[a, c, r])
                        P[a, r, c] = v
                        P[a, c, r] = v
            m += 1
        worst = 0.0
        for a in range(n_t):
            lam = lam_max_sym3(P[a])
            if lam > worst:
                worst = lam
        cost += worst
    return cost
