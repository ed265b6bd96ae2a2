"""Compiled kernels for the monotone stencils and the explicit steppers.

Neighbour tables are direction-major: ``nbp[d, k]`` is the ``+`` neighbour of
interior node ``k`` along direction ``d``; direction ``d`` belongs to frame
``d // dpf`` (``dpf`` = directions per frame = spatial dimension). A frame
that is unavailable at a node has ``avail[f, k] == False``.
"""

import numpy as np
from numba import njit

LAPLACIAN, PUCCI_MINUS, PUCCI_PLUS, BELLMAN = 0, 1, 2, 3


@njit(cache=True)
def _deltas(u, nbp, nbm, wp, wm, wc, D):
    nd, n = nbp.shape
    for d in range(nd):
        for k in range(n):
            D[d, k] = wp[d, k] * u[nbp[d, k]] + wm[d, k] * u[nbm[d, k]] - wc[d, k] * u[k]


@njit(cache=True)
def apply_all(u, out, sel, nbp, nbm, wp, wm, wc, avail, dpf, opcode, lam, Lam,
              bell_dir, bell_coef, bell_frame, bell_fb, D):
    """``F_h(u)`` at every interior node into ``out``; ``sel`` gets the chosen frame/matrix.

    ``D`` is scratch of shape ``nbp.shape``. Ties keep the lowest index.
    """
    nd, n = nbp.shape
    _deltas(u, nbp, nbm, wp, wm, wc, D)
    if opcode == LAPLACIAN:
        for k in range(n):
            s = 0.0
            for i in range(dpf):
                s += D[i, k]
            out[k] = s
            sel[k] = 0
        return
    if opcode == PUCCI_MINUS or opcode == PUCCI_PLUS:
        # the max operator is minus the min of the negated frame values
        sign = 1.0 if opcode == PUCCI_MINUS else -1.0
        cpos = lam if opcode == PUCCI_MINUS else Lam
        cneg = Lam if opcode == PUCCI_MINUS else lam
        nf = avail.shape[0]
        for k in range(n):
            out[k] = np.inf
            sel[k] = -1
        for f in range(nf):
            for k in range(n):
                if not avail[f, k]:
                    continue
                val = 0.0
                for i in range(dpf):
                    dl = D[f * dpf + i, k]
                    val += cneg * dl + (cpos - cneg) * max(dl, 0.0)
                v = sign * val
                if v < out[k]:
                    out[k] = v
                    sel[k] = f
        if sign < 0:
            for k in range(n):
                out[k] = -out[k]
        return
    J, T = bell_dir.shape
    for k in range(n):
        best = np.inf
        bsel = -1
        for j in range(J):
            ok = True
            for t in range(T):
                fr = bell_frame[j, t]
                if fr >= 0 and not avail[fr, k]:
                    ok = False
            val = 0.0
            if ok:
                for t in range(T):
                    if bell_frame[j, t] >= 0:
                        val += bell_coef[j, t] * D[bell_dir[j, t], k]
            else:
                for i in range(dpf):
                    val += bell_fb[j, i] * D[i, k]
            if val < best:
                best = val
                bsel = j
        out[k] = best
        sel[k] = bsel


@njit(cache=True)
def integrate(U, t, t_target, base_dt, m, coef_floor, max_steps,
              nbp, nbm, wp, wm, wc, avail, dpf, opcode, lam, Lam,
              bell_dir, bell_coef, bell_frame, bell_fb):
    """Forward-Euler march of every row of ``U`` from ``t`` to ``t_target``.

    Rows share one time step. ``m == 1`` marches ``u_t = F_h(u)`` with a fixed
    ``base_dt``; ``m > 1`` marches ``w_t = m w^(1-1/m) F_h(w)`` with
    ``dt = base_dt / (m max(w)^(1-1/m))``, the coefficient frozen per step.
    Boundary entries of ``U`` are never written.

    Returns ``(t_reached, steps, bad_row, bad_node)``; ``bad_node >= 0`` flags a
    non-finite value and stops the march.
    """
    B = U.shape[0]
    n = nbp.shape[1]
    F = np.empty(n)
    tmp = np.empty(n, dtype=np.int64)
    D = np.empty(nbp.shape)
    steps = 0
    expo = 1.0 - 1.0 / m
    while t < t_target and steps < max_steps:
        if m == 1.0:
            dt = base_dt
        else:
            wmax = 0.0
            for b in range(B):
                for i in range(U.shape[1]):
                    if U[b, i] > wmax:
                        wmax = U[b, i]
            dt = base_dt / (m * max(wmax ** expo, coef_floor))
        if t + dt >= t_target * (1.0 - 1e-14):
            dt = t_target - t
            t_next = t_target
        else:
            t_next = t + dt
        for b in range(B):
            row = U[b]
            apply_all(row, F, tmp, nbp, nbm, wp, wm, wc, avail, dpf, opcode, lam, Lam,
                      bell_dir, bell_coef, bell_frame, bell_fb, D)
            if m == 1.0:
                for k in range(n):
                    row[k] += dt * F[k]
            else:
                for k in range(n):
                    wk = row[k]
                    c = m * wk ** expo if wk > 0.0 else 0.0
                    row[k] = wk + dt * c * F[k]
            for k in range(n):
                if not np.isfinite(row[k]):
                    return t, steps, b, k
        t = t_next
        steps += 1
    return t, steps, -1, -1
