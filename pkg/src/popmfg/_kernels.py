"""Compiled RK4 loops for the forward and backward passes.

Games enter as ``F(x) = A x + b - eps * ln(x + delta)`` and weight schemes as
(kind code, adjacency, floor), so one kernel covers every builtin variant.
Weight kind codes: 0 unit, 1 inverse_target_mass, 2 self_mass. Unit conductance
does not depend on the state and is computed once per pass.
"""
import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)

STIFF_LIMIT = 1.0
MAX_SUBSTEPS = 1_000_000


@njit(**_JIT)
def payoff(A, b, eps, delta, x, out):
    n = x.size
    for i in range(n):
        acc = b[i]
        for j in range(n):
            acc += A[i, j] * x[j]
        if eps != 0.0:
            acc -= eps * np.log(x[i] + delta)
        out[i] = acc


@njit(**_JIT)
def conductance(kind, adj, floor, x, C):
    n = x.size
    for i in range(n):
        for j in range(n):
            if adj[i, j] == 0.0:
                C[i, j] = 0.0
            elif kind == 0:
                C[i, j] = 1.0
            elif kind == 1:
                C[i, j] = max(x[j], 0.0)
            else:
                C[i, j] = 1.0 / max(x[i], floor)


@njit(**_JIT)
def pairwise_field(C, p, x, out):
    n = x.size
    for i in range(n):
        out[i] = 0.0
    for i in range(n):
        for j in range(n):
            d = p[j] - p[i]
            if d > 0.0 and C[i, j] != 0.0:
                flow = x[i] * d * C[i, j]
                out[i] -= flow
                out[j] += flow


@njit(**_JIT)
def hj_field(C, v, F, out):
    n = v.size
    for i in range(n):
        acc = 0.0
        for j in range(n):
            d = v[j] - v[i]
            if d > 0.0:
                acc += C[i, j] * d * d
        out[i] = -0.5 * acc - F[i]


@njit(**_JIT)
def _project(x):
    s = 0.0
    for i in range(x.size):
        if x[i] < 0.0:
            x[i] = 0.0
        s += x[i]
    for i in range(x.size):
        x[i] /= s


@njit(**_JIT)
def _forward_rhs(static, A, b, eps, delta, kind, adj, floor, p_frozen, x, C, p, out):
    if static:
        payoff(A, b, eps, delta, x, p)
    else:
        for i in range(x.size):
            p[i] = p_frozen[i]
    if kind != 0:
        conductance(kind, adj, floor, x, C)
    pairwise_field(C, p, x, out)


@njit(**_JIT)
def forward(static, A, b, eps, delta, kind, adj, floor, x0, P, dt, M):
    """RK4 for dx/dt = V(p, x); ``P`` holds frozen payoff nodes unless ``static``."""
    n = x0.size
    X = np.empty((M + 1, n))
    X[0] = x0
    C = np.empty((n, n))
    conductance(kind, adj, floor, x0, C)
    p = np.empty(n)
    pm = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    xs = np.empty(n)
    for m in range(M):
        x = X[m]
        if not static:
            for i in range(n):
                pm[i] = 0.5 * (P[m, i] + P[m + 1, i])
        _forward_rhs(static, A, b, eps, delta, kind, adj, floor, P[m], x, C, p, k1)
        for i in range(n):
            xs[i] = x[i] + 0.5 * dt * k1[i]
        _forward_rhs(static, A, b, eps, delta, kind, adj, floor, pm, xs, C, p, k2)
        for i in range(n):
            xs[i] = x[i] + 0.5 * dt * k2[i]
        _forward_rhs(static, A, b, eps, delta, kind, adj, floor, pm, xs, C, p, k3)
        for i in range(n):
            xs[i] = x[i] + dt * k3[i]
        _forward_rhs(static, A, b, eps, delta, kind, adj, floor, P[m + 1], xs, C, p, k4)
        for i in range(n):
            X[m + 1, i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        _project(X[m + 1])
    return X


@njit(**_JIT)
def _backward_rhs(A, b, eps, delta, kind, adj, floor, x, v, C, F, out):
    # derivative in reversed time tau = T - t
    payoff(A, b, eps, delta, x, F)
    if kind != 0:
        conductance(kind, adj, floor, x, C)
    hj_field(C, v, F, out)
    for i in range(v.size):
        out[i] = -out[i]


@njit(**_JIT)
def _stiffness(C, v):
    # largest row sum of the Jacobian of the quadratic term, sum_j C_ij [v_j - v_i]_+
    worst = 0.0
    n = v.size
    for i in range(n):
        acc = 0.0
        for j in range(n):
            d = v[j] - v[i]
            if d > 0.0:
                acc += C[i, j] * d
        worst = max(worst, acc)
    return worst


@njit(**_JIT)
def _lerp(a, b, theta, out):
    for i in range(out.size):
        out[i] = a[i] + theta * (b[i] - a[i])


@njit(**_JIT)
def _backward_step(A, b, eps, delta, kind, adj, floor, xa, xb, th0, h_frac, v, C, F,
                   xs, k1, k2, k3, k4, vs, h):
    # one RK4 step of length h from fraction th0 to th0 + h_frac of the interval [xa, xb]
    n = v.size
    _lerp(xa, xb, th0, xs)
    _backward_rhs(A, b, eps, delta, kind, adj, floor, xs, v, C, F, k1)
    _lerp(xa, xb, th0 + 0.5 * h_frac, xs)
    for i in range(n):
        vs[i] = v[i] + 0.5 * h * k1[i]
    _backward_rhs(A, b, eps, delta, kind, adj, floor, xs, vs, C, F, k2)
    for i in range(n):
        vs[i] = v[i] + 0.5 * h * k2[i]
    _backward_rhs(A, b, eps, delta, kind, adj, floor, xs, vs, C, F, k3)
    _lerp(xa, xb, th0 + h_frac, xs)
    for i in range(n):
        vs[i] = v[i] + h * k3[i]
    _backward_rhs(A, b, eps, delta, kind, adj, floor, xs, vs, C, F, k4)
    for i in range(n):
        v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(**_JIT)
def backward(A, b, eps, delta, kind, adj, floor, X, vT, dt, M):
    """RK4 for the value dynamics from v(T) = vT back to t0 along frozen ``X``.

    Small masses under self_mass weights make the quadratic term stiff. A step
    whose stiffness times dt exceeds ``STIFF_LIMIT`` is split into substeps sized
    from the current stiffness; all other steps are plain RK4 with midpoint
    states equal to the average of the neighbouring nodes.
    """
    n = vT.size
    Vn = np.empty((M + 1, n))
    Vn[M] = vT
    C = np.empty((n, n))
    conductance(kind, adj, floor, X[M], C)
    F = np.empty(n)
    xs = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    vs = np.empty(n)
    v = vT.copy()
    for m in range(M, 0, -1):
        xa = X[m]
        xb = X[m - 1]
        if kind != 0:
            conductance(kind, adj, floor, xa, C)
        s = _stiffness(C, v)
        if s * dt <= STIFF_LIMIT:
            _backward_step(A, b, eps, delta, kind, adj, floor, xa, xb, 0.0, 1.0, v, C, F,
                           xs, k1, k2, k3, k4, vs, dt)
        else:
            done = 0.0
            count = 0
            while done < 1.0 and count < MAX_SUBSTEPS:
                _lerp(xa, xb, done, xs)
                if kind != 0:
                    conductance(kind, adj, floor, xs, C)
                s = _stiffness(C, v)
                frac = 1.0 - done
                if s * frac * dt > STIFF_LIMIT:
                    frac = STIFF_LIMIT / (s * dt)
                _backward_step(A, b, eps, delta, kind, adj, floor, xa, xb, done, frac, v, C, F,
                               xs, k1, k2, k3, k4, vs, frac * dt)
                done += frac
                count += 1
            if done < 1.0:
                v[:] = np.nan
        Vn[m - 1] = v
    return Vn
