"""Pure-numpy fallback for the compiled kernels.

Trajectory batches are stepped together with boolean activity masks, so
the cost per RK4 step is a handful of vector operations on (n, 3) arrays
instead of a compiled scalar loop. Semantics (sampling points, stopping
rules, status codes) match `_kernels_numba` exactly; arithmetic is the
same step formula, so results agree to rounding.
"""

import numpy as np

_CK_B5 = (37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0)
_CK_B4 = (
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    0.25,
)


def _rhs_batch(lin, quad, const, r):
    g = lin[None, :, :] + np.einsum("abc,nc->nab", quad, r)
    return np.einsum("nab,nb->na", g, r) + const[None, :]


def _record(times, states, counts, rows, t, r):
    times[rows, counts[rows]] = t
    states[rows, counts[rows]] = r
    counts[rows] += 1


def field_paths_rk4(
    lin,
    quad,
    const,
    r0s,
    t0,
    dt,
    n_max,
    stride,
    conv_tol,
    conv_window,
    ball_tol,
    env_rate=0.0,
    track_env=False,
):
    n = r0s.shape[0]
    n_samples = n_max // stride + 3
    times = np.zeros((n, n_samples))
    states = np.zeros((n, n_samples, 3))
    status = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    env_excess = np.full(n, -np.inf)
    ball2 = (1.0 + ball_tol) ** 2
    r = np.array(r0s, dtype=float)
    all_rows = np.arange(n)
    _record(times, states, counts, all_rows, t0, r)
    last_rec = np.zeros(n, dtype=np.int64)
    below = np.zeros(n, dtype=np.int64)
    active = np.einsum("na,na->n", r, r) <= ball2
    status[~active] = 2
    env = np.sqrt(np.einsum("na,na->n", r, r))
    env_factor = np.exp(env_rate * dt) if track_env else 1.0
    for i in range(n_max):
        if not active.any():
            break
        k1 = np.zeros_like(r)
        k1[active] = _rhs_batch(lin, quad, const, r[active])
        speed = np.sqrt(np.einsum("na,na->n", k1, k1))
        slow = active & (speed < conv_tol)
        below[slow] += 1
        below[active & ~slow] = 0
        conv = active & (below >= conv_window)
        if conv.any():
            rows = np.flatnonzero(conv & (last_rec != i))
            _record(times, states, counts, rows, t0 + i * dt, r[rows])
            status[conv] = 1
            steps[conv] = i
            active &= ~conv
            if not active.any():
                break
        act = np.flatnonzero(active)
        ra = r[act]
        k1a = k1[act]
        k2 = _rhs_batch(lin, quad, const, ra + 0.5 * dt * k1a)
        k3 = _rhs_batch(lin, quad, const, ra + 0.5 * dt * k2)
        k4 = _rhs_batch(lin, quad, const, ra + dt * k3)
        r[act] = ra + (dt / 6.0) * (k1a + 2.0 * k2 + 2.0 * k3 + k4)
        step = i + 1
        if track_env:
            env[act] *= env_factor
            excess = np.sqrt(np.einsum("na,na->n", r[act], r[act])) - env[act]
            env_excess[act] = np.maximum(env_excess[act], excess)
        out = active & ~(np.einsum("na,na->n", r, r) <= ball2)
        if out.any():
            rows = np.flatnonzero(out)
            _record(times, states, counts, rows, t0 + step * dt, r[rows])
            status[out] = 2
            steps[out] = step
            active &= ~out
        if step % stride == 0 and step != n_max and active.any():
            rows = np.flatnonzero(active)
            _record(times, states, counts, rows, t0 + step * dt, r[rows])
            last_rec[rows] = step
    if active.any():
        rows = np.flatnonzero(active)
        _record(times, states, counts, rows, t0 + n_max * dt, r[rows])
        status[rows] = 0
        steps[rows] = n_max
    return status, steps, counts, times, states, env_excess


def _path_rk45_scalar(
    lin,
    quad,
    const,
    r0,
    t0,
    t_max,
    dt0,
    rtol,
    atol,
    max_steps,
    conv_tol,
    conv_window,
    ball_tol,
    out_t,
    out_s,
):
    def rhs(r):
        g = lin + quad @ r
        return g @ r + const

    a = (
        (),
        (0.2,),
        (3.0 / 40.0, 9.0 / 40.0),
        (0.3, -0.9, 1.2),
        (-11.0 / 54.0, 2.5, -70.0 / 27.0, 35.0 / 27.0),
        (1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0, 44275.0 / 110592.0, 253.0 / 4096.0),
    )
    err_w = np.array(_CK_B5) - np.array(_CK_B4)
    b5 = np.array(_CK_B5)
    r = np.array(r0, dtype=float)
    ball2 = (1.0 + ball_tol) ** 2
    t = t0
    dt = dt0
    out_t[0] = t
    out_s[0] = r
    count = 1
    below = 0
    if not (r @ r <= ball2):
        return 2, t, count
    for _ in range(max_steps):
        if t >= t0 + t_max - 1e-15:
            return 0, t, count
        dt = min(dt, t0 + t_max - t)
        ks = [rhs(r)]
        if np.linalg.norm(ks[0]) < conv_tol:
            below += 1
            if below >= conv_window:
                return 1, t, count
        else:
            below = 0
        for stage in range(1, 6):
            incr = sum(c * k for c, k in zip(a[stage], ks))
            ks.append(rhs(r + dt * incr))
        new = r + dt * sum(c * k for c, k in zip(b5, ks))
        err_vec = dt * sum(c * k for c, k in zip(err_w, ks))
        scale = atol + rtol * np.maximum(np.abs(r), np.abs(new))
        err = np.sqrt(np.mean((err_vec / scale) ** 2))
        if err <= 1.0:
            t += dt
            r = new
            if count < out_t.shape[0]:
                out_t[count] = t
                out_s[count] = r
                count += 1
            if not (r @ r <= ball2):
                return 2, t, count
        factor = 0.9 * err**-0.2 if err > 0.0 else 5.0
        dt *= min(max(factor, 0.2), 5.0)
    return 0, t, count


def field_paths_rk45(
    lin,
    quad,
    const,
    r0s,
    t0,
    t_max,
    dt0,
    rtol,
    atol,
    max_steps,
    conv_tol,
    conv_window,
    ball_tol,
):
    n = r0s.shape[0]
    n_samples = max_steps + 2
    times = np.zeros((n, n_samples))
    states = np.zeros((n, n_samples, 3))
    status = np.zeros(n, dtype=np.int64)
    t_end = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        st, te, ct = _path_rk45_scalar(
            lin,
            quad,
            const,
            r0s[i],
            t0,
            t_max,
            dt0,
            rtol,
            atol,
            max_steps,
            conv_tol,
            conv_window,
            ball_tol,
            times[i],
            states[i],
        )
        status[i] = st
        t_end[i] = te
        counts[i] = ct
    return status, t_end, counts, times, states


def field_first_entry(lin, quad, const, r0s, dt, n_max, ball_tol, targets, radius):
    n = r0s.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    ball2 = (1.0 + ball_tol) ** 2
    r2 = radius * radius
    r = np.array(r0s, dtype=float)

    def settle(active):
        d1 = np.einsum("na,na->n", r - targets[0], r - targets[0])
        d2 = np.einsum("na,na->n", r - targets[1], r - targets[1])
        hit1 = active & (d1 < r2)
        hit2 = active & ~hit1 & (d2 < r2)
        return hit1, hit2

    active = np.einsum("na,na->n", r, r) <= ball2
    status[~active] = 2
    hit1, hit2 = settle(active)
    labels[hit1] = 1
    labels[hit2] = 2
    status[hit1 | hit2] = 1
    active &= ~(hit1 | hit2)
    for i in range(n_max):
        if not active.any():
            break
        act = np.flatnonzero(active)
        ra = r[act]
        k1 = _rhs_batch(lin, quad, const, ra)
        k2 = _rhs_batch(lin, quad, const, ra + 0.5 * dt * k1)
        k3 = _rhs_batch(lin, quad, const, ra + 0.5 * dt * k2)
        k4 = _rhs_batch(lin, quad, const, ra + dt * k3)
        r[act] = ra + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out = active & ~(np.einsum("na,na->n", r, r) <= ball2)
        if out.any():
            status[out] = 2
            steps[out] = i + 1
            active &= ~out
        hit1, hit2 = settle(active)
        hits = hit1 | hit2
        if hits.any():
            labels[hit1] = 1
            labels[hit2] = 2
            status[hits] = 1
            steps[hits] = i + 1
            active &= ~hits
    steps[active] = n_max
    return labels, steps, status


def _nino_rhs_batch(x, zw, ls, jw, bs, df0):
    out = np.zeros_like(x)
    for a in range(zw.shape[0]):
        out += zw[a] * (ls[a] @ x + x @ np.conj(ls[a].T))
    for b in range(jw.shape[0]):
        out += jw[b] * (bs[b] @ x @ np.conj(bs[b].T))
    s = np.einsum("nik,ki->n", x, df0).real
    return out - s[:, None, None] * x


def nino_paths_rk4(
    x0s,
    zw,
    ls,
    jw,
    bs,
    df0,
    t0,
    dt,
    n_max,
    stride,
    conv_tol,
    conv_window,
    ball_tol,
    renorm,
):
    n, dim = x0s.shape[0], x0s.shape[1]
    n_samples = n_max // stride + 3
    times = np.zeros((n, n_samples))
    states = np.zeros((n, n_samples, dim, dim), dtype=np.complex128)
    status = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    trace_err = np.zeros(n)
    ball2 = (1.0 + ball_tol) ** 2
    x = np.array(x0s, dtype=np.complex128)
    all_rows = np.arange(n)
    times[all_rows, 0] = t0
    states[all_rows, 0] = x
    counts[:] = 1
    last_rec = np.zeros(n, dtype=np.int64)
    below = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    for i in range(n_max):
        if not active.any():
            break
        k1 = _nino_rhs_batch(x, zw, ls, jw, bs, df0)
        rate = np.sqrt(2.0 * np.einsum("nij,nij->n", np.abs(k1), np.abs(k1)))
        slow = active & (rate < conv_tol)
        below[slow] += 1
        below[active & ~slow] = 0
        conv = active & (below >= conv_window)
        if conv.any():
            rows = np.flatnonzero(conv & (last_rec != i))
            times[rows, counts[rows]] = t0 + i * dt
            states[rows, counts[rows]] = x[rows]
            counts[rows] += 1
            status[conv] = 1
            steps[conv] = i
            active &= ~conv
            if not active.any():
                break
        act = np.flatnonzero(active)
        xa = x[act]
        k1a = k1[act]
        k2 = _nino_rhs_batch(xa + 0.5 * dt * k1a, zw, ls, jw, bs, df0)
        k3 = _nino_rhs_batch(xa + 0.5 * dt * k2, zw, ls, jw, bs, df0)
        k4 = _nino_rhs_batch(xa + dt * k3, zw, ls, jw, bs, df0)
        xa = xa + (dt / 6.0) * (k1a + 2.0 * k2 + 2.0 * k3 + k4)
        step = i + 1
        tr = np.einsum("nii->n", xa).real
        terr = np.abs(tr - 1.0)
        trace_err[act] = np.maximum(trace_err[act], terr)
        if renorm:
            xa = xa / tr[:, None, None]
        x[act] = xa
        rx = 2.0 * xa[:, 0, 1].real
        ry = -2.0 * xa[:, 0, 1].imag
        rz = (xa[:, 0, 0] - xa[:, 1, 1]).real
        out_mask = np.zeros(n, dtype=bool)
        out_mask[act] = ~(rx * rx + ry * ry + rz * rz <= ball2)
        if out_mask.any():
            rows = np.flatnonzero(out_mask)
            times[rows, counts[rows]] = t0 + step * dt
            states[rows, counts[rows]] = x[rows]
            counts[rows] += 1
            status[out_mask] = 2
            steps[out_mask] = step
            active &= ~out_mask
        if step % stride == 0 and step != n_max and active.any():
            rows = np.flatnonzero(active)
            times[rows, counts[rows]] = t0 + step * dt
            states[rows, counts[rows]] = x[rows]
            counts[rows] += 1
            last_rec[rows] = step
    if active.any():
        rows = np.flatnonzero(active)
        times[rows, counts[rows]] = t0 + n_max * dt
        states[rows, counts[rows]] = x[rows]
        counts[rows] += 1
        status[rows] = 0
        steps[rows] = n_max
    return status, steps, counts, times, states, trace_err


def warmup():
    """No compilation needed; present for backend interface parity."""
