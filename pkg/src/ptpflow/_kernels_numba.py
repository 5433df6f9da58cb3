"""numba-compiled inner loops for Bloch flows and the qubit master equation.

All trajectory kernels are scalar per-trajectory loops; the batch entry
points at the bottom loop over initial conditions and fill shared padded
output arrays. Status codes: 0 = max time, 1 = converged, 2 = unphysical.
"""

import numpy as np
from numba import njit

# Cash-Karp 5(4) embedded pair.
_CK_B5 = (37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0)
_CK_B4 = (
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    0.25,
)


@njit(cache=True, inline="always")
def _rhs(lin, quad, const, x, y, z):
    vx = const[0]
    vy = const[1]
    vz = const[2]
    vx += (lin[0, 0] + quad[0, 0, 0] * x + quad[0, 0, 1] * y + quad[0, 0, 2] * z) * x
    vx += (lin[0, 1] + quad[0, 1, 0] * x + quad[0, 1, 1] * y + quad[0, 1, 2] * z) * y
    vx += (lin[0, 2] + quad[0, 2, 0] * x + quad[0, 2, 1] * y + quad[0, 2, 2] * z) * z
    vy += (lin[1, 0] + quad[1, 0, 0] * x + quad[1, 0, 1] * y + quad[1, 0, 2] * z) * x
    vy += (lin[1, 1] + quad[1, 1, 0] * x + quad[1, 1, 1] * y + quad[1, 1, 2] * z) * y
    vy += (lin[1, 2] + quad[1, 2, 0] * x + quad[1, 2, 1] * y + quad[1, 2, 2] * z) * z
    vz += (lin[2, 0] + quad[2, 0, 0] * x + quad[2, 0, 1] * y + quad[2, 0, 2] * z) * x
    vz += (lin[2, 1] + quad[2, 1, 0] * x + quad[2, 1, 1] * y + quad[2, 1, 2] * z) * y
    vz += (lin[2, 2] + quad[2, 2, 0] * x + quad[2, 2, 1] * y + quad[2, 2, 2] * z) * z
    return vx, vy, vz


@njit(cache=True, nogil=True)
def _path_rk4(
    lin,
    quad,
    const,
    r0,
    t0,
    dt,
    n_max,
    stride,
    conv_tol,
    conv_window,
    ball_tol,
    env_rate,
    track_env,
    out_t,
    out_s,
):
    x, y, z = r0[0], r0[1], r0[2]
    ball2 = (1.0 + ball_tol) ** 2
    r0n = np.sqrt(x * x + y * y + z * z)
    env = r0n
    env_factor = np.exp(env_rate * dt) if track_env else 1.0
    env_excess = -np.inf
    out_t[0] = t0
    out_s[0, 0] = x
    out_s[0, 1] = y
    out_s[0, 2] = z
    count = 1
    last_rec = 0
    below = 0
    if not (x * x + y * y + z * z <= ball2):
        return 2, 0, count, env_excess
    for i in range(n_max):
        ax, ay, az = _rhs(lin, quad, const, x, y, z)
        if np.sqrt(ax * ax + ay * ay + az * az) < conv_tol:
            below += 1
            if below >= conv_window:
                if last_rec != i:
                    out_t[count] = t0 + i * dt
                    out_s[count, 0] = x
                    out_s[count, 1] = y
                    out_s[count, 2] = z
                    count += 1
                return 1, i, count, env_excess
        else:
            below = 0
        h = 0.5 * dt
        bx, by, bz = _rhs(lin, quad, const, x + h * ax, y + h * ay, z + h * az)
        cx, cy, cz = _rhs(lin, quad, const, x + h * bx, y + h * by, z + h * bz)
        dx, dy, dz = _rhs(lin, quad, const, x + dt * cx, y + dt * cy, z + dt * cz)
        x += dt / 6.0 * (ax + 2.0 * bx + 2.0 * cx + dx)
        y += dt / 6.0 * (ay + 2.0 * by + 2.0 * cy + dy)
        z += dt / 6.0 * (az + 2.0 * bz + 2.0 * cz + dz)
        step = i + 1
        if track_env:
            env *= env_factor
            e = np.sqrt(x * x + y * y + z * z) - env
            if e > env_excess:
                env_excess = e
        if not (x * x + y * y + z * z <= ball2):
            out_t[count] = t0 + step * dt
            out_s[count, 0] = x
            out_s[count, 1] = y
            out_s[count, 2] = z
            count += 1
            return 2, step, count, env_excess
        if step % stride == 0 and step != n_max:
            out_t[count] = t0 + step * dt
            out_s[count, 0] = x
            out_s[count, 1] = y
            out_s[count, 2] = z
            count += 1
            last_rec = step
    if last_rec != n_max or count == 1:
        out_t[count] = t0 + n_max * dt
        out_s[count, 0] = x
        out_s[count, 1] = y
        out_s[count, 2] = z
        count += 1
    return 0, n_max, count, env_excess


@njit(cache=True, nogil=True)
def _path_rk45(
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
    x, y, z = r0[0], r0[1], r0[2]
    ball2 = (1.0 + ball_tol) ** 2
    t = t0
    dt = dt0
    out_t[0] = t
    out_s[0, 0] = x
    out_s[0, 1] = y
    out_s[0, 2] = z
    count = 1
    below = 0
    if x * x + y * y + z * z > ball2:
        return 2, t, count
    for _ in range(max_steps):
        if t >= t0 + t_max - 1e-15:
            return 0, t, count
        if dt > t0 + t_max - t:
            dt = t0 + t_max - t
        k1x, k1y, k1z = _rhs(lin, quad, const, x, y, z)
        if np.sqrt(k1x * k1x + k1y * k1y + k1z * k1z) < conv_tol:
            below += 1
            if below >= conv_window:
                return 1, t, count
        else:
            below = 0
        k2x, k2y, k2z = _rhs(
            lin, quad, const, x + dt * 0.2 * k1x, y + dt * 0.2 * k1y, z + dt * 0.2 * k1z
        )
        a31, a32 = 3.0 / 40.0, 9.0 / 40.0
        k3x, k3y, k3z = _rhs(
            lin,
            quad,
            const,
            x + dt * (a31 * k1x + a32 * k2x),
            y + dt * (a31 * k1y + a32 * k2y),
            z + dt * (a31 * k1z + a32 * k2z),
        )
        a41, a42, a43 = 0.3, -0.9, 1.2
        k4x, k4y, k4z = _rhs(
            lin,
            quad,
            const,
            x + dt * (a41 * k1x + a42 * k2x + a43 * k3x),
            y + dt * (a41 * k1y + a42 * k2y + a43 * k3y),
            z + dt * (a41 * k1z + a42 * k2z + a43 * k3z),
        )
        a51, a52, a53, a54 = -11.0 / 54.0, 2.5, -70.0 / 27.0, 35.0 / 27.0
        k5x, k5y, k5z = _rhs(
            lin,
            quad,
            const,
            x + dt * (a51 * k1x + a52 * k2x + a53 * k3x + a54 * k4x),
            y + dt * (a51 * k1y + a52 * k2y + a53 * k3y + a54 * k4y),
            z + dt * (a51 * k1z + a52 * k2z + a53 * k3z + a54 * k4z),
        )
        a61, a62, a63 = 1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0
        a64, a65 = 44275.0 / 110592.0, 253.0 / 4096.0
        k6x, k6y, k6z = _rhs(
            lin,
            quad,
            const,
            x + dt * (a61 * k1x + a62 * k2x + a63 * k3x + a64 * k4x + a65 * k5x),
            y + dt * (a61 * k1y + a62 * k2y + a63 * k3y + a64 * k4y + a65 * k5y),
            z + dt * (a61 * k1z + a62 * k2z + a63 * k3z + a64 * k4z + a65 * k5z),
        )
        b1, b3, b4, b6 = _CK_B5[0], _CK_B5[2], _CK_B5[3], _CK_B5[5]
        e1 = _CK_B5[0] - _CK_B4[0]
        e3 = _CK_B5[2] - _CK_B4[2]
        e4 = _CK_B5[3] - _CK_B4[3]
        e5 = -_CK_B4[4]
        e6 = _CK_B5[5] - _CK_B4[5]
        nx = x + dt * (b1 * k1x + b3 * k3x + b4 * k4x + b6 * k6x)
        ny = y + dt * (b1 * k1y + b3 * k3y + b4 * k4y + b6 * k6y)
        nz = z + dt * (b1 * k1z + b3 * k3z + b4 * k4z + b6 * k6z)
        ex = dt * (e1 * k1x + e3 * k3x + e4 * k4x + e5 * k5x + e6 * k6x)
        ey = dt * (e1 * k1y + e3 * k3y + e4 * k4y + e5 * k5y + e6 * k6y)
        ez = dt * (e1 * k1z + e3 * k3z + e4 * k4z + e5 * k5z + e6 * k6z)
        sx = atol + rtol * max(abs(x), abs(nx))
        sy = atol + rtol * max(abs(y), abs(ny))
        sz = atol + rtol * max(abs(z), abs(nz))
        err = np.sqrt(((ex / sx) ** 2 + (ey / sy) ** 2 + (ez / sz) ** 2) / 3.0)
        if err <= 1.0:
            t += dt
            x, y, z = nx, ny, nz
            if count < out_t.shape[0]:
                out_t[count] = t
                out_s[count, 0] = x
                out_s[count, 1] = y
                out_s[count, 2] = z
                count += 1
            if not (x * x + y * y + z * z <= ball2):
                return 2, t, count
        factor = 0.9 * err ** -0.2 if err > 0.0 else 5.0
        if factor < 0.2:
            factor = 0.2
        elif factor > 5.0:
            factor = 5.0
        dt *= factor
    return 0, t, count


@njit(cache=True, nogil=True)
def _first_entry(lin, quad, const, r0, dt, n_max, ball_tol, targets, radius):
    x, y, z = r0[0], r0[1], r0[2]
    ball2 = (1.0 + ball_tol) ** 2
    r2 = radius * radius
    if not (x * x + y * y + z * z <= ball2):
        return 0, 0, 2
    d1 = (x - targets[0, 0]) ** 2 + (y - targets[0, 1]) ** 2 + (z - targets[0, 2]) ** 2
    d2 = (x - targets[1, 0]) ** 2 + (y - targets[1, 1]) ** 2 + (z - targets[1, 2]) ** 2
    if d1 < r2:
        return 1, 0, 1
    if d2 < r2:
        return 2, 0, 1
    for i in range(n_max):
        ax, ay, az = _rhs(lin, quad, const, x, y, z)
        h = 0.5 * dt
        bx, by, bz = _rhs(lin, quad, const, x + h * ax, y + h * ay, z + h * az)
        cx, cy, cz = _rhs(lin, quad, const, x + h * bx, y + h * by, z + h * bz)
        dx, dy, dz = _rhs(lin, quad, const, x + dt * cx, y + dt * cy, z + dt * cz)
        x += dt / 6.0 * (ax + 2.0 * bx + 2.0 * cx + dx)
        y += dt / 6.0 * (ay + 2.0 * by + 2.0 * cy + dy)
        z += dt / 6.0 * (az + 2.0 * bz + 2.0 * cz + dz)
        if not (x * x + y * y + z * z <= ball2):
            return 0, i + 1, 2
        d1 = (x - targets[0, 0]) ** 2 + (y - targets[0, 1]) ** 2 + (z - targets[0, 2]) ** 2
        d2 = (x - targets[1, 0]) ** 2 + (y - targets[1, 1]) ** 2 + (z - targets[1, 2]) ** 2
        if d1 < r2:
            return 1, i + 1, 1
        if d2 < r2:
            return 2, i + 1, 1
    return 0, n_max, 0


@njit(cache=True, nogil=True)
def _nino_rhs(x, zw, ls, jw, bs, df0, out):
    n = x.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = 0.0
    for a in range(zw.shape[0]):
        l = ls[a]
        w = zw[a]
        for i in range(n):
            for j in range(n):
                acc = 0.0 + 0.0j
                for k in range(n):
                    acc += l[i, k] * x[k, j] + x[i, k] * np.conj(l[j, k])
                out[i, j] += w * acc
    for b in range(jw.shape[0]):
        bm = bs[b]
        w = jw[b]
        for i in range(n):
            for j in range(n):
                acc = 0.0 + 0.0j
                for k in range(n):
                    for m in range(n):
                        acc += bm[i, k] * x[k, m] * np.conj(bm[j, m])
                out[i, j] += w * acc
    s = 0.0
    for i in range(n):
        for k in range(n):
            s += (x[i, k] * df0[k, i]).real
    for i in range(n):
        for j in range(n):
            out[i, j] -= s * x[i, j]


@njit(cache=True, nogil=True)
def _nino_path_rk4(
    x0,
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
    out_t,
    out_s,
):
    n = x0.shape[0]
    x = x0.copy()
    k1 = np.empty((n, n), dtype=np.complex128)
    k2 = np.empty((n, n), dtype=np.complex128)
    k3 = np.empty((n, n), dtype=np.complex128)
    k4 = np.empty((n, n), dtype=np.complex128)
    ball2 = (1.0 + ball_tol) ** 2
    out_t[0] = t0
    out_s[0] = x
    count = 1
    last_rec = 0
    below = 0
    trace_err = 0.0
    for i in range(n_max):
        _nino_rhs(x, zw, ls, jw, bs, df0, k1)
        rate2 = 0.0
        for a in range(n):
            for b in range(n):
                rate2 += abs(k1[a, b]) ** 2
        if np.sqrt(2.0 * rate2) < conv_tol:
            below += 1
            if below >= conv_window:
                if last_rec != i:
                    out_t[count] = t0 + i * dt
                    out_s[count] = x
                    count += 1
                return 1, i, count, trace_err
        else:
            below = 0
        _nino_rhs(x + 0.5 * dt * k1, zw, ls, jw, bs, df0, k2)
        _nino_rhs(x + 0.5 * dt * k2, zw, ls, jw, bs, df0, k3)
        _nino_rhs(x + dt * k3, zw, ls, jw, bs, df0, k4)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        step = i + 1
        tr = 0.0
        for a in range(n):
            tr += x[a, a].real
        terr = abs(tr - 1.0)
        if terr > trace_err:
            trace_err = terr
        if renorm:
            x = x / tr
        rx = 2.0 * x[0, 1].real
        ry = -2.0 * x[0, 1].imag
        rz = (x[0, 0] - x[1, 1]).real
        if not (rx * rx + ry * ry + rz * rz <= ball2):
            out_t[count] = t0 + step * dt
            out_s[count] = x
            count += 1
            return 2, step, count, trace_err
        if step % stride == 0 and step != n_max:
            out_t[count] = t0 + step * dt
            out_s[count] = x
            count += 1
            last_rec = step
    if last_rec != n_max or count == 1:
        out_t[count] = t0 + n_max * dt
        out_s[count] = x
        count += 1
    return 0, n_max, count, trace_err


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
    for i in range(n):
        st, sp, ct, ee = _path_rk4(
            lin,
            quad,
            const,
            r0s[i],
            t0,
            dt,
            n_max,
            stride,
            conv_tol,
            conv_window,
            ball_tol,
            env_rate,
            track_env,
            times[i],
            states[i],
        )
        status[i] = st
        steps[i] = sp
        counts[i] = ct
        env_excess[i] = ee
    return status, steps, counts, times, states, env_excess


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
        st, te, ct = _path_rk45(
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
    for i in range(n):
        lb, sp, st = _first_entry(
            lin, quad, const, r0s[i], dt, n_max, ball_tol, targets, radius
        )
        labels[i] = lb
        steps[i] = sp
        status[i] = st
    return labels, steps, status


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
    n = x0s.shape[0]
    dim = x0s.shape[1]
    n_samples = n_max // stride + 3
    times = np.zeros((n, n_samples))
    states = np.zeros((n, n_samples, dim, dim), dtype=np.complex128)
    status = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    trace_err = np.zeros(n)
    for i in range(n):
        st, sp, ct, te = _nino_path_rk4(
            x0s[i],
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
            times[i],
            states[i],
        )
        status[i] = st
        steps[i] = sp
        counts[i] = ct
        trace_err[i] = te
    return status, steps, counts, times, states, trace_err


def warmup():
    """Trigger compilation of every kernel (cached to disk afterwards)."""
    lin = -0.5 * np.eye(3)
    quad = np.zeros((3, 3, 3))
    quad[0, 1, 2] = 0.1
    const = np.zeros(3)
    r0s = np.array([[0.1, 0.0, 0.1]])
    field_paths_rk4(lin, quad, const, r0s, 0.0, 1e-2, 10, 5, 1e-10, 10, 1e-9)
    field_paths_rk45(lin, quad, const, r0s, 0.0, 0.1, 1e-2, 1e-9, 1e-12, 50, 1e-10, 10, 1e-9)
    targets = np.array([[0.5, 0.0, 0.5], [-0.5, 0.0, -0.5]])
    field_first_entry(lin, quad, const, r0s, 1e-2, 10, 1e-9, targets, 0.1)
    x0s = 0.5 * np.eye(2, dtype=np.complex128)[None, :, :].copy()
    zw = np.array([1.0])
    ls = np.array([[[0.0, 0.5], [-0.5, 0.0]]], dtype=np.complex128)
    jw = np.zeros(0)
    bs = np.zeros((0, 2, 2), dtype=np.complex128)
    df0 = np.zeros((2, 2), dtype=np.complex128)
    nino_paths_rk4(x0s, zw, ls, jw, bs, df0, 0.0, 1e-2, 10, 5, 1e-12, 10, 1e-9, False)
