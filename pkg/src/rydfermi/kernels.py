"""Hot numeric kernels, built twice: numba @njit and pure numpy.

The compute-bound inner loops live here: the Numerov recurrence that radial
waves are integrated with, and adaptive Dormand-Prince (RK45) propagators
for the driven, leaky level dynamics (amplitude and density-matrix forms).
All are plain-Python algorithms that numba compiles unchanged; setting
RYDFERMI_NO_NUMBA=1 selects the interpreted numpy build instead (identical
results, slower). ``benchmarks/bench_kernels.py`` times the two builds.
"""

import os

import numpy as np

_ENV_FLAG = os.environ.get("RYDFERMI_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _ENV_FLAG in {"1", "true", "yes", "on"}

try:
    if NUMBA_DISABLED:
        raise ImportError("numba disabled via RYDFERMI_NO_NUMBA")
    from numba import njit as _njit

    NUMBA_ACTIVE = True
except ImportError:
    NUMBA_ACTIVE = False

    def _njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def _jit(func):
    return _njit(cache=True)(func) if NUMBA_ACTIVE else func


# ---------------------------------------------------------------------------
# Numerov recurrence


def _numerov_inward_impl(coef, h):
    """Integrate w'' = -coef(x) * w on a uniform grid, outermost point first.

    Seeds a tiny exponential tail at the outer edge and recurses inward; the
    caller normalizes, so only the shape matters. Rescales mid-run when the
    inward-growing solution threatens overflow.
    """
    n = coef.shape[0]
    w = np.zeros(n)
    hh = h * h / 12.0
    w[n - 1] = 1e-14
    w[n - 2] = 2e-14
    for i in range(n - 2, 0, -1):
        num = (2.0 - 10.0 * hh * coef[i]) * w[i] - (1.0 + hh * coef[i + 1]) * w[i + 1]
        w[i - 1] = num / (1.0 + hh * coef[i - 1])
        if abs(w[i - 1]) > 1e200:
            for j in range(i - 1, n):
                w[j] *= 1e-200
    return w


numerov_inward = _jit(_numerov_inward_impl)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) tableau

_DP_C = np.array([0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0])
_DP_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    ]
)
_DP_B5 = np.array([35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0])
_DP_B4 = np.array(
    [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ]
)
_DP_E = _DP_B5 - _DP_B4


def _wave_rhs_impl(t, y, a0, a1, a2, a3, use_beat, amp, t_center, sigma, beta, gamma_c, e1_index, out):
    """dy/dt for the amplitude vector plus one emission accumulator.

    a0..a3 are premultiplied generators (-i times the Hamiltonian pieces,
    damping already folded into a0). The pulse envelope is
    amp * exp(-((t - t_center) / sigma)^2); a2/a3 carry a second drive color
    beating at frequency beta. y[-1] accrues gamma_c * |y[e1]|^2, the flux
    that has leaked out of the cavity so far.
    """
    dim = a0.shape[0]
    env = amp * np.exp(-(((t - t_center) / sigma) ** 2))
    for i in range(dim):
        acc = 0.0 + 0.0j
        for j in range(dim):
            acc += (a0[i, j] + env * a1[i, j]) * y[j]
        out[i] = acc
    if use_beat == 1:
        cb = np.cos(beta * t)
        sb = np.sin(beta * t)
        for i in range(dim):
            acc = 0.0 + 0.0j
            for j in range(dim):
                acc += (cb * a2[i, j] + sb * a3[i, j]) * y[j]
            out[i] += acc
    amp_e1 = y[e1_index]
    out[dim] = gamma_c * (amp_e1.real * amp_e1.real + amp_e1.imag * amp_e1.imag)


_wave_rhs = _jit(_wave_rhs_impl)


def _rk45_leg_impl(y0, save_t, a0, a1, a2, a3, use_beat, amp, t_center, sigma, beta, gamma_c, e1_index, rtol, atol):
    """Propagate one pulse leg, storing the state at every point of save_t.

    Steps are clamped to land exactly on the save grid. Returns
    (saved states, accepted step count, status); status 1 = step underflow.
    """
    dim = a0.shape[0]
    nst = dim + 1
    n_save = save_t.shape[0]
    out = np.zeros((n_save, nst), dtype=np.complex128)
    y = y0.copy()
    out[0] = y
    k = np.zeros((7, nst), dtype=np.complex128)
    ytmp = np.zeros(nst, dtype=np.complex128)
    t = save_t[0]
    span = save_t[n_save - 1] - save_t[0]
    h = span * 1e-6 + 1e-12
    h_max = span / 8.0
    n_steps = 0
    status = 0
    _wave_rhs(t, y, a0, a1, a2, a3, use_beat, amp, t_center, sigma, beta, gamma_c, e1_index, k[0])
    for i_save in range(1, n_save):
        t_goal = save_t[i_save]
        while t < t_goal - 1e-14 * span:
            if h > t_goal - t:
                h = t_goal - t
            for s in range(1, 6):
                for i in range(nst):
                    acc = 0.0 + 0.0j
                    for q in range(s):
                        aa = _DP_A[s, q]
                        if aa != 0.0:
                            acc += aa * k[q, i]
                    ytmp[i] = y[i] + h * acc
                _wave_rhs(
                    t + _DP_C[s] * h, ytmp, a0, a1, a2, a3, use_beat, amp, t_center, sigma, beta, gamma_c, e1_index, k[s]
                )
            for i in range(nst):
                acc = 0.0 + 0.0j
                for q in range(6):
                    bb = _DP_B5[q]
                    if bb != 0.0:
                        acc += bb * k[q, i]
                ytmp[i] = y[i] + h * acc
            _wave_rhs(t + h, ytmp, a0, a1, a2, a3, use_beat, amp, t_center, sigma, beta, gamma_c, e1_index, k[6])
            err = 0.0
            for i in range(nst):
                acc = 0.0 + 0.0j
                for q in range(7):
                    eb = _DP_E[q]
                    if eb != 0.0:
                        acc += eb * k[q, i]
                e_i = h * abs(acc)
                sc = atol + rtol * max(abs(y[i]), abs(ytmp[i]))
                r = e_i / sc
                err += r * r
            err = np.sqrt(err / nst)
            if err <= 1.0:
                t = t + h
                for i in range(nst):
                    y[i] = ytmp[i]
                    k[0, i] = k[6, i]
                n_steps += 1
            if err == 0.0:
                fac = 5.0
            else:
                fac = 0.9 * err ** (-0.2)
                if fac < 0.2:
                    fac = 0.2
                elif fac > 5.0:
                    fac = 5.0
            h = h * fac
            if h > h_max:
                h = h_max
            if h < 1e-13 * span:
                return out, n_steps, 1
        out[i_save] = y
    return out, n_steps, status


rk45_leg = _jit(_rk45_leg_impl)


def _lindblad_rhs_impl(t, rho, h0, hp, amp, t_center, sigma, jumps, anti, out):
    """Master-equation right-hand side on a dense density matrix.

    h0 is the static Hermitian part, hp the pulse coupling with a Gaussian
    envelope, jumps the stacked collapse operators, anti = 0.5 * sum L^dag L.
    """
    env = amp * np.exp(-(((t - t_center) / sigma) ** 2))
    h = h0 + env * hp
    out[:] = -1j * (h @ rho - rho @ h)
    out -= anti @ rho + rho @ anti
    for q in range(jumps.shape[0]):
        l_op = jumps[q]
        out += l_op @ (rho @ l_op.conj().T)


_lindblad_rhs = _jit(_lindblad_rhs_impl)


def _rk45_lindblad_leg_impl(rho0, save_t, h0, hp, amp, t_center, sigma, jumps, anti, rtol, atol):
    """Dormand-Prince propagation of a dense density matrix over one leg."""
    dim = rho0.shape[0]
    n_save = save_t.shape[0]
    out = np.zeros((n_save, dim, dim), dtype=np.complex128)
    rho = rho0.copy()
    out[0] = rho
    k = np.zeros((7, dim, dim), dtype=np.complex128)
    rtmp = np.zeros((dim, dim), dtype=np.complex128)
    t = save_t[0]
    span = save_t[n_save - 1] - save_t[0]
    h = span * 1e-6 + 1e-12
    h_max = span / 8.0
    n_steps = 0
    status = 0
    _lindblad_rhs(t, rho, h0, hp, amp, t_center, sigma, jumps, anti, k[0])
    for i_save in range(1, n_save):
        t_goal = save_t[i_save]
        while t < t_goal - 1e-14 * span:
            if h > t_goal - t:
                h = t_goal - t
            for s in range(1, 6):
                rtmp[:] = rho
                for q in range(s):
                    aa = _DP_A[s, q]
                    if aa != 0.0:
                        rtmp += (h * aa) * k[q]
                _lindblad_rhs(t + _DP_C[s] * h, rtmp, h0, hp, amp, t_center, sigma, jumps, anti, k[s])
            rtmp[:] = rho
            for q in range(6):
                bb = _DP_B5[q]
                if bb != 0.0:
                    rtmp += (h * bb) * k[q]
            _lindblad_rhs(t + h, rtmp, h0, hp, amp, t_center, sigma, jumps, anti, k[6])
            err = 0.0
            for i in range(dim):
                for j in range(dim):
                    acc = 0.0 + 0.0j
                    for q in range(7):
                        eb = _DP_E[q]
                        if eb != 0.0:
                            acc += eb * k[q, i, j]
                    e_ij = h * abs(acc)
                    sc = atol + rtol * max(abs(rho[i, j]), abs(rtmp[i, j]))
                    r = e_ij / sc
                    err += r * r
            err = np.sqrt(err / (dim * dim))
            if err <= 1.0:
                t = t + h
                rho[:] = rtmp
                k[0][:] = k[6]
                n_steps += 1
            if err == 0.0:
                fac = 5.0
            else:
                fac = 0.9 * err ** (-0.2)
                if fac < 0.2:
                    fac = 0.2
                elif fac > 5.0:
                    fac = 5.0
            h = h * fac
            if h > h_max:
                h = h_max
            if h < 1e-13 * span:
                return out, n_steps, 1
        out[i_save] = rho
    return out, n_steps, status


rk45_lindblad_leg = _jit(_rk45_lindblad_leg_impl)
