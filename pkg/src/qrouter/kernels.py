"""Inner loops of the field integrator and the two-level sweep.

Each kernel exists twice: a scalar loop compiled with numba and a vectorized
numpy version. ``advance`` / ``sweep`` dispatch on :mod:`qrouter._accel`.
Both versions follow the same operation order, so they agree to rounding.

Field step (one cell of light travel, ``dt = dx / c``)::

    local ODE over dt/2  ->  shift E by one cell along +x  ->  local ODE over dt/2

The local ODE per cloud cell is the linear system

    E' = i g P
    P' = -(gd + i D) P + i W(t) S + i g n E
    S' = i W(t) P

with ``W`` the real control amplitude, integrated by classical RK4 with ``W``
taken at the stage times. The time profile ``exp(-a**2)`` of the control is
advanced between stage times by the exact recurrence ``G <- G r``,
``r <- r exp(-2 da**2)`` (``da`` the argument change per quarter step) and
re-evaluated directly every few widths of travel. The loss
integrand ``2 |P|**2 / n`` is carried along as an extra RK4 component.
"""

from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit


#: the control argument moves at most this many widths between exact re-seeds
_RESEED_WIDTHS = 2.0
#: cap on the recurrence ratio exponent (only reached for pulses shorter than a step)
_EXP_CAP = 700.0


def reseed_interval(dx, w_c) -> int:
    """Steps between exact evaluations of the control time profile."""
    return max(1, int(_RESEED_WIDTHS * w_c / dx))


@njit(cache=True)
def _seed_nb(G, R, upar, t, c_tilde, w_c, t0c, dt):
    delta = c_tilde * dt / (4.0 * w_c)
    for c in range(upar.shape[0]):
        a = (upar[c] - c_tilde * (t - t0c)) / w_c
        G[c] = math.exp(-a * a)
        R[c] = math.exp(min(2.0 * a * delta - delta * delta, _EXP_CAP))


def _seed_np(G, R, upar, t, c_tilde, w_c, t0c, dt):
    delta = c_tilde * dt / (4.0 * w_c)
    a = (upar - c_tilde * (t - t0c)) / w_c
    G[:] = np.exp(-a * a)
    R[:] = np.exp(np.minimum(2.0 * a * delta - delta * delta, _EXP_CAP))


@njit(cache=True, fastmath={'contract'})
def _half_ode_nb(E, P, S, loss, dens, ci, cj, fperp, G, R, q, h, g, decay, delta):
    lam = complex(-decay, -delta)
    for c in range(ci.shape[0]):
        i = ci[c]
        j = cj[c]
        n = dens[c]
        e0 = E[i, j]
        p0 = P[i, j]
        s0 = S[i, j]
        g1 = G[c]
        r1 = R[c]
        g2 = g1 * r1
        r2 = r1 * q
        g3 = g2 * r2
        G[c] = g3
        R[c] = r2 * q
        w1 = fperp[c] * g1
        w2 = fperp[c] * g2
        w3 = fperp[c] * g3

        ke1 = 1j * g * p0
        kp1 = lam * p0 + 1j * w1 * s0 + 1j * g * n * e0
        ks1 = 1j * w1 * p0
        q1 = p0.real * p0.real + p0.imag * p0.imag

        e = e0 + 0.5 * h * ke1
        p = p0 + 0.5 * h * kp1
        s = s0 + 0.5 * h * ks1
        ke2 = 1j * g * p
        kp2 = lam * p + 1j * w2 * s + 1j * g * n * e
        ks2 = 1j * w2 * p
        q2 = p.real * p.real + p.imag * p.imag

        e = e0 + 0.5 * h * ke2
        p = p0 + 0.5 * h * kp2
        s = s0 + 0.5 * h * ks2
        ke3 = 1j * g * p
        kp3 = lam * p + 1j * w2 * s + 1j * g * n * e
        ks3 = 1j * w2 * p
        q3 = p.real * p.real + p.imag * p.imag

        e = e0 + h * ke3
        p = p0 + h * kp3
        s = s0 + h * ks3
        ke4 = 1j * g * p
        kp4 = lam * p + 1j * w3 * s + 1j * g * n * e
        ks4 = 1j * w3 * p
        q4 = p.real * p.real + p.imag * p.imag

        E[i, j] = e0 + (h / 6.0) * (ke1 + 2.0 * ke2 + 2.0 * ke3 + ke4)
        P[i, j] = p0 + (h / 6.0) * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4)
        S[i, j] = s0 + (h / 6.0) * (ks1 + 2.0 * ks2 + 2.0 * ks3 + ks4)
        loss[c] += (h / 6.0) * 2.0 * decay * (q1 + 2.0 * q2 + 2.0 * q3 + q4) / n


@njit(cache=True)
def _advance_nb(E, P, S, loss, leaked, dens, ci, cj, fperp, upar, across,
                n_steps, t_start, dt, g, decay, delta, c_tilde, w_c, t0c,
                xi_start, dx, w_s, q_over_c, inject, advect, weight, reseed):
    nx, ny = E.shape
    h = 0.5 * dt
    G = np.empty(upar.shape[0])
    R = np.empty(upar.shape[0])
    dq = c_tilde * dt / (4.0 * w_c)
    q = math.exp(-2.0 * dq * dq)
    for k in range(n_steps):
        if k % reseed == 0:
            _seed_nb(G, R, upar, t_start + k * dt, c_tilde, w_c, t0c, dt)
        _half_ode_nb(E, P, S, loss, dens, ci, cj, fperp, G, R, q, h, g, decay, delta)
        if advect:
            out = 0.0
            for j in range(ny):
                v = E[nx - 1, j]
                out += v.real * v.real + v.imag * v.imag
            leaked[0] += out * weight
            for i in range(nx - 1, 0, -1):
                for j in range(ny):
                    E[i, j] = E[i - 1, j]
            if inject:
                xi = xi_start - (k + 1) * dx
                a = xi / w_s
                col = math.exp(-a * a) * complex(math.cos(q_over_c * xi), math.sin(q_over_c * xi))
                for j in range(ny):
                    E[0, j] = across[j] * col
            else:
                for j in range(ny):
                    E[0, j] = 0.0
        _half_ode_nb(E, P, S, loss, dens, ci, cj, fperp, G, R, q, h, g, decay, delta)


def _half_ode_np(E, P, S, loss, dens, ci, cj, fperp, G, R, q, h, g, decay, delta):
    lam = complex(-decay, -delta)
    g1 = G.copy()
    g2 = g1 * R
    r2 = R * q
    g3 = g2 * r2
    G[:] = g3
    R[:] = r2 * q
    w1 = fperp * g1
    w2 = fperp * g2
    w3 = fperp * g3
    e0 = E[ci, cj]
    p0 = P[ci, cj]
    s0 = S[ci, cj]
    gn = g * dens

    ke1 = 1j * g * p0
    kp1 = lam * p0 + 1j * w1 * s0 + 1j * gn * e0
    ks1 = 1j * w1 * p0
    q1 = p0.real * p0.real + p0.imag * p0.imag

    e = e0 + 0.5 * h * ke1
    p = p0 + 0.5 * h * kp1
    s = s0 + 0.5 * h * ks1
    ke2 = 1j * g * p
    kp2 = lam * p + 1j * w2 * s + 1j * gn * e
    ks2 = 1j * w2 * p
    q2 = p.real * p.real + p.imag * p.imag

    e = e0 + 0.5 * h * ke2
    p = p0 + 0.5 * h * kp2
    s = s0 + 0.5 * h * ks2
    ke3 = 1j * g * p
    kp3 = lam * p + 1j * w2 * s + 1j * gn * e
    ks3 = 1j * w2 * p
    q3 = p.real * p.real + p.imag * p.imag

    e = e0 + h * ke3
    p = p0 + h * kp3
    s = s0 + h * ks3
    ke4 = 1j * g * p
    kp4 = lam * p + 1j * w3 * s + 1j * gn * e
    ks4 = 1j * w3 * p
    q4 = p.real * p.real + p.imag * p.imag

    E[ci, cj] = e0 + (h / 6.0) * (ke1 + 2.0 * ke2 + 2.0 * ke3 + ke4)
    P[ci, cj] = p0 + (h / 6.0) * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4)
    S[ci, cj] = s0 + (h / 6.0) * (ks1 + 2.0 * ks2 + 2.0 * ks3 + ks4)
    loss += (h / 6.0) * 2.0 * decay * (q1 + 2.0 * q2 + 2.0 * q3 + q4) / dens


def _advance_np(E, P, S, loss, leaked, dens, ci, cj, fperp, upar, across,
                n_steps, t_start, dt, g, decay, delta, c_tilde, w_c, t0c,
                xi_start, dx, w_s, q_over_c, inject, advect, weight, reseed):
    h = 0.5 * dt
    G = np.empty(upar.shape[0])
    R = np.empty(upar.shape[0])
    dq = c_tilde * dt / (4.0 * w_c)
    q = math.exp(-2.0 * dq * dq)
    for k in range(n_steps):
        if k % reseed == 0:
            _seed_np(G, R, upar, t_start + k * dt, c_tilde, w_c, t0c, dt)
        _half_ode_np(E, P, S, loss, dens, ci, cj, fperp, G, R, q, h, g, decay, delta)
        if advect:
            last = E[-1]
            leaked[0] += float(np.sum(last.real * last.real + last.imag * last.imag)) * weight
            E[1:] = E[:-1]
            if inject:
                xi = xi_start - (k + 1) * dx
                a = xi / w_s
                E[0] = across * (math.exp(-a * a) * complex(math.cos(q_over_c * xi), math.sin(q_over_c * xi)))
            else:
                E[0] = 0.0
        _half_ode_np(E, P, S, loss, dens, ci, cj, fperp, G, R, q, h, g, decay, delta)


def advance(E, P, S, loss, leaked, dens, ci, cj, fperp, upar, across,
            n_steps, t_start, dt, g, decay, delta, c_tilde, w_c, t0c,
            xi_start, dx, w_s, q_over_c, inject, advect, weight, use_numba: bool | None = None):
    """Run ``n_steps`` field steps in place starting at ``t_start``."""
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    fn = _advance_nb if (use_numba and _accel.HAVE_NUMBA) else _advance_np
    fn(E, P, S, loss, leaked, dens, ci, cj, fperp, upar, across,
       n_steps, t_start, dt, g, decay, delta, c_tilde, w_c, t0c,
       xi_start, dx, w_s, q_over_c, inject, advect, weight, reseed_interval(dx, w_c))


# --- two-level sweep ---------------------------------------------------------

@njit(cache=True)
def _sweep_nb(v, eps, b, t_start, dt, n_steps, psi, stride, trace):
    a0 = psi[0]
    a1 = psi[1]
    max_dev = 0.0
    row = 0
    for k in range(n_steps):
        w = eps + b * (t_start + (k + 0.5) * dt)
        om = math.sqrt(v * v + w * w)
        cs = math.cos(om * dt)
        sn = math.sin(om * dt) / om if om > 0 else dt
        # exp(-i (v sx + w sz) dt)
        u00 = complex(cs, -sn * w)
        u11 = complex(cs, sn * w)
        u01 = complex(0.0, -sn * v)
        n0 = u00 * a0 + u01 * a1
        n1 = u01 * a0 + u11 * a1
        a0 = n0
        a1 = n1
        nrm = a0.real * a0.real + a0.imag * a0.imag + a1.real * a1.real + a1.imag * a1.imag
        dev = abs(nrm - 1.0)
        if dev > max_dev:
            max_dev = dev
        if stride > 0 and (k + 1) % stride == 0 and row < trace.shape[0]:
            trace[row, 0] = t_start + (k + 1) * dt
            trace[row, 1] = a0.real
            trace[row, 2] = a0.imag
            trace[row, 3] = a1.real
            trace[row, 4] = a1.imag
            row += 1
    psi[0] = a0
    psi[1] = a1
    return max_dev


def _sweep_np(v, eps, b, t_start, dt, n_steps, psi, stride, trace):
    # step propagators are built in vectorized chunks, then applied in order
    a0 = complex(psi[0])
    a1 = complex(psi[1])
    max_dev = 0.0
    row = 0
    chunk = 65536
    for k0 in range(0, n_steps, chunk):
        k = np.arange(k0, min(n_steps, k0 + chunk))
        w = eps + b * (t_start + (k + 0.5) * dt)
        om = np.sqrt(v * v + w * w)
        cs = np.cos(om * dt)
        sn = np.where(om > 0, np.sin(om * dt) / np.where(om > 0, om, 1.0), dt)
        u00 = (cs - 1j * sn * w).tolist()
        u11 = (cs + 1j * sn * w).tolist()
        u01 = (-1j * sn * v).tolist()
        for m, kk in enumerate(k.tolist()):
            a0, a1 = u00[m] * a0 + u01[m] * a1, u01[m] * a0 + u11[m] * a1
            dev = abs(a0.real * a0.real + a0.imag * a0.imag + a1.real * a1.real + a1.imag * a1.imag - 1.0)
            if dev > max_dev:
                max_dev = dev
            if stride > 0 and (kk + 1) % stride == 0 and row < trace.shape[0]:
                trace[row] = (t_start + (kk + 1) * dt, a0.real, a0.imag, a1.real, a1.imag)
                row += 1
    psi[0] = a0
    psi[1] = a1
    return max_dev


def sweep(v, eps, b, t_start, dt, n_steps, psi, stride, trace, use_numba: bool | None = None) -> float:
    """Propagate ``psi`` in place under ``v sx + (eps + b t) sz``; returns max norm deviation."""
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    fn = _sweep_nb if (use_numba and _accel.HAVE_NUMBA) else _sweep_np
    return float(fn(float(v), float(eps), float(b), float(t_start), float(dt), int(n_steps),
                    psi, int(stride), trace))
