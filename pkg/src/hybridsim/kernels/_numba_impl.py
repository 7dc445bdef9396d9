"""Compiled trajectory kernels (numba).

Same arithmetic as the numpy kernels, written as explicit loops over the
small Hilbert-space dimension so that a whole trajectory runs without
returning to the interpreter.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _matvec(M, v, out):
    d = v.shape[0]
    for i in range(d):
        s = 0j
        for j in range(d):
            s += M[i, j] * v[j]
        out[i] = s


@njit(cache=True)
def _normalize(v):
    s = 0.0
    for i in range(v.shape[0]):
        s += v[i].real * v[i].real + v[i].imag * v[i].imag
    s = np.sqrt(s)
    for i in range(v.shape[0]):
        v[i] = v[i] / s


@njit(cache=True)
def jump_trajectory(psi0, x0, H, Gamma, ops, dest, alpha, nch, diag, u, dt, sample_steps, dynamic,
                    out_psi, out_x, out_jumps, events):
    """Run one jump trajectory; returns ``(n_events, max(T * dt))``.

    ``events`` rows are (step, source, destination, alpha); pass an array
    with zero rows to disable logging.
    """
    d = psi0.shape[0]
    C = ops.shape[1]
    n_steps = u.shape[0]
    psi = psi0.copy()
    x = x0
    jumps = 0
    n_events = 0
    max_rate_dt = 0.0
    v = np.empty((C, d), dtype=np.complex128)
    ell = np.zeros(C, dtype=np.complex128)
    rates = np.zeros(C)
    M = np.empty((d, d), dtype=np.complex128)
    k1 = np.empty(d, dtype=np.complex128)
    k2 = np.empty(d, dtype=np.complex128)
    k3 = np.empty(d, dtype=np.complex128)
    k4 = np.empty(d, dtype=np.complex128)
    tmp = np.empty(d, dtype=np.complex128)
    k = 0
    S = sample_steps.shape[0]
    for step in range(n_steps + 1):
        while k < S and sample_steps[k] == step:
            out_psi[k, :] = psi
            out_x[k] = x
            out_jumps[k] = jumps
            k += 1
        if step == n_steps:
            break
        n = nch[x]
        total = 0.0
        for c in range(n):
            _matvec(ops[x, c], psi, tmp)
            e = 0j
            if dynamic and diag[x, c]:
                for i in range(d):
                    e += np.conj(psi[i]) * tmp[i]
            ell[c] = e
            r = 0.0
            for i in range(d):
                v[c, i] = tmp[i] - e * psi[i]
                r += v[c, i].real * v[c, i].real + v[c, i].imag * v[c, i].imag
            rates[c] = r
            total += r
        if total * dt > max_rate_dt:
            max_rate_dt = total * dt
        if u[step, 0] < total * dt:
            target = u[step, 1] * total
            cum = 0.0
            chosen = -1
            for c in range(n):
                cum += rates[c]
                if cum > target and rates[c] > 0.0:
                    chosen = c
                    break
            if chosen < 0:
                for c in range(n - 1, -1, -1):
                    if rates[c] > 0.0:
                        chosen = c
                        break
            s = np.sqrt(rates[chosen])
            for i in range(d):
                psi[i] = v[chosen, i] / s
            _normalize(psi)
            if n_events < events.shape[0]:
                events[n_events, 0] = step
                events[n_events, 1] = x
                events[n_events, 2] = dest[x, chosen]
                events[n_events, 3] = alpha[x, chosen]
                n_events += 1
            x = dest[x, chosen]
            jumps += 1
        else:
            sq = 0.0
            for c in range(n):
                sq += ell[c].real * ell[c].real + ell[c].imag * ell[c].imag
            for i in range(d):
                for j in range(d):
                    m = -1j * H[x, i, j] - 0.5 * Gamma[x, i, j]
                    for c in range(n):
                        if ell[c] != 0:
                            m += np.conj(ell[c]) * ops[x, c, i, j]
                    M[i, j] = m
                M[i, i] -= 0.5 * sq
            _matvec(M, psi, k1)
            for i in range(d):
                tmp[i] = psi[i] + 0.5 * dt * k1[i]
            _matvec(M, tmp, k2)
            for i in range(d):
                tmp[i] = psi[i] + 0.5 * dt * k2[i]
            _matvec(M, tmp, k3)
            for i in range(d):
                tmp[i] = psi[i] + dt * k3[i]
            _matvec(M, tmp, k4)
            for i in range(d):
                psi[i] = psi[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            _normalize(psi)
    return n_events, max_rate_dt


@njit(cache=True)
def pure_step(psi, x, H, L, DQ, G, V, dxi, dW, dt):
    Mb, d = psi.shape
    A = L.shape[1]
    N = x.shape[1]
    new = np.empty_like(psi)
    xn = np.empty_like(x)
    Lpsi = np.empty((A, d), dtype=np.complex128)
    Lc = np.empty((A, d), dtype=np.complex128)
    ell = np.empty(A, dtype=np.complex128)
    w = np.empty((A, d), dtype=np.complex128)
    c = np.empty(A, dtype=np.complex128)
    for m in range(Mb):
        for a in range(A):
            e = 0j
            for i in range(d):
                s = 0j
                for j in range(d):
                    s += L[m, a, i, j] * psi[m, j]
                Lpsi[a, i] = s
                e += np.conj(psi[m, i]) * s
            ell[a] = e
            for i in range(d):
                Lc[a, i] = Lpsi[a, i] - e * psi[m, i]
        for b in range(A):
            cb = 0j
            for i in range(d):
                s = 0j
                for a in range(A):
                    s += DQ[m, b, a] * Lc[a, i]
                w[b, i] = s
            for a in range(A):
                cb += DQ[m, a, b] * np.conj(ell[a])
            c[b] = cb
        for i in range(d):
            # quad = sum_b (L_b^dag - conj(l_b)) w_b ; X psi ; X^dag psi
            q = 0j
            xp = 0j
            xd = 0j
            for b in range(A):
                s = 0j
                sd = 0j
                for j in range(d):
                    s += np.conj(L[m, b, j, i]) * w[b, j]
                    sd += np.conj(L[m, b, j, i]) * psi[m, j]
                q += s - np.conj(ell[b]) * w[b, i]
                xp += c[b] * Lpsi[b, i]
                xd += np.conj(c[b]) * sd
            hp = 0j
            for j in range(d):
                hp += H[m, i, j] * psi[m, j]
            noise = 0j
            for a in range(A):
                noise += np.conj(dxi[m, a]) * Lc[a, i]
            new[m, i] = psi[m, i] + (-1j * hp - 0.5 * (q - xp + xd)) * dt + noise
        s = 0.0
        for i in range(d):
            s += new[m, i].real * new[m, i].real + new[m, i].imag * new[m, i].imag
        s = np.sqrt(s)
        for i in range(d):
            new[m, i] = new[m, i] / s
        for n in range(N):
            r = 0.0
            for a in range(A):
                r += (np.conj(G[m, n, a]) * ell[a]).real
            xn[m, n] = x[m, n] + (V[m, n] - 2.0 * r) * dt - dW[m, n]
    return new, xn


@njit(cache=True)
def mixed_step(sigma, x, H, L, DQ, T, G, V, dxi, dW, dt):
    Mb, d = sigma.shape[0], sigma.shape[1]
    A = L.shape[1]
    N = x.shape[1]
    new = np.empty_like(sigma)
    xn = np.empty_like(x)
    Lc = np.empty((A, d, d), dtype=np.complex128)
    ell = np.empty(A, dtype=np.complex128)
    K = np.empty((d, d), dtype=np.complex128)
    KS = np.empty((d, d), dtype=np.complex128)
    LL = np.empty((d, d), dtype=np.complex128)
    for m in range(Mb):
        for a in range(A):
            e = 0j
            for i in range(d):
                for j in range(d):
                    e += L[m, a, i, j] * sigma[m, j, i]
            ell[a] = e
            for i in range(d):
                for j in range(d):
                    Lc[a, i, j] = L[m, a, i, j]
                Lc[a, i, i] -= e
        for i in range(d):
            for j in range(d):
                q = 0j
                xx = 0j
                for a in range(A):
                    for b in range(A):
                        t = T[m, b, a]
                        if t == 0:
                            continue
                        s = 0j
                        for k in range(d):
                            s += np.conj(Lc[b, k, i]) * Lc[a, k, j]
                        q += t * s
                        # X - X^dag with X = sum T[b,a] conj(l_b) L_a
                        xx += t * np.conj(ell[b]) * L[m, a, i, j] - np.conj(t) * ell[b] * np.conj(L[m, a, j, i])
                noise = 0j
                for a in range(A):
                    noise += np.conj(dxi[m, a]) * Lc[a, i, j]
                K[i, j] = (-1j * H[m, i, j] - 0.5 * (q - xx)) * dt + noise
            K[i, i] += 1.0
        for i in range(d):
            for j in range(d):
                s = 0j
                for k in range(d):
                    s += K[i, k] * sigma[m, k, j]
                KS[i, j] = s
        for i in range(d):
            for j in range(d):
                s = 0j
                for k in range(d):
                    s += KS[i, k] * np.conj(K[j, k])
                new[m, i, j] = s
        for a in range(A):
            for b in range(A):
                r = DQ[m, b, a] - T[m, b, a]
                if r == 0:
                    continue
                # r * (L_a sigma L_b^dag - 1/2 {L_b^dag L_a, sigma}) * dt
                for i in range(d):
                    for j in range(d):
                        s = 0j
                        for k in range(d):
                            s += L[m, a, i, k] * sigma[m, k, j]
                        KS[i, j] = s
                        s2 = 0j
                        for k in range(d):
                            s2 += np.conj(L[m, b, k, i]) * L[m, a, k, j]
                        LL[i, j] = s2
                for i in range(d):
                    for j in range(d):
                        g = 0j
                        for k in range(d):
                            g += KS[i, k] * np.conj(L[m, b, j, k])
                        ac = 0j
                        for k in range(d):
                            ac += LL[i, k] * sigma[m, k, j] + sigma[m, i, k] * LL[k, j]
                        new[m, i, j] += r * (g - 0.5 * ac) * dt
        tr = 0.0
        for i in range(d):
            for j in range(i, d):
                h = 0.5 * (new[m, i, j] + np.conj(new[m, j, i]))
                new[m, i, j] = h
                new[m, j, i] = np.conj(h)
            tr += new[m, i, i].real
        for i in range(d):
            for j in range(d):
                new[m, i, j] = new[m, i, j] / tr
        for n in range(N):
            r = 0.0
            for a in range(A):
                r += (np.conj(G[m, n, a]) * ell[a]).real
            xn[m, n] = x[m, n] + (V[m, n] - 2.0 * r) * dt - dW[m, n]
    return new, xn
