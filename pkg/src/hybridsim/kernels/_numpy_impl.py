"""Batched pure-numpy trajectory kernels.

These consume the same pre-drawn random numbers as the compiled kernels
and are used when numba is unavailable or disabled.
"""
import numpy as np


def _rk4_linear(M, psi, dt):
    # M (B, d, d), psi (B, d)
    k1 = np.einsum("bij,bj->bi", M, psi)
    k2 = np.einsum("bij,bj->bi", M, psi + 0.5 * dt * k1)
    k3 = np.einsum("bij,bj->bi", M, psi + 0.5 * dt * k2)
    k4 = np.einsum("bij,bj->bi", M, psi + dt * k3)
    return psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def jump_batch(psi0, x0, H, Gamma, ops, dest, alpha, nch, diag, u, dt, sample_steps, dynamic,
               out_psi, out_x, out_jumps, event_log=None):
    """Advance a batch of jump trajectories over ``u.shape[1]`` steps.

    ``psi0`` (B, d), ``x0`` (B,), ``u`` (B, n_steps, 2) uniforms.  Outputs
    are written at ``sample_steps`` (sorted).  Returns ``max(T * dt)``.
    If ``event_log`` is a list, (trajectory, step, source, destination,
    alpha) tuples are appended to it.
    """
    B, d = psi0.shape
    n_steps = u.shape[1]
    C = ops.shape[1]
    psi = psi0.copy()
    x = x0.copy()
    jumps = np.zeros(B, dtype=np.int64)
    eye = np.eye(d)
    max_rate_dt = 0.0
    k = 0
    S = len(sample_steps)
    for step in range(n_steps + 1):
        while k < S and sample_steps[k] == step:
            out_psi[:, k] = psi
            out_x[:, k] = x
            out_jumps[:, k] = jumps
            k += 1
        if step == n_steps:
            break
        op = ops[x]  # (B, C, d, d)
        v = np.einsum("bcij,bj->bci", op, psi)
        active = np.arange(C)[None, :] < nch[x][:, None]
        ell = np.zeros((B, C), dtype=complex)
        if dynamic:
            isdiag = diag[x] & active
            ell = np.where(isdiag, np.einsum("bi,bci->bc", psi.conj(), v), 0.0)
            v = v - ell[:, :, None] * psi[:, None, :]
        rates = np.where(active, np.sum(np.abs(v) ** 2, axis=-1), 0.0)
        total = rates.sum(axis=1)
        if total.size:
            max_rate_dt = max(max_rate_dt, float(total.max() * dt))
        jump = u[:, step, 0] < total * dt
        if np.any(jump):
            jb = np.nonzero(jump)[0]
            cum = np.cumsum(rates[jb], axis=1)
            target = u[jb, step, 1] * total[jb]
            c = np.sum(cum <= target[:, None], axis=1)
            c = np.minimum(c, nch[x[jb]] - 1)
            for i in np.nonzero(rates[jb, c] <= 0.0)[0]:
                # round-off pushed the target past the last live channel
                c[i] = np.nonzero(rates[jb[i]] > 0.0)[0][-1]
            newpsi = v[jb, c] / np.sqrt(rates[jb, c])[:, None]
            psi[jb] = newpsi / np.linalg.norm(newpsi, axis=1)[:, None]
            if event_log is not None:
                for b, src, cc in zip(jb, x[jb], c):
                    event_log.append((int(b), step, int(src), int(dest[src, cc]), int(alpha[src, cc])))
            x[jb] = dest[x[jb], c]
            jumps[jb] += 1
        drift = ~jump
        if np.any(drift):
            db = np.nonzero(drift)[0]
            xd = x[db]
            M = -1j * H[xd] - 0.5 * Gamma[xd]
            if dynamic:
                e = ell[db]
                M = M + np.einsum("bc,bcij->bij", e.conj(), ops[xd]) - 0.5 * np.sum(np.abs(e) ** 2, axis=1)[:, None, None] * eye
            p = _rk4_linear(M, psi[db], dt)
            psi[db] = p / np.linalg.norm(p, axis=1)[:, None]
    return max_rate_dt


def diffusive_drift(psi, L, G, V):
    """Classical drift ``V - 2 Re(conj(G) <L>)`` for pure states."""
    Lpsi = np.matmul(L, psi[:, None, :, None])[..., 0]
    ell = np.einsum("mi,mai->ma", psi.conj(), Lpsi)
    return V - 2.0 * np.einsum("mna,ma->mn", G.conj(), ell).real


def pure_step(psi, x, H, L, DQ, G, V, dxi, dW, dt):
    """One Euler-Maruyama step of the pure diffusive unraveling (batched).

    Returns ``(psi', x')`` with ``psi'`` renormalized.
    """
    Lpsi = np.einsum("maij,mj->mai", L, psi)
    ell = np.einsum("mi,mai->ma", psi.conj(), Lpsi)
    Lc_psi = Lpsi - ell[:, :, None] * psi[:, None, :]
    w = np.einsum("mba,mai->mbi", DQ, Lc_psi)
    quad = np.einsum("mbji,mbj->mi", L.conj(), w) - np.einsum("mb,mbi->mi", ell.conj(), w)
    c = np.einsum("mba,mb->ma", DQ, ell.conj())
    Xpsi = np.einsum("ma,mai->mi", c, Lpsi)
    Xdag_psi = np.einsum("ma,maji,mj->mi", c.conj(), L.conj(), psi)
    drift = -1j * np.einsum("mij,mj->mi", H, psi) - 0.5 * (quad - Xpsi + Xdag_psi)
    new = psi + drift * dt + np.einsum("ma,mai->mi", dxi.conj(), Lc_psi)
    new = new / np.linalg.norm(new, axis=1)[:, None]
    xn = x + (V - 2.0 * np.einsum("mna,ma->mn", G.conj(), ell).real) * dt - dW
    return new, xn


def mixed_step(sigma, x, H, L, DQ, T, G, V, dxi, dW, dt):
    """One step of the mixed-state unraveling in Kraus form (batched).

    ``T`` is the noise target ``E[dxi dxi^dag] / dt``; the remainder
    ``DQ - T`` acts as deterministic decoherence.
    """
    d = sigma.shape[1]
    eye = np.eye(d)
    ell = np.einsum("maij,mji->ma", L, sigma)
    Lc = L - ell[:, :, None, None] * eye
    Q = np.einsum("mba,mbji,majk->mik", T, Lc.conj(), Lc)
    c = np.einsum("mba,mb->ma", T, ell.conj())
    X = np.einsum("ma,maij->mij", c, L)
    Kgen = -1j * H - 0.5 * (Q - X + np.conj(np.swapaxes(X, 1, 2)))
    K = eye + Kgen * dt + np.einsum("ma,maij->mij", dxi.conj(), Lc)
    new = K @ sigma @ np.conj(np.swapaxes(K, 1, 2))
    R = DQ - T
    if np.any(R != 0):
        Lh = np.conj(np.swapaxes(L, 2, 3))
        gain = np.einsum("mba,maij,mjk,mbkl->mil", R, L, sigma, Lh)
        LL = np.einsum("mba,mbij,majk->mik", R, Lh, L)
        new = new + dt * (gain - 0.5 * (LL @ sigma + sigma @ LL))
    new = 0.5 * (new + np.conj(np.swapaxes(new, 1, 2)))
    new = new / np.trace(new, axis1=1, axis2=2).real[:, None, None]
    xn = x + (V - 2.0 * np.einsum("mna,ma->mn", G.conj(), ell).real) * dt - dW
    return new, xn
