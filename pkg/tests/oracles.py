"""Independent numerical oracles shared by module and acceptance tests.

The proximal oracle minimizes tau * ||Z||_* + 0.5 * ||A - Z||_F^2 by
graduated smoothing: the nuclear norm is replaced by the spectral
function sum sqrt(lambda_i^2 + eps^2), minimized over the real
Hermitian parameters with eps lowered geometrically and each stage
warm-started from the previous one.  Each stage runs damped Newton
with the exact spectral Hessian (divided differences of the smoothed
absolute value across eigenvalue pairs), which stays quadratically
convergent where first-order methods stall on the tau / eps curvature
near the smoothed kinks.
"""

import numpy as np
from scipy import optimize


def params_to_hermitian(theta, n):
    a = np.zeros((n, n), dtype=complex)
    pos = 0
    for i in range(n):
        a[i, i] = theta[pos]
        pos += 1
    for i in range(n):
        for j in range(i + 1, n):
            a[i, j] = theta[pos] + 1j * theta[pos + 1]
            a[j, i] = theta[pos] - 1j * theta[pos + 1]
            pos += 2
    return a


def hermitian_to_params(a):
    n = a.shape[0]
    theta = [a[i, i].real for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            theta.extend([a[i, j].real, a[i, j].imag])
    return np.array(theta)


def _grad_to_params(g):
    # Directional derivatives of a spectral cost along the Hermitian
    # basis matrices of the real parameterization; g is Hermitian.
    n = g.shape[0]
    out = [g[i, i].real for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            out.extend([2.0 * g[i, j].real, 2.0 * g[i, j].imag])
    return np.array(out)


def _spectral_hessian(z, tau, eps, basis):
    # Hessian of the smoothed objective over the real parameters.  The
    # off-diagonal entries of gamma are divided differences of the
    # smoothed absolute value phi(t) = tau * t / sqrt(t^2 + eps^2),
    # collapsing to phi' on (near-)degenerate eigenvalue pairs.
    lam, u = np.linalg.eigh(z)
    smooth = np.sqrt(lam**2 + eps**2)
    phi = tau * lam / smooth
    dphi = tau * eps**2 / smooth**3
    diff_l = lam[:, None] - lam[None, :]
    diff_p = phi[:, None] - phi[None, :]
    tiny = np.abs(diff_l) < 1e-12
    gamma = np.where(
        tiny,
        0.5 * (dphi[:, None] + dphi[None, :]),
        diff_p / np.where(tiny, 1.0, diff_l),
    )
    dim = len(basis)
    h = np.empty((dim, dim))
    for k in range(dim):
        act = u @ (gamma * (np.conj(u.T) @ basis[k] @ u)) @ np.conj(u.T)
        h[:, k] = _grad_to_params(act + basis[k])
    return 0.5 * (h + h.T)


def prox_oracle(a, tau):
    """Numerical minimizer of the nuclear-norm proximal objective.

    The quadratic term makes the objective strongly convex with modulus
    one, so the gradient norm bounds the distance to the stage optimum.
    Near an eigenvalue of magnitude close to tau the smoothing bias is
    amplified to roughly eps * sqrt(tau / gap), so the ladder must reach
    eps = 1e-8; at that depth the curvature ratio tau / eps defeats
    quasi-Newton line searches, hence the exact-Hessian Newton polish.
    """
    n = a.shape[0]
    dim = n * n
    basis = [params_to_hermitian(np.eye(dim)[k], n) for k in range(dim)]
    theta = hermitian_to_params(a)
    for eps in (1e-2, 1e-4, 1e-6, 1e-8):

        def cost_grad(th):
            z = params_to_hermitian(th, n)
            lam, u = np.linalg.eigh(z)
            smooth = np.sqrt(lam**2 + eps**2)
            c = tau * smooth.sum() + 0.5 * np.linalg.norm(a - z) ** 2
            g = (u * (tau * lam / smooth)) @ np.conj(u.T) + (z - a)
            return c, _grad_to_params(g)

        if eps > 1e-5:
            res = optimize.minimize(
                cost_grad,
                theta,
                jac=True,
                method="L-BFGS-B",
                options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-10},
            )
            theta = res.x
        c, g = cost_grad(theta)
        for _ in range(80):
            if np.max(np.abs(g)) <= 1e-11:
                break
            h = _spectral_hessian(params_to_hermitian(theta, n), tau, eps, basis)
            try:
                d = np.linalg.solve(h + 1e-12 * np.eye(dim), -g)
            except np.linalg.LinAlgError:
                d = -g
            if g @ d > 0:
                d = -g
            t = 1.0
            for _ in range(50):
                c_new, g_new = cost_grad(theta + t * d)
                if c_new <= c + 1e-4 * t * (g @ d):
                    break
                t *= 0.5
            theta = theta + t * d
            c, g = c_new, g_new
    return params_to_hermitian(theta, n)
