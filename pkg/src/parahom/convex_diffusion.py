"""Finite-dimensional convex-potential diffusion in miniature.

The R^k Langevin equation d phi = -(1/2) grad W(phi) dt + dB with a
uniformly convex W: Euler--Maruyama paths, the explicit Gaussian
solution for quadratic W, stationary-moment checks against
A^{-1} e^{-A tau / 2}, a self-normalized Feynman--Kac estimator of
invariant-measure expectations over driftless Brownian paths, and a
log-concavity probe of the discretized path action.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError

# -- potentials -----------------------------------------------------------------


@dataclass
class ConvexPotential:
    """Uniformly convex potential on R^k with callable derivatives.

    ``value``, ``grad``, ``hess`` map (..., k) arrays to values,
    gradients, and (..., k, k) Hessians.  ``lam`` and ``Lam`` bound the
    Hessian spectrum.  For quadratic W = phi.A phi/2 - b.phi the pair
    (A, b) is stored in ``quadratic``.
    """

    k: int
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    lam: float
    Lam: float
    quadratic: Optional[tuple] = None

    def __post_init__(self):
        if not 0 < self.lam <= self.Lam:
            raise ConfigError(f"need 0 < lam <= Lam, got ({self.lam}, {self.Lam})")

    def laplacian(self, phi: np.ndarray) -> np.ndarray:
        """trace W''(phi)."""
        return np.trace(self.hess(phi), axis1=-2, axis2=-1)

    def hessian_window_check(self, points: np.ndarray, tol: float = 1e-10) -> bool:
        """Spot-check lam I <= W'' <= Lam I on the given sample points."""
        eig = np.linalg.eigvalsh(self.hess(points))
        return bool(eig.min() >= self.lam - tol and eig.max() <= self.Lam + tol)


def quadratic_potential(A, b=None) -> ConvexPotential:
    """W(phi) = phi.A phi / 2 - b.phi for symmetric positive definite A."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    k = A.shape[0]
    b = np.zeros(k) if b is None else np.asarray(b, dtype=float)
    if not np.allclose(A, A.T):
        raise ConfigError("A must be symmetric")
    eig = np.linalg.eigvalsh(A)
    if eig.min() <= 0:
        raise ConfigError("A must be positive definite")
    return ConvexPotential(
        k=k,
        value=lambda p: 0.5 * np.einsum("...i,ij,...j->...", p, A, p)
        - np.einsum("...i,i->...", p, b),
        grad=lambda p: np.einsum("ij,...j->...i", A, p) - b,
        hess=lambda p: np.broadcast_to(A, np.shape(p) + (k,)).copy(),
        lam=float(eig.min()),
        Lam=float(eig.max()),
        quadratic=(A, b),
    )


def cosine_perturbed_potential(eps: float) -> ConvexPotential:
    """k=1 potential W(phi) = phi^2/2 + eps cos(phi), convex for |eps| < 1."""
    if abs(eps) >= 1:
        raise ConfigError("need |eps| < 1 for uniform convexity")
    return ConvexPotential(
        k=1,
        value=lambda p: 0.5 * np.asarray(p)[..., 0] ** 2
        + eps * np.cos(np.asarray(p)[..., 0]),
        grad=lambda p: np.stack([np.asarray(p)[..., 0] - eps * np.sin(np.asarray(p)[..., 0])], axis=-1),
        hess=lambda p: (1.0 - eps * np.cos(np.asarray(p)[..., 0]))[..., None, None],
        lam=1.0 - abs(eps),
        Lam=1.0 + abs(eps),
    )


# -- paths ------------------------------------------------------------------------


@dataclass
class PathSample:
    """Discretized diffusion path phi(t_i) in R^k, started at 0."""

    dt: float
    values: np.ndarray  # (n_steps + 1, k)
    provenance: dict = field(default_factory=dict)

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.shape[0])


def convex_diffusion_simulate(
    W: ConvexPotential,
    dt: float,
    n_steps: int,
    seed: int = 0,
    noise_scale: float = 1.0,
    phi0: Optional[np.ndarray] = None,
    return_increments: bool = False,
):
    """Euler--Maruyama path of d phi = -(1/2) grad W dt + dB from 0.

    Requires dt <= 1/Lam; deterministic in (config, seed);
    ``noise_scale=0`` is the deterministic-flow test hook.
    """
    if dt > 1.0 / W.Lam * (1 + 1e-12):
        raise ConfigError(f"dt={dt} exceeds the stability bound 1/Lam={1.0 / W.Lam}")
    rng = np.random.default_rng(seed)
    incr = noise_scale * np.sqrt(dt) * rng.standard_normal((n_steps, W.k))
    values = np.empty((n_steps + 1, W.k))
    values[0] = 0.0 if phi0 is None else np.asarray(phi0, dtype=float)
    for i in range(n_steps):
        phi = values[i]
        values[i + 1] = phi - 0.5 * dt * W.grad(phi) + incr[i]
    prov = {"seed": int(seed), "noise_scale": float(noise_scale), "scheme": "em"}
    path = PathSample(dt, values, prov)
    return (path, incr) if return_increments else path


def exact_gaussian_path(A, b, dt: float, increments: np.ndarray, phi0=None) -> np.ndarray:
    """Exponential-integrator solution of the quadratic diffusion driven by
    the given increments: phi_{i+1} = e^{-A dt/2}(phi_i + dB_i) + (I -
    e^{-A dt/2}) A^{-1} b.  Pathwise within O(dt) of the Euler path with
    the same increments."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    k = A.shape[0]
    b = np.zeros(k) if b is None else np.asarray(b, dtype=float)
    E = expm(-A * dt / 2.0)
    mean_shift = (np.eye(k) - E) @ np.linalg.solve(A, b)
    values = np.empty((increments.shape[0] + 1, k))
    values[0] = 0.0 if phi0 is None else np.asarray(phi0, dtype=float)
    for i in range(increments.shape[0]):
        values[i + 1] = E @ (values[i] + increments[i]) + mean_shift
    return values


# -- stationary moments --------------------------------------------------------------


def stationary_moments_check(
    A,
    b,
    lags,
    dt: float,
    n_keep: int,
    seed: int = 0,
    burn_in_time: Optional[float] = None,
    n_batches: int = 20,
) -> dict:
    """Empirical stationary mean and lag covariances of the quadratic
    diffusion against A^{-1} b and A^{-1} e^{-A tau / 2}.

    Time averages along one long path; batch means give the sigma used
    in the 3-sigma verdicts.  ``lags`` are in time units and are rounded
    to grid multiples.
    """
    W = quadratic_potential(A, b)
    A_m, b_v = W.quadratic
    if burn_in_time is None:
        burn_in_time = 10.0 / W.lam
    burn = int(np.ceil(burn_in_time / dt))
    max_lag = int(np.ceil(max(lags) / dt)) if len(lags) else 0
    path = convex_diffusion_simulate(W, dt, burn + n_keep + max_lag, seed=seed)
    vals = path.values[burn:]
    mean_hat = vals.mean(axis=0)
    mean_oracle = np.linalg.solve(A_m, b_v)
    k = W.k
    cov_inf = np.linalg.inv(A_m)
    results = []
    batches = np.array_split(np.arange(n_keep), n_batches)
    centered = vals - mean_hat
    for tau in lags:
        ell = int(round(tau / dt))
        oracle = cov_inf @ expm(-A_m * ell * dt / 2.0)
        prods = np.einsum(
            "ti,tj->tij", centered[: n_keep], centered[ell : n_keep + ell]
        )
        cov_hat = prods.mean(axis=0)
        per_batch = np.stack([prods[idx].mean(axis=0) for idx in batches])
        sigma = per_batch.std(axis=0, ddof=1) / np.sqrt(len(batches))
        passes = bool(np.all(np.abs(cov_hat - oracle) <= 3.0 * sigma + 1e-12))
        results.append(
            {"lag": float(ell * dt), "cov_hat": cov_hat, "oracle": oracle,
             "sigma": sigma, "passes": passes}
        )
    mean_batch = np.stack([vals[: n_keep][idx].mean(axis=0) for idx in batches])
    mean_sigma = mean_batch.std(axis=0, ddof=1) / np.sqrt(len(batches))
    return {
        "mean_hat": mean_hat,
        "mean_oracle": mean_oracle,
        "mean_sigma": mean_sigma,
        "mean_passes": bool(
            np.all(np.abs(mean_hat - mean_oracle) <= 3.0 * mean_sigma + 1e-12)
        ),
        "lags": results,
    }


# -- Feynman--Kac estimator ------------------------------------------------------------


def feynman_kac_estimate(
    W: ConvexPotential,
    f: Callable[[np.ndarray], np.ndarray],
    T: float,
    n_paths: int,
    dt: float,
    seed: int = 0,
) -> dict:
    """Self-normalized importance-sampling estimate of the
    invariant-measure expectation of f.

    Brownian paths B from 0 are reweighted by
    exp{ -(1/2) int_0^T [ -(1/2) Lap W(B) + (1/4)|grad W(B)|^2 ] ds }
    times e^{-W(B(T))/2}; the ratio estimate converges to <f> as T and
    the path count grow.  The effective sample size is reported and the
    result flagged when it falls under 5 percent of the paths.
    """
    n_steps = int(np.ceil(T / dt))
    rng = np.random.default_rng(seed)
    B = np.zeros((n_paths, W.k))
    log_w = np.zeros(n_paths)
    for _ in range(n_steps):
        pot = -0.5 * W.laplacian(B) + 0.25 * (W.grad(B) ** 2).sum(axis=-1)
        log_w -= 0.5 * dt * pot
        B = B + np.sqrt(dt) * rng.standard_normal((n_paths, W.k))
    log_w -= 0.5 * W.value(B)
    log_w -= log_w.max()
    w = np.exp(log_w)
    fx = np.asarray(f(B), dtype=float)
    estimate = float((w * fx).sum() / w.sum())
    ess = float(w.sum() ** 2 / (w**2).sum())
    # delta-method standard error of the ratio estimator
    wn = w / w.sum()
    sigma = float(np.sqrt((wn**2 * (fx - estimate) ** 2).sum()))
    return {
        "estimate": estimate,
        "sigma": sigma,
        "ess": ess,
        "degenerate": bool(ess < 0.05 * n_paths),
        "n_paths": n_paths,
    }


# -- path-action log-concavity probe ------------------------------------------------


def _action_potential(W: ConvexPotential, phi: np.ndarray) -> np.ndarray:
    """U(phi) = -(1/2) Lap W + (1/4) |grad W|^2, pointwise on (..., k)."""
    return -0.5 * W.laplacian(phi) + 0.25 * (W.grad(phi) ** 2).sum(axis=-1)


def path_action_hessian_probe(
    W: ConvexPotential, path: np.ndarray, h: float, tol: float = 1e-6
) -> dict:
    """Minimum eigenvalue of the discretized path-action Hessian.

    The action on a clamped window is
    S = sum_i h [ (1/2)|(phi_{i+1} - phi_i)/h|^2 + U(phi_i) ]; its
    Hessian in the interior path variables is the (positive) discrete
    kinetic form plus h diag U''(phi_i), the latter evaluated by central
    finite differences.  ``log_concave`` is true when the minimum
    eigenvalue is >= -tol.
    """
    path = np.asarray(path, dtype=float)
    if path.ndim == 1:
        path = path[:, None]
    n_pts, k = path.shape
    if n_pts < 3:
        raise ConfigError("need at least one interior path point")
    interior = path[1:-1]
    n_int = n_pts - 2
    dim = n_int * k
    H = np.zeros((dim, dim))
    # kinetic part: (1/h) * (2 I on diagonal blocks, -I on neighbors)
    for i in range(n_int):
        sl = slice(i * k, (i + 1) * k)
        H[sl, sl] += 2.0 / h * np.eye(k)
        if i + 1 < n_int:
            sl2 = slice((i + 1) * k, (i + 2) * k)
            H[sl, sl2] += -1.0 / h * np.eye(k)
            H[sl2, sl] += -1.0 / h * np.eye(k)
    # potential part: h * numerical Hessian of U at each interior point
    step = 1e-5
    for i in range(n_int):
        p = interior[i]
        Hu = np.empty((k, k))
        for a in range(k):
            for c in range(a, k):
                pa = np.zeros(k); pa[a] = step
                pc = np.zeros(k); pc[c] = step
                val = (
                    _action_potential(W, p + pa + pc)
                    - _action_potential(W, p + pa - pc)
                    - _action_potential(W, p - pa + pc)
                    + _action_potential(W, p - pa - pc)
                ) / (4.0 * step * step)
                Hu[a, c] = Hu[c, a] = val
        sl = slice(i * k, (i + 1) * k)
        H[sl, sl] += h * Hu
    H = 0.5 * (H + H.T)
    min_eig = float(np.linalg.eigvalsh(H).min())
    return {
        "min_eigenvalue": min_eig,
        "log_concave": bool(min_eig >= -tol),
        "hessian": H,
    }
