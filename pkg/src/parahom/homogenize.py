"""Corrector problems, the effective coefficient q(xi, eta), and rate fits.

A space-time periodic coefficient sample stands in for the stationary
ensemble: the abstract shift derivatives become xi-twisted periodic
lattice shifts plus periodic backward time differencing, and ensemble
averages become space-time sample means (optionally averaged over
independent samples).  On that realization this module solves the
corrector equation

    (eta + D_t) Phi + dxi* a dxi Phi = -P dxi* a,

forms q(xi, eta) = <a> + <a dxi Phi>, builds the same matrix through the
Neumann series in the contrast b = I - a/Lam with the explicit shift
operator T_{xi,eta}, extrapolates a_hom = lim_{eta->0} q(0, eta), and
fits empirical homogenization rates.

The right side carries the mean-zero projection P so that constant
coefficients yield Phi = 0 for every xi; at xi = 0 the projection is a
no-op because dxi* of anything is mean-free there.

The periodic time derivative is the backward difference; its symbol has
nonnegative real part, which is what makes T_{xi,eta} a contraction mode
by mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.sparse import csr_matrix, eye as sparse_eye, kron as sparse_kron
from scipy.sparse.linalg import splu

from .errors import ConfigError, IntegrityError
from .lattice import PeriodicCube, heat_kernel_1d
from .parabolic import CoefficientField, solve_forward, constant_coefficients


# -- twisted shift calculus on a periodic sample ------------------------------


def e_vector(xi) -> np.ndarray:
    """The vector e(xi) with components e^{-i xi_j} - 1 (twisted gradient
    of the constant function 1)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return np.exp(-1j * xi) - 1.0


def twisted_shift_symbols(cube: PeriodicCube, xi) -> np.ndarray:
    """Fourier symbols d_j(k) = e^{-i xi_j + 2 pi i k_j / L} - 1 of the
    twisted differences, shape (d,) + cube.shape."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    phase = np.exp(2j * np.pi * np.fft.fftfreq(cube.L))
    out = np.empty((cube.d,) + cube.shape, dtype=complex)
    for j in range(cube.d):
        shape = [1] * cube.d
        shape[j] = cube.L
        out[j] = np.exp(-1j * xi[j]) * phase.reshape(shape) - 1.0
    return out


def time_symbols(n_times: int, dt: float) -> np.ndarray:
    """Symbols (1 - e^{-2 pi i l / nt}) / dt of the periodic backward time
    difference; real part >= 0."""
    return (1.0 - np.exp(-2j * np.pi * np.fft.fftfreq(n_times))) / dt


def twisted_grad(cube: PeriodicCube, xi, psi: np.ndarray) -> np.ndarray:
    """(dxi psi)_j = e^{-i xi_j} psi(x + e_j) - psi(x), shape (..., d, n)."""
    ev = e_vector(xi) + 1.0  # the bare phase factors e^{-i xi_j}
    out = np.empty(psi.shape[:-1] + (cube.d, cube.n_sites), dtype=complex)
    for j in range(cube.d):
        out[..., j, :] = ev[j] * cube.shift(psi, j, +1) - psi
    return out


def twisted_matrix(cube: PeriodicCube, xi, j: int) -> csr_matrix:
    """Sparse matrix of the twisted difference in direction j."""
    n = cube.n_sites
    return (np.exp(-1j * float(np.atleast_1d(xi)[j])) * cube.shift_matrix(j, +1)
            - sparse_eye(n, format="csr")).tocsr()


def _sample_mean(w: np.ndarray) -> np.ndarray:
    """Space-time mean over the last axis (sites) and axis 0 (time)."""
    return w.mean(axis=(0, -1))


# -- corrector ----------------------------------------------------------------


@dataclass
class CorrectorField:
    """Row-vector corrector Phi(xi, eta; x, t_i) on one periodic sample.

    ``values[i, k]`` is the k-th component at time level i, flat over
    sites; complex for xi != 0.
    """

    cube: PeriodicCube
    dt: float
    xi: np.ndarray
    eta: float
    values: np.ndarray  # (nt, d, n) complex

    def twisted_gradient(self) -> np.ndarray:
        """dxi Phi with shape (nt, d, d, n); axis -3 is the difference
        direction j, axis -2 the corrector component k."""
        cube = self.cube
        nt = self.values.shape[0]
        out = np.empty((nt, cube.d, cube.d, cube.n_sites), dtype=complex)
        for k in range(cube.d):
            out[:, :, k, :] = twisted_grad(cube, self.xi, self.values[:, k, :])
        return out

    def energy_check(self, window, v=None) -> dict:
        """Discrete energy bound: for a unit vector v,
        eta * mean|Phi v|^2 + lam * mean|dxi Phi v|^2 <= Lam^2 / lam."""
        d = self.cube.d
        v = np.ones(d) / np.sqrt(d) if v is None else np.asarray(v, float)
        v = v / np.linalg.norm(v)
        phiv = np.einsum("ikn,k->in", self.values, v)
        gradv = np.einsum("ijkn,k->ijn", self.twisted_gradient(), v)
        lhs = self.eta * float(np.mean(np.abs(phiv) ** 2)) + window.lam * float(
            np.mean(np.abs(gradv) ** 2)
        )
        rhs = window.Lam**2 / window.lam
        return {"lhs": lhs, "rhs": rhs, "passes": bool(lhs <= rhs * (1 + 1e-10))}


def _spacetime_operator(a: CoefficientField, xi, eta: float):
    """Sparse matrix of (eta + D_t) + sum_j D_j^H diag(a_j) D_j on the
    space-time sample, unknowns ordered time-major."""
    cube, nt, n = a.cube, a.n_times, a.cube.n_sites
    D = [twisted_matrix(cube, xi, j) for j in range(cube.d)]
    blocks = []
    for i in range(nt):
        Ai = sum(
            (D[j].getH() @ csr_matrix(
                (a.values[i, j], (np.arange(n), np.arange(n))), shape=(n, n)
            ) @ D[j])
            for j in range(cube.d)
        )
        blocks.append(Ai)
    # periodic backward time difference (I - P_{i -> i-1}) / dt
    if nt == 1:
        C = csr_matrix((1, 1))
    else:
        rows = np.arange(nt)
        P = csr_matrix((np.ones(nt), (rows, (rows - 1) % nt)), shape=(nt, nt))
        C = (sparse_eye(nt, format="csr") - P) / a.dt
    big = sparse_kron(C, sparse_eye(n, format="csr"), format="csr").astype(complex)
    big = big + eta * sparse_eye(nt * n, format="csr")
    from scipy.sparse import block_diag

    big = (big + block_diag(blocks, format="csr")).tocsr()
    return big, D


def corrector_solve(a: CoefficientField, xi, eta: float) -> CorrectorField:
    """Direct sparse solve of the corrector equation on a periodic sample.

    The right side -P D_k^H a_k is projected to mean zero, which is what
    makes Phi = 0 the solution for constant coefficients at every xi (at
    xi = 0 the projection changes nothing).
    """
    if eta <= 0:
        raise ConfigError(f"eta must be > 0, got {eta}")
    if not a.diagonal:
        raise ConfigError("corrector solve expects diagonal coefficients")
    cube, nt, n = a.cube, a.n_times, a.cube.n_sites
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (cube.d,):
        raise ConfigError(f"xi must have {cube.d} components")
    big, D = _spacetime_operator(a, xi, eta)
    lu = splu(big.tocsc())
    vals = np.empty((nt, cube.d, n), dtype=complex)
    for k in range(cube.d):
        rhs = np.empty((nt, n), dtype=complex)
        for i in range(nt):
            rhs[i] = -(D[k].getH() @ a.values[i, k].astype(complex))
        rhs -= rhs.mean()
        sol = lu.solve(rhs.ravel())
        resid = big @ sol - rhs.ravel()
        if np.linalg.norm(resid) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
            from .errors import SolverError

            raise SolverError(
                f"corrector solve residual {np.linalg.norm(resid):.3e}"
            )
        vals[:, k, :] = sol.reshape(nt, n)
    return CorrectorField(cube, a.dt, xi, eta, vals)


# -- q matrix ------------------------------------------------------------------


@dataclass
class QMatrix:
    """Estimate of q(xi, eta) with per-entry standard errors."""

    xi: np.ndarray
    eta: float
    value: np.ndarray  # (d, d) complex
    stderr: np.ndarray  # (d, d) real
    n_samples: int


def q_matrix_single(corr: CorrectorField, a: CoefficientField) -> np.ndarray:
    """Space-time sample average of a + a dxi Phi for one sample,
    as a d x d matrix (row j, column k)."""
    d = a.cube.d
    grad = corr.twisted_gradient()  # (nt, d_j, d_k, n)
    # diagonal a: (a dxi Phi)_{jk} = a_j (dxi Phi)_{jk}
    corr_term = _sample_mean(a.values[:, :, None, :] * grad)
    base = np.zeros((d, d), dtype=complex)
    np.fill_diagonal(base, _sample_mean(a.values))
    return base + corr_term


def q_matrix(pairs: list) -> QMatrix:
    """Average q over independent (corrector, coefficient sample) pairs."""
    if not pairs:
        raise ConfigError("need at least one (corrector, sample) pair")
    qs = np.stack([q_matrix_single(c, a) for c, a in pairs])
    mean = qs.mean(axis=0)
    if len(pairs) > 1:
        stderr = np.abs(qs - mean).std(axis=0, ddof=1) / np.sqrt(len(pairs))
    else:
        stderr = np.zeros_like(mean, dtype=float)
    corr = pairs[0][0]
    return QMatrix(corr.xi, corr.eta, mean, stderr, len(pairs))


# -- the shift operator T and the Neumann series --------------------------------


def t_operator_apply(
    cube: PeriodicCube,
    g: np.ndarray,
    xi,
    eta: float,
    dt: float,
    Lam: float,
    method: str = "fourier",
) -> np.ndarray:
    """Apply T_{xi,eta} g = dxi psi where psi solves
    (1/Lam)(eta + D_t) psi + dxi* dxi psi = dxi* g on the periodic sample.

    ``g`` has shape (nt, d, n).  The 'fourier' path divides by the exact
    space-time symbol (the closed-form heat-kernel time integral); the
    'solve' path assembles the sparse operator and factorizes it.  Both
    realize the same operator; per Fourier mode its norm is
    |d|^2 / |d|^2 + (eta + tau)/Lam| < 1, so T is a contraction for real
    xi and eta > 0.
    """
    g = np.asarray(g, dtype=complex)
    nt = g.shape[0]
    if method == "fourier":
        dsym = twisted_shift_symbols(cube, xi)  # (d,) + shape
        tau = time_symbols(nt, dt)  # (nt,)
        ghat = np.fft.fftn(
            np.fft.fft(g.reshape((nt, cube.d) + cube.shape), axis=0),
            axes=tuple(range(2, 2 + cube.d)),
        )
        rhs = (np.conj(dsym)[None] * ghat).sum(axis=1)  # (nt,) + shape
        denom = (np.abs(dsym) ** 2).sum(axis=0)[None] + (
            eta + tau.reshape((nt,) + (1,) * cube.d)
        ) / Lam
        psi_hat = rhs / denom
        out_hat = dsym[None] * psi_hat[:, None]
        out = np.fft.ifft(
            np.fft.ifftn(out_hat, axes=tuple(range(2, 2 + cube.d))), axis=0
        )
        return out.reshape(nt, cube.d, cube.n_sites)
    if method == "solve":
        ones = np.ones(cube.n_sites)
        unit = constant_coefficients(cube, dt, 1.0, n_times=nt)
        unit.values[:] = 1.0
        big, D = _spacetime_operator(unit, xi, eta / Lam)
        # _spacetime_operator built eta/Lam + D_t + sum D^H D; rescale time part
        if nt > 1:
            rows = np.arange(nt)
            P = csr_matrix((np.ones(nt), (rows, (rows - 1) % nt)), shape=(nt, nt))
            C = (sparse_eye(nt, format="csr") - P) / dt
            corr = sparse_kron(C, sparse_eye(cube.n_sites), format="csr").astype(
                complex
            )
            big = (big - corr + corr / Lam).tocsr()
        rhs = np.empty((nt, cube.n_sites), dtype=complex)
        for i in range(nt):
            rhs[i] = sum(D[j].getH() @ g[i, j] for j in range(cube.d))
        psi = splu(big.tocsc()).solve(rhs.ravel()).reshape(nt, cube.n_sites)
        out = np.empty_like(g)
        for i in range(nt):
            out[i] = twisted_grad(cube, xi, psi[i])
        return out
    raise ConfigError(f"unknown method {method!r}")


def sample_norm(w: np.ndarray) -> float:
    """Root mean square over time, components, and sites."""
    return float(np.sqrt(np.mean(np.abs(w) ** 2)))


def _apply_contrast(b: np.ndarray, w: np.ndarray) -> np.ndarray:
    """(b w)_j = b_j w_j for the diagonal contrast field."""
    return b * w


def _project_mean_zero(w: np.ndarray) -> np.ndarray:
    return w - w.mean(axis=(0, 2), keepdims=True)


def neumann_series_q(
    samples: list, xi, eta: float, m_max: int
) -> tuple[QMatrix, dict]:
    """q(xi, eta) through the contrast series
    q = <a> - Lam sum_{m>=1} <b [P T b]^m>, truncated at m_max.

    Returns the QMatrix plus a ledger with per-term matrices and norms;
    consecutive term norms contract at rate <= 1 - lam/Lam for real xi.
    """
    if m_max < 1:
        raise ConfigError(f"m_max must be >= 1, got {m_max}")
    per_sample = []
    ledger_norms = []
    for a in samples:
        cube, nt = a.cube, a.n_times
        b = a.contrast()  # (nt, d, n)
        Lam = a.window.Lam
        d = cube.d
        q = np.zeros((d, d), dtype=complex)
        np.fill_diagonal(q, _sample_mean(a.values))
        terms = []
        # u_m = P T (b u_{m-1}) starting from the constant unit vectors
        u = np.zeros((d, nt, d, cube.n_sites), dtype=complex)  # one per column k
        for k in range(d):
            u[k, :, k, :] = 1.0
        for m in range(1, m_max + 1):
            new_u = np.empty_like(u)
            for k in range(d):
                bu = _apply_contrast(b, u[k])
                new_u[k] = _project_mean_zero(
                    t_operator_apply(cube, bu, xi, eta, a.dt, Lam)
                )
            u = new_u
            term = np.empty((d, d), dtype=complex)
            for k in range(d):
                term[:, k] = _sample_mean(_apply_contrast(b, u[k]))
            terms.append(-Lam * term)
            q = q + terms[-1]
        per_sample.append(q)
        ledger_norms.append([float(np.linalg.norm(t)) for t in terms])
    qs = np.stack(per_sample)
    mean = qs.mean(axis=0)
    stderr = (
        np.abs(qs - mean).std(axis=0, ddof=1) / np.sqrt(len(samples))
        if len(samples) > 1
        else np.zeros_like(mean, dtype=float)
    )
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    ledger = {"term_norms": ledger_norms}
    return QMatrix(xi, eta, mean, stderr, len(samples)), ledger


# -- eta -> 0 extrapolation ------------------------------------------------------


def a_hom_extract(etas: np.ndarray, q_values: list) -> dict:
    """Richardson extrapolation of q(0, eta) to eta = 0.

    ``etas`` strictly decreasing (at least 3, geometric spacing
    recommended); the spread between the last two extrapolants is the
    quoted uncertainty.  A sequence whose entries move non-monotonically
    by more than the spread is flagged but still reported.
    """
    etas = np.asarray(etas, dtype=float)
    if etas.size < 3 or not np.all(np.diff(etas) < 0):
        raise ConfigError("need at least 3 strictly decreasing eta values")
    qs = [np.real(np.asarray(q)) for q in q_values]
    extrap = []
    for i in range(1, len(qs)):
        # linear-in-eta model: q(eta) ~ a_hom + c eta
        w = etas[i] / (etas[i - 1] - etas[i])
        extrap.append(qs[i] + (qs[i] - qs[i - 1]) * w)
    value = extrap[-1]
    spread = np.abs(extrap[-1] - extrap[-2]).max() if len(extrap) > 1 else np.inf
    diffs = [np.max(np.abs(qs[i + 1] - qs[i])) for i in range(len(qs) - 1)]
    flagged = bool(any(diffs[i + 1] > diffs[i] + spread for i in range(len(diffs) - 1)))
    return {"a_hom": value, "uncertainty": float(spread), "flagged": flagged,
            "extrapolants": extrap}


# -- averaged Green's function ----------------------------------------------------


def avg_greens_mc(
    sampler,
    cube: PeriodicCube,
    source_site: int,
    t_indices: np.ndarray,
    n_samples: int,
    seed: int = 0,
) -> dict:
    """Monte Carlo mean of the forward fundamental solution over
    independent environments.

    ``sampler(seed) -> CoefficientField`` draws one environment; each
    sample evolves a delta through the forward equation and the values at
    ``t_indices`` are averaged.  Returns mean and per-point standard
    error, shapes (len(t_indices), n_sites).
    """
    if n_samples < 2:
        raise ConfigError("need n_samples >= 2 for error bars")
    t_indices = np.asarray(t_indices, dtype=int)
    children = np.random.SeedSequence(seed).spawn(n_samples)
    acc = np.zeros((t_indices.size, cube.n_sites))
    acc2 = np.zeros_like(acc)
    delta = np.zeros(cube.n_sites)
    delta[source_site] = 1.0
    for s in range(n_samples):
        a = sampler(children[s])
        traj = solve_forward(a, delta, int(t_indices.max()))
        vals = traj[t_indices]
        acc += vals
        acc2 += vals**2
    mean = acc / n_samples
    var = np.maximum(acc2 / n_samples - mean**2, 0.0)
    stderr = np.sqrt(var / (n_samples - 1))
    return {"t_indices": t_indices, "mean": mean, "stderr": stderr,
            "n_samples": n_samples}


# -- Fourier--Laplace transform of the constant-coefficient kernel ----------------


def greens_hat_formula(q: np.ndarray, xi, eta: float) -> complex:
    """1 / (eta + e(xi)^* q e(xi)), the Fourier--Laplace Green's function
    of the constant-coefficient forward equation."""
    ev = e_vector(xi)
    q = np.atleast_2d(np.asarray(q, dtype=complex))
    return 1.0 / (eta + np.conj(ev) @ q @ ev)


def greens_hat_quadrature(
    a_diag: np.ndarray, xi, eta: float, radius: int = 80
) -> complex:
    """Same transform evaluated from the time-domain kernel: numerical
    Laplace quadrature of the spatially summed Bessel-product kernel.

    Independent of the closed-form symbol; agreement with
    ``greens_hat_formula`` validates the representation.
    """
    a_diag = np.atleast_1d(np.asarray(a_diag, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    axis = np.arange(-radius, radius + 1)

    def spatial_sum(t: float) -> float:
        out = 1.0
        for j, aj in enumerate(a_diag):
            line = heat_kernel_1d(axis, aj * t)
            out *= float((line * np.cos(xi[j] * axis)).sum())
        return out

    t_max = -np.log(1e-16) / eta

    def integrand(t):
        return np.exp(-eta * t) * spatial_sum(t)

    val, err = integrate.quad(
        integrand, 0.0, t_max, limit=800, epsabs=1e-12, epsrel=1e-12
    )
    if err > 1e-9 * max(abs(val), 1.0):
        raise IntegrityError(f"Laplace quadrature error {err:.2e} too large")
    return complex(val)


# -- rate fitting -------------------------------------------------------------------


@dataclass
class RateReport:
    """Log-log regression of sup-differences against a scale parameter."""

    scales: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float
    slope_stderr: float
    alpha_hat: float
    residuals: np.ndarray
    mode: str
    warning: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def alpha_lower(self) -> float:
        """alpha_hat minus two standard errors (scaled per mode)."""
        scale = 1.0 if self.mode == "epsilon" else 2.0
        return self.alpha_hat - 2.0 * scale * self.slope_stderr


def rate_fit(
    scales: np.ndarray, values: np.ndarray, mode: str = "epsilon", d: int = None
) -> RateReport:
    """Fit a power law values ~ C * scales^slope.

    mode 'epsilon': values ~ C eps^alpha, alpha_hat = slope (scales are
    the eps values, strictly decreasing).
    mode 'greens-decay': values ~ C scale^{-(d+alpha)/2} against the
    scale (Lam t + 1), so alpha_hat = -2 slope - d; requires ``d``.
    Nonpositive values are dropped with a warning recorded.
    """
    scales = np.asarray(scales, dtype=float)
    values = np.asarray(values, dtype=float)
    if scales.size != values.size or scales.size < 4:
        raise ConfigError("need >= 4 matched (scale, value) pairs")
    if mode not in ("epsilon", "greens-decay"):
        raise ConfigError(f"unknown mode {mode!r}")
    if mode == "greens-decay" and d is None:
        raise ConfigError("greens-decay mode requires the dimension d")
    warning = ""
    keep = values > 0
    if not keep.all():
        warning = f"dropped {int((~keep).sum())} nonpositive differences"
        scales, values = scales[keep], values[keep]
        if scales.size < 4:
            raise ConfigError("fewer than 4 positive differences remain")
    x = np.log(scales)
    y = np.log(values)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    fit = A @ coef
    resid = y - fit
    dof = max(x.size - 2, 1)
    sigma2 = float(resid @ resid) / dof
    sxx = float(((x - x.mean()) ** 2).sum())
    slope_stderr = float(np.sqrt(sigma2 / sxx)) if sxx > 0 else np.inf
    if mode == "epsilon":
        alpha = slope
    else:
        alpha = -2.0 * slope - d
    noise_dominated = sigma2 > 0 and abs(slope) < 2.0 * slope_stderr
    if noise_dominated:
        warning = (warning + "; " if warning else "") + "noise-dominated fit"
    return RateReport(
        scales, values, slope, intercept, slope_stderr, float(alpha), resid,
        mode, warning,
    )
