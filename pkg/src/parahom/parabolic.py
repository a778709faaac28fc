"""Solvers for lattice parabolic equations with space-time coefficients.

The forward initial value problem, the backward Green's function with its
two sum rules, the periodized Green's function, Duhamel representation,
the damped resolvent, and the contrast perturbation expansion all live
here.  Time stepping is explicit Euler with the environment's own step,
coefficients piecewise constant on each step, so every solve is a finite
product of sparse-stencil applications and bit-reproducible.

Discrete conventions (used consistently by every operation):

* forward step      u_{i+1} = u_i - dt * div(a_i grad u_i)
* backward step     u_{i}   = [I - (dt/2) div(a_i grad .)] u_{i+1}
  (the backward equation carries the diffusion matrix a/2)
* inhomogeneous     u_i = M_i u_{i+1} + dt f_{i+1}, a right-endpoint
  quadrature of the Duhamel integral, exact for the discrete dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, IntegrityError
from .lattice import EllipticityPair, PeriodicCube


# -- coefficient fields ----------------------------------------------------


@dataclass
class CoefficientField:
    """Symmetric d x d coefficient matrix per site and time step.

    ``values`` has shape (n_times, d, n_sites) when ``diagonal`` is true,
    else (n_times, d, d, n_sites).  Entry i applies on [t_i, t_{i+1}).
    """

    cube: PeriodicCube
    dt: float
    values: np.ndarray
    window: EllipticityPair
    diagonal: bool = True

    @property
    def n_times(self) -> int:
        return self.values.shape[0]

    def at(self, i: int) -> np.ndarray:
        """Coefficient slice for step i (clamped to the stored range)."""
        return self.values[min(max(i, 0), self.n_times - 1)]

    def validate(self, tol: float = 1e-12) -> None:
        """Raise IntegrityError if any matrix leaves the spectral window."""
        lam, Lam = self.window.lam, self.window.Lam
        if self.diagonal:
            lo = float(self.values.min())
            hi = float(self.values.max())
        else:
            mats = np.moveaxis(self.values, -1, -3)  # (nt, n, d, d)
            if not np.allclose(mats, np.swapaxes(mats, -1, -2), atol=1e-12):
                raise IntegrityError("coefficient matrices are not symmetric")
            eig = np.linalg.eigvalsh(mats)
            lo = float(eig.min())
            hi = float(eig.max())
        if lo < lam - tol or hi > Lam + tol:
            raise IntegrityError(
                f"coefficient spectrum [{lo}, {hi}] leaves window [{lam}, {Lam}]"
            )

    def contrast(self) -> np.ndarray:
        """The contrast field b = I - a/Lam, same layout as ``values``."""
        if self.diagonal:
            return 1.0 - self.values / self.window.Lam
        eye = np.eye(self.cube.d)[None, :, :, None]
        return eye - self.values / self.window.Lam


def constant_coefficients(
    cube: PeriodicCube, dt: float, matrix, n_times: int = 1
) -> CoefficientField:
    """Constant-in-space-and-time coefficient field.

    ``matrix`` may be a scalar c (meaning c I), a length-d diagonal, or a
    full symmetric d x d matrix.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim == 0:
        vals = np.full((n_times, cube.d, cube.n_sites), float(m))
        window = EllipticityPair(float(m), float(m))
        return CoefficientField(cube, dt, vals, window, diagonal=True)
    if m.ndim == 1:
        vals = np.broadcast_to(
            m[None, :, None], (n_times, cube.d, cube.n_sites)
        ).copy()
        return CoefficientField(
            cube, dt, vals, EllipticityPair(m.min(), m.max()), diagonal=True
        )
    eig = np.linalg.eigvalsh(m)
    vals = np.broadcast_to(
        m[None, :, :, None], (n_times, cube.d, cube.d, cube.n_sites)
    ).copy()
    return CoefficientField(
        cube, dt, vals, EllipticityPair(eig.min(), eig.max()), diagonal=False
    )


def div_a_grad(cube: PeriodicCube, a: np.ndarray, u: np.ndarray, diagonal: bool):
    """Apply u -> div(a grad u).  Broadcasts over leading axes of u and a.

    For diagonal coefficients ``a`` has shape (..., d, n_sites); the entry
    a_j(x) weights the edge (x, x+e_j).
    """
    if diagonal:
        return cube.div(a * cube.grad(u))
    g = cube.grad(u)  # (..., d, n)
    flux = np.einsum("...jkn,...kn->...jn", a, g)
    return cube.div(flux)


def max_stable_dt(window: EllipticityPair, d: int) -> float:
    """Explicit-step stability bound dt <= 1/(2 d Lam)."""
    return 1.0 / (2.0 * d * window.Lam)


def _check_dt(a: CoefficientField) -> None:
    if a.dt > max_stable_dt(a.window, a.cube.d) * (1 + 1e-12):
        raise ConfigError(
            f"dt={a.dt} exceeds the stability bound "
            f"1/(2 d Lam)={max_stable_dt(a.window, a.cube.d)}"
        )


# -- forward problem -------------------------------------------------------


def solve_forward(a: CoefficientField, h: np.ndarray, n_steps: int) -> np.ndarray:
    """Explicit solution of du/dt = -div(a grad u), u(.,0) = h.

    Returns the trajectory with shape (n_steps + 1, ..., n_sites); ``h``
    may carry leading batch axes (paired with batch axes of ``a.values``
    if present).  The discrete L2 norm is non-increasing step to step.
    """
    _check_dt(a)
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)):
        raise ConfigError("initial data must be finite")
    out = np.empty((n_steps + 1,) + h.shape)
    out[0] = h
    u = h.copy()
    for i in range(n_steps):
        u = u - a.dt * div_a_grad(a.cube, a.at(i), u, a.diagonal)
        out[i + 1] = u
    return out


# -- backward Green's function ----------------------------------------------


@dataclass
class GreensTable:
    """Values G(y, s_k; x, t) of the backward Green's function.

    ``values[k, y]`` is G(y, s_k; source_site, t_index * dt) for the time
    levels ``s_indices[k]`` (ascending, last one equal to t_index where
    the table is the terminal delta).
    """

    cube: PeriodicCube
    dt: float
    source_site: int
    t_index: int
    s_indices: np.ndarray
    values: np.ndarray
    window: EllipticityPair
    diagonal: bool = True

    def mass(self) -> np.ndarray:
        """sum_y G(y, s_k; x, t) for each stored level (should be 1)."""
        return self.values.sum(axis=-1)

    def time_lags(self) -> np.ndarray:
        """t - s_k for each stored level."""
        return (self.t_index - self.s_indices) * self.dt


def _backward_step(a: CoefficientField, u: np.ndarray, i: int) -> np.ndarray:
    """One backward level: apply I - (dt/2) div(a_i grad .)."""
    return u - (a.dt / 2.0) * div_a_grad(a.cube, a.at(i), u, a.diagonal)


def greens_backward(
    a: CoefficientField,
    source_site: int,
    t_index: int,
    s_min_index: int = 0,
) -> GreensTable:
    """Green's function of the backward equation du/ds = (1/2) div(a grad u)
    with terminal delta at ``source_site`` at level ``t_index``.

    Both sum rules (sum over y and sum over sources x) hold exactly for
    the discrete propagator because each step matrix is symmetric with
    unit row sums; nonnegativity holds for diagonal coefficients under
    the stability bound.
    """
    _check_dt(a)
    if not 0 <= s_min_index < t_index:
        raise ConfigError(f"need 0 <= s_min_index < t_index, got {s_min_index}, {t_index}")
    n = a.cube.n_sites
    u = np.zeros(n)
    u[source_site] = 1.0
    levels = np.arange(s_min_index, t_index + 1)
    vals = np.empty((levels.size, n))
    vals[-1] = u
    for k, i in enumerate(range(t_index - 1, s_min_index - 1, -1)):
        u = _backward_step(a, u, i)
        vals[levels.size - 2 - k] = u
    return GreensTable(
        a.cube, a.dt, source_site, t_index, levels, vals, a.window, a.diagonal
    )


def greens_backward_matrix(
    a: CoefficientField, t_index: int, s_min_index: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Full propagator tables: out[k, x, y] = G(y, s_k; x, t).

    Evolves the identity matrix backwards (one row per source), so both
    (E4) sum rules can be checked directly: axis -1 sums over y, axis -2
    over sources x.  Returns (s_indices, values).
    """
    _check_dt(a)
    n = a.cube.n_sites
    u = np.eye(n)
    levels = np.arange(s_min_index, t_index + 1)
    vals = np.empty((levels.size, n, n))
    vals[-1] = u
    for k, i in enumerate(range(t_index - 1, s_min_index - 1, -1)):
        u = _backward_step(a, u, i)
        vals[levels.size - 2 - k] = u
    return levels, vals


def periodic_greens(
    kernel: np.ndarray, cube: PeriodicCube, tol: float = 1e-12
) -> np.ndarray:
    """Periodize a kernel tabulated on a centered box of Z^d onto the cube.

    ``kernel`` has shape (..., side, ..., side) with odd side; entry at
    grid position p corresponds to lattice point p - radius.  Raises
    IntegrityError when the boundary shell carries more than ``tol`` mass,
    i.e. when the truncation was too small for the periodization to be
    trusted.
    """
    d = cube.d
    side = kernel.shape[-1]
    if any(s != side for s in kernel.shape[-d:]) or side % 2 != 1:
        raise ConfigError("kernel must be a centered odd-sided box")
    boundary_mass = 0.0
    for j in range(d):
        sl_lo = [slice(None)] * kernel.ndim
        sl_hi = [slice(None)] * kernel.ndim
        sl_lo[kernel.ndim - d + j] = 0
        sl_hi[kernel.ndim - d + j] = side - 1
        boundary_mass += float(np.abs(kernel[tuple(sl_lo)]).sum())
        boundary_mass += float(np.abs(kernel[tuple(sl_hi)]).sum())
    if boundary_mass > tol:
        raise IntegrityError(
            f"kernel boundary mass {boundary_mass:.3e} exceeds tolerance {tol:.1e}"
        )
    radius = side // 2
    lead = kernel.shape[: kernel.ndim - d]
    out = np.zeros(lead + cube.shape)
    grid = kernel.reshape(lead + (side,) * d)
    # fold every box point onto its cube representative
    coords = np.indices((side,) * d).reshape(d, -1) - radius
    flat = grid.reshape(lead + (-1,))
    sites = np.ravel_multi_index(tuple(coords % cube.L), cube.shape)
    out_flat = out.reshape(lead + (cube.n_sites,))
    np.add.at(out_flat, (..., sites), flat)
    return out_flat


# -- Aronson-type envelope fits ---------------------------------------------


def _table_envelope_stats(table: GreensTable, use_gradient: bool = False):
    """Per-level maxima of G (or |grad G|) against the Gaussian envelope.

    Returns (time lags tau, max over y of value * exp(dist/sqrt(Lam tau + 1)))
    excluding the terminal delta level.
    """
    cube = table.cube
    Lam = table.window.Lam
    src = cube.site_coords(table.source_site)
    offs = cube.min_image(cube.all_coords() - src)
    dist = np.sqrt((offs**2).sum(axis=-1))
    taus = table.time_lags()
    keep = taus > 0
    taus = taus[keep]
    vals = table.values[keep]
    if use_gradient:
        vals = np.sqrt((cube.grad(vals) ** 2).sum(axis=-2))
    scale = np.sqrt(Lam * taus + 1.0)
    env = np.exp(dist[None, :] / scale[:, None])
    return taus, (np.abs(vals) * env).max(axis=-1)


def aronson_constant(tables: list[GreensTable]) -> float:
    """Least C with G <= C [Lam tau + 1]^{-d/2} exp(-|x-z|/sqrt(Lam tau + 1))
    over every stored value of every table (periodic minimum-image distance).
    """
    c = 0.0
    for table in tables:
        taus, peaks = _table_envelope_stats(table)
        d = table.cube.d
        c = max(c, float((peaks * (table.window.Lam * taus + 1.0) ** (d / 2.0)).max()))
    return c


def aronson_fit(tables: list[GreensTable]) -> dict:
    """Fitted Aronson constant plus a stability verdict under sample doubling.

    ``passes`` is true when the constant over the full set exceeds the
    constant over the first half by less than 10 percent.
    """
    if len(tables) < 2:
        raise ConfigError("need at least 2 tables to assess stability")
    c_half = aronson_constant(tables[: len(tables) // 2])
    c_full = aronson_constant(tables)
    growth = (c_full - c_half) / c_half
    return {
        "C_hat": c_full,
        "C_half": c_half,
        "growth": growth,
        "passes": bool(growth <= 0.10),
    }


def aronson_gradient_exponent(tables: list[GreensTable], tau_min: float = 1.0) -> dict:
    """Fit beta in |grad G| <= C' [Lam tau + 1]^{-(d+beta)/2} exp(-dist/sqrt(.)).

    Regresses the log of the per-lag envelope peak (pooled over tables by
    taking the max at each lag) against log(Lam tau + 1); the slope is
    -(d + beta)/2.
    """
    pooled: dict[float, float] = {}
    Lam = tables[0].window.Lam
    d = tables[0].cube.d
    for table in tables:
        taus, peaks = _table_envelope_stats(table, use_gradient=True)
        for tau, p in zip(taus, peaks):
            key = round(float(tau), 12)
            pooled[key] = max(pooled.get(key, 0.0), float(p))
    taus = np.array(sorted(t for t in pooled if t >= tau_min))
    if taus.size < 4:
        raise ConfigError("need at least 4 usable time lags for the fit")
    peaks = np.array([pooled[float(t)] for t in taus])
    x = np.log(Lam * taus + 1.0)
    slope, intercept = np.polyfit(x, np.log(peaks), 1)
    beta = -2.0 * slope - d
    return {"beta": float(beta), "C": float(np.exp(intercept)), "slope": float(slope)}


# -- Duhamel and the damped resolvent ----------------------------------------


def duhamel_solve(a: CoefficientField, f: np.ndarray, method: str = "direct") -> np.ndarray:
    """Solution of du/ds = (1/2) div(a grad u) - f with u -> 0 at the end
    of the grid, i.e. the Duhamel integral of the forcing.

    ``f`` has shape (n_times, n_sites) on the coefficient grid.  The
    'direct' method integrates the PDE backwards; 'greens' assembles the
    representation sum from stored Green's tables.  Both implement the
    same discrete quadrature u_i = dt * sum_{k>i} P(i, k-1) f_k.
    """
    if f.shape[0] != a.n_times + 1:
        raise ConfigError(
            f"forcing needs n_times+1={a.n_times + 1} levels, got {f.shape[0]}"
        )
    nt = f.shape[0]
    if method == "direct":
        out = np.zeros_like(f, dtype=float)
        u = np.zeros(f.shape[1:])
        for i in range(nt - 2, -1, -1):
            u = _backward_step(a, u, i) + a.dt * f[i + 1]
            out[i] = u
        return out
    if method == "greens":
        out = np.zeros_like(f, dtype=float)
        for k in range(1, nt):
            # propagator from level k-1 down to every earlier level
            if k - 1 == 0:
                out[0] += a.dt * f[k]
                continue
            _, tables = greens_backward_matrix(a, t_index=k - 1, s_min_index=0)
            # tables[i, x, y] = G(y, s_i; x, t_{k-1}); contract over sources
            out[: k] += a.dt * np.einsum("ixy,x->iy", tables[: k], f[k])
        return out
    raise ConfigError(f"unknown method {method!r}")


def damped_resolvent(a: CoefficientField, m: float, g: np.ndarray) -> np.ndarray:
    """v(y,s) = sum_x int_s^inf e^{-m^2 (t-s)/2} G(y,s;x,t) g(x,t) dt,
    realized as the damped backward recursion
    v_i = e^{-m^2 dt / 2} (M_i v_{i+1} + dt g_{i+1}).

    Satisfies the resolvent bound ||v||_2 <= 2 m^{-2} ||g||_2 in the
    space-time norm (dt-weighted).
    """
    if m <= 0:
        raise ConfigError(f"mass must be > 0, got {m}")
    if g.shape[0] != a.n_times + 1:
        raise ConfigError(
            f"data needs n_times+1={a.n_times + 1} levels, got {g.shape[0]}"
        )
    rho = float(np.exp(-m * m * a.dt / 2.0))
    out = np.zeros(g.shape, dtype=float)
    v = np.zeros(g.shape[1:])
    for i in range(g.shape[0] - 2, -1, -1):
        v = rho * (_backward_step(a, v, i) + a.dt * g[i + 1])
        out[i] = v
    return out


def spacetime_norm(v: np.ndarray, dt: float) -> float:
    """L2 norm on the grid: sqrt(dt * sum |v|^2)."""
    return float(np.sqrt(dt * np.sum(np.abs(v) ** 2)))


# -- contrast perturbation expansion ------------------------------------------


@dataclass
class PerturbationSeries:
    """Terms of the contrast expansion and their partial sums."""

    terms: list = field(default_factory=list)
    dt: float = 0.0

    def partial_sums(self) -> list:
        out = []
        acc = np.zeros_like(self.terms[0])
        for t in self.terms:
            acc = acc + t
            out.append(acc.copy())
        return out

    def norms(self) -> np.ndarray:
        return np.array([spacetime_norm(t, self.dt) for t in self.terms])


def greens_perturbation_terms(
    a: CoefficientField,
    source_site: int,
    t_index: int,
    n_max: int,
    s_min_index: int = 0,
) -> PerturbationSeries:
    """Terms G_n of the expansion of the backward Green's function around
    the free evolution at rate Lam/2, each multilinear of degree n in the
    contrast b = I - a/Lam.

    Term n is produced by backward-integrating the free equation with
    forcing (Lam/2) div(b grad G_{n-1}); the partial sums converge to the
    ``greens_backward`` table geometrically with ratio <= 1 - lam/Lam.
    """
    _check_dt(a)
    cube, dt, Lam = a.cube, a.dt, a.window.Lam
    b = a.contrast()
    levels = np.arange(s_min_index, t_index + 1)
    ns = levels.size

    def free_step(u):
        return u - (dt * Lam / 2.0) * cube.laplacian(u)

    # n = 0: free evolution of the terminal delta
    terms = []
    u = np.zeros(cube.n_sites)
    u[source_site] = 1.0
    t0 = np.empty((ns, cube.n_sites))
    t0[-1] = u
    for k, i in enumerate(range(t_index - 1, s_min_index - 1, -1)):
        u = free_step(u)
        t0[ns - 2 - k] = u
    terms.append(t0)
    for _ in range(n_max):
        prev = terms[-1]
        tn = np.zeros((ns, cube.n_sites))
        u = np.zeros(cube.n_sites)
        for k, i in enumerate(range(t_index - 1, s_min_index - 1, -1)):
            row = ns - 1 - k  # level of prev being consumed (i + 1)
            forcing = div_a_grad(cube, b[min(i, b.shape[0] - 1)], prev[row], a.diagonal)
            u = free_step(u) + (dt * Lam / 2.0) * forcing
            tn[ns - 2 - k] = u
        terms.append(tn)
    return PerturbationSeries(terms=terms, dt=dt)


def damped_perturbation_terms(
    a: CoefficientField, m: float, g: np.ndarray, n_max: int
) -> PerturbationSeries:
    """Terms v_n of the damped expansion; partial sums telescope exactly to
    the ``damped_resolvent`` output, and ||v_n|| <= m^{-2} (1-lam/Lam)^n ||g||.
    """
    if m <= 0:
        raise ConfigError(f"mass must be > 0, got {m}")
    cube, dt, Lam = a.cube, a.dt, a.window.Lam
    b = a.contrast()
    rho = float(np.exp(-m * m * dt / 2.0))
    nt = g.shape[0]

    def free_step(u):
        return u - (dt * Lam / 2.0) * cube.laplacian(u)

    terms = []
    v = np.zeros(g.shape[1:])
    t0 = np.zeros(g.shape, dtype=float)
    for i in range(nt - 2, -1, -1):
        v = rho * (free_step(v) + dt * g[i + 1])
        t0[i] = v
    terms.append(t0)
    for _ in range(n_max):
        prev = terms[-1]
        tn = np.zeros(g.shape, dtype=float)
        v = np.zeros(g.shape[1:])
        for i in range(nt - 2, -1, -1):
            forcing = div_a_grad(
                cube, b[min(i, b.shape[0] - 1)], prev[i + 1], a.diagonal
            )
            v = rho * (free_step(v) + (dt * Lam / 2.0) * forcing)
            tn[i] = v
        terms.append(tn)
    return PerturbationSeries(terms=terms, dt=dt)
