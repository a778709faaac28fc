"""Acceptance checks: one function per verdict, shared by the test suite
and the command-line ``verify`` runner.

Each ``criterion_N`` returns a dict with keys ``id``, ``title``, ``passed``,
``detail`` and ``seconds``.  The checks are deterministic: every random
draw is seeded.
"""

import time

import numpy as np

from .convex_diffusion import (
    convex_diffusion_simulate,
    cosine_perturbed_potential,
    exact_gaussian_path,
    feynman_kac_estimate,
    path_action_hessian_probe,
    quadratic_potential,
    stationary_moments_check,
)
from .environments import (
    CoefficientMap,
    PotentialSpec,
    coefficient_field,
    langevin_simulate,
)
from .field_theory import (
    TerminalFunctional,
    correlation_identity_check,
    malliavin_fd_check,
    massive_lattice_greens,
    poincare_variance_check,
    thm13_decay_check,
)
from .homogenize import (
    a_hom_extract,
    avg_greens_mc,
    corrector_solve,
    greens_hat_formula,
    greens_hat_quadrature,
    neumann_series_q,
    q_matrix_single,
    rate_fit,
    sample_norm,
    t_operator_apply,
)
from .lattice import (
    EllipticityPair,
    PeriodicCube,
    heat_kernel_solver,
    heat_kernel_table,
    hom_gaussian_kernel,
)
from .parabolic import (
    CoefficientField,
    aronson_fit,
    constant_coefficients,
    damped_perturbation_terms,
    damped_resolvent,
    div_a_grad,
    greens_backward,
    greens_backward_matrix,
    greens_perturbation_terms,
    spacetime_norm,
)

FAST_CRITERIA = (1, 2, 4, 5, 6, 7, 8, 10)
ALL_CRITERIA = tuple(range(1, 14))


def _result(cid, title, passed, detail, t0):
    return {
        "id": cid,
        "title": title,
        "passed": bool(passed),
        "detail": detail,
        "seconds": round(time.time() - t0, 2),
    }


def _dipole_field(d, L, a_dip, m, dt, n_steps, seed):
    cube = PeriodicCube(d, L)
    V = PotentialSpec("dipole", c=1.0, a_dip=a_dip)
    cmap = CoefficientMap("matrix-of-gradient", potential=V)
    traj = langevin_simulate(V, m, cube, dt, n_steps, seed=seed)
    return coefficient_field(traj, cmap)


def criterion_1():
    """Heat-kernel solver vs. Bessel-product closed form."""
    t0 = time.time()
    sup_err = 0.0
    mass_dev = 0.0
    for d, radius in [(1, 60), (2, 30)]:
        for t in (0.3, 2.0, 10.0):
            oracle = heat_kernel_table(d, radius, t)
            solved = heat_kernel_solver(d, radius, t)
            sup_err = max(sup_err, float(np.abs(solved - oracle).max()))
    # the mass sum needs a larger truncation radius in d=2: the Bessel tail
    # beyond radius 30 at t=10 is itself of order 1e-10
    for d, radius in [(1, 60), (2, 40)]:
        for t in (0.3, 2.0, 10.0):
            mass_dev = max(
                mass_dev, abs(float(heat_kernel_table(d, radius, t).sum()) - 1.0)
            )
    passed = sup_err < 1e-10 and mass_dev < 1e-10
    detail = f"sup|solver-oracle|={sup_err:.2e} (tol 1e-10), |mass-1|={mass_dev:.2e}"
    return _result(1, "heat-kernel Bessel oracle", passed, detail, t0)


def criterion_2():
    """Green's-matrix row and source sums equal one on dipole environments."""
    t0 = time.time()
    worst = 0.0
    for k in range(20):
        a = _dipole_field(2, 16, 0.3, 1.0, 0.1, 10, seed=200 + k)
        _, mats = greens_backward_matrix(a, t_index=10)
        worst = max(worst, float(np.abs(mats.sum(axis=1) - 1.0).max()))
        worst = max(worst, float(np.abs(mats.sum(axis=2) - 1.0).max()))
    passed = worst < 1e-8
    detail = f"max sum-rule deviation {worst:.2e} over 20 environments (tol 1e-8)"
    return _result(2, "Green's function sum rules", passed, detail, t0)


def criterion_3():
    """Gaussian-envelope constant stabilizes under sample doubling."""
    t0 = time.time()
    rng = np.random.default_rng(3)
    tables = []
    for k in range(100):
        a = _dipole_field(2, 12, 0.3, 1.0, 0.1, 40, seed=300 + k)
        tables.append(greens_backward(a, int(rng.integers(a.cube.n_sites)), 40))
    fit = aronson_fit(tables)
    detail = (
        f"C(50)={fit['C_half']:.4f}, C(100)={fit['C_hat']:.4f}, "
        f"growth={fit['growth']:+.2%} (tol +10%)"
    )
    return _result(3, "Gaussian envelope stability", fit["passes"], detail, t0)


def criterion_4():
    """Damped-resolvent norm bound on random (environment, forcing) pairs."""
    t0 = time.time()
    rng = np.random.default_rng(4)
    violations = 0
    worst_ratio = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 3))
        cube = PeriodicCube(d, 8)
        nt = int(rng.integers(3, 9))
        lam = float(rng.uniform(0.3, 1.0))
        Lam = float(rng.uniform(1.0, 2.0))
        dt = 0.9 * 2.0 / (4 * d * Lam)
        vals = rng.uniform(lam, Lam, size=(nt, d, cube.n_sites))
        a = CoefficientField(cube, dt, vals, EllipticityPair(lam, Lam))
        m = 10.0 ** rng.uniform(-1.0, 0.5)
        g = rng.standard_normal((nt + 1, cube.n_sites))
        v = damped_resolvent(a, m, g)
        ratio = spacetime_norm(v, dt) / (2.0 / m**2 * spacetime_norm(g, dt))
        worst_ratio = max(worst_ratio, ratio)
        if ratio > 1.0 + 1e-12:
            violations += 1
    passed = violations == 0
    detail = f"0 violations required; got {violations}, worst ratio {worst_ratio:.3f}"
    return _result(4, "damped resolvent bound", passed, detail, t0)


def criterion_5():
    """Perturbation-series term ratios and geometric partial-sum residuals."""
    t0 = time.time()
    rng = np.random.default_rng(5)
    lam, Lam = 0.5, 1.5
    contrast = 1.0 - lam / Lam
    worst_term_ratio = 0.0
    worst_resid_ratio = 0.0
    for seed in range(4):
        cube = PeriodicCube(1, 8)
        vals = rng.uniform(lam, Lam, size=(20, 1, cube.n_sites))
        a = CoefficientField(cube, 0.1, vals, EllipticityPair(lam, Lam))
        g = rng.standard_normal((21, cube.n_sites))
        dser = damped_perturbation_terms(a, 1.0, g, 7)
        norms = [spacetime_norm(term, a.dt) for term in dser.terms]
        for n in range(min(6, len(norms) - 1)):
            worst_term_ratio = max(worst_term_ratio, norms[n + 1] / norms[n])
        table = greens_backward(a, 0, 20)
        series = greens_perturbation_terms(a, 0, t_index=20, n_max=8)
        resids = [
            spacetime_norm(ps - table.values, a.dt) for ps in series.partial_sums()
        ]
        for n in range(len(resids) - 1):
            worst_resid_ratio = max(worst_resid_ratio, resids[n + 1] / resids[n])
    bound = contrast + 0.05
    passed = worst_term_ratio <= bound and worst_resid_ratio <= bound
    detail = (
        f"term ratio {worst_term_ratio:.3f}, residual ratio "
        f"{worst_resid_ratio:.3f} (bound {bound:.3f})"
    )
    return _result(5, "perturbation series decay", passed, detail, t0)


def criterion_6():
    """Cell-problem oracle: harmonic mean for a 1D two-phase medium."""
    t0 = time.time()
    cube = PeriodicCube(1, 32)
    vals = np.where(np.arange(32) % 2 == 0, 1.0, 4.0)[None, None, :]
    a = CoefficientField(cube, 0.1, vals.copy(), EllipticityPair(1.0, 4.0))
    etas = np.array([1e-1, 1e-2, 1e-3])
    qs = [q_matrix_single(corrector_solve(a, [0.0], eta=float(e)), a) for e in etas]
    out = a_hom_extract(etas, qs)
    err = abs(out["a_hom"][0, 0] - 1.6)
    cube2 = PeriodicCube(2, 6)
    ac = constant_coefficients(cube2, 0.05, 1.7, n_times=4)
    qc = q_matrix_single(corrector_solve(ac, [0.0, 0.0], eta=0.01), ac)
    const_err = float(np.abs(qc - 1.7 * np.eye(2)).max())
    passed = err <= 0.016 and const_err < 1e-12
    detail = (
        f"two-phase a_hom={out['a_hom'][0, 0]:.5f} vs 1.6 (err {err:.1e}, "
        f"tol 1.6e-2); constant-a error {const_err:.1e} (tol 1e-12)"
    )
    return _result(6, "cell-problem oracle", passed, detail, t0)


def criterion_7():
    """Series and corrector q agree; averaging operator is a contraction."""
    t0 = time.time()
    cube = PeriodicCube(1, 32)
    vals = np.where(np.arange(32) % 2 == 0, 1.0, 4.0)[None, None, :]
    a = CoefficientField(cube, 0.1, vals.copy(), EllipticityPair(1.0, 4.0))
    eta = 0.01
    q_corr = q_matrix_single(corrector_solve(a, [0.0], eta=eta), a)
    q_series, _ = neumann_series_q([a], [0.0], eta, m_max=80)
    diff_two_phase = abs(q_series.value[0, 0] - q_corr[0, 0])
    rng = np.random.default_rng(7)
    cube_t = PeriodicCube(1, 8)
    vals_t = rng.uniform(1.0, 2.0, size=(6, 1, cube_t.n_sites))
    at = CoefficientField(cube_t, 0.05, vals_t, EllipticityPair(1.0, 2.0))
    q_corr_t = q_matrix_single(corrector_solve(at, [0.0], eta=0.05), at)
    q_series_t, _ = neumann_series_q([at], [0.0], 0.05, m_max=60)
    diff_time = abs(q_series_t.value[0, 0] - q_corr_t[0, 0])
    cube_c = PeriodicCube(2, 6)
    worst = 0.0
    for _ in range(100):
        g = rng.standard_normal((3, 2, cube_c.n_sites))
        xi = rng.uniform(-np.pi, np.pi, size=2)
        eta_c = 10.0 ** rng.uniform(-3, 0)
        out = t_operator_apply(cube_c, g, xi, eta_c, 0.1, 2.0)
        worst = max(worst, sample_norm(out) / sample_norm(g))
    passed = diff_two_phase < 1e-5 and diff_time < 1e-6 and worst <= 1.0 + 1e-6
    detail = (
        f"|q_series-q_corrector|: two-phase {diff_two_phase:.1e} (tol 1e-5), "
        f"time-dependent {diff_time:.1e} (tol 1e-6); worst contraction "
        f"ratio {worst:.6f}"
    )
    return _result(7, "method equivalence and contraction", passed, detail, t0)


def criterion_8():
    """Fourier-Laplace closed form vs. direct time quadrature."""
    t0 = time.time()
    worst = 0.0
    for d, a_diag in [(1, [1.0]), (1, [0.7]), (2, [1.3, 0.8]), (2, [1.0, 1.0])]:
        for xi in ([0.5] * d, [1.2] * d, [2.0] * d):
            for eta in (0.3, 1.0):
                lhs = greens_hat_quadrature(a_diag, xi, eta, radius=60)
                rhs = greens_hat_formula(np.diag(a_diag), xi, eta)
                worst = max(worst, abs(lhs - rhs))
    passed = worst < 1e-8
    detail = f"max |quadrature - formula| = {worst:.2e} over grid (tol 1e-8)"
    return _result(8, "Fourier-Laplace consistency", passed, detail, t0)


def criterion_9():
    """Space-time correlation identity: quadratic oracle and dipole check."""
    t0 = time.time()
    exact = abs(massive_lattice_greens(PeriodicCube(1, 64), 1.0, [0]) - 5**-0.5)
    cube = PeriodicCube(1, 16)
    Vq = PotentialSpec("quadratic", c=1.0)
    out_q = correlation_identity_check(
        Vq, 1.0, cube, [[0], [2]], n_samples=10000, dt=0.02, seed=9,
        anchors=[0, 8], batch=200,
    )
    worst_q = 0.0
    for p, x in enumerate([[0], [2]]):
        oracle = massive_lattice_greens(cube, 1.0, x)
        c00 = massive_lattice_greens(cube, 1.0, [0])
        # 4th-moment bound on a single side's Monte Carlo error
        sigma_side = np.sqrt((c00 * c00 + oracle * oracle) / out_q["n_samples"])
        for side in ("lhs", "rhs"):
            worst_q = max(worst_q, abs(out_q[side][p] - oracle) / (3 * sigma_side))
    Vd = PotentialSpec("dipole", c=1.0, a_dip=0.2)
    cube_d = PeriodicCube(1, 12)
    out_d = correlation_identity_check(
        Vd, 1.0, cube_d, [[x] for x in range(-4, 5)], n_samples=10000,
        dt=0.025, seed=19, anchors=[0, 4, 8], batch=200,
    )
    z_max = float(np.max(np.abs(out_d["difference"]) / out_d["sigma"]))
    passed = exact < 1e-4 and worst_q <= 1.0 and z_max <= 3.0
    detail = (
        f"deterministic oracle err {exact:.1e} (tol 1e-4); quadratic sides "
        f"within {worst_q:.2f}x of 3 sigma; dipole max|z|={z_max:.2f} (tol 3)"
    )
    return _result(9, "correlation identity", passed, detail, t0)


def criterion_10():
    """Pathwise noise-sensitivity identity via finite differences."""
    t0 = time.time()
    cube = PeriodicCube(1, 8)
    V = PotentialSpec("dipole", c=1.0, a_dip=0.3)
    errs = []
    for dt, s, t in [(1e-3, 50, 100), (5e-4, 100, 200)]:
        out = malliavin_fd_check(
            V, 1.0, cube, dt, y_site=1, s_index=s, x_site=0, t_index=t,
            delta=1e-5, seed=10,
        )
        errs.append(out["rel_error"])
    passed = errs[0] < 1e-3 and errs[1] < 0.65 * errs[0]
    detail = (
        f"rel err {errs[0]:.2e} at dt=1e-3 (tol 1e-3); {errs[1]:.2e} at "
        f"dt=5e-4 (ratio {errs[1] / errs[0]:.2f}, must halve within 0.65)"
    )
    return _result(10, "noise-sensitivity identity", passed, detail, t0)


def criterion_11():
    """Variance bounded by the expected squared pathwise derivative."""
    t0 = time.time()
    cube = PeriodicCube(1, 8)
    Vq = PotentialSpec("quadratic", c=1.0)
    Vd = PotentialSpec("dipole", c=1.0, a_dip=0.3)

    def site_grad(phi):
        g = np.zeros_like(phi)
        g[..., 0] = 1.0
        return g

    cases = [
        (Vq, TerminalFunctional(
            value=lambda phi: phi[..., 0], grad=site_grad, name="phi(0)")),
        (Vd, TerminalFunctional(
            value=lambda phi: np.tanh(phi).sum(axis=-1),
            grad=lambda phi: 1.0 / np.cosh(phi) ** 2, name="sum tanh")),
        (Vd, TerminalFunctional(
            value=lambda phi: np.sin(phi).sum(axis=-1),
            grad=np.cos, name="sum sin")),
    ]
    ratios, ok = [], True
    for k, (V, F) in enumerate(cases):
        out = poincare_variance_check(V, 1.0, cube, 0.05, 120, F, 10000, seed=11 + k)
        ratios.append(f"{F.name}: {out['ratio']:.3f}")
        ok = ok and out["passes"]
    detail = "variance/bound ratios (tol 1 + 3 sigma): " + ", ".join(ratios)
    return _result(11, "variance inequality", ok, detail, t0)


def criterion_12():
    """Finite-dimensional diffusion: moments, integrator, estimator, probe."""
    t0 = time.time()
    mom = stationary_moments_check(
        np.diag([1.0, 4.0]), [1.0, 1.0], lags=[], dt=0.1, n_keep=20000, seed=12
    )
    cov = stationary_moments_check(
        [[2.0]], [0.0], lags=[0.0, 1.0], dt=0.02, n_keep=40000, seed=13
    )
    moments_ok = mom["mean_passes"] and all(l["passes"] for l in cov["lags"])

    A = np.array([[1.5, 0.4], [0.4, 0.8]])
    b = np.array([0.2, -0.1])
    W = quadratic_potential(A, b)
    errs = []
    for dt, n in [(0.1, 10), (0.05, 20)]:
        path = convex_diffusion_simulate(W, dt, n, noise_scale=0.0, phi0=[1.0, -1.0])
        exact = exact_gaussian_path(A, b, dt, np.zeros((n, 2)), phi0=[1.0, -1.0])
        errs.append(np.abs(path.values - exact).max())
    path, incr = convex_diffusion_simulate(W, 0.05, 200, seed=14, return_increments=True)
    noisy_gap = float(np.abs(path.values - exact_gaussian_path(A, b, 0.05, incr)).max())
    euler_ok = errs[1] < 0.7 * errs[0] and noisy_gap < 0.15

    Wc = cosine_perturbed_potential(0.3)
    fk = feynman_kac_estimate(
        Wc, lambda p: p[:, 0] ** 2, T=5.0, n_paths=30000, dt=0.01, seed=15
    )
    path_c = convex_diffusion_simulate(Wc, 0.02, 120000, seed=16)
    vals = path_c.values[20000:, 0] ** 2
    ta = float(vals.mean())
    ta_sigma = float(vals[::50].std() / np.sqrt(vals[::50].size / 20.0))
    fk_gap = abs(fk["estimate"] - ta)
    fk_tol = 3.0 * float(np.hypot(fk["sigma"], ta_sigma))
    fk_ok = (not fk["degenerate"]) and fk_gap <= fk_tol

    probe_q = path_action_hessian_probe(
        quadratic_potential(np.eye(1)), np.full(41, 1.5 * np.pi), h=0.25
    )
    probe_c = path_action_hessian_probe(Wc, np.full(41, 1.5 * np.pi), h=0.25)
    probe_ok = probe_q["min_eigenvalue"] > 0 and probe_c["min_eigenvalue"] < -1e-3

    passed = moments_ok and euler_ok and fk_ok and probe_ok
    detail = (
        f"moments {'ok' if moments_ok else 'FAIL'}; integrator halving "
        f"{errs[1] / errs[0]:.2f}, noisy gap {noisy_gap:.3f}; estimator gap "
        f"{fk_gap:.4f} vs 3 sigma {fk_tol:.4f}; probe eigenvalues "
        f"{probe_q['min_eigenvalue']:.3f} / {probe_c['min_eigenvalue']:.3f}"
    )
    return _result(12, "finite-dimensional diffusion suite", passed, detail, t0)


def _c_hom_isotropic(d, L, nt, a_dip, m, dt, etas, n_env, seed):
    """Homogenized scalar coefficient from the space-time cell problem,
    extrapolated over a regularization ladder and averaged over samples."""
    xi = [0.0] * d
    per_eta = {e: [] for e in etas}
    for k in range(n_env):
        a = _dipole_field(d, L, a_dip, m, dt, nt, seed=seed + k)
        for e in etas:
            q = q_matrix_single(corrector_solve(a, xi, eta=float(e)), a)
            per_eta[e].append(q)
    qs = [np.mean(per_eta[e], axis=0) for e in etas]
    out = a_hom_extract(np.array(etas), qs)
    return float(np.trace(out["a_hom"]).real / d)


def criterion_13():
    """Decay-rate measurements beyond the leading homogenized kernel."""
    t0 = time.time()
    # -- part (a): d=3 environment-averaged kernel vs. Gaussian profile ----
    c3 = _c_hom_isotropic(3, 8, 16, a_dip=0.3, m=1.0, dt=0.1,
                          etas=[0.13, 0.013, 0.0013], n_env=4, seed=1300)
    cube3 = PeriodicCube(3, 16)
    V3 = PotentialSpec("dipole", c=1.0, a_dip=0.3)
    cmap = CoefficientMap("matrix-of-gradient", potential=V3)
    dt3 = 0.1
    t_idx = np.array([20, 30, 45, 68, 100])

    def sampler(seed_seq):
        traj = langevin_simulate(V3, 1.0, cube3, dt3, 100, seed=seed_seq)
        return coefficient_field(traj, cmap)

    mc = avg_greens_mc(sampler, cube3, cube3.site_index([0, 0, 0]), t_idx,
                       n_samples=100, seed=1301)
    shifts = np.arange(-3, 4) * 16
    images = np.stack(np.meshgrid(shifts, shifts, shifts, indexing="ij"),
                      axis=-1).reshape(-1, 3)
    origin = cube3.site_index([0, 0, 0])
    diffs_a, se_a = [], []
    for j, ti in enumerate(t_idx):
        ref = sum(hom_gaussian_kernel(im, ti * dt3, c3 * np.eye(3)) for im in images)
        diffs_a.append(abs(mc["mean"][j, origin] - ref))
        se_a.append(mc["stderr"][j, origin])
    rep_a = rate_fit(1.3 * t_idx * dt3 + 1.0, np.array(diffs_a),
                     mode="greens-decay", d=3)
    part_a_ok = rep_a.alpha_hat > 0 and rep_a.alpha_lower > 0

    # -- part (b): d=2 gradient-level elliptic kernel decay ----------------
    m2, dt2, L2 = 0.25, 0.1, 32
    c2 = _c_hom_isotropic(2, 12, 32, a_dip=0.7, m=m2, dt=dt2,
                          etas=[0.15, 0.015, 0.0015], n_env=64, seed=1400)
    cube2 = PeriodicCube(2, L2)
    V2 = PotentialSpec("dipole", c=1.0, a_dip=0.7)
    cmap2 = CoefficientMap("matrix-of-gradient", potential=V2)
    n_steps = int(np.ceil(-np.log(1e-5) / (m2 * m2) / dt2))
    rho = np.exp(-m2 * m2 * dt2)
    w = rho ** np.arange(n_steps) * (1 - rho) / (m2 * m2)
    # reference: the identical damped time sum for constant coefficients,
    # evaluated exactly mode by mode
    mu = cube2.laplacian_symbol()
    bsym = 1.0 - dt2 * c2 * mu
    geo = (1 - rho) / (m2 * m2) * (1 - (rho * bsym) ** n_steps) / (1 - rho * bsym)
    r_field = np.fft.ifftn((0.5 * (1 + bsym) * geo).reshape((L2, L2))).real.ravel()

    bases = [[0, 0], [16, 0], [0, 16], [16, 16], [8, 8], [24, 8], [8, 24], [24, 24]]
    # probe offsets relative to the source pair (0, e): a single angular
    # family with uniform deviation sign, so the log-log fit is not
    # inflated by angular scatter
    probes = [(0, 1), (-1, 1), (0, 2), (-1, 2), (-2, 2), (0, 3), (-1, 3),
              (-2, 3), (0, 4)]
    radii = np.array([float(np.hypot(*v)) for v in probes])
    srcs, src_of = [], {}
    for bx, by in bases:
        for ox, oy in ([0, 0], [1, 0], [0, 1]):
            src_of[(bx + ox, by + oy)] = len(srcs)
            srcs.append(cube2.site_index([bx + ox, by + oy]))
    triples = []
    for v in probes:
        tri = []
        for bx, by in bases:
            s0 = src_of[(bx, by)]
            for k, (ox, oy) in ((0, (1, 0)), (1, (0, 1))):
                sk = src_of[(bx + ox, by + oy)]
                # transpose the offset for the e2 pair; average the
                # reflection across the source axis
                vs = {(v[0], v[1]), (v[0], -v[1])} if k == 0 else \
                     {(v[1], v[0]), (-v[1], v[0])}
                for vx, vy in vs:
                    tri.append((sk, s0, cube2.site_index([bx + vx, by + vy])))
        triples.append(tri)
    n_env = 600
    first = np.zeros((n_env, len(probes)))
    for s in range(n_env):
        traj = langevin_simulate(V2, m2, cube2, dt2, n_steps, seed=1500 + s)
        a = coefficient_field(traj, cmap2)
        u = np.zeros((len(srcs), cube2.n_sites))
        for k, si in enumerate(srcs):
            u[k, si] = 1.0
        E = np.zeros_like(u)
        for i in range(n_steps):
            un = u - dt2 * div_a_grad(cube2, a.values[i][None], u, diagonal=True)
            E += w[i] * 0.5 * (u + un)
            u = un
        for j, tri in enumerate(triples):
            first[s, j] = np.mean([E[sk, x] - E[s0, x] for sk, s0, x in tri])

    refs = np.array([
        r_field[cube2.site_index([v[0] - 1, v[1]])]
        - r_field[cube2.site_index([v[0], v[1]])]
        for v in probes
    ])
    d1 = np.abs(first.mean(axis=0) - refs)
    s1 = first.std(axis=0, ddof=1) / np.sqrt(n_env)
    rep_b = thm13_decay_check(d1, radii, d=2, base_exponent=1.0, sigma=s1)
    part_b_ok = rep_b.extras["excess"] > 0 and rep_b.extras["excess_lower"] > 0
    passed = part_a_ok and part_b_ok
    detail = (
        f"d=3 parabolic: excess {rep_a.alpha_hat:.2f} "
        f"(lower {rep_a.alpha_lower:.2f}); d=2 elliptic first-difference: "
        f"excess {rep_b.extras['excess']:.2f} "
        f"(lower {rep_b.extras['excess_lower']:.2f}, "
        f"{rep_b.extras['excluded']} of {len(probes)} probes excluded)"
    )
    return _result(13, "decay-rate measurements", passed, detail, t0)


_CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
    9: criterion_9, 10: criterion_10, 11: criterion_11, 12: criterion_12,
    13: criterion_13,
}


def run_criterion(cid):
    return _CRITERIA[cid]()


def run_criteria(tier="fast"):
    """Run the acceptance checks for a tier ('fast' or 'full')."""
    ids = FAST_CRITERIA if tier == "fast" else ALL_CRITERIA
    return [run_criterion(cid) for cid in ids]
