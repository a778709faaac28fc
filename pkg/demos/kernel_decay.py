"""Environment-averaged Green's function vs. the homogenized Gaussian.

Averaging the random-coefficient kernel over dipole environments and
comparing with the constant-coefficient Gaussian profile at the
extrapolated effective diffusivity: the difference decays faster than the
kernel itself, and a log-log fit quantifies the extra decay.
"""

import numpy as np

from parahom import (
    CoefficientMap,
    PeriodicCube,
    PotentialSpec,
    a_hom_extract,
    avg_greens_mc,
    coefficient_field,
    corrector_solve,
    hom_gaussian_kernel,
    langevin_simulate,
    q_matrix,
    rate_fit,
)

d, L, dt, m = 1, 16, 0.1, 1.0
V = PotentialSpec("dipole", c=1.0, a_dip=0.3)
cmap = CoefficientMap("matrix-of-gradient", potential=V)
cube = PeriodicCube(d, L)

# effective coefficient from a small cell ensemble
etas = np.array([0.13, 0.013, 0.0013])
qs = []
for eta in etas:
    pairs = []
    for k in range(4):
        traj = langevin_simulate(V, m, PeriodicCube(d, 8), dt, 16, seed=70 + k)
        af = coefficient_field(traj, cmap)
        pairs.append((corrector_solve(af, [0.0], eta=float(eta)), af))
    qs.append(q_matrix(pairs).value)
c_hom = float(np.real(a_hom_extract(etas, qs)["a_hom"][0, 0]))
print(f"effective coefficient c_hom = {c_hom:.5f}")

# environment-averaged kernel at the origin for a ladder of times
t_idx = np.array([20, 30, 45, 68, 100])


def sampler(seed_seq):
    traj = langevin_simulate(V, m, cube, dt, int(t_idx[-1]), seed=seed_seq)
    return coefficient_field(traj, cmap)


mc = avg_greens_mc(sampler, cube, cube.site_index([0]), t_idx, 200, seed=71)

# reference: homogenized Gaussian folded over the torus images
images = np.arange(-3, 4)[:, None] * L
origin = cube.site_index([0])
print("\n  t      E G(0,t)      Gaussian      |diff|      stderr")
diffs = []
for j, ti in enumerate(t_idx):
    ref = sum(hom_gaussian_kernel(im, ti * dt, c_hom * np.eye(1)) for im in images)
    val = mc["mean"][j, origin]
    diffs.append(abs(val - ref))
    print(f"  {ti * dt:5.1f}  {val:.6e}  {ref:.6e}  {diffs[-1]:.2e}  "
          f"{mc['stderr'][j, origin]:.2e}")

rep = rate_fit(V.window.Lam * t_idx * dt + 1.0, np.array(diffs),
               mode="greens-decay", d=d)
print(f"\nkernel minus Gaussian decays with excess exponent "
      f"{rep.alpha_hat:.2f} (lower confidence {rep.alpha_lower:.2f})")
print("positive excess: the Gaussian profile captures the leading behavior")
