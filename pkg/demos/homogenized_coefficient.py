"""Effective diffusivity from the space-time cell problem.

Two computations: (1) the classical 1D two-phase oracle, where the exact
answer is the harmonic mean, and (2) a fluctuating dipole environment in
d=2, where the coefficient is genuinely unknown and we report the
regularization ladder with Richardson extrapolation.
"""

import numpy as np

from parahom import (
    CoefficientMap,
    EllipticityPair,
    PeriodicCube,
    PotentialSpec,
    a_hom_extract,
    coefficient_field,
    corrector_solve,
    langevin_simulate,
    q_matrix,
)
from parahom.parabolic import CoefficientField
from parahom.homogenize import q_matrix_single

# -- 1D two-phase medium: a in {1, 4}, exact a_hom = harmonic mean = 1.6 ------

cube = PeriodicCube(1, 32)
vals = np.where(np.arange(32) % 2 == 0, 1.0, 4.0)[None, None, :]
a = CoefficientField(cube, 0.1, vals.copy(), EllipticityPair(1.0, 4.0))

etas = np.array([1e-1, 1e-2, 1e-3])
qs = [q_matrix_single(corrector_solve(a, [0.0], eta=float(e)), a) for e in etas]
out = a_hom_extract(etas, qs)
print("two-phase medium:")
for e, q in zip(etas, qs):
    print(f"  eta={e:.0e}  q={q[0, 0].real:.6f}")
print(f"  extrapolated a_hom = {out['a_hom'][0, 0]:.6f} (exact 1.6)\n")

# -- fluctuating dipole environment in d=2 ------------------------------------

V = PotentialSpec("dipole", c=1.0, a_dip=0.5)
cmap = CoefficientMap("matrix-of-gradient", potential=V)
cell = PeriodicCube(2, 8)
etas = np.array([0.15, 0.015, 0.0015])

qs = []
for eta in etas:
    pairs = []
    for k in range(8):
        traj = langevin_simulate(V, 0.5, cell, 0.1, 16, seed=40 + k)
        af = coefficient_field(traj, cmap)
        pairs.append((corrector_solve(af, [0.0, 0.0], eta=float(eta)), af))
    qs.append(q_matrix(pairs))

out = a_hom_extract(etas, [q.value for q in qs])
print("dipole environment (d=2, a_dip=0.5, 8 samples per eta):")
for e, q in zip(etas, qs):
    print(f"  eta={e:.2e}  q_00={q.value[0, 0].real:.5f} "
          f"+- {q.stderr[0, 0]:.5f}")
c_hom = np.trace(np.real(out["a_hom"])) / 2
print(f"  extrapolated a_hom trace/2 = {c_hom:.5f} "
      f"(ladder spread {out['uncertainty']:.1e})")
print(f"  environment coefficients live in [{V.window.lam:.2f}, "
      f"{V.window.Lam:.2f}]; homogenization pulls the value below the mean")
