"""
Cheaper averages: stratification, orbit subsets, Level-2 profiles
=================================================================

Three ways of spending fewer samples. Stratifying a scalar stream into
blocks of ``M`` turns plain Monte Carlo into a shift-averaged estimate.
A short prefix of the orbit often reaches the full-orbit error floor.
A profile of per-band concentrations can itself be group-averaged.
"""

import numpy as np

from algdiv.eigentensor import Level1Profile, level2_estimate, two_class_profiles
from algdiv.experiments import coding_rate_models
from algdiv.groups import make_group
from algdiv.rankpromo import coding_rate_experiment, mc_pi, pi_speedup

# %% pi by plain and stratified sampling at the same draw budget
M, rounds = 64, 100
for mode in ("plain", "stratified"):
    err = [mc_pi(mode, M, M * rounds, seed=s)[1] for s in range(100)]
    print(f"{mode:>10}: rms error {np.sqrt(np.mean(np.square(err))):.2e}")
sp = pi_speedup(M, digits=6)
print(f"six digits: {sp.draws_plain:.3g} plain draws vs {sp.draws_stratified:.3g} stratified "
      f"({sp.speedup_draws:.0f}x in draws, {sp.speedup_rounds:.0f}x in rounds)")

# %% Orbit prefix length against structural entropy
models = coding_rate_models(32)
rows = coding_rate_experiment(list(models.values()), make_group("cyclic", M=32), names=list(models))
for r in rows:
    flag = " (diffuse)" if r.diffuse else ""
    print(f"{r.model:>16}: H={r.h_struct:4.2f} bits  n*={r.n_star:2d}  n*/2^H={r.ratio:4.2f}{flag}")

# %% Level-2: flat and ramped band profiles
X, y = two_class_profiles(seed=0)
p2 = np.array([level2_estimate(Level1Profile.of(v))[1] for v in X])
print(f"psi2 flat {p2[y == 0].mean():.4f} +- {p2[y == 0].std():.4f}, "
      f"ramped {p2[y == 1].mean():.4f} +- {p2[y == 1].std():.4f}")
