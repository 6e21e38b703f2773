"""
Finding the group a covariance respects
=======================================

Two routes to the matched group. With snapshots only, candidate groups
are screened by the cross-validation dispersion ``D_CV``. With a
population covariance, the sequential generalized eigenvalue search
builds the group one generator at a time.
"""

from algdiv.groups import Permutation, enumerate_abelian_groups
from algdiv.matching import library_match, perm_residual, sequential_gevp
from algdiv.signals import CovModel, build_covariance, complete_graph, cycle_graph, sample_snapshots

# %% Library matching on three noisy snapshots of a two-tone signal
M = 32
library = enumerate_abelian_groups(M)
snaps = sample_snapshots(CovModel("tones", M, {"freqs": [5, 19]}), 3, 20.0, seed=1)
rep = library_match(snaps, library)
for label, score in rep.ranked[:4]:
    print(f"  D_CV {label:>16}: {score:.3e}")
print("selected:", rep.selected)

# %% Graph diffusion on K4: the full symmetric group is recovered
R = build_covariance(CovModel("graph_diffusion", 4, {"graph": complete_graph(4)}))
trace = sequential_gevp(R)
for it in trace.iterations:
    print(f"  {str(it.rounded_perm):>12}  residual={it.residual:.1e}  accepted={it.accepted}  |G|={it.group_order}")
print("final order", trace.final_group.order, "termination", trace.termination)

# %% The six-cycle: only rotations are found from the natural basis
R6 = build_covariance(CovModel("graph_diffusion", 6, {"graph": cycle_graph(6)}))
trace6 = sequential_gevp(R6)
print("C6 final order", trace6.final_group.order, "termination", trace6.termination)
# the reflections are still symmetries, just not reached
refl = Permutation(tuple((-k) % 6 for k in range(6)))
print("residual of the reflection k -> -k:", perm_residual(R6, refl))
