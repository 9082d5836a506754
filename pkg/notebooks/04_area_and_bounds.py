# %% [markdown]
# # Areas of modular curves and the bound on vertical contact
#
# Normalised hyperbolic area (1/2pi) int omega, omega = i dtau^dtaubar / (4 Im^2 tau),
# equals g - 1 + nu_inf/2 for the principal congruence subgroups.

# %%
from bettilab import harness as HN
from bettilab import surface as S

print("SL(2,Z):", HN.sl2z_area(), " expected 1/12")
print("Gamma(2):", HN.gamma2_area(), " expected 1/2")
for k in (2, 3, 4, 5):
    a = HN.cmd_area(k)
    print(f"k={k}: numeric {a.numeric:.10f} prediction {a.prediction}  ({a.note})")

# %% [markdown]
# Degree bookkeeping for the fixture and both forms of the bound.

# %%
dr = S.degree_report(S.fixture_spec())
print(dr)

# %%
rep = HN.cmd_bound(S.fixture_spec())
print("points of vertical contact:", rep.bound_lhs, " bound:", rep.bound_rhs, "/", rep.bound_rhs_uu)
print(rep.verdicts)
