# %% [markdown]
# # Periods, logarithms and monodromy
#
# The Legendre curve y^2 = x(x-1)(x-lam).  Periods come from the complex AGM;
# a quadrature along the segments between branch points serves as the check.

# %%
import numpy as np

from bettilab import periods as P

for lam in (0.5, 0.3 + 0.4j, 2 + 1j, -1.5 + 0.2j):
    agm = P.periods_agm(lam)
    quad, err = P.periods_oracle(lam)
    ok, M, dev = P.same_lattice(agm, quad)
    print(f"lam={lam!s:>12}  tau={agm.tau:.10f}  same lattice: {ok}  dev {dev:.1e}  change {M.tolist()}")

# %% [markdown]
# At lam = 1/2 the lattice is square.

# %%
print(P.reduce_gamma2(P.periods_agm(0.5).tau))

# %% [markdown]
# Continuing the basis around the punctures.  Loops around 0 and 1 give
# transvections (trace 2); the big loop around both gives trace -2, the
# additive monodromy at lam = infinity.

# %%
def loop_matrix(center, radius, n=96, start_angle=0.0):
    start = center + radius * np.exp(1j * start_angle)
    ctx = P.periods_continued(P.root_context(), start) if start != 0.5 else P.root_context()
    b0 = ctx.basis
    ctx = P.continue_along(ctx, P.circle_path(center, radius, n, start_angle))
    return np.rint(P.monodromy_matrix(b0, ctx.basis)).astype(int)


for name, (c, r, a) in {"around 0": (0, 0.2, 0.0), "around 1": (1, 0.2, np.pi), "around both": (0.5, 1.5, np.pi / 2)}.items():
    M = loop_matrix(c, r, start_angle=a)
    print(f"{name:>12}: {M.tolist()}  trace {np.trace(M)}")

# %% [markdown]
# The elliptic logarithm along a ray (Carlson R_F) against direct quadrature.

# %%
lam = 0.4 + 0.3j
for x in (2.0, -1 + 0.5j, 0.2 + 0.1j):
    y = np.sqrt(x * (x - 1) * (x - lam))
    pt = P.EllipticPoint(x, y)
    a = complex(P.elliptic_log_raw(x, y, lam)[0])
    b = P.elliptic_log_oracle(pt, lam)
    print(f"x={x!s:>10}  R_F {a:.12f}  quad {b:.12f}")
