# %% [markdown]
# # Canonical height as an integral of sigma^* mu
#
# The density |z' - beta2 tau'|^2 / Im(tau) does not depend on the branch, so
# principal lifts are enough pointwise.  Near each bad fibre the integral
# over a small disk is done by Stokes on the loop; everything else is a
# smooth quadrature over the sphere.

# %%
import numpy as np

from bettilab import height as H
from bettilab import surface as S

spec = S.fixture_spec()
for t in (0.3 + 0.2j, -0.4 + 0.6j, 1.7 - 0.2j):
    print(t, H.density_arrays(spec, np.array([t]))[0], H.jacobian_density(spec, t))

# %% [markdown]
# Disk terms at each bad fibre, checked against plain quadrature on an annulus.

# %%
for d in H.cusp_disks(spec):
    inner, info = H.disk_integral(d, 0.05)
    outer, _ = H.disk_integral(d, 0.1)
    print(f"{str(d.point):>22}  W={info['W']} a={info['a']:+.3f} turns={info['turns']}  H(0.05)={inner:.10f}  H(0.1)-H(0.05)={outer - inner:.10f}")

# %% [markdown]
# The mass near a cusp falls off only like 1/log(1/rho)^2, which is why
# removing eps-disks and extrapolating in eps converges slowly.

# %%
d = H.cusp_disks(spec)[2]
for rho in (1e-2, 1e-4, 1e-6, 1e-8):
    v = H.disk_integral(d, rho)[0]
    print(f"rho={rho:.0e}  H={v:.6e}  1/sqrt(H)={1 / np.sqrt(v):.4f}")

# %% [markdown]
# A quick height on a coarse grid, then the default (a minute or so).

# %%
cheap = H.QuadratureConfig(n_psi=64, n_theta=128, n_annulus=16, max_depth=1, panel_tol=1e-6)
rep = H.canonical_height(spec, None, cheap)
print(rep.value, "+-", rep.error_estimate, rep.rational)
for line in rep.diagnostics:
    print("  ", line)

# %%
rep = H.canonical_height(spec)
print(f"h(sigma) = {rep.value:.14f} +- {rep.error_estimate:.1e}  ~ {rep.rational[0]}/{rep.rational[1]}")

# %% [markdown]
# Quadraticity holds pointwise for the density already.

# %%
t = np.array([0.3 + 0.2j, -0.4 + 0.6j, 1.7 - 0.2j])
for n in (2, 3):
    print(n, H.pointwise_quadraticity(spec, n, t))
