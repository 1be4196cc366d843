#!/usr/bin/env python3
"""The W state: open-boundary bond 2, cyclic single-tensor bond 2n, and the
transfer-matrix argument forcing any cyclic representation to bond >= sqrt(n).

The cyclic tensor's transfer matrix, rescaled to unit spectral radius,
carries every n-th root of unity in its spectrum because the state is
n-periodic under the site shift; since the transfer matrix has side D^2,
that needs D^2 >= n.
"""

import numpy as np

from mpdo_kit import (
    contract_cyclic,
    contract_train,
    periodicity_lower_bound,
    transfer_matrix,
    w_state_generators,
)

print(f"{'n':>3} {'open resid':>12} {'cyclic resid':>13} {'bond':>5} "
      f"{'roots found':>12} {'bound':>6}")
for n in range(3, 11):
    fam = w_state_generators(n)
    open_res = np.linalg.norm(contract_train(fam.open_train).ravel() - fam.vector)
    cyc_res = np.linalg.norm(contract_cyclic(fam.cyclic_site, n).ravel() - fam.vector)
    holds, bound = periodicity_lower_bound(fam.cyclic_site, n)
    print(f"{n:>3} {open_res:>12.2e} {cyc_res:>13.2e} {fam.cyclic_site.bond_dim:>5} "
          f"{str(holds):>12} {bound:>6}")

print()
print("peripheral spectrum for n = 6, against the 6th roots of unity:")
fam = w_state_generators(6)
eigs = np.linalg.eigvals(transfer_matrix(fam.cyclic_site))
scaled = eigs / np.abs(eigs).max()
peripheral = scaled[np.abs(np.abs(scaled) - 1.0) < 1e-9]
angles = np.sort(np.round(np.angle(peripheral) / (2 * np.pi / 6), 6))
print(f"  {len(peripheral)} peripheral eigenvalues at angles (units of 2 pi/6): {angles}")

print()
print("a product state is 1-periodic: no bound beyond the trivial one")
from mpdo_kit import TiSiteTensor

site = TiSiteTensor(np.array([1.0, 0.0]).reshape(1, 2, 1, 1))
holds, bound = periodicity_lower_bound(site, 3)
print(f"  holds = {holds}, certified bound = {bound}")
