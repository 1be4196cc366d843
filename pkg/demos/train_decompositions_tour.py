#!/usr/bin/env python3
"""Tour of the basic decompositions of a chain operator.

Builds a few operators on 2-3 qubit sites, puts them in open train form,
reads off the Schmidt rank across cuts, and constructs purifications whose
Schmidt rank upper-bounds the purification rank.
"""

import numpy as np

from mpdo_kit import (
    PsdOperator,
    SiteSpec,
    contract_train,
    kron_chain,
    local_purification_spectral,
    mpo_train_form,
    operator_schmidt_rank,
    q_sqrt_rank,
)

rng = np.random.default_rng(0)


def rand_psd(dim, rank=None):
    x = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    return x @ x.conj().T


print("=== product operator: every rank is 1 ===")
product = kron_chain([rand_psd(2), rand_psd(2), rand_psd(2)])
op = PsdOperator(SiteSpec((2, 2, 2)), product)
train, osr = mpo_train_form(op)
puri = local_purification_spectral(op)
print(f"osr = {osr}, bond dims = {train.bond_dims}, purification osr_L = {puri.osr_L}")

print()
print("=== generic rank-4 mixed operator on 3 sites ===")
rho = rand_psd(8, rank=4)
op = PsdOperator(SiteSpec((2, 2, 2)), rho)
train, osr = mpo_train_form(op)
recon = contract_train(train)
err = np.linalg.norm(recon - op.data) / np.linalg.norm(op.data)
print(f"osr = {osr}, round-trip residual = {err:.2e}")
puri = local_purification_spectral(op)
print(f"purification: osr_L = {puri.osr_L} (so puri-rank <= {puri.osr_L}),"
      f" residual = {puri.residual:.2e}")
print(f"square bound holds: osr <= osr_L^2  ->  {osr} <= {puri.osr_L ** 2}")

print()
print("=== flip-symmetric two-site operator: osr 2 ===")
sx = np.array([[0.0, 1.0], [1.0, 0.0]])
flip_pair = np.eye(4) + np.kron(sx, sx)
op = PsdOperator(SiteSpec((2, 2)), flip_pair)
print(f"osr = {operator_schmidt_rank(op)}")

print()
print("=== maximally entangled projector: osr 4, purification rank 2 ===")
phi = np.zeros(4)
phi[0] = phi[3] = 1 / np.sqrt(2)
op = PsdOperator(SiteSpec((2, 2)), np.outer(phi, phi))
puri = local_purification_spectral(op)
print(f"osr = {operator_schmidt_rank(op)}, osr_L = {puri.osr_L}"
      f" (pure state: osr = osr_L^2)")

print()
print("=== Hermitian square roots by sign enumeration ===")
sigma = PsdOperator(SiteSpec((2, 2)), np.diag([0.0, 1.0, 1.0, 0.0]))
rank, signs = q_sqrt_rank(sigma)
print(f"embedded flip matrix: q-sqrt rank = {rank}, best signs = {signs.signs}")
sigma = PsdOperator(SiteSpec((2, 2)), np.eye(4))
rank, signs = q_sqrt_rank(sigma)
print(f"embedded all-ones matrix: q-sqrt rank = {rank} (rank-1 root exists)")
