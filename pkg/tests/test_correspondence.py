import itertools

import numpy as np
import pytest

from mpdo_kit.certificates import (
    FactorCertificate,
    NecessaryConditionError,
    check_factor_certificate,
    pair_traces,
)
from mpdo_kit.correspondence import (
    DiagBipartite,
    canonical_kind,
    decomposition_to_factorization,
    diag_embed,
    diag_extract,
    factorization_to_decomposition,
    verify_correspondence,
)
from mpdo_kit.decompositions import (
    local_purification_spectral,
    mixed_w_generator,
    mpo_train_form,
    operator_schmidt_rank,
)
from mpdo_kit.nonneg_factorizations import (
    cp_factorization_search,
    cpsdt_construct,
    hadamard_root_certificate,
    minimal_factorization,
    symmetric_factorization,
)
from mpdo_kit.tensor_core import PsdOperator, SiteSpec, UsageError, contract_train


def rand_cpsd(r, rng):
    x = rng.normal(size=(r, r)) + 1j * rng.normal(size=(r, r))
    return x @ x.conj().T


# ---------------------------------------------------------------------------
# embedding


def test_diag_embed_identity():
    sigma = diag_embed(np.eye(2))
    assert np.allclose(sigma.data, np.diag([1.0, 0.0, 0.0, 1.0]))
    assert sigma.sites.dims == (2, 2)


def test_diag_embed_all_ones():
    sigma = diag_embed(np.ones((2, 2)))
    assert np.allclose(sigma.data, np.eye(4))


def test_diag_embed_trace():
    rng = np.random.default_rng(0)
    m = rng.uniform(0, 1, (3, 4))
    assert abs(np.trace(diag_embed(m).data).real - m.sum()) < 1e-12


def test_diag_embed_mixed_w_scale():
    # the two-site spin-flip mixture equals the embedded flip matrix after
    # removing its 1/2 trace normalization
    rho, _ = mixed_w_generator(2)
    embedded = diag_embed(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(embedded.data, 2.0 * rho.data)


def test_diag_extract_roundtrip_exact():
    rng = np.random.default_rng(1)
    m = rng.uniform(0, 1, (4, 5))
    assert np.array_equal(diag_extract(diag_embed(m)), m)


def test_diag_extract_flip_mixture():
    rho, _ = mixed_w_generator(2)
    assert np.allclose(diag_extract(rho), 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_diag_extract_rejects_entangled_projector():
    phi = np.zeros(4)
    phi[0] = phi[3] = 1.0 / np.sqrt(2)
    op = PsdOperator(SiteSpec((2, 2)), np.outer(phi, phi))
    with pytest.raises(UsageError):
        diag_extract(op)


def test_diag_extract_rejects_three_sites():
    op = PsdOperator(SiteSpec((2, 2, 2)), np.eye(8))
    with pytest.raises(UsageError):
        diag_extract(op)


def test_kind_aliases():
    assert canonical_kind("iii") == "psd"
    assert canonical_kind("sqrt") == "hadamard-root"
    assert canonical_kind("nonneg") == "nonnegative"
    with pytest.raises(UsageError):
        canonical_kind("viii")


# ---------------------------------------------------------------------------
# converters, kind by kind


def test_minimal_forward_gives_osr_train():
    rng = np.random.default_rng(2)
    m = rng.uniform(0, 1, (4, 3)) @ rng.uniform(0, 1, (3, 5))
    cert = minimal_factorization(m)
    dec = factorization_to_decomposition("minimal", cert, DiagBipartite(m))
    assert dec.inner_dim == cert.inner_dim == 3
    assert dec.residual <= 1e-10
    assert operator_schmidt_rank(diag_embed(m)) == 3


def test_minimal_reverse_from_generic_train():
    rng = np.random.default_rng(3)
    m = rng.uniform(0, 1, (4, 5))
    train, osr = mpo_train_form(diag_embed(m))
    cert = decomposition_to_factorization("minimal", train)
    assert cert.inner_dim == osr == np.linalg.matrix_rank(m)
    check_factor_certificate(m, cert)


def test_nonneg_forward_cores_are_psd():
    rng = np.random.default_rng(4)
    a = rng.uniform(0, 1, (3, 2))
    b = rng.uniform(0, 1, (2, 3))
    cert = FactorCertificate("nonnegative", 2, {"left": a, "right": b}, 0.0)
    dec = factorization_to_decomposition("ii", cert, DiagBipartite(a @ b))
    assert dec.payload.psd_defect() <= 1e-12
    assert dec.residual <= 1e-10
    back = decomposition_to_factorization("ii", dec)
    check_factor_certificate(a @ b, back)
    assert back.inner_dim == 2


def test_psd_forward_purifies_and_reverse_recovers():
    rng = np.random.default_rng(5)
    for trial in range(5):
        p, q = rng.integers(2, 6, size=2)
        e = [rand_cpsd(2, rng) for _ in range(p)]
        f = [rand_cpsd(2, rng) for _ in range(q)]
        m = pair_traces(e, f)
        cert = FactorCertificate("psd", 2, {"E": e, "F": f}, 0.0)
        dec = factorization_to_decomposition("psd", cert, DiagBipartite(m))
        sigma = diag_embed(m).data
        dense = contract_train(dec.payload.train)
        assert np.linalg.norm(dense @ dense.conj().T - sigma) <= 1e-8 * np.linalg.norm(sigma)
        back = decomposition_to_factorization("psd", dec)
        assert back.inner_dim == dec.inner_dim == 2
        check_factor_certificate(m, back)
        for mat in back.payload["E"] + back.payload["F"]:
            assert np.linalg.eigvalsh(mat).min() >= -1e-10


def test_psd_reverse_from_spectral_purification():
    # oracle: evaluating the Gram formulas on the explicit spectral factor
    sigma = diag_embed(np.eye(2))
    puri = local_purification_spectral(sigma)
    cert = decomposition_to_factorization("psd", puri)
    assert cert.inner_dim == puri.osr_L == 2
    check_factor_certificate(np.eye(2), cert)


def test_symmetric_roundtrip():
    m = np.array([[0.0, 1.0], [1.0, 0.0]])
    cert = symmetric_factorization(m)
    dec = factorization_to_decomposition("iv", cert, DiagBipartite(m))
    assert dec.site_symmetric and dec.inner_dim == 2
    assert dec.residual <= 1e-10
    back = decomposition_to_factorization("iv", dec)
    check_factor_certificate(m, back)


def test_cp_roundtrip():
    rng = np.random.default_rng(6)
    a = rng.uniform(0.2, 1.0, (3, 2))
    m = a @ a.T
    cert = cp_factorization_search(m, 2, restarts=30)
    assert cert is not None
    dec = factorization_to_decomposition("v", cert, DiagBipartite(m))
    assert dec.site_symmetric
    assert dec.payload.psd_defect() <= 1e-10
    back = decomposition_to_factorization("v", dec)
    check_factor_certificate(m, back, residual_tol=1e-5)


def test_cpsdt_roundtrip_flip_witness():
    m = np.array([[0.0, 1.0], [1.0, 0.0]])
    cert = cpsdt_construct(m)
    dec = factorization_to_decomposition("vi", cert, DiagBipartite(m))
    assert dec.site_symmetric
    assert dec.residual <= 1e-10
    # both sites carry the same factor slices (site-symmetric form)
    core1, core2 = dec.payload.train.cores
    for k in range(core1.shape[3]):
        assert np.array_equal(core1[0, :, :, k], core2[k, :, :, 0])
    back = decomposition_to_factorization("vi", dec)
    assert back.inner_dim == cert.inner_dim == 2
    check_factor_certificate(m, back)
    # the flip mixture admits no real symmetric route: some recovered E is
    # genuinely complex and the cp prescreen rejects the matrix
    assert any(np.abs(np.asarray(e).imag).max() > 0.01 for e in back.payload["E"])
    with pytest.raises(NecessaryConditionError):
        cp_factorization_search(m, 2)


def test_hadamard_roundtrip():
    m = np.ones((2, 2))
    cert = hadamard_root_certificate(m)
    dec = factorization_to_decomposition("vii", cert, DiagBipartite(m))
    tau = dec.payload
    sigma = diag_embed(m).data
    assert np.linalg.norm(tau @ tau - sigma) <= 1e-12
    back = decomposition_to_factorization("vii", dec, sites=(2, 2))
    assert back.inner_dim == 1
    check_factor_certificate(m, back)


def test_kind_mismatch_rejected():
    cert = minimal_factorization(np.ones((2, 2)))
    with pytest.raises(UsageError):
        factorization_to_decomposition("psd", cert, DiagBipartite(np.ones((2, 2))))


def test_symmetric_kind_needs_square_symmetric():
    rng = np.random.default_rng(7)
    m = rng.uniform(0, 1, (3, 3))
    with pytest.raises(UsageError):
        verify_correspondence("iv", m)


# ---------------------------------------------------------------------------
# two-way verification


def test_verify_minimal_random_corpus():
    rng = np.random.default_rng(8)
    for _ in range(30):
        p, q = rng.integers(1, 7, size=2)
        r = int(rng.integers(1, min(p, q) + 1))
        m = rng.uniform(0, 1, (p, r)) @ rng.uniform(0, 1, (r, q))
        entry = verify_correspondence("i", m)
        assert entry["verdict"] == "exact-match", entry


def test_verify_symmetric_random_corpus():
    rng = np.random.default_rng(9)
    for _ in range(10):
        x = rng.uniform(0, 1, (4, 4))
        entry = verify_correspondence("iv", x + x.T)
        assert entry["verdict"] == "exact-match", entry


def test_verify_sqrt_symmetric_binary_patterns():
    # double enumeration across the bridge on all symmetric 0/1 patterns
    for bits in itertools.product((0.0, 1.0), repeat=6):
        m = np.zeros((3, 3))
        m[0, 0], m[1, 1], m[2, 2] = bits[:3]
        m[0, 1] = m[1, 0] = bits[3]
        m[0, 2] = m[2, 0] = bits[4]
        m[1, 2] = m[2, 1] = bits[5]
        entry = verify_correspondence("vii", m)
        assert entry["verdict"] == "exact-match", (m, entry)


def test_verify_nonneg_identity():
    entry = verify_correspondence("ii", np.eye(3))
    assert entry["verdict"] == "intervals-consistent"
    assert entry["matrix_side"] == [3, 3]
    assert entry["state_side"] == [3, 3]


def test_verify_psd_and_cpsdt_consistent():
    rng = np.random.default_rng(10)
    x = rng.uniform(0, 1, (3, 3))
    m = x + x.T
    assert verify_correspondence("iii", m)["verdict"] == "intervals-consistent"
    assert verify_correspondence("vi", m)["verdict"] == "intervals-consistent"


def test_verify_cp_planted_and_rejection():
    rng = np.random.default_rng(11)
    a = rng.uniform(0.2, 1.0, (3, 2))
    entry = verify_correspondence("v", a @ a.T, restarts=20)
    assert entry["verdict"] == "intervals-consistent"
    rejected = verify_correspondence("v", np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert rejected["verdict"] == "skipped"
    assert "not psd" in rejected["note"]


def test_verify_sqrt_budget_skip():
    entry = verify_correspondence("vii", np.ones((5, 5)), sign_budget=2**4)
    assert entry["verdict"] == "skipped"


def test_roundtrip_preserves_inner_dim_every_kind():
    rng = np.random.default_rng(12)
    x = rng.uniform(0.1, 1.0, (3, 3))
    sym = x + x.T

    cert = minimal_factorization(sym)
    dec = factorization_to_decomposition("minimal", cert, DiagBipartite(sym))
    assert decomposition_to_factorization("minimal", dec).inner_dim == cert.inner_dim

    cert = symmetric_factorization(sym)
    dec = factorization_to_decomposition("symmetric", cert, DiagBipartite(sym))
    assert decomposition_to_factorization("symmetric", dec).inner_dim == cert.inner_dim

    cert = cpsdt_construct(sym)
    dec = factorization_to_decomposition("cpsdt", cert, DiagBipartite(sym))
    assert decomposition_to_factorization("cpsdt", dec).inner_dim == cert.inner_dim

    cert = hadamard_root_certificate(sym)
    dec = factorization_to_decomposition("hadamard-root", cert, DiagBipartite(sym))
    assert (
        decomposition_to_factorization("hadamard-root", dec, sites=(3, 3)).inner_dim
        == cert.inner_dim
    )
