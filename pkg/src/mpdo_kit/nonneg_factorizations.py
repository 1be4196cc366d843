"""The six factorizations of nonnegative matrices, searches and exact routes.

Exact routes: the minimal (SVD) factorization, symmetric congruence
diagonalization, square-root rank by sign enumeration, and the constructive
cpsdt factorization through a symmetric Hadamard root.  Heuristic searches
with independently checkable output: multiplicative updates (nonnegative),
Gauss-Newton on Gram factors (psd), and projected gradient with a bounded
least-squares polish (cp).  A failed search never certifies a lower bound;
the only certified lower bounds here are rank-based or necessary-condition
rejections.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from math import ceil, sqrt

import numpy as np
from scipy.optimize import least_squares

from .certificates import (
    CLIP_TOL,
    FactorCertificate,
    NecessaryConditionError,
    NonnegMatrix,
    as_nonneg,
    pair_traces,
)
from .tensor_core import DEFAULT_RANK_TOL, UsageError, numerical_rank

#: Acceptance bar for search residuals, relative to max|M|.
SEARCH_RESIDUAL_TOL = 1e-6

#: Denominator guard in multiplicative updates.
MU_EPS = 1e-12

#: Default enumeration budget for sign patterns (2^20 candidates).
DEFAULT_SIGN_BUDGET = 2**20

SYMMETRY_TOL = 1e-10


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("MPDO_KIT_THREADS", "1")))
    except ValueError:
        return 1


def _first_success(worker, restarts: int):
    """Run seeded restarts, returning the lowest-index success.

    Restarts may be evaluated in parallel chunks (capped by
    MPDO_KIT_THREADS); each restart uses its own RNG stream, and within a
    chunk the smallest index wins, so the result is schedule independent.
    """
    threads = _thread_count()
    if threads <= 1:
        for idx in range(restarts):
            res = worker(idx)
            if res is not None:
                return res
        return None
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, restarts, threads):
            chunk = range(start, min(start + threads, restarts))
            for res in pool.map(worker, chunk):
                if res is not None:
                    return res
    return None


def _max_abs(m) -> float:
    return float(max(np.abs(m).max(initial=0.0), 1e-300))


# ---------------------------------------------------------------------------
# exact routes


def minimal_factorization(matrix, rel_tol: float = DEFAULT_RANK_TOL) -> FactorCertificate:
    """Rank factorization M = left @ right via the real SVD, r = rank(M)."""
    m = np.asarray(matrix if not isinstance(matrix, NonnegMatrix) else matrix.entries, dtype=float)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        r = 0
    else:
        r = int(np.count_nonzero(s > rel_tol * s[0]))
    left = u[:, :r] * s[:r]
    right = vh[:r]
    residual = float(np.abs(left @ right - m).max())
    return FactorCertificate("minimal", r, {"left": left, "right": right}, residual)


def symmetric_factorization(matrix, rel_tol: float = DEFAULT_RANK_TOL) -> FactorCertificate:
    """Complex factor A with M = A A^T and rank(M) columns.

    Congruence elimination: symmetric row-and-column operations bring M to
    diag(1,...,1,0,...,0) = P M P^T, then A = P^{-1}[:, :r].  Pivots prefer
    the largest remaining diagonal entry; when the diagonal is negligible,
    a row+column addition manufactures one from the largest off-diagonal
    entry.  Negative or complex pivots make A complex through the square
    root -- for symmetric input the rank always equals the matrix rank.
    """
    m = np.asarray(matrix if not isinstance(matrix, NonnegMatrix) else matrix.entries)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise UsageError(f"symmetric factorization needs a square matrix, got {m.shape}")
    scale = _max_abs(m)
    if np.abs(m - m.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise UsageError("matrix is not symmetric within tolerance")
    m = 0.5 * (m + m.T)
    d = m.shape[0]
    r = numerical_rank(m, rel_tol)

    s = m.astype(complex).copy()
    p = np.eye(d, dtype=complex)
    for k in range(r):
        sub = s[k:, k:]
        sub_scale = np.abs(sub).max()
        diag = np.abs(np.diagonal(sub))
        if diag.max(initial=0.0) > 1e-2 * sub_scale:
            j = k + int(np.argmax(diag))
            if j != k:
                s[[k, j], :] = s[[j, k], :]
                s[:, [k, j]] = s[:, [j, k]]
                p[[k, j], :] = p[[j, k], :]
        else:
            # zero diagonal block: bring the largest off-diagonal pair to
            # (k, j) and add row/column j into k, giving s[k, k] = 2 s[k, j]
            a, bcol = np.unravel_index(int(np.argmax(np.abs(sub))), sub.shape)
            a += k
            bcol += k
            if a != k:
                s[[k, a], :] = s[[a, k], :]
                s[:, [k, a]] = s[:, [a, k]]
                p[[k, a], :] = p[[a, k], :]
                if bcol == k:
                    bcol = a
            s[k, :] += s[bcol, :]
            s[:, k] += s[:, bcol]
            p[k, :] += p[bcol, :]
        piv = s[k, k]
        factors = s[k + 1 :, k] / piv
        s[k + 1 :, :] -= factors[:, None] * s[k, :]
        s[:, k + 1 :] -= s[:, k][:, None] * factors[None, :]
        p[k + 1 :, :] -= factors[:, None] * p[k, :]
        sc = 1.0 / np.sqrt(complex(piv))
        s[k, :] *= sc
        s[:, k] *= sc
        p[k, :] *= sc

    a = np.linalg.solve(p, np.eye(d, dtype=complex)[:, :r])
    residual = float(np.abs(a @ a.T - m).max())
    return FactorCertificate("symmetric", r, {"factor": a}, residual)


def sqrt_rank(matrix, sign_budget: int = DEFAULT_SIGN_BUDGET, rel_tol: float = DEFAULT_RANK_TOL):
    """Exact minimum rank over entrywise square roots, by sign enumeration.

    One nonzero entry is pinned to the positive root (a global sign flip
    preserves rank), leaving 2^(k-1) candidates for k nonzero entries.
    Refuses when 2^k exceeds ``sign_budget``.  Returns ``(rank, signs)``
    with signs in {-1, 0, +1} marking the minimizing pattern; ties go to
    the first pattern in lexicographic order with +1 before -1.
    """
    m = as_nonneg(matrix)
    base = np.sqrt(m)
    nz = np.argwhere(m > 0.0)
    k = len(nz)
    if k == 0:
        return 0, np.zeros(m.shape, dtype=int)
    if 2**k > sign_budget:
        raise UsageError(
            f"{k} nonzero entries exceed the sign budget (2^{k} > {sign_budget})"
        )
    best_rank = None
    best_signs = None
    for tail in itertools.product((1, -1), repeat=k - 1):
        signs = np.zeros(m.shape, dtype=int)
        signs[nz[0][0], nz[0][1]] = 1
        for (i, j), sgn in zip(nz[1:], tail):
            signs[i, j] = sgn
        rank = numerical_rank(signs * base, rel_tol)
        if best_rank is None or rank < best_rank:
            best_rank = rank
            best_signs = signs
            if best_rank == 1:
                break
    return int(best_rank), best_signs


def hadamard_root_certificate(matrix, sign_budget: int = DEFAULT_SIGN_BUDGET) -> FactorCertificate:
    """Certificate wrapping the minimizing entrywise square root of M."""
    m = as_nonneg(matrix)
    rank, signs = sqrt_rank(m, sign_budget)
    root = signs * np.sqrt(m)
    residual = float(np.abs(root * root - m).max())
    return FactorCertificate("hadamard-root", rank, {"root": root, "signs": signs}, residual)


def cpsdt_construct(
    matrix,
    sign_budget: int = DEFAULT_SIGN_BUDGET,
    rel_tol: float = DEFAULT_RANK_TOL,
) -> FactorCertificate:
    """Constructive cpsdt factorization M_ij = tr(E_i E_j^T), always possible.

    Picks a symmetric entrywise square root N of M minimizing rank(N) over
    symmetric sign patterns (within ``sign_budget`` enumerations, otherwise
    only the all-positive root), factors N = A A^T, and forms the rank-one
    psd matrices E_i from the rows of A; then tr(E_i E_j^T) = |N_ij|^2 =
    M_ij.  The reported inner dimension is the rank of the chosen root --
    minimal over the enumerated roots, with no optimality claim beyond
    them.
    """
    m = as_nonneg(matrix)
    if m.shape[0] != m.shape[1] or np.abs(m - m.T).max(initial=0.0) > SYMMETRY_TOL * _max_abs(m):
        raise UsageError("cpsdt factorization needs a symmetric matrix")
    m = 0.5 * (m + m.T)
    d = m.shape[0]
    base = np.sqrt(m)
    upper = [(i, j) for i in range(d) for j in range(i, d) if m[i, j] > 0.0]
    k = len(upper)

    candidates = []
    if k == 0:
        candidates.append(np.zeros_like(base))
    elif 2**k <= sign_budget:
        for signs in itertools.product((1, -1), repeat=k):
            root = np.zeros_like(base)
            for (i, j), sgn in zip(upper, signs):
                root[i, j] = sgn * base[i, j]
                root[j, i] = sgn * base[i, j]
            candidates.append(root)
    else:
        candidates.append(base.copy())

    best_root = None
    best_rank = None
    for root in candidates:
        rank = numerical_rank(root, rel_tol)
        if best_rank is None or rank < best_rank:
            best_rank, best_root = rank, root
            if best_rank <= 1:
                break

    sym = symmetric_factorization(best_root, rel_tol)
    a = sym.payload["factor"]
    e_list = [np.outer(a[i, :], a[i, :].conj()) for i in range(d)]
    recon = pair_traces(e_list, e_list)
    residual = float(np.abs(recon - m).max())
    return FactorCertificate("cpsdt", sym.inner_dim, {"E": e_list, "root": best_root}, residual)


def slack_matrix_tgon(t: int) -> NonnegMatrix:
    """Facet-vertex slack matrix of the regular t-gon (t x t, rank 3).

    Row i holds b_i - a_i . v_j over vertices v_j = (cos 2 pi j/t,
    sin 2 pi j/t) with facet normal a_i at angle (2i+1) pi/t and offset
    b_i = cos(pi/t); the two vertices on facet i give the row's two zeros.
    Trigonometric round-off below zero is clipped on ingestion.
    """
    if t < 3:
        raise UsageError(f"polygon needs t >= 3, got {t}")
    j = np.arange(t)
    vertices = np.stack([np.cos(2 * np.pi * j / t), np.sin(2 * np.pi * j / t)], axis=1)
    normals = np.stack(
        [np.cos((2 * j + 1) * np.pi / t), np.sin((2 * j + 1) * np.pi / t)], axis=1
    )
    slack = np.cos(np.pi / t) - normals @ vertices.T
    return NonnegMatrix(slack)


# ---------------------------------------------------------------------------
# heuristic searches


def nonneg_factorization_search(
    matrix,
    r: int,
    restarts: int = 50,
    iters: int = 4000,
    seed: int = 0,
):
    """Multiplicative-update search for M = left @ right with nonneg factors.

    Returns the first certificate (by restart index) whose max-abs residual
    meets ``SEARCH_RESIDUAL_TOL * max|M|``, or None -- absence of a
    certificate is a normal outcome and proves nothing.
    """
    m = as_nonneg(matrix)
    if r < 1:
        raise UsageError(f"inner dimension must be >= 1, got {r}")
    p, q = m.shape
    target = SEARCH_RESIDUAL_TOL * _max_abs(m)
    scale = sqrt(max(m.mean(), MU_EPS) / r)

    def attempt(idx):
        rng = np.random.default_rng([seed, idx])
        w = rng.uniform(0.1, 1.0, (p, r)) * scale
        h = rng.uniform(0.1, 1.0, (r, q)) * scale
        for it in range(iters):
            w *= (m @ h.T) / (w @ (h @ h.T) + MU_EPS)
            h *= (w.T @ m) / ((w.T @ w) @ h + MU_EPS)
            if it % 50 == 49 and np.abs(m - w @ h).max() <= target:
                break
        residual = float(np.abs(m - w @ h).max())
        if residual <= target:
            return FactorCertificate("nonnegative", r, {"left": w, "right": h}, residual)
        return None

    return _first_success(attempt, restarts)


def trivial_nonneg_certificate(matrix) -> FactorCertificate:
    """The exact factorization M = M @ I at inner dimension min(p, q)."""
    m = as_nonneg(matrix)
    p, q = m.shape
    if p <= q:
        return FactorCertificate("nonnegative", p, {"left": np.eye(p), "right": m}, 0.0)
    return FactorCertificate("nonnegative", q, {"left": m, "right": np.eye(q)}, 0.0)


def scan_nonneg_certificate(
    matrix, restarts: int = 20, iters: int = 4000, seed: int = 0
) -> FactorCertificate:
    """Smallest-inner-dimension nonnegative certificate the search can find.

    Scans r upward from rank(M); the trivial M = M . I factorization closes
    the scan at min(p, q), so a certificate always comes back.
    """
    m = as_nonneg(matrix)
    p, q = m.shape
    lower = numerical_rank(m)
    for r in range(max(lower, 1), min(p, q)):
        cert = nonneg_factorization_search(m, r, restarts, iters, seed)
        if cert is not None:
            return cert
    return trivial_nonneg_certificate(m)


def nonneg_rank_bounds(matrix, restarts: int = 20, iters: int = 4000, seed: int = 0):
    """Certified interval [rank(M), r_upper] for the nonnegative rank.

    The lower bound is the plain rank (always valid since any nonnegative
    factorization is a factorization); the upper bound is the inner
    dimension of the best certificate the scan finds.  A failed search at
    some r proves nothing about r, so only successes move the upper bound.
    """
    m = as_nonneg(matrix)
    lower = numerical_rank(m)
    if lower == 0:
        return 0, 0
    return lower, scan_nonneg_certificate(m, restarts, iters, seed).inner_dim


def psd_factorization_search(
    matrix,
    r: int,
    restarts: int = 20,
    iters: int = 200,
    seed: int = 0,
):
    """Search for complex psd tuples with M_ij = tr(E_i F_j^T).

    Parametrizes E_i = G_i G_i^dag and F_j = H_j H_j^dag and runs bounded
    Gauss-Newton least squares on the Gram factors (``iters`` caps the
    residual evaluations per restart).  Feasibility of the output is
    structural; acceptance is by reconstruction residual only.
    """
    m = as_nonneg(matrix)
    if r < 1:
        raise UsageError(f"inner dimension must be >= 1, got {r}")
    p, q = m.shape
    target = SEARCH_RESIDUAL_TOL * _max_abs(m)
    n_g = p * r * r
    n_h = q * r * r
    scale = (m.mean() / max(r, 1)) ** 0.25 + 1e-3

    def unpack(x):
        g = (x[:n_g] + 1j * x[n_g : 2 * n_g]).reshape(p, r, r)
        h = (x[2 * n_g : 2 * n_g + n_h] + 1j * x[2 * n_g + n_h :]).reshape(q, r, r)
        return g, h

    def residual_vec(x):
        g, h = unpack(x)
        traces = np.einsum("iac,ibc,jad,jbd->ij", g, g.conj(), h, h.conj()).real
        return (traces - m).ravel()

    def attempt(idx):
        rng = np.random.default_rng([seed, idx])
        x0 = rng.normal(size=2 * (n_g + n_h)) * scale
        sol = least_squares(
            residual_vec, x0, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
            max_nfev=iters,
        )
        g, h = unpack(sol.x)
        e_list = [g[i] @ g[i].conj().T for i in range(p)]
        f_list = [h[j] @ h[j].conj().T for j in range(q)]
        residual = float(np.abs(pair_traces(e_list, f_list) - m).max())
        if residual <= target:
            return FactorCertificate("psd", r, {"E": e_list, "F": f_list}, residual)
        return None

    return _first_success(attempt, restarts)


def psd_rank_lower_bound(matrix) -> int:
    """ceil(sqrt(rank M)): valid for any size-r complex psd factorization,
    since the trace pairing is a rank <= r^2 bilinear form."""
    m = np.asarray(matrix if not isinstance(matrix, NonnegMatrix) else matrix.entries, dtype=float)
    return ceil(sqrt(numerical_rank(m)))


def psd_certificate_from_nonneg(cert: FactorCertificate) -> FactorCertificate:
    """Diagonal psd tuples from a nonnegative factorization, same inner dim.

    With E_i = diag(row i of the left factor) and F_j = diag(column j of
    the right factor), tr(E_i F_j^T) recovers the product exactly, so every
    nonnegative upper bound is also a psd upper bound.
    """
    if cert.kind != "nonnegative":
        raise UsageError(f"expected a nonnegative certificate, got {cert.kind!r}")
    left = np.asarray(cert.payload["left"])
    right = np.asarray(cert.payload["right"])
    e_list = [np.diag(left[i, :]).astype(complex) for i in range(left.shape[0])]
    f_list = [np.diag(right[:, j]).astype(complex) for j in range(right.shape[1])]
    recon = np.einsum("iab,jab->ij", np.asarray(e_list), np.asarray(f_list)).real
    residual = float(np.abs(recon - left @ right).max())
    return FactorCertificate("psd", cert.inner_dim, {"E": e_list, "F": f_list}, max(residual, cert.residual))


def cp_factorization_search(
    matrix,
    r: int,
    restarts: int = 50,
    iters: int = 400,
    seed: int = 0,
):
    """Search for nonnegative A with M = A A^T after screening necessary conditions.

    Rejections (not symmetric, not entrywise nonnegative, not psd) raise
    NecessaryConditionError -- those are impossibility certificates, unlike
    a search that merely comes up empty.  Each restart runs projected
    gradient descent followed by a bounded least-squares polish.
    """
    raw = np.asarray(matrix if not isinstance(matrix, NonnegMatrix) else matrix.entries, dtype=float)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise NecessaryConditionError("not symmetric", f"shape {raw.shape}")
    if np.abs(raw - raw.T).max(initial=0.0) > SYMMETRY_TOL * _max_abs(raw):
        raise NecessaryConditionError("not symmetric")
    if raw.min(initial=0.0) < -CLIP_TOL:
        raise NecessaryConditionError("not entrywise nonnegative", f"min entry {raw.min():.3e}")
    m = 0.5 * (raw + raw.T)
    m = np.clip(m, 0.0, None)
    w = np.linalg.eigvalsh(m)
    if w.min(initial=0.0) < -1e-10 * max(w.max(initial=0.0), 1e-300):
        raise NecessaryConditionError("not psd", f"min eigenvalue {w.min():.3e}")
    if r < 1:
        raise UsageError(f"inner dimension must be >= 1, got {r}")

    p = m.shape[0]
    target = SEARCH_RESIDUAL_TOL * _max_abs(m)

    def attempt(idx):
        rng = np.random.default_rng([seed, idx])
        a = rng.uniform(0.1, 1.0, (p, r)) * (max(m.mean(), MU_EPS) / max(r, 1)) ** 0.25
        step = 1.0 / (4 * (np.linalg.norm(a.T @ a, 2) + np.linalg.norm(m, 2)) + MU_EPS)
        for _ in range(iters):
            res = a @ a.T - m
            trial = np.maximum(a - step * (4 * res @ a), 0.0)
            if np.linalg.norm(trial @ trial.T - m) <= np.linalg.norm(res):
                a = trial
                step *= 1.1
            else:
                step *= 0.5

        def flat_residual(x):
            am = x.reshape(p, r)
            return (am @ am.T - m).ravel()

        sol = least_squares(
            flat_residual, a.ravel(), bounds=(0.0, np.inf), method="trf",
            xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=200,
        )
        a = sol.x.reshape(p, r)
        residual = float(np.abs(a @ a.T - m).max())
        if residual <= target:
            return FactorCertificate("cp", r, {"factor": a}, residual)
        return None

    return _first_success(attempt, restarts)
