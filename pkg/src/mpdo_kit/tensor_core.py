"""Dense multi-site operators, matricization, numerical rank, and train/cyclic contraction.

Operators live on an ordered chain of sites.  Site ``l`` carries a physical
dimension ``d_l``; a dense operator is a square matrix of side ``prod(d_l)``
whose row (column) index is the row-major flattening of the per-site out
(in) indices.  Rectangular operators with per-site out/in dimensions
``d_l x d_l'`` are supported wherever it matters (matricization, trains).

Everything here is dense and targets desk-scale systems (n <= ~10, d = 2);
there is no sparse or lazy backend.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce
from math import prod

import numpy as np

#: Relative singular-value threshold used by every rank decision in the package.
DEFAULT_RANK_TOL = 1e-10

#: Relative Hermiticity defect tolerated on ingestion of a PsdOperator.
HERM_TOL = 1e-10

#: Eigenvalues above ``-PSD_TOL * lambda_max`` count as nonnegative.
PSD_TOL = 1e-10


class UsageError(ValueError):
    """Malformed call: empty input, shape mismatch, out-of-range cut."""


@dataclass(frozen=True)
class SiteSpec:
    """Ordered list of per-site physical dimensions."""

    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.dims) < 1:
            raise UsageError("need at least one site")
        if any(d < 1 for d in self.dims):
            raise UsageError(f"site dimensions must be >= 1, got {self.dims}")

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        """Side length of a dense operator on these sites."""
        return prod(self.dims)

    def uniform_dim(self) -> int:
        if len(set(self.dims)) != 1:
            raise UsageError(f"sites have unequal dimensions {self.dims}")
        return self.dims[0]


@dataclass(frozen=True)
class PsdOperator:
    """Dense Hermitian operator on an ordered tensor product of sites.

    The matrix is symmetrized to ``(X + X^dag)/2`` on construction; a defect
    larger than ``herm_tol`` (relative) triggers a warning, since it usually
    means the caller handed over something that was never meant to be
    Hermitian.  Positivity is *not* asserted on construction -- call
    :meth:`is_psd` / :meth:`assert_psd` where the algorithm needs it.
    """

    sites: SiteSpec
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise UsageError(f"operator must be a square matrix, got shape {data.shape}")
        if data.shape[0] != self.sites.total_dim:
            raise UsageError(
                f"matrix side {data.shape[0]} does not match site dims {self.sites.dims}"
            )
        scale = np.abs(data).max()
        defect = np.abs(data - data.conj().T).max()
        if scale > 0 and defect > HERM_TOL * scale:
            warnings.warn(
                f"input has Hermiticity defect {defect / scale:.2e} (relative); symmetrizing",
                stacklevel=3,
            )
        sym = 0.5 * (data + data.conj().T)
        sym.setflags(write=False)
        object.__setattr__(self, "data", sym)

    @classmethod
    def from_matrix(cls, matrix, dims) -> "PsdOperator":
        return cls(SiteSpec(tuple(dims)), np.asarray(matrix, dtype=complex))

    @property
    def n(self) -> int:
        return self.sites.n

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.data)

    def is_psd(self, psd_tol: float = PSD_TOL) -> bool:
        w = self.eigenvalues()
        top = w.max(initial=0.0)
        return bool(w.min(initial=0.0) >= -psd_tol * max(top, 0.0))

    def assert_psd(self, psd_tol: float = PSD_TOL) -> None:
        if not self.is_psd(psd_tol):
            w = self.eigenvalues()
            raise UsageError(
                f"operator is materially non-psd: min eigenvalue {w.min():.3e}, "
                f"max {w.max():.3e}"
            )

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.data))


@dataclass(frozen=True)
class MpoTrain:
    """Open-boundary train of 4-leg cores ``(left bond, out, in, right bond)``.

    Rectangular per-site legs are allowed (``out_dims[l] x in_dims[l]``), so
    the same type houses operator decompositions and purification factors.
    Boundary bonds must have dimension exactly 1.
    """

    cores: tuple[np.ndarray, ...]

    def __post_init__(self):
        cores = tuple(np.asarray(c, dtype=complex) for c in self.cores)
        if not cores:
            raise UsageError("train needs at least one core")
        for c in cores:
            if c.ndim != 4:
                raise UsageError(f"cores must have 4 legs, got shape {c.shape}")
        if cores[0].shape[0] != 1 or cores[-1].shape[3] != 1:
            raise UsageError("boundary bond dimensions must be exactly 1")
        for left, right in zip(cores, cores[1:]):
            if left.shape[3] != right.shape[0]:
                raise UsageError(
                    f"bond mismatch between adjacent cores: {left.shape[3]} vs {right.shape[0]}"
                )
        object.__setattr__(self, "cores", cores)

    @property
    def n(self) -> int:
        return len(self.cores)

    @property
    def out_dims(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def in_dims(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        """Dimensions of the n-1 internal bonds."""
        return tuple(c.shape[3] for c in self.cores[:-1])

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)


@dataclass(frozen=True)
class TiSiteTensor:
    """Single 4-leg tensor ``(bond, out, in, bond)`` of a cyclic network."""

    tensor: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=complex)
        if t.ndim != 4:
            raise UsageError(f"site tensor must have 4 legs, got shape {t.shape}")
        if t.shape[0] != t.shape[3]:
            raise UsageError(f"bond legs must match, got {t.shape[0]} vs {t.shape[3]}")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    @property
    def bond_dim(self) -> int:
        return self.tensor.shape[0]

    @property
    def out_dim(self) -> int:
        return self.tensor.shape[1]

    @property
    def in_dim(self) -> int:
        return self.tensor.shape[2]


# ---------------------------------------------------------------------------
# elementary operations


def kron_chain(factors) -> np.ndarray:
    """Kronecker product of a nonempty list of matrices, in list order."""
    factors = [np.asarray(f) for f in factors]
    if not factors:
        raise UsageError("kron_chain needs at least one factor")
    return reduce(np.kron, factors)


def _resolve_dims(op, out_dims, in_dims):
    if isinstance(op, PsdOperator):
        return op.data, op.sites.dims, op.sites.dims
    data = np.asarray(op)
    if out_dims is None:
        raise UsageError("out_dims required for raw arrays")
    out_dims = tuple(int(d) for d in out_dims)
    in_dims = out_dims if in_dims is None else tuple(int(d) for d in in_dims)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    if data.shape != (prod(out_dims), prod(in_dims)):
        raise UsageError(
            f"shape {data.shape} does not match dims {out_dims} x {in_dims}"
        )
    return data, out_dims, in_dims


def matricize(op, cut: int, out_dims=None, in_dims=None) -> np.ndarray:
    """Group sites ``1..cut`` against ``cut+1..n`` into a single matrix.

    Rows are indexed by (out, in) indices of the left block, columns by the
    right block, each row-major with out indices before in indices.  The
    reshape is a pure index permutation; :func:`unmatricize` inverts it
    bit-exactly.
    """
    data, out_dims, in_dims = _resolve_dims(op, out_dims, in_dims)
    n = len(out_dims)
    if not 1 <= cut < n:
        raise UsageError(f"cut must be in [1, {n - 1}], got {cut}")
    t = data.reshape(tuple(out_dims) + tuple(in_dims))
    left = list(range(cut)) + [n + k for k in range(cut)]
    right = list(range(cut, n)) + [n + k for k in range(cut, n)]
    rows = prod(out_dims[:cut]) * prod(in_dims[:cut])
    return t.transpose(left + right).reshape(rows, -1)


def unmatricize(matrix, cut: int, out_dims, in_dims=None) -> np.ndarray:
    """Inverse of :func:`matricize`; returns the dense operator."""
    out_dims = tuple(int(d) for d in out_dims)
    in_dims = out_dims if in_dims is None else tuple(int(d) for d in in_dims)
    n = len(out_dims)
    if not 1 <= cut < n:
        raise UsageError(f"cut must be in [1, {n - 1}], got {cut}")
    matrix = np.asarray(matrix)
    shape = out_dims[:cut] + in_dims[:cut] + out_dims[cut:] + in_dims[cut:]
    t = matrix.reshape(shape)
    # forward permutation used by matricize; argsort inverts it
    forward = (
        list(range(cut))
        + [n + k for k in range(cut)]
        + list(range(cut, n))
        + [n + k for k in range(cut, n)]
    )
    inv = np.argsort(forward)
    return t.transpose(inv).reshape(prod(out_dims), prod(in_dims))


def numerical_rank(matrix, rel_tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values above ``rel_tol * sigma_max``; 0 for the zero matrix."""
    if not 0.0 < rel_tol < 1.0:
        raise UsageError(f"rel_tol must be in (0, 1), got {rel_tol}")
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        return 0
    s = np.linalg.svd(matrix, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def svd_split(matrix, rel_tol: float = DEFAULT_RANK_TOL):
    """One rank-revealing split ``matrix ~ left @ right``.

    Singular values are absorbed into the left factor, so ``right`` has
    orthonormal rows.  The inner dimension equals :func:`numerical_rank`;
    the zero matrix yields empty factors.
    """
    if not 0.0 < rel_tol < 1.0:
        raise UsageError(f"rel_tol must be in (0, 1), got {rel_tol}")
    matrix = np.asarray(matrix, dtype=complex)
    u, s, vh = np.linalg.svd(matrix, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        r = 0
    else:
        r = int(np.count_nonzero(s > rel_tol * s[0]))
    return u[:, :r] * s[:r], vh[:r], r


def contract_train(train: MpoTrain) -> np.ndarray:
    """Evaluate the open-boundary sum of a train into a dense operator.

    The contraction sweeps left to right carrying a ``(rows, cols, bond)``
    block, so the cost never involves materializing the full bond sum.
    """
    cur = train.cores[0][0]  # (out, in, bond)
    for core in train.cores[1:]:
        cur = np.einsum("ijb,bklc->ikjlc", cur, core)
        cur = cur.reshape(
            cur.shape[0] * cur.shape[1], cur.shape[2] * cur.shape[3], cur.shape[4]
        )
    return np.ascontiguousarray(cur[:, :, 0])


def contract_cyclic(site: TiSiteTensor, n: int) -> np.ndarray:
    """Evaluate the trace-closed cyclic network of ``n`` copies of one tensor."""
    if n < 1:
        raise UsageError(f"n must be >= 1, got {n}")
    t = site.tensor
    if n == 1:
        return np.ascontiguousarray(np.einsum("aija->ij", t))
    cur = t
    for _ in range(n - 1):
        cur = np.einsum("aijb,bklc->aikjlc", cur, t)
        cur = cur.reshape(
            cur.shape[0],
            cur.shape[1] * cur.shape[2],
            cur.shape[3] * cur.shape[4],
            cur.shape[5],
        )
    return np.ascontiguousarray(np.einsum("aija->ij", cur))


def cyclic_shift_defect(op, out_dims=None, in_dims=None) -> float:
    """Relative Frobenius defect ``|T rho T^dag - rho| / |rho|`` under one site shift.

    Requires equal out dims across sites (and equal in dims); vectors are
    handled through in dims of 1.
    """
    data, out_dims, in_dims = _resolve_dims(op, out_dims, in_dims)
    n = len(out_dims)
    if len(set(out_dims)) != 1 or len(set(in_dims)) != 1:
        raise UsageError("shift defect requires equal dimensions on every site")
    norm = np.linalg.norm(data)
    if norm == 0.0:
        return 0.0
    t = data.reshape(tuple(out_dims) + tuple(in_dims))
    roll = list(range(1, n)) + [0]
    shifted = t.transpose(roll + [n + k for k in roll]).reshape(data.shape)
    return float(np.linalg.norm(shifted - data) / norm)
