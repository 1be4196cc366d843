"""Factorization certificates and their independent feasibility checker.

The checker recomputes reconstruction and feasibility directly from the
certificate payload with plain numpy; it shares no code with the search
routines that produce certificates, so a bug there cannot silently accept
its own output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

#: Entries above this magnitude below zero fail nonnegativity outright;
#: anything in (-CLIP_TOL, 0) is clipped on ingestion.
CLIP_TOL = 1e-12

#: Relative psd tolerance for certificate payload matrices.
PSD_FEAS_TOL = 1e-10

KINDS = ("minimal", "nonnegative", "psd", "symmetric", "cp", "cpsdt", "hadamard-root")


class NecessaryConditionError(ValueError):
    """A factorization cannot exist: a necessary condition fails.

    Distinct from a search coming up empty; carries the violated condition.
    """

    def __init__(self, condition: str, detail: str = ""):
        self.condition = condition
        super().__init__(f"necessary condition violated: {condition}" + (f" ({detail})" if detail else ""))


@dataclass(frozen=True)
class NonnegMatrix:
    """Real entrywise-nonnegative matrix; tiny negative round-off is clipped."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2:
            raise ValueError(f"expected a matrix, got ndim {m.ndim}")
        if m.min(initial=0.0) < -CLIP_TOL:
            raise NecessaryConditionError(
                "entrywise nonnegative", f"min entry {m.min():.3e}"
            )
        m = np.clip(m, 0.0, None)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def shape(self):
        return self.entries.shape


def as_nonneg(matrix) -> np.ndarray:
    """Validate and clip a raw array to an entrywise-nonnegative matrix."""
    if isinstance(matrix, NonnegMatrix):
        return matrix.entries
    return NonnegMatrix(np.asarray(matrix, dtype=float)).entries


@dataclass(frozen=True)
class FactorCertificate:
    """A tagged factorization with its inner dimension and reconstruction error.

    Payload keys by kind:
      minimal / nonnegative : "left" (p x r), "right" (r x q)
      psd                   : "E" (list of r x r psd), "F" (list of r x r psd)
      symmetric             : "factor" (p x r complex, M = factor factor^T)
      cp                    : "factor" (p x r real nonnegative)
      cpsdt                 : "E" (list of r x r psd)
      hadamard-root         : "root" (p x q real, root o root = M), "signs"
    """

    kind: str
    inner_dim: int
    payload: dict[str, Any]
    residual: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown certificate kind {self.kind!r}")


def pair_traces(e_list, f_list) -> np.ndarray:
    """Matrix of tr(E_i F_j^T) over all pairs (no conjugation in the pairing)."""
    e = np.asarray(e_list)
    f = np.asarray(f_list)
    return np.einsum("iab,jab->ij", e, f).real


def _min_rel_eig(mat) -> float:
    herm = 0.5 * (mat + np.conj(mat).T)
    w = np.linalg.eigvalsh(herm)
    top = max(w.max(initial=0.0), 1e-300)
    return float(w.min(initial=0.0) / top)


def check_factor_certificate(matrix, cert: FactorCertificate, residual_tol: float = 1e-8):
    """Recompute reconstruction and kind-specific feasibility of a certificate.

    Returns a dict with the measured max-abs residual and feasibility flags;
    raises ValueError when the certificate is infeasible or fails to
    reconstruct ``matrix`` within ``residual_tol * max|matrix|``.
    """
    m = np.asarray(matrix, dtype=float)
    scale = max(np.abs(m).max(), 1e-300)
    kind = cert.kind
    pay = cert.payload

    if kind in ("minimal", "nonnegative"):
        a = np.asarray(pay["left"])
        b = np.asarray(pay["right"])
        if a.shape[1] != cert.inner_dim or b.shape[0] != cert.inner_dim:
            raise ValueError("inner dimension does not match the factors")
        recon = (a @ b).real
        if kind == "nonnegative":
            if a.min() < -CLIP_TOL or b.min() < -CLIP_TOL:
                raise ValueError("factors are not entrywise nonnegative")
    elif kind == "psd":
        e_list, f_list = pay["E"], pay["F"]
        for x in list(e_list) + list(f_list):
            if np.asarray(x).shape != (cert.inner_dim, cert.inner_dim):
                raise ValueError("psd factor size does not match inner dimension")
            if _min_rel_eig(x) < -PSD_FEAS_TOL:
                raise ValueError("payload matrix is not psd")
        recon = pair_traces(e_list, f_list)
    elif kind == "symmetric":
        a = np.asarray(pay["factor"])
        if a.shape[1] != cert.inner_dim:
            raise ValueError("inner dimension does not match the factor")
        recon = (a @ a.T).real
        if np.abs(np.imag(a @ a.T)).max() > residual_tol * scale:
            raise ValueError("factor factor^T has a material imaginary part")
    elif kind == "cp":
        a = np.asarray(pay["factor"])
        if np.iscomplexobj(a) and np.abs(a.imag).max() > 0:
            raise ValueError("cp factor must be real")
        if a.min() < -CLIP_TOL:
            raise ValueError("cp factor is not entrywise nonnegative")
        if a.shape[1] != cert.inner_dim:
            raise ValueError("inner dimension does not match the factor")
        recon = a.real @ a.real.T
    elif kind == "cpsdt":
        e_list = pay["E"]
        for x in e_list:
            if np.asarray(x).shape != (cert.inner_dim, cert.inner_dim):
                raise ValueError("psd factor size does not match inner dimension")
            if _min_rel_eig(x) < -PSD_FEAS_TOL:
                raise ValueError("payload matrix is not psd")
        recon = pair_traces(e_list, e_list)
    elif kind == "hadamard-root":
        root = np.asarray(pay["root"], dtype=float)
        recon = root * root
        if np.linalg.matrix_rank(root) != cert.inner_dim:
            raise ValueError(
                f"root has rank {np.linalg.matrix_rank(root)}, certificate claims {cert.inner_dim}"
            )
    else:  # pragma: no cover
        raise ValueError(f"unknown kind {kind}")

    residual = float(np.abs(recon - m).max())
    if residual > residual_tol * scale:
        raise ValueError(
            f"certificate does not reconstruct the matrix: max-abs residual "
            f"{residual:.3e} > {residual_tol * scale:.3e}"
        )
    return {"kind": kind, "inner_dim": cert.inner_dim, "max_abs_residual": residual}
