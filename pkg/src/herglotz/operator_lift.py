"""Matrix-valued representing measures by polarization of scalar recoveries.

Each polarization vector h gives a scalar function <F(z)h, h> whose
boundary measure is recovered on one shared grid and radius; the standard
complex polarization identities assemble a Hermitian matrix weight per grid
cell, clipped onto the PSD cone.  The construction requires the scalar
recoveries to be coherent, which the shared grid, radius, and projection
settings guarantee deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotHerglotzError, ValidationError
from .functions import FunctionSpec, MatrixFunction, eval_spec
from .kernels import DomainSpec
from .measures import MatrixBoundaryMeasure, circle_grid
from .herglotz_disc import recover_measure

PSD_CLIP_TOL = 1e-12


class QuadraticForm(FunctionSpec):
    """Scalar spec z -> <F(z) h, h> for a fixed vector h."""

    kind = "quadratic_form"

    def __init__(self, matrix_spec: FunctionSpec, h):
        self.matrix_spec = matrix_spec
        self.h = np.asarray(h, dtype=complex).ravel()

    def _eval(self, z):
        vals = np.asarray(self.matrix_spec._eval(z))
        return np.einsum("...ij,i,j->...", vals, np.conj(self.h), self.h)


@dataclass(frozen=True)
class MatrixHerglotzRep:
    """Skew part i Im F(z0) plus an atomic PSD matrix measure."""

    atoms: MatrixBoundaryMeasure
    skew: np.ndarray
    domain: DomainSpec
    info: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.atoms.matrix_dim


def _polarization_vectors(n: int):
    vecs = []
    for i in range(n):
        e = np.zeros(n, dtype=complex)
        e[i] = 1.0
        vecs.append(("d", i, i, e))
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros(n, dtype=complex)
            e[i] = 1.0
            e[j] = 1.0
            vecs.append(("re", i, j, e))
            e2 = np.zeros(n, dtype=complex)
            e2[i] = 1.0
            e2[j] = 1.0j
            vecs.append(("im", i, j, e2))
    return vecs


def check_matrix_herglotz(F: MatrixFunction, tol: float = 1e-10):
    """Verify Re F(z) is PSD on a deterministic interior sample set."""
    pts = np.concatenate([r * circle_grid(64) for r in (0.2, 0.5, 0.8, 0.95)])
    vals = np.asarray(eval_spec(F, pts))
    herm = (vals + np.conj(np.swapaxes(vals, -1, -2))) / 2.0
    eigs = np.linalg.eigvalsh(herm)
    worst = int(np.argmin(eigs[..., 0]))
    if float(eigs[..., 0].min()) < -tol:
        w, v = np.linalg.eigh(herm[worst])
        raise NotHerglotzError(
            f"Re F has eigenvalue {eigs[..., 0].min():.3e} at z={pts[worst]:.4f}",
            witness=(complex(pts[worst]), v[:, 0]),
        )


def lift(
    F: MatrixFunction,
    grid_n: int = 4096,
    r: float = 0.999,
    match_order: int = 16,
) -> MatrixHerglotzRep:
    """Recover a matrix boundary measure for a matrix Herglotz function.

    Runs the scalar recovery (boundary-limit mode) for every polarization
    vector on one shared circle grid, then assembles Hermitian cell weights
    from the polarization identities and clips them onto the PSD cone.
    """
    if not isinstance(F, MatrixFunction):
        raise ValidationError("lift expects a matrix function spec")
    check_matrix_herglotz(F)
    n = F.dim
    f0 = np.asarray(eval_spec(F, np.zeros(1, dtype=complex)))[0]
    re0 = (f0 + f0.conj().T) / 2.0
    skew = (f0 - f0.conj().T) / 2.0

    densities: dict = {}
    for tag, i, j, h in _polarization_vectors(n):
        rep = recover_measure(
            QuadraticForm(F, h), grid_n=grid_n, r=r,
            match_order=match_order, undilate=True,
        )
        densities[(tag, i, j)] = rep.measure.density

    cells = np.zeros((grid_n, n, n), dtype=complex)
    for i in range(n):
        cells[:, i, i] = densities[("d", i, i)]
    for i in range(n):
        for j in range(i + 1, n):
            di = densities[("d", i, i)]
            dj = densities[("d", j, j)]
            re_ij = (densities[("re", i, j)] - di - dj) / 2.0
            im_ij = (di + dj - densities[("im", i, j)]) / 2.0
            cells[:, i, j] = re_ij + 1j * im_ij
            cells[:, j, i] = re_ij - 1j * im_ij
    cells /= grid_n  # densities to cell masses

    # PSD projection per cell
    w, v = np.linalg.eigh(cells)
    clipped = float(w.min())
    w = np.maximum(w, 0.0)
    cells = np.einsum("kij,kj,klj->kil", v, w, np.conj(v))

    atoms = MatrixBoundaryMeasure.create("circle", circle_grid(grid_n), cells)
    total = atoms.total()
    info = {
        "grid": grid_n,
        "r": r,
        "match_order": match_order,
        "worst_pre_clip_eig": clipped,
        "mass_deviation": float(np.max(np.abs(total - re0))),
    }
    return MatrixHerglotzRep(atoms=atoms, skew=skew, domain=DomainSpec.disc(), info=info)


def eval_rep(rep: MatrixHerglotzRep, z):
    """skew + sum of H(z, alpha_k) E_k with the disc Herglotz kernel."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    alpha = rep.atoms.atom_points[:, 0]
    out = np.empty(z_arr.shape + (rep.dim, rep.dim), dtype=complex)
    for idx, zv in enumerate(z_arr.ravel()):
        kern = (alpha + zv) / (alpha - zv)
        out.reshape(-1, rep.dim, rep.dim)[idx] = rep.skew + np.einsum(
            "k,kij->ij", kern, rep.atoms.atom_matrices
        )
    if np.ndim(z) == 0:
        return out[0]
    return out


@dataclass(frozen=True)
class PsdAtomReport:
    passed: bool
    worst_atom_eig: float
    worst_atom_index: int
    union_excess: float
    mass_deviation: float | None
    tol: float


def psd_atom_check(
    measure: MatrixBoundaryMeasure,
    re_f0: np.ndarray | None = None,
    tol: float = 1e-10,
) -> PsdAtomReport:
    """Per-atom PSD check plus a union-monotonicity surrogate.

    Every atom must have smallest eigenvalue >= -tol, and partial sums over
    dyadic index arcs must stay below the total (or Re F(z0) when supplied)
    up to tol in the largest eigenvalue.
    """
    mats = measure.atom_matrices
    eigs = np.linalg.eigvalsh((mats + np.conj(np.swapaxes(mats, 1, 2))) / 2.0)
    worst = float(eigs[:, 0].min())
    worst_idx = int(np.argmin(eigs[:, 0]))
    bound = measure.total() if re_f0 is None else np.asarray(re_f0, dtype=complex)
    k = mats.shape[0]
    excess = -np.inf
    length = 1
    while length <= k:
        for start in range(0, k, length):
            partial = mats[start : start + length].sum(axis=0)
            h = (partial + partial.conj().T) / 2.0 - (bound + bound.conj().T) / 2.0
            excess = max(excess, float(np.linalg.eigvalsh(h)[-1]))
        length *= 2
    mass_dev = None
    if re_f0 is not None:
        mass_dev = float(np.max(np.abs(measure.total() - bound)))
    return PsdAtomReport(
        passed=(worst >= -tol) and (excess <= tol),
        worst_atom_eig=worst,
        worst_atom_index=worst_idx,
        union_excess=float(excess),
        mass_deviation=mass_dev,
        tol=tol,
    )
