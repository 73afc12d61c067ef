"""Boundary measures, moments, and determining-measure tests.

A BoundaryMeasure lives on one of four distinguished boundaries: the unit
circle, the d-torus, the symmetrized-bidisc boundary (stored through its
two-to-one torus parametrization), or the two circles bounding an annulus.
It is either atomic or a nonnegative density against the normalized
arclength/Haar measure of each boundary component.  Symmetrized-bidisc
densities fold the |z1 - z2|^2 / 2 surface weight into the stored values,
so plain torus-grid averages integrate against the boundary measure.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .numerics import PSD_TOL, FourierTable

BOUNDARY_TOL = 1e-12

CIRCLE = "circle"
TORUS = "torus"
SYM_TORUS = "sym_torus"
ANNULUS = "annulus"


def grid_angles(n: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


def circle_grid(n: int) -> np.ndarray:
    return np.exp(1j * grid_angles(n))


def torus_grid(d: int, n: int) -> np.ndarray:
    """Grid points of the d-torus, shape (n, ..., n, d)."""
    axes = np.meshgrid(*([circle_grid(n)] * d), indexing="ij")
    return np.stack(axes, axis=-1)


def symmetrize(z1, z2):
    """Map a pair of unimodular coordinates to (sum, product)."""
    return z1 + z2, z1 * z2


def sym_point_on_boundary(s, p, tol: float = 1e-9) -> bool:
    s = complex(s)
    p = complex(p)
    return (
        abs(abs(p) - 1.0) <= tol
        and abs(s) <= 2.0 + tol
        and abs(s - p * np.conj(s)) <= tol
    )


@dataclass(frozen=True)
class BoundaryMeasure:
    """Nonnegative measure on a distinguished boundary.

    Exactly one of the atomic and density representations is populated.
    ``density`` holds values against normalized arclength/Haar; for the
    annulus, ``density`` is the outer circle and ``density_inner`` the inner
    circle at radius ``q``.
    """

    boundary: str
    d: int = 1
    q: float | None = None
    atom_points: np.ndarray | None = None
    atom_weights: np.ndarray | None = None
    density: np.ndarray | None = None
    density_inner: np.ndarray | None = None
    info: dict = field(default_factory=dict, compare=False)

    # -- constructors

    @staticmethod
    def circle_atoms(points, weights) -> "BoundaryMeasure":
        pts = np.asarray(points, dtype=complex).reshape(-1, 1)
        w = _check_weights(weights, pts.shape[0])
        if np.max(np.abs(np.abs(pts) - 1.0), initial=0.0) > BOUNDARY_TOL:
            raise ValidationError("circle atoms must have modulus 1")
        return BoundaryMeasure(CIRCLE, 1, atom_points=pts, atom_weights=w)

    @staticmethod
    def circle_density(values) -> "BoundaryMeasure":
        v = _check_density(values, ndim=1)
        return BoundaryMeasure(CIRCLE, 1, density=v)

    @staticmethod
    def torus_atoms(points, weights) -> "BoundaryMeasure":
        pts = np.asarray(points, dtype=complex)
        if pts.ndim == 1:
            pts = pts[:, np.newaxis]
        w = _check_weights(weights, pts.shape[0])
        if np.max(np.abs(np.abs(pts) - 1.0), initial=0.0) > BOUNDARY_TOL:
            raise ValidationError("torus atoms must have unimodular coordinates")
        return BoundaryMeasure(TORUS, pts.shape[1], atom_points=pts, atom_weights=w)

    @staticmethod
    def torus_density(values) -> "BoundaryMeasure":
        v = np.asarray(values, dtype=float)
        v = _check_density(values, ndim=v.ndim)
        return BoundaryMeasure(TORUS, v.ndim, density=v)

    @staticmethod
    def haar(boundary: str = CIRCLE, d: int = 1, grid: int = 64) -> "BoundaryMeasure":
        if boundary == CIRCLE:
            return BoundaryMeasure.circle_density(np.ones(grid))
        if boundary == TORUS:
            return BoundaryMeasure.torus_density(np.ones((grid,) * d))
        raise ValidationError("haar() supports circle and torus boundaries")

    @staticmethod
    def sym_atoms(points, weights) -> "BoundaryMeasure":
        pts = np.asarray(points, dtype=complex).reshape(-1, 2)
        w = _check_weights(weights, pts.shape[0])
        for s, p in pts:
            if not sym_point_on_boundary(s, p):
                raise ValidationError(f"({s}, {p}) is not on the symmetrized boundary")
        return BoundaryMeasure(SYM_TORUS, 2, atom_points=pts, atom_weights=w)

    @staticmethod
    def sym_density(values) -> "BoundaryMeasure":
        v = _check_density(values, ndim=2)
        if v.shape[0] != v.shape[1]:
            raise ValidationError("symmetrized pullback grid must be square")
        return BoundaryMeasure(SYM_TORUS, 2, density=v)

    @staticmethod
    def sym_surface(grid: int) -> "BoundaryMeasure":
        """The reference boundary measure: pushforward of |z1 - z2|^2/2 dm."""
        g = torus_grid(2, grid)
        jac = g[..., 0] - g[..., 1]
        return BoundaryMeasure.sym_density(0.5 * np.abs(jac) ** 2)

    @staticmethod
    def annulus_atoms(q: float, points, weights) -> "BoundaryMeasure":
        _check_q(q)
        pts = np.asarray(points, dtype=complex).reshape(-1, 1)
        w = _check_weights(weights, pts.shape[0])
        radii = np.abs(pts)
        on_outer = np.abs(radii - 1.0) <= BOUNDARY_TOL
        on_inner = np.abs(radii - q) <= BOUNDARY_TOL
        if not np.all(on_outer | on_inner):
            raise ValidationError("annulus atoms must sit on one of the two circles")
        return BoundaryMeasure(ANNULUS, 1, q=q, atom_points=pts, atom_weights=w)

    @staticmethod
    def annulus_density(q: float, outer, inner) -> "BoundaryMeasure":
        _check_q(q)
        vo = _check_density(outer, ndim=1)
        vi = _check_density(inner, ndim=1)
        return BoundaryMeasure(ANNULUS, 1, q=q, density=vo, density_inner=vi)

    # -- basic queries

    @property
    def is_atomic(self) -> bool:
        return self.atom_points is not None

    def mass(self) -> float:
        if self.is_atomic:
            return float(np.sum(self.atom_weights))
        total = float(np.mean(self.density))
        if self.boundary == ANNULUS:
            total += float(np.mean(self.density_inner))
        return total

    def scaled(self, factor: float) -> "BoundaryMeasure":
        if factor < 0:
            raise ValidationError("measures stay nonnegative; factor must be >= 0")
        if self.is_atomic:
            return BoundaryMeasure(
                self.boundary, self.d, self.q,
                atom_points=self.atom_points,
                atom_weights=self.atom_weights * factor,
            )
        inner = None if self.density_inner is None else self.density_inner * factor
        return BoundaryMeasure(
            self.boundary, self.d, self.q,
            density=self.density * factor, density_inner=inner,
        )

    def support_points(self):
        """Boundary points carrying the measure, atom list or grid."""
        if self.is_atomic:
            return self.atom_points
        n = self.density.shape[0]
        if self.boundary == CIRCLE:
            return circle_grid(n).reshape(-1, 1)
        if self.boundary == TORUS:
            return torus_grid(self.d, n).reshape(-1, self.d)
        if self.boundary == SYM_TORUS:
            g = torus_grid(2, n)
            s, p = symmetrize(g[..., 0], g[..., 1])
            return np.stack([s, p], axis=-1).reshape(-1, 2)
        out = circle_grid(n)
        return np.concatenate([out, self.q * out]).reshape(-1, 1)

    def integrate(self, fn) -> complex:
        """Integral of a pointwise function over the measure.

        ``fn`` receives an array of points shaped (k, d) (d=1 components are
        still passed with a trailing axis) and must return values shaped (k,).
        """
        if self.is_atomic:
            vals = np.asarray(fn(self.atom_points))
            return complex(np.sum(self.atom_weights * vals))
        pts = self.support_points()
        vals = np.asarray(fn(pts))
        if self.boundary == ANNULUS:
            n = self.density.shape[0]
            vo = vals[:n] * self.density
            vi = vals[n:] * self.density_inner
            return complex(np.mean(vo) + np.mean(vi))
        weights = self.density.ravel()
        return complex(np.mean(weights * vals))

    # -- serialization (complex numbers as [re, im] pairs)

    def to_json(self) -> dict:
        out: dict = {"boundary": self.boundary}
        if self.boundary == TORUS:
            out["d"] = self.d
        if self.boundary == ANNULUS:
            out["q"] = self.q
        if self.is_atomic:
            atoms = []
            for p, w in zip(self.atom_points, self.atom_weights):
                point = [[float(c.real), float(c.imag)] for c in p]
                if self.boundary in (CIRCLE, ANNULUS):
                    point = point[0]
                atoms.append({"point": point, "weight": float(w)})
            out["atoms"] = atoms
        else:
            dens: dict = {"grid": int(self.density.shape[0])}
            if self.boundary == ANNULUS:
                dens["outer"] = [float(v) for v in self.density]
                dens["inner"] = [float(v) for v in self.density_inner]
            else:
                dens["values"] = [float(v) for v in self.density.ravel()]
            out["density"] = dens
        return out

    @staticmethod
    def from_json(obj: dict) -> "BoundaryMeasure":
        boundary = obj.get("boundary")
        if boundary not in (CIRCLE, TORUS, SYM_TORUS, ANNULUS):
            raise ValidationError(f"unknown boundary tag {boundary!r}")
        d = int(obj.get("d", 2 if boundary == SYM_TORUS else 1))
        if "atoms" in obj:
            pts, ws = [], []
            for atom in obj["atoms"]:
                point = atom["point"]
                if boundary in (CIRCLE, ANNULUS):
                    point = [point]
                pts.append([complex(c[0], c[1]) for c in point])
                ws.append(atom["weight"])
            if boundary == CIRCLE:
                return BoundaryMeasure.circle_atoms([p[0] for p in pts], ws)
            if boundary == TORUS:
                return BoundaryMeasure.torus_atoms(pts, ws)
            if boundary == SYM_TORUS:
                return BoundaryMeasure.sym_atoms(pts, ws)
            return BoundaryMeasure.annulus_atoms(obj["q"], [p[0] for p in pts], ws)
        dens = obj.get("density")
        if dens is None:
            raise ValidationError("measure needs atoms or a density block")
        n = int(dens["grid"])
        if boundary == ANNULUS:
            return BoundaryMeasure.annulus_density(obj["q"], dens["outer"], dens["inner"])
        values = np.asarray(dens["values"], dtype=float)
        if boundary == CIRCLE:
            return BoundaryMeasure.circle_density(values.reshape(n))
        shape = (n,) * d
        if boundary == TORUS:
            return BoundaryMeasure.torus_density(values.reshape(shape))
        return BoundaryMeasure.sym_density(values.reshape(n, n))


def _check_weights(weights, count: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != count:
        raise ValidationError("one weight per atom required")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite")
    if np.any(w < 0):
        raise ValidationError("weights must be nonnegative")
    return w


def _check_density(values, ndim: int) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim != ndim:
        raise ValidationError(f"density must be {ndim}-dimensional")
    if not np.all(np.isfinite(v)):
        raise ValidationError("density values must be finite")
    if np.any(v < -PSD_TOL):
        raise ValidationError("density values must be nonnegative")
    v = np.maximum(v, 0.0)
    v.flags.writeable = False
    return v


def _check_q(q: float):
    if not (0.0 < q < 1.0):
        raise ValidationError("annulus inner radius must satisfy 0 < q < 1")


@dataclass(frozen=True)
class MatrixBoundaryMeasure:
    """Atomic measure with positive semidefinite matrix weights."""

    boundary: str
    atom_points: np.ndarray
    atom_matrices: np.ndarray
    d: int = 1

    @staticmethod
    def create(boundary: str, points, matrices, tol: float = PSD_TOL) -> "MatrixBoundaryMeasure":
        pts = np.asarray(points, dtype=complex)
        if pts.ndim == 1:
            pts = pts[:, np.newaxis]
        mats = np.asarray(matrices, dtype=complex)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValidationError("matrix weights must be a stack of square matrices")
        if mats.shape[0] != pts.shape[0]:
            raise ValidationError("one matrix weight per atom required")
        herm = np.max(np.abs(mats - np.conj(np.swapaxes(mats, 1, 2))))
        if herm > 1e-8:
            raise ValidationError("matrix weights must be Hermitian")
        eigs = np.linalg.eigvalsh((mats + np.conj(np.swapaxes(mats, 1, 2))) / 2)
        if float(eigs.min()) < -tol:
            raise ValidationError(
                f"matrix weight has eigenvalue {eigs.min():.3e} below -{tol:.0e}"
            )
        return MatrixBoundaryMeasure(boundary, pts, mats, pts.shape[1])

    @property
    def matrix_dim(self) -> int:
        return self.atom_matrices.shape[1]

    def total(self) -> np.ndarray:
        return self.atom_matrices.sum(axis=0)

    def integrate(self, fn) -> np.ndarray:
        vals = np.asarray(fn(self.atom_points))
        return np.einsum("k,kij->ij", vals, self.atom_matrices)

    def scalar_part(self, h) -> BoundaryMeasure:
        """Scalar measure <E(.) h, h> for a vector h."""
        h = np.asarray(h, dtype=complex).ravel()
        w = np.real(np.einsum("i,kij,j->k", np.conj(h), self.atom_matrices, h))
        w = np.maximum(w, 0.0)
        if self.boundary == CIRCLE:
            return BoundaryMeasure.circle_atoms(self.atom_points[:, 0], w)
        return BoundaryMeasure.torus_atoms(self.atom_points, w)

    def to_json(self) -> dict:
        atoms = []
        for p, m in zip(self.atom_points, self.atom_matrices):
            point = [[float(c.real), float(c.imag)] for c in p]
            if self.d == 1:
                point = point[0]
            atoms.append(
                {
                    "point": point,
                    "matrix": [
                        [[float(v.real), float(v.imag)] for v in row] for row in m
                    ],
                }
            )
        return {"boundary": self.boundary, "atoms": atoms}

    @staticmethod
    def from_json(obj: dict) -> "MatrixBoundaryMeasure":
        pts, mats = [], []
        for atom in obj["atoms"]:
            point = atom["point"]
            if not isinstance(point[0], list):
                point = [point]
            pts.append([complex(c[0], c[1]) for c in point])
            mats.append([[complex(v[0], v[1]) for v in row] for row in atom["matrix"]])
        return MatrixBoundaryMeasure.create(obj.get("boundary", CIRCLE), pts, mats)


# ---------------------------------------------------------------------------
# Moments


@dataclass(frozen=True)
class MomentTable:
    """Values of integral of u^n over the measure indexed by n in a box."""

    degree: int
    d: int
    table: FourierTable

    def get(self, index) -> complex:
        return self.table.get(index)

    def to_csv(self, stream=None) -> str:
        """CSV with columns n1..nd, re, im; row order is C order of the box."""
        own = stream is None
        if own:
            stream = io.StringIO()
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow([f"n{j + 1}" for j in range(self.d)] + ["re", "im"])
        values = self.table.coeffs.ravel()
        for idx, val in zip(self.table.indices(), values):
            writer.writerow(
                [int(i) for i in idx] + [repr(float(val.real)), repr(float(val.imag))]
            )
        return stream.getvalue() if own else ""


def moments(measure: BoundaryMeasure, degree: int) -> MomentTable:
    """Moments of u^n for all multi-indices with |n_j| <= degree.

    Supported on circle and torus boundaries: exact sums for atoms,
    quadrature for densities (exact below the grid Nyquist index).
    """
    if measure.boundary not in (CIRCLE, TORUS):
        raise ValidationError("moments require a circle or torus boundary")
    if degree < 0:
        raise ValidationError("degree must be nonnegative")
    d = measure.d
    if measure.is_atomic:
        rng = np.arange(-degree, degree + 1)
        coeffs = None
        for j in range(d):
            powers = measure.atom_points[:, j][:, np.newaxis] ** rng[np.newaxis, :]
            block = powers if coeffs is None else coeffs[..., np.newaxis] * powers[
                (slice(None),) + (np.newaxis,) * (coeffs.ndim - 1)
            ]
            coeffs = block
        weighted = measure.atom_weights.reshape((-1,) + (1,) * d) * coeffs
        tab = FourierTable(degree, weighted.sum(axis=0))
        return MomentTable(degree, d, tab)
    values = measure.density
    size = values.size
    n = values.shape[0]
    if n < 2 * degree + 1:
        raise ValidationError("density grid too coarse for the requested degree")
    spec = np.fft.fftn(values) / size
    rng = np.arange(-degree, degree + 1)
    # moment at n is the density coefficient at -n
    sel = np.ix_(*[(-rng) % m for m in values.shape])
    return MomentTable(degree, d, FourierTable(degree, np.ascontiguousarray(spec[sel])))


# ---------------------------------------------------------------------------
# Determining-measure tests


@dataclass(frozen=True)
class DeterminingReport:
    passed: bool
    worst_value: float
    worst_index: tuple
    tol: float
    checked: int


def _mixed_sign(idx) -> bool:
    has_pos = any(i > 0 for i in idx)
    has_neg = any(i < 0 for i in idx)
    return has_pos and has_neg


def is_determining_polydisc(
    measure: BoundaryMeasure, degree: int = 8, tol: float = 1e-6
) -> DeterminingReport:
    """Check that every mixed-sign torus moment up to ``degree`` vanishes."""
    table = moments(measure, degree)
    worst = 0.0
    worst_idx: tuple = ()
    checked = 0
    for idx, val in zip(table.table.indices(), table.table.coeffs.ravel()):
        tup = tuple(int(i) for i in idx)
        if not _mixed_sign(tup):
            continue
        checked += 1
        mod = abs(val)
        if mod > worst:
            worst, worst_idx = mod, tup
    return DeterminingReport(worst <= tol, worst, worst_idx, tol, checked)


def sym_basis_value(j: int, k: int, s, p):
    """Value of p^j (z1^k - z2^k)/(z1 - z2) expressed in (s, p) coordinates.

    The divided difference satisfies h_0 = 1, h_m = s h_{m-1} - p h_{m-2},
    and the basis function is p^j h_{k-1}; valid on and off the diagonal.
    """
    if k < 1:
        raise ValidationError("k must be at least 1")
    s = np.asarray(s, dtype=complex)
    p = np.asarray(p, dtype=complex)
    h_prev = np.zeros_like(s)
    h = np.ones_like(s)
    for _ in range(k - 1):
        h, h_prev = s * h - p * h_prev, h
    return p**j * h


def is_determining_sym_bidisc(
    measure: BoundaryMeasure,
    jmax: int = 4,
    kmax: int = 8,
    tol: float = 1e-6,
) -> DeterminingReport:
    """Check the symmetrized-bidisc orthogonality conditions.

    Evaluates the integrals of p^j e_k over the measure for j, k >= 1 with
    k - j > 1, up to the given caps.
    """
    if measure.boundary != SYM_TORUS:
        raise ValidationError("expected a symmetrized-bidisc boundary measure")
    worst = 0.0
    worst_idx: tuple = ()
    checked = 0
    for j in range(1, jmax + 1):
        for k in range(1, kmax + 1):
            if k - j <= 1:
                continue
            checked += 1
            val = measure.integrate(
                lambda pts, j=j, k=k: sym_basis_value(j, k, pts[..., 0], pts[..., 1])
            )
            if abs(val) > worst:
                worst, worst_idx = abs(val), (j, k)
    return DeterminingReport(worst <= tol, worst, worst_idx, tol, checked)


def wstar_distance(mu1: BoundaryMeasure, mu2: BoundaryMeasure, test_degree: int) -> float:
    """Max difference of trigonometric-monomial integrals up to a degree."""
    if mu1.boundary != mu2.boundary or mu1.d != mu2.d:
        raise ValidationError("measures live on different boundaries")
    if mu1.boundary not in (CIRCLE, TORUS):
        raise ValidationError("weak-star surrogate defined on circle/torus only")
    t1 = moments(mu1, test_degree)
    t2 = moments(mu2, test_degree)
    return float(np.max(np.abs(t1.table.coeffs - t2.table.coeffs)))


@dataclass(frozen=True)
class UniquenessReport:
    equal: bool
    worst_value: float
    witness: tuple
    tol: float


def reinhardt_uniqueness_check(
    mu1: BoundaryMeasure,
    mu2: BoundaryMeasure,
    degree: int = 8,
    tol: float = 1e-8,
) -> UniquenessReport:
    """Compare all monomial-pair moments of two torus measures.

    Two measures are declared equal when every integral of
    conj(u)^alpha u^beta with componentwise alpha, beta <= degree agrees
    within ``tol``.  The witness is the first pair, in order of total degree
    then lexicographic (alpha, beta), attaining the worst difference.
    """
    if mu1.boundary != mu2.boundary or mu1.d != mu2.d:
        raise ValidationError("measures live on different boundaries")
    if mu1.boundary not in (CIRCLE, TORUS):
        raise ValidationError("uniqueness check defined on circle/torus only")
    d = mu1.d
    t1 = moments(mu1, degree)
    t2 = moments(mu2, degree)
    boxes = [
        tuple(int(v) for v in idx)
        for idx in np.stack(
            np.meshgrid(*([np.arange(degree + 1)] * d), indexing="ij"), axis=-1
        ).reshape(-1, d)
    ]
    pairs = [(a, b) for a in boxes for b in boxes]
    pairs.sort(key=lambda ab: (sum(ab[0]) + sum(ab[1]), ab[0], ab[1]))
    worst = 0.0
    witness: tuple = ((), ())
    for alpha, beta in pairs:
        idx = tuple(b - a for a, b in zip(alpha, beta))
        diff = abs(t1.get(idx) - t2.get(idx))
        if diff > worst + 1e-300:
            worst, witness = diff, (alpha, beta)
    return UniquenessReport(worst <= tol, worst, witness, tol)
