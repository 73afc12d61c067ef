"""Rational inner approximation of Schur functions and the reverse pipeline.

Forward direction: a Schur function is Cayley-transformed to a function of
positive real part, its boundary measure is recovered on a shared circle
grid, the density is binned into finitely many atoms (equal arcs, bin mass
at the mass-weighted centroid), and the inverse Cayley transform of the
resulting rational function of positive real part is rational inner.

Reverse direction: a finite Blaschke product vanishing at the origin turns
into an atomic probability measure through the boundary solutions of
B(alpha) = -1 and the partial fractions of (1 - B)/(1 + B).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import NotSchurError, ValidationError
from .functions import (
    Blaschke,
    Const,
    FunctionSpec,
    MatrixFunction,
    Prod,
    Rational,
    eval_spec,
    is_matrix_spec,
    operator_norms,
    schur_check,
    _cayley_core,
)
from .herglotz_disc import HerglotzDiscRep, eval_rep, recover_measure
from .measures import BoundaryMeasure, circle_grid, grid_angles
from .numerics import clip_psd


class CayleySpec(FunctionSpec):
    """Pointwise (I - phi)(I + phi)^{-1} of a matrix-valued spec."""

    kind = "cayley_of"

    def __init__(self, phi: FunctionSpec):
        self.phi = phi

    def _eval(self, z):
        return _cayley_core(np.asarray(self.phi._eval(z)))


@dataclass(frozen=True)
class RationalInnerSpec:
    """Atoms and weights of the Cayley-transformed side plus certificates.

    Scalar case: ``weights`` are positive reals and ``scalar_rational``
    holds the expanded inner function; matrix case: ``weights`` is a stack
    of PSD matrices.  ``imag_const`` is i Im theta(0) (a real scalar or an
    anti-Hermitian matrix is stored as-is).
    """

    atoms: np.ndarray
    weights: np.ndarray
    imag_const: complex | np.ndarray
    scalar_rational: Rational | None
    boundary_deviation: float
    sup_errors: tuple
    info: dict = field(default_factory=dict, compare=False)

    @property
    def is_matrix(self) -> bool:
        return self.weights.ndim == 3

    def theta_values(self, z) -> np.ndarray:
        """Values of i Im theta(0) + sum of kernel(alpha_j, z) weights."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        kern = (self.atoms[np.newaxis, :] + z[:, np.newaxis]) / (
            self.atoms[np.newaxis, :] - z[:, np.newaxis]
        )
        if self.is_matrix:
            vals = np.einsum("zk,kij->zij", kern, self.weights)
            return vals + np.asarray(self.imag_const)[np.newaxis, :, :]
        return complex(self.imag_const) + kern @ self.weights

    def eval(self, z):
        """Value of the rational inner function itself."""
        z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
        if not self.is_matrix:
            out = np.asarray(self.scalar_rational._eval(z_arr))
            return complex(out.ravel()[0]) if np.ndim(z) == 0 else out
        sep = np.min(
            np.abs(z_arr[:, np.newaxis] - self.atoms[np.newaxis, :]), axis=1
        )
        z_arr = np.where(sep < 1e-11, z_arr * np.exp(1e-10j), z_arr)
        out = _cayley_core(self.theta_values(z_arr))
        return out[0] if np.ndim(z) == 0 else out


def _bin_shares(angles: np.ndarray, n_bins: int):
    """Bin index/weight pairs for equal arcs centered at 2 pi j / n_bins.

    Points exactly on a bin boundary split half-half between neighbors,
    which keeps symmetric densities symmetric within each bin.
    """
    t = (angles % (2 * np.pi)) / (2 * np.pi) * n_bins
    frac = t - np.floor(t)
    on_boundary = np.abs(frac - 0.5) < 1e-12
    nearest = np.rint(t).astype(int) % n_bins
    lower = np.floor(t).astype(int) % n_bins
    idx: list[np.ndarray] = []
    bins: list[np.ndarray] = []
    share: list[np.ndarray] = []
    inside = np.nonzero(~on_boundary)[0]
    idx.append(inside)
    bins.append(nearest[inside])
    share.append(np.ones(inside.shape[0]))
    edge = np.nonzero(on_boundary)[0]
    for offset in (0, 1):
        idx.append(edge)
        bins.append((lower[edge] + offset) % n_bins)
        share.append(np.full(edge.shape[0], 0.5))
    return np.concatenate(idx), np.concatenate(bins), np.concatenate(share)


def _bin_circle(values: np.ndarray, n_bins: int):
    """Equal-arc binning of a grid density into atoms at mass centroids."""
    n = values.shape[0]
    masses = values / n
    ang = grid_angles(n)
    idx, bins, share = _bin_shares(ang, n_bins)
    acc_mass = np.zeros(n_bins)
    acc_dir = np.zeros(n_bins, dtype=complex)
    np.add.at(acc_mass, bins, share * masses[idx])
    np.add.at(acc_dir, bins, share * masses[idx] * np.exp(1j * ang[idx]))
    # bins carrying only numerical dust would turn into spurious atoms
    keep = acc_mass > 1e-12 * acc_mass.sum()
    centroids = acc_dir[keep] / np.abs(acc_dir[keep])
    return centroids, acc_mass[keep]


def _bin_matrix_cells(points: np.ndarray, cells: np.ndarray, n_bins: int):
    """Equal-arc binning of matrix cell weights; centroids weighted by trace."""
    ang = np.angle(points)
    idx, bins, share = _bin_shares(ang, n_bins)
    dim = cells.shape[1]
    acc = np.zeros((n_bins, dim, dim), dtype=complex)
    acc_dir = np.zeros(n_bins, dtype=complex)
    tr = np.real(np.trace(cells, axis1=1, axis2=2))
    np.add.at(acc, bins, share[:, np.newaxis, np.newaxis] * cells[idx])
    np.add.at(acc_dir, bins, share * tr[idx] * points[idx])
    bin_tr = np.real(np.trace(acc, axis1=1, axis2=2))
    keep = (bin_tr > 1e-12 * bin_tr.sum()) & (np.abs(acc_dir) > 0)
    centroids = acc_dir[keep] / np.abs(acc_dir[keep])
    mats = np.stack([clip_psd(m) for m in acc[keep]])
    return centroids, mats


def _balanced_product(atoms) -> np.ndarray:
    """Product of (alpha_j - z), pairing interleaved halves of the angle order.

    The interleaving keeps every subproduct spread around the circle, so
    intermediate coefficients stay O(1) instead of binomially large.
    """
    if len(atoms) == 0:
        return np.array([1.0 + 0.0j])
    if len(atoms) == 1:
        return np.array([atoms[0], -1.0])
    return npoly.polymul(_balanced_product(atoms[0::2]), _balanced_product(atoms[1::2]))


def _deflate_linear(poly: np.ndarray, alpha: complex) -> np.ndarray:
    """Quotient of a polynomial by its exact factor (alpha - z)."""
    n = poly.shape[0] - 1
    q = np.zeros(n, dtype=complex)
    q[n - 1] = -poly[n]
    for k in range(n - 1, 0, -1):
        q[k - 1] = alpha * q[k] - poly[k]
    return q


def _scalar_rational_from_atoms(atoms, weights, imag0: float) -> Rational:
    """Expand (D - N)/(D + N) for theta = i a + sum w (alpha + z)/(alpha - z)."""
    order = np.argsort(np.angle(atoms))
    atoms = np.asarray(atoms, dtype=complex)[order]
    weights = np.asarray(weights, dtype=float)[order]
    d_poly = _balanced_product(list(atoms))
    n_poly = 1j * imag0 * d_poly
    for a, w in zip(atoms, weights):
        rest = _deflate_linear(d_poly, a)
        n_poly = npoly.polyadd(n_poly, w * npoly.polymul([a, 1.0], rest))
    num = npoly.polysub(d_poly, n_poly)
    den = npoly.polyadd(d_poly, n_poly)
    return Rational(tuple(num), tuple(den))


def _sup_error_points():
    pts = [np.zeros(1, dtype=complex)]
    for r in (0.2, 0.4, 0.6):
        pts.append(r * circle_grid(64))
    return np.concatenate(pts)


def approximate_schur(
    phi: FunctionSpec,
    n_atoms: int,
    shrink: float = 0.0,
    grid_n: int = 4096,
    r: float = 0.999,
) -> RationalInnerSpec:
    """Approximate a Schur function by a rational inner function.

    Pipeline: Cayley transform of (1 - shrink) phi, boundary-measure
    recovery on the shared grid, equal-arc binning to ``n_atoms`` atoms,
    and the inverse Cayley transform of the resulting atomic sum.  The
    shrink is required when the norm comes within 1e-8 of one on the
    interior test grid.
    """
    if n_atoms < 1:
        raise ValidationError("need at least one atom")
    report = schur_check(phi)
    if not report.is_schur:
        raise NotSchurError(
            f"interior norm reaches {report.interior_max:.6f} > 1"
        )
    if report.interior_max >= 1.0 - 1e-8 and shrink <= 0.0:
        raise ValidationError(
            "norm reaches one on the test grid; a positive shrink is required"
        )
    if shrink > 0.0:
        if is_matrix_spec(phi):
            scaled = MatrixFunction(
                tuple(
                    tuple(Prod((Const(1.0 - shrink), e)) for e in row)
                    for row in phi.entries
                )
            )
        else:
            scaled = Prod((Const(1.0 - shrink), phi))
    else:
        scaled = phi

    sup_pts = _sup_error_points()
    phi_vals = np.asarray(eval_spec(phi, sup_pts))

    if is_matrix_spec(phi):
        from .operator_lift import lift

        theta = MatrixWrapper(CayleySpec(scaled), phi.dim)
        mrep = lift(theta, grid_n=grid_n, r=r)
        atoms, weights = _bin_matrix_cells(
            mrep.atoms.atom_points[:, 0], mrep.atoms.atom_matrices, n_atoms
        )
        imag_const: complex | np.ndarray = mrep.skew
        scalar = None
    else:
        theta_spec = Rational((1.0, -1.0), (1.0, 1.0), arg=scaled)
        rep = recover_measure(theta_spec, grid_n=grid_n, r=r, undilate=True)
        atoms, weights = _bin_circle(rep.measure.density, n_atoms)
        scalar = _scalar_rational_from_atoms(atoms, weights, rep.imag)
        imag_const = complex(0.0, rep.imag)

    spec = RationalInnerSpec(
        atoms=atoms,
        weights=weights,
        imag_const=imag_const,
        scalar_rational=scalar,
        boundary_deviation=0.0,
        sup_errors=(),
        info={"n_atoms": n_atoms, "shrink": shrink, "grid": grid_n, "r": r},
    )
    # boundary unitarity certificate on a half-cell offset 1024-point grid
    cert_grid = np.exp(1j * (grid_angles(1024) + np.pi / 1024.0))
    bvals = spec.eval(cert_grid)
    bdev = float(np.max(np.abs(operator_norms(bvals) - 1.0)))
    approx_vals = spec.eval(sup_pts)
    sup_err = float(np.max(operator_norms(approx_vals - phi_vals)))
    object.__setattr__(spec, "boundary_deviation", bdev)
    object.__setattr__(spec, "sup_errors", (sup_err,))
    return spec


class MatrixWrapper(MatrixFunction):
    """Present a pointwise matrix-valued spec through the matrix interface."""

    def __init__(self, inner: FunctionSpec, dim: int):
        object.__setattr__(
            self, "entries", tuple((Const(0.0),) * dim for _ in range(dim))
        )
        object.__setattr__(self, "inner", inner)

    def _eval(self, z):
        return self.inner._eval(z)


def blaschke_to_atoms(B: FunctionSpec) -> BoundaryMeasure:
    """Atomic probability measure of the inverse Cayley transform of B.

    B must be a finite Blaschke product (or rational inner function) with
    B(0) = 0.  Atoms sit at the boundary roots of B(alpha) = -1; weights
    come from the partial fractions of (1 - B)/(1 + B) and sum to one.
    """
    if isinstance(B, Blaschke):
        if not B.vanishes_at_origin():
            raise ValidationError("B(0) = 0 is required")
        rat = B.as_rational()
    elif isinstance(B, Rational) and B.arg is None:
        rat = B
        if abs(complex(eval_spec(B, 0.0))) > 1e-10:
            raise ValidationError("B(0) = 0 is required")
        inner_report = schur_check(B)
        if inner_report.boundary_deviation > 1e-8:
            raise ValidationError("B is not inner on the boundary grid")
    else:
        raise ValidationError("expected a Blaschke product or rational spec")

    num = np.asarray(rat.num, dtype=complex)
    den = np.asarray(rat.den, dtype=complex)
    coeffs = npoly.polyadd(num, den)
    roots = npoly.polyroots(coeffs)
    alphas = roots / np.abs(roots)
    resid = np.abs(
        npoly.polyval(alphas, num) / npoly.polyval(alphas, den) + 1.0
    )
    if np.any(resid > 1e-8):
        raise ValidationError(
            f"root solve failed; |B(alpha)+1| residuals {np.sort(resid)[::-1][:3]}"
        )
    dn = npoly.polyder(num)
    dd = npoly.polyder(den)
    bprime = (
        npoly.polyval(alphas, dn) * npoly.polyval(alphas, den)
        - npoly.polyval(alphas, num) * npoly.polyval(alphas, dd)
    ) / npoly.polyval(alphas, den) ** 2
    lam = np.real(-1.0 / (alphas * bprime))
    if np.any(lam <= 0):
        raise ValidationError("partial-fraction weights must be positive")
    total = float(lam.sum())
    if abs(total - 1.0) > 1e-10:
        raise ValidationError(f"weights sum to {total}, expected 1")
    order = np.argsort(np.angle(alphas))
    return BoundaryMeasure.circle_atoms(alphas[order], lam[order])


@dataclass(frozen=True)
class ConvergenceReport:
    degrees: tuple
    sup_errors: tuple
    test_points: np.ndarray


def caratheodory_recover(
    f: FunctionSpec, degrees=(4, 8, 16, 32), grid_n: int = 4096, r: float = 0.999
):
    """Approximate the boundary measure of f through inner-function atoms.

    Cayley-transforms f (normalized by f(0) = 1), approximates the
    resulting Schur function at each requested atom count, extracts the
    atomic measures of the approximants, and reports the pointwise errors
    of their integral representations against f on an interior test grid.
    Returns the last measure together with the convergence report.
    """
    f0 = complex(eval_spec(f, 0.0))
    if abs(f0 - 1.0) > 1e-10:
        raise ValidationError("recovery expects the normalization f(0) = 1")
    g = Rational((1.0, -1.0), (1.0, 1.0), arg=f)
    test_pts = _sup_error_points()
    f_vals = np.asarray(eval_spec(f, test_pts))
    measures, errors = [], []
    for n in degrees:
        inner = approximate_schur(g, n, shrink=0.0, grid_n=grid_n, r=r)
        mu = blaschke_to_atoms(inner.scalar_rational)
        rep = HerglotzDiscRep(mu, imag=0.0)
        vals = np.asarray(eval_rep(rep, test_pts))
        errors.append(float(np.max(np.abs(vals - f_vals))))
        measures.append(mu)
    return measures[-1], ConvergenceReport(tuple(degrees), tuple(errors), test_pts)
