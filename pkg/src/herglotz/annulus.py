"""Numeric Hardy-space pipeline on the annulus q < |z| < 1.

Everything is built on the harmonic measure of the base point: Laurent
monomials are orthonormalized against it by a normalized Gram factorization,
giving a truncated reproducing kernel; the one-dimensional defect space
(boundary trig polynomials orthogonal to the monomials and their
conjugates) supplies the side constraint of measure recovery, which is a
nonnegative least squares fit of the kernel integral to interior samples.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import GramConditionError, NotHerglotzError, ValidationError
from .functions import FunctionSpec, eval_spec
from .measures import BoundaryMeasure, circle_grid, grid_angles
from .numerics import min_eig_hermitian, nnls_with_equalities


def harmonic_measure(q: float, z0: float, grid_n: int = 512) -> BoundaryMeasure:
    """Harmonic measure of a real base point, as densities on both circles.

    Solved mode by mode: radial harmonics a + b log r for the mean, and
    A r^n + B r^{-n} pairs for each circular mode, each matched to the
    boundary data of the mode on one circle and zero on the other.
    Reproduces every z^n (n of either sign) at the base point exactly.
    """
    _check_annulus_params(q, z0)
    if grid_n < 16 or (grid_n & (grid_n - 1)) != 0:
        raise ValidationError("grid size must be a power of two, at least 16")
    n_modes = grid_n // 2 - 1
    out_hat = np.zeros(grid_n, dtype=float)
    in_hat = np.zeros(grid_n, dtype=float)
    out_hat[0] = 1.0 - np.log(z0) / np.log(q)
    in_hat[0] = np.log(z0) / np.log(q)
    ns = np.arange(1, n_modes + 1, dtype=float)
    qn = q**ns
    q2n = qn**2
    zn = z0**ns
    out_mode = (zn - q2n / zn) / (1.0 - q2n)
    in_mode = qn * (1.0 / zn - zn) / (1.0 - q2n)
    for arr, mode in ((out_hat, out_mode), (in_hat, in_mode)):
        arr[1 : n_modes + 1] = mode
        arr[grid_n - n_modes :] = mode[::-1]
    rho_out = np.fft.ifft(out_hat * grid_n).real
    rho_in = np.fft.ifft(in_hat * grid_n).real
    return BoundaryMeasure.annulus_density(q, rho_out, rho_in)


def _check_annulus_params(q: float, z0: float):
    if not (0.0 < q < 1.0):
        raise ValidationError("inner radius must satisfy 0 < q < 1")
    if not (q < z0 < 1.0):
        raise ValidationError("base point must lie strictly between the circles")


@dataclass(frozen=True)
class HardyBasisNumeric:
    """Truncated orthonormal basis data for the annulus Hardy space.

    Monomials z^m, |m| <= trunc_n, are rescaled to unit norm before the
    Gram factorization, so the stored Gram is a correlation matrix whose
    conditioning (and positive semidefiniteness, tested to -1e-10) is
    meaningful despite the huge dynamic range of raw Laurent norms.
    """

    q: float
    z0: float
    trunc_n: int
    grid_n: int
    omega: BoundaryMeasure
    scales: np.ndarray
    gram: np.ndarray
    coeff: np.ndarray
    q_out: np.ndarray
    q_in: np.ndarray
    wperp_singular_values: np.ndarray
    info: dict = field(default_factory=dict, compare=False)

    @property
    def exponents(self) -> np.ndarray:
        return np.arange(-self.trunc_n, self.trunc_n + 1)

    def _kernel_matrix(self) -> np.ndarray:
        return self.coeff @ self.coeff.conj().T

    def monomial_vector(self, z) -> np.ndarray:
        """v_m(z) = z^m / scale_m for interior or boundary points."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        rad = np.abs(z)
        if np.any(rad < self.q - 1e-12) or np.any(rad > 1.0 + 1e-12):
            raise ValidationError("point outside the closed annulus")
        return z[..., np.newaxis] ** self.exponents / self.scales

    def kernel(self, z, w) -> complex:
        """Truncated reproducing kernel S(z, w)."""
        vz = self.monomial_vector(z)[0]
        vw = self.monomial_vector(w)[0]
        return complex(vz @ self._kernel_matrix() @ np.conj(vw))

    def boundary_points(self) -> np.ndarray:
        pts = circle_grid(self.grid_n)
        return np.concatenate([pts, self.q * pts])

    def q_samples(self) -> np.ndarray:
        return np.concatenate([self.q_out, self.q_in])

    def herglotz_rows(self, points) -> np.ndarray:
        """Matrix of 2 S(z_i, zeta_k) - 1 over the boundary support grid."""
        points = np.atleast_1d(np.asarray(points, dtype=complex))
        vzs = self.monomial_vector(points)
        vbnd = self.monomial_vector(self.boundary_points())
        s = (vzs @ self._kernel_matrix()) @ np.conj(vbnd.T)
        return 2.0 * s - 1.0

    def reconstruct(self, measure: BoundaryMeasure, points) -> np.ndarray:
        """Kernel integral of the measure at interior points."""
        if measure.boundary != "annulus":
            raise ValidationError("expected an annulus boundary measure")
        rows = self.herglotz_rows(points)
        if measure.is_atomic:
            vat = self.monomial_vector(measure.atom_points[:, 0])
            s = (self.monomial_vector(points) @ self._kernel_matrix()) @ np.conj(vat.T)
            return (2.0 * s - 1.0) @ measure.atom_weights
        masses = (
            np.concatenate([measure.density, measure.density_inner]) / measure.density.shape[0]
        )
        return rows @ masses


def build_basis(
    q: float, z0: float, trunc_n: int = 32, grid_n: int = 512
) -> HardyBasisNumeric:
    """Orthonormalize Laurent monomials in L2 of the harmonic measure.

    Quadrature Gram on the two-circle grid, normalized columns, Cholesky
    with PSD clipping, and the defect-space vector; fails with a
    conditioning hint when the normalized Gram is beyond 1e14.
    """
    _check_annulus_params(q, z0)
    if trunc_n > grid_n // 4:
        raise ValidationError("truncation must satisfy trunc_n <= grid_n / 4")
    omega = harmonic_measure(q, z0, grid_n)
    rho_out, rho_in = omega.density, omega.density_inner
    out_hat = np.fft.fft(rho_out) / grid_n
    in_hat = np.fft.fft(rho_in) / grid_n
    w_out = float(np.mean(rho_out))
    w_in = float(np.mean(rho_in))
    m = np.arange(-trunc_n, trunc_n + 1)
    if abs(2 * trunc_n * np.log(q)) > 300:
        raise GramConditionError("truncation too deep for the inner radius")
    scales = np.sqrt(w_out + q ** (2.0 * m) * w_in)

    # G[a, b] = <v_a, v_b> with v_m = z^m / scale_m
    diff = m[:, np.newaxis] - m[np.newaxis, :]
    qpow = q ** (m[:, np.newaxis] + m[np.newaxis, :]).astype(float)
    gram = (out_hat[(-diff) % grid_n] + qpow * in_hat[(-diff) % grid_n]) / np.outer(
        scales, scales
    )
    gram = (gram + gram.conj().T) / 2.0
    if min_eig_hermitian(gram) < -1e-10:
        raise GramConditionError("normalized Gram is not positive semidefinite")
    cond = float(np.linalg.cond(gram))
    if cond > 1e14:
        raise GramConditionError(
            f"normalized Gram condition {cond:.2e} beyond 1e14; reduce the truncation"
        )
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(gram)
        w = np.maximum(w, 1e-15 * w[-1])
        chol = np.linalg.cholesky((v * w) @ v.conj().T)
    coeff = scipy.linalg.solve_triangular(chol.T, np.eye(len(m), dtype=complex))

    q_out, q_in, singulars = _wperp_from_data(
        out_hat, in_hat, rho_out, rho_in, scales, q, trunc_n, grid_n
    )
    return HardyBasisNumeric(
        q=q,
        z0=z0,
        trunc_n=trunc_n,
        grid_n=grid_n,
        omega=omega,
        scales=scales,
        gram=gram,
        coeff=coeff,
        q_out=q_out,
        q_in=q_in,
        wperp_singular_values=singulars,
        info={"gram_cond": cond},
    )


def _wperp_from_data(out_hat, in_hat, rho_out, rho_in, scales, q, trunc_n, grid_n):
    """Null direction of boundary trig polynomials against monomials.

    The domain is the pair of degree-trunc_n trig polynomials on the two
    circles; the rows pair them with z^m and conj(z^m) in L2 of the
    harmonic measure.  The null space is one-dimensional for the annulus.
    """
    m = np.arange(-trunc_n, trunc_n + 1)
    k = np.arange(-trunc_n, trunc_n + 1)
    n_m = m.shape[0]
    rows = np.zeros((2 * n_m, 2 * n_m), dtype=complex)
    qpow_m = q ** m.astype(float)
    mk_diff = m[:, np.newaxis] - k[np.newaxis, :]
    mk_sum = m[:, np.newaxis] + k[np.newaxis, :]
    # <u, v_m>: coefficient rho_out_hat(m - k) on the outer block,
    # q^m rho_in_hat(m - k) on the inner block
    rows[:n_m, :n_m] = out_hat[mk_diff % grid_n] / scales[:, np.newaxis]
    rows[:n_m, n_m:] = (
        qpow_m[:, np.newaxis] * in_hat[mk_diff % grid_n] / scales[:, np.newaxis]
    )
    # <u, conj(v_m)>
    rows[n_m:, :n_m] = out_hat[(-mk_sum) % grid_n] / scales[:, np.newaxis]
    rows[n_m:, n_m:] = (
        qpow_m[:, np.newaxis] * in_hat[(-mk_sum) % grid_n] / scales[:, np.newaxis]
    )
    u_mat, sing, vh = np.linalg.svd(rows)
    null_count = int(np.sum(sing < 1e-8 * sing[0]))
    if null_count != 1:
        raise ValidationError(
            f"defect space dimension {null_count} != 1 at this truncation; "
            f"singular values tail {sing[-3:]}"
        )
    coeffs = np.conj(vh[-1])
    a, b = coeffs[:n_m], coeffs[n_m:]

    def synthesize(c):
        spec = np.zeros(grid_n, dtype=complex)
        spec[k % grid_n] = c
        return np.fft.ifft(spec * grid_n)

    q_out = synthesize(a)
    q_in = synthesize(b)

    def omega_norm(vo, vi):
        return float(np.mean(rho_out * np.abs(vo) ** 2) + np.mean(rho_in * np.abs(vi) ** 2))

    re_norm = omega_norm(q_out.real, q_in.real)
    im_norm = omega_norm(q_out.imag, q_in.imag)
    if re_norm >= im_norm:
        q_out, q_in = q_out.real, q_in.real
        norm = np.sqrt(re_norm)
    else:
        q_out, q_in = q_out.imag, q_in.imag
        norm = np.sqrt(im_norm)
    q_out = q_out / norm
    q_in = q_in / norm
    side = float(np.mean(rho_out * q_out))
    if side == 0.0:
        side = q_out[int(np.argmax(np.abs(q_out)))]
    if side < 0:
        q_out, q_in = -q_out, -q_in
    return q_out, q_in, sing


def wperp_basis(basis: HardyBasisNumeric, tol: float = 1e-8):
    """Recompute the defect direction and its diagnostics from a basis."""
    out_hat = np.fft.fft(basis.omega.density) / basis.grid_n
    in_hat = np.fft.fft(basis.omega.density_inner) / basis.grid_n
    q_out, q_in, singulars = _wperp_from_data(
        out_hat,
        in_hat,
        basis.omega.density,
        basis.omega.density_inner,
        basis.scales,
        basis.q,
        basis.trunc_n,
        basis.grid_n,
    )
    null_count = int(np.sum(singulars < tol * singulars[0]))
    return q_out, q_in, null_count, singulars


# ---------------------------------------------------------------------------
# Recovery


def default_fit_points(basis: HardyBasisNumeric, per_circle: int = 20) -> np.ndarray:
    q, z0 = basis.q, basis.z0
    r1 = min(max((q + z0) / 2.0, q + 0.05 * (1 - q)), 1.0 - 0.05 * (1 - q))
    r2 = min(max((1.0 + z0) / 2.0, q + 0.05 * (1 - q)), 1.0 - 0.02)
    return np.concatenate([r1 * circle_grid(per_circle), r2 * circle_grid(per_circle)])


def default_test_points(basis: HardyBasisNumeric, per_circle: int = 10) -> np.ndarray:
    q, z0 = basis.q, basis.z0
    r1 = min(max((q + z0) / 2.0, q + 0.05 * (1 - q)), 1.0 - 0.05 * (1 - q))
    r2 = min(max((1.0 + z0) / 2.0, q + 0.05 * (1 - q)), 1.0 - 0.02)
    rot = np.exp(1j * np.pi / per_circle)
    return np.concatenate(
        [r1 * rot * circle_grid(per_circle), r2 * rot * circle_grid(per_circle)]
    )


@dataclass(frozen=True)
class AnnulusRecovery:
    measure: BoundaryMeasure
    fit_residual: float
    test_residual: float
    equality_residual: float
    mass: float
    q_integral: float


def annulus_recover(
    f: FunctionSpec,
    basis: HardyBasisNumeric,
    fit_points=None,
    test_points=None,
    tol: float = 1e-8,
) -> AnnulusRecovery:
    """Fit a nonnegative boundary measure reproducing f through the kernel.

    Solves nonnegative least squares over the boundary-grid cell masses,
    with total mass one and orthogonality to the defect direction as
    equality constraints; the objective matches real and imaginary parts of
    the kernel integral to f on the interior fit points.
    """
    fit = np.asarray(
        default_fit_points(basis) if fit_points is None else fit_points, dtype=complex
    )
    test = np.asarray(
        default_test_points(basis) if test_points is None else test_points,
        dtype=complex,
    )
    fz0 = complex(eval_spec(f, complex(basis.z0, 0.0)))
    if abs(fz0 - 1.0) > 1e-6:
        raise ValidationError(
            f"recovery expects the normalization f(z0) = 1, got {fz0:.6f}"
        )
    all_pts = np.concatenate([fit, test])
    fvals = np.asarray(eval_spec(f, all_pts))
    worst = int(np.argmin(fvals.real))
    if float(fvals.real.min()) < -1e-10:
        raise NotHerglotzError(
            f"Re f = {fvals.real.min():.3e} at {all_pts[worst]:.6f}",
            witness=(complex(all_pts[worst]), float(fvals.real.min())),
        )
    rows_fit = basis.herglotz_rows(fit)
    a = np.vstack([rows_fit.real, rows_fit.imag])
    b = np.concatenate([fvals[: len(fit)].real, fvals[: len(fit)].imag])
    c_eq = np.vstack(
        [np.ones(2 * basis.grid_n), basis.q_samples()]
    )
    result = nnls_with_equalities(a, b, c_eq, np.array([1.0, 0.0]), tol=1e-10)
    masses = result.x
    g = basis.grid_n
    measure = BoundaryMeasure.annulus_density(
        basis.q, masses[:g] * g, masses[g:] * g
    )
    recon_fit = rows_fit @ masses
    recon_test = basis.herglotz_rows(test) @ masses
    fit_res = float(np.max(np.abs(recon_fit - fvals[: len(fit)])))
    test_res = float(np.max(np.abs(recon_test - fvals[len(fit) :])))
    return AnnulusRecovery(
        measure=measure,
        fit_residual=fit_res,
        test_residual=test_res,
        equality_residual=result.equality_residual,
        mass=float(masses.sum()),
        q_integral=float(basis.q_samples() @ masses),
    )


@dataclass(frozen=True)
class AnnulusVerifyReport:
    passed: bool
    mass_deviation: float
    min_weight: float
    q_integral: float
    max_residual: float
    min_re_interior: float
    tol: float


def annulus_verify(
    measure: BoundaryMeasure,
    f: FunctionSpec,
    basis: HardyBasisNumeric,
    test_points=None,
    tol: float = 1e-8,
    residual_tol: float = 1e-3,
) -> AnnulusVerifyReport:
    """Check the measure side conditions and the reconstruction residuals.

    Flags measures that are not determining (defect integral beyond
    ``tol``), reports reconstruction residuals on the test grid, and the
    minimum of Re of the reconstruction on a denser interior sweep.
    """
    if measure.boundary != "annulus":
        raise ValidationError("expected an annulus boundary measure")
    test = np.asarray(
        default_test_points(basis) if test_points is None else test_points,
        dtype=complex,
    )
    if measure.is_atomic:
        q_int = float(
            np.real(
                measure.integrate(
                    lambda pts: _q_at_points(basis, pts[:, 0])
                )
            )
        )
        min_weight = float(measure.atom_weights.min())
    else:
        g = measure.density.shape[0]
        if g != basis.grid_n:
            raise ValidationError("measure grid does not match the basis grid")
        masses = np.concatenate([measure.density, measure.density_inner]) / g
        q_int = float(basis.q_samples() @ masses)
        min_weight = float(min(measure.density.min(), measure.density_inner.min()))
    mass_dev = abs(measure.mass() - 1.0)
    fvals = np.asarray(eval_spec(f, test))
    recon = basis.reconstruct(measure, test)
    max_res = float(np.max(np.abs(recon - fvals)))
    radii = np.linspace(basis.q + 0.03 * (1 - basis.q), 1.0 - 0.03 * (1 - basis.q), 5)
    sweep = np.concatenate([r * circle_grid(64) for r in radii])
    min_re = float(np.min(basis.reconstruct(measure, sweep).real))
    passed = (
        mass_dev <= 1e-8
        and min_weight >= -1e-10
        and abs(q_int) <= tol
        and max_res <= residual_tol
    )
    return AnnulusVerifyReport(
        passed=passed,
        mass_deviation=mass_dev,
        min_weight=min_weight,
        q_integral=q_int,
        max_residual=max_res,
        min_re_interior=min_re,
        tol=tol,
    )


def _q_at_points(basis: HardyBasisNumeric, pts: np.ndarray) -> np.ndarray:
    """Defect-direction samples at arbitrary boundary points by interpolation."""
    pts = np.asarray(pts, dtype=complex)
    rad = np.abs(pts)
    on_outer = np.abs(rad - 1.0) <= 1e-9
    spec_out = np.fft.fft(basis.q_out) / basis.grid_n
    spec_in = np.fft.fft(basis.q_in) / basis.grid_n
    k = np.fft.fftfreq(basis.grid_n, d=1.0 / basis.grid_n)
    ang = np.angle(pts)
    phases = np.exp(1j * np.outer(ang, k))
    vals_out = phases @ spec_out
    vals_in = phases @ spec_in
    return np.real(np.where(on_outer, vals_out, vals_in))


# ---------------------------------------------------------------------------
# Binary persistence

_MAGIC = b"HRGANNB1"


def save_basis(basis: HardyBasisNumeric, path: str):
    """Write the basis to the documented little-endian binary container."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", basis.trunc_n, basis.grid_n))
        fh.write(struct.pack("<dd", basis.q, basis.z0))
        for arr, dtype in (
            (basis.omega.density, "<f8"),
            (basis.omega.density_inner, "<f8"),
            (basis.scales, "<f8"),
            (basis.gram, "<c16"),
            (basis.coeff, "<c16"),
            (basis.q_out, "<f8"),
            (basis.q_in, "<f8"),
            (basis.wperp_singular_values, "<f8"),
        ):
            fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def load_basis(path: str) -> HardyBasisNumeric:
    with open(path, "rb") as fh:
        data = fh.read()
    stream = io.BytesIO(data)
    if stream.read(8) != _MAGIC:
        raise ValidationError("not an annulus basis container")
    trunc_n, grid_n = struct.unpack("<II", stream.read(8))
    q, z0 = struct.unpack("<dd", stream.read(16))
    n_m = 2 * trunc_n + 1

    def take(count, dtype):
        arr = np.frombuffer(stream.read(count * np.dtype(dtype).itemsize), dtype=dtype)
        if arr.shape[0] != count:
            raise ValidationError("truncated basis container")
        return arr.copy()

    rho_out = take(grid_n, "<f8")
    rho_in = take(grid_n, "<f8")
    scales = take(n_m, "<f8")
    gram = take(n_m * n_m, "<c16").reshape(n_m, n_m)
    coeff = take(n_m * n_m, "<c16").reshape(n_m, n_m)
    q_out = take(grid_n, "<f8")
    q_in = take(grid_n, "<f8")
    singulars = take(2 * n_m, "<f8")
    omega = BoundaryMeasure.annulus_density(q, rho_out, rho_in)
    return HardyBasisNumeric(
        q=q,
        z0=z0,
        trunc_n=trunc_n,
        grid_n=grid_n,
        omega=omega,
        scales=scales,
        gram=gram,
        coeff=coeff,
        q_out=q_out,
        q_in=q_in,
        wperp_singular_values=singulars,
        info={"loaded": True},
    )
