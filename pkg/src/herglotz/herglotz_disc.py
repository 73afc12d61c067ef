"""Integral representation on the disc and boundary-measure recovery.

A representation is a nonnegative circle measure plus the imaginary part at
the origin.  Evaluation sums the kernel (alpha + z)/(alpha - z); the
realization route goes through the diagonal unitary of multiplication by
the boundary coordinate on the weighted atom space, and must agree with the
integral to machine precision.

Recovery samples the real part on a circle of radius r, then projects the
sampled density onto the closest nonnegative grid density whose low-order
Fourier moments match anti-aliased targets.  The default keeps the sampled
(dilated) moments; ``undilate=True`` rescales each matched moment by
r^{-n} with a short Gaussian mollification so the limit measure stays
representable on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotHerglotzError, ValidationError
from .functions import FunctionSpec, HerglotzFromMeasure, eval_spec, taylor_coefficients
from .measures import BoundaryMeasure, circle_grid, grid_angles
from .numerics import (
    InfeasibleError,
    TorusMomentRows,
    min_eig_hermitian,
    project_nonneg_with_moments,
)


@dataclass(frozen=True)
class HerglotzDiscRep:
    """Pair (measure on the circle, Im f(0))."""

    measure: BoundaryMeasure
    imag: float = 0.0
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.measure.boundary != "circle":
            raise ValidationError("disc representations use circle measures")

    def as_function_spec(self) -> HerglotzFromMeasure:
        return HerglotzFromMeasure(self.measure, self.imag)


def eval_rep(rep: HerglotzDiscRep, z):
    """i Im f(0) + integral of (alpha + z)/(alpha - z) over the measure."""
    return eval_spec(rep.as_function_spec(), z)


def eval_realization(rep: HerglotzDiscRep, z):
    """Resolvent form through the multiplication unitary on the atom space.

    With U = diag(atoms) acting on the weighted coordinate space and 1 the
    constant vector, the value is i Im f(0) + <(U+z)(U-z)^{-1} 1, 1> Re f(0)
    under the mass-normalized weights.
    """
    if not rep.measure.is_atomic:
        raise ValidationError("the realization form needs an atomic measure")
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    alpha = rep.measure.atom_points[:, 0]
    w = rep.measure.atom_weights
    mass = float(np.sum(w))
    if mass == 0.0:
        out = np.full(z_arr.shape, 1j * rep.imag)
        return complex(out[0]) if np.ndim(z) == 0 else out
    wn = w / mass
    k = alpha.shape[0]
    u = np.diag(alpha)
    eye = np.eye(k, dtype=complex)
    ones = np.ones(k, dtype=complex)
    out = np.empty(z_arr.shape, dtype=complex)
    for i, zv in enumerate(z_arr.ravel()):
        y = np.linalg.solve(u - zv * eye, ones)
        resolvent = (u + zv * eye) @ y
        out.ravel()[i] = 1j * rep.imag + mass * np.sum(wn * resolvent * np.conj(ones))
    return complex(out[0]) if np.ndim(z) == 0 else out


def _anti_alias_grid(grid_n: int, r: float, cap: int = 1 << 22) -> int:
    """Smallest power-of-two grid keeping circle-sampling aliasing < 1e-13."""
    need = int(np.ceil(30.5 / np.log(1.0 / r)))
    n = grid_n
    while n < need:
        n *= 2
        if n > cap:
            raise ValidationError(
                f"radius {r} too close to 1 for anti-aliased sampling (needs {need} points)"
            )
    return n


def _require_pow2(grid_n: int):
    if grid_n < 32 or (grid_n & (grid_n - 1)) != 0:
        raise ValidationError("grid size must be a power of two, at least 32")


def recover_measure(
    f: FunctionSpec,
    grid_n: int = 512,
    r: float = 0.99,
    match_order: int = 16,
    undilate: bool = False,
    mollify: float | None = None,
    tol: float = 1e-12,
) -> HerglotzDiscRep:
    """Recover the boundary measure of a Herglotz function from one circle.

    The density values are the sampled Re f(r e^{i theta}) (mollified and
    rescaled per mode when ``undilate``), minimally corrected so that mass
    equals Re f(0) exactly and the Fourier moments up to ``match_order``
    equal their anti-aliased targets.  Raises NotHerglotzError when the real
    part dips below -1e-10 on the sample circle.
    """
    _require_pow2(grid_n)
    if not (0.0 < r < 1.0):
        raise ValidationError("radius must satisfy 0 < r < 1")
    k_max = min(match_order, grid_n // 4)
    n_fine = _anti_alias_grid(grid_n, r)
    f0 = complex(eval_spec(f, 0.0))
    re0, imag0 = f0.real, f0.imag
    samples = np.real(np.asarray(eval_spec(f, r * circle_grid(n_fine))))
    lowest = float(samples.min())
    if lowest < -1e-10:
        k_bad = int(np.argmin(samples))
        witness = (r * np.exp(1j * grid_angles(n_fine)[k_bad]), lowest)
        raise NotHerglotzError(
            f"not a Herglotz function on the circle of radius {r}: "
            f"Re f = {lowest:.3e} at {witness[0]:.6f}",
            witness=witness,
        )
    samples = np.maximum(samples, 0.0)
    spec_hat = np.fft.fft(samples) / n_fine

    sigma = 0.0
    if undilate:
        sigma = mollify if mollify is not None else 2.0 * (2.0 * np.pi / grid_n)
        ns = np.abs(np.fft.fftfreq(n_fine, d=1.0 / n_fine))
        factor = np.exp(ns * np.log(1.0 / r) - 0.5 * (ns * sigma) ** 2)
        prior_fine = np.fft.ifft(spec_hat * factor * n_fine).real
        prior_fine = np.maximum(prior_fine, 0.0)
        gamma = spec_hat[: k_max + 1] * factor[: k_max + 1]
    else:
        prior_fine = samples
        gamma = spec_hat[: k_max + 1].copy()
    gamma = np.asarray(gamma, dtype=complex)
    gamma[0] = re0

    s = prior_fine[:: n_fine // grid_n].copy()
    soft = None if not undilate else 3e-9 * max(1.0, abs(re0))
    x = None
    info: dict = {}
    k_try = k_max
    while True:
        orders = [(n,) for n in range(k_try + 1)]
        rows = TorusMomentRows((grid_n,), orders)
        targets = rows.pack(gamma[: k_try + 1])
        try:
            x, proj = project_nonneg_with_moments(
                s, rows, targets, tol=tol * max(1.0, abs(re0)), soft_tol=soft
            )
            info = {
                "matched_order": k_try,
                "equality_residual": proj.equality_residual,
                "converged": proj.converged,
            }
            break
        except InfeasibleError:
            if k_try == 0:
                raise
            k_try = 0 if k_try == 1 else k_try // 2
    mean = float(x.mean())
    if mean > 0 and re0 > 0:
        x = x * (re0 / mean)
    info.update({"r": r, "grid": grid_n, "undilated": undilate, "mollify_sigma": sigma})
    measure = BoundaryMeasure.circle_density(x)
    return HerglotzDiscRep(measure=measure, imag=imag0, info=info)


def window_mass(measure: BoundaryMeasure, center_angle: float, half_width: float) -> float:
    """Mass of a circle measure within an angular window around a center."""
    if measure.boundary != "circle":
        raise ValidationError("window masses are defined for circle measures")
    if measure.is_atomic:
        ang = np.angle(measure.atom_points[:, 0])
        dist = np.abs((ang - center_angle + np.pi) % (2 * np.pi) - np.pi)
        return float(np.sum(measure.atom_weights[dist <= half_width]))
    n = measure.density.shape[0]
    ang = grid_angles(n)
    dist = np.abs((ang - center_angle + np.pi) % (2 * np.pi) - np.pi)
    return float(np.sum(measure.density[dist <= half_width]) / n)


def extract_atoms(
    measure: BoundaryMeasure, window: float = 0.1, threshold: float = 0.01
) -> BoundaryMeasure:
    """Cluster a circle density into atoms at mass-weighted peak centroids.

    Windows of the given angular width are carved around successive global
    peaks until the remaining windows hold less than ``threshold`` of the
    total mass.
    """
    if measure.is_atomic:
        return measure
    values = measure.density.copy()
    n = values.shape[0]
    total = float(values.sum() / n)
    ang = grid_angles(n)
    pts, ws = [], []
    if total <= 0:
        raise ValidationError("cannot extract atoms from a zero measure")
    half = window / 2.0
    while True:
        k = int(np.argmax(values))
        dist = np.abs((ang - ang[k] + np.pi) % (2 * np.pi) - np.pi)
        sel = dist <= half
        mass = float(values[sel].sum() / n)
        if mass < threshold * total:
            break
        direction = np.sum(values[sel] * np.exp(1j * ang[sel]))
        pts.append(direction / abs(direction))
        ws.append(mass)
        values[sel] = 0.0
    return BoundaryMeasure.circle_atoms(pts, ws)


def toeplitz_psd_test(f: FunctionSpec, order: int) -> float:
    """Smallest eigenvalue of the coefficient Toeplitz matrix of f.

    Builds the (order+1) x (order+1) Hermitian Toeplitz matrix with
    diagonal Re a_0 and upper bands a_n / 2 from the Taylor coefficients;
    nonnegative real part on the disc forces it positive semidefinite.
    """
    coeffs = taylor_coefficients(f, order)
    m = np.empty(order + 1, dtype=complex)
    m[0] = np.real(coeffs[0])
    m[1:] = coeffs[1:] / 2.0
    idx = np.subtract.outer(np.arange(order + 1), np.arange(order + 1))
    toep = np.where(idx >= 0, m[np.abs(idx)], np.conj(m[np.abs(idx)]))
    return min_eig_hermitian(toep, tol=1e-10)
