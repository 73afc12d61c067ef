"""Koranyi-Pukanszky representation: polydisc, symmetrized bidisc, Reinhardt.

Recovery samples Re f on a dilated torus, measures anti-aliased moments,
and projects onto the closest nonnegative grid density with matched
moments.  Mixed-sign torus moments are matched to zero (the determining
conditions); one-sided moments are rescaled by r^{-|n|} toward the boundary
limit, with a short Gaussian mollification keeping the limit measure
representable on the grid.  The symmetrized bidisc works through its torus
pullback with the |z1 - z2|^2 / 2 weight folded into the density.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotHerglotzError, ValidationError
from .functions import Compose, Const, Coord, FunctionSpec, Prod, eval_spec
from .kernels import DomainSpec
from .measures import BoundaryMeasure, circle_grid, sym_basis_value, symmetrize, torus_grid
from .numerics import (
    InfeasibleError,
    TorusMomentRows,
    complex_rows_to_dense,
    project_nonneg_with_moments,
)

_FINE_AXIS_CAP = {1: 1 << 22, 2: 1 << 11, 3: 1 << 8}


@dataclass(frozen=True)
class KPRep:
    """Domain plus a determining probability measure with f(z0) = 1."""

    domain: DomainSpec
    measure: BoundaryMeasure
    info: dict = field(default_factory=dict, compare=False)


def _herglotz_kernel_values(domain: DomainSpec, z, pts: np.ndarray) -> np.ndarray:
    """2 S(z, zeta) - 1 vectorized over boundary support points."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if domain.tag == "polydisc" or (
        domain.tag == "reinhardt" and domain.nu_source == "polydisc_haar"
    ):
        s = np.prod(1.0 / (1.0 - z[np.newaxis, :] * np.conj(pts)), axis=-1)
        return 2.0 * s - 1.0
    if domain.tag == "disc":
        s = 1.0 / (1.0 - z[0] * np.conj(pts[:, 0]))
        return 2.0 * s - 1.0
    if domain.tag == "sym_bidisc":
        s, p = z
        t = np.conj(pts[:, 0])
        q = np.conj(pts[:, 1])
        denom = (1.0 - p * q) ** 2 - (s - p * t) * (t - s * q)
        return 2.0 / denom - 1.0
    raise ValidationError(f"no closed-form kernel for domain tag {domain.tag!r}")


def kp_eval(rep: KPRep, z):
    """Integral of the Herglotz kernel of the domain against the measure."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.shape != (rep.domain.d,):
        raise ValidationError(f"point must have {rep.domain.d} coordinates")
    return complex(
        rep.measure.integrate(lambda pts: _herglotz_kernel_values(rep.domain, z, pts))
    )


def _fine_axis(grid_n: int, r: float, d: int) -> int:
    need = int(np.ceil(30.5 / np.log(1.0 / r)))
    n = grid_n
    cap = _FINE_AXIS_CAP[d]
    while n < need:
        n *= 2
        if n > cap:
            raise ValidationError(
                f"radius {r} too close to 1 for anti-aliased sampling in "
                f"dimension {d} (needs {need} points per axis)"
            )
    return n


def _require_pow2(grid_n: int):
    if grid_n < 32 or (grid_n & (grid_n - 1)) != 0:
        raise ValidationError("grid size must be a power of two, at least 32")


def _canonical_box(d: int, degree: int):
    """One representative per conjugate pair of multi-indices in the box."""
    rng = np.arange(-degree, degree + 1)
    grids = np.meshgrid(*([rng] * d), indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=-1)
    out = []
    for row in idx:
        row = tuple(int(v) for v in row)
        lead = next((v for v in row if v != 0), 0)
        if lead < 0:
            continue
        out.append(row)
    out.sort(key=lambda t: (sum(abs(v) for v in t), t))
    return out


def _is_mixed(idx) -> bool:
    return any(v > 0 for v in idx) and any(v < 0 for v in idx)


def kp_recover(
    f: FunctionSpec,
    d: int = 2,
    grid_n: int = 256,
    r: float = 0.95,
    match_degree: int = 8,
    undilate: bool = True,
    mollify: float | None = None,
) -> KPRep:
    """Recover a determining boundary measure for a Herglotz f on the polydisc.

    Raises NotHerglotzError with a witness point when Re f drops below
    -1e-10 on the sampling torus.
    """
    if d < 1 or d > 3:
        raise ValidationError("dimension limited to 1..3")
    _require_pow2(grid_n)
    if not (0.0 < r < 1.0):
        raise ValidationError("radius must satisfy 0 < r < 1")
    n_fine = _fine_axis(grid_n, r, d)
    origin = np.zeros((1, d), dtype=complex)
    f0 = complex(np.asarray(eval_spec(f, origin)).ravel()[0])
    re0 = f0.real
    pts_fine = r * torus_grid(d, n_fine)
    vals = np.real(np.asarray(eval_spec(f, pts_fine)))
    lowest = float(vals.min())
    if lowest < -1e-10:
        where = np.unravel_index(int(np.argmin(vals)), vals.shape)
        witness = (tuple(pts_fine[where]), lowest)
        raise NotHerglotzError(
            f"not a Herglotz function at radius {r}: Re f = {lowest:.3e} "
            f"at {witness[0]}",
            witness=witness,
        )
    vals = np.maximum(vals, 0.0)
    spec_hat = np.fft.fftn(vals) / vals.size

    k_box = min(match_degree, grid_n // 4)
    sigma = 0.0
    if undilate:
        sigma = mollify if mollify is not None else 1.1 * (2.0 * np.pi / grid_n)
        freqs = np.meshgrid(
            *([np.fft.fftfreq(n_fine, d=1.0 / n_fine)] * d), indexing="ij"
        )
        norm1 = sum(np.abs(g) for g in freqs)
        norm2sq = sum(g * g for g in freqs)
        factor = np.exp(norm1 * np.log(1.0 / r) - 0.5 * norm2sq * sigma**2)
        full = spec_hat * factor
        if d >= 2:
            any_pos = np.logical_or.reduce([g > 0 for g in freqs])
            any_neg = np.logical_or.reduce([g < 0 for g in freqs])
            full[any_pos & any_neg] = 0.0
        prior_fine = np.maximum(np.fft.ifftn(full * vals.size).real, 0.0)
    else:
        full = spec_hat
        prior_fine = vals

    stride = n_fine // grid_n
    s = prior_fine[(slice(None, None, stride),) * d].copy().ravel()

    def target_of(idx):
        if _is_mixed(idx):
            return 0.0 + 0.0j
        return complex(full[tuple(v % n_fine for v in idx)])

    soft = 3e-9 * max(1.0, abs(re0))
    k_try = k_box
    while True:
        orders = _canonical_box(d, k_try)
        rows = TorusMomentRows((grid_n,) * d, orders)
        gamma = np.array([target_of(o) for o in orders])
        gamma[0] = re0
        try:
            x, proj = project_nonneg_with_moments(
                s, rows, rows.pack(gamma),
                tol=1e-12 * max(1.0, abs(re0)), soft_tol=soft,
            )
            break
        except InfeasibleError:
            if k_try == 0:
                raise
            k_try = 0 if k_try == 1 else k_try // 2
    mean = float(x.mean())
    if mean > 0 and re0 > 0:
        x = x * (re0 / mean)
    info = {
        "r": r,
        "grid": grid_n,
        "matched_degree": k_try,
        "equality_residual": proj.equality_residual,
        "converged": proj.converged,
        "undilated": undilate,
        "mollify_sigma": sigma,
        "re_f0": re0,
        "im_f0": f0.imag,
    }
    measure = BoundaryMeasure.torus_density(x.reshape((grid_n,) * d))
    return KPRep(DomainSpec.polydisc(d), measure, info)


# ---------------------------------------------------------------------------
# Symmetrized bidisc


def sym_bidisc_dilate(f: FunctionSpec, r: float) -> FunctionSpec:
    """(s, p) -> f(r s, r^2 p); the grading matches the symmetrization map."""
    if not (0.0 < r <= 1.0):
        raise ValidationError("dilation parameter must lie in (0, 1]")
    if r == 1.0:
        return f
    return Compose(
        f,
        (
            Prod((Const(r), Coord(0))),
            Prod((Const(r * r), Coord(1))),
        ),
    )


def sym_bidisc_reproduce(fpoly: FunctionSpec, w, grid_n: int = 256) -> complex:
    """Reproduce f(w) as the boundary inner product with the kernel section.

    Quadrature over the torus pullback with the |z1 - z2|^2 / 2 weight.
    Requires the evaluation point to keep a 0.05 margin from the boundary.
    """
    dom = DomainSpec.sym_bidisc()
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if not dom.contains(w, margin=0.05):
        raise ValidationError(
            "evaluation point too close to the boundary (margin 0.05)"
        )
    g = torus_grid(2, grid_n)
    s, p = symmetrize(g[..., 0], g[..., 1])
    jac2 = np.abs(g[..., 0] - g[..., 1]) ** 2
    fv = np.asarray(eval_spec(fpoly, np.stack([s, p], axis=-1)))
    t, q = np.conj(w[0]), np.conj(w[1])
    kernel = 1.0 / ((1.0 - p * q) ** 2 - (s - p * t) * (t - s * q))
    return complex(np.mean(fv * np.conj(kernel) * 0.5 * jac2))


def _sym_orders(degree_cap: int):
    """Pairs (j, k) with j >= 0, k >= 1 and pullback degree 2j + k - 1 <= cap."""
    out = []
    for j in range(0, degree_cap // 2 + 1):
        for k in range(1, degree_cap + 2 - 2 * j):
            out.append((j, k))
    out.sort(key=lambda t: (2 * t[0] + t[1] - 1, t))
    return out


def kp_recover_sym(
    f: FunctionSpec,
    grid_n: int = 256,
    r: float = 0.95,
    degree_cap: int = 8,
    undilate: bool = True,
    mollify: float | None = None,
) -> KPRep:
    """Recover a determining measure on the symmetrized-bidisc boundary.

    The stored density lives on the torus pullback with the surface weight
    folded in; matched functionals are the boundary basis p^j e_k up to the
    degree cap, rescaled toward the boundary limit by the grading
    r^{2j + k - 1} when ``undilate``.
    """
    _require_pow2(grid_n)
    if not (0.0 < r < 1.0):
        raise ValidationError("radius must satisfy 0 < r < 1")
    n_fine = _fine_axis(grid_n, r, 2)
    f0 = complex(np.asarray(eval_spec(f, np.zeros((1, 2), dtype=complex))).ravel()[0])
    if abs(f0 - 1.0) > 1e-8:
        raise ValidationError("recovery expects the normalization f(0, 0) = 1")
    g = torus_grid(2, n_fine)
    s_f, p_f = symmetrize(r * g[..., 0], r * g[..., 1])
    uv = np.asarray(eval_spec(f, np.stack([s_f, p_f], axis=-1)))
    lowest = float(np.real(uv).min())
    if lowest < -1e-10:
        where = np.unravel_index(int(np.argmin(np.real(uv))), uv.shape)
        witness = ((complex(s_f[where]), complex(p_f[where])), lowest)
        raise NotHerglotzError(
            f"not a Herglotz function at grading radius {r}: Re f = {lowest:.3e} "
            f"at {witness[0]}",
            witness=witness,
        )
    jac2 = np.abs(g[..., 0] - g[..., 1]) ** 2
    sigma = 0.0
    if undilate:
        # rescale the holomorphic part toward the boundary mode by mode,
        # mollifying so the limit stays representable on the grid
        sigma = mollify if mollify is not None else 1.1 * (2.0 * np.pi / grid_n)
        u_hat = np.fft.fftn(uv) / uv.size
        freqs = np.meshgrid(
            *([np.fft.fftfreq(n_fine, d=1.0 / n_fine)] * 2), indexing="ij"
        )
        onesided = (freqs[0] >= 0) & (freqs[1] >= 0)
        norm1 = freqs[0] + freqs[1]
        norm2sq = freqs[0] ** 2 + freqs[1] ** 2
        factor = np.where(
            onesided, np.exp(norm1 * np.log(1.0 / r) - 0.5 * norm2sq * sigma**2), 0.0
        )
        uv = np.fft.ifftn(u_hat * factor * uv.size)
    raw_density = np.real(uv) * 0.5 * jac2
    density_fine = np.maximum(np.real(uv), 0.0) * 0.5 * jac2

    orders = _sym_orders(degree_cap)
    s_b, p_b = symmetrize(g[..., 0], g[..., 1])
    targets = []
    for (j, k) in orders:
        basis = sym_basis_value(j, k, s_b, p_b)
        targets.append(complex(np.mean(raw_density * basis)))
    targets[0] = 1.0

    stride = n_fine // grid_n
    gc = torus_grid(2, grid_n)
    s_c, p_c = symmetrize(gc[..., 0], gc[..., 1])
    rows_c = np.array(
        [
            (sym_basis_value(j, k, s_c, p_c) / gc.shape[0] ** 2).ravel()
            for (j, k) in orders
        ]
    )
    rows, packed = complex_rows_to_dense(rows_c, np.array(targets))
    prior = density_fine[::stride, ::stride].copy().ravel()
    x, proj = project_nonneg_with_moments(
        prior, rows, packed, tol=1e-12, soft_tol=3e-9
    )
    xg = x.reshape(grid_n, grid_n)
    xg = 0.5 * (xg + xg.T)  # coordinate-swap symmetry of the pullback
    mean = float(xg.mean())
    if mean > 0:
        xg = xg / mean
    info = {
        "r": r,
        "grid": grid_n,
        "degree_cap": degree_cap,
        "equality_residual": proj.equality_residual,
        "converged": proj.converged,
        "undilated": undilate,
        "mollify_sigma": sigma,
    }
    return KPRep(DomainSpec.sym_bidisc(), BoundaryMeasure.sym_density(xg), info)
