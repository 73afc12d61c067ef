"""Shared numeric kernels.

Fast-transform Fourier analysis on uniform circle/torus grids, dense
Hermitian eigenvalue helpers, nonnegative least squares with linear
equality constraints, and a nonnegativity-preserving projection onto a
prescribed set of trigonometric moments.  Everything here is a pure
function of its inputs; returned arrays are fresh copies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import AliasingError, InfeasibleError, ValidationError

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10


# ---------------------------------------------------------------------------
# Fourier analysis on uniform grids


@dataclass(frozen=True)
class FourierTable:
    """Coefficients over the symmetric index box [-max_index, max_index]^d.

    ``coeffs[i1, ..., id]`` holds the coefficient at multi-index
    ``(i1 - max_index, ..., id - max_index)``; the coefficient at ``m`` is
    ``(1/grid size) * sum samples * exp(-i m . theta)`` over the uniform grid.
    """

    max_index: int
    coeffs: np.ndarray

    @property
    def ndim(self) -> int:
        return self.coeffs.ndim

    def get(self, index) -> complex:
        idx = np.atleast_1d(np.asarray(index, dtype=int))
        if idx.shape != (self.ndim,):
            raise ValidationError(f"index must have {self.ndim} components")
        if np.any(np.abs(idx) > self.max_index):
            raise ValidationError("index outside the stored box")
        return complex(self.coeffs[tuple(idx + self.max_index)])

    def indices(self) -> np.ndarray:
        """All multi-indices of the box, in C order matching ``coeffs.ravel()``."""
        rng = np.arange(-self.max_index, self.max_index + 1)
        grids = np.meshgrid(*([rng] * self.ndim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def synthesize(self, shape) -> np.ndarray:
        """Samples on the uniform grid of ``shape`` whose coefficients match."""
        shape = tuple(int(n) for n in np.atleast_1d(shape))
        if len(shape) != self.ndim:
            raise ValidationError("shape rank does not match table rank")
        if any(n < 2 * self.max_index + 1 for n in shape):
            raise AliasingError("grid too small to carry the stored indices")
        spec = np.zeros(shape, dtype=complex)
        rng = np.arange(-self.max_index, self.max_index + 1)
        sel = np.ix_(*[rng % n for n in shape])
        spec[sel] = self.coeffs
        return np.fft.ifftn(spec) * np.prod(shape)


def fourier_coefficients(samples, max_index: int) -> FourierTable:
    """Discrete Fourier coefficients of samples on a uniform circle/torus grid.

    The grid on each axis is theta_k = 2 pi k / N; the coefficient at m is
    exact for the sampled vector.  Requires N >= 2*max_index + 1 on every
    axis, otherwise the requested indices alias.
    """
    samples = np.asarray(samples)
    if max_index < 0:
        raise ValidationError("max_index must be nonnegative")
    for n in samples.shape:
        if n < 2 * max_index + 1:
            raise AliasingError(
                f"grid of {n} points cannot resolve indices up to {max_index}"
            )
    spec = np.fft.fftn(samples) / samples.size
    rng = np.arange(-max_index, max_index + 1)
    sel = np.ix_(*[rng % n for n in samples.shape])
    return FourierTable(max_index=max_index, coeffs=np.ascontiguousarray(spec[sel]))


# ---------------------------------------------------------------------------
# Hermitian linear algebra


def hermitian_deviation(a) -> float:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("expected a square matrix")
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0

def min_eig_hermitian(a, tol: float = HERMITIAN_TOL) -> float:
    """Smallest eigenvalue of a Hermitian matrix.

    Rejects matrices whose anti-Hermitian part exceeds ``tol`` relative to
    the entry scale.
    """
    a = np.asarray(a, dtype=complex)
    dev = hermitian_deviation(a)
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix entries must be finite")
    if dev > tol * scale:
        raise ValidationError(f"matrix is not Hermitian (deviation {dev:.3e})")
    return float(np.linalg.eigvalsh(a)[0])


def clip_psd(a, floor: float = 0.0) -> np.ndarray:
    """Project a Hermitian matrix onto the PSD cone by eigenvalue clipping."""
    a = np.asarray(a, dtype=complex)
    h = (a + a.conj().T) / 2.0
    w, v = np.linalg.eigh(h)
    w = np.maximum(w, floor)
    return (v * w) @ v.conj().T


# ---------------------------------------------------------------------------
# Nonnegative least squares with equality constraints


@dataclass(frozen=True)
class NNLSResult:
    x: np.ndarray
    residual: float
    equality_residual: float
    outer_iterations: int


def _plain_nnls(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # the backend counts inner loops against maxiter, so the cap is set
    # well above the support size it can actually visit
    n = a.shape[1]
    x, _ = scipy.optimize.nnls(a, b, maxiter=max(100 * n, 1000))
    return x


def nnls_with_equalities(a, b, c_eq=None, d_eq=None, tol: float = 1e-9) -> NNLSResult:
    """Minimize ||A x - b|| over x >= 0 subject to C x = d within ``tol``.

    The equality constraints are enforced by an augmented-Lagrangian loop
    around a deterministic active-set core, so no penalty weight ever has
    to be astronomically large.  Raises InfeasibleError when no nonnegative
    point satisfies the equalities to ``tol``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if a.shape[0] != b.shape[0]:
        raise ValidationError("A and b have inconsistent row counts")
    n = a.shape[1]

    if c_eq is None:
        x = _plain_nnls(a, b)
        res = float(np.linalg.norm(a @ x - b))
        return NNLSResult(x=x, residual=res, equality_residual=0.0, outer_iterations=1)

    c = np.atleast_2d(np.asarray(c_eq, dtype=float))
    d = np.asarray(d_eq, dtype=float).ravel()
    if c.shape[1] != n:
        raise ValidationError("C has wrong column count")
    if c.shape[0] != d.shape[0]:
        raise ValidationError("C and d have inconsistent row counts")

    # Feasibility probe: the equalities alone must admit a nonnegative point.
    x_feas = _plain_nnls(c, d)
    feas = float(np.linalg.norm(c @ x_feas - d))
    if feas > max(tol, 1e-12 * max(1.0, float(np.linalg.norm(d)))):
        raise InfeasibleError(
            f"equality system has no nonnegative solution (residual {feas:.3e})",
            residual=feas,
        )

    # Penalized active-set core inside a short multiplier loop, repeated for
    # a few penalty weights: a single weight is fragile (too small leaves
    # the core free to trade the equalities away, too large drowns the
    # objective rows in the stacked normal equations).  Each candidate is
    # polished by an exact KKT solve on its support; the best feasible
    # candidate wins.
    scale_a = max(1e-30, float(np.linalg.norm(a, ord="fro")))
    scale_c = max(1e-30, float(np.linalg.norm(c, ord="fro")))
    ratio = scale_a / scale_c
    best: tuple | None = None
    best_eq = np.inf
    outer_total = 0
    for w in (3.0 * ratio, 30.0 * ratio, 300.0 * ratio):
        shift = np.zeros(len(d))
        for _ in range(6):
            outer_total += 1
            stacked = np.vstack([a, w * c])
            rhs = np.concatenate([b, w * (d + shift)])
            x = _plain_nnls(stacked, rhs)
            x = _polish_on_support(a, b, c, d, x)
            r = c @ x - d
            eq_res = float(np.linalg.norm(r))
            best_eq = min(best_eq, eq_res)
            if eq_res <= tol:
                obj = float(np.linalg.norm(a @ x - b))
                if best is None or obj < best[0]:
                    best = (obj, x, eq_res)
                break
            shift -= r
    if best is None:
        raise InfeasibleError(
            f"equality residual stalled at {best_eq:.3e} (> {tol:.1e})",
            residual=best_eq,
        )
    return NNLSResult(
        x=best[1],
        residual=best[0],
        equality_residual=best[2],
        outer_iterations=outer_total,
    )


def _polish_on_support(a, b, c, d, x) -> np.ndarray:
    """Re-solve the equality-constrained least squares on the active support.

    The penalized active-set core can terminate a little early; the KKT
    system restricted to its support recovers the exact optimum there.  The
    polished point is kept only when it stays nonnegative and does not
    worsen either residual.
    """
    support = np.nonzero(x > 0)[0]
    if support.size == 0 or support.size > a.shape[0] + c.shape[0] + 8:
        return x
    a_s = a[:, support]
    c_s = c[:, support]
    p = c.shape[0]
    k = np.block([[a_s.T @ a_s, c_s.T], [c_s, np.zeros((p, p))]])
    rhs = np.concatenate([a_s.T @ b, d])
    try:
        sol = np.linalg.lstsq(k, rhs, rcond=None)[0]
    except np.linalg.LinAlgError:
        return x
    y = sol[: support.size]
    if float(y.min()) < -1e-12 * max(1.0, float(np.max(np.abs(y)))):
        return x
    x_new = np.zeros_like(x)
    x_new[support] = np.maximum(y, 0.0)
    better_obj = np.linalg.norm(a @ x_new - b) <= np.linalg.norm(a @ x - b) + 1e-14
    better_eq = np.linalg.norm(c @ x_new - d) <= max(
        float(np.linalg.norm(c @ x - d)), 1e-13
    )
    return x_new if (better_obj and better_eq) else x


# ---------------------------------------------------------------------------
# Nonnegative projection onto prescribed trigonometric moments
#
# Solves   min ||x - s||_2  s.t.  x >= 0,  R x = t
# where R collects real/imaginary parts of grid moment functionals.  The
# dual problem is smooth enough for a semismooth Newton iteration:
#   x(lam) = max(0, s + R^T lam),   g(lam) = R x(lam) - t = 0.


class MomentRows:
    """Realified moment functionals of a nonnegative grid density."""

    n_rows: int
    n_cols: int

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, lam: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gram(self, mask: np.ndarray) -> np.ndarray:
        """R diag(mask) R^T for a boolean mask over grid points."""
        raise NotImplementedError


class DenseMomentRows(MomentRows):
    def __init__(self, rows: np.ndarray):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        self.rows = rows
        self.n_rows, self.n_cols = rows.shape

    def apply(self, x):
        return self.rows @ x

    def adjoint(self, lam):
        return self.rows.T @ lam

    def gram(self, mask):
        masked = self.rows * mask[np.newaxis, :]
        return masked @ self.rows.T


def complex_rows_to_dense(rows_c: np.ndarray, targets_c: np.ndarray):
    """Split complex moment rows into real/imaginary DenseMomentRows.

    Rows whose imaginary part is identically ~0 contribute a single real row.
    """
    rows_c = np.atleast_2d(np.asarray(rows_c, dtype=complex))
    targets_c = np.asarray(targets_c, dtype=complex).ravel()
    out_rows: list[np.ndarray] = []
    out_t: list[float] = []
    for row, t in zip(rows_c, targets_c):
        out_rows.append(row.real)
        out_t.append(t.real)
        if np.max(np.abs(row.imag)) > 1e-15:
            out_rows.append(row.imag)
            out_t.append(t.imag)
    return DenseMomentRows(np.array(out_rows)), np.array(out_t)


class TorusMomentRows(MomentRows):
    """FFT-backed moment rows (1/N^d) sum x_k e^{-i n.theta_k} over an index list.

    ``orders`` is a sequence of multi-indices; each nonzero order yields a
    real and an imaginary row, the zero order a single real (mass) row.
    The one-dimensional circle is the d=1 case.
    """

    def __init__(self, shape, orders):
        self.shape = tuple(int(n) for n in np.atleast_1d(shape))
        self.d = len(self.shape)
        orders = [tuple(int(v) for v in np.atleast_1d(o)) for o in orders]
        for o in orders:
            if len(o) != self.d:
                raise ValidationError("moment order rank mismatch")
            for oi, n in zip(o, self.shape):
                if abs(oi) > n // 2:
                    raise AliasingError("moment order beyond the grid Nyquist index")
        self.orders = orders
        self.size = int(np.prod(self.shape))
        self.n_cols = self.size
        # row layout: for each order, a real row then (if order != 0) an imag row
        self._layout: list[tuple[int, bool]] = []
        for j, o in enumerate(orders):
            self._layout.append((j, False))
            if any(o):
                self._layout.append((j, True))
        self.n_rows = len(self._layout)

    def _coeffs(self, x: np.ndarray) -> np.ndarray:
        spec = np.fft.fftn(x.reshape(self.shape)) / self.size
        vals = np.empty(len(self.orders), dtype=complex)
        for j, o in enumerate(self.orders):
            vals[j] = spec[tuple(oi % n for oi, n in zip(o, self.shape))]
        return vals

    def pack(self, values_c: np.ndarray) -> np.ndarray:
        """Realify complex per-order values following the row layout."""
        out = np.empty(self.n_rows)
        for i, (j, is_imag) in enumerate(self._layout):
            out[i] = values_c[j].imag if is_imag else values_c[j].real
        return out

    def apply(self, x):
        return self.pack(self._coeffs(x))

    def adjoint(self, lam):
        spec = np.zeros(self.shape, dtype=complex)
        for i, (j, is_imag) in enumerate(self._layout):
            o = self.orders[j]
            sel = tuple(oi % n for oi, n in zip(o, self.shape))
            spec[sel] += (1j * lam[i]) if is_imag else lam[i]
        # row for Re c_n is cos(n.theta)/size, for Im c_n is -sin(n.theta)/size;
        # their lam-combination is Re((lam_re + i lam_im) e^{i n theta})/size.
        return np.fft.ifftn(spec).real.ravel()

    def gram(self, mask):
        m = np.fft.fftn(mask.reshape(self.shape).astype(float))
        size2 = float(self.size) ** 2
        orders_arr = np.array([self.orders[j] for j, _ in self._layout])
        imag_arr = np.array([im for _, im in self._layout])
        diff = orders_arr[:, None, :] - orders_arr[None, :, :]
        summ = orders_arr[:, None, :] + orders_arr[None, :, :]

        def mval(idx):
            flat = np.ravel_multi_index(
                tuple(idx[..., k] % n for k, n in enumerate(self.shape)), self.shape
            )
            return m.ravel()[flat]

        md, ms = mval(diff), mval(summ)
        ii = imag_arr[:, None]
        kk = imag_arr[None, :]
        # products of cos/(-sin) rows reduce to mask Fourier coefficients
        g = np.where(
            ~ii & ~kk,
            md.real + ms.real,
            np.where(
                ii & kk,
                md.real - ms.real,
                np.where(~ii & kk, ms.imag - md.imag, ms.imag + md.imag),
            ),
        )
        return 0.5 * g / size2


@dataclass(frozen=True)
class ProjectionInfo:
    iterations: int
    equality_residual: float
    converged: bool


def project_nonneg_with_moments(
    s,
    rows: MomentRows,
    targets,
    tol: float = 1e-12,
    soft_tol: float | None = None,
    max_iter: int = 120,
) -> tuple[np.ndarray, ProjectionInfo]:
    """Closest nonnegative grid density to ``s`` with prescribed moments.

    Semismooth Newton iteration on the dual of
    ``min ||x - s||  s.t.  x >= 0, rows(x) = targets``.
    When the iteration stalls above ``tol`` but at or below ``soft_tol``
    (near-degenerate active sets), the best iterate is returned with
    ``converged=False``; otherwise InfeasibleError is raised (no nonnegative
    density carries those moments at the requested accuracy).
    """
    s = np.asarray(s, dtype=float).ravel()
    targets = np.asarray(targets, dtype=float).ravel()
    if targets.shape[0] != rows.n_rows:
        raise ValidationError("target count does not match moment rows")
    lam = np.zeros(rows.n_rows)
    ridge0 = 1e-14

    def state(lam):
        z = s + rows.adjoint(lam)
        x = np.maximum(0.0, z)
        g = rows.apply(x) - targets
        return z, x, g

    z, x, g = state(lam)
    best = (float(np.linalg.norm(g, np.inf)), x)
    ridge = ridge0
    stagnant = 0
    it = 0
    for it in range(1, max_iter + 1):
        if best[0] <= tol:
            break
        mask = z > 0.0
        j = rows.gram(mask)
        j[np.diag_indices_from(j)] += ridge + 1e-16 * abs(np.trace(j))
        try:
            step = np.linalg.solve(j, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(j, -g, rcond=None)[0]
        g2 = np.linalg.norm(g)
        t = 1.0
        moved = False
        while t > 1e-14:
            z_t, x_t, g_t = state(lam + t * step)
            if np.linalg.norm(g_t) <= (1.0 - 1e-4 * t) * g2:
                lam = lam + t * step
                z, x, g = z_t, x_t, g_t
                ridge = ridge0
                moved = True
                break
            t *= 0.5
        if not moved:
            ridge = max(ridge * 100.0, 1e-10)
            if ridge > 1.0:
                break
        gn = float(np.linalg.norm(g, np.inf))
        if gn < 0.7 * best[0]:
            stagnant = 0
        else:
            stagnant += 1
        if gn < best[0]:
            best = (gn, x)
        if stagnant >= 10:
            break
    gn, x = best
    if gn <= tol:
        return x, ProjectionInfo(it, gn, True)
    if soft_tol is not None and gn <= soft_tol:
        return x, ProjectionInfo(it, gn, False)
    raise InfeasibleError(
        f"moment projection stalled at residual {gn:.3e} (> {tol:.1e})",
        residual=gn,
    )
