"""Symbolic function specifications, pointwise evaluation, Cayley transforms.

A FunctionSpec is a small expression tree.  Univariate kinds (Blaschke
products, rational functions, Taylor polynomials, Herglotz integrals of a
circle measure) act on a scalar argument, which defaults to the first
coordinate; const/coord/sum/prod/compose combine them into multivariable
test functions.  Matrix specs hold a square grid of scalar specs.

Evaluation is vectorized: ``z`` may be a scalar, an array of scalars, or an
array of points with the coordinate axis last.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import CayleySingularError, PoleError, ValidationError
from .measures import BoundaryMeasure, circle_grid

UNIMODULAR_TOL = 1e-12


class FunctionSpec:
    """Base class; concrete kinds implement ``_eval`` on coordinate arrays."""

    kind = "abstract"

    def _eval(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


def _as_pairs(values) -> list:
    return [[float(np.real(v)), float(np.imag(v))] for v in np.atleast_1d(values)]


def _from_pairs(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    return arr[:, 0] + 1j * arr[:, 1]


def _coordinate(z: np.ndarray, index: int) -> np.ndarray:
    """Select coordinate ``index`` from the argument.

    Scalars and 1-D arrays are treated as (arrays of) single-variable
    points; multivariable points carry their coordinates on the last axis,
    so a lone d-variable point is passed with shape (1, d).
    """
    z = np.asarray(z, dtype=complex)
    if z.ndim <= 1:
        if index != 0:
            raise ValidationError(
                "multivariable points need a trailing coordinate axis"
            )
        return z
    return z[..., index]


def _apply_arg(spec_arg, z: np.ndarray) -> np.ndarray:
    if spec_arg is None:
        return _coordinate(z, 0)
    return spec_arg._eval(z)


@dataclass(frozen=True)
class Const(FunctionSpec):
    value: complex

    kind = "const"

    def _eval(self, z):
        z = np.asarray(z, dtype=complex)
        shape = z.shape if z.ndim <= 1 else z.shape[:-1]
        return np.full(shape, complex(self.value))

    def to_json(self):
        return {"kind": "const", "c": _as_pairs(self.value)[0]}


@dataclass(frozen=True)
class Coord(FunctionSpec):
    index: int = 0

    kind = "coord"

    def _eval(self, z):
        return _coordinate(z, self.index)

    def to_json(self):
        return {"kind": "coord", "j": self.index}


@dataclass(frozen=True)
class Sum(FunctionSpec):
    terms: tuple

    kind = "sum"

    def _eval(self, z):
        acc = self.terms[0]._eval(z)
        for t in self.terms[1:]:
            acc = acc + t._eval(z)
        return acc

    def to_json(self):
        return {"kind": "sum", "terms": [t.to_json() for t in self.terms]}


@dataclass(frozen=True)
class Prod(FunctionSpec):
    terms: tuple

    kind = "prod"

    def _eval(self, z):
        acc = self.terms[0]._eval(z)
        for t in self.terms[1:]:
            acc = acc * t._eval(z)
        return acc

    def to_json(self):
        return {"kind": "prod", "terms": [t.to_json() for t in self.terms]}


@dataclass(frozen=True)
class Compose(FunctionSpec):
    """f evaluated at coordinates given by argument specs of z."""

    f: FunctionSpec
    args: tuple

    kind = "compose"

    def _eval(self, z):
        coords = [a._eval(z) for a in self.args]
        stacked = np.stack(np.broadcast_arrays(*coords), axis=-1)
        if len(coords) == 1:
            stacked = stacked[..., 0]
        return self.f._eval(stacked)

    def to_json(self):
        return {
            "kind": "compose",
            "f": self.f.to_json(),
            "args": [a.to_json() for a in self.args],
        }


@dataclass(frozen=True)
class Blaschke(FunctionSpec):
    """c * prod of disc-automorphism factors with zeros inside the disc.

    The factor for a nonzero root a is (|a|/a)(a - z)/(1 - conj(a) z); a
    root at the origin contributes the factor z, so zeros=(0,) is B(z) = z.
    """

    c: complex = 1.0
    zeros: tuple = ()
    arg: FunctionSpec | None = None

    kind = "blaschke"

    def __post_init__(self):
        if abs(abs(complex(self.c)) - 1.0) > UNIMODULAR_TOL:
            raise ValidationError("leading constant must be unimodular")
        for a in self.zeros:
            if abs(complex(a)) >= 1.0:
                raise ValidationError("Blaschke zeros must lie inside the open disc")

    @property
    def degree(self) -> int:
        return len(self.zeros)

    def vanishes_at_origin(self) -> bool:
        return any(complex(a) == 0 for a in self.zeros)

    def _eval(self, z):
        w = _apply_arg(self.arg, z)
        out = np.full_like(np.asarray(w, dtype=complex), complex(self.c))
        for a in self.zeros:
            a = complex(a)
            if a == 0:
                out = out * w
            else:
                out = out * (abs(a) / a) * (a - w) / (1.0 - np.conj(a) * w)
        return out

    def as_rational(self) -> "Rational":
        num = np.array([complex(self.c)])
        den = np.array([1.0 + 0j])
        for a in self.zeros:
            a = complex(a)
            if a == 0:
                num = npoly.polymul(num, [0.0, 1.0])
            else:
                num = npoly.polymul(num, [(abs(a) / a) * a, -abs(a) / a])
                den = npoly.polymul(den, [1.0, -np.conj(a)])
        return Rational(tuple(num), tuple(den), self.arg)

    def to_json(self):
        out = {"kind": "blaschke", "c": _as_pairs(self.c)[0], "zeros": _as_pairs(self.zeros)}
        if self.arg is not None:
            out["arg"] = self.arg.to_json()
        return out


@dataclass(frozen=True)
class Rational(FunctionSpec):
    """Ratio of polynomials with ascending coefficient lists."""

    num: tuple
    den: tuple
    arg: FunctionSpec | None = None

    kind = "rational"

    def __post_init__(self):
        if len(self.den) == 0 or not np.any(np.abs(np.asarray(self.den, complex))):
            raise ValidationError("denominator must be a nonzero polynomial")

    def _eval(self, z):
        w = _apply_arg(self.arg, z)
        num = npoly.polyval(w, np.asarray(self.num, dtype=complex))
        den = npoly.polyval(w, np.asarray(self.den, dtype=complex))
        scale = float(np.sum(np.abs(np.asarray(self.den, complex))))
        bad = np.abs(den) < 1e-13 * scale
        if np.any(bad):
            where = np.asarray(w)[bad].ravel()[0]
            raise PoleError(f"evaluation at a denominator root near z={where}")
        return num / den

    def to_json(self):
        out = {"kind": "rational", "num": _as_pairs(self.num), "den": _as_pairs(self.den)}
        if self.arg is not None:
            out["arg"] = self.arg.to_json()
        return out


@dataclass(frozen=True)
class Taylor(FunctionSpec):
    coeffs: tuple
    arg: FunctionSpec | None = None

    kind = "taylor"

    def _eval(self, z):
        w = _apply_arg(self.arg, z)
        return npoly.polyval(w, np.asarray(self.coeffs, dtype=complex))

    def to_json(self):
        out = {"kind": "taylor", "coeffs": _as_pairs(self.coeffs)}
        if self.arg is not None:
            out["arg"] = self.arg.to_json()
        return out


@dataclass(frozen=True)
class HerglotzFromMeasure(FunctionSpec):
    """i*imag + integral of (alpha + z)/(alpha - z) against a circle measure."""

    measure: BoundaryMeasure = field(compare=False)
    imag: float = 0.0
    arg: FunctionSpec | None = None

    kind = "herglotz_from_measure"

    def __post_init__(self):
        if self.measure.boundary != "circle":
            raise ValidationError("the integral representation needs a circle measure")

    def _eval(self, z):
        w = np.asarray(_apply_arg(self.arg, z), dtype=complex)
        flat = w.ravel()
        if self.measure.is_atomic:
            alpha = self.measure.atom_points[:, 0]
            wt = self.measure.atom_weights
        else:
            n = self.measure.density.shape[0]
            alpha = circle_grid(n)
            wt = self.measure.density / n
        diff = alpha[np.newaxis, :] - flat[:, np.newaxis]
        if np.any(np.abs(diff) < 1e-14):
            raise PoleError("evaluation point collides with a measure atom")
        vals = ((alpha[np.newaxis, :] + flat[:, np.newaxis]) / diff) @ wt
        return (1j * self.imag + vals).reshape(w.shape)

    def to_json(self):
        return {
            "kind": "herglotz_from_measure",
            "imag": float(self.imag),
            "measure": self.measure.to_json(),
        }


@dataclass(frozen=True)
class MatrixFunction(FunctionSpec):
    entries: tuple  # tuple of tuples of scalar FunctionSpec

    kind = "matrix"

    def __post_init__(self):
        n = len(self.entries)
        if any(len(row) != n for row in self.entries):
            raise ValidationError("matrix spec must be square")

    @property
    def dim(self) -> int:
        return len(self.entries)

    def _eval(self, z):
        rows = [[e._eval(z) for e in row] for row in self.entries]
        flat = [v for row in rows for v in row]
        broad = np.broadcast_arrays(*[np.asarray(v, complex) for v in flat])
        n = self.dim
        stacked = np.stack(broad, axis=-1)
        return stacked.reshape(stacked.shape[:-1] + (n, n))

    def to_json(self):
        return {
            "kind": "matrix",
            "entries": [[e.to_json() for e in row] for row in self.entries],
        }


def eval_spec(spec: FunctionSpec, z):
    """Evaluate a spec at a point or array of points.

    Returns a complex scalar (or array), or an (n, n) matrix (or stack) for
    matrix specs.
    """
    out = spec._eval(np.asarray(z, dtype=complex))
    if np.ndim(out) == 0:
        return complex(out)
    return out


def spec_from_json(obj: dict) -> FunctionSpec:
    kind = obj.get("kind")
    arg = spec_from_json(obj["arg"]) if "arg" in obj else None
    if kind == "const":
        c = obj["c"]
        return Const(complex(c[0], c[1]))
    if kind == "coord":
        return Coord(int(obj.get("j", 0)))
    if kind == "sum":
        return Sum(tuple(spec_from_json(t) for t in obj["terms"]))
    if kind == "prod":
        return Prod(tuple(spec_from_json(t) for t in obj["terms"]))
    if kind == "compose":
        return Compose(
            spec_from_json(obj["f"]), tuple(spec_from_json(a) for a in obj["args"])
        )
    if kind == "blaschke":
        c = obj.get("c", [1.0, 0.0])
        return Blaschke(complex(c[0], c[1]), tuple(_from_pairs(obj.get("zeros", []))), arg)
    if kind == "rational":
        return Rational(tuple(_from_pairs(obj["num"])), tuple(_from_pairs(obj["den"])), arg)
    if kind == "taylor":
        return Taylor(tuple(_from_pairs(obj["coeffs"])), arg)
    if kind == "herglotz_from_measure":
        return HerglotzFromMeasure(
            BoundaryMeasure.from_json(obj["measure"]), float(obj.get("imag", 0.0))
        )
    if kind == "matrix":
        return MatrixFunction(
            tuple(tuple(spec_from_json(e) for e in row) for row in obj["entries"])
        )
    raise ValidationError(f"unknown function kind {kind!r}")


# ---------------------------------------------------------------------------
# Cayley transforms


def _cayley_core(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    if f.ndim == 0:
        denom = 1.0 + complex(f)
        if abs(denom) < 1e-12:
            raise CayleySingularError("1 + F vanishes")
        return (1.0 - complex(f)) / denom
    if f.ndim < 2 or f.shape[-1] != f.shape[-2]:
        raise ValidationError("expected a scalar or square matrix")
    eye = np.eye(f.shape[-1], dtype=complex)
    a = eye + f
    cond = np.linalg.cond(a)
    if np.any(1.0 / np.maximum(cond, 1.0) < 1e-12):
        raise CayleySingularError(
            f"I + F is numerically singular (condition {float(np.max(cond)):.3e})"
        )
    # (I - F)(I + F)^{-1} solved from the right
    return np.swapaxes(
        np.linalg.solve(np.swapaxes(a, -1, -2), np.swapaxes(eye - f, -1, -2)), -1, -2
    )


def cayley(f):
    """theta = (I - F)(I + F)^{-1}; maps contractions to positive real part."""
    out = _cayley_core(f)
    return complex(out) if np.ndim(out) == 0 else out


def inverse_cayley(theta):
    """f = (I - Theta)(I + Theta)^{-1}; the transform is an involution."""
    out = _cayley_core(theta)
    return complex(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Schur class check


def operator_norms(values: np.ndarray) -> np.ndarray:
    """Pointwise norm: modulus for scalars, spectral norm for matrix stacks."""
    values = np.asarray(values)
    if values.ndim >= 2 and values.shape[-1] == values.shape[-2]:
        return np.linalg.svd(values, compute_uv=False)[..., 0]
    return np.abs(values)


def default_interior_points(radii=(0.3, 0.6, 0.9), angles: int = 64) -> np.ndarray:
    pts = [r * circle_grid(angles) for r in radii]
    return np.concatenate(pts)


@dataclass(frozen=True)
class SchurReport:
    interior_max: float
    boundary_deviation: float
    tol: float
    is_schur: bool
    looks_inner: bool


def schur_check(
    spec: FunctionSpec,
    boundary_grid: int = 512,
    interior_points=None,
    tol: float = 1e-10,
) -> SchurReport:
    """Report sup of the norm over interior samples and |norm - 1| on the circle.

    Boundary samples sit at half-cell offsets so that poles of intermediate
    expressions at rational angles are not hit head-on.
    """
    if interior_points is None:
        interior_points = default_interior_points()
    interior_points = np.asarray(interior_points, dtype=complex)
    vals = eval_spec(spec, interior_points)
    interior_max = float(np.max(operator_norms(vals)))
    offset = np.exp(1j * np.pi / boundary_grid)
    bvals = eval_spec(spec, offset * circle_grid(boundary_grid))
    boundary_dev = float(np.max(np.abs(operator_norms(bvals) - 1.0)))
    return SchurReport(
        interior_max=interior_max,
        boundary_deviation=boundary_dev,
        tol=tol,
        is_schur=interior_max <= 1.0 + tol,
        looks_inner=boundary_dev <= 1e-8,
    )


def is_matrix_spec(spec: FunctionSpec) -> bool:
    return isinstance(spec, MatrixFunction)


def taylor_coefficients(
    spec: FunctionSpec, order: int, radius: float = 0.75, grid: int | None = None
) -> np.ndarray:
    """Taylor coefficients a_0..a_order of a scalar spec at the origin.

    Cauchy integrals on a circle of the given radius by FFT; the sampling
    radius keeps noise amplification 1/radius^order moderate.
    """
    if isinstance(spec, Taylor) and spec.arg is None:
        out = np.zeros(order + 1, dtype=complex)
        coeffs = np.asarray(spec.coeffs, dtype=complex)
        take = min(order + 1, coeffs.shape[0])
        out[:take] = coeffs[:take]
        return out
    if grid is None:
        grid = max(256, 4 * (order + 1))
    samples = eval_spec(spec, radius * circle_grid(grid))
    spec_hat = np.fft.fft(np.asarray(samples)) / grid
    ns = np.arange(order + 1)
    return spec_hat[: order + 1] / radius**ns
