"""Szego, Poisson-Szego, and Herglotz kernels with admissibility checks.

Closed forms cover the disc, polydisc, and symmetrized bidisc.  Reinhardt
domains (the ball included) go through the monomial series
sum z^alpha conj(w)^alpha / nu(alpha) with a reported geometric tail bound;
the diagonal monomial moments nu(alpha) are computed numerically from the
declared boundary measure, never hard-coded.  The annulus kernel is fully
numeric and lives in the annulus module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MonteCarloError, TruncationError, ValidationError
from .measures import circle_grid, sym_point_on_boundary, symmetrize

TAGS = ("disc", "polydisc", "ball", "sym_bidisc", "reinhardt", "annulus")


@dataclass(frozen=True)
class DomainSpec:
    tag: str
    d: int = 1
    z0: tuple = (0.0,)
    q: float | None = None
    nu_source: str | None = None
    max_degree: int = 0
    nu_table: dict = field(default_factory=dict, compare=False)
    # series acceleration: stacked multi-indices and their moments
    nu_alphas: np.ndarray | None = field(default=None, compare=False, repr=False)
    nu_values: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.nu_table and self.nu_alphas is None:
            alphas = np.array(sorted(self.nu_table), dtype=float)
            values = np.array([self.nu_table[tuple(int(v) for v in a)] for a in alphas])
            object.__setattr__(self, "nu_alphas", alphas)
            object.__setattr__(self, "nu_values", values)

    @staticmethod
    def disc(z0: complex = 0.0) -> "DomainSpec":
        return DomainSpec("disc", 1, (complex(z0),))

    @staticmethod
    def polydisc(d: int = 2) -> "DomainSpec":
        if d < 1 or d > 3:
            raise ValidationError("polydisc dimension limited to 1..3")
        return DomainSpec("polydisc", d, (0.0,) * d)

    @staticmethod
    def sym_bidisc() -> "DomainSpec":
        return DomainSpec("sym_bidisc", 2, (0.0, 0.0))

    @staticmethod
    def reinhardt(d: int, nu_table: dict, source: str = "custom") -> "DomainSpec":
        if not nu_table:
            raise ValidationError("reinhardt domain needs a moment table")
        max_degree = max(sum(a) for a in nu_table)
        for alpha, v in nu_table.items():
            if v <= 0:
                raise ValidationError(f"moment at {alpha} must be positive")
        return DomainSpec(
            "reinhardt", d, (0.0,) * d,
            nu_source=source, max_degree=max_degree, nu_table=dict(nu_table),
        )

    @staticmethod
    def ball(
        d: int = 2,
        max_degree: int = 60,
        backend: str = "quadrature",
        seed: int = 0,
        samples: int = 400_000,
    ) -> "DomainSpec":
        if d < 2 or d > 3:
            raise ValidationError("ball dimension limited to 2..3")
        table = {}
        for alpha in _degree_box(d, max_degree):
            table[alpha] = reinhardt_nu_hat(
                "ball", alpha, d=d, backend=backend, seed=seed, samples=samples
            )
        return DomainSpec(
            "ball", d, (0.0,) * d,
            nu_source="ball", max_degree=max_degree, nu_table=table,
        )

    @staticmethod
    def polydisc_haar_series(d: int = 2, max_degree: int = 100) -> "DomainSpec":
        """Polydisc exposed through the Reinhardt series, for cross-checks."""
        table = {a: 1.0 for a in _degree_box(d, max_degree)}
        return DomainSpec(
            "reinhardt", d, (0.0,) * d,
            nu_source="polydisc_haar", max_degree=max_degree, nu_table=table,
        )

    @staticmethod
    def annulus(q: float, z0: float) -> "DomainSpec":
        if not (0.0 < q < 1.0):
            raise ValidationError("annulus needs 0 < q < 1")
        if not (q < z0 < 1.0):
            raise ValidationError("base point must satisfy q < z0 < 1")
        return DomainSpec("annulus", 1, (float(z0),), q=float(q))

    def base_point(self) -> np.ndarray:
        return np.asarray(self.z0, dtype=complex)

    def contains(self, z, margin: float = 0.0) -> bool:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.tag == "disc":
            return bool(np.all(np.abs(z) < 1.0 - margin))
        if self.tag == "polydisc" or (
            self.tag == "reinhardt" and self.nu_source == "polydisc_haar"
        ):
            return bool(np.all(np.abs(z) < 1.0 - margin))
        if self.tag == "ball":
            return bool(np.sum(np.abs(z) ** 2) < (1.0 - margin) ** 2)
        if self.tag == "sym_bidisc":
            s, p = complex(z[0]), complex(z[1])
            roots = np.roots([1.0, -s, p]) if abs(p) > 0 or abs(s) > 0 else np.zeros(2)
            return bool(np.all(np.abs(roots) < 1.0 - margin))
        if self.tag == "annulus":
            rad = np.abs(z)
            return bool(np.all((rad > self.q + margin) & (rad < 1.0 - margin)))
        return True

    def to_json(self) -> dict:
        out: dict = {"tag": self.tag}
        if self.tag == "polydisc":
            out["d"] = self.d
        if self.tag == "disc" and self.z0 != (0.0,):
            z = complex(self.z0[0])
            out["z0"] = [z.real, z.imag]
        if self.tag == "annulus":
            out["q"] = self.q
            out["z0"] = float(np.real(self.z0[0]))
        if self.tag in ("ball", "reinhardt"):
            out["d"] = self.d
            out["source"] = self.nu_source
            out["max_degree"] = self.max_degree
        return out

    @staticmethod
    def from_json(obj: dict) -> "DomainSpec":
        tag = obj.get("tag")
        if tag == "disc":
            z0 = obj.get("z0", [0.0, 0.0])
            return DomainSpec.disc(complex(z0[0], z0[1]))
        if tag == "polydisc":
            return DomainSpec.polydisc(int(obj.get("d", 2)))
        if tag == "sym_bidisc":
            return DomainSpec.sym_bidisc()
        if tag == "annulus":
            return DomainSpec.annulus(float(obj["q"]), float(obj["z0"]))
        if tag == "ball":
            return DomainSpec.ball(
                int(obj.get("d", 2)),
                int(obj.get("max_degree", 40)),
                obj.get("backend", "quadrature"),
                int(obj.get("seed", 0)),
            )
        if tag == "reinhardt":
            source = obj.get("source", "polydisc_haar")
            if source == "polydisc_haar":
                return DomainSpec.polydisc_haar_series(
                    int(obj.get("d", 2)), int(obj.get("max_degree", 40))
                )
            raise ValidationError("reinhardt from JSON supports the polydisc_haar source")
        raise ValidationError(f"unknown domain tag {tag!r}")


def _degree_box(d: int, max_degree: int):
    """Multi-indices alpha >= 0 with |alpha|_1 <= max_degree."""
    if d == 1:
        return [(k,) for k in range(max_degree + 1)]
    out = []
    for k in range(max_degree + 1):
        for alpha in _degree_box(d - 1, max_degree - k):
            out.append((k,) + alpha)
    return out


# ---------------------------------------------------------------------------
# Diagonal monomial moments for Reinhardt boundary measures


def _gauss_beta(a: int, b: int, nodes: int = 64) -> float:
    """Integral of t^a (1-t)^b over [0, 1] by Gauss-Legendre."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (x + 1.0)
    return float(np.sum(w * 0.5 * t**a * (1.0 - t) ** b))


def reinhardt_nu_hat(
    source: str,
    alpha,
    d: int | None = None,
    backend: str = "quadrature",
    seed: int = 0,
    samples: int = 400_000,
) -> float:
    """Diagonal moment of |z^alpha|^2 against the declared boundary measure.

    Sources: "polydisc_haar" (Haar on the torus) and "ball" (normalized
    surface measure on the unit sphere).  The ball moments reduce to the
    flat Dirichlet law of the squared coordinate moduli; the quadrature
    backend integrates it with an iterated substitution, the Monte Carlo
    backend averages seeded samples and insists on relative standard error
    at most 1e-3.
    """
    alpha = tuple(int(a) for a in np.atleast_1d(alpha))
    if any(a < 0 for a in alpha):
        raise ValidationError("multi-index must be nonnegative")
    if d is None:
        d = len(alpha)
    if len(alpha) != d:
        raise ValidationError("multi-index length must match the dimension")
    if source == "polydisc_haar":
        return 1.0
    if source != "ball":
        raise ValidationError(f"unknown moment source {source!r}")
    if backend == "quadrature":
        # iterated substitution peels the simplex into 1D beta factors
        value = math.factorial(d - 1)
        for j in range(d - 1):
            b = sum(alpha[j + 1 :]) + (d - 2 - j)
            value *= _gauss_beta(alpha[j], b)
        return float(value)
    if backend == "mc":
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((samples, d)) ** 2 + rng.standard_normal((samples, d)) ** 2
        t = g / g.sum(axis=1, keepdims=True)
        vals = np.prod(t ** np.asarray(alpha), axis=1)
        mean = float(vals.mean())
        stderr = float(vals.std(ddof=1) / np.sqrt(samples))
        if sum(alpha) > 0 and stderr > 1e-3 * abs(mean):
            raise MonteCarloError(
                f"relative stderr {stderr / abs(mean):.2e} above 1e-3 at {alpha}"
            )
        return mean
    raise ValidationError(f"unknown backend {backend!r}")


# ---------------------------------------------------------------------------
# Kernels


def _check_dim(domain: DomainSpec, z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.shape != (domain.d,):
        raise ValidationError(f"point must have {domain.d} coordinates")
    return z


def szego(domain: DomainSpec, z, w) -> complex:
    """Reproducing kernel S(z, w), holomorphic in z, conjugate-linear in w."""
    z = _check_dim(domain, z)
    w = _check_dim(domain, w)
    if domain.tag == "disc":
        return complex(1.0 / (1.0 - z[0] * np.conj(w[0])))
    if domain.tag == "polydisc":
        return complex(np.prod(1.0 / (1.0 - z * np.conj(w))))
    if domain.tag == "sym_bidisc":
        s, p = z
        t, q = np.conj(w[0]), np.conj(w[1])
        denom = (1.0 - p * q) ** 2 - (s - p * t) * (t - s * q)
        return complex(1.0 / denom)
    if domain.tag in ("reinhardt", "ball"):
        bound = reinhardt_tail_bound(domain, z, w)
        if bound > 1e-10:
            raise TruncationError(
                f"series tail bound {bound:.2e} exceeds 1e-10; "
                "increase max_degree or move the points inward"
            )
        base = z * np.conj(w)
        terms = np.prod(base[np.newaxis, :] ** domain.nu_alphas, axis=1)
        return complex(np.sum(terms / domain.nu_values))
    if domain.tag == "annulus":
        raise ValidationError(
            "the annulus kernel is numeric; build it with the annulus module"
        )
    raise ValidationError(f"unsupported domain tag {domain.tag!r}")


def reinhardt_tail_bound(domain: DomainSpec, z, w) -> float:
    """Geometric bound on the dropped series tail beyond the stored degrees."""
    z = _check_dim(domain, z)
    w = _check_dim(domain, w)
    t = float(np.max(np.abs(z * np.conj(w))))
    if t >= 1.0:
        raise TruncationError("series requires max_j |z_j w_j| < 1")
    m = domain.max_degree
    by_degree: dict[int, float] = {}
    for alpha, nu in domain.nu_table.items():
        k = sum(alpha)
        by_degree[k] = max(by_degree.get(k, 0.0), 1.0 / nu)
    c_m = by_degree.get(m, 1.0)
    c_prev = by_degree.get(m - 1, c_m)
    growth = max(1.0, c_m / max(c_prev, 1e-300))
    if growth * t >= 1.0:
        raise TruncationError("tail growth ratio defeats the geometric bound")
    total = 0.0
    coeff = c_m
    for k in range(m + 1, m + 4000):
        coeff *= growth
        count = math.comb(k + domain.d - 1, domain.d - 1)
        term = count * coeff * t**k
        total += term
        if term < 1e-30:
            break
    return total


def poisson_szego(domain: DomainSpec, z, zeta) -> float:
    """P(z, zeta) = |S(z, zeta)|^2 / S(z, z), nonnegative on the boundary."""
    _check_boundary_point(domain, zeta)
    s_zz = szego(domain, z, z)
    s_zzeta = szego(domain, z, zeta)
    return float(abs(s_zzeta) ** 2 / np.real(s_zz))


def herglotz_kernel(domain: DomainSpec, z, zeta) -> complex:
    """H(z, zeta) = 2 S(z, zeta) - 1; equals the disc kernel (a+z)/(a-z)."""
    return 2.0 * szego(domain, z, zeta) - 1.0


def psi_defect(domain: DomainSpec, z, zeta) -> float:
    """P - (2 Re S - 1); vanishes identically on the disc."""
    p = poisson_szego(domain, z, zeta)
    s = szego(domain, z, zeta)
    return float(p - (2.0 * np.real(s) - 1.0))


def _check_boundary_point(domain: DomainSpec, zeta, tol: float = 1e-9):
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
    if domain.tag == "disc":
        ok = abs(abs(zeta[0]) - 1.0) <= tol
    elif domain.tag == "polydisc" or (
        domain.tag == "reinhardt" and domain.nu_source == "polydisc_haar"
    ):
        ok = bool(np.all(np.abs(np.abs(zeta) - 1.0) <= tol))
    elif domain.tag == "sym_bidisc":
        ok = sym_point_on_boundary(zeta[0], zeta[1], tol)
    elif domain.tag == "ball":
        ok = abs(float(np.sum(np.abs(zeta) ** 2)) - 1.0) <= tol
    elif domain.tag == "reinhardt":
        ok = True
    else:
        raise ValidationError(f"no boundary description for tag {domain.tag!r}")
    if not ok:
        raise ValidationError(f"{zeta} is not on the distinguished boundary")


# ---------------------------------------------------------------------------
# Admissibility


def interior_samples(domain: DomainSpec, count: int = 48) -> np.ndarray:
    """Deterministic interior sample points, shape (count, d).

    Series-backed domains are sampled on smaller compacts so the truncation
    tail bound stays below the evaluation threshold.
    """
    rng = np.random.default_rng(20240330)
    d = domain.d
    if domain.tag == "disc":
        radii = rng.uniform(0.1, 0.9, count)
        ang = rng.uniform(0.0, 2 * np.pi, count)
        return (radii * np.exp(1j * ang))[:, np.newaxis]
    if domain.tag in ("polydisc", "reinhardt"):
        top = 0.85 if domain.tag == "polydisc" else 0.55
        radii = rng.uniform(0.1, top, (count, d))
        ang = rng.uniform(0.0, 2 * np.pi, (count, d))
        return radii * np.exp(1j * ang)
    if domain.tag == "ball":
        g = rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return g * rng.uniform(0.1, 0.45, (count, 1))
    if domain.tag == "sym_bidisc":
        radii = rng.uniform(0.1, 0.85, (count, 2))
        ang = rng.uniform(0.0, 2 * np.pi, (count, 2))
        z = radii * np.exp(1j * ang)
        s, p = symmetrize(z[:, 0], z[:, 1])
        return np.stack([s, p], axis=-1)
    if domain.tag == "annulus":
        radii = rng.uniform(domain.q + 0.05, 0.95, count)
        ang = rng.uniform(0.0, 2 * np.pi, count)
        return (radii * np.exp(1j * ang))[:, np.newaxis]
    raise ValidationError(f"unsupported domain tag {domain.tag!r}")


def boundary_path(domain: DomainSpec, n: int) -> np.ndarray:
    """A closed curve on the distinguished boundary for continuity probes."""
    theta = 2 * np.pi * np.arange(n) / n
    if domain.tag == "disc":
        return np.exp(1j * theta)[:, np.newaxis]
    if domain.tag in ("polydisc", "reinhardt"):
        cols = [np.exp(1j * (j + 1) * theta + 0.37j * j) for j in range(domain.d)]
        return np.stack(cols, axis=-1)
    if domain.tag == "sym_bidisc":
        z1 = np.exp(1j * theta)
        z2 = np.exp(1j * (2 * theta + 0.37))
        s, p = symmetrize(z1, z2)
        return np.stack([s, p], axis=-1)
    if domain.tag == "ball":
        psi = 0.4
        cols = [np.cos(psi) * np.exp(1j * theta), np.sin(psi) * np.exp(2j * theta)]
        if domain.d == 3:
            cols = [np.cos(psi) * np.exp(1j * theta),
                    np.sin(psi) * 0.8 * np.exp(2j * theta),
                    np.sin(psi) * 0.6 * np.exp(3j * theta)]
        return np.stack(cols, axis=-1)
    raise ValidationError(f"no boundary path for tag {domain.tag!r}")


@dataclass(frozen=True)
class AdmissibilityReport:
    passed: bool
    worst_deviation: float
    boundary_fd: float
    tol: float


def admissibility_check(
    domain: DomainSpec, boundary_grid: int = 256, tol: float = 1e-10
) -> AdmissibilityReport:
    """Verify S(w, z0) = 1 on interior samples; probe kernel-section continuity.

    ``boundary_fd`` is the largest finite difference of S(., z) between
    adjacent points of a boundary curve, reported for a few interior z.
    """
    z0 = domain.base_point()
    worst = 0.0
    pts = interior_samples(domain)
    for w in pts:
        worst = max(worst, abs(szego(domain, w, z0) - 1.0))
    fd = 0.0
    try:
        path = boundary_path(domain, boundary_grid)
        for z in pts[:3]:
            vals = np.array([szego(domain, zeta, z) for zeta in path])
            fd = max(fd, float(np.max(np.abs(np.diff(np.append(vals, vals[0]))))))
    except TruncationError:
        # boundary sections out of reach of the stored series degree
        fd = float("nan")
    return AdmissibilityReport(worst <= tol, float(worst), fd, tol)
