"""First integrals Z, their domains, and the vector field L = Z_x d/dy - Z_y d/dx.

Every structure here is one of the closed-form chart variants:

* ``Elliptic``          Z = x + iy                        (the standard complex structure)
* ``ArcNormal(k)``      Z = s + i t^k, k odd              (characteristic arc, order k)
* ``PointNormal(psi)``  Z = s + i int_0^t psi(s,tau)dtau  (characteristic point, psi >= 0 polynomial)
* ``CircleNormal(k)``   Z = exp(t^k + i theta)            (closed characteristic curve)
* ``PolynomialIntegral``Z = x + i Q(x,y)                  (globally defined, Q polynomial)

Charts are always supplied directly in these normal coordinates; nothing
here constructs a chart from a raw vector field.  Gradients are analytic
(closed form), never finite differences -- the finite-difference path
exists only for applying L to black-box functions.

All values are immutable after construction, so instances can be shared
freely across parallel workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .polyalg import INFINITE_ORDER, BivariatePolynomial, antiderivative_y, vanishing_order

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """Point lies outside the domain of a first integral."""


@dataclass(frozen=True)
class Point:
    """A point of the plane; in chart coordinates (x, y) play the roles (s, t)."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(float(self.x)) and math.isfinite(float(self.y))):
            raise ValueError("point coordinates must be finite")

    def as_floats(self) -> tuple[float, float]:
        return float(self.x), float(self.y)


def _is_exact_number(v) -> bool:
    return isinstance(v, (int, Fraction))


@dataclass(frozen=True)
class Rectangle:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError("rectangle must have nonempty interior")

    def contains(self, p: Point, pad: float = 0.0) -> bool:
        x, y = float(p.x), float(p.y)
        return (self.x_lo - pad <= x <= self.x_hi + pad
                and self.y_lo - pad <= y <= self.y_hi + pad)

    def area(self) -> float:
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)

    def center(self) -> Point:
        return Point(0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        xs = rng.uniform(self.x_lo, self.x_hi, n)
        ys = rng.uniform(self.y_lo, self.y_hi, n)
        return np.column_stack([xs, ys])

    def boundary_distance(self, p: Point) -> float:
        x, y = float(p.x), float(p.y)
        return min(x - self.x_lo, self.x_hi - x, y - self.y_lo, self.y_hi - y)


@dataclass(frozen=True)
class Disc:
    center_point: Point
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disc radius must be positive")

    def contains(self, p: Point, pad: float = 0.0) -> bool:
        dx = float(p.x) - float(self.center_point.x)
        dy = float(p.y) - float(self.center_point.y)
        return math.hypot(dx, dy) <= self.radius + pad

    def area(self) -> float:
        return math.pi * self.radius**2

    def center(self) -> Point:
        return self.center_point

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # uniform by area in polar coordinates
        r = self.radius * np.sqrt(rng.uniform(0.0, 1.0, n))
        th = rng.uniform(0.0, TWO_PI, n)
        cx, cy = self.center_point.as_floats()
        return np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)])

    def boundary_distance(self, p: Point) -> float:
        dx = float(p.x) - float(self.center_point.x)
        dy = float(p.y) - float(self.center_point.y)
        return self.radius - math.hypot(dx, dy)


Region = object  # Rectangle | Disc; kept duck-typed


class FirstIntegral:
    """Base class: an injective map Z with LZ = 0 and dZ != 0 on its domain."""

    domain: Region

    # chart Lojasiewicz exponent, when the variant pins it (None otherwise)
    def loj_mu(self) -> Optional[float]:
        return None

    def eval(self, p: Point) -> complex:
        x, y = p.as_floats()
        return complex(self.eval_many(np.array([x]), np.array([y]))[0])

    def eval_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, p: Point) -> tuple[complex, complex]:
        x, y = p.as_floats()
        gx, gy = self.grad_many(np.array([x]), np.array([y]))
        return complex(gx[0]), complex(gy[0])

    def grad_many(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def eval_exact_parts(self, p: Point) -> Optional[tuple[Fraction, Fraction]]:
        """(Re Z, Im Z) as exact rationals at a rational point, when the
        variant supports exact evaluation; None otherwise."""
        return None

    def char_defect_exact(self, p: Point) -> Optional[Fraction]:
        """Exact rational proportional to Im(Z_x conj(Z_y)) at p; zero iff
        p is characteristic.  None when no exact form exists."""
        return None

    def char_order_at(self, p: Point):
        """Transversal vanishing order of Im Z at p (1 at elliptic points),
        when exactly computable; None otherwise."""
        return None

    def distance_to_char(self, p: Point) -> float:
        """Distance from p to the characteristic set (inf when empty);
        approximate for polynomial structures."""
        return math.inf

    def require_inside(self, p: Point, pad: float = 0.0):
        if not self.domain.contains(p, pad=pad):
            raise DomainError(f"point ({p.x}, {p.y}) outside chart domain")


class Elliptic(FirstIntegral):
    """Z = x + iy on the whole given region."""

    def __init__(self, domain: Region):
        self.domain = domain

    def loj_mu(self):
        return 1.0

    def eval_many(self, xs, ys):
        return np.asarray(xs, dtype=float) + 1j * np.asarray(ys, dtype=float)

    def grad_many(self, xs, ys):
        shape = np.broadcast(np.asarray(xs), np.asarray(ys)).shape
        return np.ones(shape, dtype=complex), 1j * np.ones(shape, dtype=complex)

    def eval_exact_parts(self, p):
        if _is_exact_number(p.x) and _is_exact_number(p.y):
            return Fraction(p.x), Fraction(p.y)
        return None

    def char_defect_exact(self, p):
        return Fraction(-1)  # Im(1 * conj(i)) = -1: never characteristic

    def char_order_at(self, p):
        return 1

    def __repr__(self):
        return "Elliptic()"


class ArcNormal(FirstIntegral):
    """Z = s + i t^k with k an odd positive integer; characteristic on t = 0."""

    def __init__(self, k: int, domain: Region):
        if k < 1 or k % 2 == 0:
            raise ValueError("k must be an odd positive integer")
        self.k = int(k)
        self.domain = domain

    def loj_mu(self):
        return float(self.k)

    def eval_many(self, xs, ys):
        return np.asarray(xs, dtype=float) + 1j * np.asarray(ys, dtype=float) ** self.k

    def grad_many(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        shape = np.broadcast(xs, ys).shape
        gx = np.ones(shape, dtype=complex)
        gy = 1j * self.k * np.broadcast_to(ys, shape).astype(float) ** (self.k - 1)
        return gx, gy + 0j

    def eval_exact_parts(self, p):
        if _is_exact_number(p.x) and _is_exact_number(p.y):
            return Fraction(p.x), Fraction(p.y) ** self.k
        return None

    def char_defect_exact(self, p):
        if _is_exact_number(p.y):
            return -self.k * Fraction(p.y) ** (self.k - 1)
        return None

    def char_order_at(self, p):
        if self.k == 1:
            return 1
        ty = Fraction(p.y) if _is_exact_number(p.y) else Fraction(float(p.y))
        return self.k if ty == 0 else 1

    def distance_to_char(self, p):
        if self.k == 1:
            return math.inf
        return abs(float(p.y))

    def __repr__(self):
        return f"ArcNormal(k={self.k})"


class PointNormal(FirstIntegral):
    """Z = s + i phi(s, t) with phi(s,t) = int_0^t psi(s, tau) dtau.

    psi is a user-supplied polynomial, required nonnegative on the domain
    (checked by sampling in validate_first_integral), so each t-slice of
    Im Z is monotone and Z is a homeomorphism.
    """

    def __init__(self, psi: BivariatePolynomial, domain: Region):
        self.psi = psi
        self.phi = antiderivative_y(psi)
        self.phi_s = self.phi.partial_x()
        self.domain = domain

    def loj_mu(self):
        # order of phi(0, t) at t = 0; the chart is centered at its
        # characteristic point
        order = vanishing_order(self.phi, (0, 0))
        return None if order is INFINITE_ORDER else float(order)

    def eval_many(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        return xs + 1j * self.phi.eval_float(xs, ys)

    def grad_many(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        gx = 1.0 + 1j * self.phi_s.eval_float(xs, ys)
        gy = 1j * self.psi.eval_float(xs, ys)
        return gx, gy

    def eval_exact_parts(self, p):
        if _is_exact_number(p.x) and _is_exact_number(p.y):
            return Fraction(p.x), self.phi.eval_exact(p.x, p.y)
        return None

    def char_defect_exact(self, p):
        return -self.psi.eval_exact(p.x, p.y)

    def char_order_at(self, p):
        order = vanishing_order(self.psi, (p.x, p.y))
        return INFINITE_ORDER if order is INFINITE_ORDER else int(order) + 1

    def distance_to_char(self, p):
        # chart is centered at its characteristic point
        return math.hypot(float(p.x), float(p.y))

    def __repr__(self):
        return f"PointNormal(psi={self.psi!r})"


class CircleNormal(FirstIntegral):
    """Z = exp(t^k + i theta) on the cylinder S^1 x (-delta, delta).

    Coordinates are (theta, t) with theta stored in Point.x and wrapped to
    [0, 2*pi) before evaluation, which makes Z exactly 2*pi-periodic in
    floating point whenever theta + 2*pi is itself exact.
    """

    def __init__(self, k: int, delta: float):
        if k < 1 or k % 2 == 0:
            raise ValueError("k must be an odd positive integer")
        if not delta > 0:
            raise ValueError("delta must be positive")
        self.k = int(k)
        self.delta = float(delta)
        self.domain = Rectangle(0.0, TWO_PI, -delta, delta)

    def loj_mu(self):
        return float(self.k)

    @staticmethod
    def _wrap(theta):
        th = np.fmod(np.asarray(theta, dtype=float), TWO_PI)
        return np.where(th < 0, th + TWO_PI, th)

    def eval_many(self, xs, ys):
        th = self._wrap(xs)
        t = np.asarray(ys, dtype=float)
        return np.exp(t**self.k) * (np.cos(th) + 1j * np.sin(th))

    def grad_many(self, xs, ys):
        z = self.eval_many(xs, ys)
        t = np.asarray(ys, dtype=float)
        g_theta = 1j * z
        g_t = self.k * np.broadcast_to(t, z.shape) ** (self.k - 1) * z
        return g_theta, g_t

    def char_defect_exact(self, p):
        # Im(Z_theta conj(Z_t)) = k t^(k-1) |Z|^2; the |Z|^2 factor never vanishes
        if _is_exact_number(p.y):
            return self.k * Fraction(p.y) ** (self.k - 1) if self.k > 1 else Fraction(1)
        return None

    def char_order_at(self, p):
        if self.k == 1:
            return 1
        ty = Fraction(p.y) if _is_exact_number(p.y) else Fraction(float(p.y))
        return self.k if ty == 0 else 1

    def distance_to_char(self, p):
        if self.k == 1:
            return math.inf
        return abs(float(p.y))

    def contains_wrapped(self, p: Point) -> bool:
        return abs(float(p.y)) <= self.delta

    def __repr__(self):
        return f"CircleNormal(k={self.k}, delta={self.delta})"


class PolynomialIntegral(FirstIntegral):
    """Z = x + i Q(x, y) with Q an exact bivariate polynomial.

    The usual construction takes a nonnegative density P and sets
    Q(x, y) = int_0^y P(x, tau) dtau, so that each x-slice of Q is monotone
    and Z is a global homeomorphism.
    """

    def __init__(self, Q: BivariatePolynomial, domain: Region):
        self.Q = Q
        self.P = Q.partial_y()
        self.Q_x = Q.partial_x()
        self.domain = domain
        self._gradP = (self.P.partial_x(), self.P.partial_y())

    @classmethod
    def from_density(cls, P: BivariatePolynomial, domain: Region) -> "PolynomialIntegral":
        return cls(antiderivative_y(P), domain)

    def eval_many(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        return xs + 1j * self.Q.eval_float(xs, ys)

    def grad_many(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        gx = 1.0 + 1j * self.Q_x.eval_float(xs, ys)
        gy = 1j * self.P.eval_float(xs, ys)
        return gx, gy

    def eval_exact_parts(self, p):
        return Fraction(p.x), self.Q.eval_exact(p.x, p.y)

    def char_defect_exact(self, p):
        # Im(Z_x conj(Z_y)) = -Q_y = -P
        return -self.P.eval_exact(p.x, p.y)

    def char_order_at(self, p):
        order = vanishing_order(self.P, (p.x, p.y))
        return INFINITE_ORDER if order is INFINITE_ORDER else int(order) + 1

    def distance_to_char(self, p):
        # first-order Newton estimate |P| / |grad P|; exact enough for
        # band exclusion at desk scale
        x, y = p.as_floats()
        val = abs(float(self.P.eval_float(x, y)))
        if val == 0.0:
            return 0.0
        gx = float(self._gradP[0].eval_float(x, y))
        gy = float(self._gradP[1].eval_float(x, y))
        g = math.hypot(gx, gy)
        return math.inf if g == 0.0 else val / g

    def __repr__(self):
        return f"PolynomialIntegral(deg Q = {self.Q.degree()})"


class Scaled(FirstIntegral):
    """lambda * Z for a complex constant lambda != 0 (same fibers as Z)."""

    def __init__(self, base: FirstIntegral, factor: complex):
        if factor == 0:
            raise ValueError("scale factor must be nonzero")
        self.base = base
        self.factor = complex(factor)
        self.domain = base.domain

    def loj_mu(self):
        return self.base.loj_mu()

    def eval_many(self, xs, ys):
        return self.factor * self.base.eval_many(xs, ys)

    def grad_many(self, xs, ys):
        gx, gy = self.base.grad_many(xs, ys)
        return self.factor * gx, self.factor * gy

    def char_order_at(self, p):
        return self.base.char_order_at(p)

    def distance_to_char(self, p):
        return self.base.distance_to_char(p)

    def __repr__(self):
        return f"Scaled({self.base!r}, {self.factor})"


# ---------------------------------------------------------------------------
# the vector field L
# ---------------------------------------------------------------------------

def apply_L(Z: FirstIntegral, u: Callable[[Point], complex], p: Point,
            fd_step: Optional[float] = None,
            partials: Optional[Callable[[Point], tuple[complex, complex]]] = None) -> complex:
    """L u at p, with L = Z_x d/dy - Z_y d/dx.

    ``partials(p) -> (du/dx, du/dy)`` supplies analytic partials; otherwise
    order-2 central differences with step ``fd_step`` are used, which
    requires p to sit at least fd_step inside the domain.
    """
    zx, zy = Z.grad(p)
    if partials is not None:
        ux, uy = partials(p)
        return zx * uy - zy * ux
    if fd_step is None:
        raise ValueError("need either analytic partials or fd_step")
    h = float(fd_step)
    if not Z.domain.contains(Point(float(p.x) + h, float(p.y) + h)) or \
       not Z.domain.contains(Point(float(p.x) - h, float(p.y) - h)):
        raise DomainError("insufficient margin for the finite-difference stencil")
    x, y = p.as_floats()
    ux = (u(Point(x + h, y)) - u(Point(x - h, y))) / (2 * h)
    uy = (u(Point(x, y + h)) - u(Point(x, y - h))) / (2 * h)
    return zx * uy - zy * ux


def apply_L_order4(Z: FirstIntegral, u: Callable[[Point], complex], p: Point,
                   fd_step: float) -> complex:
    """Order-4 central-difference version, for residual checks where u
    varies steeply near the characteristic set."""
    zx, zy = Z.grad(p)
    h = float(fd_step)
    x, y = p.as_floats()

    def d4(vm2, vm1, vp1, vp2):
        return (vm2 - 8 * vm1 + 8 * vp1 - vp2) / (12 * h)

    ux = d4(u(Point(x - 2 * h, y)), u(Point(x - h, y)), u(Point(x + h, y)), u(Point(x + 2 * h, y)))
    uy = d4(u(Point(x, y - 2 * h)), u(Point(x, y - h)), u(Point(x, y + h)), u(Point(x, y + 2 * h)))
    return zx * uy - zy * ux


DEFAULT_FD_STEP = 1e-4


# ---------------------------------------------------------------------------
# sampling validation of the defining invariants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    injective: bool
    min_image_gap: float          # min |Z(p)-Z(p')| over sampled far-apart pairs
    min_grad_norm: float          # min (|Z_x| + |Z_y|) over samples
    psi_nonnegative: bool         # vacuously True for variants without psi
    n_samples: int

    @property
    def ok(self) -> bool:
        return self.injective and self.min_grad_norm > 0 and self.psi_nonnegative


def validate_first_integral(Z: FirstIntegral, n_samples: int = 10_000,
                            seed: int = 0,
                            separation: float = 1e-3,
                            collision_tol: float = 1e-12) -> ValidationReport:
    """Sampling check of the three defining invariants: injectivity on
    well-separated pairs, dZ != 0, and psi >= 0 for PointNormal."""
    rng = np.random.default_rng(seed)
    pts = Z.domain.sample(rng, n_samples)
    xs, ys = pts[:, 0], pts[:, 1]
    vals = Z.eval_many(xs, ys)

    injective = True
    min_gap = math.inf
    chunk = 512
    for i0 in range(0, n_samples, chunk):
        i1 = min(i0 + chunk, n_samples)
        dz = np.abs(vals[i0:i1, None] - vals[None, :])
        dp = np.hypot(xs[i0:i1, None] - xs[None, :], ys[i0:i1, None] - ys[None, :])
        far = dp > separation
        if np.any(far):
            gap = float(dz[far].min())
            min_gap = min(min_gap, gap)
            if gap < collision_tol:
                injective = False

    gx, gy = Z.grad_many(xs, ys)
    min_grad = float((np.abs(gx) + np.abs(gy)).min())

    psi_ok = True
    if isinstance(Z, PointNormal):
        psi_ok = bool(np.all(Z.psi.eval_float(xs, ys) >= 0.0))

    return ValidationReport(injective=injective, min_image_gap=min_gap,
                            min_grad_norm=min_grad, psi_nonnegative=psi_ok,
                            n_samples=n_samples)
