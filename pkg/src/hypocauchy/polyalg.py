"""Exact arithmetic for bivariate polynomials with rational coefficients.

A polynomial in two real variables is stored as a mapping from exponent
pairs ``(i, j)`` (degree in x, degree in y) to ``fractions.Fraction``
coefficients.  Zero coefficients are never stored, so equality of the
mappings is equality of polynomials.  All arithmetic (product, partial
derivatives, antiderivative, restriction to a vertical line) is exact;
a cached floating-point copy of the coefficients is used only for fast
grid evaluation inside quadrature loops.

The exactness matters: vanishing orders along a line decide how points
of a characteristic set are classified, and those orders are read off
from the first exactly-nonzero coefficient of a restricted polynomial.
With binary floating point the cancellation of large integer
coefficients would produce junk orders.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

RationalLike = Union[int, str, Fraction]

#: Returned by vanishing_order when the restriction is identically zero.
INFINITE_ORDER = math.inf


def _as_fraction(c) -> Fraction:
    """Coerce ints, 'p/q' strings and Fractions to Fraction (floats rejected)."""
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"coefficient {c!r} is not exact (use int, Fraction or 'p/q' string)")


class BivariatePolynomial:
    """Immutable bivariate polynomial with exact rational coefficients."""

    __slots__ = ("_coeffs", "_float_cache")

    def __init__(self, coeffs: Mapping[tuple[int, int], RationalLike] | None = None):
        table: dict[tuple[int, int], Fraction] = {}
        if coeffs:
            for (i, j), c in coeffs.items():
                if i < 0 or j < 0:
                    raise ValueError(f"negative exponent in term ({i},{j})")
                f = _as_fraction(c)
                if f != 0:
                    table[(int(i), int(j))] = f
        object.__setattr__(self, "_coeffs", table)
        object.__setattr__(self, "_float_cache", None)

    def __setattr__(self, name, value):  # values are immutable after construction
        raise AttributeError("BivariatePolynomial is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls) -> "BivariatePolynomial":
        return cls({})

    @classmethod
    def constant(cls, c: RationalLike) -> "BivariatePolynomial":
        return cls({(0, 0): c})

    @classmethod
    def variable(cls, name: str) -> "BivariatePolynomial":
        if name == "x":
            return cls({(1, 0): 1})
        if name == "y":
            return cls({(0, 1): 1})
        raise ValueError("variable must be 'x' or 'y'")

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence]) -> "BivariatePolynomial":
        """Build from ``(i, j, coefficient)`` triples as they appear in configs.

        Repeated exponent pairs accumulate.  Coefficients may be ints or
        'p/q' strings, never floats.
        """
        acc: dict[tuple[int, int], Fraction] = {}
        for entry in triples:
            if len(entry) != 3:
                raise ValueError(f"term {entry!r} is not an (i, j, coefficient) triple")
            i, j, c = entry
            key = (int(i), int(j))
            acc[key] = acc.get(key, Fraction(0)) + _as_fraction(c)
        return cls(acc)

    @classmethod
    def product_of_factors(cls, factors: Iterable["BivariatePolynomial"]) -> "BivariatePolynomial":
        out = cls.constant(1)
        for f in factors:
            out = out * f
        return out

    # -- basic protocol ----------------------------------------------------

    @property
    def coeffs(self) -> Mapping[tuple[int, int], Fraction]:
        return dict(self._coeffs)

    def __bool__(self) -> bool:
        return bool(self._coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BivariatePolynomial):
            return NotImplemented
        return self._coeffs == other._coeffs

    def __hash__(self):
        return hash(frozenset(self._coeffs.items()))

    def __repr__(self) -> str:
        if not self._coeffs:
            return "0"
        parts = []
        for (i, j), c in sorted(self._coeffs.items()):
            mon = "".join([f"x^{i}" if i else "", f"y^{j}" if j else ""]) or "1"
            parts.append(f"{c}*{mon}")
        return " + ".join(parts)

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self._coeffs:
            return -1
        return max(i + j for (i, j) in self._coeffs)

    def degree_x(self) -> int:
        return max((i for (i, j) in self._coeffs), default=-1)

    def degree_y(self) -> int:
        return max((j for (i, j) in self._coeffs), default=-1)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: "BivariatePolynomial") -> "BivariatePolynomial":
        acc = dict(self._coeffs)
        for k, c in other._coeffs.items():
            acc[k] = acc.get(k, Fraction(0)) + c
        return BivariatePolynomial(acc)

    def __sub__(self, other: "BivariatePolynomial") -> "BivariatePolynomial":
        acc = dict(self._coeffs)
        for k, c in other._coeffs.items():
            acc[k] = acc.get(k, Fraction(0)) - c
        return BivariatePolynomial(acc)

    def __neg__(self) -> "BivariatePolynomial":
        return BivariatePolynomial({k: -c for k, c in self._coeffs.items()})

    def __mul__(self, other) -> "BivariatePolynomial":
        if isinstance(other, (int, Fraction)):
            return BivariatePolynomial({k: c * other for k, c in self._coeffs.items()})
        acc: dict[tuple[int, int], Fraction] = {}
        for (i1, j1), c1 in self._coeffs.items():
            for (i2, j2), c2 in other._coeffs.items():
                k = (i1 + i2, j1 + j2)
                acc[k] = acc.get(k, Fraction(0)) + c1 * c2
        return BivariatePolynomial(acc)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "BivariatePolynomial":
        if n < 0:
            raise ValueError("negative power")
        out = BivariatePolynomial.constant(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- calculus ----------------------------------------------------------

    def partial_x(self) -> "BivariatePolynomial":
        return BivariatePolynomial(
            {(i - 1, j): c * i for (i, j), c in self._coeffs.items() if i > 0}
        )

    def partial_y(self) -> "BivariatePolynomial":
        return BivariatePolynomial(
            {(i, j - 1): c * j for (i, j), c in self._coeffs.items() if j > 0}
        )

    def antiderivative_y(self) -> "BivariatePolynomial":
        """Antiderivative in y normalized so the result vanishes on y = 0."""
        return BivariatePolynomial(
            {(i, j + 1): c / (j + 1) for (i, j), c in self._coeffs.items()}
        )

    # -- evaluation --------------------------------------------------------

    def eval_exact(self, x, y) -> Fraction:
        """Exact value at a rational point (ints, Fractions; floats are
        converted to the dyadic rational they represent)."""
        xf = x if isinstance(x, Fraction) else Fraction(x)
        yf = y if isinstance(y, Fraction) else Fraction(y)
        total = Fraction(0)
        for (i, j), c in self._coeffs.items():
            total += c * xf**i * yf**j
        return total

    def _float_coeff_matrix(self) -> np.ndarray:
        cache = self._float_cache
        if cache is None:
            nx, ny = self.degree_x() + 1, self.degree_y() + 1
            cache = np.zeros((max(nx, 1), max(ny, 1)))
            for (i, j), c in self._coeffs.items():
                cache[i, j] = float(c)
            object.__setattr__(self, "_float_cache", cache)
        return cache

    def eval_float(self, x, y):
        """Horner-style float evaluation; accepts scalars or numpy arrays."""
        c = self._float_coeff_matrix()
        return np.polynomial.polynomial.polyval2d(np.asarray(x, dtype=float),
                                                  np.asarray(y, dtype=float), c)

    def restrict_to_vertical_line(self, x0, y0) -> list[Fraction]:
        """Exact coefficients c_m of p(x0, y0 + t) = sum_m c_m t^m."""
        x0f = x0 if isinstance(x0, Fraction) else Fraction(x0)
        y0f = y0 if isinstance(y0, Fraction) else Fraction(y0)
        # collapse x first: univariate in y
        uni: dict[int, Fraction] = {}
        for (i, j), c in self._coeffs.items():
            uni[j] = uni.get(j, Fraction(0)) + c * x0f**i
        deg = max(uni, default=0)
        out = [Fraction(0)] * (deg + 1)
        for j, a in uni.items():
            if a == 0:
                continue
            # shift y -> y0 + t by the binomial theorem
            for m in range(j + 1):
                out[m] += a * math.comb(j, m) * y0f ** (j - m)
        return out


def poly_mul(a: BivariatePolynomial, b: BivariatePolynomial) -> BivariatePolynomial:
    """Exact product a*b."""
    return a * b


def antiderivative_y(p: BivariatePolynomial) -> BivariatePolynomial:
    """Exact antiderivative q with dq/dy = p and q(x, 0) = 0."""
    return p.antiderivative_y()


def vanishing_order(p: BivariatePolynomial, at, direction: str = "y"):
    """Smallest m with nonzero m-th coefficient of p restricted to the line
    through ``at`` in the given axis direction; INFINITE_ORDER if the
    restriction is identically zero.

    Only the y direction is supported: it is the transversal variable of
    every chart this package works with.
    """
    if direction != "y":
        raise ValueError("only the y direction is supported")
    x0, y0 = at
    coeffs = p.restrict_to_vertical_line(x0, y0)
    for m, c in enumerate(coeffs):
        if c != 0:
            return m
    return INFINITE_ORDER
