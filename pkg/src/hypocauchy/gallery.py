"""Ready-made structures shared by the demo scripts and the test suite.

The centerpiece is a polynomial density whose zero set exhibits every
stratum kind at once: an isolated point, three crossing/self-singular
points, four line segments, three parabola arcs, and a circle.  The
density is kept in factored form because the factorization is what the
stratification code pattern-matches on.
"""

from __future__ import annotations

from .polyalg import BivariatePolynomial
from .structures import PolynomialIntegral, Rectangle


def stratified_density_factors() -> list[BivariatePolynomial]:
    """Factors of P(x,y) = y^2 (x^2+y^2) (y-1+x^2)^6 (x^2+(y+1)^2) (x^2+(y-3)^2-1)^2.

    Zero sets of the factors: the x axis (doubled), the origin, the
    parabola y = 1 - x^2 (to the 6th power), the point (0,-1), and the
    circle of radius 1 about (0,3) (squared).
    """
    x = BivariatePolynomial.variable("x")
    y = BivariatePolynomial.variable("y")
    one = BivariatePolynomial.constant(1)
    return [
        y**2,
        x**2 + y**2,
        (y - one + x**2) ** 6,
        x**2 + (y + one) ** 2,
        (x**2 + (y - 3 * one) ** 2 - one) ** 2,
    ]


def stratified_density() -> BivariatePolynomial:
    """The expanded product of stratified_density_factors()."""
    return BivariatePolynomial.product_of_factors(stratified_density_factors())


def stratified_first_integral(region: Rectangle | None = None) -> PolynomialIntegral:
    """Z = x + i Q with Q the y-antiderivative of the stratified density."""
    if region is None:
        region = Rectangle(-4.0, 4.0, -4.0, 4.0)
    return PolynomialIntegral.from_density(stratified_density(), region)
