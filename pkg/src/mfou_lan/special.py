"""Gamma, digamma and trigamma for positive real arguments.

Gamma uses the g=7, nine-term Lanczos approximation; digamma and trigamma
shift the argument above ``_SHIFT`` by recurrence and finish with the
Bernoulli asymptotic series.
"""

import math

from .exceptions import DomainError

_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

_SHIFT = 10.0

# B_{2k}/(2k) for k = 1..7
_DIGAMMA_SERIES = (1 / 12, -1 / 120, 1 / 252, -1 / 240, 1 / 132, -691 / 32760, 1 / 12)
# B_{2k} for k = 1..7
_TRIGAMMA_SERIES = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)


def _check(x):
    x = float(x)
    if not (x > 0 and math.isfinite(x)):
        raise DomainError(f"special functions need a positive finite argument, got {x}")
    return x


def gamma(x: float) -> float:
    x = _check(x)
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))
    x -= 1.0
    s = _LANCZOS[0]
    for i, c in enumerate(_LANCZOS[1:], start=1):
        s += c / (x + i)
    t = x + _LANCZOS_G + 0.5
    half = t ** (0.5 * (x + 0.5))
    return math.sqrt(2.0 * math.pi) * half * (half * math.exp(-t)) * s


def digamma(x: float) -> float:
    x = _check(x)
    acc = 0.0
    while x < _SHIFT:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series, p = 0.0, inv2
    for c in _DIGAMMA_SERIES:
        series += c * p
        p *= inv2
    return acc + math.log(x) - 0.5 / x - series


def trigamma(x: float) -> float:
    x = _check(x)
    acc = 0.0
    while x < _SHIFT:
        acc += 1.0 / (x * x)
        x += 1.0
    inv2 = 1.0 / (x * x)
    series, p = 0.0, inv2 / x
    for c in _TRIGAMMA_SERIES:
        series += c * p
        p *= inv2
    return acc + 1.0 / x + 0.5 * inv2 + series


def special_functions(x: float) -> tuple:
    """Return ``(gamma(x), digamma(x), trigamma(x))``."""
    return gamma(x), digamma(x), trigamma(x)
