"""Real gamma and beta functions.

The gamma function uses a Lanczos approximation (g = 7, nine coefficients)
for arguments >= 1/2 and the reflection formula below that, so negative
non-integer arguments are supported.
"""

import math

__all__ = ["gamma", "lgamma", "beta"]

_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
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
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# above this a + b the direct ratio gamma(a)gamma(b)/gamma(a+b) is routed
# through log-gamma to avoid overflow
_BETA_LOG_THRESHOLD = 30.0


def _lanczos_sum(z: float) -> float:
    acc = _LANCZOS_COEFFS[0]
    for i in range(1, len(_LANCZOS_COEFFS)):
        acc += _LANCZOS_COEFFS[i] / (z + i)
    return acc


def _sinpi(x: float) -> float:
    """sin(pi * x) with exact argument reduction."""
    r = x - 2.0 * round(0.5 * x)  # exact, r in [-1, 1]
    if r > 0.5:
        r = 1.0 - r
    elif r < -0.5:
        r = -1.0 - r
    return math.sin(math.pi * r)


def _is_pole(x: float) -> bool:
    return x <= 0.0 and x == math.floor(x)


def gamma(x: float) -> float:
    """Gamma function for real ``x`` away from the poles 0, -1, -2, ...

    Raises
    ------
    ValueError
        If ``x`` is a non-positive integer.
    """
    x = float(x)
    if math.isnan(x):
        return math.nan
    if _is_pole(x):
        raise ValueError(f"gamma is undefined at the pole x = {x:g}")
    if x < 0.5:
        return math.pi / (_sinpi(x) * gamma(1.0 - x))
    if x > 171.7:
        return math.inf
    z = x - 1.0
    t = z + _LANCZOS_G + 0.5
    # split the power so t**(z + 1/2) does not overflow before exp(-t) scales it
    half = t ** (0.5 * (z + 0.5))
    return _SQRT_2PI * ((half * math.exp(-t)) * half) * _lanczos_sum(z)


def lgamma(x: float) -> float:
    """Logarithm of ``|gamma(x)|``."""
    x = float(x)
    if _is_pole(x):
        raise ValueError(f"lgamma is undefined at the pole x = {x:g}")
    if x < 0.5:
        return math.log(math.pi / abs(_sinpi(x))) - lgamma(1.0 - x)
    z = x - 1.0
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * math.log(t) - t + math.log(_lanczos_sum(z))


def beta(a: float, b: float) -> float:
    """Euler's beta function B(a, b) = gamma(a) gamma(b) / gamma(a + b), a, b > 0."""
    a = float(a)
    b = float(b)
    if not (a > 0.0 and b > 0.0):
        raise ValueError(f"beta requires a > 0 and b > 0, got a = {a:g}, b = {b:g}")
    if a + b > _BETA_LOG_THRESHOLD:
        return math.exp(lgamma(a) + lgamma(b) - lgamma(a + b))
    # symmetric order so beta(a, b) == beta(b, a) bit for bit
    lo, hi = (a, b) if a <= b else (b, a)
    return gamma(lo) * gamma(hi) / gamma(lo + hi)
