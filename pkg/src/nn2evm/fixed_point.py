"""Signed 59.18-decimal fixed-point arithmetic.

Values are Python integers ("raw") with an implied scale of ``10**18``, the
same convention the generated contracts use for ``int256`` parameters.
Multiplication truncates toward zero, matching the PRBMath ``SD59x18``
``mul`` and Solidity's signed integer division.

The hot paths (:func:`mul_raw`, :func:`add_raw`) work directly on ints; the
:class:`FP` wrapper is for boundary code and tests.
"""
from __future__ import annotations

import numbers
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Context, Decimal

from .errors import FixedPointOverflow, PrecisionError

DECIMALS = 18
SCALE = 10**DECIMALS
# |raw| < 2**255
MAX_RAW = 2**255 - 1
MIN_RAW = -MAX_RAW

_DECIMAL_RE = re.compile(r"^([+-]?)(\d+)(?:\.(\d+))?$")
# enough digits for any representable value at full scale
_CTX = Context(prec=120)


def check_raw(raw: int) -> int:
    if raw > MAX_RAW or raw < MIN_RAW:
        raise FixedPointOverflow(f"raw value {raw} outside signed 256-bit fixed-point range")
    return raw


def add_raw(a: int, b: int) -> int:
    return check_raw(a + b)


def sub_raw(a: int, b: int) -> int:
    return check_raw(a - b)


def mul_raw(a: int, b: int) -> int:
    """Full-width product scaled back by 10**18, truncated toward zero."""
    p = a * b
    return check_raw(-(-p // SCALE) if p < 0 else p // SCALE)


@dataclass(frozen=True, order=True)
class FP:
    """A fixed-point value; ``raw / 10**18`` is the number represented."""

    raw: int

    def __post_init__(self):
        if not isinstance(self.raw, int) or isinstance(self.raw, bool):
            raise TypeError(f"raw must be int, got {type(self.raw).__name__}")
        check_raw(self.raw)

    @classmethod
    def from_decimal(cls, s: str) -> FP:
        return fp_from_decimal(s)

    def __add__(self, other: FP) -> FP:
        if not isinstance(other, FP):
            return NotImplemented
        return fp_add(self, other)

    def __sub__(self, other: FP) -> FP:
        if not isinstance(other, FP):
            return NotImplemented
        return fp_sub(self, other)

    def __mul__(self, other: FP) -> FP:
        if not isinstance(other, FP):
            return NotImplemented
        return fp_mul(self, other)

    def __neg__(self) -> FP:
        return FP(-self.raw)

    def __float__(self) -> float:
        # exact int/int division rounds correctly to the nearest double
        return self.raw / SCALE

    def __str__(self) -> str:
        return fp_to_decimal(self)

    def __repr__(self) -> str:
        return f"FP({fp_to_decimal(self)!r})"

    def to_decimal(self) -> Decimal:
        return _CTX.divide(Decimal(self.raw), Decimal(SCALE))


ZERO = FP(0)
ONE = FP(SCALE)


def fp_from_decimal(s: str) -> FP:
    """Parse a plain decimal string (``"-1.25"``) exactly.

    Raises :class:`PrecisionError` for more than 18 fractional digits and
    :class:`FixedPointOverflow` when the value is out of range.
    """
    m = _DECIMAL_RE.match(s.strip())
    if m is None:
        raise ValueError(f"not a decimal string: {s!r}")
    sign, whole, frac = m.group(1), m.group(2), m.group(3) or ""
    if len(frac) > DECIMALS:
        raise PrecisionError(f"{s!r} has {len(frac)} fractional digits; at most {DECIMALS} allowed")
    raw = int(whole) * SCALE + int(frac.ljust(DECIMALS, "0") or "0")
    return FP(check_raw(-raw if sign == "-" else raw))


def fp_to_decimal(x: FP) -> str:
    """Canonical decimal string: no trailing fractional zeros, integers without a point."""
    raw = x.raw
    sign = "-" if raw < 0 else ""
    whole, frac = divmod(abs(raw), SCALE)
    if frac == 0:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{str(frac).rjust(DECIMALS, '0').rstrip('0')}"


def fp_add(a: FP, b: FP) -> FP:
    return FP(add_raw(a.raw, b.raw))


def fp_sub(a: FP, b: FP) -> FP:
    return FP(sub_raw(a.raw, b.raw))


def fp_mul(a: FP, b: FP) -> FP:
    return FP(mul_raw(a.raw, b.raw))


def _as_decimal(x) -> Decimal:
    if isinstance(x, FP):
        return x.to_decimal()
    if isinstance(x, Decimal):
        return x
    if isinstance(x, str):
        return Decimal(x)
    if isinstance(x, numbers.Integral):
        return Decimal(int(x))
    # Decimal(float) is the exact binary value, so rounding sees no hidden error
    return Decimal(float(x))


def quantize_raw(x, d: int) -> int:
    """Raw value of ``x`` rounded half-away-from-zero to ``d`` decimals."""
    if isinstance(d, bool) or not isinstance(d, int) or not 0 <= d <= DECIMALS:
        raise PrecisionError(f"precision must be an integer in 0..{DECIMALS}, got {d!r}")
    v = _as_decimal(x)
    if not v.is_finite():
        raise ValueError(f"cannot quantize non-finite value {x!r}")
    if v.adjusted() > 60:
        raise FixedPointOverflow(f"{x!r} is outside the fixed-point range")
    q = v.quantize(Decimal(1).scaleb(-d), rounding=ROUND_HALF_UP, context=_CTX)
    return check_raw(int(q.scaleb(DECIMALS, context=_CTX)))


def quantize(x, d: int) -> FP:
    """Round ``x`` to ``d`` decimal places and store it at 18-decimal scale.

    The raw value of the result is always a multiple of ``10**(18 - d)``.
    Accepts floats, ints, decimal strings, :class:`~decimal.Decimal` and
    :class:`FP`; floats are rounded from their exact binary value.
    """
    return FP(quantize_raw(x, d))
