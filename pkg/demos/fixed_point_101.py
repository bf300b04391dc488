"""
Fixed-point arithmetic in 18 decimals
=====================================

The EVM has no floating point. Every weight, input and activation is an
integer ``raw`` standing for ``raw / 10**18``.
"""

from nn2evm.fixed_point import FP, fp_add, fp_from_decimal, fp_mul, fp_to_decimal, quantize

# a value is just its scaled integer
third = fp_from_decimal("0.333333333333333333")
print(third.raw)

# addition is exact
print(fp_to_decimal(fp_add(third, third)))

# multiplication scales back by 10**18 and truncates toward zero,
# so -1/3 * 0.6 gives -0.199999999999999999 and not -0.2
print(fp_to_decimal(fp_mul(FP(-third.raw), fp_from_decimal("0.6"))))

# results that leave the signed 256-bit range raise instead of wrapping
try:
    fp_mul(FP(2**200), FP(2**200))
except OverflowError as exc:
    print("overflow:", exc)

# quantize keeps d decimals of a float weight (half away from zero);
# at 18 decimals the binary float's own error shows through
for d in (18, 4, 2, 0):
    print(d, fp_to_decimal(quantize(0.123456789, d)))
