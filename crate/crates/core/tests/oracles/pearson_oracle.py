"""High-precision reference for the Pearson fixture.

rho from exact rational arithmetic; the two-sided p-value by two routes:
the regularized incomplete beta and direct integration of the Student t
density. Prints values to 20 significant digits.
"""
import sys
from fractions import Fraction

import mpmath as mp

mp.mp.dps = 50

path = sys.argv[1]
rows = [l.split("\t") for l in open(path).read().split("\n")[1:] if l.strip()]
x = [Fraction(a) for a, _ in rows]
y = [Fraction(b) for _, b in rows]
n = len(x)
mx, my = sum(x) / n, sum(y) / n
sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
sxx = sum((a - mx) ** 2 for a in x)
syy = sum((b - my) ** 2 for b in y)
rho = mp.mpf(sxy.numerator) / sxy.denominator / mp.sqrt(mp.mpf(sxx.numerator) / sxx.denominator * mp.mpf(syy.numerator) / syy.denominator)

df = n - 2
p_beta = mp.betainc(mp.mpf(df) / 2, mp.mpf(1) / 2, 0, 1 - rho**2, regularized=True)
t = abs(rho) * mp.sqrt(df / (1 - rho**2))
dens = lambda u: mp.gamma((df + 1) / mp.mpf(2)) / (mp.sqrt(df * mp.pi) * mp.gamma(df / mp.mpf(2))) * (1 + u**2 / df) ** (-(df + 1) / mp.mpf(2))
p_quad = 2 * mp.quad(dens, [t, mp.inf])
assert abs(p_beta - p_quad) < mp.mpf(10) ** -30

print("n", n)
print("rho", mp.nstr(rho, 20))
print("p", mp.nstr(p_beta, 20))
