"""Multivariate polynomials truncated at a fixed total degree."""

from __future__ import annotations

from collections import defaultdict
from itertools import product
from typing import Iterable, Mapping, Sequence

Monomial = tuple[int, ...]


class TruncatedPoly:
    """Polynomial in ``nvars`` variables with every term of degree > ``order`` dropped.

    Coefficients are kept in a ``{exponent tuple: value}`` map; zero terms
    are not stored.
    """

    __slots__ = ("nvars", "order", "coeffs")

    def __init__(self, coeffs: Mapping[Monomial, float], nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        self.coeffs = {
            m: c for m, c in coeffs.items() if c != 0 and sum(m) <= order
        }
        for m in self.coeffs:
            if len(m) != nvars:
                raise ValueError(f"monomial {m} does not have {nvars} exponents")

    @classmethod
    def variable(cls, index: int, nvars: int, order: int) -> "TruncatedPoly":
        mono = tuple(1 if k == index else 0 for k in range(nvars))
        return cls({mono: 1.0}, nvars, order)

    @classmethod
    def constant(cls, value: float, nvars: int, order: int) -> "TruncatedPoly":
        return cls({(0,) * nvars: value}, nvars, order)

    @classmethod
    def zero(cls, nvars: int, order: int) -> "TruncatedPoly":
        return cls({}, nvars, order)

    def _check(self, other: "TruncatedPoly"):
        if other.nvars != self.nvars:
            raise ValueError("variable count mismatch")

    def __add__(self, other):
        if not isinstance(other, TruncatedPoly):
            other = TruncatedPoly.constant(other, self.nvars, self.order)
        self._check(other)
        out = defaultdict(float, self.coeffs)
        for m, c in other.coeffs.items():
            out[m] += c
        return TruncatedPoly(out, self.nvars, min(self.order, other.order))

    __radd__ = __add__

    def __neg__(self):
        return TruncatedPoly({m: -c for m, c in self.coeffs.items()}, self.nvars, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TruncatedPoly):
            return TruncatedPoly({m: c * other for m, c in self.coeffs.items()}, self.nvars, self.order)
        self._check(other)
        order = min(self.order, other.order)
        out: dict[Monomial, float] = defaultdict(float)
        for (ma, ca), (mb, cb) in product(self.coeffs.items(), other.coeffs.items()):
            if sum(ma) + sum(mb) > order:
                continue
            out[tuple(a + b for a, b in zip(ma, mb))] += ca * cb
        return TruncatedPoly(out, self.nvars, order)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are not supported")
        result = TruncatedPoly.constant(1.0, self.nvars, self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def coeff(self, monomial: Monomial) -> float:
        return self.coeffs.get(tuple(monomial), 0.0)

    def degree_part(self, degree: int) -> "TruncatedPoly":
        return TruncatedPoly(
            {m: c for m, c in self.coeffs.items() if sum(m) == degree}, self.nvars, self.order
        )

    def truncate(self, order: int) -> "TruncatedPoly":
        return TruncatedPoly(self.coeffs, self.nvars, min(order, self.order))

    def abs(self) -> "TruncatedPoly":
        """Polynomial with every coefficient replaced by its magnitude."""
        return TruncatedPoly({m: abs(c) for m, c in self.coeffs.items()}, self.nvars, self.order)

    def compose(self, subs: Sequence["TruncatedPoly"]) -> "TruncatedPoly":
        """Substitute ``subs[k]`` for variable ``k``.

        The substituted polynomials may live in a different number of
        variables; the result takes their variable count and the smaller of
        the two truncation orders.
        """
        if len(subs) != self.nvars:
            raise ValueError(f"expected {self.nvars} substitutions, got {len(subs)}")
        nvars = subs[0].nvars
        order = min(s.order for s in subs)
        powers: list[dict[int, TruncatedPoly]] = [{} for _ in subs]
        result = TruncatedPoly.zero(nvars, order)
        for mono, c in self.coeffs.items():
            term = TruncatedPoly.constant(c, nvars, order)
            for k, e in enumerate(mono):
                if e:
                    if e not in powers[k]:
                        powers[k][e] = subs[k] ** e
                    term = term * powers[k][e]
            result = result + term
        return result

    def __call__(self, *values: float) -> float:
        total = 0.0
        for m, c in self.coeffs.items():
            term = c
            for v, e in zip(values, m):
                term *= v ** e
            total += term
        return total

    def monomials(self) -> Iterable[Monomial]:
        return sorted(self.coeffs, key=lambda m: (sum(m), tuple(-e for e in m)))

    def __repr__(self):
        terms = ", ".join(f"{m}: {self.coeffs[m]:.6g}" for m in self.monomials())
        return f"TruncatedPoly({{{terms}}}, nvars={self.nvars}, order={self.order})"


def linear_map(matrix, polys: Sequence[TruncatedPoly]) -> list[TruncatedPoly]:
    """Apply a constant matrix to a vector of polynomials."""
    out = []
    for row in matrix:
        acc = TruncatedPoly.zero(polys[0].nvars, polys[0].order)
        for a, p in zip(row, polys):
            if a != 0:
                acc = acc + p * float(a)
        out.append(acc)
    return out
