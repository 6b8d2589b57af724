"""Exact admissibility arithmetic for Strichartz exponent pairs.

Exponents are extended rationals in [1, inf]; internally everything works with
reciprocals 1/q, 1/r as ``Fraction`` (inf <-> 0), so no floating point enters.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

INF = "inf"
FAMILIES = ("S_admissible", "B_admissible", "Lambda_s", "dual_Lambda_s")
_ALIASES = {
    "S": "S_admissible", "s": "S_admissible", "S_admissible": "S_admissible",
    "B": "B_admissible", "b": "B_admissible", "B_admissible": "B_admissible",
    "Lambda_s": "Lambda_s", "Lambda": "Lambda_s", "L": "Lambda_s",
    "dual_Lambda_s": "dual_Lambda_s", "dual": "dual_Lambda_s",
}

Exponent = Union[Fraction, str]


class NoSolution(ValueError):
    pass


def parse_exponent(text) -> Exponent:
    """'inf', '∞', integers and 'a/b' rationals; floats are rejected."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    s = str(text).strip()
    if s.lower() in ("inf", "infinity", "∞", "+inf"):
        return INF
    if any(c in s for c in ".eE"):
        raise ValueError(f"exponent {s!r} must be an integer, a/b rational or inf")
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"malformed exponent {s!r}") from exc


def recip(x: Exponent) -> Fraction:
    return Fraction(0) if x == INF else 1 / Fraction(x)


def from_recip(a: Fraction) -> Exponent:
    return INF if a == 0 else 1 / a


def format_exponent(x: Exponent) -> str:
    return "inf" if x == INF else str(x)


def canonical_family(name: str) -> str:
    try:
        return _ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; choose from {FAMILIES}") from None


@dataclass(frozen=True)
class PairSpec:
    q: Exponent
    r: Exponent
    family: str
    s: Fraction = Fraction(0)

    def __str__(self):
        tag = self.family if self.family in ("S_admissible", "B_admissible") \
            else f"{self.family}(s={self.s})"
        return f"(q, r) = ({format_exponent(self.q)}, {format_exponent(self.r)}) in {tag}"

    def to_dict(self) -> dict:
        return {"q": format_exponent(self.q), "r": format_exponent(self.r),
                "family": self.family, "s": str(self.s)}


def _constraints(N: int, family: str, s: Fraction):
    """(coefficient of 1/q, right-hand side, 1/r interval, 1/q interval, excluded)."""
    half = Fraction(1, 2)
    if family == "S_admissible":
        return 2, Fraction(N, 2), (Fraction(0), half), (Fraction(0), half), \
            (half, Fraction(0), 2)
    if family == "B_admissible":
        return 4, Fraction(N, 2), (Fraction(0), half), (Fraction(0), half), \
            (half, Fraction(0), 4)
    if family == "Lambda_s":
        # 2N/(N-2s) <= r <= 2N/(N-4); for N <= 4 the upper end is inf.
        lo_b = Fraction(N - 4, 2 * N) if N > 4 else Fraction(0)
        hi_b = Fraction(1, 2) - s / N  # (N - 2s) / (2N)
        return 4, Fraction(N, 2) - s, (lo_b, hi_b), (Fraction(0), half), None
    raise ValueError(family)


def _check_direct(N: int, a: Fraction, b: Fraction, family: str, s: Fraction) -> bool:
    coef, rhs, (blo, bhi), (alo, ahi), excluded = _constraints(N, family, s)
    if not (alo <= a <= ahi and blo <= b <= bhi):
        return False
    if excluded is not None and (a, b, N) == excluded:
        return False
    return coef * a + N * b == rhs


def pair_check(N: int, q, r, family: str, s=0) -> bool:
    """Exact membership of (q, r) in the named family."""
    family = canonical_family(family)
    s = Fraction(s)
    a, b = recip(parse_exponent(q)), recip(parse_exponent(r))
    if family == "dual_Lambda_s":
        # (q', r') dual admissible iff its conjugate pair lies in Lambda_{-s}
        return _check_direct(N, 1 - a, 1 - b, "Lambda_s", -s)
    if family == "Lambda_s" and not (0 <= s < 2):
        return False
    return _check_direct(N, a, b, family, s)


def excluded_endpoint(N: int, q, r, family: str) -> bool:
    family = canonical_family(family)
    a, b = recip(parse_exponent(q)), recip(parse_exponent(r))
    if family == "B_admissible":
        return (a, b, N) == (Fraction(1, 2), 0, 4)
    if family == "S_admissible":
        return (a, b, N) == (Fraction(1, 2), 0, 2)
    return False


def pair_solve(N: int, family: str, s=0, q=None, r=None) -> PairSpec:
    """Solve the defining relation for the missing exponent; exactly one of q, r given."""
    family = canonical_family(family)
    s = Fraction(s)
    if (q is None) == (r is None):
        raise ValueError("give exactly one of q or r")
    dual = family == "dual_Lambda_s"
    base = "Lambda_s" if dual else family
    s_eff = -s if dual else s
    if base == "Lambda_s" and not dual and not (0 <= s < 2):
        raise NoSolution(f"Lambda_s needs 0 <= s < 2, got s = {s}")
    coef, rhs, _, _, _ = _constraints(N, base, s_eff)
    if q is not None:
        a = recip(parse_exponent(q))
        a_base = 1 - a if dual else a
        b_base = (rhs - coef * a_base) / N
        b = 1 - b_base if dual else b_base
    else:
        b = recip(parse_exponent(r))
        b_base = 1 - b if dual else b
        a_base = (rhs - N * b_base) / coef
        a = 1 - a_base if dual else a_base
    if a < 0 or b < 0:
        raise NoSolution("no solution in range")
    spec = PairSpec(from_recip(a), from_recip(b), family, s)
    if not pair_check(N, spec.q, spec.r, family, s):
        if excluded_endpoint(N, spec.q, spec.r, family):
            raise NoSolution(f"excluded endpoint (q, r, N) = "
                             f"({format_exponent(spec.q)}, {format_exponent(spec.r)}, {N})")
        raise NoSolution("no solution in range")
    return spec


def pair_report(N: int, family: str, s=0, q=None, r=None) -> dict:
    """Structured result for the CLI: verify when both exponents are given, else solve."""
    family = canonical_family(family)
    out: dict = {"N": N, "family": family, "s": str(Fraction(s))}
    if q is not None and r is not None:
        ok = pair_check(N, q, r, family, s)
        out.update(q=format_exponent(parse_exponent(q)), r=format_exponent(parse_exponent(r)),
                   admissible=ok)
        if not ok and excluded_endpoint(N, q, r, family):
            out["reason"] = f"excluded endpoint (q,r,N) = (2,inf,{N})"
        return out
    try:
        spec: Optional[PairSpec] = pair_solve(N, family, s, q=q, r=r)
    except NoSolution as exc:
        out.update(admissible=False, reason=str(exc))
        return out
    out.update(spec.to_dict(), admissible=True)
    return out
