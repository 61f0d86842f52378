"""Augmented LCP for earning-restricted equilibria and an exact Lemke solver.

Variable blocks, in order: r (n), p (m), q (n*m, row-major), beta (m).  Each
variable owns one constraint row ``A y - d z <= b`` and the pair is
complementary.  The tableau stores ``w + A y - d z = b`` with the slack
columns first, so the current inverse basis can be read off the slack
columns for the lexicographic ratio test.

Pivoting uses gmpy2 rationals when available and converts back to
``fractions.Fraction`` at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    InfeasibleEarning,
    InvariantViolation,
    IterationCapExceeded,
    NotGoodSolution,
    SecondaryRayReached,
)
from .instances import ErInstance
from .market import ErEquilibrium

try:  # pragma: no cover - exercised implicitly
    from gmpy2 import mpq as _Q

    def _to_fraction(v) -> Fraction:
        return Fraction(int(v.numerator), int(v.denominator))

except ImportError:  # pragma: no cover
    _Q = Fraction

    def _to_fraction(v) -> Fraction:
        return Fraction(v)


DEFAULT_MAX_PIVOTS = 10**6


class Unbounded(Exception):
    """The entering column has no positive entry: the pivot follows a ray."""


@dataclass
class LcpTableau:
    n: int
    m: int
    P: Fraction
    R: Fraction
    E: Fraction
    A: list[list[Fraction]]
    b: list[Fraction]
    d: list[Fraction]
    e: tuple[Fraction, ...] = ()
    c: tuple[Fraction, ...] = ()

    @property
    def size(self) -> int:
        return len(self.b)

    @property
    def num_variables(self) -> int:
        """LCP variables plus the artificial z."""
        return self.size + 1

    def r(self, i: int) -> int:
        return i

    def p(self, j: int) -> int:
        return self.n + j

    def q(self, i: int, j: int) -> int:
        return self.n + self.m + i * self.m + j

    def beta(self, j: int) -> int:
        return self.n + self.m + self.n * self.m + j

    def name(self, k: int) -> str:
        n, m = self.n, self.m
        if k < n:
            return f"r[{k}]"
        if k < n + m:
            return f"p[{k - n}]"
        if k < n + m + n * m:
            i, j = divmod(k - n - m, m)
            return f"q[{i},{j}]"
        return f"beta[{k - n - m - n * m}]"


@dataclass
class LemkeTrace:
    pivots: list[tuple[str, str, Fraction]] = field(default_factory=list)
    z_start: Fraction = Fraction(0)
    z_formula: Fraction = Fraction(0)
    reason: str = ""

    def to_json(self) -> dict:
        return {
            "z_start": str(self.z_start),
            "z_formula": str(self.z_formula),
            "reason": self.reason,
            "pivots": [{"enter": e, "leave": lv, "z": str(z)} for e, lv, z in self.pivots],
        }


@dataclass(frozen=True)
class LcpSolution:
    y: tuple[Fraction, ...]
    z: Fraction


def build_er_lcp(er: ErInstance) -> LcpTableau:
    if not er.feasible:
        raise InfeasibleEarning(f"sum(e) = {sum(er.e)} exceeds sum(c) = {sum(er.c)}")
    n, m = er.n, er.m
    flat = [v for row in er.d for v in row]
    d_min, d_max = min(flat), max(flat)
    P = d_max / d_min * max(er.c)
    R = P / d_min + 1
    E = sum(er.e)
    size = n + 2 * m + n * m
    zeros = [[Fraction(0)] * size for _ in range(size)]
    t = LcpTableau(n, m, P, R, E, zeros, [Fraction(0)] * size, [Fraction(0)] * size, er.e, er.c)
    A, b, dv = t.A, t.b, t.d
    for i in range(n):
        row = A[t.r(i)]
        for j in range(m):
            row[t.p(j)] = -er.e[i] / E
            row[t.beta(j)] = -er.e[i] / E
            row[t.q(i, j)] = Fraction(-1)
        b[t.r(i)] = -er.e[i] * m * P / E
        dv[t.r(i)] = Fraction(1)
    for j in range(m):
        row = A[t.p(j)]
        row[t.p(j)] = Fraction(1)
        row[t.beta(j)] = Fraction(1)
        for i in range(n):
            row[t.q(i, j)] = Fraction(1)
        b[t.p(j)] = P
    for i in range(n):
        for j in range(m):
            k = t.q(i, j)
            A[k][t.r(i)] = er.d[i][j]
            A[k][t.p(j)] = Fraction(-1)
            b[k] = er.d[i][j] * R - P
    for j in range(m):
        row = A[t.beta(j)]
        share = er.c[j] / E
        for k in range(m):
            row[t.p(k)] = share
            row[t.beta(k)] = share
        row[t.p(j)] -= 1
        row[t.beta(j)] -= 1
        b[t.beta(j)] = -P + er.c[j] * m * P / E
        dv[t.beta(j)] = Fraction(1)
    return t


def lexicographic_ratio_test(rows: list[list], col: int, rhs: int, inv_cols: range, prefer: int | None = None) -> int:
    """Row minimising (rhs, B^-1 row) / entry over rows with a positive entry.

    ``prefer`` names a row that wins any tie on the plain ratio (used to let z
    leave as soon as it can).  Raises Unbounded when no entry is positive.
    """
    cands = [k for k, row in enumerate(rows) if row[col] > 0]
    if not cands:
        raise Unbounded(col)
    best = min(rows[k][rhs] / rows[k][col] for k in cands)
    cands = [k for k in cands if rows[k][rhs] / rows[k][col] == best]
    if prefer is not None and prefer in cands:
        return prefer
    for c in inv_cols:
        if len(cands) == 1:
            break
        vals = {k: rows[k][c] / rows[k][col] for k in cands}
        low = min(vals.values())
        cands = [k for k in cands if vals[k] == low]
    if len(cands) != 1:  # pragma: no cover - B^-1 rows are linearly independent
        raise InvariantViolation("lexicographic ratio test left a tie")
    return cands[0]


def _pivot(T: list[list], r: int, c: int) -> None:
    prow = T[r]
    piv = prow[c]
    nz = [idx for idx, v in enumerate(prow) if v != 0]
    for idx in nz:
        prow[idx] = prow[idx] / piv
    for k, row in enumerate(T):
        if k == r:
            continue
        f = row[c]
        if f == 0:
            continue
        for idx in nz:
            row[idx] = row[idx] - f * prow[idx]


def lemke_solve(t: LcpTableau, max_pivots: int = DEFAULT_MAX_PIVOTS) -> tuple[LcpSolution, LemkeTrace]:
    """Complementary pivoting from the primary ray until z leaves the basis."""
    N = t.size
    Z = 2 * N  # column of z; slacks are 0..N-1, LCP variables N..2N-1
    RHS = 2 * N + 1
    T: list[list] = []
    for k in range(N):
        row = [_Q(0)] * (2 * N + 2)
        row[k] = _Q(1)
        for l, v in enumerate(t.A[k]):
            if v:
                row[N + l] = _Q(v.numerator, v.denominator)
        row[Z] = _Q(-t.d[k].numerator, t.d[k].denominator)
        row[RHS] = _Q(t.b[k].numerator, t.b[k].denominator)
        T.append(row)
    basis = list(range(N))

    def label(var: int) -> str:
        if var == Z:
            return "z"
        return ("w:" if var < N else "") + t.name(var % N)

    trace = LemkeTrace()
    E, m, P = t.E, t.m, t.P
    # starting z as printed for this LCP; the computed start may differ
    trace.z_formula = max(
        [e_i * m * P / E for e_i in t.e] + [c_j * m * P / E - P for c_j in t.c]
    )

    # primary ray: z enters, the lexicographically most violated row leaves
    zrows = [k for k in range(N) if t.d[k] > 0]
    if not zrows or all(t.b[k] >= 0 for k in range(N)):
        trace.reason = "Solved(z=0)"
        y = [Fraction(0)] * N
        return LcpSolution(tuple(y), Fraction(0)), trace
    r = max(zrows, key=lambda k: (-t.b[k], k))
    _pivot(T, r, Z)
    trace.z_start = _to_fraction(T[r][RHS])
    leaving = basis[r]
    basis[r] = Z
    trace.pivots.append(("z", label(leaving), trace.z_start))
    seen = {frozenset(basis)}
    P_q, R_q = _Q(t.P.numerator, t.P.denominator), _Q(t.R.numerator, t.R.denominator)
    _check_vertex(t, T, basis, N, RHS, P_q, R_q)

    pivots = 1
    while True:
        entering = leaving + N if leaving < N else leaving - N
        z_row = basis.index(Z)
        try:
            r = lexicographic_ratio_test(T, entering, RHS, range(N), prefer=z_row)
        except Unbounded:
            trace.reason = "SecondaryRay"
            raise SecondaryRayReached(f"secondary ray after {pivots} pivots entering {label(entering)}") from None
        if pivots >= max_pivots:
            trace.reason = "IterationCap"
            raise IterationCapExceeded(f"no solution within {max_pivots} pivots")
        _pivot(T, r, entering)
        leaving = basis[r]
        basis[r] = entering
        pivots += 1
        z_now = T[basis.index(Z)][RHS] if Z in basis else _Q(0)
        trace.pivots.append((label(entering), label(leaving), _to_fraction(z_now)))
        sig = frozenset(basis)
        if sig in seen:
            raise InvariantViolation(f"basis repeated at pivot {pivots}")
        seen.add(sig)
        _check_vertex(t, T, basis, N, RHS, P_q, R_q)
        if leaving == Z:
            break

    y = [Fraction(0)] * N
    for k, var in enumerate(basis):
        if N <= var < 2 * N:
            y[var - N] = _to_fraction(T[k][RHS])
    trace.reason = "Solved(z=0)"
    return LcpSolution(tuple(y), Fraction(0)), trace


def _check_vertex(t: LcpTableau, T, basis, N: int, RHS: int, P, R) -> None:
    val = {}
    for k, var in enumerate(basis):
        if N <= var < 2 * N:
            val[var - N] = T[k][RHS]
    for j in range(t.m):
        if val.get(t.p(j), 0) + val.get(t.beta(j), 0) >= P:
            raise InvariantViolation(f"vertex not good: p[{j}] + beta[{j}] reached P")
    for i in range(t.n):
        if val.get(t.r(i), 0) >= R:
            raise InvariantViolation(f"vertex not good: r[{i}] reached R")


def is_good(t: LcpTableau, sol: LcpSolution) -> bool:
    y = sol.y
    return (
        sol.z == 0
        and all(y[t.p(j)] + y[t.beta(j)] < t.P for j in range(t.m))
        and all(y[t.r(i)] < t.R for i in range(t.n))
    )


def extract_equilibrium(sol: LcpSolution, er: ErInstance, t: LcpTableau | None = None) -> ErEquilibrium:
    """Map a good z = 0 solution back to payments, earnings and fractions."""
    t = t or build_er_lcp(er)
    if not is_good(t, sol):
        raise NotGoodSolution("solution is not good or has z > 0")
    y = sol.y
    n, m = er.n, er.m
    Q = sum((t.P - y[t.p(j)] - y[t.beta(j)] for j in range(m)), Fraction(0)) / t.E
    p = [(t.P - y[t.p(j)]) / Q for j in range(m)]
    q = [[y[t.q(i, j)] / Q for j in range(m)] for i in range(n)]
    return ErEquilibrium.from_earnings(er.base, p, q)


def encode_equilibrium(eq: ErEquilibrium, er: ErInstance, t: LcpTableau, scale: Fraction) -> LcpSolution:
    """Inverse of extract_equilibrium for a chosen scale Q > 0."""
    size = t.size
    y = [Fraction(0)] * size
    for j in range(t.m):
        y[t.p(j)] = t.P - scale * eq.p[j]
        y[t.beta(j)] = scale * max(Fraction(0), eq.p[j] - er.c[j])
    for i in range(t.n):
        y[t.r(i)] = t.R - scale / eq.alpha[i]
        for j in range(t.m):
            y[t.q(i, j)] = scale * eq.q[i][j]
    return LcpSolution(tuple(y), Fraction(0))


def solve_er(er: ErInstance, max_pivots: int = DEFAULT_MAX_PIVOTS) -> tuple[ErEquilibrium, LemkeTrace]:
    t = build_er_lcp(er)
    sol, trace = lemke_solve(t, max_pivots)
    return extract_equilibrium(sol, er, t), trace
