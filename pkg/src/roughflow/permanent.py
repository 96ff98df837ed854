"""Permanents of increment tridiagonals and their polynomial expansion.

The matrix built from negative powers of consecutive time increments is
tridiagonal, so its permanent obeys a two-term scalar recursion; the
same recursion, read over formal variables, expands the permanent as a
polynomial with small positive integer coefficients and tightly bounded
degrees.  Those bounds feed a Gamma-function envelope for the m-fold
singular simplex integral checked at the bottom of this module.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import (ParameterError, ResolutionError, SingularityError,
                     SizeError)

MAX_BRUTE = 10
MAX_EXPAND = 14
MAX_BOUNDS = 12
MAX_SIMPLEX = 6


@dataclass(frozen=True)
class TridiagSpec:
    """Strictly increasing positive times plus a Hurst exponent.

    With x_1 = s_1^{-2H} and x_j = (s_j - s_{j-1})^{-2H}, the matrix is
    tridiagonal: diagonal x_1, x_2 + x_1, ..., x_m + x_{m-1}, and
    off-diagonal -x_{j-1} coupling rows j-1 and j.  Coincident times
    would make an increment power infinite, so they are refused here
    rather than surfacing as overflow later.
    """
    s: np.ndarray
    hurst: float

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        object.__setattr__(self, "s", s)
        if s.ndim != 1 or s.size < 1:
            raise ParameterError("s must be a non-empty 1-D array")
        if not 0.0 < self.hurst < 0.5:
            raise ParameterError(f"hurst must be in (0, 1/2), got {self.hurst}")
        if np.any(np.diff(np.concatenate(([0.0], s))) <= 0.0):
            raise SingularityError(
                "time points must be positive and strictly increasing; "
                "a zero increment makes a matrix entry infinite")

    @property
    def m(self) -> int:
        return int(self.s.size)

    def powers(self) -> np.ndarray:
        """x_j = (s_j - s_{j-1})^{-2H}, with s_0 = 0."""
        incs = np.diff(np.concatenate(([0.0], self.s)))
        return incs ** (-2.0 * self.hurst)

    def matrix(self) -> np.ndarray:
        x = self.powers()
        mat = np.zeros((self.m, self.m))
        mat[0, 0] = x[0]
        for j in range(1, self.m):
            mat[j, j] = x[j] + x[j - 1]
            mat[j, j - 1] = mat[j - 1, j] = -x[j - 1]
        return mat


def f_m_recursive(spec: TridiagSpec) -> float:
    """Permanent of spec.matrix() in O(m) scalar operations.

    Expanding the permanent along the last row leaves the same shape one
    and two sizes down: f_j = (x_j + x_{j-1}) f_{j-1} + x_{j-1}^2 f_{j-2}.
    """
    x = spec.powers()
    if spec.m == 1:
        return float(x[0])
    f_prev2 = x[0]
    f_prev = x[1] * x[0] + 2.0 * x[0] ** 2
    for j in range(2, spec.m):
        f_prev2, f_prev = f_prev, ((x[j] + x[j - 1]) * f_prev
                                   + x[j - 1] ** 2 * f_prev2)
    return float(f_prev)


def brute_permanent(matrix) -> float:
    """Exact permanent by inclusion-exclusion over column subsets."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"need a square matrix, got shape {a.shape}")
    m = a.shape[0]
    if m > MAX_BRUTE:
        raise SizeError(f"brute permanent is limited to m <= {MAX_BRUTE}, "
                        f"got {m}")
    total = 0.0
    for mask in range(1, 1 << m):
        cols = [j for j in range(m) if mask >> j & 1]
        rowsums = a[:, cols].sum(axis=1)
        sign = -1.0 if (m - len(cols)) % 2 else 1.0
        total += sign * float(np.prod(rowsums))
    return total


@dataclass(frozen=True)
class MultiIndexPoly:
    """Exact integer expansion sum over alpha of c_alpha x^alpha.

    Every exponent is 0, 1 or 2, so a multi-index packs into one integer
    base 3; packed keys make term identity exact and hashing cheap.
    written_terms counts the monomial products the recursion emits
    before like terms are collected; collection merges colliding
    monomials, so the map itself is strictly smaller from size three on.
    """
    m: int
    coeffs: dict = field(repr=False)
    written_terms: int = 0

    def term_count(self) -> int:
        """Distinct monomials after collecting like terms."""
        return len(self.coeffs)

    def alpha(self, key: int) -> tuple:
        out = []
        for _ in range(self.m):
            out.append(key % 3)
            key //= 3
        return tuple(out)

    def degree(self, i: int) -> int:
        """Largest exponent of x_i (1-based) across all terms."""
        if not 1 <= i <= self.m:
            raise ParameterError(f"variable index {i} outside 1..{self.m}")
        unit = 3 ** (i - 1)
        return max(key // unit % 3 for key in self.coeffs)

    def max_coeff(self) -> int:
        return max(self.coeffs.values())

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m,):
            raise ParameterError(f"need {self.m} values, got shape {x.shape}")
        total = 0.0
        for key, c in self.coeffs.items():
            total += c * float(np.prod(x ** np.asarray(self.alpha(key))))
        return total

    def terms(self):
        """(alpha, coefficient) pairs in deterministic key order."""
        for key in sorted(self.coeffs):
            yield self.alpha(key), self.coeffs[key]


def p_m_expand(m: int) -> MultiIndexPoly:
    """Symbolic expansion of the permanent polynomial.

    The recursion is expanded without collecting like terms, so the
    written length is a measured count rather than a formula; the rows
    grow like 2.42^m, which caps the practical size.  Collection happens
    once at the end to build the coefficient map.
    """
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    if m > MAX_EXPAND:
        raise SizeError(f"expansion is limited to m <= {MAX_EXPAND}, got {m}")
    prev2 = [(1, 1)]                  # x_1
    prev = [(1 + 3, 1), (2, 2)]       # x_2 x_1 + 2 x_1^2
    rows = prev2 if m == 1 else prev
    for k in range(3, m + 1):
        top = 3 ** (k - 1)
        below = 3 ** (k - 2)
        rows = ([(key + top, c) for key, c in prev]
                + [(key + below, c) for key, c in prev]
                + [(key + 2 * below, c) for key, c in prev2])
        prev2, prev = prev, rows
    coeffs = {}
    for key, c in rows:
        coeffs[key] = coeffs.get(key, 0) + c
    return MultiIndexPoly(m, coeffs, written_terms=len(rows))


def gamma_m(m: int) -> int:
    """Term count of the expansion: doubles plus the count two back."""
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    if m == 1:
        return 1
    g_prev2, g_prev = 1, 2
    for _ in range(3, m + 1):
        g_prev2, g_prev = g_prev, 2 * g_prev + g_prev2
    return g_prev


def bounds_check(max_m: int = MAX_BOUNDS) -> dict:
    """Degree, coefficient and term-count facts for every m up to max_m.

    Violations are reported, not raised: the coefficient cap is an
    empirical claim worth flagging loudly rather than crashing on.
    """
    if max_m > MAX_BOUNDS:
        raise SizeError(f"bounds check is limited to m <= {MAX_BOUNDS}, "
                        f"got {max_m}")
    if max_m < 1:
        raise ParameterError(f"max_m must be >= 1, got {max_m}")
    rows = []
    for m in range(1, max_m + 1):
        poly = p_m_expand(m)
        degs = [poly.degree(i) for i in range(1, m + 1)]
        rows.append({
            "m": m,
            "distinct_terms": poly.term_count(),
            "written_terms": poly.written_terms,
            "gamma": gamma_m(m),
            "written_terms_match_gamma": poly.written_terms == gamma_m(m),
            "distinct_bounded_by_gamma": poly.term_count() <= gamma_m(m),
            "top_degree_is_one": degs[-1] == 1,
            "lower_degrees_at_most_two": all(d <= 2 for d in degs[:-1]),
            "max_coeff": poly.max_coeff(),
            "coeff_bound": 3 ** m,
            "coeff_bound_holds": poly.max_coeff() <= 3 ** m,
            "all_positive": all(c > 0 for c in poly.coeffs.values()),
        })
    all_pass = all(r["written_terms_match_gamma"]
                   and r["distinct_bounded_by_gamma"]
                   and r["top_degree_is_one"]
                   and r["lower_degrees_at_most_two"] and r["coeff_bound_holds"]
                   and r["all_positive"] for r in rows)
    return {"rows": rows, "max_m": max_m, "all_pass": all_pass}


def _f_values(x: np.ndarray) -> np.ndarray:
    """Row-wise permanent recursion for a batch of power vectors."""
    m = x.shape[1]
    f1 = x[:, 0]
    if m == 1:
        return f1
    f2 = x[:, 1] * x[:, 0] + 2.0 * x[:, 0] ** 2
    fp2, fp = f1, f2
    for j in range(2, m):
        fp2, fp = fp, (x[:, j] + x[:, j - 1]) * fp + x[:, j - 1] ** 2 * fp2
    return fp


def _worst_exponents(m: int, hurst: float) -> np.ndarray:
    """Most negative power of each increment across the integrand.

    The square root contributes H per unit of the largest exponent the
    expansion allows each variable (2 below the top, 1 at the top); the
    explicit kernel adds H on the first increment and on every increment
    from the third on.
    """
    if m == 1:
        return np.array([2.0 * hurst])
    alpha_max = np.full(m, 2.0)
    alpha_max[-1] = 1.0
    kernel = np.zeros(m)
    kernel[0] = 1.0
    if m >= 3:
        kernel[2:] = 1.0
    return hurst * (alpha_max + kernel)


def _simplex_mc(m: int, hurst: float, t: float, n_samples: int,
                seed: int) -> tuple:
    """Importance-sampled value and standard error of the m-fold
    singular integral over the ordered simplex.

    Increments are drawn Dirichlet with parameters 1 minus the worst
    local exponents, so the weight stays bounded near every singular
    face and an extra unit coordinate absorbs the slack above s_m.
    """
    rng = np.random.default_rng(seed)
    exps = _worst_exponents(m, hurst)
    a = np.concatenate([1.0 - exps, [1.0]])
    v = rng.dirichlet(a, size=n_samples)[:, :m]
    incs = t * v
    s = np.cumsum(incs, axis=1)
    x = incs ** (-2.0 * hurst)
    f = _f_values(x)
    log_kernel = -hurst * np.log(s[:, 0])
    if m >= 3:
        log_kernel = log_kernel - hurst * np.sum(np.log(incs[:, 2:]), axis=1)
    log_density = (gammaln(np.sum(a)) - np.sum(gammaln(a))
                   + np.sum((a[:m] - 1.0) * np.log(v), axis=1))
    log_w = 0.5 * np.log(f) + log_kernel - log_density + m * np.log(t)
    w = np.exp(log_w)
    mean = float(np.mean(w))
    se = float(np.std(w, ddof=1) / np.sqrt(n_samples))
    return mean, se


def integral_estimate_check(m: int, hurst: float, t: float = 1.0,
                            n_samples: int = 200_000, seed: int = 0,
                            rel_tol: float = 0.02) -> dict:
    """Simplex integral against its Gamma-function envelope.

    The envelope constant is fitted at m = 2 (the smallest size whose
    expansion has the generic shape), then reused for the requested m;
    a noisy estimate is refused instead of silently compared.
    """
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    if m > MAX_SIMPLEX:
        raise SizeError(f"simplex check is limited to m <= {MAX_SIMPLEX}, "
                        f"got {m}")
    if not 0.0 < hurst < 1.0 / 3.0:
        raise ParameterError(
            f"need hurst < 1/3 so every singular power is integrable, "
            f"got {hurst}")
    if t <= 0.0:
        raise ParameterError(f"t must be positive, got {t}")
    lhs, se = _simplex_mc(m, hurst, t, n_samples, seed)
    rel_se = se / lhs
    if rel_se > rel_tol:
        raise ResolutionError(
            f"relative standard error {rel_se:.2e} above {rel_tol:.2e}; "
            f"raise n_samples")
    if m == 2:
        lhs2 = lhs
    else:
        lhs2, _ = _simplex_mc(2, hurst, t, n_samples, seed + 1)
    decay = 1.0 - 3.0 * hurst
    log_c = 0.5 * (np.log(lhs2) + gammaln(2.0 * decay + 1.0))
    envelope = float(np.exp(m * log_c - gammaln(m * decay + 1.0)))
    return {"m": m, "hurst": float(hurst), "t": float(t),
            "lhs": lhs, "rel_se": rel_se,
            "envelope": envelope, "fitted_c": float(np.exp(log_c)),
            "dominates": bool(envelope >= lhs),
            "n_samples": int(n_samples)}
