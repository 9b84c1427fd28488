"""Client broadcast and the inclusion-probability calculus.

Closed forms are evaluated with exact rationals up to n = 64 and in log
space above that.  The ``mc_*`` functions are plain samplers used as
independent oracles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

EXACT_LIMIT = 64


def _check(n, f, x=None, q=None):
    if f < 0 or n < 3 * f + 1:
        raise ValueError(f"need n >= 3f+1, got n={n}, f={f}")
    if x is not None and not 0 <= x <= n:
        raise ValueError(f"x={x} outside [0, {n}]")
    if q is not None and not 0 <= q <= n - f:
        raise ValueError(f"q={q} outside [0, {n - f}]")


def _comb_ratio(n, f, x, i, exact):
    """Pr(X = i): i honest among x drawn without replacement."""
    if i < 0 or i > x or i > n - f or x - i > f:
        return Fraction(0) if exact else 0.0
    if exact:
        return Fraction(math.comb(n - f, i) * math.comb(f, x - i), math.comb(n, x))
    lg = math.lgamma
    lc = lambda a, b: lg(a + 1) - lg(b + 1) - lg(a - b + 1)
    return math.exp(lc(n - f, i) + lc(f, x - i) - lc(n, x))


def hypergeom_weights(n, f, x, exact=None):
    exact = n <= EXACT_LIMIT if exact is None else exact
    return [_comb_ratio(n, f, x, i, exact) for i in range(x + 1)]


def pr_none_given(i, q, n, f, exact=None):
    """Leader picks q of the n-f honest mini-blocks; none of the i holders is among them."""
    exact = n <= EXACT_LIMIT if exact is None else exact
    h = n - f
    if q > h - i:
        return Fraction(0) if exact else 0.0
    if exact:
        out = Fraction(1)
        for j in range(q):
            out *= Fraction(h - i - j, h - j)
        return out
    return math.exp(sum(math.log(h - i - j) - math.log(h - j) for j in range(q)))


def pr_inclusion_honest(n, f, x, q, exact=None):
    _check(n, f, x, q)
    exact = n <= EXACT_LIMIT if exact is None else exact
    miss = sum((pr_none_given(i, q, n, f, exact) * _comb_ratio(n, f, x, i, exact)
                for i in range(0, min(x, n - f) + 1)), Fraction(0) if exact else 0.0)
    out = 1 - miss
    return out if exact else min(1.0, max(0.0, out))


def pr_inclusion_malicious(n, f, x, exact=None):
    _check(n, f, x)
    exact = n <= EXACT_LIMIT if exact is None else exact
    return sum((_comb_ratio(n, f, x, i, exact) for i in range(f + 1, x + 1)), Fraction(0) if exact else 0.0)


@dataclass(frozen=True)
class CensorBound:
    value: float
    log_value: float
    p: float
    valid: bool


def censor_bound(n, f, x, alpha, T) -> CensorBound:
    """Union-plus-Hoeffding bound on censoring at least alpha*T of T transactions."""
    _check(n, f, x)
    p = 1.0 - math.prod((n - f) / (n - i) for i in range(x))
    valid = alpha > 1 - p
    lc = math.lgamma(n + 1) - math.lgamma(n - f + 1) - math.lgamma(f + 1)
    log_b = math.log(2) + lc - 2 * (p + alpha - 1) ** 2 * T
    value = 1.0 if log_b >= 0 else math.exp(log_b)
    return CensorBound(value if valid else 1.0, log_b, p, valid)


def pr_reconstruct(f, y, exact=None):
    """Probability that y random contacts among 3f+1 include at least ceil((f+1)/3) honest."""
    n = 3 * f + 1
    if not 0 <= y <= n:
        raise ValueError("y outside [0, 3f+1]")
    exact = n <= EXACT_LIMIT if exact is None else exact
    a = -(-(f + 1) // 3)
    return sum((_comb_ratio(n, f, y, b, exact) for b in range(a, y + 1)), Fraction(0) if exact else 0.0)


# -- leader prior ------------------------------------------------------------

@dataclass
class LeaderBelief:
    """Beta prior on the chance the next leader is honest (mean 2/3) and a uniform q prior.

    ``update`` is a Beta-Bernoulli posterior step on observed Complete /
    Incomplete outcomes.
    """

    alpha: float = 2.0
    beta: float = 1.0
    q_range: Optional[tuple] = None

    @property
    def honest(self):
        if float(self.alpha).is_integer() and float(self.beta).is_integer():
            return Fraction(int(self.alpha), int(self.alpha + self.beta))
        return self.alpha / (self.alpha + self.beta)

    def update(self, complete: bool) -> "LeaderBelief":
        return LeaderBelief(self.alpha + complete, self.beta + (not complete), self.q_range)

    def qs(self, n, f, t):
        lo, hi = self.q_range or (t, n - f)
        return range(lo, hi + 1)


def inclusion_mixture(n, f, t, x, belief: Optional[LeaderBelief] = None, exact=None):
    belief = belief or LeaderBelief()
    exact = n <= EXACT_LIMIT if exact is None else exact
    qs = belief.qs(n, f, t)
    hon = sum(pr_inclusion_honest(n, f, x, q, exact) for q in qs) / len(qs)
    ph = belief.honest if exact else float(belief.honest)
    return ph * hon + (1 - ph) * pr_inclusion_malicious(n, f, x, exact)


def copies_for_target(n, f, t, target, belief: Optional[LeaderBelief] = None) -> int:
    if not 0 <= target <= 1:
        raise ValueError("target probability outside [0, 1]")
    for x in range(n + 1):
        if inclusion_mixture(n, f, t, x, belief) >= target:
            return x
    return n


# -- client side -------------------------------------------------------------

class SubmitFailed(RuntimeError):
    def __init__(self, available: int):
        super().__init__(f"only {available} replicas available")
        self.available = available


@dataclass
class AvailabilityView:
    """Per-replica acceptance deadline learned from a sync round."""

    deadlines: dict = field(default_factory=dict)

    def record(self, replica, now, delta, time_to_next_signal):
        self.deadlines[replica] = now + 2 * delta + time_to_next_signal

    def available(self, now) -> list:
        return sorted(r for r, d in self.deadlines.items() if d > now)


@dataclass(frozen=True)
class BroadcastPlan:
    x: int
    targets: tuple
    view: int


def plan_broadcast(avail: AvailabilityView, x: int, view: int, now: float, rng: np.random.Generator) -> BroadcastPlan:
    s = avail.available(now)
    if len(s) < x:
        raise SubmitFailed(len(s))
    return BroadcastPlan(x, tuple(sorted(int(r) for r in rng.choice(s, size=x, replace=False))), view)


# -- samplers ----------------------------------------------------------------

def _holders(rng, n, x, trials):
    # x distinct targets per trial via argsort of uniform keys
    return np.argsort(rng.random((trials, n)), axis=1)[:, :x]


def mc_none_given(i, q, n, f, trials, rng):
    h = n - f
    picks = np.argsort(rng.random((trials, h)), axis=1)[:, :q]
    return float(np.mean(~(picks < i).any(axis=1)))


def mc_inclusion_honest(n, f, x, q, trials, rng):
    """Honest ids are 0..n-f-1; the leader includes q honest chosen uniformly."""
    tgt = _holders(rng, n, x, trials)
    order = np.argsort(rng.random((trials, n - f)), axis=1)[:, :q]
    held = np.zeros((trials, n), dtype=bool)
    np.put_along_axis(held, tgt, True, axis=1)
    return float(np.mean(np.take_along_axis(held[:, :n - f], order, axis=1).any(axis=1)))


def mc_inclusion_malicious(n, f, x, trials, rng):
    """Worst-case leader: excludes every honest holder whenever at least n-2f honest non-holders exist."""
    tgt = _holders(rng, n, x, trials)
    honest_holders = (tgt < n - f).sum(axis=1)
    return float(np.mean((n - f) - honest_holders < n - 2 * f))


def mc_reconstruct(f, y, trials, rng):
    n = 3 * f + 1
    a = -(-(f + 1) // 3)
    picks = _holders(rng, n, y, trials)
    return float(np.mean((picks < 2 * f + 1).sum(axis=1) >= a))


def honest_heatmap(n, f, t):
    """Rows x = 0..n, columns q = t..n-f."""
    return [[pr_inclusion_honest(n, f, x, q) for q in range(t, n - f + 1)] for x in range(n + 1)]
