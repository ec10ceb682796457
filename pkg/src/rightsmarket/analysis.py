"""Empirical audit of the equilibrium and dynamics claims.

The audit replays full traces in which exactly one trader (or a small
coalition) deviates from greedy in one round and reverts afterwards, and
compares total utilities against the all-greedy baseline. A finite grid
cannot certify the equilibrium; it is a falsification harness. The module
also checks the price map's non-expansiveness along traces and
cross-validates the interval-scan price solver against bisection.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import MarketConfig
from .engine import BidAdjustment, Trace, run
from .errors import ConfigError
from .pricing import solve_implicit_price

DEVIATION_KINDS = (
    "seller_withhold",
    "seller_price",
    "buyer_sell_less_right",
    "buyer_buy_less_right",
    "buyer_price",
)

DEFAULT_MAGNITUDES = (0.05, 0.10, 0.25, 0.50)


@dataclass(frozen=True)
class Deviation:
    """One trader's single-round departure from greedy.

    ``magnitude`` is the multiplicative size: the withheld fraction of the
    round's resupply, the fraction of right not sold / not bought, or the
    signed relative price change. A withholding seller sells the stored
    amount in the following round.
    """

    kind: str
    trader: int
    round_index: int
    magnitude: float

    def __post_init__(self) -> None:
        if self.kind not in DEVIATION_KINDS:
            raise ConfigError(f"unknown deviation kind {self.kind!r}")

    def trader_key(self) -> tuple[str, int]:
        side = "seller" if self.kind.startswith("seller") else "buyer"
        return (side, self.trader)

    def to_adjustments(self, config: MarketConfig) -> tuple[BidAdjustment, ...]:
        side, idx = self.trader_key()
        r = self.round_index
        if self.kind == "seller_withhold":
            amount = self.magnitude * config.resupply_at(r)[idx]
            hold = BidAdjustment(r, (side, idx), volume_delta=-amount)
            release = BidAdjustment(r + 1, (side, idx), volume_delta=amount)
            return (hold, release)
        if self.kind == "seller_price":
            return (BidAdjustment(r, (side, idx), price_factor=1.0 + self.magnitude),)
        if self.kind == "buyer_sell_less_right":
            return (BidAdjustment(r, (side, idx), right_offer_factor=1.0 - self.magnitude),)
        if self.kind == "buyer_buy_less_right":
            return (BidAdjustment(r, (side, idx), right_demand_factor=1.0 - self.magnitude),)
        return (BidAdjustment(r, (side, idx), price_factor=1.0 + self.magnitude),)

    def describe(self) -> str:
        side, idx = self.trader_key()
        return f"{self.kind}({self.magnitude:+g}) by {side} {idx} at round {self.round_index}"


@dataclass(frozen=True)
class DeviationTrial:
    deviations: tuple[Deviation, ...]
    gains: tuple[float, ...]  # one per deviating trader, vs. baseline utility
    skipped: bool = False
    reason: str = ""

    @property
    def max_gain(self) -> float:
        return max(self.gains) if self.gains else float("-inf")

    def describe(self) -> str:
        if self.skipped:
            return f"SKIP {self.deviations[0].describe()}: {self.reason}"
        parts = "; ".join(d.describe() for d in self.deviations)
        gains = ", ".join(f"{g:+.3e}" for g in self.gains)
        return f"{parts} -> gain {gains}"


@dataclass(frozen=True)
class AuditReport:
    baseline_seller_utilities: tuple[float, ...]
    baseline_buyer_utilities: tuple[float, ...]
    trials: tuple[DeviationTrial, ...]
    gain_tolerance: float
    coalition: tuple[tuple[str, int], ...] = ()

    @property
    def tested(self) -> tuple[DeviationTrial, ...]:
        return tuple(t for t in self.trials if not t.skipped)

    @property
    def max_gain(self) -> float:
        gains = [t.max_gain for t in self.tested]
        return max(gains) if gains else 0.0

    @property
    def witnesses(self) -> tuple[DeviationTrial, ...]:
        """Unilateral: any positive gain; coalition: every member gains."""
        out = []
        for t in self.tested:
            if self.coalition:
                if all(g > self.gain_tolerance for g in t.gains):
                    out.append(t)
            elif t.max_gain > self.gain_tolerance:
                out.append(t)
        return tuple(out)

    @property
    def passed(self) -> bool:
        return not self.witnesses

    def summary(self) -> str:
        kind = "coalition" if self.coalition else "unilateral"
        return (
            f"{kind} audit: {len(self.tested)} trials "
            f"({len(self.trials) - len(self.tested)} skipped), "
            f"max gain {self.max_gain:+.3e}, "
            f"{len(self.witnesses)} profitable deviation(s)"
        )


def _trader_utility(trace: Trace, key: tuple[str, int]) -> float:
    side, idx = key
    return trace.seller_utilities[idx] if side == "seller" else trace.buyer_utilities[idx]


def _require_constant_normalized(config: MarketConfig, horizon: int) -> None:
    total_g1 = sum(config.resupply_at(1))
    total_m1 = sum(config.income_at(1))
    for tau in (1, max(1, horizon // 2), horizon):
        if abs(sum(config.resupply_at(tau)) - total_g1) > 1e-9 or abs(
            sum(config.income_at(tau)) - total_m1
        ) > 1e-9:
            raise ConfigError("audit requires constant supply and income")
    if abs(total_g1 - 1.0) > 1e-9 or abs(total_m1 - 1.0) > 1e-9:
        raise ConfigError("audit requires the normalized regime (sum g = sum m = 1)")


def default_deviation_grid(
    config: MarketConfig,
    horizon: int,
    baseline: Trace,
    magnitudes: Sequence[float] = DEFAULT_MAGNITUDES,
    rounds: Sequence[int] | None = None,
) -> list[Deviation]:
    """Every supported one-round deviation over the magnitude/round grid.

    Selling less Right only applies to buyers who offered some (poor that
    round); buying less only to buyers who demanded some. Feasibility is
    read off the baseline trace.
    """
    rounds = tuple(rounds) if rounds is not None else (1, max(1, horizon // 2), horizon)
    grid: list[Deviation] = []
    for s in range(config.num_sellers):
        for r in rounds:
            for m in magnitudes:
                grid.append(Deviation("seller_withhold", s, r, m))
                grid.append(Deviation("seller_price", s, r, +m))
                grid.append(Deviation("seller_price", s, r, -m))
    for b in range(config.num_buyers):
        for r in rounds:
            rec = baseline.records[r - 1]
            for m in magnitudes:
                if rec.right_offered[b] > 1e-12:
                    grid.append(Deviation("buyer_sell_less_right", b, r, m))
                    grid.append(Deviation("buyer_price", b, r, +m))
                    grid.append(Deviation("buyer_price", b, r, -m))
                if rec.right_demanded[b] > 1e-12:
                    grid.append(Deviation("buyer_buy_less_right", b, r, m))
    return grid


def audit_unilateral(
    config: MarketConfig,
    horizon: int | None = None,
    deviation_grid: Sequence[Deviation] | None = None,
    gain_tolerance: float = 1e-9,
) -> AuditReport:
    """Replay the trace once per deviation and report utility gains.

    The deviating trader plays greedy in every other round. Any gain above
    ``gain_tolerance`` is a witness against the equilibrium claim.
    """
    T = horizon if horizon is not None else config.horizon
    _require_constant_normalized(config, T)
    baseline = run(config, T)
    if deviation_grid is None:
        deviation_grid = default_deviation_grid(config, T, baseline)

    trials: list[DeviationTrial] = []
    for dev in deviation_grid:
        if dev.round_index < 1 or dev.round_index > T:
            trials.append(
                DeviationTrial((dev,), (), skipped=True, reason="round outside horizon")
            )
            continue
        rec = baseline.records[dev.round_index - 1]
        if dev.kind == "buyer_sell_less_right" and rec.right_offered[dev.trader] <= 1e-12:
            trials.append(
                DeviationTrial((dev,), (), skipped=True, reason="buyer offered no right")
            )
            continue
        if dev.kind == "buyer_buy_less_right" and rec.right_demanded[dev.trader] <= 1e-12:
            trials.append(
                DeviationTrial((dev,), (), skipped=True, reason="buyer demanded no right")
            )
            continue
        if dev.kind == "buyer_price" and rec.right_offered[dev.trader] <= 1e-12:
            trials.append(
                DeviationTrial((dev,), (), skipped=True, reason="no right offer to reprice")
            )
            continue
        trace = run(config, T, adjustments=dev.to_adjustments(config))
        gain = _trader_utility(trace, dev.trader_key()) - _trader_utility(
            baseline, dev.trader_key()
        )
        trials.append(DeviationTrial((dev,), (gain,)))

    return AuditReport(
        baseline_seller_utilities=baseline.seller_utilities,
        baseline_buyer_utilities=baseline.buyer_utilities,
        trials=tuple(trials),
        gain_tolerance=gain_tolerance,
    )


def default_coalition_menu(
    member: tuple[str, int], round_index: int, baseline: Trace
) -> list[Deviation]:
    side, idx = member
    if side == "seller":
        return [
            Deviation("seller_withhold", idx, round_index, 0.25),
            Deviation("seller_price", idx, round_index, +0.10),
            Deviation("seller_price", idx, round_index, -0.10),
        ]
    rec = baseline.records[round_index - 1]
    menu: list[Deviation] = []
    if rec.right_offered[idx] > 1e-12:
        menu.append(Deviation("buyer_sell_less_right", idx, round_index, 0.50))
        menu.append(Deviation("buyer_price", idx, round_index, +0.10))
        menu.append(Deviation("buyer_price", idx, round_index, -0.10))
    if rec.right_demanded[idx] > 1e-12:
        menu.append(Deviation("buyer_buy_less_right", idx, round_index, 0.50))
    return menu


def audit_coalition(
    config: MarketConfig,
    horizon: int | None = None,
    coalition: Sequence[tuple[str, int]] = (),
    joint_grid: Sequence[Sequence[Deviation]] | None = None,
    gain_tolerance: float = 1e-9,
    max_trials: int = 500,
) -> AuditReport:
    """Joint-deviation scan for one coalition.

    A joint deviation wins only if every member strictly gains; the default
    grid is the cartesian product of small per-member menus at mid-horizon.
    """
    if len(coalition) < 2:
        raise ConfigError("a coalition needs at least two members")
    T = horizon if horizon is not None else config.horizon
    _require_constant_normalized(config, T)
    baseline = run(config, T)
    if joint_grid is None:
        mid = max(1, T // 2)
        menus = [default_coalition_menu(m, mid, baseline) for m in coalition]
        joint_grid = [combo for combo in itertools.product(*menus)]
    trials: list[DeviationTrial] = []
    for combo in joint_grid[:max_trials]:
        if len({d.trader_key() for d in combo}) != len(coalition):
            trials.append(
                DeviationTrial(tuple(combo), (), skipped=True, reason="menu/member mismatch")
            )
            continue
        adjustments: list[BidAdjustment] = []
        for d in combo:
            adjustments.extend(d.to_adjustments(config))
        trace = run(config, T, adjustments=adjustments)
        gains = tuple(
            _trader_utility(trace, d.trader_key()) - _trader_utility(baseline, d.trader_key())
            for d in combo
        )
        trials.append(DeviationTrial(tuple(combo), gains))
    return AuditReport(
        baseline_seller_utilities=baseline.seller_utilities,
        baseline_buyer_utilities=baseline.buyer_utilities,
        trials=tuple(trials),
        gain_tolerance=gain_tolerance,
        coalition=tuple(coalition),
    )


@dataclass(frozen=True)
class NonexpansiveReport:
    passed: bool
    first_violation_round: int | None
    detail: str

    def summary(self) -> str:
        return "non-expansive: pass" if self.passed else f"FAIL: {self.detail}"


def check_nonexpansive(
    trace: Trace, tol: float = 1e-12, oscillation_guard: float = 1e-9
) -> NonexpansiveReport:
    """Check |p(t+1) - 1| <= |p(t) - 1| and the oscillation direction along
    a greedy constant-supply trace.

    The strict oscillation claim (below 1 the price rises, above 1 it falls)
    is only tested while the price is farther than ``oscillation_guard``
    from the fixed point, where float comparisons are meaningful.
    """
    prices = trace.price_path()
    for t in range(len(prices) - 1):
        p, q = prices[t], prices[t + 1]
        if abs(q - 1.0) > abs(p - 1.0) + tol:
            return NonexpansiveReport(
                False, t + 1, f"|p-1| grew from {abs(p - 1.0):g} to {abs(q - 1.0):g}"
            )
        if p < 1.0 - oscillation_guard and not q > p:
            return NonexpansiveReport(False, t + 1, f"p={p!r} < 1 but next price {q!r} <= p")
        if p > 1.0 + oscillation_guard and not q < p:
            return NonexpansiveReport(False, t + 1, f"p={p!r} > 1 but next price {q!r} >= p")
    return NonexpansiveReport(True, None, "")


def bisection_price(
    money: Sequence[float], rights: Sequence[float], iterations: int = 200
) -> float:
    """Independent root finder for the implicit price equation.

    Bisects the monotone residual sum(M - max(0, pR - M)) - p sum(R) on
    [0, sum(M)/sum(R)]; used only as an oracle against the interval scan.
    """
    m = [float(x) for x in money]
    r = [float(x) for x in rights]
    total_r = sum(r)
    if total_r <= 0.0:
        raise ConfigError("bisection oracle needs positive total rights")
    total_m = sum(m)
    if total_m == 0.0:
        return 0.0

    def residual(p: float) -> float:
        return sum(mb - max(0.0, p * rb - mb) for mb, rb in zip(m, r)) - p * total_r

    lo, hi = 0.0, total_m / total_r
    if residual(hi) > 0.0:  # guard against rounding at the upper bracket
        hi *= 1.0 + 1e-12
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SolverCrossCheck:
    instances: int
    max_discrepancy: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.tolerance

    def summary(self) -> str:
        return (
            f"solver vs bisection on {self.instances} instances: "
            f"max |dp| = {self.max_discrepancy:.3e} "
            f"({'pass' if self.passed else 'FAIL'} at {self.tolerance:g})"
        )


def cross_validate_price_solver(
    instances: int = 1000, rng_seed: int = 0, tolerance: float = 1e-10
) -> SolverCrossCheck:
    """Compare the interval-scan solver against bisection on random cases.

    Instances draw 1..8 buyers, money in [0, 2] with occasional exact zeros,
    and rights scaled to a random total in (0, 10].
    """
    if instances < 1:
        raise ConfigError("instances must be >= 1")
    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    for _ in range(instances):
        nb = int(rng.integers(1, 9))
        money = rng.uniform(0.0, 2.0, nb)
        money[rng.uniform(0.0, 1.0, nb) < 0.15] = 0.0
        if rng.uniform() < 0.05:
            money[:] = 0.0  # degenerate zero-money instance, both must give 0
        rights = rng.uniform(0.0, 1.0, nb)
        rights[rng.uniform(0.0, 1.0, nb) < 0.15] = 0.0
        if rights.sum() <= 0.0:
            rights[int(rng.integers(0, nb))] = 1.0
        rights *= float(rng.uniform(0.05, 10.0)) / rights.sum()
        p_scan = solve_implicit_price(money, rights).price
        p_bis = bisection_price(money, rights)
        worst = max(worst, abs(p_scan - p_bis))
    return SolverCrossCheck(instances, worst, tolerance)


@dataclass(frozen=True)
class LowerBoundReport:
    rounds_checked: int
    violations: tuple[tuple[int, float, float], ...]  # (round, bound, price)

    @property
    def holds(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.holds:
            return f"price lower bound holds on all {self.rounds_checked} rounds"
        r, bound, price = self.violations[0]
        return (
            f"price lower bound flagged on {len(self.violations)} rounds "
            f"(first: round {r}, bound {bound:g} > price {price:g})"
        )


def check_price_lower_bound(
    trace: Trace, weights: Sequence[float], rank_order: Sequence[int] | None = None
) -> LowerBoundReport:
    """Compare each round's price against the canonical-decomposition bound.

    ``weights`` are decomposition weights in claim-rank order (see
    ``pricing.mechanism_rank_weights``); ``rank_order`` maps ranks to buyer
    indices (``rights.claim_rank_order``) and defaults to the identity,
    which is correct for configs listing buyers by descending claim.
    Violations are reported, not raised: outside canonical mechanisms the
    bound is a diagnostic.
    """
    from .pricing import canonical_lower_bound

    violations = []
    for rec in trace.records:
        money = rec.money_start
        if rank_order is not None:
            money = [rec.money_start[b] for b in rank_order]
        bound = canonical_lower_bound(weights, money)
        if bound > rec.price_good + 1e-9:
            violations.append((rec.round_index, bound, rec.price_good))
    return LowerBoundReport(len(trace.records), tuple(violations))
