"""Price solver, closed forms and greedy bids.

Derived expectations are frozen from an independent bisection oracle on the
monotone residual of the implicit price equation; the oracle lives in
``analysis`` and is re-run here against the frozen numbers before they are
asserted on the solver.
"""

import pytest
from hypothesis import given, settings, strategies as st

from rightsmarket.analysis import bisection_price
from rightsmarket.core import BuyerSpec, MarketConfig, SellerSpec, initial_state
from rightsmarket.engine import SupplySchedule
from rightsmarket.errors import ConfigError, PricingError
from rightsmarket.mechanism import SellerOffer
from rightsmarket.pricing import (
    canonical_closed_form,
    canonical_lower_bound,
    free_market_clearing_price,
    greedy_buyer_bid,
    greedy_seller_bid,
    mechanism_rank_weights,
    solve_implicit_price,
)
from rightsmarket.rights import DistributionMechanism

BENCH_RIGHTS = [8 / 15, 6 / 15, 1 / 15]
BENCH_MONEY = [0.0, 0.25, 0.75]


def residual(p, money, rights):
    return sum(m - max(0.0, p * r - m) for m, r in zip(money, rights)) - p * sum(rights)


class TestImplicitPriceSolver:
    def test_benchmark_round_one(self):
        oracle = bisection_price(BENCH_MONEY, BENCH_RIGHTS)
        assert oracle == pytest.approx(75 / 116, abs=1e-12)
        sol = solve_implicit_price(BENCH_MONEY, BENCH_RIGHTS)
        assert sol.price == pytest.approx(75 / 116, abs=1e-12)
        assert sol.poor == (0, 1)
        assert sol.useful_money == pytest.approx(75 / 116, abs=1e-12)
        assert sol.useless_money == pytest.approx(41 / 116, abs=1e-12)
        assert sol.useful_money + sol.useless_money == pytest.approx(1.0, abs=1e-12)

    def test_benchmark_round_two(self):
        money = [0.34483, 0.25862, 0.75]
        oracle = bisection_price(money, BENCH_RIGHTS)
        assert oracle == pytest.approx(1.01219, abs=5e-6)
        assert solve_implicit_price(money, BENCH_RIGHTS).price == pytest.approx(oracle, abs=1e-10)

    def test_balanced_single_buyer_boundary_is_rich(self):
        sol = solve_implicit_price([1.0], [1.0])
        assert sol.price == 1.0
        assert sol.poor == ()

    def test_zero_money(self):
        sol = solve_implicit_price([0.0, 0.0], [0.5, 0.5])
        assert sol.price == 0.0
        assert sol.useful_money == 0.0 and sol.useless_money == 0.0

    def test_no_rights_is_an_error(self):
        with pytest.raises(PricingError, match="no rights"):
            solve_implicit_price([1.0], [0.0])

    def test_mismatched_lengths(self):
        with pytest.raises(PricingError):
            solve_implicit_price([1.0, 2.0], [1.0])

    def test_exact_breakpoint_state(self):
        # a poor buyer's money after one greedy round sits exactly on a
        # breakpoint of the next round's equation; the scan must not lose
        # the root to rounding (regression)
        money = [0.10771756993328188, 0.4772167486323613, 0.7500000000000002]
        sol = solve_implicit_price(money, BENCH_RIGHTS)
        assert abs(residual(sol.price, money, BENCH_RIGHTS)) < 1e-12

    def test_price_bounded_by_free_market(self):
        sol = solve_implicit_price(BENCH_MONEY, BENCH_RIGHTS)
        assert sol.price <= sum(BENCH_MONEY) / sum(BENCH_RIGHTS) + 1e-12

    @given(
        money=st.lists(st.floats(0.0, 3.0), min_size=1, max_size=7),
        rights=st.lists(st.floats(0.0, 2.0), min_size=1, max_size=7),
    )
    @settings(max_examples=300)
    def test_agrees_with_bisection(self, money, rights):
        n = min(len(money), len(rights))
        money, rights = money[:n], rights[:n]
        if sum(rights) <= 1e-9:
            return
        sol = solve_implicit_price(money, rights)
        scale = max(1.0, sol.price)
        assert abs(sol.price - bisection_price(money, rights)) < 1e-9 * scale
        assert abs(residual(sol.price, money, rights)) < 1e-9 * scale

    @given(
        money=st.lists(st.floats(0.0, 3.0), min_size=2, max_size=6),
        rights=st.lists(st.floats(0.01, 2.0), min_size=2, max_size=6),
        bump=st.floats(0.01, 1.0),
        who=st.integers(0, 5),
    )
    @settings(max_examples=200)
    def test_price_weakly_increasing_in_money(self, money, rights, bump, who):
        n = min(len(money), len(rights))
        money, rights = money[:n], rights[:n]
        base = solve_implicit_price(money, rights)
        bumped = list(money)
        bumped[who % n] += bump
        higher = solve_implicit_price(bumped, rights)
        assert higher.price >= base.price - 1e-12
        if base.poor:
            assert higher.price > base.price


class TestFreeMarketPrice:
    def test_normalized_system_clears_at_one(self):
        assert free_market_clearing_price(BENCH_MONEY, 1.0) == 1.0

    def test_single_buyer(self):
        assert free_market_clearing_price([2.0], 1.0) == 2.0

    def test_no_money(self):
        assert free_market_clearing_price([0.0, 0.0], 1.0) == 0.0

    def test_zero_volume_is_an_error(self):
        with pytest.raises(PricingError):
            free_market_clearing_price([1.0], 0.0)


class TestCanonicalClosedForm:
    def test_first_round(self):
        assert canonical_closed_form(3, [0.0, 0.25, 0.75], 1) == pytest.approx(7 / 8, abs=1e-15)

    def test_later_rounds_are_one(self):
        for tau in (2, 3, 10, 100):
            assert canonical_closed_form(3, [0.0, 0.25, 0.75], tau) == 1.0

    def test_fixed_point_when_holder_has_all_income(self):
        assert canonical_closed_form(1, [1.0, 0.0], 1) == 1.0

    def test_requires_normalized_incomes(self):
        with pytest.raises(ConfigError):
            canonical_closed_form(1, [0.5, 0.2], 1)


class TestCanonicalLowerBound:
    def test_one_hot_weights(self):
        assert canonical_lower_bound([1.0, 0.0], [0.0, 1.0]) == 0.5

    def test_benchmark_weights(self):
        bound = canonical_lower_bound(BENCH_RIGHTS, BENCH_MONEY)
        assert bound == pytest.approx(0.575, abs=1e-12)
        # the bound is honored by the solved round-one price
        assert bound <= solve_implicit_price(BENCH_MONEY, BENCH_RIGHTS).price

    def test_single_buyer(self):
        assert canonical_lower_bound([1.0], [1.0]) == 1.0

    def test_rank_weights_of_mechanisms(self):
        claims = [1.0, 0.75, 0.125]
        assert mechanism_rank_weights(DistributionMechanism.canonical(2), claims) == [0, 1, 0]
        prop = mechanism_rank_weights(DistributionMechanism.proportional(), claims)
        assert prop == pytest.approx([8 / 15, 6 / 15, 1 / 15], abs=1e-12)


def _benchmark_state(config):
    state = initial_state(config)
    rights = config.mechanism.allocate(1.0, config.claims)
    for b, r in zip(state.buyers, rights):
        b.right = r
    return state


def _benchmark_config(mech=None, incomes=(0.0, 0.25, 0.75), variant="rights"):
    return MarketConfig(
        sellers=(SellerSpec(SupplySchedule.constant(1.0)),),
        buyers=tuple(
            BuyerSpec(income=SupplySchedule.constant(m), claim=d)
            for m, d in zip(incomes, (1.0, 0.75, 0.125))
        ),
        mechanism=mech if mech is not None else DistributionMechanism.proportional(),
        variant=variant,
        horizon=10,
    )


class TestGreedyBids:
    def test_seller_posts_solved_price_on_full_resupply(self):
        cfg = _benchmark_config()
        offer = greedy_seller_bid(0, initial_state(cfg), cfg)
        assert offer.volume == 1.0
        assert offer.price == pytest.approx(75 / 116, abs=1e-12)

    def test_balanced_single_pair(self):
        cfg = MarketConfig(
            sellers=(SellerSpec(SupplySchedule.constant(1.0)),),
            buyers=(BuyerSpec(income=SupplySchedule.constant(1.0), claim=1.0),),
            mechanism=DistributionMechanism.proportional(),
            horizon=5,
        )
        offer = greedy_seller_bid(0, initial_state(cfg), cfg)
        assert (offer.volume, offer.price) == (1.0, 1.0)

    def test_canonical_top_rank_price(self):
        cfg = _benchmark_config(
            DistributionMechanism.canonical(1), incomes=(0.75, 0.25, 0.0)
        )
        offer = greedy_seller_bid(0, initial_state(cfg), cfg)
        assert offer.price == pytest.approx(7 / 8, abs=1e-12)

    def test_poor_buyer_sells_surplus_right(self):
        cfg = _benchmark_config()
        state = _benchmark_state(cfg)
        bid = greedy_buyer_bid(0, [SellerOffer(1.0, 75 / 116)], state, cfg)
        assert bid.right_offer_volume == pytest.approx(8 / 15, abs=1e-12)
        assert bid.right_offer_price == pytest.approx(75 / 116, abs=1e-12)
        assert bid.max_good_volume == pytest.approx(8 / 15, abs=1e-12)
        assert bid.max_right_volume == 0.0

    def test_rich_buyer_buys_right(self):
        cfg = _benchmark_config()
        state = _benchmark_state(cfg)
        bid = greedy_buyer_bid(2, [SellerOffer(1.0, 75 / 116)], state, cfg)
        assert bid.right_offer_volume == 0.0
        assert bid.max_right_volume == pytest.approx(82 / 75, abs=1e-12)
        assert bid.max_good_volume == pytest.approx(1 / 15 + 82 / 75, abs=1e-12)

    def test_boundary_buyer_neither_sells_nor_buys(self):
        cfg = _benchmark_config()
        state = _benchmark_state(cfg)
        price = 0.5
        state.buyers[1].money = price * state.buyers[1].right
        bid = greedy_buyer_bid(1, [SellerOffer(1.0, price)], state, cfg)
        assert bid.right_offer_volume == 0.0
        assert bid.max_right_volume == 0.0

    def test_myopic_buyer_offers_half_surplus(self):
        cfg = _benchmark_config(variant="myopic_rights")
        state = _benchmark_state(cfg)
        bid = greedy_buyer_bid(0, [SellerOffer(1.0, 1.0)], state, cfg)
        assert bid.right_offer_volume == pytest.approx(0.5 * 8 / 15, abs=1e-12)

    @given(
        money=st.floats(0.0, 3.0),
        right=st.floats(0.0, 2.0),
        price=st.floats(0.01, 3.0),
    )
    def test_never_both_sides_of_the_right_market(self, money, right, price):
        cfg = _benchmark_config()
        state = _benchmark_state(cfg)
        state.buyers[1].money = money
        state.buyers[1].right = right
        bid = greedy_buyer_bid(1, [SellerOffer(1.0, price)], state, cfg)
        assert bid.right_offer_volume * bid.max_right_volume == 0.0
