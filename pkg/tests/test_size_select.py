import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqsize.identify import ModelBank, ScoreTable
from vqsize.size_select import (assign_by_ratios, combination_count, greedy_size_search,
                                mean_bits, min_argmax, per_speaker_sweep, ratio_criterion_assign,
                                sci)

from conftest import family, ratio_fixture, seq


class TestCombinations:
    def test_reference_counts(self):
        assert combination_count(8, 49) == 8 ** 49
        assert sci(combination_count(8, 49)) == "1.8e44"
        assert sci(combination_count(2, 49)) == "5.6e14"

    @given(st.integers(1, 50))
    def test_single_speaker(self, k):
        assert combination_count(k, 1) == k

    def test_invalid(self):
        with pytest.raises(ValueError):
            combination_count(0, 3)


class TestMeanBits:
    def test_uniform(self):
        assert mean_bits({s: 5 for s in "abcdef"}) == 5.0

    def test_two(self):
        assert mean_bits({"a": 1, "b": 3}) == pytest.approx(math.log2(5), abs=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            mean_bits({})

    @given(st.lists(st.integers(0, 20), min_size=1, max_size=60))
    def test_bounds(self, bits):
        m = mean_bits(bits)
        assert min(bits) - 1e-12 <= m <= max(bits) + 1e-12

    @given(st.lists(st.integers(0, 20), min_size=1, max_size=60), st.data())
    def test_increment_raises(self, bits, data):
        i = data.draw(st.integers(0, len(bits) - 1))
        bumped = list(bits)
        bumped[i] += 1
        assert mean_bits(bumped) > mean_bits(bits)


def toy_bank():
    """Speaker A's second sentence is lost to B unless A gets its 1-bit codebook."""
    bank = ModelBank(["A", "B", "C"], [family([[0.0]], [[-3.0], [3.0]]),
                                       family([[10.0]], [[9.0], [11.0]]),
                                       family([[-10.0]], [[-11.0], [-9.0]])])
    tuning = [seq([[3.0]], "A"), seq([[5.5]], "A"), seq([[10.0]], "B"), seq([[-10.0]], "C")]
    return bank, tuning


class TestSweep:
    def test_min_argmax(self):
        assert min_argmax([0.6, 0.8, 1.0, 1.0]) == 2

    @given(st.lists(st.sampled_from([0.0, 0.2, 0.4, 0.6, 0.8, 1.0]), min_size=1, max_size=9))
    def test_min_argmax_brute(self, row):
        best = max(row)
        assert min_argmax(row) == next(i for i, v in enumerate(row) if v == best)

    def test_toy(self):
        bank, tuning = toy_bank()
        sw = per_speaker_sweep(bank, tuning, norm_mode="none")
        assert sw.rates.tolist() == [[0.5, 1.0], [1.0, 1.0], [1.0, 1.0]]
        assert sw.optimal_bits == {"A": 1, "B": 0, "C": 0}
        assert sw.histogram == {0: 2, 1: 1}

    def test_range_checked(self):
        bank, tuning = toy_bank()
        with pytest.raises(ValueError):
            per_speaker_sweep(bank, tuning, [0, 2])


class TestGreedy:
    def test_already_perfect(self):
        bank, tuning = toy_bank()
        trace = greedy_size_search(bank, tuning[:1] + tuning[2:], 0, norm_mode="none")
        assert trace.iterations == []
        assert trace.assignment == {"A": 0, "B": 0, "C": 0}

    def test_toy_choice(self):
        bank, tuning = toy_bank()
        table = ScoreTable(bank, tuning)
        # brute force every single increment from the all-zero start
        cands = {}
        for i, s in enumerate(bank.speakers):
            bits = np.zeros(3, int)
            bits[i] = 1
            cands[s] = table.overall_rate(bits, "none")
        assert max(cands, key=cands.get) == "A"
        trace = greedy_size_search(bank, tuning, 0, norm_mode="none")
        assert trace.iterations[0].speaker == "A"
        assert trace.final_rate == 1.0
        assert trace.assignment == {"A": 1, "B": 0, "C": 0}

    def test_tie_breaks(self):
        # step 1: A and B tie at equal bits -> A by index
        # step 2: A (1 bit) and B (0 bits) tie -> B by fewer bits
        bank = ModelBank(["A", "B"], [family([[0.0]], [[0.0], [4.5]], [[0.0], [4.5], [20.0], [30.0]]),
                                      family([[6.0]], [[6.0], [-2.0]], [[6.0], [-2.0], [40.0], [50.0]])])
        tuning = [seq([[4.5]], "A"), seq([[20.0]], "A"), seq([[-2.0]], "B"), seq([[6.0]], "B")]
        trace = greedy_size_search(bank, tuning, 0, norm_mode="none")
        assert [(s.speaker, s.new_bits) for s in trace.iterations] == [("A", 1), ("B", 1), ("A", 2)]
        assert [s.overall_rate for s in trace.iterations] == [0.5, 0.75, 1.0]
        assert trace.initial_rate == 0.25

    def test_rate_and_mean_bits_increase(self):
        rng = np.random.default_rng(5)
        from vqsize.codebook import train_family
        fams = [train_family(rng.normal(rng.normal(0, 1.0, 2), 1.0, (128, 2)), 4) for _ in range(5)]
        bank = ModelBank([f"s{i}" for i in range(5)], fams)
        tuning = [seq(rng.normal(bank.families[i][0].codewords[0], 1.5, (3, 2)), f"s{i}")
                  for i in range(5) for _ in range(4)]
        trace = greedy_size_search(bank, tuning, 0, norm_mode="per_bits")
        rates = [trace.initial_rate] + [s.overall_rate for s in trace.iterations]
        mb = [0.0] + [s.mean_bits for s in trace.iterations]
        assert all(b > a for a, b in zip(rates, rates[1:]))
        assert all(b > a for a, b in zip(mb, mb[1:]))
        assert trace.final_rate >= trace.initial_rate

    def test_init_range(self):
        bank, tuning = toy_bank()
        with pytest.raises(ValueError):
            greedy_size_search(bank, tuning, 2)


class TestRatio:
    def test_threshold(self):
        a = assign_by_ratios(["a", "b", "c"], [0.2, 1.0, 1.8], 3, 0.5)
        assert a == {"a": 4, "b": 3, "c": 3}

    def test_all_equal(self):
        assert set(assign_by_ratios("abc", [0.7] * 3, 2, 0.5).values()) == {2}

    def test_huge_theta(self):
        assert set(assign_by_ratios("abc", [0.2, 1.0, 1.8], 2, 1e9).values()) == {3}

    def test_degenerate_excluded(self):
        with pytest.warns(UserWarning, match="degenerate"):
            a = assign_by_ratios("abc", [0.2, 1.0, math.inf], 1, 0.5, [False, False, True])
        # mean over a and b only is 0.6, threshold 0.3
        assert a == {"a": 2, "b": 1, "c": 1}

    def test_fixture_bank(self):
        bank, test = ratio_fixture()
        assert ratio_criterion_assign(bank, test, 0, 0.5) == {"A": 0, "B": 1, "C": 0}

    def test_base_bits_checked(self):
        bank, test = ratio_fixture()
        with pytest.raises(ValueError):
            ratio_criterion_assign(bank, test, 1)

    def test_theta_positive(self):
        with pytest.raises(ValueError):
            assign_by_ratios("ab", [1.0, 2.0], 0, 0.0)
