import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from vqsize.codebook import train_family
from vqsize.identify import (ModelBank, ScoreTable, bits_vector, distortion_histogram,
                             distortion_stats, evaluate, identify, uniform_assignment)

from conftest import family, ratio_fixture, seq


@pytest.fixture
def two_points():
    bank = ModelBank(["s1", "s2"], [family([[0.0, 0.0]]), family([[10.0, 10.0]])])
    return bank


def test_exact_codeword_wins():
    bank = ModelBank(["A", "B", "C"], [family([[5.0]], [[1.0], [2.0]]),
                                       family([[1.1]], [[0.0], [3.0]]),
                                       family([[1.0]], [[2.5], [7.0]])])
    test = seq([[1.0], [2.0], [1.0]])
    assert identify(test, bank, {"A": 1, "B": 1, "C": 1}) == "A"


def test_near_origin(two_points):
    test = seq([[0.1, -0.2], [0.3, 0.1], [-0.2, 0.2]])
    assert identify(test, two_points, 0, "none") == "s1"
    assert identify(seq([[9.0, 11.0]]), two_points, 0, "none") == "s2"


def test_tie_goes_to_bank_order():
    bank = ModelBank(["z", "a", "m"], [family([[1.0]]) for _ in range(3)])
    assert identify(seq([[3.0]]), bank, 0) == "z"


def test_empty_sequence(two_points):
    with pytest.raises(ValueError):
        identify(np.empty((0, 2)), two_points, 0)


def test_assignment_must_cover(two_points):
    with pytest.raises(ValueError, match="cover"):
        bits_vector(two_points, {"s1": 0})
    with pytest.raises(ValueError):
        bits_vector(two_points, {"s1": 0, "s2": 3})


def test_normalization_changes_decision():
    # raw distortions 1.0 (A, 0 bits) vs 1.44 (B, 2 bits); B wins after /2
    bank = ModelBank(["A", "B"], [family([[0.0]], [[0.0], [0.0]], [[0.0]] * 4),
                                  family([[3.0]], [[3.0]] * 2, [[2.2]] * 4)])
    test = seq([[1.0]])
    assert identify(test, bank, {"A": 0, "B": 2}, "none") == "A"
    assert identify(test, bank, {"A": 0, "B": 2}, "per_bits") == "B"


def random_bank(rng, n_speakers=3, max_bits=2, dim=2):
    fams = [train_family(rng.normal(loc=rng.normal(0, 2, dim), size=(64, dim)), max_bits)
            for _ in range(n_speakers)]
    return ModelBank([f"s{i}" for i in range(n_speakers)], fams)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 2))
def test_textbook_rule(seed, bits):
    rng = np.random.default_rng(seed)
    bank = random_bank(rng)
    frames = rng.normal(0, 2, (5, 2))
    scores = []
    for fam in bank.families:
        cw = fam[bits].codewords
        per_frame = [min(((f - w) ** 2).sum() for w in cw) for f in frames]
        scores.append(sum(per_frame) / len(per_frame))
    assert identify(seq(frames), bank, bits, "none") == bank.speakers[int(np.argmin(scores))]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 100))
def test_scale_invariance(seed, lam):
    rng = np.random.default_rng(seed)
    bank = random_bank(rng)
    frames = rng.normal(0, 2, (5, 2))
    a = {s: int(rng.integers(0, 3)) for s in bank.speakers}
    table = ScoreTable(bank, [seq(frames, "s0")])
    base = table.decide(bits_vector(bank, a))
    assert np.array_equal(table.scaled(lam).decide(bits_vector(bank, a)), base)


class TestEvaluate:
    def test_all_correct(self, two_points):
        test = [seq([[0.0, 0.1]], "s1"), seq([[10.0, 9.0]], "s2")]
        rep = evaluate(test, two_points, 0)
        assert rep.overall_rate == 1.0

    def test_one_error(self, two_points):
        test = [seq([[0.0, 0.0]], "s1") for _ in range(5)]
        test += [seq([[10.0, 10.0]], "s2") for _ in range(4)] + [seq([[1.0, 1.0]], "s2")]
        rep = evaluate(test, two_points, 0)
        assert rep.rates == {"s1": 1.0, "s2": 0.8}
        assert rep.overall_rate == pytest.approx(0.9)
        assert rep.confusion.tolist() == [[5, 0], [1, 4]]

    def test_unequal_counts_average_speakers(self, two_points):
        test = [seq([[0.0, 0.0]], "s1") for _ in range(9)] + [seq([[1.0, 1.0]], "s2")]
        rep = evaluate(test, two_points, 0)
        assert rep.overall_rate == pytest.approx(0.5)

    def test_missing_speaker_warns(self, two_points):
        with pytest.warns(UserWarning, match="no test sentences"):
            rep = evaluate([seq([[0.0, 0.0]], "s1")], two_points, 0)
        assert rep.evaluated == ["s1"]
        assert rep.overall_rate == 1.0

    def test_unknown_label(self, two_points):
        with pytest.raises(KeyError):
            evaluate([seq([[0.0, 0.0]], "nobody")], two_points, 0)

    def test_speaker_permutation(self):
        rng = np.random.default_rng(9)
        bank = random_bank(rng, 4)
        test = [seq(rng.normal(0, 2, (4, 2)), f"s{i % 4}") for i in range(12)]
        rates = evaluate(test, bank, 2).rates
        perm = [3, 1, 0, 2]
        shuffled = ModelBank([bank.speakers[i] for i in perm], [bank.families[i] for i in perm])
        assert evaluate(test, shuffled, 2).rates == rates


class TestStats:
    def test_hand_example(self):
        # speaker A: own distortions {1, 1}, others' {2, 4}
        bank = ModelBank(["A", "B"], [family([[0.0]]), family([[50.0]])])
        test = [seq([[1.0]], "A"), seq([[-1.0]], "A"),
                seq([[math.sqrt(2)]], "B"), seq([[2.0]], "B")]
        a = distortion_stats(bank, 0, test)[0]
        assert a.mean_self == pytest.approx(1.0)
        assert a.std_other == pytest.approx(math.sqrt(2))
        assert a.ratio == pytest.approx(math.sqrt(2))

    def test_constant_other(self):
        bank = ModelBank(["A", "B"], [family([[0.0]]), family([[50.0]])])
        test = [seq([[1.0]], "A"), seq([[-1.0]], "A"), seq([[3.0]], "B"), seq([[-3.0]], "B")]
        a = distortion_stats(bank, 0, test)[0]
        assert a.std_other == 0 and a.ratio == 0

    def test_degenerate(self):
        bank = ModelBank(["A", "B"], [family([[0.0]]), family([[50.0]])])
        test = [seq([[0.0]], "A"), seq([[0.0]], "A"), seq([[3.0]], "B"), seq([[4.0]], "B")]
        a = distortion_stats(bank, 0, test)[0]
        assert a.degenerate and math.isinf(a.ratio)

    def test_needs_sentences(self):
        bank = ModelBank(["A", "B"], [family([[0.0]]), family([[50.0]])])
        with pytest.raises(ValueError):
            distortion_stats(bank, 0, [seq([[1.0]], "A"), seq([[1.0]], "B")])

    def test_ratio_fixture(self):
        bank, test = ratio_fixture()
        ratios = [s.ratio for s in distortion_stats(bank, 0, test)]
        assert_allclose(ratios, [1.0, 0.2, 1.8], rtol=1e-9)

    @pytest.mark.parametrize("lam", [0.1, 7.0, 1e3])
    def test_scale_invariant(self, lam):
        rng = np.random.default_rng(2)
        bank = random_bank(rng, 3)
        test = [seq(rng.normal(0, 2, (6, 2)), f"s{i % 3}") for i in range(9)]
        base = distortion_stats(bank, 1, test)
        scaled = distortion_stats(bank.scaled(lam), 1, [t.scaled(lam) for t in test])
        for a, b in zip(base, scaled):
            assert b.mean_self == pytest.approx(a.mean_self * lam ** 2, rel=1e-9)
            assert b.std_other == pytest.approx(a.std_other * lam ** 2, rel=1e-9)
            assert b.ratio == pytest.approx(a.ratio, rel=1e-9)


class TestHistogram:
    def test_equal_values(self):
        bank = ModelBank(["A", "B"], [family([[0.0]]), family([[0.0]])])
        test = [seq([[2.0]], "A"), seq([[-2.0]], "B"), seq([[2.0]], "B")]
        counts, edges = distortion_histogram(bank, test, 0, n_bins=5)
        assert np.count_nonzero(counts) == 1
        assert edges[0] == 0 and edges[-1] == 4.0

    def test_conservation(self):
        rng = np.random.default_rng(4)
        bank = random_bank(rng, 3)
        test = [seq(rng.normal(0, 2, (5, 2)), f"s{i % 3}") for i in range(10)]
        for b in range(3):
            counts, _ = distortion_histogram(bank, test, b)
            assert counts.sum() == 10 and len(counts) == 20

    def test_bits_range(self, two_points):
        with pytest.raises(ValueError):
            distortion_histogram(two_points, [seq([[0.0, 0.0]], "s1")], 1)


def test_bank_validation():
    with pytest.raises(ValueError):
        ModelBank(["only"], [family([[0.0]])])
    with pytest.raises(ValueError):
        ModelBank(["a", "b"], [family([[0.0]]), family([[0.0]], [[0.0], [1.0]])])
    assert uniform_assignment(ModelBank(["a", "b"], [family([[0.0]])] * 2), 0) == {"a": 0, "b": 0}
