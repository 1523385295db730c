import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from puf_forge.guesswork import (
    binary_entropy,
    guesswork_distance,
    conditional_guesswork_moment_exact,
    effective_bits,
    guess1_probability,
    guesswork_growth_rate,
    guesswork_moment_exact,
    guesswork_report,
    iid_pair_joint,
    min_entropy,
    mutual_information,
    noisy_guesswork_exponent,
    noisy_guesswork_moment_exact,
    renyi_conditional_entropy,
    renyi_entropy,
    shannon_entropy,
)
from puf_forge.prob import BitPMF, JointPMF, ProbabilityError, StringPMF, bsc_joint, iid_string_pmf, product_joint

from conftest import joint_arrays, pmf_vectors

INDEPENDENT = JointPMF([[0.25, 0.25], [0.25, 0.25]])
IDENTICAL = JointPMF([[0.5, 0.0], [0.0, 0.5]])
CORRELATED = JointPMF([[0.4, 0.1], [0.1, 0.4]])


def brute_moment(probs, rho):
    """Oracle: guess outcomes one by one in a dict-sorted order."""
    order = sorted(range(len(probs)), key=lambda i: (-probs[i], i))
    return sum((k + 1) ** rho * probs[i] for k, i in enumerate(order))


class TestEntropies:
    @pytest.mark.parametrize("p, expected", [(0.5, 1.0), (0.15, 0.60984), (0.0, 0.0)])
    def test_shannon(self, p, expected):
        assert shannon_entropy(BitPMF(p)) == pytest.approx(expected, abs=1e-5)

    def test_shannon_matches_published_noise_gap(self):
        # 1 - H(0.15) is the per-bit value quoted for a 15 % error rate
        assert 1 - shannon_entropy(BitPMF(0.15)) == pytest.approx(0.3902, abs=1e-4)

    def test_renyi_half(self):
        assert renyi_entropy(BitPMF(0.5), 0.5) == pytest.approx(1.0)
        assert renyi_entropy(BitPMF(0.45), 0.5) == pytest.approx(0.9964, abs=1e-4)
        oracle = 2 * math.log2(math.sqrt(0.35) + math.sqrt(0.65))
        assert renyi_entropy(BitPMF(0.35), 0.5) == pytest.approx(oracle, abs=1e-12)
        assert renyi_entropy(BitPMF(0.35), 0.5) == pytest.approx(0.96647, abs=1e-4)

    @pytest.mark.parametrize("alpha", [0.0, -1.0, 1.0])
    def test_renyi_domain(self, alpha):
        with pytest.raises(ProbabilityError):
            renyi_entropy(BitPMF(0.3), alpha)

    def test_product_form_is_additive(self):
        lazy = iid_string_pmf(0.3, 40, explicit=False)
        assert shannon_entropy(lazy) == pytest.approx(40 * binary_entropy(0.3))
        assert renyi_entropy(lazy, 0.5) == pytest.approx(40 * renyi_entropy(BitPMF(0.3), 0.5))
        small = iid_string_pmf(0.3, 6)
        assert renyi_entropy(small, 0.5) == pytest.approx(6 * renyi_entropy(BitPMF(0.3), 0.5))

    @pytest.mark.parametrize("p, expected", [(0.5, 1.0), (0.3, -math.log2(0.7))])
    def test_min_entropy(self, p, expected):
        assert min_entropy(BitPMF(p)) == pytest.approx(expected)
        assert min_entropy(BitPMF(0.3)) == pytest.approx(0.5146, abs=1e-4)

    def test_guess1_identity(self):
        pmf = iid_string_pmf(0.3, 2)
        assert guess1_probability(pmf) == pytest.approx(0.49)
        assert guess1_probability(pmf) == pytest.approx(2 ** (-2 * min_entropy(BitPMF(0.3))))
        lazy = iid_string_pmf(0.3, 30, explicit=False)
        assert guess1_probability(lazy) == pytest.approx(2 ** (-min_entropy(lazy)))

    @given(pmf_vectors(2, 16))
    def test_entropy_ordering(self, p):
        h_half, h, h_min = renyi_entropy(p, 0.5), shannon_entropy(p), min_entropy(p)
        assert h_half >= h - 1e-9
        assert h >= h_min - 1e-9


class TestConditional:
    def test_renyi_conditional_examples(self):
        assert renyi_conditional_entropy(INDEPENDENT, 1) == pytest.approx(1.0)
        assert renyi_conditional_entropy(IDENTICAL, 1) == pytest.approx(0.0, abs=1e-12)
        oracle = math.log2(2 * (math.sqrt(0.4) + math.sqrt(0.1)) ** 2)
        assert renyi_conditional_entropy(CORRELATED, 1) == pytest.approx(oracle, abs=1e-12)
        assert renyi_conditional_entropy(CORRELATED, 1) == pytest.approx(0.84800, abs=1e-4)

    @pytest.mark.parametrize("joint, expected", [
        (INDEPENDENT, 0.0), (IDENTICAL, 1.0), (CORRELATED, 1 - binary_entropy(0.8)),
    ])
    def test_mutual_information(self, joint, expected):
        assert mutual_information(joint) == pytest.approx(expected, abs=1e-12)
        assert mutual_information(CORRELATED) == pytest.approx(0.27807, abs=1e-4)

    def test_guesswork_distance(self):
        assert guesswork_distance(INDEPENDENT, 1) == pytest.approx(0.0, abs=1e-12)
        assert guesswork_distance(IDENTICAL, 1) == pytest.approx(1.0)
        assert guesswork_distance(CORRELATED, 1) == pytest.approx(0.152, abs=1e-3)

    def test_guesswork_distance_undefined(self):
        with pytest.raises(ProbabilityError, match="undefined"):
            guesswork_distance(JointPMF([[0.5, 0.5], [0.0, 0.0]]), 1)

    @given(joint_arrays(), st.sampled_from([0.5, 1.0, 2.0]))
    def test_distance_bounded(self, probs, rho):
        if min(probs.sum(axis=1)) < 1e-9:
            return
        g = guesswork_distance(probs, rho)
        assert 0.0 <= g <= 1.0
        h_x = renyi_entropy(probs.sum(axis=1), 1 / (1 + rho))
        h_xy = renyi_conditional_entropy(probs, rho)
        assert (g < 1e-12) == (abs(h_x - h_xy) < 1e-12 * max(h_x, 1))


class TestExactMoments:
    @pytest.mark.parametrize("pmf, rho, expected", [
        (iid_string_pmf(0.5, 3), 1, 4.5),
        (iid_string_pmf(0.3, 2), 1, 1.90),
        (iid_string_pmf(0.3, 1), 2, 1.9),
    ])
    def test_hand_enumeration(self, pmf, rho, expected):
        assert guesswork_moment_exact(pmf, rho) == pytest.approx(expected)

    def test_over_cap(self):
        with pytest.raises(ProbabilityError, match="cap"):
            guesswork_moment_exact(iid_string_pmf(0.5, 30, explicit=False), 1)

    @given(pmf_vectors(2, 12), st.sampled_from([0.5, 1.0, 2.0, 3.7]))
    def test_matches_brute_oracle(self, probs, rho):
        assert guesswork_moment_exact(probs, rho) == pytest.approx(brute_moment(list(probs), rho))

    @settings(max_examples=30)
    @given(pmf_vectors(2, 5), st.sampled_from([0.5, 1.0, 2.0]))
    def test_dictionary_order_is_optimal(self, probs, rho):
        best = guesswork_moment_exact(probs, rho)
        for perm in itertools.permutations(range(len(probs))):
            cost = sum((k + 1) ** rho * probs[i] for k, i in enumerate(perm))
            assert best <= cost + 1e-12

    def test_tie_break_does_not_change_moment(self):
        probs = np.array([0.1, 0.3, 0.3, 0.3])
        assert guesswork_moment_exact(probs, 1.5) == pytest.approx(guesswork_moment_exact(probs[::-1], 1.5))

    def test_conditional_examples(self):
        assert conditional_guesswork_moment_exact(IDENTICAL, 1) == pytest.approx(1.0)
        assert conditional_guesswork_moment_exact(CORRELATED, 1) == pytest.approx(1.2)
        px = iid_string_pmf(0.3, 2).probs
        py = np.array([0.1, 0.2, 0.3, 0.4])
        joint = np.outer(px, py)
        assert conditional_guesswork_moment_exact(joint, 2) == pytest.approx(guesswork_moment_exact(px, 2))

    def test_zero_probability_observation_skipped(self):
        joint = np.array([[0.6, 0.0], [0.4, 0.0]])
        assert conditional_guesswork_moment_exact(joint, 1) == pytest.approx(1.4)

    @given(pmf_vectors(4, 16), st.sampled_from([0.5, 1.0, 2.0]))
    def test_conditioning_never_hurts(self, flat, rho):
        n = len(flat)
        rows = 2 if n % 2 == 0 else 1
        joint = flat.reshape(rows, -1) if rows == 2 else flat.reshape(1, -1)
        joint = joint.T  # x runs along the longer axis
        assert conditional_guesswork_moment_exact(joint, rho) <= guesswork_moment_exact(
            joint.sum(axis=1), rho) + 1e-12


class TestNoisyExact:
    @pytest.mark.parametrize("p, eps, m, rho", [
        (0.5, 0.1, 3, 1.0), (0.3, 0.2, 4, 2.0), (0.2, 0.05, 5, 0.5), (0.5, 0.5, 3, 1.0), (0.4, 0.0, 4, 1.0),
    ])
    def test_class_enumeration_matches_full_joint(self, p, eps, m, rho):
        brute = conditional_guesswork_moment_exact(iid_pair_joint(bsc_joint(p, eps), m), rho)
        assert noisy_guesswork_moment_exact(p, eps, m, rho) == pytest.approx(brute, rel=1e-12)

    def test_useless_observation(self):
        assert noisy_guesswork_moment_exact(0.5, 0.5, 10) == pytest.approx((2**10 + 1) / 2)

    def test_noiseless_observation_reveals_secret(self):
        assert noisy_guesswork_moment_exact(0.3, 0.0, 12) == pytest.approx(1.0)


class TestAsymptotics:
    @pytest.mark.parametrize("pmf, rho, expected", [
        (BitPMF(0.5), 1, 1.0),
        (BitPMF(0.3), 1, 2 * math.log2(math.sqrt(0.3) + math.sqrt(0.7))),
        (IDENTICAL, 1, 0.0),
    ])
    def test_growth_rate(self, pmf, rho, expected):
        assert guesswork_growth_rate(pmf, rho) == pytest.approx(expected, abs=1e-12)
        assert guesswork_growth_rate(BitPMF(0.3), 1) == pytest.approx(0.93849, abs=1e-5)

    @pytest.mark.parametrize("p, eps, expected, tol", [
        (0.5, 0.10, 0.531, 1e-3), (0.35, 0.05, 0.680, 1e-3), (0.5, 0.5, 0.0, 1e-12),
    ])
    def test_noisy_exponent(self, p, eps, expected, tol):
        assert noisy_guesswork_exponent(p, eps, 1) == pytest.approx(expected, abs=tol)

    def test_noisy_exponent_security_gap(self):
        gap = 128 * (noisy_guesswork_exponent(0.35, 0.05) - noisy_guesswork_exponent(0.5, 0.10))
        assert round(128 * noisy_guesswork_exponent(0.35, 0.05)) == 87
        assert round(128 * noisy_guesswork_exponent(0.5, 0.10)) == 68
        assert gap == pytest.approx(19, abs=0.5)

    def test_bias_symmetry(self):
        assert noisy_guesswork_exponent(0.65, 0.05) == noisy_guesswork_exponent(0.35, 0.05)

    @pytest.mark.parametrize("eps, expected", [(0.0012, 126.3), (0.15, 49.9), (0.0, 128.0)])
    def test_effective_bits(self, eps, expected):
        assert effective_bits(0.5, eps, 128) == pytest.approx(expected, abs=0.1)

    def test_effective_bits_oracle(self):
        for eps in (0.05, 0.10):
            assert effective_bits(0.5, eps, 128) == pytest.approx(128 * (1 - binary_entropy(eps)))

    def test_convergence_is_monotone(self):
        target = guesswork_growth_rate(BitPMF(0.3), 1)
        rates = [math.log2(guesswork_moment_exact(iid_string_pmf(0.3, m), 1)) / m for m in range(1, 21)]
        assert all(b >= a - 1e-9 for a, b in zip(rates, rates[1:]))
        assert all(r < target for r in rates)

    def test_report(self):
        report = guesswork_report(0.5, 0.0012, 128)
        assert report.effective_bits == pytest.approx(126.3, abs=0.1)
        assert report.exact_moment is None
        small = guesswork_report(0.5, 0.0, 8)
        assert small.exact_moment == pytest.approx(128.5)


def test_product_joint_measures_vanish():
    joint = product_joint(BitPMF(0.37), BitPMF(0.81))
    assert mutual_information(joint) == pytest.approx(0.0, abs=1e-12)
    assert guesswork_distance(joint) == pytest.approx(0.0, abs=1e-12)


def test_string_pmf_accepted_everywhere():
    pmf = StringPMF(2, probs=[0.49, 0.21, 0.21, 0.09])
    assert shannon_entropy(pmf) == pytest.approx(2 * binary_entropy(0.3))
