"""Multi-interest pooling and interest selection."""

from __future__ import annotations

import numpy as np
import pytest
import torch

from oracles import oracle_pooling

from coactionrec.interests import (InterestParams, extract_interests,
                                   first_argmax, pooling_weights, score_item,
                                   select_interest)


def make_params(dim, pool_dim, interests, seed):
    gen = torch.Generator().manual_seed(seed)
    return InterestParams(dim=dim, pool_dim=pool_dim, interests=interests,
                          generator=gen)


def random_hidden(t, d, seed):
    gen = torch.Generator().manual_seed(seed)
    return torch.empty(t, d, dtype=torch.float64).uniform_(-1, 1, generator=gen)


class TestPooling:
    @pytest.mark.parametrize("t,d,a,k,seed", [
        (1, 3, 4, 2, 0),
        (4, 3, 5, 2, 1),
        (7, 6, 8, 4, 2),
    ])
    def test_matches_reference_implementation(self, t, d, a, k, seed):
        hidden = random_hidden(t, d, seed)
        params = make_params(d, a, k, seed + 50)
        want_w, want_o = oracle_pooling(hidden.numpy(),
                                        params.pool_hidden.detach().numpy(),
                                        params.pool_out.detach().numpy())
        got_w = pooling_weights(hidden, params).detach().numpy()
        got_o = extract_interests(hidden, params).detach().numpy()
        np.testing.assert_allclose(got_w, want_w, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(got_o, want_o, rtol=1e-10, atol=1e-12)

    def test_weights_rows_are_distributions_over_positions(self):
        hidden = random_hidden(5, 4, 3)
        params = make_params(4, 6, 3, 4)
        weights = pooling_weights(hidden, params).detach()
        assert weights.shape == (3, 5)
        np.testing.assert_allclose(weights.sum(dim=1).numpy(), np.ones(3),
                                   rtol=0, atol=1e-12)
        assert (weights >= 0).all()

    def test_single_position_makes_every_interest_that_row(self):
        hidden = random_hidden(1, 4, 5)
        params = make_params(4, 6, 3, 6)
        interests = extract_interests(hidden, params)
        for k in range(3):
            assert torch.allclose(interests[k], hidden[0], atol=1e-12)

    def test_interests_live_in_convex_hull_of_rows(self):
        # each coordinate of an interest is a convex combination of the
        # corresponding coordinate across positions
        hidden = random_hidden(6, 4, 7)
        params = make_params(4, 6, 3, 8)
        interests = extract_interests(hidden, params).detach()
        lo = hidden.min(dim=0).values
        hi = hidden.max(dim=0).values
        for k in range(3):
            assert ((interests[k] >= lo - 1e-12)
                    & (interests[k] <= hi + 1e-12)).all()

    def test_zero_pool_out_gives_mean_pooling(self):
        hidden = random_hidden(5, 4, 9)
        params = make_params(4, 6, 3, 10)
        with torch.no_grad():
            params.pool_out.zero_()
        interests = extract_interests(hidden, params)
        mean = hidden.mean(dim=0)
        for k in range(3):
            assert torch.allclose(interests[k], mean, atol=1e-12)


class TestFirstArgmax:
    def test_picks_first_of_tied_maxima(self):
        scores = torch.tensor([1.0, 3.0, 3.0, 2.0], dtype=torch.float64)
        assert first_argmax(scores) == 1

    def test_matches_torch_argmax_on_random_draws(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            vals = torch.from_numpy(
                rng.integers(0, 4, size=rng.integers(1, 8)).astype(np.float64))
            assert first_argmax(vals) == int(torch.argmax(vals))


class TestSelection:
    def test_picks_interest_with_highest_dot_product(self):
        interests = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
        target = torch.tensor([2.0, 1.0], dtype=torch.float64)
        idx, row = select_interest(interests, target)
        assert idx == 0
        assert torch.equal(row, interests[0])

    def test_identical_rows_select_index_zero(self):
        interests = torch.ones(3, 4, dtype=torch.float64)
        target = torch.randn(4, dtype=torch.float64)
        idx, _ = select_interest(interests, target)
        assert idx == 0

    def test_selection_invariant_to_positive_target_scaling(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            interests = torch.from_numpy(rng.normal(size=(4, 6)))
            target = torch.from_numpy(rng.normal(size=6))
            idx1, _ = select_interest(interests, target)
            idx2, _ = select_interest(interests, target * 7.5)
            assert idx1 == idx2

    def test_score_is_max_over_interests(self):
        interests = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
        item = torch.tensor([2.0, 1.0], dtype=torch.float64)
        assert score_item(interests, item).item() == pytest.approx(2.0)

    def test_score_matches_brute_force(self):
        rng = np.random.default_rng(15)
        for _ in range(100):
            interests = torch.from_numpy(rng.normal(size=(5, 3)))
            item = torch.from_numpy(rng.normal(size=3))
            want = max(float(interests[k] @ item) for k in range(5))
            assert score_item(interests, item).item() == pytest.approx(
                want, rel=1e-12)
