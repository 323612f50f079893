"""
Tests for chunked, reproducible Monte Carlo.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from services.montecarlo import chunk_generator, chunk_sizes, estimate_mean, run_chunks, summarize


def _uniform(size: int, rng: np.random.Generator) -> np.ndarray:
    return rng.random(size)


class TestMonteCarlo:
    """Test cases for the chunk/seed contract."""

    def test_chunk_sizes(self) -> None:
        """Test the split of trials into chunks."""
        assert chunk_sizes(45_000, 20_000) == [20_000, 20_000, 5_000]
        assert chunk_sizes(10, 20_000) == [10]

    def test_invalid_trials(self) -> None:
        """Test that zero trials are rejected."""
        with pytest.raises(ValueError):
            chunk_sizes(0)

    def test_streams_are_reproducible(self) -> None:
        """Test that a (seed, job, chunk) triple always yields the same stream."""
        first = chunk_generator(1, 2, 3).random(5)
        second = chunk_generator(1, 2, 3).random(5)
        np.testing.assert_array_equal(first, second)

    def test_streams_are_distinct(self) -> None:
        """Test that different jobs and chunks get different streams."""
        base = chunk_generator(1, 0, 0).random(5)
        assert not np.array_equal(base, chunk_generator(1, 1, 0).random(5))
        assert not np.array_equal(base, chunk_generator(1, 0, 1).random(5))

    def test_worker_count_does_not_change_samples(self) -> None:
        """Test bit-identical samples for 1 and 4 workers."""
        single = run_chunks(_uniform, 50_000, seed=9, workers=1, chunk_size=7_000)
        pooled = run_chunks(_uniform, 50_000, seed=9, workers=4, chunk_size=7_000)
        np.testing.assert_array_equal(single, pooled)
        assert single.size == 50_000

    def test_estimate_mean(self) -> None:
        """Test that the mean of U(0,1) is 1/2 within 4 standard errors."""
        estimate = estimate_mean(_uniform, 100_000, seed=4)
        assert estimate.trials == 100_000
        assert abs(estimate.mean - 0.5) < 4.0 * estimate.stderr

    def test_summarize_single_sample(self) -> None:
        """Test that one sample has zero standard error."""
        estimate = summarize(np.array([0.25]))
        assert estimate.mean == 0.25
        assert estimate.stderr == 0.0
