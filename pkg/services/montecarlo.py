"""
Reproducible chunked Monte Carlo execution.

Trials are split into fixed-size chunks. Chunk ``c`` of job ``job`` draws from
an independent stream derived from ``SeedSequence(seed, spawn_key=(job, c))``,
so results depend only on the seed and never on the worker count or on the
order in which chunks finish.
"""

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 20_000


@dataclass(frozen=True)
class Estimate:
    """Sample mean with its standard error."""

    mean: float
    stderr: float
    trials: int


def chunk_generator(seed: int, job: int, chunk: int) -> np.random.Generator:
    """Random stream owned by one chunk of one job."""
    sequence = np.random.SeedSequence(seed, spawn_key=(job, chunk))
    return np.random.Generator(np.random.PCG64(sequence))


def chunk_sizes(trials: int, chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[int]:
    """Partition of ``trials`` into chunks (last chunk may be short)."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    full, rest = divmod(trials, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def run_chunks(
    sampler: Callable[[int, np.random.Generator], np.ndarray],
    trials: int,
    seed: int,
    job: int = 0,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> np.ndarray:
    """
    Run ``sampler(size, rng)`` over all chunks and concatenate the samples.

    Args:
        sampler: Function returning ``size`` samples (first axis) from ``rng``
        trials: Total number of samples
        seed: Master seed
        job: Job index separating independent experiments under one seed
        workers: Thread count
        chunk_size: Samples per chunk

    Returns:
        Samples in chunk-index order
    """
    sizes = chunk_sizes(trials, chunk_size)

    def work(index: int) -> np.ndarray:
        rng = chunk_generator(seed, job, index)
        samples = sampler(sizes[index], rng)
        logger.debug(f"Job {job} chunk {index}: {sizes[index]} samples")
        return samples

    if workers <= 1 or len(sizes) == 1:
        parts = [work(index) for index in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, range(len(sizes))))

    return np.concatenate(parts, axis=0)


def estimate_mean(
    sampler: Callable[[int, np.random.Generator], np.ndarray],
    trials: int,
    seed: int,
    job: int = 0,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> Estimate:
    """Mean and standard error of scalar samples drawn chunk-wise."""
    samples = run_chunks(sampler, trials, seed, job, workers, chunk_size).astype(float)
    return summarize(samples)


def summarize(samples: np.ndarray) -> Estimate:
    """Mean and standard error of a 1-D sample array."""
    trials = int(samples.size)
    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return Estimate(mean=mean, stderr=stderr, trials=trials)
