"""
Seeded, block-parallel Monte Carlo plumbing.

Every random quantity in reclab is computed in blocks of a fixed size. Each block gets its
own generator derived from (master_seed, stream, block index), and block results are
reduced in index order, so a result never depends on how many worker processes ran it.
"""
import logging
import math
from multiprocessing import Pool
from typing import Callable, NamedTuple, Sequence

import numpy as np

logger = logging.getLogger(__name__)

Z_95 = 1.96
DEFAULT_BLOCK_SIZE = 65536

# Independent random streams. A stream keeps two uses of the same master seed apart.
STREAM_INVARIANT = 0
STREAM_FLOW = 1
STREAM_TRAJECTORIES = 2
STREAM_MEASURE = 3
STREAM_CONDITIONED = 4
STREAM_ORBITS = 5
STREAM_DUALITY = 6
STREAM_ROOF = 7

_settings = {"workers": 1, "block_size": DEFAULT_BLOCK_SIZE}


class Estimate(NamedTuple):
    """
    A Monte Carlo estimate together with the half-width of its 95% confidence interval.
    """
    value: float
    half_width: float

    @classmethod
    def proportion(cls, hits: int, total: int) -> "Estimate":
        """
        Binomial proportion with a normal-approximation half-width.
        """
        p = hits / total
        return cls(p, Z_95 * math.sqrt(p * (1.0 - p) / total))

    @classmethod
    def mean(cls, values: np.ndarray) -> "Estimate":
        n = len(values)
        if n < 2:
            return cls(float(np.mean(values)), 0.0)
        return cls(float(np.mean(values)), Z_95 * float(np.std(values, ddof=1)) / math.sqrt(n))

    def scaled(self, factor: float) -> "Estimate":
        return Estimate(self.value * factor, self.half_width * abs(factor))


class BlockSeed(NamedTuple):
    """
    Identifies the random stream of one block.
    """
    master_seed: int
    stream: int
    index: int

    def rng(self, attempt: int = 0) -> np.random.Generator:
        return block_rng(self.master_seed, self.stream, self.index, attempt)


def block_rng(master_seed: int, stream: int, block: int, attempt: int = 0) -> np.random.Generator:
    """
    Derives the generator of one block.

    :param master_seed: The experiment's master seed.
    :param stream: One of the STREAM_* constants.
    :param block: The block index.
    :param attempt: Restart counter, used when a block has to be redrawn.
    :returns: A numpy Generator that depends only on the four arguments.
    """
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=(int(stream), int(block), int(attempt)))
    return np.random.default_rng(sequence)


def configure(workers: int | None = None, block_size: int | None = None):
    """
    Sets the process-wide parallelism budget. Only the runner should call this.
    """
    if workers is not None:
        if workers < 1:
            raise ValueError("workers must be at least 1.")
        _settings["workers"] = int(workers)
    if block_size is not None:
        if block_size < 1:
            raise ValueError("block_size must be at least 1.")
        _settings["block_size"] = int(block_size)


def workers() -> int:
    return _settings["workers"]


def block_size() -> int:
    return _settings["block_size"]


def split_blocks(count: int, size: int | None = None) -> list[int]:
    """
    Splits count items into blocks of the configured size; the last block may be short.
    """
    size = size or block_size()
    sizes = [size] * (count // size)
    if count % size:
        sizes.append(count % size)
    return sizes


def _run_block(job):
    task, seed, size, args = job
    return task(seed, size, *args)


def run_blocks(task: Callable, count: int, master_seed: int, stream: int, args: Sequence = (),
               size: int | None = None) -> list:
    """
    Runs task(seed: BlockSeed, block_size, *args) over all blocks of count items.

    Blocks run in a multiprocessing pool when more than one worker is configured. The
    returned list is always in block order.
    """
    sizes = split_blocks(count, size)
    jobs = [(task, BlockSeed(master_seed, stream, i), n, tuple(args)) for i, n in enumerate(sizes)]
    if workers() > 1 and len(jobs) > 1:
        logger.debug("Running %d blocks of %s on %d workers", len(jobs), task.__name__, workers())
        with Pool(processes=min(workers(), len(jobs))) as pool:
            return pool.map(_run_block, jobs)
    logger.debug("Running %d blocks of %s serially", len(jobs), task.__name__)
    return [_run_block(job) for job in jobs]
