"""Evolving neural trading agents in a simulated batch-auction market.

The pipeline: run_evolution breeds genomes against six static agent
species inside a frequent batch auction; generate_corpus harvests the
(price change, interest change) behavior of those markets; MarginalizedAlgo
turns a genome plus corpus into a standalone algorithm; run_episode
backtests it on resampled tick data under risk supervision.
"""
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
