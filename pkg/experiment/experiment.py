"""
Synthetic generalization-gap experiment: regress y = sum of N standard
normals, grouped into n tokens of dimension d = N / n, with a DeepSets
model and record |test MSE - train MSE| per (n, seed).
"""

import asyncio
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from bounds.bounds import symmetric_invariant_bound
from common.constants import (
    adam_learning_rate,
    experiment_batch,
    experiment_epochs,
    experiment_equivariant_widths,
    experiment_head_widths,
    experiment_m_test,
    experiment_m_train,
    experiment_n_list,
    experiment_seeds,
    experiment_total_dim,
    summary_columns,
)
from common.exceptions import DimensionMismatchError, InvalidParameterError
from logger.logger import logger
from nets.deepsets import PoolKind, init_model
from nets.training import Dataset, mean_squared_error, train


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Configuration of a full run. Every n must divide ``total_dim``.
    """

    total_dim: int = experiment_total_dim
    n_list: tuple[int, ...] = experiment_n_list
    m_train: int = experiment_m_train
    m_test: int = experiment_m_test
    epochs: int = experiment_epochs
    batch: int = experiment_batch
    lr: float = adam_learning_rate
    seeds: tuple[int, ...] = experiment_seeds
    equivariant_widths: tuple[int, ...] = experiment_equivariant_widths
    head_widths: tuple[int, ...] = experiment_head_widths
    pool: PoolKind = PoolKind.SUM

    def __post_init__(self):
        for name in ("n_list", "seeds", "equivariant_widths", "head_widths"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        object.__setattr__(self, "pool", PoolKind(self.pool))
        self.validate()

    def validate(self):
        """
        Raises InvalidParameterError on inconsistent settings.
        """
        if not self.n_list or not self.seeds:
            raise InvalidParameterError("n_list and seeds must not be empty.")
        for n in self.n_list:
            if n < 1 or self.total_dim % n:
                raise InvalidParameterError(
                    f"n={n} does not divide N={self.total_dim}."
                )
        if self.m_train < 1 or self.m_test < 1 or self.epochs < 0:
            raise InvalidParameterError("Need m_train, m_test >= 1 and epochs >= 0.")
        if not 1 <= self.batch <= self.m_train:
            raise InvalidParameterError(
                f"Batch size {self.batch} outside 1..{self.m_train}."
            )
        if self.lr <= 0:
            raise InvalidParameterError(
                f"Learning rate must be positive, got {self.lr}."
            )

    def to_dict(self) -> dict:
        """JSON mirror."""
        data = asdict(self)
        data["pool"] = str(self.pool)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Builds a config from JSON; missing keys keep their defaults."""
        known = cls.__dataclass_fields__.keys()
        unknown = set(data) - set(known)
        if unknown:
            raise InvalidParameterError(f"Unknown config keys: {sorted(unknown)}.")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        """Loads a JSON config file."""
        with open(path, encoding="utf-8") as file:
            return cls.from_dict(json.load(file))


@dataclass(frozen=True)
class GapRecord:
    """
    Final train and test errors of one (n, seed) cell.
    """

    n: int
    seed: int
    train_mse: float
    test_mse: float
    gap: float
    log10_gap: float

    @classmethod
    def from_errors(
        cls, n: int, seed: int, train_mse: float, test_mse: float
    ) -> "GapRecord":
        """Derives gap and log10 gap from the two errors."""
        if not (math.isfinite(train_mse) and math.isfinite(test_mse)):
            raise InvalidParameterError(f"Non-finite losses for n={n}, seed={seed}.")
        gap = abs(test_mse - train_mse)
        return cls(
            n=n,
            seed=seed,
            train_mse=train_mse,
            test_mse=test_mse,
            gap=gap,
            log10_gap=math.log10(gap) if gap > 0 else -math.inf,
        )

    def to_dict(self) -> dict:
        """JSON mirror."""
        return asdict(self)


@dataclass
class CellResult:
    """
    Gap record and per-epoch training error of one cell.
    """

    record: GapRecord
    history: list[float] = field(default_factory=list)


@dataclass
class ExperimentResult:
    """
    Records sorted by (n, seed), the per-n summary and the loss histories.
    """

    records: list[GapRecord]
    summary: pd.DataFrame
    histories: dict[tuple[int, int], list[float]] = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentReport:
    """
    Trend statistics of a summary table. The sign of the slope and the
    Spearman correlation are the checked quantities; the theory flags are
    informational.
    """

    n_list: tuple[int, ...]
    mean_gap: tuple[float, ...]
    std_gap: tuple[float, ...]
    mean_log10_gap: tuple[float, ...]
    theory_log10: tuple[float, ...]
    slope: float
    slope_sign: int
    spearman_rho: float
    theory_above_gap: tuple[bool, ...]
    zero_gaps: tuple[int, ...]

    def to_dict(self) -> dict:
        """JSON mirror; NaN statistics become None."""

        def clean(value):
            if isinstance(value, float) and not math.isfinite(value):
                return None
            return value

        return {
            key: [clean(v) for v in value] if isinstance(value, tuple) else clean(value)
            for key, value in asdict(self).items()
        }


def generate_dataset(
    n: int,
    d: int,
    m: int,
    seed: int | np.random.SeedSequence,
    total_dim: int = experiment_total_dim,
) -> Dataset:
    """
    m samples of N = n d standard normals (numpy's ziggurat sampler), reshaped
    into n tokens of dimension d, with y the sum of all entries.
    """
    if n * d != total_dim:
        raise DimensionMismatchError(f"n * d = {n * d} differs from N = {total_dim}.")
    if m < 1:
        raise InvalidParameterError(f"Need m >= 1, got {m}.")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((m, total_dim))
    inputs = raw.reshape(m, n, d)
    return Dataset(inputs=inputs, targets=inputs.sum(axis=(1, 2)))


def cell_streams(seed: int) -> dict[str, np.random.SeedSequence]:
    """
    Independent streams of one seed. Data streams do not depend on n, so all
    n see the same raw normals grouped differently.
    """
    train_data, test_data, init, shuffle = np.random.SeedSequence(seed).spawn(4)
    return {"train": train_data, "test": test_data, "init": init, "shuffle": shuffle}


def run_cell(config: ExperimentConfig, n: int, seed: int) -> CellResult:
    """
    Trains a fresh model for one (n, seed) and scores it.
    """
    d = config.total_dim // n
    streams = cell_streams(seed)
    train_set = generate_dataset(
        n, d, config.m_train, streams["train"], config.total_dim
    )
    test_set = generate_dataset(n, d, config.m_test, streams["test"], config.total_dim)
    model = init_model(
        d, config.equivariant_widths, config.head_widths, config.pool, streams["init"]
    )
    result = train(
        model, train_set, config.epochs, config.batch, streams["shuffle"], config.lr
    )
    record = GapRecord.from_errors(
        n,
        seed,
        mean_squared_error(result.model, train_set),
        mean_squared_error(result.model, test_set),
    )
    return CellResult(record=record, history=result.history)


def theory_log10(n: int, m: int) -> float:
    """
    log10 sqrt(1 / (n! m^{2/n})), the invariant main term with C = 1.
    """
    return symmetric_invariant_bound(n, m, 0.05).main_term_log10


def summarize(records: list[GapRecord], m_train: int) -> pd.DataFrame:
    """
    Per n: mean and population std of log10 gaps and the theory value.
    Seeds with a zero gap have no log10 gap and are left out; an n
    where every seed is left out gets NaN statistics.
    """
    frame = pd.DataFrame([r.to_dict() for r in records])
    rows = []
    for n, group in frame.groupby("n", sort=True):
        values = group.sort_values("seed")["log10_gap"].to_numpy()
        finite = values[np.isfinite(values)]
        if finite.size < values.size:
            logger.warning(
                "n=%s: %s of %s seeds have a zero gap.",
                n,
                values.size - finite.size,
                values.size,
            )
        rows.append(
            [
                int(n),
                float(np.mean(finite)) if finite.size else math.nan,
                float(np.std(finite)) if finite.size else math.nan,
                theory_log10(int(n), m_train),
            ]
        )
    return pd.DataFrame(rows, columns=summary_columns)


def build_report(records: list[GapRecord], summary: pd.DataFrame) -> ExperimentReport:
    """
    Least-squares slope of mean log10 gap against log10 theory over the n
    with a finite mean, Spearman correlation of n with the mean gap, and
    per-n theory >= gap flags.
    """
    frame = pd.DataFrame([r.to_dict() for r in records])
    gaps = frame.groupby("n", sort=True)["gap"]
    mean_gap = gaps.mean().to_numpy()
    std_gap = gaps.std(ddof=0).to_numpy()
    zero_gaps = gaps.apply(lambda values: int((values == 0).sum())).to_numpy()
    n_values = summary["n"].to_numpy()
    theory = summary["theory_log10"].to_numpy()
    mean_log10 = summary["mean_log10_gap"].to_numpy()
    finite = np.isfinite(mean_log10)

    slope = math.nan
    if finite.sum() >= 2:
        slope = float(np.polyfit(theory[finite], mean_log10[finite], 1)[0])
    rho = math.nan
    if len(n_values) >= 2:
        rho = float(spearmanr(n_values, mean_gap).statistic)

    return ExperimentReport(
        n_list=tuple(int(n) for n in n_values),
        mean_gap=tuple(float(v) for v in mean_gap),
        std_gap=tuple(float(v) for v in std_gap),
        mean_log10_gap=tuple(float(v) for v in mean_log10),
        theory_log10=tuple(float(v) for v in theory),
        slope=slope,
        slope_sign=int(np.sign(slope)) if math.isfinite(slope) else 0,
        spearman_rho=rho,
        # A gap of zero sits below any bound.
        theory_above_gap=tuple(
            bool(not ok or t >= g) for t, g, ok in zip(theory, mean_log10, finite)
        ),
        zero_gaps=tuple(int(v) for v in zero_gaps),
    )


async def run_experiment_async(
    config: ExperimentConfig, workers: int = 1
) -> ExperimentResult:
    """
    Runs every (n, seed) cell in a process pool and aggregates by sorted key.
    :param config: ExperimentConfig
    :param workers: pool size
    :return: ExperimentResult
    """
    loop = asyncio.get_running_loop()
    cells = [
        (n, seed)
        for n in sorted(set(config.n_list))
        for seed in sorted(set(config.seeds))
    ]
    logger.info("Running %s cells with %s workers.", len(cells), workers)

    async def run_one(pool: ProcessPoolExecutor, n: int, seed: int) -> CellResult:
        try:
            result = await loop.run_in_executor(pool, run_cell, config, n, seed)
        except Exception:
            logger.error("Cell n=%s seed=%s failed.", n, seed)
            raise
        logger.info(
            "Cell n=%s seed=%s finished with gap %s.", n, seed, result.record.gap
        )
        return result

    with ProcessPoolExecutor(max_workers=max(1, workers)) as pool:
        results = await asyncio.gather(*(run_one(pool, n, seed) for n, seed in cells))

    records = [result.record for result in results]
    return ExperimentResult(
        records=records,
        summary=summarize(records, config.m_train),
        histories={
            (result.record.n, result.record.seed): result.history for result in results
        },
    )


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """
    Synchronous entry point of ``run_experiment_async``.
    """
    return asyncio.run(run_experiment_async(config, workers))
