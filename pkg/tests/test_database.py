"""Tests for the SQLite result store."""

import asyncio
from datetime import datetime

from database.database_manager import DatabaseManager, sqlite_url
from experiment.experiment import ExperimentConfig, GapRecord


def _rows() -> list[dict]:
    return [
        GapRecord.from_errors(n, seed, 0.25 * seed, 0.1 + n).to_dict()
        for n, seed in [(4, 2), (2, 1), (4, 1), (2, 2)]
    ]


async def _store_and_load(path: str):
    manager = DatabaseManager(url=sqlite_url(path))
    await manager.create_models()
    empty = await manager.get_latest_run_id()
    config = ExperimentConfig(n_list=(2, 4), seeds=(1, 2)).to_dict()
    first = await manager.save_run(config, _rows(), datetime(2024, 1, 1))
    second = await manager.save_run(config, _rows()[:1], datetime(2024, 1, 2))
    latest = await manager.get_latest_run_id()
    stored_config = await manager.get_run_config(first)
    records = await manager.get_records(first)
    missing = await manager.get_run_config(second + 100)
    await manager.cleanup()
    return empty, first, second, latest, stored_config, records, missing


def test_runs_round_trip(tmp_path):
    path = str(tmp_path / "runs.sqlite")
    empty, first, second, latest, config, records, missing = asyncio.run(
        _store_and_load(path)
    )
    assert empty is None
    assert second > first
    assert latest == second
    assert missing is None
    expected_config = ExperimentConfig(n_list=(2, 4), seeds=(1, 2))
    assert ExperimentConfig.from_dict(config) == expected_config

    assert [(r["n"], r["seed"]) for r in records] == [(2, 1), (2, 2), (4, 1), (4, 2)]
    expected = {(r["n"], r["seed"]): r for r in _rows()}
    for record in records:
        stored = expected[(record["n"], record["seed"])]
        assert record == stored
        assert GapRecord(**record) == GapRecord(**stored)
