"""
Database manager module.
"""

import threading
from datetime import datetime

from sqlalchemy import Result, exc, func, select
from sqlalchemy.ext.asyncio import (
    AsyncEngine,
    async_sessionmaker,
    create_async_engine,
)

from database.models import ExperimentRun, GapRecordRow, meta
from logger.logger import logger

record_fields = ("n", "seed", "train_mse", "test_mse", "gap", "log10_gap")


def sqlite_url(database_path: str) -> str:
    """
    Async SQLite URL of a database file.
    """
    return "sqlite+aiosqlite:///" + database_path


class DatabaseManager:
    """
    Class for interacting with the result store.
    """

    def __init__(self, url: str):
        self.db_connections = threading.local()
        self.url = url

    def async_engine(self) -> AsyncEngine:
        """
        Returns the async engine.
        """
        if not hasattr(self.db_connections, "engine"):
            logger.debug("Getting async engine.")
            self.db_connections.engine = create_async_engine(self.url)
            logger.debug("Creating database engine finished.")
        return self.db_connections.engine

    def async_session_factory(self) -> async_sessionmaker:
        """
        Returns the async session factory.
        :return:
        """
        logger.debug("Getting async session factory.")
        if not hasattr(self.db_connections, "session_factory"):
            engine = self.async_engine()
            self.db_connections.session_factory = async_sessionmaker(
                bind=engine, expire_on_commit=False
            )
        return self.db_connections.session_factory

    async def cleanup(self):
        """
        Cleans up the database engine.
        :return:
        """
        logger.debug("Cleaning database engine.")
        if hasattr(self.db_connections, "engine"):
            await self.db_connections.engine.dispose()
        logger.debug("Cleaning database finished.")

    async def create_models(self):
        """
        Creates all required database tables from the declared models.
        """
        logger.debug("Creating ORM modules.")
        async with self.async_engine().begin() as conn:
            await conn.run_sync(meta.create_all)
        logger.debug("Finished creating ORM modules.")

    async def save_run(
        self,
        config: dict,
        records: list[dict],
        started_time: datetime,
    ) -> int:
        """
        Saves a finished run with all of its gap records.
        :param config: experiment configuration as JSON-ready dict
        :param records: dicts with the keys of ``record_fields``
        :param started_time: when the run started
        :return: run id
        """
        logger.debug("Saving run with %s records to the database.", len(records))
        async with self.async_session_factory()() as session:
            try:
                run = ExperimentRun(
                    started_time=started_time,
                    finished_time=datetime.now(),
                    config=config,
                )
                session.add(run)
                for record in records:
                    row = GapRecordRow(**{key: record[key] for key in record_fields})
                    session.add(row)
                    run.records.append(row)

                await session.flush()
                await session.commit()
                logger.debug("Run %s saved.", run.id)
                return run.id
            except exc.SQLAlchemyError as e:
                await session.rollback()
                logger.warning("Error saving run to the database with error: %s", e)
                raise

    async def get_latest_run_id(self) -> int | None:
        """
        Returns the id of the most recently stored run, if any.
        """
        logger.debug("Getting latest run id.")
        async with self.async_session_factory()() as session:
            result: Result = await session.execute(select(func.max(ExperimentRun.id)))
            return result.scalar()

    async def get_run_config(self, run_id: int) -> dict | None:
        """
        Returns the configuration a run was started with.
        """
        async with self.async_session_factory()() as session:
            run = await session.get(ExperimentRun, run_id)
            return None if run is None else dict(run.config)

    async def get_records(self, run_id: int) -> list[dict]:
        """
        Returns the gap records of a run ordered by (n, seed).
        """
        logger.debug("Getting records of run %s.", run_id)
        async with self.async_session_factory()() as session:
            stmt = (
                select(GapRecordRow)
                .where(GapRecordRow.run_id == run_id)
                .order_by(GapRecordRow.n, GapRecordRow.seed)
            )
            result: Result = await session.execute(stmt)
            rows = result.scalars().all()
            logger.debug("Getting %s records finished.", len(rows))
            return [{key: getattr(row, key) for key in record_fields} for row in rows]
