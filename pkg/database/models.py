# pylint: disable=too-few-public-methods
"""
This module contains the SQLAlchemy models for the result store.
"""

from typing import List

from sqlalchemy import (
    JSON,
    Column,
    DateTime,
    Float,
    ForeignKey,
    Integer,
    MetaData,
)
from sqlalchemy.orm import Mapped, declarative_base, relationship

meta = MetaData()
Base = declarative_base(metadata=meta)


class ExperimentRun(Base):
    """
    One finished experiment run and the configuration it was started with.
    """

    __tablename__ = "experiment_run"

    id: Mapped[int] = Column(Integer, primary_key=True, autoincrement=True)
    started_time = Column(DateTime)
    finished_time = Column(DateTime)
    config: Mapped[dict] = Column(JSON)
    records: Mapped[List["GapRecordRow"]] = relationship(lazy="selectin")


class GapRecordRow(Base):
    """
    Train/test errors of one (n, seed) cell.
    """

    __tablename__ = "gap_record"

    id: Mapped[int] = Column(Integer, primary_key=True, autoincrement=True)
    n: Mapped[int] = Column(Integer)
    seed: Mapped[int] = Column(Integer)
    train_mse: Mapped[float] = Column(Float)
    test_mse: Mapped[float] = Column(Float)
    gap: Mapped[float] = Column(Float)
    log10_gap: Mapped[float] = Column(Float)
    run_id: Mapped[int] = Column(ForeignKey("experiment_run.id"))
