"""Sandboxed SQLite execution and result-set comparison (the EX metric)."""

from __future__ import annotations

import logging
import sqlite3
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Union

log = logging.getLogger(__name__)

EVAL_TIMEOUT = 30.0
REWARD_TIMEOUT = 5.0

# VM instructions between deadline checks
_PROGRESS_STEPS = 1000

_DENIED_ACTIONS = {
    sqlite3.SQLITE_ATTACH, sqlite3.SQLITE_DETACH, sqlite3.SQLITE_INSERT,
    sqlite3.SQLITE_UPDATE, sqlite3.SQLITE_DELETE, sqlite3.SQLITE_DROP_TABLE,
    sqlite3.SQLITE_CREATE_TABLE, sqlite3.SQLITE_ALTER_TABLE,
}


class DatabaseNotFoundError(FileNotFoundError):
    """The database file for an example does not exist (infrastructure error)."""


@dataclass(frozen=True)
class DatabaseHandle:
    db_id: str
    path: Path

    @classmethod
    def from_root(cls, root, db_id: str) -> "DatabaseHandle":
        """BIRD/Spider layout: ``<root>/<db_id>/<db_id>.sqlite``."""
        return cls(db_id, Path(root) / db_id / f"{db_id}.sqlite")


@dataclass(frozen=True)
class Success:
    rows: tuple
    elapsed: float


@dataclass(frozen=True)
class SqlError:
    message: str


@dataclass(frozen=True)
class Timeout:
    limit: float


ExecutionOutcome = Union[Success, SqlError, Timeout]


# pragmas whose argument names an object to describe rather than a value to set
_INTROSPECTION_PRAGMAS = {
    "table_info", "table_xinfo", "index_info", "index_xinfo", "index_list",
    "foreign_key_list", "table_list",
}


def _authorizer(action, arg1, arg2, *_rest):
    if action in _DENIED_ACTIONS:
        return sqlite3.SQLITE_DENY
    if action == sqlite3.SQLITE_PRAGMA and arg2 is not None and arg1.lower() not in _INTROSPECTION_PRAGMAS:
        return sqlite3.SQLITE_DENY  # pragma assignments change connection state
    return sqlite3.SQLITE_OK


def connect_readonly(path: Path) -> sqlite3.Connection:
    if not Path(path).is_file():
        raise DatabaseNotFoundError(f"database file not found: {path}")
    conn = sqlite3.connect(f"file:{Path(path).resolve()}?mode=ro", uri=True, check_same_thread=False)
    conn.set_authorizer(_authorizer)
    return conn


def _run(conn: sqlite3.Connection, sql: str, timeout: float) -> ExecutionOutcome:
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    start = time.monotonic()
    deadline = start + timeout
    expired = False

    def check():
        nonlocal expired
        if time.monotonic() > deadline:
            expired = True
            return 1
        return 0

    conn.set_progress_handler(check, _PROGRESS_STEPS)
    try:
        cur = conn.execute(sql)
        rows = tuple(tuple(r) for r in cur.fetchall())
    except (sqlite3.Error, sqlite3.Warning, ValueError, OverflowError) as exc:
        if expired:
            return Timeout(timeout)
        return SqlError(str(exc))
    finally:
        conn.set_progress_handler(None, 0)
    return Success(rows, time.monotonic() - start)


def execute(db: DatabaseHandle, sql: str, timeout: float = EVAL_TIMEOUT) -> ExecutionOutcome:
    """Run ``sql`` on a fresh read-only connection."""
    conn = connect_readonly(db.path)
    try:
        return _run(conn, sql, timeout)
    finally:
        conn.close()


class ConnectionPool:
    """One read-only connection per (thread, db_id); discarded after a timeout."""

    def __init__(self, root=None):
        self.root = Path(root) if root is not None else None
        self._local = threading.local()
        self._lock = threading.Lock()
        self._all: list = []

    def handle(self, db_id: str) -> DatabaseHandle:
        if self.root is None:
            raise ValueError("pool has no database root")
        return DatabaseHandle.from_root(self.root, db_id)

    def _conns(self) -> dict:
        conns = getattr(self._local, "conns", None)
        if conns is None:
            conns = self._local.conns = {}
        return conns

    def execute(self, db: Union[DatabaseHandle, str], sql: str, timeout: float = EVAL_TIMEOUT) -> ExecutionOutcome:
        if isinstance(db, str):
            db = self.handle(db)
        conns = self._conns()
        conn = conns.get(db.path)
        if conn is None:
            conn = conns[db.path] = connect_readonly(db.path)
            with self._lock:
                self._all.append(conn)
        outcome = _run(conn, sql, timeout)
        if isinstance(outcome, Timeout):
            log.debug("discarding connection to %s after timeout", db.db_id)
            conns.pop(db.path, None)
            with self._lock:
                self._all.remove(conn)
            conn.close()
        return outcome

    def close(self) -> None:
        with self._lock:
            for conn in self._all:
                conn.close()
            self._all.clear()
        self._local = threading.local()


def results_match(a, b, order_sensitive: bool = False) -> bool:
    """Row-set equality (BIRD convention) or ordered row-list equality."""
    a_rows = a.rows if isinstance(a, Success) else a
    b_rows = b.rows if isinstance(b, Success) else b
    if order_sensitive:
        return [tuple(r) for r in a_rows] == [tuple(r) for r in b_rows]
    return set(map(tuple, a_rows)) == set(map(tuple, b_rows))
