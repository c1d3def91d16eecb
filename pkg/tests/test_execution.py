import hashlib
import sqlite3
import threading
import time

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqlrl.execution import (
    ConnectionPool,
    DatabaseHandle,
    DatabaseNotFoundError,
    SqlError,
    Success,
    Timeout,
    execute,
    results_match,
)

DIVERGENT = "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) SELECT MAX(x) FROM c"


@pytest.fixture
def toy_db(tmp_path):
    root = tmp_path / "root"
    path = root / "toy" / "toy.sqlite"
    path.parent.mkdir(parents=True)
    conn = sqlite3.connect(path)
    conn.executescript("""
        CREATE TABLE t (id INTEGER PRIMARY KEY, name TEXT, score REAL);
        INSERT INTO t VALUES (1, 'a', 1.5), (2, 'b', NULL), (3, 'a', 2.5);
    """)
    conn.commit()
    conn.close()
    return DatabaseHandle.from_root(root, "toy")


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_success(toy_db):
    out = execute(toy_db, "SELECT id, name FROM t ORDER BY id")
    assert isinstance(out, Success)
    assert out.rows == ((1, "a"), (2, "b"), (3, "a"))
    assert out.elapsed >= 0


def test_syntax_error(toy_db):
    out = execute(toy_db, "SELEC 1")
    assert isinstance(out, SqlError)
    assert "syntax" in out.message


def test_unknown_column_is_sql_error(toy_db):
    assert isinstance(execute(toy_db, "SELECT nope FROM t"), SqlError)


def test_timeout(toy_db):
    start = time.monotonic()
    out = execute(toy_db, DIVERGENT, timeout=0.1)
    elapsed = time.monotonic() - start
    assert out == Timeout(0.1)
    assert elapsed < 0.1 + 1.0  # ceiling plus scheduling slack


def test_non_positive_timeout_rejected(toy_db):
    with pytest.raises(ValueError):
        execute(toy_db, "SELECT 1", timeout=0)


def test_missing_database_is_infrastructure_error(tmp_path):
    with pytest.raises(DatabaseNotFoundError):
        execute(DatabaseHandle.from_root(tmp_path, "ghost"), "SELECT 1")
    assert not issubclass(DatabaseNotFoundError, sqlite3.Error)


@pytest.mark.parametrize("sql", [
    "INSERT INTO t VALUES (9, 'z', 0)",
    "UPDATE t SET name = 'q'",
    "DELETE FROM t",
    "DROP TABLE t",
    "CREATE TABLE u (x)",
    "ATTACH DATABASE ':memory:' AS other",
    "PRAGMA writable_schema = 1",
])
def test_writes_refused_and_file_untouched(toy_db, sql):
    before = digest(toy_db.path)
    out = execute(toy_db, sql)
    assert isinstance(out, SqlError)
    assert digest(toy_db.path) == before
    assert execute(toy_db, "SELECT COUNT(*) FROM t").rows == ((3,),)


def test_multiple_statements_rejected(toy_db):
    assert isinstance(execute(toy_db, "SELECT 1; SELECT 2"), SqlError)


def test_determinism_and_reflexivity(toy_db):
    a = execute(toy_db, "SELECT name, score FROM t")
    b = execute(toy_db, "SELECT name, score FROM t")
    assert a.rows == b.rows
    assert results_match(a, b)


class TestResultsMatch:
    def test_set_semantics(self):
        assert results_match([(1, "a"), (2, "b")], [(2, "b"), (1, "a")])

    def test_duplicates_collapse(self):
        # the BIRD evaluator compares set(fetchall()) on both sides
        assert set([(1,)]) == set([(1,), (1,)])
        assert results_match([(1,)], [(1,), (1,)])

    def test_order_sensitive(self):
        assert not results_match([(1,), (2,)], [(2,), (1,)], order_sensitive=True)
        assert results_match([(1,), (2,)], [(1,), (2,)], order_sensitive=True)

    def test_column_order_matters(self):
        assert not results_match([(1, "a")], [("a", 1)])

    def test_null_equals_null(self):
        assert results_match([(None, 1)], [(None, 1)])

    def test_accepts_outcomes(self):
        assert results_match(Success(((1,),), 0.0), Success(((1,),), 0.1))

    @given(st.lists(st.tuples(st.integers(0, 3), st.sampled_from("ab"))))
    def test_permutation_invariant(self, rows):
        assert results_match(rows, list(reversed(rows)))
        assert results_match(rows, rows, order_sensitive=True)


class TestPool:
    def test_reuses_connection_per_thread(self, toy_db):
        pool = ConnectionPool(toy_db.path.parent.parent)
        assert pool.execute("toy", "SELECT 1").rows == ((1,),)
        assert pool.execute(toy_db, "SELECT 2").rows == ((2,),)
        assert len(pool._all) == 1
        pool.close()

    def test_discards_connection_after_timeout(self, toy_db):
        pool = ConnectionPool(toy_db.path.parent.parent)
        pool.execute("toy", "SELECT 1")
        assert isinstance(pool.execute("toy", DIVERGENT, timeout=0.05), Timeout)
        assert pool._all == []
        assert pool.execute("toy", "SELECT 3").rows == ((3,),)
        pool.close()

    def test_concurrent_use(self, toy_db):
        pool = ConnectionPool(toy_db.path.parent.parent)
        results, errors = [], []

        def work(i):
            try:
                results.append(pool.execute("toy", f"SELECT COUNT(*) + {i} FROM t").rows[0][0] - i)
            except Exception as exc:  # pragma: no cover - surfaced below
                errors.append(exc)

        threads = [threading.Thread(target=work, args=(i,)) for i in range(16)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        pool.close()
        assert not errors and results == [3] * 16
