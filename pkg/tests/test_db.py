# tests/test_db.py
import duckdb
import pytest

from harness.run_suite import summarize
from harness.run_task import TaskResult
from utils.db import build, insert_suite, suite_overview


def _summary(test="test1"):
    results = [
        TaskResult("a", "IBVS#0", "mppi", convergence_time=12.0, final_mse_t=1e-7, final_mse_r=1e-6, steps=4500),
        TaskResult("b", "IBVS#0", "mppi", R_LM=True, stalled_at=31.5, steps=4500),
        TaskResult("c", "IBVS#0", "mppi", P_out=True, steps=30, error=None),
        TaskResult("d", "IBVS#0", "mppi", R_JL=True, steps=4500, error="FloatingPointError: boom"),
    ]
    return summarize(test, results)


@pytest.fixture
def db_path(tmp_path):
    return str(tmp_path / "mppivs.duckdb")


def test_build_creates_tables(db_path):
    build(db_path)
    con = duckdb.connect(db_path)
    tables = {r[0] for r in con.execute("SELECT table_name FROM information_schema.tables").fetchall()}
    con.close()
    assert {"suite_runs", "task_results", "v_suite_summary"} <= tables


def test_insert_suite_assigns_increasing_run_ids(db_path):
    assert insert_suite(_summary("test1"), db_path, seed=7) == 1
    assert insert_suite(_summary("test2"), db_path, seed=8, params={"tasks": 4}) == 2


def test_view_recounts_task_rows(db_path):
    insert_suite(_summary(), db_path, seed=7)
    row = suite_overview(db_path).iloc[0]
    assert row["tasks"] == 4
    assert row["n_success"] == 1
    assert row["n_r_lm"] == 1 and row["n_p_out"] == 1 and row["n_r_jl"] == 1
    assert row["s_rate"] == pytest.approx(25.0)
    assert row["conv_mean"] == pytest.approx(12.0)
    assert row["seed"] == 7


def test_task_rows_keep_nulls(db_path):
    insert_suite(_summary(), db_path)
    con = duckdb.connect(db_path)
    rows = con.execute(
        "SELECT task_id, convergence_time, error FROM task_results ORDER BY task_id"
    ).fetchall()
    con.close()
    assert rows[0] == ("a", 12.0, None)
    assert rows[1][1] is None
    assert rows[3][2] == "FloatingPointError: boom"


def test_stall_time_is_stored(db_path):
    insert_suite(_summary(), db_path)
    con = duckdb.connect(db_path)
    rows = con.execute("SELECT task_id, stalled_at FROM task_results ORDER BY task_id").fetchall()
    con.close()
    assert rows == [("a", None), ("b", 31.5), ("c", None), ("d", None)]


def test_env_db_path_is_default():
    run_id = insert_suite(_summary())
    assert run_id == 1
    assert len(suite_overview()) == 1
