# utils/db.py
import argparse
import json
import pathlib
from typing import Optional

import duckdb
import pandas as pd

from utils.config import env_db_path

DDL = '''
CREATE TABLE IF NOT EXISTS suite_runs(
  run_id        INTEGER PRIMARY KEY,
  test          VARCHAR NOT NULL,
  tasks         INTEGER,
  n_success     INTEGER,
  s_rate        DOUBLE,
  conv_mean     DOUBLE,
  conv_std      DOUBLE,
  seed          BIGINT,
  params_json   VARCHAR,
  created_at    TIMESTAMP DEFAULT now()
);

CREATE TABLE IF NOT EXISTS task_results(
  run_id            INTEGER NOT NULL,
  task_id           VARCHAR NOT NULL,
  scheme            VARCHAR,
  controller        VARCHAR,
  success           BOOLEAN,
  r_lm              BOOLEAN,
  r_jl              BOOLEAN,
  p_out             BOOLEAN,
  convergence_time  DOUBLE,
  stalled_at        DOUBLE,
  final_mse_t       DOUBLE,
  final_mse_r       DOUBLE,
  steps             INTEGER,
  error             VARCHAR,
  PRIMARY KEY (run_id, task_id)
);

-- One row per suite run, recounted from the task rows
CREATE OR REPLACE VIEW v_suite_summary AS
SELECT
  r.run_id,
  r.test,
  r.seed,
  r.created_at,
  COUNT(t.task_id)                          AS tasks,
  SUM(CASE WHEN t.r_lm  THEN 1 ELSE 0 END)  AS n_r_lm,
  SUM(CASE WHEN t.p_out THEN 1 ELSE 0 END)  AS n_p_out,
  SUM(CASE WHEN t.r_jl  THEN 1 ELSE 0 END)  AS n_r_jl,
  SUM(CASE WHEN t.success THEN 1 ELSE 0 END) AS n_success,
  100.0 * AVG(CASE WHEN t.success THEN 1.0 ELSE 0.0 END) AS s_rate,
  AVG(CASE WHEN t.success THEN t.convergence_time END)   AS conv_mean
FROM suite_runs r
LEFT JOIN task_results t ON t.run_id = r.run_id
GROUP BY r.run_id, r.test, r.seed, r.created_at;
'''


def get_connection(path: Optional[str] = None):
    path = path or env_db_path()
    pathlib.Path(path).resolve().parent.mkdir(parents=True, exist_ok=True)
    return duckdb.connect(str(path))


def build(path: Optional[str] = None):
    path = path or env_db_path()
    con = get_connection(path)
    con.execute(DDL)
    con.close()
    print(f"[db] Initialized schema at {path}")


def _next_run_id(con) -> int:
    row = con.execute("SELECT COALESCE(MAX(run_id), 0) + 1 FROM suite_runs").fetchone()
    return int(row[0])


def insert_suite(summary, path: Optional[str] = None, seed: Optional[int] = None, params: Optional[dict] = None) -> int:
    """Store a SuiteSummary (harness.run_suite) and its task rows; returns the new run_id."""
    con = get_connection(path)
    con.execute(DDL)
    run_id = _next_run_id(con)
    conv = summary.convergence()

    con.execute(
        """
        INSERT INTO suite_runs (run_id, test, tasks, n_success, s_rate, conv_mean, conv_std, seed, params_json)
        VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
        """,
        [
            run_id,
            summary.test,
            summary.tasks,
            summary.counts["N_success"],
            summary.s_rate,
            conv["mean"],
            conv["std"],
            seed,
            json.dumps(params or {}),
        ],
    )

    df = summary.table()
    if not df.empty:
        df = df.rename(columns={"R_LM": "r_lm", "R_JL": "r_jl", "P_out": "p_out"})
        df["run_id"] = run_id
        # nullable floats so missing values land as NULL, not NaN
        for col in ("convergence_time", "stalled_at", "final_mse_t", "final_mse_r"):
            df[col] = pd.to_numeric(df[col], errors="coerce").astype("Float64")
        df["error"] = df["error"].astype("string")
        con.register("df_tasks", df)
        con.execute("""
            INSERT INTO task_results(run_id, task_id, scheme, controller, success, r_lm, r_jl, p_out,
                                     convergence_time, stalled_at, final_mse_t, final_mse_r, steps, error)
            SELECT run_id, task_id, scheme, controller, success, r_lm, r_jl, p_out,
                   CAST(convergence_time AS DOUBLE), CAST(stalled_at AS DOUBLE), CAST(final_mse_t AS DOUBLE),
                   CAST(final_mse_r AS DOUBLE), steps, error
            FROM df_tasks
        """)
        con.unregister("df_tasks")

    con.close()
    print(f"[db] stored suite {summary.test!r} as run_id={run_id} ({summary.tasks} tasks) in {path or env_db_path()}")
    return run_id


def suite_overview(path: Optional[str] = None) -> pd.DataFrame:
    con = get_connection(path)
    con.execute(DDL)
    df = con.execute("SELECT * FROM v_suite_summary ORDER BY run_id").fetchdf()
    con.close()
    return df


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--build", action="store_true")
    ap.add_argument("--db", default=None)
    args = ap.parse_args()
    if args.build:
        build(args.db)
