# scripts/run_task113.py

import sys
from pathlib import Path

# Ensure project root is on sys.path so 'harness' package can be imported
ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from cli.writers import write_result, write_trajectory
from harness.run_task import run_task
from harness.scenario import load_scenario
from utils.config import CONFIG_DIR, env_out_dir


def main():
    out_dir = Path(env_out_dir()) / "task113"
    for name in ("task113_ibvs_classical", "task113_ibvs_mppi"):
        cfg = load_scenario(CONFIG_DIR / "scenarios" / f"{name}.yml")
        result = run_task(cfg, verbose=True)
        write_trajectory(result.logs, out_dir / f"{name}.csv")
        write_result(result, out_dir / f"{name}.json")

    print(f"task #113 logs in {out_dir}")


if __name__ == "__main__":
    main()
