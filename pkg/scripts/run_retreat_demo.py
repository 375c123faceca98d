# scripts/run_retreat_demo.py

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
    """155 deg optical-axis rotation: classical and unconstrained MPPI hit the z floor, Z_max keeps MPPI off it."""
    out_dir = Path(env_out_dir()) / "retreat155"
    runs = {
        "classical": ("retreat155_unconstrained.yml", {"controller": "classical"}),
        "mppi": ("retreat155_unconstrained.yml", None),
        "mppi_zmax": ("retreat155_constrained.yml", None),
    }
    for label, (fname, overrides) in runs.items():
        cfg = load_scenario(CONFIG_DIR / "scenarios" / fname, overrides)
        result = run_task(cfg, task_id=f"retreat155_{label}")
        write_trajectory(result.logs, out_dir / f"{label}.csv")
        write_result(result, out_dir / f"{label}.json")
        max_z = result.logs[[c for c in result.logs.columns if c.startswith("Z")]].to_numpy().max()
        print(f"{label:10s} success={result.success} R_JL={result.R_JL} max tracked Z={max_z:.3f} m")


if __name__ == "__main__":
    main()
