"""Pressure-pulse front speed on a pseudo-1D channel for several step counts."""
import argparse
import warnings
from dataclasses import replace
from pathlib import Path

from scns.forward import TimeSpec
from scns.io import write_report
from scns.scenarios import WaveSetup, wave_speed


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, nargs="+", default=[250, 500, 1000])
    ap.add_argument("--out", default="results/wave_speed")
    args = ap.parse_args()
    warnings.filterwarnings("ignore", message=".*CFL")
    base = WaveSetup()
    rows = []
    for n in args.steps:
        setup = replace(base, time=TimeSpec(base.time.t_final, n))
        c, _ = wave_speed(setup)
        rows.append({"n_steps": n, "speed": c, "expected": base.params.wave_speed})
        print(f"n_steps={n:5d}  speed={c:.4f}  expected={base.params.wave_speed:.4f}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "wave_speed.json", {"rows": rows})


if __name__ == "__main__":
    main()
