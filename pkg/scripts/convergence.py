"""Manufactured-solution convergence tables and calculus-identity residuals."""
import argparse
from pathlib import Path

from scns.forward import PhysParams
from scns.io import write_report
from scns.verify import SPACETIME_CASE, SPATIAL_CASE, TEMPORAL_CASE, identity_ladder, run_mms

STUDIES = {
    "spatial": (SPATIAL_CASE, [(16, 16, 4), (32, 32, 4), (64, 64, 4), (128, 128, 4)], 0.2, "space"),
    "temporal": (TEMPORAL_CASE, [(8, 8, 10), (8, 8, 20), (8, 8, 40), (8, 8, 80), (8, 8, 160)], 1.0, "time"),
    "spacetime": (SPACETIME_CASE, [(8, 8, 4), (16, 16, 16), (32, 32, 64)], 0.5, "both"),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cases", nargs="+", choices=list(STUDIES), default=list(STUDIES))
    ap.add_argument("--quasi", action="store_true")
    ap.add_argument("--out", default="results/convergence")
    args = ap.parse_args()
    prm = PhysParams(rho=1.0, nu=0.05, beta=1.0, gamma=0.01, b=0.0, quasi_incompressible=args.quasi)
    report = {}
    for name in args.cases:
        case, ladder, t_final, refine = STUDIES[name]
        rep = run_mms(case, ladder, prm, t_final, refine)
        report[name] = rep.as_dict()
        print(f"[{name}] refine={refine}")
        for h, dt, ev, ep in zip(rep.h, rep.dt, rep.err_v, rep.err_p):
            print(f"  h={h:.4f} dt={dt:.4f}  |e_v|={ev:.3e}  |e_p|={ep:.3e}")
        print(f"  slopes: v={rep.slope_v:.3f}  p={rep.slope_p:.3f}")
    rows, slopes = identity_ladder((32, 64, 128, 256))
    print("[identities]")
    for r in rows:
        print(f"  n={r.n:4d}  green={r.green:.2e}  pressure={r.pressure:.2e}  temam={r.temam:.2e}")
    print(f"  slopes: pressure={slopes['pressure']:.3f}  temam={slopes['temam']:.3f}")
    report["identities"] = {"rows": [r.__dict__ for r in rows], "slopes": slopes}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "convergence.json", report)


if __name__ == "__main__":
    main()
