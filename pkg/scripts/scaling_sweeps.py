"""Run the scaling experiments at their default settings and write CSV tables.

usage: python3 scripts/scaling_sweeps.py [outdir] [--workers K]
"""
import argparse
from pathlib import Path

from turing_passage.cli import write_csv
from turing_passage.validation import (dynamic_error_experiment, residual_order_experiment,
                                       static_error_experiment)

p = argparse.ArgumentParser()
p.add_argument("out", nargs="?", default="out/sweeps")
p.add_argument("--workers", type=int, default=1)
args = p.parse_args()
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)

for n in (4, 5):
    fit = residual_order_experiment([0.4, 0.3, 0.2, 0.15, 0.1], n)
    write_csv(out / f"residual_n{n}.csv", ("r", "residual"), zip(fit.abscissa, fit.ordinate),
              [f"slope {fit.slope:.4f}, fit residual {fit.residual:.4f}"])
    print(f"residual n={n}: slope {fit.slope:.3f}")

res = static_error_experiment([0.2, 0.15, 0.1, 0.07], 4, workers=args.workers)
write_csv(out / "static.csv", ("delta", "gl_error", "ansatz_error"),
          zip(res.deltas, res.gl_errors, res.ansatz_errors),
          [f"GL slope {res.gl_fit.slope:.4f}", f"n=4 slope {res.ansatz_fit.slope:.4f}"])
print(f"static: GL {res.gl_fit.slope:.3f}, n=4 {res.ansatz_fit.slope:.3f}")

for n in (4, 5):
    dyn = dynamic_error_experiment([4e-3, 2e-3, 1e-3, 5e-4], n, workers=args.workers)
    write_csv(out / f"dynamic_n{n}.csv", ("eps", "t_mid", "error", "norm_u", "norm_psi"),
              [(r.eps, r.t_mid, r.error, r.norm_u, r.norm_psi) for r in dyn.rows],
              [f"slope {dyn.fit.slope:.4f}, fit residual {dyn.fit.residual:.4f}"])
    print(f"dynamic n={n}: slope {dyn.fit.slope:.3f}")
