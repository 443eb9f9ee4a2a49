"""Mid-section roll amplitude and delayed exit over a range of eps.

usage: python3 scripts/passage_amplitudes.py [outdir]
"""
import sys
from pathlib import Path

from turing_passage.cli import write_csv
from turing_passage.validation import delay_experiment, exponential_rate, mid_amplitude_check

out = Path(sys.argv[1] if len(sys.argv) > 1 else "out/passage")
out.mkdir(parents=True, exist_ok=True)
eps_list = [8e-3, 4e-3, 2e-3, 1e-3, 5e-4]

for nu1 in (0.002, 0.0):
    rows = mid_amplitude_check(eps_list, nu1)
    extra = []
    if nu1 == 0:
        kappa, c = exponential_rate(rows)
        extra = [f"log mode1 = {c:.4f} - {kappa:.6f} / (2 eps)"]
    write_csv(out / f"mid_nu1_{nu1:g}.csv", ("eps", "mode1", "log_mode1", "ratio", "predicted"),
              [(r.eps, r.mode1, r.log_mode1, r.ratio, r.predicted_ratio) for r in rows], extra)
    for r in rows:
        print(f"nu1={nu1:g} eps={r.eps:g}: |mode 1|/sqrt(eps) = {r.ratio:.5g}")

recs = delay_experiment([8e-3, 4e-3, 2e-3], 1.0)
recs += delay_experiment([8e-3, 4e-3, 2e-3, 1e-3, 1e-4], 1.0, mode="linearized-log")
write_csv(out / "delay.csv", ("eps", "mode", "v_exit", "censored", "kappa_minus", "kappa_plus"),
          [(r.eps, "full" if r.kappa_minus == r.kappa_minus else "linear", r.v_exit, r.censored,
            r.kappa_minus, r.kappa_plus) for r in recs])
for r in recs:
    print(f"eps={r.eps:g}: v_exit {r.v_exit}")
