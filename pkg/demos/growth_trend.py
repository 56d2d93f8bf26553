"""Norm growth of the maximal directional Hilbert transform.

Estimates the L^2 norm over the lacunary slopes 2^-k, k = 1..N, on a 64 x 64
grid, fits c sqrt(log N) and c log N, and writes a CSV table and an SVG
plot to demos/out/.  Takes about ten seconds.

    python demos/growth_trend.py
"""

from pathlib import Path

from lacuna.directions import lacunary2d
from lacuna.grid import make_grid
from lacuna.normlab import growth_experiment, plot_growth_svg, write_growth_csv

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

table = growth_experiment(lambda N: lacunary2d(1, N), [2, 4, 8, 16], make_grid(2, 64),
                          iters=30, restarts=2, seed=1)
for N, e in zip(table.N, table.estimates):
    print(f"N = {N:3d}   estimate {e:.4f}")
for model, fit in table.fits.items():
    print(f"{model:8s} c = {fit['c']:.4f}  rss = {fit['rss']:.3g}")

write_growth_csv(out / "growth.csv", table)
plot_growth_svg(out / "growth.svg", table, title="lacunary slopes, 64 x 64")
print("wrote", out / "growth.csv", "and", out / "growth.svg")
