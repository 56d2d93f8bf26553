"""Directional A_p constants and a Rubio de Francia majorant.

Power weights varying along x_1 are cheap for averages along directions
close to x_2 and expensive along x_1.  The majorant E g dominates g and is
almost an A_1 weight: M E g <= 2 ||M|| E g + tail.

    python demos/weights_rdf.py
"""

import numpy as np

from lacuna.directions import lacunary2d
from lacuna.grid import Field, make_grid
from lacuna.operators import maximal_set
from lacuna.weights import (SegmentFamily, Weight, a1_constant, ap_constant,
                            maximal_norm_upper_bound, rubio_de_francia, weight_from_spec)

g = make_grid(2, 32)
Om = lacunary2d(1, 4)
fam = SegmentFamily.build(g, Om.members)
along_x2 = SegmentFamily.build(g, [[0.0, 1.0]])

for a in (0.5, 2.0, 4.0):
    w = weight_from_spec(g, {"kind": "power", "params": {"a": a, "axis": 0}})
    print(f"a = {a}:  [w]_A2 lacunary {ap_constant(w, fam, 2):.3f}   "
          f"[w]_A2 along x2 {ap_constant(w, along_x2, 2):.3f}")

bound = maximal_norm_upper_bound(g, Om)
rng = np.random.default_rng(0)
src = Field(g, rng.random(g.shape) * (rng.random(g.shape) < 0.1))
res = rubio_de_francia(src, Om, bound, K=20)
E = res.majorant.values.real
ME = maximal_set(res.majorant, Om).values.real
print(f"certified ||M|| <= {bound:.3f}")
print(f"min(E - g) = {np.min(E - src.values.real):.3g}")
print(f"max(M E / E) = {np.max(ME / E):.3f}  (bound 2||M|| = {2 * bound:.3f})")
print(f"[E]_A1 = {a1_constant(Weight(g, E), Om):.3f}")
