"""Sector and cell bookkeeping for a few direction sets.

Prints the cell of each member of a small Carbery-type set in three
dimensions, checks that it is lacunary of order 2 but not 1, and shows that a lacunary set of
order 2 in the plane fails an order-1 check.

    python demos/dissections.py
"""

from collections import Counter

from lacuna.directions import carbery_set, cell_of, gap_basis_provider, lacunary2d, verify_lacunary

cset = carbery_set(3, range(3))
print(f"Carbery set, exponents 0..2: {len(cset.members)} directions")
cells = Counter(tuple(sorted(cell_of(w).items())) for w in cset.members)
for cell, count in sorted(cells.items()):
    print("  ", dict(cell), "x", count)
for L in (1, 2):
    print(f"order {L} certified:", verify_lacunary(cset, L)[0])

lac = lacunary2d(2, 4)
for L in (1, 2):
    ok, witness = verify_lacunary(lac, L, basis_provider=gap_basis_provider)
    print(f"planar order-2 set ({len(lac.members)} members) passes order {L}: {ok}")
    if not ok:
        print(f"   sector sigma={witness['sigma']} l={witness['ell']} holds "
              f"{len(witness['members'])} directions: {witness['reason']}")
