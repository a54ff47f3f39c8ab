#!/usr/bin/env python3
"""The three decoders compared across rising erasure counts.

decode_it only peels degree-1 equations.  Because every repair accumulates
the heavy symbol, an expanded row touches all sources outside its window,
so with many erasures no equation has degree 1 and peeling stalls at zero.
With one or a handful of erasures the heavy row itself starts a cascade.
decode_sge (peeling plus inactivation) and decode_ge (full elimination)
have identical reach and pick up where peeling gives up.
"""

import random
from fractions import Fraction

import numpy as np

from srlc import CodeParams, decode_ge, decode_it, decode_sge, encode_block

params = CodeParams(k=40, d_nonbin=Fraction(1, 10), d_bin=Fraction(1, 8),
                    seed=5, symbol_size=8)
rng = np.random.default_rng(3)
sources = [rng.integers(0, 256, 8, dtype=np.uint8) for _ in range(40)]
repairs = encode_block(sources, params, n_repairs=30)

scenarios = [
    ("one erasure", 1, 2, 0),
    ("four erasures", 4, 6, 23),
    ("ten erasures", 10, 14, 3),
]

for label, n_erased, n_repairs, seed in scenarios:
    lose = random.Random(seed)
    erased = set(lose.sample(range(40), n_erased))
    received_sources = {j: sources[j] for j in range(40) if j not in erased}
    received_repairs = [(rid, repairs[rid]) for rid in range(n_repairs)]
    print(f"{label}: {n_repairs} repairs available")
    for name, decoder in (("it ", decode_it), ("sge", decode_sge),
                          ("ge ", decode_ge)):
        result = decoder(received_sources, received_repairs, params)
        print(f"  {name}: success={str(result.success):5}  "
              f"recovered {len(result.recovered)}/{n_erased}")
        for j, val in result.recovered.items():
            assert np.array_equal(np.asarray(val), sources[j]), (name, j)
    print()

print("peeling carried the easy cases; elimination carried them all.")
print("every recovered value was byte-identical to its source.")
