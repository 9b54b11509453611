#!/usr/bin/env python3
"""Writes the fixed evaluation corpora under corpus/ (deterministic)."""
import itertools
import os
import random
import sys

root = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "corpus")


def write(sub, name, terms, comment):
    os.makedirs(os.path.join(root, sub), exist_ok=True)
    with open(os.path.join(root, sub, name + ".poly"), "w") as f:
        f.write(f"# {comment}\n")
        for c, mono in terms:
            f.write(" ".join([repr(round(c, 6))] + [str(i) for i in mono]) + "\n")


def random_multilinear(rng, n, d, terms, const=True):
    out = {}
    for t in range(terms):
        k = d if t == 0 else rng.randint(1, d)
        mono = tuple(sorted(rng.sample(range(1, n + 1), k)))
        out[mono] = out.get(mono, 0.0) + rng.uniform(-1, 1)
    if const:
        out[()] = rng.uniform(-0.5, 0.5)
    return [(c, m) for m, c in out.items()]


rng = random.Random(20240611)

# Gaussian corpus: d <= 4, n <= 8
g = [
    ("g01_x1", [(1.0, (1,))], "x1, truth 1/2"),
    ("g02_x1sq_minus_1", [(1.0, (1, 1)), (-1.0, ())], "x1^2 - 1, truth 0.31731"),
    ("g03_two_products", [(1.0, (1, 2)), (1.0, (3, 4))], "x1x2 + x3x4, truth 1/2"),
    ("g04_triple", [(1.0, (1, 2, 3))], "x1x2x3, truth 1/2"),
    ("g05_shifted_linear", [(1.0, (1,)), (1.0, (2,)), (1.0, (3,)), (-0.5, ())], "x1+x2+x3-0.5"),
    ("g06_product_shift", [(1.0, (1, 2)), (-0.3, ())], "x1x2 - 0.3"),
    ("g07_chi2", [(1.0, (1, 1)), (1.0, (2, 2)), (-2.0, ())], "x1^2 + x2^2 - 2"),
    ("g08_cubic", [(1.0, (1, 1, 1)), (-1.0, (1,))], "x1^3 - x1"),
    ("g09_quad_product", [(1.0, (1, 2, 3, 4)), (-0.2, ())], "x1x2x3x4 - 0.2"),
    ("g10_mixed", [(1.0, (1, 1, 2)), (1.0, (3,)), (-0.2, ())], "x1^2 x2 + x3 - 0.2"),
    ("g11_ring", [(1.0, (i, i % 6 + 1)) for i in range(1, 7)] + [(0.4, ())], "cycle x1x2+...+x6x1 + 0.4"),
    ("g12_majority3", [(1.0, (1, 2)), (1.0, (1, 3)), (1.0, (2, 3))], "x1x2+x1x3+x2x3"),
]
for i in range(13, 31):
    d = [2, 3, 2, 3, 4, 2][i % 6]
    n = rng.randint(max(d, 4), 8)
    g.append((f"g{i:02d}_random_d{d}_n{n}", random_multilinear(rng, n, d, rng.randint(3, 8)), f"random multilinear, d={d}, n={n}"))
for name, terms, comment in g:
    write("gaussian", name, terms, comment)

# Boolean corpus: d <= 3, n <= 18
b = [
    ("b01_sum3", [(1.0, (1,)), (1.0, (2,)), (1.0, (3,))], "x1+x2+x3, truth 1/2"),
    ("b02_pairs3", [(1.0, (1, 2)), (1.0, (1, 3)), (1.0, (2, 3))], "x1x2+x1x3+x2x3, truth 1/4"),
    ("b03_const", [(-1.0, ())], "constant -1, truth 0"),
    ("b04_majority9", [(1.0, (i,)) for i in range(1, 10)], "majority of 9"),
    ("b05_square", [(1.0, (1, 1)), (1.0, (2,)), (-0.5, ())], "x1^2 + x2 - 0.5 (reduces to x2 + 0.5)"),
    ("b06_weighted", [(2.0 ** -i, (i + 1,)) for i in range(12)] + [(-0.3, ())], "geometric weights"),
]
for i in range(7, 31):
    d = [1, 2, 3][i % 3]
    n = rng.randint(max(d, 6), 18)
    b.append((f"b{i:02d}_random_d{d}_n{n}", random_multilinear(rng, n, d, rng.randint(4, 14)), f"random multilinear, d={d}, n={n}"))
for name, terms, comment in b:
    write("boolean", name, terms, comment)
