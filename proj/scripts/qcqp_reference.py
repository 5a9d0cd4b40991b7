#!/usr/bin/env python3
"""Independent reference solutions for the dumped fixture programs.

Reads the manifest written by gen_qcqp_fixtures, solves each program with
cvxpy, and prints one line per fixture: index, objective in problem units.
Freeze the output into tests/support/qcqp_fixture_ref.hpp.
"""

import argparse
import pathlib
import sys

import cvxpy as cp
import numpy as np


def read_fn(lines, pos, n):
    assert lines[pos].startswith("Q ")
    nnz = int(lines[pos].split()[1])
    pos += 1
    Q = np.zeros((n, n))
    for _ in range(nnz):
        i, j, v = lines[pos].split()
        Q[int(i), int(j)] = float(v)
        pos += 1
    assert lines[pos].startswith("q ")
    qnnz = int(lines[pos].split()[1])
    pos += 1
    q = np.zeros(n)
    for _ in range(qnnz):
        i, v = lines[pos].split()
        q[int(i)] = float(v)
        pos += 1
    assert lines[pos].startswith("r ")
    r = float(lines[pos].split()[1])
    pos += 1
    return (Q, q, r), pos


def read_dump(path):
    lines = path.read_text().splitlines()
    assert lines[0] == "qcqp 1"
    header = lines[1].split()
    n, m = int(header[1]), int(header[3])
    assert lines[2] == "objective"
    obj, pos = read_fn(lines, 3, n)
    cons = []
    for k in range(m):
        assert lines[pos] == f"constraint {k}"
        fn, pos = read_fn(lines, pos + 1, n)
        cons.append(fn)
    return n, obj, cons


def quad_expr(x, fn):
    Q, q, r = fn
    expr = q @ x + r
    if np.any(Q):
        expr = expr + 0.5 * cp.quad_form(x, cp.psd_wrap(0.5 * (Q + Q.T)))
    return expr


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("fixture_dir", type=pathlib.Path)
    args = ap.parse_args()

    for line in (args.fixture_dir / "manifest.tsv").read_text().splitlines():
        idx, scale, name = line.split("\t")
        n, obj, cons = read_dump(args.fixture_dir / name)
        x = cp.Variable(n)
        problem = cp.Problem(
            cp.Minimize(quad_expr(x, obj)),
            [quad_expr(x, fn) <= 0 for fn in cons],
        )
        problem.solve(solver=cp.CLARABEL)
        if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            print(f"fixture {idx}: {problem.status}", file=sys.stderr)
            return 1
        print(f"{idx}\t{float(scale) * problem.value:.12f}\t{problem.status}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
