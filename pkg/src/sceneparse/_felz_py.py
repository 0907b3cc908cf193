"""Pure-Python union-find kernel for graph-based segmentation.

Same contract as the compiled `sceneparse._felz` extension; the two must
produce bit-identical component roots for identical inputs. Edges arrive
pre-sorted by ascending weight (ties already resolved by construction
order) and are processed in array order.
"""

from __future__ import annotations

import numpy as np


def segment_edges(n_vertices, edge_a, edge_b, weights, k, min_size):
    """Run the two-pass merge over a pre-sorted edge list.

    Pass 1 merges components a, b over edge weight w when
    w <= min(Int(a) + k/|a|, Int(b) + k/|b|); pass 2 re-walks the edges in
    the same order absorbing any component smaller than min_size into its
    lowest-weight neighbor. Returns the per-vertex component root.
    """
    ea = edge_a.tolist()
    eb = edge_b.tolist()
    w = weights.tolist()
    parent = list(range(n_vertices))
    size = [1] * n_vertices
    # Int(C) + k/|C| per root; singletons start at 0 + k/1.
    threshold = [float(k)] * n_vertices

    for i in range(len(ea)):
        ra = _find(parent, ea[i])
        rb = _find(parent, eb[i])
        if ra != rb and w[i] <= threshold[ra] and w[i] <= threshold[rb]:
            r = _union(parent, size, ra, rb)
            threshold[r] = w[i] + k / size[r]

    for i in range(len(ea)):
        ra = _find(parent, ea[i])
        rb = _find(parent, eb[i])
        if ra != rb and (size[ra] < min_size or size[rb] < min_size):
            _union(parent, size, ra, rb)

    roots = np.empty(n_vertices, dtype=np.int32)
    for v in range(n_vertices):
        roots[v] = _find(parent, v)
    return roots


def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def _union(parent, size, ra, rb):
    # Union by size; ties keep the first argument as root.
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return ra
