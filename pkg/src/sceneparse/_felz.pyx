# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled union-find kernel for graph-based segmentation.

Must stay semantically identical to sceneparse._felz_py.segment_edges:
the pure and compiled paths are required to return bit-identical roots.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline int _find(int* parent, int x) nogil:
    cdef int root = x
    cdef int nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


cdef inline int _union(int* parent, long long* size, int ra, int rb) nogil:
    cdef int tmp
    if size[ra] < size[rb]:
        tmp = ra
        ra = rb
        rb = tmp
    parent[rb] = ra
    size[ra] += size[rb]
    return ra


def segment_edges(int n_vertices,
                  cnp.int32_t[::1] edge_a,
                  cnp.int32_t[::1] edge_b,
                  cnp.float64_t[::1] weights,
                  double k,
                  long long min_size):
    """Two-pass merge over a pre-sorted edge list; returns component roots."""
    cdef Py_ssize_t n_edges = edge_a.shape[0]
    cdef cnp.ndarray[cnp.int32_t, ndim=1] parent_arr = np.arange(n_vertices, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] size_arr = np.ones(n_vertices, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] thr_arr = np.full(n_vertices, k, dtype=np.float64)
    cdef int* parent = <int*> parent_arr.data
    cdef long long* size = <long long*> size_arr.data
    cdef double* threshold = <double*> thr_arr.data

    cdef Py_ssize_t i
    cdef int ra, rb, r
    cdef double w

    with nogil:
        for i in range(n_edges):
            ra = _find(parent, edge_a[i])
            rb = _find(parent, edge_b[i])
            w = weights[i]
            if ra != rb and w <= threshold[ra] and w <= threshold[rb]:
                r = _union(parent, size, ra, rb)
                threshold[r] = w + k / size[r]

        for i in range(n_edges):
            ra = _find(parent, edge_a[i])
            rb = _find(parent, edge_b[i])
            if ra != rb and (size[ra] < min_size or size[rb] < min_size):
                _union(parent, size, ra, rb)

    cdef cnp.ndarray[cnp.int32_t, ndim=1] roots = np.empty(n_vertices, dtype=np.int32)
    cdef int* roots_p = <int*> roots.data
    cdef int v
    with nogil:
        for v in range(n_vertices):
            roots_p[v] = _find(parent, v)
    return roots
