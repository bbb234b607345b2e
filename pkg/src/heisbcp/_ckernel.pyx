# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: bytecode evaluation, unit-ball membership, gauge bisection.

Same algorithms and operation order as ``_pykernel``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, floor, pow, exp, log, sin, cos, isfinite, NAN

cnp.import_array()

BACKEND = "cython"

DEF MAX_STACK = 64

# opcodes, must match dsl.py
DEF OP_CONST = 0
DEF OP_VAR = 1
DEF OP_NEG = 2
DEF OP_ADD = 3
DEF OP_SUB = 4
DEF OP_MUL = 5
DEF OP_DIV = 6
DEF OP_POW = 7
DEF OP_SQRT = 8
DEF OP_ABS = 9
DEF OP_EXP = 10
DEF OP_LN = 11
DEF OP_SIN = 12
DEF OP_COS = 13
DEF OP_MIN = 14
DEF OP_MAX = 15


cdef inline double _pow(double a, double b) noexcept nogil:
    if a == 0.0 and b < 0.0:
        return NAN
    if a < 0.0 and b != floor(b):
        return NAN
    return pow(a, b)


cdef double run(const int* ops, const double* args, Py_ssize_t n, const double* values) noexcept nogil:
    cdef double stack[MAX_STACK]
    cdef Py_ssize_t sp = -1
    cdef Py_ssize_t i
    cdef int op
    cdef double a, b, r
    for i in range(n):
        op = ops[i]
        if op == OP_CONST:
            sp += 1
            stack[sp] = args[i]
        elif op == OP_VAR:
            sp += 1
            stack[sp] = values[<int>args[i]]
        elif op == OP_NEG:
            stack[sp] = -stack[sp]
        elif op <= OP_POW:
            b = stack[sp]
            sp -= 1
            a = stack[sp]
            if op == OP_ADD:
                r = a + b
            elif op == OP_SUB:
                r = a - b
            elif op == OP_MUL:
                r = a * b
            elif op == OP_DIV:
                if b == 0.0:
                    return NAN
                r = a / b
            else:
                r = _pow(a, b)
            stack[sp] = r
        elif op >= OP_MIN:
            b = stack[sp]
            sp -= 1
            a = stack[sp]
            if op == OP_MIN:
                stack[sp] = a if a <= b else b
            else:
                stack[sp] = a if a >= b else b
        else:
            a = stack[sp]
            if op == OP_SQRT:
                if a < 0.0:
                    return NAN
                r = sqrt(a)
            elif op == OP_ABS:
                r = fabs(a)
            elif op == OP_EXP:
                r = exp(a)
            elif op == OP_LN:
                if a <= 0.0:
                    return NAN
                r = log(a)
            elif op == OP_SIN:
                r = sin(a)
            else:
                r = cos(a)
            stack[sp] = r
        if not isfinite(stack[sp]):
            return NAN
    return stack[sp]


def _check_program(ops, args):
    ops_arr = np.ascontiguousarray(ops, dtype=np.intc)
    args_arr = np.ascontiguousarray(args, dtype=np.float64)
    depth = 0
    peak = 0
    for op in ops_arr:
        if op in (OP_CONST, OP_VAR):
            depth += 1
        elif op in (OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW, OP_MIN, OP_MAX):
            depth -= 1
        peak = max(peak, depth)
    if peak > MAX_STACK:
        raise ValueError(f"expression needs stack depth {peak} > {MAX_STACK}")
    return ops_arr, args_arr


def eval_program(ops, args, points):
    """Batch evaluation over the rows of ``points``; failures are NaN."""
    ops_arr, args_arr = _check_program(ops, args)
    cdef int[::1] o = ops_arr
    cdef double[::1] a = args_arr
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0]
    out = np.empty(n)
    cdef double[::1] res = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            res[i] = run(&o[0], &a[0], o.shape[0], &pts[i, 0])
    return out


cdef class KernelProfile:
    cdef int[::1] ops
    cdef double[::1] args
    cdef Py_ssize_t nops
    cdef bint radial
    cdef double disc_radius
    cdef double[:, ::1] normals
    cdef double[::1] offsets
    cdef Py_ssize_t nfaces
    cdef double[::1] exc_x, exc_y, exc_val
    cdef Py_ssize_t nexc

    def __init__(self, ops, args, radial, disc_radius, normals, offsets, exc_x, exc_y, exc_val):
        self.ops, self.args = _check_program(ops, args)
        self.nops = self.ops.shape[0]
        self.radial = bool(radial)
        self.disc_radius = float(disc_radius)
        self.normals = np.ascontiguousarray(np.asarray(normals, dtype=np.float64).reshape(-1, 2))
        self.offsets = np.ascontiguousarray(offsets, dtype=np.float64).reshape(-1)
        self.nfaces = self.offsets.shape[0]
        self.exc_x = np.ascontiguousarray(exc_x, dtype=np.float64).reshape(-1)
        self.exc_y = np.ascontiguousarray(exc_y, dtype=np.float64).reshape(-1)
        self.exc_val = np.ascontiguousarray(exc_val, dtype=np.float64).reshape(-1)
        self.nexc = self.exc_x.shape[0]

    cdef double _phi(self, double x, double y) noexcept nogil:
        cdef double vals[2]
        cdef Py_ssize_t k
        for k in range(self.nexc):
            if x == self.exc_x[k] and y == self.exc_y[k]:
                return self.exc_val[k]
        if self.radial:
            vals[0] = sqrt(x * x + y * y)
        else:
            vals[0] = x
            vals[1] = y
        return run(&self.ops[0], &self.args[0], self.nops, vals)

    cdef bint _contains(self, double x, double y, double z, double tol) noexcept nogil:
        cdef double r, f, h, c, top, bottom
        cdef Py_ssize_t k
        if self.disc_radius > 0.0:
            r = sqrt(x * x + y * y)
            if r > self.disc_radius + tol:
                return False
            if r > self.disc_radius:
                f = self.disc_radius / r
                x = x * f
                y = y * f
        else:
            f = 1.0
            for k in range(self.nfaces):
                h = self.normals[k, 0] * x + self.normals[k, 1] * y
                c = self.offsets[k]
                if h > c + tol:
                    return False
                if h > c:
                    f = min(f, c / h)
            x = x * f
            y = y * f
        top = self._phi(x, y)
        if not (z <= top + tol):
            return False
        if self.radial:
            bottom = top
        else:
            bottom = self._phi(-x, -y)
        return z >= -bottom - tol

    cdef inline bint _member_at(self, double x, double y, double z, double t, double tol) noexcept nogil:
        return self._contains(x / t, y / t, z / (t * t), tol)

    cdef double _gauge(self, double x, double y, double z, double tol, int max_iter) noexcept nogil:
        cdef double lo, hi, mid
        cdef int it = 0
        if x == 0.0 and y == 0.0 and z == 0.0:
            return 0.0
        if self._member_at(x, y, z, 1.0, 1e-12):
            hi = 1.0
            lo = 0.5
            while self._member_at(x, y, z, lo, 1e-12):
                hi = lo
                lo = 0.5 * lo
                it += 1
                if it >= max_iter:
                    return -1.0
        else:
            lo = 1.0
            hi = 2.0
            while not self._member_at(x, y, z, hi, 1e-12):
                lo = hi
                hi = 2.0 * hi
                it += 1
                if it >= max_iter:
                    return -1.0
        while hi - lo > tol * hi and it < max_iter:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self._member_at(x, y, z, mid, 1e-12):
                hi = mid
            else:
                lo = mid
            it += 1
        return hi

    cdef double _distance(self, double px, double py, double pz,
                          double qx, double qy, double qz, double tol, int max_iter) noexcept nogil:
        return self._gauge(qx - px, qy - py, qz - pz + 0.5 * (-px * qy + py * qx), tol, max_iter)

    def phi(self, double x, double y):
        return self._phi(x, y)

    def contains(self, double x, double y, double z, double tol):
        return self._contains(x, y, z, tol)

    def member_at(self, double x, double y, double z, double t, double tol):
        return self._member_at(x, y, z, t, tol)

    def gauge(self, double x, double y, double z, double tol, int max_iter):
        return self._gauge(x, y, z, tol, max_iter)

    def distance(self, p, q, double tol, int max_iter):
        return self._distance(p[0], p[1], p[2], q[0], q[1], q[2], tol, max_iter)

    def distances(self, p, qs, double tol, int max_iter):
        cdef double px = p[0], py = p[1], pz = p[2]
        cdef double[:, ::1] Q = np.ascontiguousarray(np.asarray(qs, dtype=np.float64).reshape(-1, 3))
        cdef Py_ssize_t n = Q.shape[0]
        out = np.empty(n)
        cdef double[::1] res = out
        cdef Py_ssize_t i
        with nogil:
            for i in range(n):
                res[i] = self._distance(px, py, pz, Q[i, 0], Q[i, 1], Q[i, 2], tol, max_iter)
        return out

    def first_within(self, p, qs, double r, double tol):
        """Index of the first row q with d(q, p) <= r, or -1."""
        cdef double px = p[0], py = p[1], pz = p[2]
        cdef double[:, ::1] Q = np.ascontiguousarray(np.asarray(qs, dtype=np.float64).reshape(-1, 3))
        cdef Py_ssize_t n = Q.shape[0]
        cdef Py_ssize_t i
        cdef Py_ssize_t found = -1
        cdef double qx, qy, qz
        with nogil:
            for i in range(n):
                qx = Q[i, 0]
                qy = Q[i, 1]
                qz = Q[i, 2]
                if self._member_at(px - qx, py - qy, pz - qz + 0.5 * (-qx * py + qy * px), r, tol):
                    found = i
                    break
        return found

    def first_within_radii(self, p, qs, radii, double tol):
        """Index of the first row q with d(q, p) <= radii[i], or -1."""
        cdef double px = p[0], py = p[1], pz = p[2]
        cdef double[:, ::1] Q = np.ascontiguousarray(np.asarray(qs, dtype=np.float64).reshape(-1, 3))
        cdef double[::1] R = np.ascontiguousarray(radii, dtype=np.float64).reshape(-1)
        if R.shape[0] != Q.shape[0]:
            raise ValueError("row counts differ")
        cdef Py_ssize_t n = Q.shape[0]
        cdef Py_ssize_t i
        cdef Py_ssize_t found = -1
        cdef double qx, qy, qz
        with nogil:
            for i in range(n):
                qx = Q[i, 0]
                qy = Q[i, 1]
                qz = Q[i, 2]
                if self._member_at(px - qx, py - qy, pz - qz + 0.5 * (-qx * py + qy * px), R[i], tol):
                    found = i
                    break
        return found

    def within_mask(self, p, qs, radii, double tol):
        """Boolean array: d(q_i, p) <= radii[i]."""
        cdef double px = p[0], py = p[1], pz = p[2]
        cdef double[:, ::1] Q = np.ascontiguousarray(np.asarray(qs, dtype=np.float64).reshape(-1, 3))
        cdef double[::1] R = np.ascontiguousarray(radii, dtype=np.float64).reshape(-1)
        if R.shape[0] != Q.shape[0]:
            raise ValueError("row counts differ")
        cdef Py_ssize_t n = Q.shape[0]
        out = np.zeros(n, dtype=np.uint8)
        cdef unsigned char[::1] res = out
        cdef Py_ssize_t i
        cdef double qx, qy, qz
        with nogil:
            for i in range(n):
                qx = Q[i, 0]
                qy = Q[i, 1]
                qz = Q[i, 2]
                res[i] = self._member_at(px - qx, py - qy, pz - qz + 0.5 * (-qx * py + qy * px), R[i], tol)
        return out.astype(bool)

    def pair_distances(self, ps, qs, double tol, int max_iter):
        """d(ps[i], qs[i]) for each row i."""
        cdef double[:, ::1] P = np.ascontiguousarray(np.asarray(ps, dtype=np.float64).reshape(-1, 3))
        cdef double[:, ::1] Q = np.ascontiguousarray(np.asarray(qs, dtype=np.float64).reshape(-1, 3))
        if P.shape[0] != Q.shape[0]:
            raise ValueError("row counts differ")
        cdef Py_ssize_t n = P.shape[0]
        out = np.empty(n)
        cdef double[::1] res = out
        cdef Py_ssize_t i
        with nogil:
            for i in range(n):
                res[i] = self._distance(P[i, 0], P[i, 1], P[i, 2], Q[i, 0], Q[i, 1], Q[i, 2], tol, max_iter)
        return out
