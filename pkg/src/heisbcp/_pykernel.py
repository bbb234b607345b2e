"""Pure-Python kernels: bytecode evaluation, unit-ball membership, gauge bisection.

Mirrors ``_ckernel.pyx`` operation for operation so both backends return
the same floats. Failures are signalled with NaN (evaluation) or -1.0
(bracketing) and turned into exceptions by the callers in ``kernels``.
"""

import math

import numpy as np

from .dsl import (
    OP_ABS,
    OP_ADD,
    OP_CONST,
    OP_COS,
    OP_DIV,
    OP_EXP,
    OP_LN,
    OP_MAX,
    OP_MIN,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SIN,
    OP_SQRT,
    OP_SUB,
    OP_VAR,
)

BACKEND = "python"
NAN = float("nan")


def _pow(a, b):
    if a == 0.0 and b < 0.0:
        return NAN
    if a < 0.0 and b != math.floor(b):
        return NAN
    try:
        return math.pow(a, b)
    except (OverflowError, ValueError):
        return NAN


def run_program(ops, args, values):
    """Evaluate postfix code; returns NaN on any domain failure."""
    stack = []
    push = stack.append
    pop = stack.pop
    for op, arg in zip(ops, args):
        if op == OP_CONST:
            push(arg)
        elif op == OP_VAR:
            push(values[int(arg)])
        elif op == OP_NEG:
            stack[-1] = -stack[-1]
        elif op <= OP_POW:
            b = pop()
            a = stack[-1]
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
            stack[-1] = r
        elif op >= OP_MIN:
            b = pop()
            a = stack[-1]
            if op == OP_MIN:
                stack[-1] = a if a <= b else b
            else:
                stack[-1] = a if a >= b else b
        else:
            a = stack[-1]
            if op == OP_SQRT:
                if a < 0.0:
                    return NAN
                r = math.sqrt(a)
            elif op == OP_ABS:
                r = abs(a)
            elif op == OP_EXP:
                try:
                    r = math.exp(a)
                except OverflowError:
                    return NAN
            elif op == OP_LN:
                if a <= 0.0:
                    return NAN
                r = math.log(a)
            elif op == OP_SIN:
                r = math.sin(a)
            else:
                r = math.cos(a)
            stack[-1] = r
        if not math.isfinite(stack[-1]):
            return NAN
    return stack[-1]


def eval_program(ops, args, points):
    """Batch evaluation over the rows of ``points``; failures are NaN."""
    ops = [int(o) for o in ops]
    args = [float(a) for a in args]
    pts = np.asarray(points, dtype=np.float64)
    out = np.empty(pts.shape[0])
    for i in range(pts.shape[0]):
        out[i] = run_program(ops, args, pts[i].tolist())
    return out


class KernelProfile:
    """Unit ball B = {(v, z): v in K, -phi(-v) <= z <= phi(v)} in kernel form."""

    def __init__(self, ops, args, radial, disc_radius, normals, offsets, exc_x, exc_y, exc_val):
        self.ops = [int(o) for o in ops]
        self.args = [float(a) for a in args]
        self.radial = bool(radial)
        self.disc_radius = float(disc_radius)
        self.normals = [tuple(map(float, n)) for n in np.asarray(normals, dtype=np.float64).reshape(-1, 2)]
        self.offsets = [float(c) for c in offsets]
        self.exceptional = list(zip(map(float, exc_x), map(float, exc_y), map(float, exc_val)))

    def phi(self, x, y):
        for ex, ey, ev in self.exceptional:
            if x == ex and y == ey:
                return ev
        if self.radial:
            return run_program(self.ops, self.args, [math.sqrt(x * x + y * y)])
        return run_program(self.ops, self.args, [x, y])

    def _project(self, x, y, tol):
        # returns the point pulled back onto K, or None when outside by more than tol
        if self.disc_radius > 0.0:
            r = math.sqrt(x * x + y * y)
            if r > self.disc_radius + tol:
                return None
            if r > self.disc_radius:
                f = self.disc_radius / r
                return x * f, y * f
            return x, y
        f = 1.0
        for (nx, ny), c in zip(self.normals, self.offsets):
            h = nx * x + ny * y
            if h > c + tol:
                return None
            if h > c:
                f = min(f, c / h)
        return x * f, y * f

    def contains(self, x, y, z, tol):
        pr = self._project(x, y, tol)
        if pr is None:
            return False
        px, py = pr
        top = self.phi(px, py)
        if not (z <= top + tol):
            return False
        bottom = top if self.radial else self.phi(-px, -py)
        return z >= -bottom - tol

    def member_at(self, x, y, z, t, tol):
        return self.contains(x / t, y / t, z / (t * t), tol)

    def gauge(self, x, y, z, tol, max_iter):
        """inf{t > 0 : dilation by 1/t of (x, y, z) lies in B}; -1.0 if bracketing fails."""
        if x == 0.0 and y == 0.0 and z == 0.0:
            return 0.0
        it = 0
        if self.member_at(x, y, z, 1.0, 1e-12):
            hi, lo = 1.0, 0.5
            while self.member_at(x, y, z, lo, 1e-12):
                hi, lo = lo, 0.5 * lo
                it += 1
                if it >= max_iter:
                    return -1.0
        else:
            lo, hi = 1.0, 2.0
            while not self.member_at(x, y, z, hi, 1e-12):
                lo, hi = hi, 2.0 * hi
                it += 1
                if it >= max_iter:
                    return -1.0
        while hi - lo > tol * hi and it < max_iter:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.member_at(x, y, z, mid, 1e-12):
                hi = mid
            else:
                lo = mid
            it += 1
        return hi

    def distance(self, p, q, tol, max_iter):
        # d(p, q) = gauge(p^-1 q)
        px, py, pz = float(p[0]), float(p[1]), float(p[2])
        qx, qy, qz = float(q[0]), float(q[1]), float(q[2])
        x = qx - px
        y = qy - py
        z = qz - pz + 0.5 * (-px * qy + py * qx)
        return self.gauge(x, y, z, tol, max_iter)

    def distances(self, p, qs, tol, max_iter):
        qs = np.asarray(qs, dtype=np.float64).reshape(-1, 3)
        out = np.empty(qs.shape[0])
        for i in range(qs.shape[0]):
            out[i] = self.distance(p, qs[i], tol, max_iter)
        return out

    def first_within(self, p, qs, r, tol):
        """Index of the first row q with d(q, p) <= r, or -1."""
        px, py, pz = float(p[0]), float(p[1]), float(p[2])
        qs = np.asarray(qs, dtype=np.float64).reshape(-1, 3)
        for i in range(qs.shape[0]):
            qx, qy, qz = qs[i].tolist()
            x = px - qx
            y = py - qy
            z = pz - qz + 0.5 * (-qx * py + qy * px)
            if self.member_at(x, y, z, r, tol):
                return i
        return -1

    def _within(self, px, py, pz, q, r, tol):
        qx, qy, qz = q
        x = px - qx
        y = py - qy
        z = pz - qz + 0.5 * (-qx * py + qy * px)
        return self.member_at(x, y, z, r, tol)

    def first_within_radii(self, p, qs, radii, tol):
        """Index of the first row q with d(q, p) <= radii[i], or -1."""
        px, py, pz = float(p[0]), float(p[1]), float(p[2])
        qs = np.asarray(qs, dtype=np.float64).reshape(-1, 3)
        radii = np.asarray(radii, dtype=np.float64).reshape(-1)
        if len(radii) != len(qs):
            raise ValueError("row counts differ")
        for i in range(qs.shape[0]):
            if self._within(px, py, pz, qs[i].tolist(), float(radii[i]), tol):
                return i
        return -1

    def within_mask(self, p, qs, radii, tol):
        """Boolean array: d(q_i, p) <= radii[i]."""
        px, py, pz = float(p[0]), float(p[1]), float(p[2])
        qs = np.asarray(qs, dtype=np.float64).reshape(-1, 3)
        radii = np.asarray(radii, dtype=np.float64).reshape(-1)
        if len(radii) != len(qs):
            raise ValueError("row counts differ")
        return np.array(
            [self._within(px, py, pz, qs[i].tolist(), float(radii[i]), tol) for i in range(qs.shape[0])], dtype=bool
        )

    def pair_distances(self, ps, qs, tol, max_iter):
        """d(ps[i], qs[i]) for each row i."""
        ps = np.asarray(ps, dtype=np.float64).reshape(-1, 3)
        qs = np.asarray(qs, dtype=np.float64).reshape(-1, 3)
        out = np.empty(ps.shape[0])
        for i in range(ps.shape[0]):
            out[i] = self.distance(ps[i].tolist(), qs[i].tolist(), tol, max_iter)
        return out
