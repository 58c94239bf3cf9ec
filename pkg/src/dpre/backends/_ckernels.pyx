# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels, mirroring pykernels.py operation for operation.

The integer layer (key mixing, zigzag encoding, top-53-bit uniforms,
atom selection) is bit-identical to the numpy reference by construction.
The float layer evaluates the same polynomials in the same order with
contraction disabled, so results differ from numpy only where libm and
numpy's vectorized transcendentals disagree in the last ulp.
"""

from libc.math cimport INFINITY, exp, expm1, fabs, log, sqrt
from libc.stdlib cimport free, malloc

import numpy as np

from ..errors import ResourceCapError

MODE_ETA = 0
MODE_WEIGHT = 1
MODE_EPS = 2

cdef unsigned long long C_TIME = 0x9E3779B97F4A7C15ULL
cdef unsigned long long C_X = 0xBF58476D1CE4E5B9ULL
cdef unsigned long long C_Y = 0x94D049BB133111EBULL
cdef unsigned long long C_TAG = 0xA5A3B31C1FEB4D27ULL
cdef unsigned long long M1 = 0xBF58476D1CE4E5B9ULL
cdef unsigned long long M2 = 0x94D049BB133111EBULL
cdef unsigned long long TAG_TILT = 1ULL

cdef double TWO53 = 2.0 ** -53


cdef inline unsigned long long fmix64(unsigned long long z) noexcept nogil:
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline unsigned long long zigzag(long long x) noexcept nogil:
    return ((<unsigned long long> x) << 1) ^ (<unsigned long long> (x >> 63))


cdef inline double uniform53(unsigned long long h) noexcept nogil:
    return ((h >> 11) + 0.5) * TWO53


cdef inline double u_base_2d(unsigned long long seed, long long t,
                             long long x, long long y) noexcept nogil:
    cdef unsigned long long k = (seed + C_TIME * (<unsigned long long> t)
                                 + C_X * zigzag(x) + C_Y * zigzag(y))
    return uniform53(fmix64(k))


cdef inline double u_tilt_2d(unsigned long long seed, long long t,
                             long long x, long long y) noexcept nogil:
    cdef unsigned long long k = (seed + C_TAG * TAG_TILT
                                 + C_TIME * (<unsigned long long> t)
                                 + C_X * zigzag(x) + C_Y * zigzag(y))
    return uniform53(fmix64(k))


cdef inline double u_base_1d(unsigned long long seed, long long t,
                             long long x) noexcept nogil:
    cdef unsigned long long k = (seed + C_TIME * (<unsigned long long> t)
                                 + C_X * zigzag(x))
    return uniform53(fmix64(k))


cdef inline double u_tilt_1d(unsigned long long seed, long long t,
                             long long x) noexcept nogil:
    cdef unsigned long long k = (seed + C_TAG * TAG_TILT
                                 + C_TIME * (<unsigned long long> t)
                                 + C_X * zigzag(x))
    return uniform53(fmix64(k))


# Wichura's PPND16 (AS 241) with each rational evaluated by the same
# Horner chain as the numpy reference.

cdef inline double _pA(double r) noexcept nogil:
    cdef double a = 2509.0809287301226727
    a = a * r + 33430.575583588128105
    a = a * r + 67265.770927008700853
    a = a * r + 45921.953931549871457
    a = a * r + 13731.693765509461125
    a = a * r + 1971.5909503065514427
    a = a * r + 133.14166789178437745
    a = a * r + 3.387132872796366608
    return a


cdef inline double _pB(double r) noexcept nogil:
    cdef double a = 5226.495278852545703
    a = a * r + 28729.085735721942674
    a = a * r + 39307.89580009271061
    a = a * r + 21213.794301586595867
    a = a * r + 5394.1960214247511077
    a = a * r + 687.1870074920579083
    a = a * r + 42.313330701600911252
    a = a * r + 1.0
    return a


cdef inline double _pC(double r) noexcept nogil:
    cdef double a = 7.7454501427834140764e-4
    a = a * r + 0.0227238449892691845833
    a = a * r + 0.24178072517745061177
    a = a * r + 1.27045825245236838258
    a = a * r + 3.64784832476320460504
    a = a * r + 5.7694972214606914055
    a = a * r + 4.6303378461565452959
    a = a * r + 1.42343711074968357734
    return a


cdef inline double _pD(double r) noexcept nogil:
    cdef double a = 1.05075007164441684324e-9
    a = a * r + 5.475938084995344946e-4
    a = a * r + 0.0151986665636164571966
    a = a * r + 0.14810397642748007459
    a = a * r + 0.68976733498510000455
    a = a * r + 1.6763848301838038494
    a = a * r + 2.05319162663775882187
    a = a * r + 1.0
    return a


cdef inline double _pE(double r) noexcept nogil:
    cdef double a = 2.01033439929228813265e-7
    a = a * r + 2.71155556874348757815e-5
    a = a * r + 0.0012426609473880784386
    a = a * r + 0.026532189526576123093
    a = a * r + 0.29656057182850489123
    a = a * r + 1.7848265399172913358
    a = a * r + 5.4637849111641143699
    a = a * r + 6.6579046435011037772
    return a


cdef inline double _pF(double r) noexcept nogil:
    cdef double a = 2.04426310338993978564e-15
    a = a * r + 1.4215117583164458887e-7
    a = a * r + 1.8463183175100546818e-5
    a = a * r + 7.868691311456132591e-4
    a = a * r + 0.0148753612908506148525
    a = a * r + 0.13692988092273580531
    a = a * r + 0.59983220655588793769
    a = a * r + 1.0
    return a


cdef double norm_ppf(double p) noexcept nogil:
    cdef double q = p - 0.5
    cdef double r, pm, rt, val
    if fabs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _pA(r) / _pB(r)
    pm = p if q < 0.0 else 1.0 - p
    rt = sqrt(-log(pm))
    if rt <= 5.0:
        r = rt - 1.6
        val = _pC(r) / _pD(r)
    else:
        r = rt - 5.0
        val = _pE(r) / _pF(r)
    return -val if q < 0.0 else val


cdef class CTab:
    """FieldTables unpacked once at the call boundary."""

    cdef unsigned long long seed
    cdef int mode
    cdef bint is_gauss, has_tilt
    cdef double coupling, lam, tilt_shift
    cdef double[::1] atom_out
    cdef double[::1] atom_cum
    cdef double[::1] tilt_cum
    cdef long long[:, ::1] tilt_pos
    cdef Py_ssize_t n_tilt

    def __cinit__(self, tab):
        self.seed = <unsigned long long> (int(tab.seed) & 0xFFFFFFFFFFFFFFFF)
        self.mode = int(tab.mode)
        self.is_gauss = bool(tab.is_gauss)
        self.has_tilt = bool(tab.has_tilt)
        self.coupling = float(tab.coupling)
        self.lam = float(tab.lam)
        self.tilt_shift = float(tab.tilt_shift)
        self.atom_out = np.ascontiguousarray(tab.atom_out, dtype=np.float64)
        self.atom_cum = np.ascontiguousarray(tab.atom_cum, dtype=np.float64)
        self.tilt_cum = np.ascontiguousarray(tab.tilt_cum, dtype=np.float64)
        self.tilt_pos = np.ascontiguousarray(tab.tilt_pos, dtype=np.int64)
        self.n_tilt = self.tilt_pos.shape[0]


cdef inline double value_from_u(CTab tb, double u, bint tilted) noexcept nogil:
    cdef double g, arg
    cdef Py_ssize_t k, m
    if tb.is_gauss:
        g = norm_ppf(u)
        if tilted:
            g = g + tb.tilt_shift
        if tb.mode == 0:
            return g
        arg = tb.coupling * g - tb.lam
        if tb.mode == 1:
            return exp(arg)
        return expm1(arg)
    if tilted:
        m = tb.tilt_cum.shape[0]
        k = 0
        while k < m - 1 and u >= tb.tilt_cum[k]:
            k += 1
    else:
        m = tb.atom_cum.shape[0]
        k = 0
        while k < m - 1 and u >= tb.atom_cum[k]:
            k += 1
    return tb.atom_out[k]


cdef void fill_slice_2d(CTab tb, long long t, Py_ssize_t i_local,
                        long long x0, long long y0,
                        double[:, :] out) noexcept nogil:
    """Field values at global time t on the window x0.., y0..; the
    tilted site, if inside, is overridden in place."""
    cdef Py_ssize_t ny = out.shape[0], nx = out.shape[1]
    cdef Py_ssize_t xi, yi
    cdef long long px, py
    cdef double u
    for yi in range(ny):
        for xi in range(nx):
            u = u_base_2d(tb.seed, t, x0 + xi, y0 + yi)
            out[yi, xi] = value_from_u(tb, u, 0)
    if tb.has_tilt and 1 <= i_local <= tb.n_tilt:
        px = tb.tilt_pos[i_local - 1, 0]
        py = tb.tilt_pos[i_local - 1, 1]
        if x0 <= px <= x0 + nx - 1 and y0 <= py <= y0 + ny - 1:
            u = u_tilt_2d(tb.seed, t, px, py)
            out[py - y0, px - x0] = value_from_u(tb, u, 1)


cdef inline double kahan_sum_2d(double[:, :] a) noexcept nogil:
    cdef double s = 0.0, c = 0.0, y, t
    cdef Py_ssize_t i, j
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            y = a[i, j] - c
            t = s + y
            c = (t - s) - y
            s = t
    return s


def transfer_logw(tab, n, d, start, t0=0, masks=None, cap_bytes=None):
    """Forward transfer; same arguments and return layout as the numpy
    reference (logw, logscale, final slab, origin)."""
    cap = cap_bytes if cap_bytes is not None else 256 * 2 ** 20
    cells = (2 * n + 1) ** d
    if 3 * cells * 8 > cap:
        raise ResourceCapError(
            f"transfer slab {d}d horizon {n} needs {3 * cells * 8} bytes"
        )
    tb = CTab(tab)
    masks = masks or {}
    if d == 2:
        return _transfer_2d(tb, int(n), int(start[0]), int(start[1]),
                            int(t0), masks)
    if d == 1:
        return _transfer_1d(tb, int(n), int(start[0]), int(t0), masks)
    raise ValueError("compiled transfer supports d = 1 and d = 2")


def _transfer_2d(CTab tb, Py_ssize_t n, long long sx, long long sy,
                 long long t0, dict masks):
    # The walk started at the center reaches only sites with
    # |x|_1 <= i of step-i parity, so each sweep visits that diamond
    # alone. Every skipped cell is exactly zero in both buffers (its
    # neighbors were all zero one step earlier), and the counter RNG
    # has no sequential state, so the skipped draws never happen and
    # the visited values are bit-identical to a full sweep.
    cdef Py_ssize_t size = 2 * n + 1
    wa = np.zeros((size, size))
    wb = np.zeros((size, size))
    cdef double[:, ::1] w = wa
    cdef double[:, ::1] w2 = wb
    cdef double[:, ::1] tmp
    cdef double logscale = 0.0, m, up, down, left, right, nbv, total
    cdef double u, val
    cdef Py_ssize_t i, yi, xi, lo, hi, r, x0, x1
    cdef Py_ssize_t kx0, kx1, ky0, ky1
    cdef long long t, gx, gy, px, py
    cdef bint have_mask, has_t
    cdef object cur = wa, nxt = wb

    w[n, n] = 1.0
    for i in range(1, n + 1):
        lo = n - i
        hi = n + i
        t = t0 + i
        have_mask = i in masks
        kx0 = ky0 = 0
        kx1 = ky1 = size
        if have_mask:
            mlo, mhi = masks[i]
            ky0 = max(0, <Py_ssize_t> (mlo[1] - sy + n))
            ky1 = min(size, max(0, <Py_ssize_t> (mhi[1] - sy + n + 1)))
            kx0 = max(0, <Py_ssize_t> (mlo[0] - sx + n))
            kx1 = min(size, max(0, <Py_ssize_t> (mhi[0] - sx + n + 1)))
        has_t = tb.has_tilt and 1 <= i <= tb.n_tilt
        px = py = 0
        if has_t:
            px = tb.tilt_pos[i - 1, 0]
            py = tb.tilt_pos[i - 1, 1]
        with nogil:
            m = 0.0
            for yi in range(lo, hi + 1):
                r = i - (yi - n if yi >= n else n - yi)
                x0 = n - r
                x1 = n + r
                for xi in range(x0, x1 + 1, 2):
                    if have_mask and not (ky0 <= yi < ky1 and
                                          kx0 <= xi < kx1):
                        w2[yi, xi] = 0.0
                        continue
                    down = w[yi + 1, xi] if yi + 1 < size else 0.0
                    up = w[yi - 1, xi] if yi >= 1 else 0.0
                    right = w[yi, xi + 1] if xi + 1 < size else 0.0
                    left = w[yi, xi - 1] if xi >= 1 else 0.0
                    nbv = ((down + up) + right) + left
                    if nbv == 0.0:
                        w2[yi, xi] = 0.0
                        continue
                    nbv = nbv * 0.25
                    gx = sx + (xi - n)
                    gy = sy + (yi - n)
                    if has_t and gx == px and gy == py:
                        u = u_tilt_2d(tb.seed, t, gx, gy)
                        val = value_from_u(tb, u, 1)
                    else:
                        u = u_base_2d(tb.seed, t, gx, gy)
                        val = value_from_u(tb, u, 0)
                    w2[yi, xi] = nbv * val
                    if w2[yi, xi] > m:
                        m = w2[yi, xi]
            if m > 0.0:
                for yi in range(lo, hi + 1):
                    r = i - (yi - n if yi >= n else n - yi)
                    x0 = n - r
                    x1 = n + r
                    for xi in range(x0, x1 + 1, 2):
                        w2[yi, xi] = w2[yi, xi] / m
        if m <= 0.0:
            return -INFINITY, -INFINITY, nxt, (sy - n, sx - n)
        logscale += log(m)
        tmp = w
        w = w2
        w2 = tmp
        cur, nxt = nxt, cur
    total = kahan_sum_2d(w)
    return logscale + log(total), logscale, cur, (sy - n, sx - n)


def _transfer_1d(CTab tb, Py_ssize_t n, long long sx, long long t0,
                 dict masks):
    # Same parity-restricted sweep as the 2-d transfer: step i only
    # touches sites with |x| <= i and x = i (mod 2), everything else
    # is exactly zero already.
    cdef Py_ssize_t size = 2 * n + 1
    wa = np.zeros(size)
    wb = np.zeros(size)
    cdef double[::1] w = wa
    cdef double[::1] w2 = wb
    cdef double[::1] tmp1
    cdef double logscale = 0.0, m, right, left, nbv, total, c, yk, tk
    cdef double u, val
    cdef Py_ssize_t i, xi, lo, hi, kx0, kx1
    cdef long long t, gx, px
    cdef bint have_mask, has_t
    cdef object cur = wa, nxt = wb

    w[n] = 1.0
    for i in range(1, n + 1):
        lo = n - i
        hi = n + i
        t = t0 + i
        have_mask = i in masks
        kx0 = 0
        kx1 = size
        if have_mask:
            mlo, mhi = masks[i]
            kx0 = max(0, <Py_ssize_t> (mlo[0] - sx + n))
            kx1 = min(size, max(0, <Py_ssize_t> (mhi[0] - sx + n + 1)))
        has_t = tb.has_tilt and 1 <= i <= tb.n_tilt
        px = 0
        if has_t:
            px = tb.tilt_pos[i - 1, 0]
        with nogil:
            m = 0.0
            for xi in range(lo, hi + 1, 2):
                if have_mask and not kx0 <= xi < kx1:
                    w2[xi] = 0.0
                    continue
                right = w[xi + 1] if xi + 1 < size else 0.0
                left = w[xi - 1] if xi >= 1 else 0.0
                nbv = right + left
                if nbv == 0.0:
                    w2[xi] = 0.0
                    continue
                nbv = nbv * 0.5
                gx = sx + (xi - n)
                if has_t and gx == px:
                    u = u_tilt_1d(tb.seed, t, gx)
                    val = value_from_u(tb, u, 1)
                else:
                    u = u_base_1d(tb.seed, t, gx)
                    val = value_from_u(tb, u, 0)
                w2[xi] = nbv * val
                if w2[xi] > m:
                    m = w2[xi]
            if m > 0.0:
                for xi in range(lo, hi + 1, 2):
                    w2[xi] = w2[xi] / m
        if m <= 0.0:
            return -INFINITY, -INFINITY, nxt, (sx - n,)
        logscale += log(m)
        tmp1 = w
        w = w2
        w2 = tmp1
        cur, nxt = nxt, cur
    total = 0.0
    c = 0.0
    for xi in range(size):
        yk = w[xi] - c
        tk = total + yk
        c = (tk - total) - yk
        total = tk
    return logscale + log(total), logscale, cur, (sx - n,)


cdef void _l1_dist(long long bxlo, long long bxhi, long long bylo,
                   long long byhi, long long wxlo, long long wylo,
                   long long[:, ::1] dist) noexcept nogil:
    cdef Py_ssize_t ny = dist.shape[0], nx = dist.shape[1]
    cdef Py_ssize_t yi, xi
    cdef long long x, y, dx, dy
    for yi in range(ny):
        y = wylo + yi
        dy = bylo - y if y < bylo else (y - byhi if y > byhi else 0)
        for xi in range(nx):
            x = wxlo + xi
            dx = bxlo - x if x < bxlo else (x - bxhi if x > bxhi else 0)
            dist[yi, xi] = dx + dy


def chaos_orders(tab, q, N, box, t0=0, cap=None):
    """Backward marks DP; same contract as the numpy reference."""
    cdef CTab tb = CTab(tab)
    cdef Py_ssize_t qq = int(q), NN = int(N)
    cdef long long tt0 = int(t0)
    cdef long long reach = NN if cap is None else min(int(cap), NN)
    (bxlo, bxhi), (bylo, byhi) = box
    cdef long long bx0 = bxlo, bx1 = bxhi, by0 = bylo, by1 = byhi
    cdef long long wxlo = bx0 - reach, wxhi = bx1 + reach
    cdef long long wylo = by0 - reach, wyhi = by1 + reach
    cdef Py_ssize_t ny = wyhi - wylo + 1, nx = wxhi - wxlo + 1

    dist_np = np.empty((ny, nx), dtype=np.int64)
    cdef long long[:, ::1] dist = dist_np
    _l1_dist(bx0, bx1, by0, by1, wxlo, wylo, dist)

    Ga = np.zeros((qq + 1, ny, nx))
    Gb = np.zeros((qq + 1, ny, nx))
    ea = np.empty((ny, nx))
    ta = np.empty((ny, nx))
    cdef double[:, :, ::1] G = Ga
    cdef double[:, :, ::1] G2 = Gb
    cdef double[:, :, ::1] tmp3
    cdef double[:, ::1] eps = ea
    cdef double[:, ::1] term = ta
    cdef long long j, rin, rout
    cdef Py_ssize_t k, yi, xi
    cdef double u, down, up, right, left, s, ck, yk, tk

    with nogil:
        for yi in range(ny):
            for xi in range(nx):
                if dist[yi, xi] <= (NN if NN < reach else reach):
                    G[0, yi, xi] = 1.0

    for j in range(NN - 1, -1, -1):
        rin = j if j < reach else reach
        rout = j + 1 if j + 1 < reach else reach
        with nogil:
            for yi in range(ny):
                for xi in range(nx):
                    if dist[yi, xi] <= rout:
                        u = u_base_2d(tb.seed, tt0 + j + 1,
                                      wxlo + xi, wylo + yi)
                        eps[yi, xi] = value_from_u(tb, u, 0)
                    else:
                        eps[yi, xi] = 0.0
        if tb.has_tilt and 1 <= j + 1 <= tb.n_tilt:
            px, py = tb.tilt_pos[j, 0], tb.tilt_pos[j, 1]
            if (wxlo <= px <= wxhi and wylo <= py <= wyhi
                    and dist[py - wylo, px - wxlo] <= rout):
                uu = u_tilt_2d(tb.seed, tt0 + j + 1, px, py)
                eps[py - wylo, px - wxlo] = value_from_u(tb, uu, 1)
        with nogil:
            for yi in range(ny):
                for xi in range(nx):
                    G2[0, yi, xi] = 1.0 if dist[yi, xi] <= rin else 0.0
            for k in range(1, qq + 1):
                for yi in range(ny):
                    for xi in range(nx):
                        term[yi, xi] = (G[k, yi, xi]
                                        + eps[yi, xi] * G[k - 1, yi, xi])
                for yi in range(ny):
                    for xi in range(nx):
                        if dist[yi, xi] <= rin:
                            down = term[yi + 1, xi] if yi + 1 < ny else 0.0
                            up = term[yi - 1, xi] if yi >= 1 else 0.0
                            right = term[yi, xi + 1] if xi + 1 < nx else 0.0
                            left = term[yi, xi - 1] if xi >= 1 else 0.0
                            G2[k, yi, xi] = 0.25 * (((down + up) + right)
                                                    + left)
                        else:
                            G2[k, yi, xi] = 0.0
        tmp3 = G
        G = G2
        G2 = tmp3

    out = np.zeros(qq + 1)
    cdef double[::1] ov = out
    with nogil:
        for k in range(qq + 1):
            s = 0.0
            ck = 0.0
            for yi in range(by0 - wylo, by1 - wylo + 1):
                for xi in range(bx0 - wxlo, bx1 - wxlo + 1):
                    yk = G[k, yi, xi] - ck
                    tk = s + yk
                    ck = (tk - s) - yk
                    s = tk
            ov[k] = s
    return out


def backward_product(tab, N, box, t0=0, cap=None):
    """Adjoint full-product sweep; same contract as the numpy reference."""
    cdef CTab tb = CTab(tab)
    cdef Py_ssize_t NN = int(N)
    cdef long long tt0 = int(t0)
    cdef long long reach = NN if cap is None else min(int(cap), NN)
    (bxlo, bxhi), (bylo, byhi) = box
    cdef long long bx0 = bxlo, bx1 = bxhi, by0 = bylo, by1 = byhi
    cdef long long wxlo = bx0 - reach, wxhi = bx1 + reach
    cdef long long wylo = by0 - reach, wyhi = by1 + reach
    cdef Py_ssize_t ny = wyhi - wylo + 1, nx = wxhi - wxlo + 1

    dist_np = np.empty((ny, nx), dtype=np.int64)
    cdef long long[:, ::1] dist = dist_np
    _l1_dist(bx0, bx1, by0, by1, wxlo, wylo, dist)

    ha = np.zeros((ny, nx))
    hb = np.zeros((ny, nx))
    ma = np.empty((ny, nx))
    cdef double[:, ::1] h = ha
    cdef double[:, ::1] h2 = hb
    cdef double[:, ::1] marked = ma
    cdef double[:, ::1] tmp
    cdef long long j, rin, rout
    cdef Py_ssize_t yi, xi
    cdef double u, down, up, right, left, s, ck, yk, tk

    with nogil:
        for yi in range(ny):
            for xi in range(nx):
                if dist[yi, xi] <= (NN if NN < reach else reach):
                    h[yi, xi] = 1.0

    for j in range(NN - 1, -1, -1):
        rin = j if j < reach else reach
        rout = j + 1 if j + 1 < reach else reach
        with nogil:
            for yi in range(ny):
                for xi in range(nx):
                    if dist[yi, xi] <= rout:
                        u = u_base_2d(tb.seed, tt0 + j + 1,
                                      wxlo + xi, wylo + yi)
                        marked[yi, xi] = value_from_u(tb, u, 0)
                    else:
                        marked[yi, xi] = 0.0
        if tb.has_tilt and 1 <= j + 1 <= tb.n_tilt:
            px, py = tb.tilt_pos[j, 0], tb.tilt_pos[j, 1]
            if (wxlo <= px <= wxhi and wylo <= py <= wyhi
                    and dist[py - wylo, px - wxlo] <= rout):
                uu = u_tilt_2d(tb.seed, tt0 + j + 1, px, py)
                marked[py - wylo, px - wxlo] = value_from_u(tb, uu, 1)
        with nogil:
            for yi in range(ny):
                for xi in range(nx):
                    marked[yi, xi] = marked[yi, xi] * h[yi, xi]
            for yi in range(ny):
                for xi in range(nx):
                    if dist[yi, xi] <= rin:
                        down = marked[yi + 1, xi] if yi + 1 < ny else 0.0
                        up = marked[yi - 1, xi] if yi >= 1 else 0.0
                        right = marked[yi, xi + 1] if xi + 1 < nx else 0.0
                        left = marked[yi, xi - 1] if xi >= 1 else 0.0
                        h2[yi, xi] = 0.25 * (((down + up) + right) + left)
                    else:
                        h2[yi, xi] = 0.0
        tmp = h
        h = h2
        h2 = tmp

    cdef double total = 0.0
    ck = 0.0
    with nogil:
        for yi in range(by0 - wylo, by1 - wylo + 1):
            for xi in range(bx0 - wxlo, bx1 - wxlo + 1):
                yk = h[yi, xi] - ck
                tk = total + yk
                ck = (tk - total) - yk
                total = tk
    return total, (bx1 - bx0 + 1) * (by1 - by0 + 1)


def renewal_sum(lam1, first, r):
    """Renewal recursion in extended precision; z[0] = 1 by convention."""
    fl = np.ascontiguousarray(first, dtype=np.float64)
    rl = np.ascontiguousarray(r, dtype=np.float64)
    cdef double[::1] fv = fl
    cdef double[::1] rv = rl
    cdef Py_ssize_t N = rv.shape[0] - 1
    cdef long double c = <long double> float(lam1)
    out = np.zeros(N + 1)
    cdef double[::1] ov = out
    cdef long double* z = NULL
    cdef Py_ssize_t n, m
    cdef long double acc
    z = <long double*> malloc((N + 1) * sizeof(long double))
    if z == NULL:
        raise MemoryError()
    try:
        z[0] = 1.0
        ov[0] = 1.0
        for n in range(1, N + 1):
            acc = <long double> fv[n]
            for m in range(1, n):
                acc = acc + z[m] * (<long double> rv[n - m])
            z[n] = c * acc
            ov[n] = <double> z[n]
    finally:
        free(z)
    return out


def eta_block(tab, t0, n, box):
    """Raw field slices on a 2-d window for local times 1..n."""
    cdef CTab tb = CTab(tab)
    (xlo, xhi), (ylo, yhi) = box
    cdef Py_ssize_t nx = xhi - xlo + 1, ny = yhi - ylo + 1
    cdef Py_ssize_t nn = int(n)
    cdef long long tt0 = int(t0), bx = xlo, by = ylo
    out = np.empty((nn, ny, nx))
    cdef double[:, :, ::1] ov = out
    cdef Py_ssize_t i
    for i in range(1, nn + 1):
        fill_slice_2d(tb, tt0 + i, i, bx, by, ov[i - 1])
    return out
