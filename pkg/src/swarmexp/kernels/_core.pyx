# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend.

Bit-for-bit twin of ``_ref.py``: identical formulas, identical libm calls,
identical squared-distance predicates.  The only differences are C loops and
the angular bucketing that prunes occlusion pairs (pruned pairs provably
cannot pass the cone test, so the output set is unchanged).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport acos, atan2, cos, fmod, sin, sqrt, tan, INFINITY
from libc.math cimport M_PI

cnp.import_array()

BACKEND_NAME = "compiled"


cdef inline long long _clamp_ll(long long v, long long lo, long long hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline long long _cell_floor(double q, double origin, double csize) nogil:
    cdef double f = (q - origin) / csize
    cdef long long i = <long long>f
    if f < 0.0 and f != <double>i:
        i -= 1
    return i


def query_radius(double[::1] xs, double[::1] ys,
                 long long[::1] cell_start, long long[::1] order,
                 double x0, double y0, double csize,
                 long long nx, long long ny,
                 double qx, double qy, double r):
    """Indices of points within ``r`` of (qx, qy), sorted ascending."""
    cdef long long ix0 = _clamp_ll(_cell_floor(qx - r, x0, csize), 0, nx - 1)
    cdef long long ix1 = _clamp_ll(_cell_floor(qx + r, x0, csize), 0, nx - 1)
    cdef long long iy0 = _clamp_ll(_cell_floor(qy - r, y0, csize), 0, ny - 1)
    cdef long long iy1 = _clamp_ll(_cell_floor(qy + r, y0, csize), 0, ny - 1)
    cdef long long iy, base, lo, hi, j, p, k = 0, total = 0
    cdef double dx, dy, r2 = r * r

    for iy in range(iy0, iy1 + 1):
        base = iy * nx
        total += cell_start[base + ix1 + 1] - cell_start[base + ix0]
    out = np.empty(total, dtype=np.int64)
    cdef long long[::1] buf = out
    if total == 0:
        return out

    with nogil:
        for iy in range(iy0, iy1 + 1):
            base = iy * nx
            lo = cell_start[base + ix0]
            hi = cell_start[base + ix1 + 1]
            for j in range(lo, hi):
                p = order[j]
                dx = xs[p] - qx
                dy = ys[p] - qy
                if dx * dx + dy * dy <= r2:
                    buf[k] = p
                    k += 1
    res = out[:k]
    res.sort()
    return res


def any_within(double[::1] xs, double[::1] ys,
               long long[::1] cell_start, long long[::1] order,
               double x0, double y0, double csize,
               long long nx, long long ny,
               double qx, double qy, double r):
    """True iff any indexed point lies within ``r`` of (qx, qy)."""
    cdef long long ix0 = _clamp_ll(_cell_floor(qx - r, x0, csize), 0, nx - 1)
    cdef long long ix1 = _clamp_ll(_cell_floor(qx + r, x0, csize), 0, nx - 1)
    cdef long long iy0 = _clamp_ll(_cell_floor(qy - r, y0, csize), 0, ny - 1)
    cdef long long iy1 = _clamp_ll(_cell_floor(qy + r, y0, csize), 0, ny - 1)
    cdef long long iy, base, lo, hi, j, p
    cdef double dx, dy, r2 = r * r
    cdef bint found = False

    with nogil:
        for iy in range(iy0, iy1 + 1):
            if found:
                break
            base = iy * nx
            lo = cell_start[base + ix0]
            hi = cell_start[base + ix1 + 1]
            for j in range(lo, hi):
                p = order[j]
                dx = xs[p] - qx
                dy = ys[p] - qy
                if dx * dx + dy * dy <= r2:
                    found = True
                    break
    return bool(found)


def occlusion_visible(double[::1] fx, double[::1] fy,
                      double[::1] ox, double[::1] oy,
                      double rx, double ry,
                      double alpha1, double alpha2, bint literal):
    """Visibility mask over free candidates; see the reference backend.

    Obstacles are bucketed by bearing into sectors at least as wide as the
    cone half-angle acos(1-alpha1), so only the candidate's sector and its
    two neighbours can contain a masking obstacle.
    """
    cdef long long nfree = fx.shape[0]
    cdef long long nobs = ox.shape[0]
    out = np.ones(nfree, dtype=np.uint8)
    cdef unsigned char[::1] visible = out
    if nfree == 0 or nobs == 0:
        return out

    cdef double theta = acos(1.0 - alpha1)
    cdef long long nsec = <long long>(2.0 * M_PI / theta) - 1
    if nsec > 4 * nobs:
        nsec = 4 * nobs
    if nsec < 3:
        nsec = 3
    cdef double swidth = 2.0 * M_PI / nsec

    dox_a = np.empty(nobs, dtype=np.float64)
    doy_a = np.empty(nobs, dtype=np.float64)
    no_a = np.empty(nobs, dtype=np.float64)
    sec_a = np.empty(nobs, dtype=np.int64)
    count_a = np.zeros(nsec + 1, dtype=np.int64)
    sorder_a = np.empty(nobs, dtype=np.int64)
    cdef double[::1] dox = dox_a
    cdef double[::1] doy = doy_a
    cdef double[::1] no = no_a
    cdef long long[::1] sec = sec_a
    cdef long long[::1] count = count_a
    cdef long long[::1] sorder = sorder_a

    cdef long long i, s, k, lo, hi, oi, nsec_used
    cdef double dx, dy, n, ang, nf, dot, cosv, diff
    cdef double thresh = 1.0 - alpha1
    cdef bint hidden
    cdef long long ds

    with nogil:
        # bucket obstacles (zero-norm obstacles get sector -1: never masking)
        for i in range(nobs):
            dx = ox[i] - rx
            dy = oy[i] - ry
            n = sqrt(dx * dx + dy * dy)
            dox[i] = dx
            doy[i] = dy
            no[i] = n
            if n > 0.0:
                ang = atan2(dy, dx)
                s = <long long>((ang + M_PI) / swidth)
                if s >= nsec:
                    s = nsec - 1
                if s < 0:
                    s = 0
                sec[i] = s
                count[s + 1] += 1
            else:
                sec[i] = -1
        for s in range(nsec):
            count[s + 1] += count[s]
        for i in range(nobs):
            s = sec[i]
            if s >= 0:
                sorder[count[s]] = i
                count[s] += 1
        for s in range(nsec, 0, -1):
            count[s] = count[s - 1]
        count[0] = 0

        for i in range(nfree):
            dx = fx[i] - rx
            dy = fy[i] - ry
            nf = sqrt(dx * dx + dy * dy)
            if nf == 0.0:
                continue
            ang = atan2(dy, dx)
            s = <long long>((ang + M_PI) / swidth)
            if s >= nsec:
                s = nsec - 1
            if s < 0:
                s = 0
            hidden = False
            for ds in range(-1, 2):
                if hidden:
                    break
                k = (s + ds + nsec) % nsec
                lo = count[k]
                hi = count[k + 1]
                for oi in range(lo, hi):
                    dot = dx * dox[sorder[oi]] + dy * doy[sorder[oi]]
                    cosv = dot / (nf * no[sorder[oi]])
                    if cosv > thresh:
                        diff = nf - no[sorder[oi]]
                        if literal:
                            if diff < alpha2:
                                hidden = True
                                break
                        else:
                            if diff > alpha2:
                                hidden = True
                                break
            if hidden:
                visible[i] = 0
    return out


def rollout_eval(double[::1] state, double[::1] accels, double[::1] steers,
                 double wheelbase, double v_max, double a_max,
                 double delta_max, double steer_rate_max, double dt,
                 long long n_steps, double[::1] ox, double[::1] oy,
                 double footprint, double cap, double gx, double gy,
                 double xmin, double ymin, double xmax, double ymax):
    """Forward-simulate one rollout per sample; see the reference backend."""
    cdef long long ns = accels.shape[0]
    cdef long long nobs = ox.shape[0]
    end_a = np.empty((ns, 5), dtype=np.float64)
    clear_a = np.empty(ns, dtype=np.float64)
    coll_a = np.zeros(ns, dtype=np.uint8)
    gmin_a = np.empty(ns, dtype=np.float64)
    cdef double[:, ::1] end = end_a
    cdef double[::1] clearance = clear_a
    cdef unsigned char[::1] collided = coll_a
    cdef double[::1] goal_min = gmin_a

    cdef double fp2 = footprint * footprint
    cdef double slew = steer_rate_max * dt
    cdef long long s, k, i
    cdef double a, tgt, x, y, h, v, d, dd, min_d2, dx, dy, d2, step_min, c
    cdef double gmin, gdx, gdy, gd2
    cdef bint hit

    with nogil:
        for s in range(ns):
            a = accels[s]
            if a > a_max:
                a = a_max
            elif a < -a_max:
                a = -a_max
            tgt = steers[s]
            if tgt > delta_max:
                tgt = delta_max
            elif tgt < -delta_max:
                tgt = -delta_max
            x = state[0]
            y = state[1]
            h = state[2]
            v = state[3]
            d = state[4]
            min_d2 = INFINITY
            gmin = INFINITY
            hit = False
            for k in range(n_steps):
                dd = tgt - d
                if dd > slew:
                    dd = slew
                elif dd < -slew:
                    dd = -slew
                d = d + dd
                if d > delta_max:
                    d = delta_max
                elif d < -delta_max:
                    d = -delta_max
                v = v + a * dt
                if v > v_max:
                    v = v_max
                elif v < -v_max:
                    v = -v_max
                x = x + v * cos(h) * dt
                y = y + v * sin(h) * dt
                h = h + v * tan(d) / wheelbase * dt
                if h > M_PI or h <= -M_PI:
                    h = fmod(h + M_PI, 2.0 * M_PI)
                    if h <= 0.0:
                        h += 2.0 * M_PI
                    h -= M_PI
                gdx = x - gx
                gdy = y - gy
                gd2 = gdx * gdx + gdy * gdy
                if gd2 < gmin:
                    gmin = gd2
                if x < xmin or x > xmax or y < ymin or y > ymax:
                    hit = True
                if nobs > 0:
                    step_min = INFINITY
                    for i in range(nobs):
                        dx = ox[i] - x
                        dy = oy[i] - y
                        d2 = dx * dx + dy * dy
                        if d2 < step_min:
                            step_min = d2
                    if step_min <= fp2:
                        hit = True
                    elif step_min < min_d2:
                        min_d2 = step_min
                if hit:
                    break
            end[s, 0] = x
            end[s, 1] = y
            end[s, 2] = h
            end[s, 3] = v
            end[s, 4] = d
            collided[s] = 1 if hit else 0
            goal_min[s] = gmin
            if hit:
                clearance[s] = 0.0
            elif min_d2 == INFINITY:
                clearance[s] = cap
            else:
                c = sqrt(min_d2)
                clearance[s] = cap if c > cap else c
    return end_a, clear_a, coll_a, gmin_a
