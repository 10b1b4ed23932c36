"""Pure NumPy/Python reference backend for the hot kernels.

Numerical conventions shared with the compiled backend (any change here must
be mirrored in ``_core.pyx``):

* radius predicates compare squared distances: keep iff ``dx*dx+dy*dy <= r*r``
* the occlusion pair test is evaluated literally as
  ``(fx*ox + fy*oy) / (nf*no) > 1 - alpha1`` with norms from sqrt
* vehicle rollouts use scalar libm trig (``math.cos`` etc.), the same calls
  the compiled backend makes, so both backends produce identical bytes
"""

import math

import numpy as np

BACKEND_NAME = "python"


def query_radius(xs, ys, cell_start, order, x0, y0, csize, nx, ny, qx, qy, r):
    """Indices of points within ``r`` of (qx, qy), sorted ascending.

    The grid is a CSR layout over nx*ny cells: ``order`` holds point indices
    sorted by cell id (iy*nx + ix), ``cell_start`` the per-cell offsets.
    """
    ix0 = min(max(int(math.floor((qx - r - x0) / csize)), 0), nx - 1)
    ix1 = min(max(int(math.floor((qx + r - x0) / csize)), 0), nx - 1)
    iy0 = min(max(int(math.floor((qy - r - y0) / csize)), 0), ny - 1)
    iy1 = min(max(int(math.floor((qy + r - y0) / csize)), 0), ny - 1)
    chunks = []
    for iy in range(iy0, iy1 + 1):
        base = iy * nx
        lo = cell_start[base + ix0]
        hi = cell_start[base + ix1 + 1]
        if hi > lo:
            chunks.append(order[lo:hi])
    if not chunks:
        return np.empty(0, dtype=np.int64)
    cand = np.concatenate(chunks)
    dx = xs[cand] - qx
    dy = ys[cand] - qy
    keep = dx * dx + dy * dy <= r * r
    out = cand[keep]
    out.sort()
    return out


def any_within(xs, ys, cell_start, order, x0, y0, csize, nx, ny, qx, qy, r):
    """True iff any indexed point lies within ``r`` of (qx, qy)."""
    ix0 = min(max(int(math.floor((qx - r - x0) / csize)), 0), nx - 1)
    ix1 = min(max(int(math.floor((qx + r - x0) / csize)), 0), nx - 1)
    iy0 = min(max(int(math.floor((qy - r - y0) / csize)), 0), ny - 1)
    iy1 = min(max(int(math.floor((qy + r - y0) / csize)), 0), ny - 1)
    r2 = r * r
    for iy in range(iy0, iy1 + 1):
        base = iy * nx
        lo = cell_start[base + ix0]
        hi = cell_start[base + ix1 + 1]
        if hi <= lo:
            continue
        cand = order[lo:hi]
        dx = xs[cand] - qx
        dy = ys[cand] - qy
        if np.any(dx * dx + dy * dy <= r2):
            return True
    return False


def occlusion_visible(fx, fy, ox, oy, rx, ry, alpha1, alpha2, literal):
    """Visibility mask over free candidates after the obstacle mask test.

    A free point is hidden iff some obstacle is angularly aligned
    (cos > 1 - alpha1) and passes the range margin test: physically,
    nf - no > alpha2 (occluder nearer); with ``literal`` the printed
    inverted form nf - no < alpha2 is applied instead.  Points coincident
    with the sensor stay visible; obstacles coincident with it never mask.
    """
    nfree = fx.shape[0]
    visible = np.ones(nfree, dtype=np.uint8)
    if nfree == 0 or ox.shape[0] == 0:
        return visible
    dfx = fx - rx
    dfy = fy - ry
    nf = np.sqrt(dfx * dfx + dfy * dfy)
    dox = ox - rx
    doy = oy - ry
    no = np.sqrt(dox * dox + doy * doy)
    ok_o = no > 0.0
    if not np.any(ok_o):
        return visible
    dox = dox[ok_o]
    doy = doy[ok_o]
    no = no[ok_o]
    thresh = 1.0 - alpha1
    # chunk over free points to bound the pair matrix
    chunk = max(1, int(2_000_000 // max(1, no.shape[0])))
    for lo in range(0, nfree, chunk):
        hi = min(nfree, lo + chunk)
        cf_x = dfx[lo:hi, None]
        cf_y = dfy[lo:hi, None]
        cnf = nf[lo:hi, None]
        dot = cf_x * dox[None, :] + cf_y * doy[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            cosv = dot / (cnf * no[None, :])
        aligned = cosv > thresh
        diff = cnf - no[None, :]
        nearer = (diff < alpha2) if literal else (diff > alpha2)
        hidden = np.any(aligned & nearer, axis=1)
        visible[lo:hi] = np.where(hidden, 0, 1).astype(np.uint8)
    visible[nf == 0.0] = 1
    return visible


def rollout_eval(state, accels, steers, wheelbase, v_max, a_max, delta_max,
                 steer_rate_max, dt, n_steps, ox, oy, footprint, cap,
                 gx, gy, xmin, ymin, xmax, ymax):
    """Forward-simulate one rollout per (accel, steer target) sample.

    Returns (end_states (S,5), clearance (S,), collided (S,) uint8,
    goal_min_d2 (S,)).  A pose collides when it leaves [xmin,xmax]x[ymin,ymax]
    or an obstacle sits within the footprint.  Clearance is min(cap, nearest
    obstacle distance over the rollout); for a collided sample clearance is 0
    and the end state is the colliding pose.  goal_min_d2 is the squared
    distance of the rollout's closest pose to (gx, gy).
    """
    ns = accels.shape[0]
    end = np.empty((ns, 5), dtype=np.float64)
    clearance = np.empty(ns, dtype=np.float64)
    collided = np.zeros(ns, dtype=np.uint8)
    goal_min = np.empty(ns, dtype=np.float64)
    fp2 = footprint * footprint
    slew = steer_rate_max * dt
    have_obs = ox.shape[0] > 0
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
        min_d2 = math.inf
        gmin = math.inf
        hit = False
        for _ in range(n_steps):
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
            x = x + v * math.cos(h) * dt
            y = y + v * math.sin(h) * dt
            h = h + v * math.tan(d) / wheelbase * dt
            if h > math.pi or h <= -math.pi:
                h = math.fmod(h + math.pi, 2.0 * math.pi)
                if h <= 0.0:
                    h += 2.0 * math.pi
                h -= math.pi
            gdx = x - gx
            gdy = y - gy
            gd2 = gdx * gdx + gdy * gdy
            if gd2 < gmin:
                gmin = gd2
            if x < xmin or x > xmax or y < ymin or y > ymax:
                hit = True
            if have_obs:
                dx = ox - x
                dy = oy - y
                d2 = float(np.min(dx * dx + dy * dy))
                if d2 <= fp2:
                    hit = True
                elif d2 < min_d2:
                    min_d2 = d2
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
        elif min_d2 == math.inf:
            clearance[s] = cap
        else:
            c = math.sqrt(min_d2)
            clearance[s] = cap if c > cap else c
    return end, clearance, collided, goal_min
