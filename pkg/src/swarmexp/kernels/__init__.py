"""Hot-kernel dispatch: compiled Cython core with a pure-Python fallback.

The active backend is chosen at import time: the compiled extension if it
built, otherwise the NumPy reference implementation.  Override with the
environment variable ``SWARMEXP_BACKEND`` set to ``compiled`` or ``python``,
or at runtime with :func:`set_backend` (used by the tests and the
backend-comparison benchmark).

Both backends implement the same five functions with bit-identical
floating-point results:

    query_radius, any_within, occlusion_visible, rollout_eval, BACKEND_NAME
"""

import os

from . import _ref

_COMPILED = None
try:
    from . import _core as _COMPILED  # type: ignore[no-redef]
except ImportError:
    _COMPILED = None

_requested = os.environ.get("SWARMEXP_BACKEND", "auto")
if _requested == "python":
    _impl = _ref
elif _requested == "compiled":
    if _COMPILED is None:
        raise ImportError(
            "SWARMEXP_BACKEND=compiled but the swarmexp.kernels._core "
            "extension is not built (run `pip install -e .`)"
        )
    _impl = _COMPILED
else:
    _impl = _COMPILED if _COMPILED is not None else _ref


def backend_name() -> str:
    """Name of the active backend: 'compiled' or 'python'."""
    return _impl.BACKEND_NAME


def available_backends() -> list[str]:
    return ["python"] + (["compiled"] if _COMPILED is not None else [])


def get_backend(name: str):
    """Return a backend module by name ('python', 'compiled', 'active')."""
    if name == "active":
        return _impl
    if name == "python":
        return _ref
    if name == "compiled":
        if _COMPILED is None:
            raise ValueError("compiled backend not available")
        return _COMPILED
    raise ValueError(f"unknown backend {name!r}")


def set_backend(name: str) -> None:
    """Switch the active backend (affects all subsequent kernel calls)."""
    global _impl
    _impl = get_backend(name)


def query_radius(xs, ys, cell_start, order, x0, y0, csize, nx, ny, qx, qy, r):
    return _impl.query_radius(xs, ys, cell_start, order, x0, y0, csize, nx, ny, qx, qy, r)


def any_within(xs, ys, cell_start, order, x0, y0, csize, nx, ny, qx, qy, r):
    return _impl.any_within(xs, ys, cell_start, order, x0, y0, csize, nx, ny, qx, qy, r)


def occlusion_visible(fx, fy, ox, oy, rx, ry, alpha1, alpha2, literal):
    return _impl.occlusion_visible(fx, fy, ox, oy, rx, ry, alpha1, alpha2, literal)


def rollout_eval(state, accels, steers, wheelbase, v_max, a_max, delta_max,
                 steer_rate_max, dt, n_steps, ox, oy, footprint, cap, gx, gy,
                 xmin, ymin, xmax, ymax):
    return _impl.rollout_eval(state, accels, steers, wheelbase, v_max, a_max,
                              delta_max, steer_rate_max, dt, n_steps, ox, oy,
                              footprint, cap, gx, gy, xmin, ymin, xmax, ymax)
