"""swarmexp: deterministic multi-agent exploration simulator on point clouds."""

__version__ = "0.1.0"

from .mapcore import (  # noqa: F401
    ExplorationMask,
    GridProjection,
    WorldMap,
    load_map,
    mark_explored,
    project_to_grid,
    save_map,
)
