"""Built-in desk-scale worlds.

`apartment` is a 7 x 5 m three-room flat used for mapping and goal
benchmarks; `two_door` is a divided room with two doorways for
blocked-path scenarios.  Both can also be referenced from scenario files
as `builtin:<name>`.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Pose2D
from .errors import ParameterError
from .simulator import Obstacle, World

RESOLUTION = 0.05
WALL = 0.1  # wall thickness, meters


def _fill_rect(occ: np.ndarray, res: float, xmin: float, ymin: float,
               xmax: float, ymax: float):
    """Mark cells whose center falls inside the rectangle."""
    height, width = occ.shape
    cols = np.arange(width)
    rows = np.arange(height)
    cx = (cols + 0.5) * res
    cy = (rows + 0.5) * res
    inside = ((cx >= xmin) & (cx <= xmax))[None, :] & ((cy >= ymin) & (cy <= ymax))[:, None]
    occ |= inside


def _shell(size_x: float, size_y: float, res: float) -> np.ndarray:
    """Empty grid enclosed by border walls of WALL thickness."""
    occ = np.zeros((round(size_y / res), round(size_x / res)), dtype=bool)
    _fill_rect(occ, res, 0.0, 0.0, size_x, WALL)
    _fill_rect(occ, res, 0.0, size_y - WALL, size_x, size_y)
    _fill_rect(occ, res, 0.0, 0.0, WALL, size_y)
    _fill_rect(occ, res, size_x - WALL, 0.0, size_x, size_y)
    return occ


def empty_world(size_x: float = 10.0, size_y: float = 10.0,
                res: float = RESOLUTION, walls: bool = False) -> World:
    if walls:
        occ = _shell(size_x, size_y, res)
    else:
        occ = np.zeros((round(size_y / res), round(size_x / res)), dtype=bool)
    return World.from_occupied(occ, res)


def apartment_world() -> World:
    """7 x 5 m flat: living room, kitchen and a hall, 1 m doorways."""
    occ = _shell(7.0, 5.0, RESOLUTION)
    # wall between living room (left) and kitchen (right), door at y 1.2..2.2
    _fill_rect(occ, RESOLUTION, 3.45, 0.0, 3.55, 1.2)
    _fill_rect(occ, RESOLUTION, 3.45, 2.2, 3.55, 3.0)
    # wall between the lower rooms and the hall, doors at x 1.2..2.2 and 5.0..6.0
    _fill_rect(occ, RESOLUTION, 0.0, 2.95, 1.2, 3.05)
    _fill_rect(occ, RESOLUTION, 2.2, 2.95, 5.0, 3.05)
    _fill_rect(occ, RESOLUTION, 6.0, 2.95, 7.0, 3.05)
    # furniture: a table in the living room, a counter in the kitchen
    _fill_rect(occ, RESOLUTION, 1.4, 1.3, 2.0, 1.9)
    _fill_rect(occ, RESOLUTION, 6.3, 0.1, 6.9, 1.6)
    return World.from_occupied(occ, RESOLUTION)


def apartment_start() -> Pose2D:
    return Pose2D(0.7, 0.7, 0.0)


def apartment_tour() -> list[tuple[float, float]]:
    """Mapping waypoints visiting all three rooms, roughly a 20 m loop."""
    return [
        (0.7, 0.7),
        (2.8, 0.8),
        (2.8, 2.6),   # through the inner living room
        (2.8, 0.8),
        (4.5, 0.8),   # through the door into the kitchen
        (5.5, 1.6),
        (6.1, 2.4),   # around the kitchen counter
        (5.5, 4.0),   # up through the right hall door
        (3.5, 4.2),
        (1.7, 4.2),   # across the hall
        (0.8, 3.8),   # far hall corner
        (1.7, 2.0),   # down through the left hall door
        (0.7, 0.7),
    ]


def two_door_world(block_at: float | None = None,
                   block_until: float = math.inf,
                   blocked_door: str = "left") -> World:
    """Divided 7 x 5 m room with doorways at x 1.2..2.2 and 4.8..5.8.

    With block_at set, a furniture rectangle fills the chosen doorway
    from that time on (until block_until).
    """
    occ = _shell(7.0, 5.0, RESOLUTION)
    _fill_rect(occ, RESOLUTION, 0.0, 2.45, 1.2, 2.55)
    _fill_rect(occ, RESOLUTION, 2.2, 2.45, 4.8, 2.55)
    _fill_rect(occ, RESOLUTION, 5.8, 2.45, 7.0, 2.55)
    obstacles = ()
    if block_at is not None:
        if blocked_door == "left":
            rect = (1.15, 2.3, 2.25, 2.9)
        elif blocked_door == "right":
            rect = (4.75, 2.3, 5.85, 2.9)
        else:
            raise ParameterError(f"unknown door {blocked_door!r}")
        obstacles = (Obstacle("rect", rect, t_on=block_at, t_off=block_until),)
    return World.from_occupied(occ, RESOLUTION, obstacles=obstacles)


def two_door_start() -> Pose2D:
    return Pose2D(1.7, 1.0, math.pi / 2)


def two_door_tour() -> list[tuple[float, float]]:
    return [
        (1.7, 1.0),
        (1.7, 4.0),   # up through the left door
        (5.3, 4.0),
        (5.3, 1.0),   # back down through the right door
        (1.7, 1.0),
    ]


BUILTIN_WORLDS = {
    "apartment": apartment_world,
    "two_door": two_door_world,
}

BUILTIN_TOURS = {
    "apartment": apartment_tour,
    "two_door": two_door_tour,
}

BUILTIN_STARTS = {
    "apartment": apartment_start,
    "two_door": two_door_start,
}
