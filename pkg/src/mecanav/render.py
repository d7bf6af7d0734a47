"""Static raster rendering of maps, trajectories and paths.

One pixel per grid cell: unknown gray, free white, occupied black;
image rows run top-down while grid rows run bottom-up (y up).  Overlays
are drawn as polylines: trajectory red, planned path blue.
"""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw

from .core import FREE, OCCUPIED, OccupancyGrid

UNKNOWN_GRAY = 127
TRAJECTORY_COLOR = (220, 40, 40)
PATH_COLOR = (40, 80, 220)


def render_map(grid: OccupancyGrid, trajectory=None, path=None,
               scale: int = 1) -> Image.Image:
    """Rasterize a grid with optional world-coordinate overlays.

    trajectory/path are sequences of (x, y) world positions (extra
    tuple entries are ignored, so (t, x, y, theta) rows work too).
    """
    states = grid.classify()
    pixels = np.full(states.shape, UNKNOWN_GRAY, dtype=np.uint8)
    pixels[states == FREE] = 255
    pixels[states == OCCUPIED] = 0
    image = Image.fromarray(np.flipud(pixels), mode="L").convert("RGB")
    if scale > 1:
        image = image.resize((grid.width * scale, grid.height * scale),
                             Image.Resampling.NEAREST)

    def to_px(x, y):
        col = (x - grid.origin.x) / grid.resolution * scale
        row = (grid.height - (y - grid.origin.y) / grid.resolution) * scale
        return (col, row)

    def point_xy(p):
        if len(p) == 4:  # (t, x, y, theta) trajectory sample
            return p[1], p[2]
        return p[0], p[1]

    draw = ImageDraw.Draw(image)
    for points, color in ((trajectory, TRAJECTORY_COLOR), (path, PATH_COLOR)):
        if points is None:
            continue
        xy = [to_px(*point_xy(p)) for p in points]
        if len(xy) >= 2:
            draw.line(xy, fill=color, width=max(1, scale // 2))
        elif len(xy) == 1:
            draw.point(xy[0], fill=color)
    return image
