import numpy as np

from mecanav.core import OccupancyGrid
from mecanav.render import render_map


class TestRenderMap:
    def test_empty_map_is_uniform_gray(self):
        grid = OccupancyGrid(0.05, 12, 9)
        image = render_map(grid)
        assert image.size == (12, 9)
        pixels = np.asarray(image)
        assert np.all(pixels == 127)

    def test_tri_state_colors(self):
        grid = OccupancyGrid(0.05, 4, 4)
        grid.hit_count[0, 0] = 5          # occupied, grid row 0 -> bottom image row
        grid.miss_count[3, 3] = 5         # free, grid row 3 -> top image row
        pixels = np.asarray(render_map(grid))
        assert tuple(pixels[3, 0]) == (0, 0, 0)
        assert tuple(pixels[0, 3]) == (255, 255, 255)
        assert tuple(pixels[1, 1]) == (127, 127, 127)

    def test_trajectory_overlay_draws(self):
        grid = OccupancyGrid(0.05, 40, 40)
        grid.miss_count[:, :] = 1
        traj = [(0.0, 0.2, 0.2, 0.0), (1.0, 1.8, 1.8, 0.0)]
        pixels = np.asarray(render_map(grid, trajectory=traj))
        reds = (pixels[:, :, 0] > 180) & (pixels[:, :, 1] < 100)
        assert reds.any()

    def test_scale_factor(self):
        grid = OccupancyGrid(0.05, 10, 5)
        image = render_map(grid, scale=4)
        assert image.size == (40, 20)
