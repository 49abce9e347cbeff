"""Shepp-Logan head phantom on a pixel grid."""
import numpy as np

# intensity, semi-axis a (x), semi-axis b (y), centre x, centre y, angle (deg)
MODIFIED_TABLE = np.array([
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0],
    [-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0],
    [-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0],
    [0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0],
    [0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0],
    [0.1, 0.0230, 0.0230, 0.0, -0.605, 0.0],
    [0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0],
])

# original low-contrast intensities; geometry is shared with the modified table
CLASSIC_INTENSITIES = np.array([2.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01])


def ellipse_table(modified: bool = True) -> np.ndarray:
    table = MODIFIED_TABLE.copy()
    if not modified:
        table[:, 0] = CLASSIC_INTENSITIES
    return table


def pixel_coordinates(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-centre coordinates in [-1, 1]^2; row 0 is the top (y = +1)."""
    ax = (np.arange(n) - (n - 1) / 2) / ((n - 1) / 2)
    x = np.tile(ax, (n, 1))
    y = -x.T
    return x, y


def inside_ellipse(x, y, row) -> np.ndarray:
    _, a, b, x0, y0, deg = row
    t = np.deg2rad(deg)
    c, s = np.cos(t), np.sin(t)
    xr = (x - x0) * c + (y - y0) * s
    yr = -(x - x0) * s + (y - y0) * c
    return (xr / a) ** 2 + (yr / b) ** 2 <= 1.0


def shepp_logan(n: int, modified: bool = True) -> np.ndarray:
    """``n x n`` Shepp-Logan phantom, additive ellipse model clipped to [0, 1]."""
    if n < 8:
        raise ValueError("phantom size must be at least 8")
    x, y = pixel_coordinates(n)
    img = np.zeros((n, n))
    for row in ellipse_table(modified):
        img[inside_ellipse(x, y, row)] += row[0]
    return np.clip(img, 0.0, 1.0)
