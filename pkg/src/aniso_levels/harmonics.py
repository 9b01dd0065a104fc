"""Real angular basis functions on the sphere (3D) and circle (2D).

Real spherical harmonics are built from :func:`scipy.special.sph_harm_y`
with the usual convention

    m > 0:  sqrt(2) (-1)^m Re Y_l^m
    m = 0:  Y_l^0
    m < 0:  sqrt(2) (-1)^m Im Y_l^|m|

so that the l = 1 triple is proportional to (y, z, x) for m = (-1, 0, 1).
"""

import numpy as np
from scipy.special import sph_harm_y

P_NORM = np.sqrt(3.0 / (4.0 * np.pi))

# p_x, p_y, p_z expressed in the complex Y_{1m} basis (m = -1, 0, +1).
# Row i of COMPLEX_FROM_REAL gives Y_{1,m_i} = sum_j U[i, j] p_j.
COMPLEX_FROM_REAL = np.array(
    [
        [1.0 / np.sqrt(2.0), -1j / np.sqrt(2.0), 0.0],
        [0.0, 0.0, 1.0],
        [-1.0 / np.sqrt(2.0), -1j / np.sqrt(2.0), 0.0],
    ]
)


def angles(directions):
    """Polar and azimuthal angles of an (N, 3) array of unit vectors."""
    directions = np.asarray(directions, dtype=float)
    theta = np.arccos(np.clip(directions[:, 2], -1.0, 1.0))
    phi = np.arctan2(directions[:, 1], directions[:, 0])
    return theta, phi


def real_sph_harm(l, m, directions):
    """Real spherical harmonic Y_lm evaluated at unit vectors."""
    if abs(m) > l:
        raise ValueError(f"|m| = {abs(m)} exceeds l = {l}")
    theta, phi = angles(directions)
    if m == 0:
        return np.real(sph_harm_y(l, 0, theta, phi))
    y = sph_harm_y(l, abs(m), theta, phi)
    sign = (-1.0) ** abs(m)
    if m > 0:
        return np.sqrt(2.0) * sign * np.real(y)
    return np.sqrt(2.0) * sign * np.imag(y)


def circular_harm(m, phi):
    """Orthonormal real Fourier mode on the circle: 1, cos(m phi), sin(|m| phi)."""
    phi = np.asarray(phi, dtype=float)
    if m == 0:
        return np.full_like(phi, 1.0 / np.sqrt(2.0 * np.pi))
    if m > 0:
        return np.cos(m * phi) / np.sqrt(np.pi)
    return np.sin(-m * phi) / np.sqrt(np.pi)


def angular_labels(dimension, max_channel):
    """All (channel, m) labels up to ``max_channel`` for the given dimension."""
    if dimension == 3:
        return [(l, m) for l in range(max_channel + 1) for m in range(-l, l + 1)]
    if dimension == 2:
        labels = [(0, 0)]
        for k in range(1, max_channel + 1):
            labels += [(k, k), (k, -k)]
        return labels
    raise ValueError("angular labels only exist for dimension 2 or 3")


def angular_function(dimension, label, directions):
    """Evaluate the real angular function ``label`` at unit vectors of dimension 2 or 3."""
    _, m = label
    if dimension == 3:
        return real_sph_harm(label[0], m, directions)
    phi = np.arctan2(directions[:, 1], directions[:, 0])
    return circular_harm(m, phi)


def p_functions(dimension, directions):
    """Cartesian p functions (x/r, y/r[, z/r]) times their normalisation.

    Returns an array of shape (dimension, N). The 3D normalisation is
    sqrt(3 / 4 pi); the 2D one is 1 / sqrt(pi).
    """
    directions = np.asarray(directions, dtype=float)
    norm = P_NORM if dimension == 3 else 1.0 / np.sqrt(np.pi)
    return norm * directions.T
