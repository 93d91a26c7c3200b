"""Fixture builders shared by the test modules."""

import numpy as np

from freesketch.contour import render_contour_image


def circle(radius=1.0, centre=(0.0, 0.0), count=400):
    t = np.linspace(0.0, 2.0 * np.pi, count + 1)
    return np.c_[centre[0] + radius * np.cos(t), centre[1] + radius * np.sin(t)]


def square(half=1.0):
    return np.array([[-half, -half], [half, -half], [half, half], [-half, half], [-half, -half]])


def circle_contour():
    return render_contour_image([circle()])


def square_circle_contour():
    """Outer square plus an inner circle: two closed features."""
    return render_contour_image([square(), circle(0.4)])


def random_sketch_arrays(rng, n, spread=0.1):
    centres = rng.uniform(0.15, 0.85, (n, 1, 2))
    return centres + rng.uniform(-spread, spread, (n, 4, 2))
