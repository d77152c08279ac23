"""Ginzburg-Landau double-well potential and its convex/concave split.

phi(c) = (1 - c)^2 (1 + c)^2 / 4 with phi = phi_plus + phi_minus,
phi_plus = (1 + c^4)/4 convex, phi_minus = -c^2/2 concave.  The implicit
part of the time step keeps only phi_plus' = c^3.
"""

import numpy as np


def phi(c):
    return 0.25 * (1.0 - np.asarray(c)) ** 2 * (1.0 + np.asarray(c)) ** 2


def phi_prime(c):
    c = np.asarray(c)
    return c ** 3 - c


def phi_second(c):
    return 3.0 * np.asarray(c) ** 2 - 1.0


def phi_plus(c):
    return 0.25 * (1.0 + np.asarray(c) ** 4)


def phi_plus_prime(c):
    return np.asarray(c) ** 3


def phi_plus_second(c):
    return 3.0 * np.asarray(c) ** 2


def phi_minus(c):
    return -0.5 * np.asarray(c) ** 2


def phi_minus_prime(c):
    return -np.asarray(c)
