"""Small helpers shared by the test modules."""

import numpy as np

from superrad.units import PhysicalParams, build_scaled_model

LOW_RATE = 0.447e3
KD_RATE = 2.15e3
KD_ORDERS = 25      # enough for the 1e-3 guard over a 200 us pulse at R = 2.15e3
LOW_ORDERS = 13


def small_model(params=None, grid_points=128, n_orders=5, **kw):
    params = params or PhysicalParams()
    return build_scaled_model(params, grid_points=grid_points, n_orders=n_orders, **kw)


def rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / np.max(np.abs(b)))
