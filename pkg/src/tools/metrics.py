"""
Forecast error metrics on de-normalized values.

All functions accept arrays of identical shape and reduce over every entry.
"""
import numpy as np

MAPE_EPSILON = 1e-4


def mae(y, yhat):
    """Mean Absolute Error."""
    return float(np.mean(np.abs(np.asarray(yhat) - np.asarray(y))))


def mse(y, yhat):
    """Mean Squared Error."""
    return float(np.mean((np.asarray(yhat) - np.asarray(y)) ** 2))


def rmse(y, yhat):
    """Root Mean Squared Error."""
    return float(np.sqrt(mse(y, yhat)))


def mape(y, yhat, eps=MAPE_EPSILON):
    """
    Mean Absolute Percentage Error (%).
    The denominator is floored at eps so near-zero temperatures stay finite.
    """
    y = np.asarray(y)
    denom = np.maximum(np.abs(y), eps)
    return float(np.mean(np.abs(y - np.asarray(yhat)) / denom) * 100.0)
