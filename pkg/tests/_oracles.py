"""Independent numerical oracles shared across the test suite.

Everything here recomputes quantities from first principles (central
finite differences, exhaustive enumeration, scalar loops) so the library
code under test never supplies its own expected values.
"""

import numpy as np

from jocot.network import ModelParams, forward


def fd_gradient(params: ModelParams, features: np.ndarray, scalar_loss,
                h: float = 1e-5):
    """Central-difference gradient of scalar_loss(forward(params, X)).

    scalar_loss maps the (n, M) probability batch to a single float (the
    mean per-sample loss). Every weight and bias entry is perturbed by
    +-h in turn. Returns (d_weights, d_biases) lists shaped like params.
    """

    def loss_now() -> float:
        return float(scalar_loss(forward(params, features)))

    d_weights = [np.zeros_like(w) for w in params.weights]
    d_biases = [np.zeros_like(b) for b in params.biases]
    for arrs, outs in ((params.weights, d_weights), (params.biases, d_biases)):
        for arr, darr in zip(arrs, outs):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                up = loss_now()
                arr[idx] = orig - h
                down = loss_now()
                arr[idx] = orig
                darr[idx] = (up - down) / (2.0 * h)
    return d_weights, d_biases


def max_guarded_rel_error(analytic_list, numeric_list, floor: float = 1e-3) -> float:
    """max |a - n| / max(|n|, floor) over all entries of both lists.

    The floor turns the check into an absolute one for near-zero entries,
    where finite differences are dominated by rounding noise.
    """
    worst = 0.0
    for a, n in zip(analytic_list, numeric_list):
        denom = np.maximum(np.abs(n), floor)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def scalar_kl(p_row, q_row) -> float:
    """Plain-Python KL divergence sum p_i log(p_i / q_i) for one row."""
    total = 0.0
    for p_i, q_i in zip(p_row, q_row):
        total += float(p_i) * (np.log(float(p_i)) - np.log(float(q_i)))
    return total
