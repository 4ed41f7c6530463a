"""
Finite-difference oracle for checking reverse-mode gradients.
"""
import numpy as np

from core.exceptions import NumericError
from core.tensor import Tensor, backward


def _scalar(value) -> float:
    if isinstance(value, Tensor):
        value = value.item()
    value = float(value)
    if not np.isfinite(value):
        raise NumericError(f'objective returned non-finite value {value}')
    return value


def finite_difference_gradient(f, params: Tensor, epsilon=1e-5) -> Tensor:
    """Central differences (f(θ+εe_i) - f(θ-εe_i)) / 2ε, per coordinate.

    ``f`` is called with ``params`` after each in-place perturbation and must
    be deterministic. The original values are restored afterwards.
    """
    if epsilon <= 0:
        raise ValueError('epsilon must be positive')
    values = params.values
    grad = np.zeros(values.shape)
    for idx in np.ndindex(values.shape):
        original = values[idx]
        try:
            values[idx] = original + epsilon
            upper = _scalar(f(params))
            values[idx] = original - epsilon
            lower = _scalar(f(params))
        finally:
            values[idx] = original
        grad[idx] = (upper - lower) / (2.0 * epsilon)
    return Tensor(grad, copy=False)


def relative_error(a, b) -> float:
    a = np.asarray(getattr(a, 'values', a), dtype=float)
    b = np.asarray(getattr(b, 'values', b), dtype=float)
    scale = np.linalg.norm(a) + np.linalg.norm(b)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


def check_gradients(objective, params, epsilon=1e-5):
    """Worst relative error between autodiff and finite differences.

    ``objective`` takes no arguments and returns a scalar Tensor built from
    ``params``.
    """
    for p in params:
        p.zero_grad()
    backward(objective())
    analytic = [np.zeros(p.shape) if p.grad is None else p.grad.copy()
                for p in params]
    worst = 0.0
    for p, grad in zip(params, analytic):
        numeric = finite_difference_gradient(
            lambda _: objective(), p, epsilon)
        worst = max(worst, relative_error(grad, numeric))
    return worst
