import numpy as np

from .tape import Tape


def numerical_gradient(f, x, h=1e-5):
    """
    Central finite-difference gradient of a scalar function.

    ``x`` is perturbed in place one entry at a time and restored afterwards, so ``f`` may close over it.

    """
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=['multi_index'], op_flags=['readwrite'])
    while not it.finished:
        index = it.multi_index
        original = x[index]
        x[index] = original + h
        upper = float(f())
        x[index] = original - h
        lower = float(f())
        x[index] = original
        grad[index] = (upper - lower) / (2.0 * h)
        it.iternext()
    return grad


def relative_error(analytic, numeric):
    """Norm-wise relative error, guarded against two vanishing gradients."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def gradient_errors(f, inputs, h=1e-5):
    """
    Relative errors between taped and finite-difference gradients of a scalar function.

    Args:
        f (callable): Maps operands (tape nodes or arrays, in the order of ``inputs``) to a scalar.
        inputs (list of numpy.ndarray): Float64 arrays at which to compare. They are perturbed in place and restored.
        h (float): Finite-difference step.

    Returns:
        list of float: One relative error per input.

    """
    tape = Tape()
    nodes = [tape.watch(x, 'x' + str(i)) for i, x in enumerate(inputs)]
    grads = tape.backward(f(*nodes))
    errors = []
    for i, x in enumerate(inputs):
        numeric = numerical_gradient(lambda: f(*inputs), x, h)
        errors.append(relative_error(grads['x' + str(i)], numeric))
    return errors
