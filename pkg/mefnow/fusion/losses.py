import numpy as np

from ..grid import ops
from ..grid.tape import value_of

bce = ops.bce


def loss_d(d_real, d_fake):
    """Discriminator loss: real samples labelled 1 plus generated samples labelled 0."""
    return ops.add(
        ops.bce(d_real, np.ones(np.shape(value_of(d_real)))),
        ops.bce(d_fake, np.zeros(np.shape(value_of(d_fake)))),
    )


def loss_g(d_fake, y_hat, y, lambda1=1.0, lambda2=100.0):
    """
    Generator loss: non-saturating adversarial term plus weighted per-pixel L1 reconstruction.

    ``L_G = lambda1 * bce(d_fake, 1) + lambda2 * mean|y - y_hat|``

    """
    if lambda1 < 0 or lambda2 < 0 or (lambda1 == 0 and lambda2 == 0):
        raise ValueError('Loss weights must be non-negative and not both zero')
    reconstruction = ops.scale(ops.mean_abs_error(y, y_hat), lambda2)
    if d_fake is None:
        return reconstruction
    adversarial = ops.scale(ops.bce(d_fake, np.ones(np.shape(value_of(d_fake)))), lambda1)
    return ops.add(adversarial, reconstruction)
