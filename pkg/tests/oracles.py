"""Reference values frozen from independent implementations."""

import numpy as np

# tf.image.ssim_multiscale (TensorFlow 2, max_val=255, power factors truncated
# to the available scales and renormalized) on ``msssim_pair(size, seed)``
TF_MS_SSIM = {(64, 101): 0.8734347820281982, (192, 102): 0.86555415391922}


def msssim_pair(size, seed):
    """A smooth random-walk image and a noisy copy, both uint8 ``(3, size, size)``."""
    rng = np.random.default_rng(seed)
    x = np.cumsum(np.cumsum(rng.normal(size=(3, size, size)), 1), 2)
    x = (x - x.min()) / (x.max() - x.min())
    y = np.clip(x + rng.normal(0, 0.05, x.shape), 0, 1)
    return np.round(x * 255).astype(np.uint8), np.round(y * 255).astype(np.uint8)
