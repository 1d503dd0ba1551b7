# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

"""
Seeded, hue-preserving augmentations for reference images.

Images are float32 HxWx3 in [0,1] on a white background; geometric
transforms fill uncovered pixels with white.
"""

import cv2
import numpy as np

WHITE = (1., 1., 1.)


class ComposeImageOnly(object):
    """Applies each transform with probability `p`, drawing every decision from `rng`."""

    def __init__(self, transforms, p=0.5):
        self.transforms = transforms
        self.p = p

    def __call__(self, image, rng):
        for t in self.transforms:
            if rng.rand() < self.p:
                image = t(image, rng)
        return image


class RandomMirror(object):
    def __call__(self, image, rng):
        return np.ascontiguousarray(image[:, ::-1])


class RandomRotate(object):
    def __init__(self, max_r=25.):
        self.max_r = max_r

    def __call__(self, image, rng):
        height, width = image.shape[:2]
        r = rng.uniform(-self.max_r, self.max_r)
        M = cv2.getRotationMatrix2D((width / 2., height / 2.), r, 1.)
        return cv2.warpAffine(image, M, (width, height), flags=cv2.INTER_NEAREST,
                              borderMode=cv2.BORDER_CONSTANT, borderValue=WHITE)


class RandomShear(object):
    def __init__(self, max_shear=0.2):
        self.max_shear = max_shear

    def __call__(self, image, rng):
        height, width = image.shape[:2]
        sh = rng.uniform(-self.max_shear, self.max_shear)
        M = np.array([[1., sh, -sh * height / 2.], [0., 1., 0.]], dtype=np.float64)
        return cv2.warpAffine(image, M, (width, height), flags=cv2.INTER_NEAREST,
                              borderMode=cv2.BORDER_CONSTANT, borderValue=WHITE)


class RandomCrop(object):
    """Crop a window of at least `min_frac` of each side and resize back."""

    def __init__(self, min_frac=0.8):
        self.min_frac = min_frac

    def __call__(self, image, rng):
        height, width = image.shape[:2]
        frac = rng.uniform(self.min_frac, 1.)
        h, w = max(int(round(height * frac)), 1), max(int(round(width * frac)), 1)
        top = rng.randint(height - h + 1)
        left = rng.randint(width - w + 1)
        crop = image[top:top + h, left:left + w]
        return cv2.resize(crop, (width, height), interpolation=cv2.INTER_NEAREST)


class RandomBoxBlur(object):
    def __init__(self, max_radius=2):
        self.max_radius = max_radius

    def __call__(self, image, rng):
        r = rng.randint(1, self.max_radius + 1)
        return cv2.blur(image, (2 * r + 1, 2 * r + 1), borderType=cv2.BORDER_REPLICATE)


class RandomBrightnessContrast(object):
    """Equal shifts and scalings on all channels leave hue unchanged."""

    def __init__(self, max_delta=0.15):
        self.max_delta = max_delta

    def __call__(self, image, rng):
        alpha = 1. + rng.uniform(-self.max_delta, self.max_delta)
        beta = rng.uniform(-self.max_delta, self.max_delta)
        mean = float(image.mean())
        return (image - mean) * alpha + mean + beta


def reference_augmentor():
    return ComposeImageOnly([RandomMirror(), RandomRotate(25.), RandomShear(0.2), RandomCrop(0.8),
                             RandomBoxBlur(2), RandomBrightnessContrast(0.15)])


def augment_reference(image, seed, enable_prob):
    """With probability enable_prob apply a seeded random subset of the transforms."""
    rng = np.random.RandomState(seed % (2 ** 32))
    image = np.asarray(image, dtype=np.float32)
    if rng.rand() >= enable_prob:
        return image.copy()
    out = reference_augmentor()(image.copy(), rng)
    return np.clip(out, 0., 1.).astype(np.float32)
