# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

"""Blob helper functions: pixel <-> latent conversion and batching."""

import numpy as np
import torch

from model.utils.config import cfg
from model.codec.patch_codec import encode, decode_data


def video_normalize(video):
    """[0,1] pixels -> [-1,1]."""
    return (2. * np.asarray(video, dtype=np.float32) - 1.).astype(np.float32)


def video_unnormalize(video):
    return np.clip((np.asarray(video, dtype=np.float32) + 1.) / 2., 0., 1.)


def video_to_latent(video, patch=None):
    """F x H x W x 3 video in [0,1] -> T x h x w x C latent."""
    return np.ascontiguousarray(encode(video_normalize(video), patch).data)


def latent_to_video(latent, patch=None):
    if torch.is_tensor(latent):
        latent = latent.detach().cpu().numpy()
    return video_unnormalize(decode_data(np.asarray(latent, dtype=np.float32), patch))


def reference_latents(images, patch=None):
    """S x H x W x 3 images -> S x h x w x C one-frame latents.

    Each image is repeated pt times along time so a single latent frame covers it.
    """
    patch = tuple(patch or cfg.CODEC.PATCH)
    images = np.asarray(images, dtype=np.float32)
    clips = np.repeat(images[:, None], patch[0], axis=1)
    return np.ascontiguousarray(encode(video_normalize(clips), patch).data[:, 0])


def list_to_blob(arrays, dtype=None):
    """Stack equally shaped per-sample arrays into one batch tensor."""
    blob = torch.from_numpy(np.stack([np.asarray(a) for a in arrays], axis=0))
    if dtype is not None and blob.is_floating_point():
        blob = blob.to(dtype)
    return blob
