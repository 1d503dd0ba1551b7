# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

# Summary writer on top of tensorboardX, plus a line-delimited JSON training log.
import json

import numpy as np
from tensorboardX import SummaryWriter


class Logger(object):

    def __init__(self, log_dir):
        """Create a summary writer logging to log_dir."""
        self.writer = SummaryWriter(log_dir)

    def scalar_summary(self, tag, value, step):
        """Log a scalar variable."""
        self.writer.add_scalar(tag, value, step)

    def image_summary(self, tag, images, step):
        """Log a list of HxWx3 images in [0,1]."""
        for i, img in enumerate(images):
            self.writer.add_image('%s/%d' % (tag, i), np.clip(img, 0., 1.), step, dataformats='HWC')

    def histo_summary(self, tag, values, step, bins='auto'):
        """Log a histogram of the tensor of values."""
        self.writer.add_histogram(tag, np.asarray(values), step, bins=bins)
        self.writer.flush()

    def close(self):
        self.writer.close()


class JsonlLogger(object):
    """One JSON record per line; keys are sorted so logs diff cleanly."""

    def __init__(self, path):
        self.path = path
        self._f = open(path, 'a')

    def log(self, **record):
        rec = {}
        for k, v in record.items():
            if isinstance(v, (np.floating, np.integer)):
                v = v.item()
            rec[k] = v
        self._f.write(json.dumps(rec, sort_keys=True) + '\n')
        self._f.flush()

    def close(self):
        self._f.close()


def read_jsonl(path):
    with open(path, 'r') as f:
        return [json.loads(l) for l in f if l.strip()]
