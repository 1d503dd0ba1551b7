# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

"""Typed failures of the lab. Each carries the process exit code main.py returns."""


class OmniError(Exception):
    exit_code = 1


class UsageError(OmniError):
    exit_code = 2


class DataError(OmniError):
    exit_code = 3


class NumericError(OmniError):
    exit_code = 4


class SceneInfeasible(DataError):
    def __init__(self, msg='scene infeasible'):
        super(SceneInfeasible, self).__init__(msg)


class SubjectNotVisible(DataError):
    def __init__(self, msg='subject not visible'):
        super(SubjectNotVisible, self).__init__(msg)


class NoForeground(DataError):
    def __init__(self, msg='no foreground'):
        super(NoForeground, self).__init__(msg)


class NonFiniteLoss(NumericError):
    pass


class ShapeNotPatchable(ValueError):
    def __init__(self, msg='shape not patchable'):
        super(ShapeNotPatchable, self).__init__(msg)


class CapacityExceeded(ValueError):
    def __init__(self, msg='capacity exceeded'):
        super(CapacityExceeded, self).__init__(msg)


class LatentShapeError(ValueError):
    pass
