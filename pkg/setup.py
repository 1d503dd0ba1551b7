#!/usr/bin/env python

from setuptools import find_packages
from setuptools import setup

requirements = ["torch", "numpy", "opencv-python", "scipy", "easydict", "matplotlib", "pyyaml", "tensorboardX",
                "einops"]

setup(
    name="omni_motion_lab",
    version="0.1",
    description="desk-scale omni-motion multi-subject video diffusion in pytorch",
    packages=find_packages(exclude=("cfgs", "examples", "output",)),
    py_modules=["main", "_init_path"],
    install_requires=requirements,
    extras_require={"test": ["pytest"]},
)
