"""Build the optional compiled kernels.

The package works without them; ``particle_learning._backend`` falls back to
the numpy implementation when the extension is missing.
"""
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

if sys.platform.startswith("win"):
    openmp = ([], [])
elif sys.platform == "darwin":
    openmp = (["-Xpreprocessor", "-fopenmp"], ["-lomp"])
else:
    openmp = (["-fopenmp"], ["-fopenmp"])

ext_modules = []
if cythonize is not None:
    ext = Extension(
        "particle_learning._kernels",
        ["src/particle_learning/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"] + openmp[0],
        extra_link_args=openmp[1],
        optional=True,
    )
    ext_modules = cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
