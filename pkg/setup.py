import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pclasso._cd_kernel",
                ["src/pclasso/_cd_kernel.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython: the package still works through the pure-python kernel.
    ext_modules = []

setup(ext_modules=ext_modules)
