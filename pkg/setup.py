import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PROXGDA_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                "proxgda._kernels",
                ["src/proxgda/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # no fast-math / FMA contraction: results must match the Python fallback bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ]
        ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
