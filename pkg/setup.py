"""Build hook for the optional compiled kernels.

The package works without them: ``adaptive_gainsched.kernels`` falls back
to NumPy when the extension is missing.
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "adaptive_gainsched._kernels",
        ["src/adaptive_gainsched/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
