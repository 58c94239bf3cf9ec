"""Build script for the compiled kernel extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so the build degrades gracefully: if Cython or a C
compiler is unavailable the extension is simply skipped.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "dpre.backends._ckernels",
                ["src/dpre/backends/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
