"""Build script for the optional compiled recurrence kernel.

The package is fully functional without the extension; ``bandspec._backend``
falls back to the pure-Python sweep when ``bandspec._sweep`` is missing.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("BANDSPEC_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "bandspec._sweep",
                    ["src/bandspec/_sweep.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
