import os

from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to the pure-Python
# implementations in dialeval._kernels.pure when the extension is missing.
# Set DIALEVAL_NO_EXT=1 to skip compilation entirely.
ext_modules = []
if os.environ.get("DIALEVAL_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "dialeval._kernels._speedups",
                    ["src/dialeval/_kernels/_speedups.pyx"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
