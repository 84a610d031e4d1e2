"""Build script for the optional compiled simplex kernels.

The package is fully functional without the extension: hyperlp.simplex
falls back to numpy kernels at import time when hyperlp._kernels is
missing. `-ffp-contract=off` keeps the compiled arithmetic bit-identical
to the numpy path so both backends produce the same pivot sequences.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "hyperlp._kernels",
                ["src/hyperlp/_kernels.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
