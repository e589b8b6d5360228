"""Builds the optional compiled rasterizer core.

If Cython or a C compiler is unavailable the install still succeeds and the
package falls back to the pure-PyTorch rasterizer at import time.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "c3edit.rasterizer._core",
        ["src/c3edit/rasterizer/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"})
    if cythonize
    else [],
)
