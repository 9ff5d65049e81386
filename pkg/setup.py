"""Build script for the optional compiled coordinate-descent core.

The package works without the extension (a pure NumPy fallback is selected at
import time), so a failed Cython build only costs speed.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/mcen/_speedups.pyx",
        compiler_directives={"language_level": "3"},
    )
    include_dirs = [numpy.get_include()]
except ImportError:
    ext_modules = []
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
