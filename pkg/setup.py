"""Build script for the optional compiled split-scan kernels.

The package works without the extension (a NumPy fallback is selected at
import time); building it just makes tree training faster.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext = Extension(
        "neurolos._ckernels",
        sources=["src/neurolos/_ckernels.pyx"],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level="3")
    for mod in ext_modules:
        mod.optional = True

setup(ext_modules=ext_modules)
