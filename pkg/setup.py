"""Build script: compiles the optional Cython walk kernel.

The package works without the extension (a pure-Python fallback is
selected at import time); the build therefore tolerates a missing
compiler or Cython.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/stirlab/kernel/_ckernel.pyx"],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print("stirlab: skipping compiled kernel (%s)" % exc, file=sys.stderr)

setup(ext_modules=ext_modules)
