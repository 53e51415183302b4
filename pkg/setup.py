"""Build script for the optional compiled kernel extension.

The package works without the extension: cyclesynth.kernels falls back to
the pure-numpy implementations when the compiled module is absent.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/cyclesynth/kernels/_ckernels.pyx",
        language_level=3,
    )
    include_dirs = [numpy.get_include()]
except Exception as exc:  # no compiler / no Cython: install pure-python only
    print(f"skipping compiled kernels: {exc}")
    ext_modules = []
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
