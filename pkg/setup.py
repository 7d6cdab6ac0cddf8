"""Build script: compiles the Cython event-loop core if a toolchain is present.

The package works without the extension (a pure-Python backend is selected
at import time); the compiled core is only needed to make the large Monte
Carlo runs fast.
"""
import sys

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "brwspectrum._mc_core",
                ["src/brwspectrum/_mc_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # no cython/compiler: fall back to pure python
    print(f"brwspectrum: building without compiled core ({exc})", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)
