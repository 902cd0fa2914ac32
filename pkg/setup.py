"""Build script: compiles the optional simulation kernel.

The package works without the extension (a pure-Python fallback is selected
at import time); build it for a large speedup on Monte-Carlo sweeps:

    python3 setup.py build_ext --inplace
"""
from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "roamtrust._speedups",
                ["src/roamtrust/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
