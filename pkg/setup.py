"""Build shim for the compiled kernel extension.

The extension is optional: if Cython or a C toolchain is missing the install
still succeeds and the package falls back to the pure-numpy kernels at import.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/mlhive/kernels/_ckernels.pyx"],
        language_level="3",
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
