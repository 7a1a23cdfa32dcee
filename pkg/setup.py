"""Build script.  The compiled contraction kernel is optional: when Cython
(or a C compiler) is unavailable the package installs anyway and falls back
to the pure-numpy kernel at import time."""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("pnbayes._kernel", ["src/pnbayes/_kernel.pyx"])],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
