import os
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install, the numpy fallback is used
    cythonize = None


def _openmp_flags():
    if sys.platform == "win32":
        return ["/openmp"], []
    if os.environ.get("ITERSURV_NO_OPENMP"):
        return [], []
    return ["-fopenmp"], ["-fopenmp"]


ext_modules = []
if cythonize is not None:
    compile_args, link_args = _openmp_flags()
    ext = Extension(
        "itersurv._core",
        ["src/itersurv/_core.pyx"],
        include_dirs=[np.get_include(), "src/itersurv"],
        extra_compile_args=["-O3"] + compile_args,
        extra_link_args=link_args,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize(
        [ext],
        language_level=3,
        compiler_directives={"boundscheck": False, "wraparound": False, "cdivision": True},
    )

setup(ext_modules=ext_modules)
