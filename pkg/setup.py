import numpy as np
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "sle.backend._kernels",
                ["src/sle/backend/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # compile-only fast-math lets gcc vectorize expf via libmvec;
                # no fast-math at link time, so no crtfastmath FTZ constructor
                extra_compile_args=["-O3", "-march=native", "-ffast-math"],
                extra_link_args=["-lmvec", "-lm"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython: install pure, the numpy fallback backend is selected at import.
    ext_modules = []

setup(ext_modules=ext_modules)
