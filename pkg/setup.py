import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "drift.numerics._kernels",
                ["src/drift/numerics/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # built in place, so tuning for the local ISA is safe; the
                # associative-math subset lets gcc vectorize the reduction
                # loops (deterministic per build; inf/nan still propagate)
                extra_compile_args=[
                    "-O3", "-march=native", "-fopenmp",
                    "-fassociative-math", "-fno-signed-zeros",
                    "-fno-trapping-math", "-fno-math-errno",
                ],
                extra_link_args=["-fopenmp"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
