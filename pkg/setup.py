import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "swarmexp.kernels._core",
                ["src/swarmexp/kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                # bit-identical floats vs the pure-Python backend: no FMA
                # contraction and no sin+cos -> sincos fusion (glibc sincos
                # differs from sin/cos by 1 ulp on some arguments)
                extra_compile_args=[
                    "-O3",
                    "-ffp-contract=off",
                    "-fno-builtin-sin",
                    "-fno-builtin-cos",
                    "-fno-builtin-sincos",
                ],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython: the package still works on the pure-Python kernel backend.
    ext_modules = []

setup(ext_modules=ext_modules)
