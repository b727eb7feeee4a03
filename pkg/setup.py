import numpy as np
from setuptools import Extension, setup

# The cone-algebra kernels compile to a C extension; the package falls back to
# the pure-numpy implementation when the build is unavailable.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "swiptplan.conic._kernels",
                ["src/swiptplan/conic/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
