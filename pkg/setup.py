import numpy as np
from setuptools import setup
from setuptools.extension import Extension

# The compiled kernels are optional: the package falls back to the numpy
# implementations in quatnn.backends.np_kernels when the extension is absent.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "quatnn.backends._ckernels",
                sources=["src/quatnn/backends/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
