"""Build script for the optional compiled kernels.

The package works without the extension: ssdl._kernels falls back to the
pure-NumPy implementations when ssdl._kernels_c is missing. Building with
Cython just makes the hot loops (coordinate descent, p-Laplacian gradient)
faster.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    extensions = [
        Extension(
            "ssdl._kernels_c",
            ["src/ssdl/_kernels_c.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
            optional=True,
        )
    ]
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
