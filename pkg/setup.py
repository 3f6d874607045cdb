"""Build the optional compiled kernel extension.

The package works without it: stifle_tpa._kernels falls back to the pure
Python implementation when the extension is absent or fails to build.
"""

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
                "stifle_tpa._kernels._core",
                ["src/stifle_tpa/_kernels/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
