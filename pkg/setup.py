"""Build script: compiles the Cython integrator core when a toolchain is available.

The package works without the extension (a numpy fallback is selected at
import), so a failed cythonize is downgraded to a warning rather than a
build error.
"""

import warnings

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "augmentlab.kernels._rk4_c",
                ["src/augmentlab/kernels/_rk4_c.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - toolchain-dependent
    warnings.warn(f"building without compiled integrator core: {exc}")

setup(ext_modules=ext_modules)
