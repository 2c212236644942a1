"""Build script: compiles the optional native kernel extension.

The extension is a performance add-on. If Cython or a C compiler is
unavailable, installation proceeds and the package falls back to the
NumPy kernel implementations at import time.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that downgrades compile failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - environment dependent
            warnings.warn(f"native kernels not built ({exc}); using NumPy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - environment dependent
            warnings.warn(f"native kernels not built ({exc}); using NumPy fallback")


def make_ext_modules():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover - environment dependent
        return []
    return cythonize(
        [
            Extension(
                "skelmotion.kernels._native",
                sources=["src/skelmotion/kernels/_native.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )


setup(ext_modules=make_ext_modules(), cmdclass={"build_ext": optional_build_ext})
