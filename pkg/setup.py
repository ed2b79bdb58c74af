"""Build script: compiles the optional fast-sweep extension when Cython and a
C compiler are available.  The package is fully functional without it; the
pure-numpy sweep is selected at import time as a fallback."""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, otherwise install pure-Python only."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing or broken toolchain
            warnings.warn(f"fast-sweep extension not built ({exc}); "
                          "falling back to the pure-numpy sweep")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"fast-sweep extension not built ({exc}); "
                          "falling back to the pure-numpy sweep")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension("fedthresh._fast_sweep", ["src/fedthresh/_fast_sweep.pyx"])
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
