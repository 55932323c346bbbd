"""Build script for the optional compiled kernels.

The Cython extension is optional: if Cython or a C compiler is missing the
package installs as pure Python and falls back to the numpy kernels.
"""
import os

import numpy as np
from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            print(f"warning: compiled kernels not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")


def _extensions():
    if os.environ.get("PLACESYNTH_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    exts = [
        Extension(
            "placesynth._kernels._ckernels",
            ["src/placesynth/_kernels/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
        )
    ]
    return cythonize(exts, compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
