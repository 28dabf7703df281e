import os
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except Exception:
    cythonize = None

KERNEL = Path("src") / "conic_purge" / "_jacobi"

if cythonize is not None:
    sources = [str(KERNEL.with_suffix(".pyx"))]
elif KERNEL.with_suffix(".c").exists():
    sources = [str(KERNEL.with_suffix(".c"))]
else:
    sources = None

extensions = []
if sources is not None:
    extensions = [
        Extension(
            "conic_purge._jacobi",
            sources=sources,
            extra_compile_args=["-O3"],
        )
    ]
    if cythonize is not None:
        extensions = cythonize(
            extensions, compiler_directives={"language_level": "3"}
        )


class OptionalBuildExt(build_ext):
    """Build the accelerator if possible; fall back to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(f"WARNING: compiled eigensolver kernel not built ({exc}); "
              "conic_purge will use the LAPACK backend")


if os.environ.get("CONIC_PURGE_NO_EXT"):
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
