"""Builds the optional Cython kernels; the package works without them."""
from setuptools import setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        ["src/hilltrunc/_ckernels.pyx"],
        compiler_directives={"language_level": "3"},
    )
    for ext in ext_modules:
        ext.extra_compile_args = ["-O3"]


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:
            print(f"warning: compiled kernels not built ({exc}); using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc}); using pure-Python fallback")


setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
