"""Build script. The compiled kernel extension is optional: when Cython or a
C compiler is unavailable the package installs pure-Python and selects the
numpy fallback at import time.

Dev build of the extension in-place:  python setup.py build_ext --inplace
"""

from setuptools import setup

ext_modules = []
cmdclass = {}

try:
    from Cython.Build import cythonize
    from setuptools import Extension
    from setuptools.command.build_ext import build_ext

    class OptionalBuildExt(build_ext):
        """Degrade to the pure-Python fallback if compilation fails."""

        def run(self):
            try:
                super().run()
            except Exception as exc:  # compiler missing or broken
                print(f"warning: skipping compiled kernels ({exc})")

        def build_extension(self, ext):
            try:
                super().build_extension(ext)
            except Exception as exc:
                print(f"warning: skipping {ext.name} ({exc})")

    ext_modules = cythonize(
        [
            Extension(
                "ldslink.kernels._core",
                ["src/ldslink/kernels/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
    cmdclass["build_ext"] = OptionalBuildExt
except ImportError:
    print("warning: Cython not available, installing pure-Python kernels only")

setup(ext_modules=ext_modules, cmdclass=cmdclass)
