import os

from setuptools import Extension, setup

# The compiled core is optional: without Cython (or with FLYTES_NO_EXT=1)
# the package installs pure Python and uses the numpy fallback.
ext_modules = []
if not os.environ.get("FLYTES_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "flytes._core",
                    ["src/flytes/_core.pyx"],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
