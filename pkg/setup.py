import numpy
from setuptools import setup
from setuptools.extension import Extension

# The compiled kernel is optional: the package falls back to a pure-Python
# implementation of the same contract when the extension is unavailable.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "sceneparse._felz",
                ["src/sceneparse/_felz.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
