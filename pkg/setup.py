from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "navoffset._kernels._core",
        ["src/navoffset/_kernels/_core.pyx"],
    ),
]

setup(ext_modules=cythonize(extensions, language_level="3"))
