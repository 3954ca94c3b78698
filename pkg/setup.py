"""Build shim for the compiled kernel extension (metadata lives in pyproject)."""

from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off: no fused multiply-add, so the compiled lane stays
# bit-identical to the pure-python one (see _kernels/_purepy.py).
ext = Extension(
    "roboshim._kernels._core",
    ["src/roboshim/_kernels/_core.pyx"],
    extra_compile_args=["-O3", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], compiler_directives={"language_level": "3"}))
