"""Build hook for the optional compiled kernels.

Falls back to a pure-Python install when Cython or a C compiler is
missing; ``g2calib.kernels`` then selects the numpy implementation.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "g2calib._kernels",
                ["src/g2calib/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
