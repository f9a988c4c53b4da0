"""Build script: compiles the Monte Carlo kernels as a C extension.

The extension is optional.  If Cython or a C compiler is unavailable the
package installs pure-Python and `wedgeflow.simulate` falls back to the
numpy kernels at import time.  `-ffp-contract=off` keeps the compiled
kernels bit-for-bit identical to the numpy fallback (no FMA contraction).
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from setuptools import Extension
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "wedgeflow._kernels",
                sources=["src/wedgeflow/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"wedgeflow: skipping compiled kernels ({exc}); pure-Python fallback will be used")

setup(ext_modules=ext_modules)
