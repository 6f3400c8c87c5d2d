import sys

from setuptools import Extension, setup

# The compiled kernel is an optimization, not a requirement: the package
# falls back to the pure-Python integrator core if the extension is absent
# (see harmap.backend).  Build errors therefore only downgrade, never fail.
ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "harmap._rkc",
                ["src/harmap/_rkc.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - exercised only on broken toolchains
    print(f"harmap: building without compiled kernel ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
