"""Directive-based source-to-source transformation of a Fortran subset.

The package turns ``@parallelRegion`` / ``@domainDependant`` annotated Fortran
into OpenMP, CUDA Fortran or OpenACC source, and ships an interpreter plus a
native simulator so the generated code can be checked without a GPU toolchain.
"""

__version__ = "0.1.0"
