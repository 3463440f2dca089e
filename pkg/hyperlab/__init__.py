"""hyperlab: desk-scale lab for non-Hermitian random matrices."""

__version__ = "0.3.0"
