"""A bounded-universe kernel for set-theoretic dependent type theory with isomorphism."""

__version__ = "0.1.0"
