"""Blow-up certificates, wave-equation simulation and lifespan scaling experiments."""
__version__ = "0.1.0"
