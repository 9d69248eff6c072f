# Collinear three-body scattering package
__version__ = "0.1.0"
