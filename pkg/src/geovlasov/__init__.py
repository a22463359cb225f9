"""Gravitational Vlasov dynamics on curved surfaces, reduced to geodesics."""

__version__ = "0.1.0"
