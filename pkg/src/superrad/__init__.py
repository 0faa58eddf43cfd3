"""Superradiant Rayleigh scattering in an end-pumped condensate."""
