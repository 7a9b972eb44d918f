"""Boundary-integral simulation and adjoint shape design of broadband absorbers
made of elliptical plasmonic nanoparticles."""

__version__ = "0.1.0"
