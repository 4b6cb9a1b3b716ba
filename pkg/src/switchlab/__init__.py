"""Spectral transitions of channel-coupled Schroedinger operators.

Modules
-------
oscillator    oscillator eigenfunctions and position matrix elements
secular       tridiagonal secular equations, spectra, thresholds, fits
wavefields    eigenfunctions on a grid, nodal counts, field files
resonances    resonance poles on Riemann sheets, scattering amplitudes
schrodinger1d 1D finite-difference eigenvalues, gamma_p, comparison operators
trap2d        |xy|^p trap on a disc with Dirichlet/Neumann bracketing
cli           command-line front end (``switchlab``)
"""
__version__ = "0.1.0"
