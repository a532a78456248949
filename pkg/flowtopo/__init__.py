"""
flowtopo

Flow-aware ellipsoidal filtrations for persistent homology of recurrent
signals, with Vietoris-Rips and Fermat baselines, topological denoising
filters and first-return recurrence estimation.
"""

__version__ = "1.0.0"
