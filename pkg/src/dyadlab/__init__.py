"""Dyadic matrix-weighted harmonic analysis lab."""
