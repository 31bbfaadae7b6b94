"""Nudging data assimilation for the periodic 3D Navier-Stokes-alpha model."""
