"""
Spectrum Guard: multi-transmitter localization and power estimation from
distributed RSS sensors.
"""

__version__ = "1.0.0"
