"""Constellation-aware target detection for OFDM ISAC radar.

Simulates multi-target OFDM radar returns for PSK/QAM payloads and detects
targets with either an FFT matched filter plus CA-CFAR or an iterative
subspace detector that cancels already-detected echoes.
"""

__version__ = "0.1.0"
