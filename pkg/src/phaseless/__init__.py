"""Phase retrieval from spectrogram samples on square-root lattices.

Submodules: ``windows``, ``lattices``, ``stft``, ``retrieval``, ``analysis``,
``io`` and ``cli``.
"""
__version__ = "0.1.0"
