"""buschain: five-mode qubit-resonator-bus chain simulator.

Computes the tunable ZZ-coupling landscape of two transmons coupled through
a resonator / tunable-bus / resonator sandwich, calibrates bus-frequency CZ
pulses, and quantifies average gate error with and without resonator decay.
"""

__version__ = "0.1.0"

from . import circuit, config, control, dynamics, spectrum  # noqa: F401
