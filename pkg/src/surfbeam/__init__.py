"""surfbeam: dual-frequency ultrasound transmit-beam workbench.

Simulates co-propagating high-frequency imaging pulses and low-frequency
sound-speed manipulation pulses of either polarity, applies post-processing
difference-beam adjustments (pure time-shift, on-axis Wiener equalizer), and
scores the resulting synthetic transmit beams with depth-specific and general
beam-energy quality ratios.
"""

__version__ = "0.1.0"

from . import adjust, fieldstore, metrics, propagator  # noqa: F401
