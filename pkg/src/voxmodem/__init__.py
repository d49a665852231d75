"""voxmodem: a voiceband software modem with a turbo-equalizing receiver.

Byte streams are channel-coded, interleaved, QAM-mapped, pulse-shaped and
upconverted into audio-band PCM; the receiver synchronizes on a preamble,
estimates the channel from embedded training symbols and iterates a soft
MMSE equalizer against the channel decoder.  On top of the modem sit a
channel simulator, a rate adapter and TCP tunnel endpoints.
"""

from voxmodem.config import ModemConfig, data_rate, validate

__version__ = "0.1.0"

__all__ = ["ModemConfig", "data_rate", "validate", "__version__"]
