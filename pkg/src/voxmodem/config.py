"""Modem operating points and the data-rate law the adapter optimizes.

An operating point is the tuple (Q, R_c, symbol rate); the net coded bit
rate is R = Q * R_c * symbol_rate, kept in exact rational arithmetic so
the contract is free of float rounding.
"""

from dataclasses import dataclass, replace
from fractions import Fraction

from voxmodem.errors import ConfigError

CONVOLUTIONAL = "convolutional"
TURBO_PRECODED = "turbo_precoded"
CODE_KINDS = (CONVOLUTIONAL, TURBO_PRECODED)

Q_VALUES = (2, 4, 6)
CODE_RATES = (Fraction(1, 2), Fraction(2, 3), Fraction(3, 4))
SYMBOL_RATES = (2400, 4800, 8000, 9600)

LLR_MAX = 30.0


@dataclass(frozen=True)
class ModemConfig:
    """One modem operating point plus the fixed audio-path parameters.

    q: bits per symbol (2^q-QAM), code_rate: channel code rate R_c,
    symbol_rate: symbols/s (1/T), carrier_hz: f_C, rolloff: SRRC beta,
    sample_rate_hz: audio sample rate f_s, code_kind: channel code family.
    """

    q: int = 4
    code_rate: Fraction = Fraction(1, 2)
    symbol_rate: int = 8000
    carrier_hz: float = 12000.0
    rolloff: float = 0.2
    sample_rate_hz: int = 48000
    code_kind: str = CONVOLUTIONAL

    @property
    def sps(self):
        """Samples per symbol (validated to be an integer)."""
        return int(round(self.sample_rate_hz / self.symbol_rate))

    @property
    def occupied_bandwidth_hz(self):
        """Two-sided width of the shaped spectrum, (1 + beta) / T."""
        return (1.0 + self.rolloff) * self.symbol_rate

    def with_point(self, q, code_rate, symbol_rate):
        return replace(self, q=q, code_rate=Fraction(code_rate), symbol_rate=symbol_rate)


def validate(config):
    """Return every violated invariant (empty list means the config is ok)."""
    violations = []
    if config.q not in Q_VALUES:
        violations.append(f"q={config.q} not in supported set {Q_VALUES}")
    if Fraction(config.code_rate) not in CODE_RATES:
        violations.append(f"code_rate={config.code_rate} not in supported set {CODE_RATES}")
    if config.symbol_rate not in SYMBOL_RATES:
        violations.append(f"symbol_rate={config.symbol_rate} not in supported set {SYMBOL_RATES}")
    if config.code_kind not in CODE_KINDS:
        violations.append(f"code_kind={config.code_kind!r} not in {CODE_KINDS}")
    if not (0.0 < config.rolloff <= 1.0):
        violations.append(f"rolloff={config.rolloff} outside (0, 1]")

    half_band = (1.0 + config.rolloff) * config.symbol_rate / 2.0
    if config.carrier_hz < half_band:
        violations.append(
            f"carrier_hz={config.carrier_hz} folds over: below (1+rolloff)*symbol_rate/2 = {half_band}"
        )
    if config.sample_rate_hz < 2.0 * (config.carrier_hz + half_band):
        violations.append(
            f"sample_rate_hz={config.sample_rate_hz} below Nyquist for passband edge "
            f"{config.carrier_hz + half_band} Hz"
        )
    if config.symbol_rate > 0 and config.sample_rate_hz % config.symbol_rate != 0:
        violations.append(
            f"sample_rate_hz={config.sample_rate_hz} is not an integer multiple of "
            f"symbol_rate={config.symbol_rate}"
        )
    return violations


def require_valid(config):
    violations = validate(config)
    if violations:
        raise ConfigError(violations)
    return config


def data_rate(config):
    """Net coded bit rate R = q * R_c * symbol_rate in bits/s, exact."""
    require_valid(config)
    return config.q * Fraction(config.code_rate) * config.symbol_rate


DEFAULT_CONFIG = ModemConfig()

_FIELD_PARSERS = {
    "q": int,
    "code_rate": Fraction,
    "symbol_rate": int,
    "carrier_hz": float,
    "rolloff": float,
    "sample_rate_hz": int,
    "code_kind": str,
}


def parse_overrides(pairs):
    """Parse {field: string} into typed config fields."""
    parsed = {}
    for key, raw in pairs.items():
        if key not in _FIELD_PARSERS:
            raise ConfigError([f"unknown config key {key!r}"])
        try:
            parsed[key] = _FIELD_PARSERS[key](raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError([f"bad value for {key}: {raw!r} ({exc})"]) from exc
    return parsed


def load_config(path, overrides=None):
    """Read a key=value config file, apply overrides, validate.

    Lines are `field = value`; blank lines and #-comments are ignored.
    Every field can also be given by a CLI flag of the same name, which
    wins over the file.
    """
    pairs = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError([f"{path}:{lineno}: expected key=value, got {line!r}"])
                key, value = (part.strip() for part in line.split("=", 1))
                pairs[key] = value
    fields = parse_overrides(pairs)
    if overrides:
        fields.update({k: v for k, v in overrides.items() if v is not None})
    config = ModemConfig(**fields)
    return require_valid(config)
