from fractions import Fraction

import pytest

from voxmodem.config import (
    CODE_RATES,
    Q_VALUES,
    SYMBOL_RATES,
    ModemConfig,
    data_rate,
    load_config,
    validate,
)
from voxmodem.errors import ConfigError


def test_data_rate_reported_operating_points():
    # the two operating points with published rates
    assert data_rate(ModemConfig(q=4, code_rate=Fraction(1, 2), symbol_rate=8000)) == 16000
    assert data_rate(ModemConfig(q=4, code_rate=Fraction(1, 2), symbol_rate=9600)) == 19200


def test_data_rate_is_exact_rational():
    r = data_rate(ModemConfig(q=2, code_rate=Fraction(2, 3), symbol_rate=2400))
    assert r == Fraction(2 * 2 * 2400, 3)
    assert r * 3 == 9600


def test_data_rate_monotone_in_each_knob():
    ref = ModemConfig(q=2, code_rate=Fraction(1, 2), symbol_rate=2400)
    base = data_rate(ref)
    for q in Q_VALUES:
        for rc in CODE_RATES:
            for sr in SYMBOL_RATES:
                cfg = ModemConfig(q=q, code_rate=rc, symbol_rate=sr)
                if validate(cfg):
                    continue
                r = data_rate(cfg)
                if q >= ref.q and rc >= ref.code_rate and sr >= ref.symbol_rate:
                    assert r >= base


def test_default_config_valid():
    assert validate(ModemConfig()) == []


def test_carrier_foldover_detected():
    cfg = ModemConfig(carrier_hz=1000.0, symbol_rate=8000, rolloff=0.2)
    problems = validate(cfg)
    # (1+0.2)*8000/2 = 4800 > 1000
    assert any("folds over" in p for p in problems)


def test_non_integer_samples_per_symbol_detected():
    cfg = ModemConfig(sample_rate_hz=8001, symbol_rate=8000, carrier_hz=2500.0)
    problems = validate(cfg)
    assert any("integer multiple" in p for p in problems)


def test_validate_returns_every_violation():
    cfg = ModemConfig(q=5, code_rate=Fraction(1, 3), symbol_rate=1234)
    problems = validate(cfg)
    assert len(problems) >= 3


def test_data_rate_raises_on_invalid():
    with pytest.raises(ConfigError):
        data_rate(ModemConfig(carrier_hz=100.0))


def test_config_file_roundtrip(tmp_path):
    path = tmp_path / "modem.cfg"
    path.write_text(
        "q = 6\n"
        "code_rate = 3/4\n"
        "symbol_rate = 4800  # comment\n"
        "\n"
        "carrier_hz = 12000\n"
    )
    cfg = load_config(path)
    assert cfg.q == 6
    assert cfg.code_rate == Fraction(3, 4)
    assert cfg.symbol_rate == 4800


def test_config_overrides_win(tmp_path):
    path = tmp_path / "modem.cfg"
    path.write_text("q = 6\n")
    cfg = load_config(path, overrides={"q": 2})
    assert cfg.q == 2


def test_config_unknown_key(tmp_path):
    path = tmp_path / "modem.cfg"
    path.write_text("qq = 6\n")
    with pytest.raises(ConfigError):
        load_config(path)
