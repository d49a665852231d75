"""Exception types shared across the package."""


class ModemError(Exception):
    """Base class for voxmodem errors."""


class ConfigError(ModemError):
    """Raised when a modem configuration violates an invariant.

    Carries every violated invariant, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NoFrameDetected(ModemError):
    """No preamble correlation peak above the detection threshold."""


class TruncatedFrame(ModemError):
    """Buffer ends before the declared frame length."""
