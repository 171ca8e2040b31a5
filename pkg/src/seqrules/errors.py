"""Exception types shared across the package."""


class SeqRulesError(Exception):
    """Base class; ``category`` drives the CLI exit code."""

    category = "error"


class InvalidArgument(SeqRulesError, ValueError):
    category = "data"


class InvalidDataset(SeqRulesError, ValueError):
    category = "data"


class FormatError(SeqRulesError, ValueError):
    category = "data"


class ConfigError(SeqRulesError, ValueError):
    category = "config"


class TrainingDiverged(SeqRulesError, RuntimeError):
    category = "training"

    def __init__(self, message, *, parameter=None, epoch=None):
        super().__init__(message)
        self.parameter = parameter
        self.epoch = epoch
