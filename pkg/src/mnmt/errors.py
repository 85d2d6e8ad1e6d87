"""Exception hierarchy shared by every module of the package."""


class MnmtError(Exception):
    """Base class; the CLI maps any subclass to exit code 1."""


class EmptyCorpus(MnmtError):
    pass


class NoLinks(MnmtError):
    pass


class ShapeMismatch(MnmtError):
    pass


class NonFiniteValue(MnmtError):
    pass


class NonFiniteGradient(MnmtError):
    pass


class EmptyInput(MnmtError):
    pass


class Divergence(MnmtError):
    pass


class EmptyMemory(MnmtError):
    pass


class InvalidBeta(MnmtError):
    pass


class NoTrainableSteps(MnmtError):
    pass


class NoUsableCandidate(MnmtError):
    pass


class EmptyTestSet(MnmtError):
    pass


class LengthMismatch(MnmtError):
    pass


class ConfigError(MnmtError):
    """Malformed config file or flag; the CLI maps this to exit code 2."""


class CheckpointError(MnmtError):
    pass
