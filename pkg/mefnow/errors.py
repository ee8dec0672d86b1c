class FormatError(ValueError):
    """Malformed FSEQ or MEFW content.

    Args:
        message (str): Description of the problem.
        offset (int): Byte offset in the file at which the problem was detected.

    """

    def __init__(self, message, offset):
        super().__init__(message + ' (byte offset ' + str(offset) + ')')
        self.offset = offset


class ConfigurationError(ValueError):
    """Missing checkpoint, missing input data or an invalid run configuration."""


class NumericalError(ArithmeticError):
    """Non-finite values encountered during training.

    Exactly one of ``step`` (phase 1) or ``round_index`` (phase 2) is normally set so that the failing update can be
    located in the training log.

    """

    def __init__(self, message, step=None, round_index=None):
        if step is not None:
            message += ' at step ' + str(step)
        if round_index is not None:
            message += ' at round ' + str(round_index)
        super().__init__(message)
        self.step = step
        self.round_index = round_index
