"""Exception hierarchy shared by every stage of the pipeline."""


class FreesketchError(Exception):
    """Base class. ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class InputError(FreesketchError, ValueError):
    """Bad file, bad config value, or input that violates a precondition."""

    exit_code = 2


class NumericError(FreesketchError, ArithmeticError):
    """Non-finite loss or gradient during optimization."""

    exit_code = 3


class StageError(FreesketchError):
    """Wraps a failure with the pipeline stage (and view) it happened in."""

    def __init__(self, stage, cause, view=None):
        self.stage = stage
        self.view = view
        self.cause = cause
        where = stage if view is None else f"{stage} (view {view})"
        super().__init__(f"{where}: {cause}")

    @property
    def exit_code(self):
        return getattr(self.cause, "exit_code", 1)
