"""Exception hierarchy. Anything deriving from ``IronyError`` is a domain error (CLI exit 1)."""


class IronyError(Exception):
    pass


class CorpusError(IronyError):
    pass


class EmptyAfterPreprocess(IronyError):
    """Raised when cleaning removes every character of a tweet."""

    def __init__(self, tweet_id):
        super().__init__(f"tweet {tweet_id!r}: empty-after-preprocess")
        self.tweet_id = tweet_id


class EmbeddingError(IronyError):
    pass


class AlignmentError(IronyError):
    pass


class ModelError(IronyError):
    pass


class DivergenceError(ModelError):
    pass


class ExperimentError(IronyError):
    pass
