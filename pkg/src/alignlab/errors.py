"""Exception hierarchy shared across the package.

``ValidationError`` covers bad inputs (files, formats, arguments) and maps
to CLI exit code 1; everything else under ``AlignlabError`` maps to exit
code 2.
"""


class AlignlabError(Exception):
    """Base class for all package errors."""


class ValidationError(AlignlabError):
    """Invalid input data or arguments."""


class WavFormatError(ValidationError):
    """Malformed or unsupported WAV file."""


class TextGridParseError(ValidationError):
    """Malformed TextGrid content."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class PointTierError(TextGridParseError):
    """Point (TextTier) tiers are not supported."""


class ManifestError(ValidationError):
    """Bad corpus manifest."""


class G2pError(ValidationError):
    """Grapheme-to-phoneme conversion failure."""

    def __init__(self, word, position, suffix):
        super().__init__(
            f"cannot map {word!r} at position {position}: no rule matches {suffix!r}"
        )
        self.word = word
        self.position = position
        self.suffix = suffix


class LexiconError(ValidationError):
    """Lexicon compilation or file-format failure."""


class ClassMapError(ValidationError):
    """Phone-class map file inconsistent with the inventory."""


class AugmentError(ValidationError):
    """Invalid augmentation specification or parameters."""


class CodecHookError(AlignlabError):
    """External codec command failed."""

    def __init__(self, command, returncode, stderr):
        super().__init__(
            f"codec command failed with status {returncode}: {command}\n{stderr}"
        )
        self.command = command
        self.returncode = returncode
        self.stderr = stderr


class FeatureError(ValidationError):
    """Feature extraction given unusable input."""


class OovError(ValidationError):
    """Words missing from the lexicon."""

    def __init__(self, words):
        words = sorted(set(words))
        super().__init__("out-of-vocabulary words: " + " ".join(words))
        self.words = words


class NoPathError(AlignlabError):
    """Utterance admits no valid alignment path."""


class EvalError(ValidationError):
    """Reference and hypothesis annotations cannot be compared."""


class SweepError(AlignlabError):
    """Grid definition or execution failure."""
