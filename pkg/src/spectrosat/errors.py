"""Exception types raised across the toolkit.

Every error derives from :class:`SpectrosatError`. The CLI maps the three
intermediate families onto its exit codes (config 1, I/O 2, numerical 3).
"""
from __future__ import annotations


class SpectrosatError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SpectrosatError):
    """Invalid configuration or precondition on user-supplied parameters."""


class DataIOError(SpectrosatError):
    """Failure reading or writing an artifact file."""


class NumericalError(SpectrosatError):
    """A computation could not produce a meaningful result."""


# --- linelist -------------------------------------------------------------

class RecordError(DataIOError):
    """A single catalog record could not be parsed."""


class RecordTooShort(RecordError):
    def __init__(self, length: int, required: int = 160):
        super().__init__(f"record has {length} characters, need at least {required}")
        self.length = length


class FieldNotNumeric(RecordError):
    def __init__(self, field: str, offset: int, text: str):
        super().__init__(f"field {field!r} at offset {offset} is not numeric: {text!r}")
        self.field = field
        self.offset = offset
        self.text = text


class EmptyCatalog(DataIOError):
    """No well-formed record was found in a catalog source."""


class IoFailure(DataIOError):
    """The underlying stream or file could not be read or written."""


class FileFormatError(DataIOError):
    """An artifact file is malformed; carries the file name and line number."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class InvalidBand(ConfigError):
    """A wavenumber interval with ``nu_min >= nu_max``."""


# --- radtran --------------------------------------------------------------

class DegenerateProfile(ConfigError):
    """Voigt profile requested with both widths equal to zero."""


class MissingLines(NumericalError):
    """No catalog line falls inside a band that needs one."""


# --- instrument -----------------------------------------------------------

class MissingNoiseSpec(ConfigError):
    """Detector has neither a NEP nor a D* value."""


class BandMismatch(ConfigError):
    """Radiance grid does not cover the channel bandpass."""


class NyquistViolation(ConfigError):
    """Channel extends beyond the Nyquist wavenumber of the OPD sampling."""


# --- dsp ------------------------------------------------------------------

class EmptyInput(ConfigError):
    """An operation that needs at least one frame received none."""


class IncompatibleFrames(ConfigError):
    """Frames disagree on sampling or channel metadata."""


class GridMismatch(ConfigError):
    """Two spectra that must share a grid do not."""


class ZeroReference(NumericalError):
    """Reference spectrum is not strictly positive over the evaluation band."""


class BandOutOfRange(ConfigError):
    """A requested wavenumber interval is not inside the spectral grid."""


class DegenerateBand(NumericalError):
    """Too few grid points inside a band for a statistic."""


class DegenerateNoise(NumericalError):
    """Noise estimate is zero, so an SNR would be infinite."""


# --- retrieval ------------------------------------------------------------

class NegativeTransmittance(NumericalError):
    """Spectrum contains negative values inside a retrieval window."""


class ZeroOxygenColumn(NumericalError):
    """O2 column is not positive, so no mixing ratio can be formed."""


class MissingO2Band(ConfigError):
    """Mixing ratios requested without an O2 reference band."""


class SaturatedBandWarning(UserWarning):
    """Retrieval band is saturated; the linear inversion is biased low."""


# --- config ---------------------------------------------------------------

class ParseError(ConfigError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownKey(ConfigError):
    def __init__(self, path: str):
        super().__init__(f"unknown key: {path}")
        self.path = path
