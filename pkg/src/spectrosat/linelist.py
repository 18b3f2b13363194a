"""HITRAN-style molecular line catalog: parsing, storage and band queries.

Records use the 160-character fixed-width ``.par`` layout introduced with
HITRAN 2004. Only the leading fields needed by a line-by-line forward model
are decoded; quantum labels, uncertainty codes and statistical weights are
ignored.
"""
from __future__ import annotations

import enum
import io
import logging
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import BinaryIO, Iterable, Sequence, TextIO, Union

import numpy as np

from .errors import (
    EmptyCatalog,
    FieldNotNumeric,
    InvalidBand,
    IoFailure,
    RecordError,
    RecordTooShort,
)

log = logging.getLogger(__name__)

RECORD_LENGTH = 160
REFERENCE_TEMPERATURE = 296.0  # K

# (name, start, stop) in 0-based character offsets
PAR_FIELDS = (
    ("molecule_id", 0, 2),
    ("isotopologue", 2, 3),
    ("nu0", 3, 15),
    ("intensity", 15, 25),
    ("einstein_a", 25, 35),
    ("gamma_air", 35, 40),
    ("gamma_self", 40, 45),
    ("elower", 45, 55),
    ("n_air", 55, 59),
    ("delta_air", 59, 67),
)
_OFFSETS = {name: (a, b) for name, a, b in PAR_FIELDS}

O2_DRY_AIR_FRACTION = 0.2095


class GasSpecies(enum.Enum):
    """Absorbers handled by the toolkit, keyed by HITRAN molecule number."""

    CO2 = 2
    CH4 = 6
    O2 = 7

    @property
    def code(self) -> int:
        return self.value

    @property
    def molar_mass(self) -> float:
        """Mass of the principal isotopologue in g/mol."""
        return _MOLAR_MASS[self]

    @classmethod
    def parse(cls, value: Union[str, int, "GasSpecies"]) -> "GasSpecies":
        if isinstance(value, cls):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown gas species {value!r}") from None


_MOLAR_MASS = {
    GasSpecies.CO2: 43.98983,
    GasSpecies.CH4: 16.0313,
    GasSpecies.O2: 31.98983,
}


@dataclass(frozen=True)
class SpectralLine:
    """One molecular transition at the 296 K reference temperature.

    Units: ``nu0`` and ``elower`` in cm-1, ``intensity`` in
    cm-1/(molecule cm-2), widths and shift in cm-1/atm.
    """

    molecule_id: int
    isotopologue: int
    nu0: float
    intensity: float
    gamma_air: float
    gamma_self: float
    elower: float
    n_air: float
    delta_air: float
    einstein_a: float = 0.0

    def __post_init__(self):
        if not self.nu0 > 0:
            raise RecordError(f"line position must be positive, got {self.nu0}")
        for name in ("intensity", "gamma_air", "gamma_self", "elower"):
            if getattr(self, name) < 0:
                raise RecordError(f"{name} must be non-negative, got {getattr(self, name)}")


def _isotopologue(char: str) -> int:
    # HITRAN writes isotopologues 10, 11, 12 as 0, A, B
    if char.isdigit():
        n = int(char)
        return 10 if n == 0 else n
    if char in "ABCDEFGHI":
        return 11 + "ABCDEFGHI".index(char)
    raise FieldNotNumeric("isotopologue", _OFFSETS["isotopologue"][0], char)


def _number(record: str, name: str, kind=float):
    a, b = _OFFSETS[name]
    text = record[a:b]
    try:
        return kind(text.strip())
    except ValueError:
        raise FieldNotNumeric(name, a, text) from None


def parse_par_record(record: str | bytes) -> SpectralLine:
    """Decode one fixed-width ``.par`` record.

    Raises :class:`RecordTooShort` when fewer than 160 characters are given
    and :class:`FieldNotNumeric` (carrying the field offset) when a numeric
    field does not parse.
    """
    if isinstance(record, bytes):
        record = record.decode("ascii", errors="replace")
    record = record.rstrip("\r\n")
    if len(record) < RECORD_LENGTH:
        raise RecordTooShort(len(record), RECORD_LENGTH)
    iso_char = record[2]
    if iso_char == " ":
        raise FieldNotNumeric("isotopologue", 2, iso_char)
    return SpectralLine(
        molecule_id=_number(record, "molecule_id", int),
        isotopologue=_isotopologue(iso_char),
        nu0=_number(record, "nu0"),
        intensity=_number(record, "intensity"),
        einstein_a=_number(record, "einstein_a"),
        gamma_air=_number(record, "gamma_air"),
        gamma_self=_number(record, "gamma_self"),
        elower=_number(record, "elower"),
        n_air=_number(record, "n_air"),
        delta_air=_number(record, "delta_air"),
    )


def _fixed(value: float, width: int, decimals: int) -> str:
    text = f"{value:{width}.{decimals}f}"
    if len(text) > width:
        # Fortran Fw.d drops the leading zero of |x| < 1
        text = text.replace("0.", ".", 1)
    if len(text) > width:
        raise ValueError(f"{value} does not fit F{width}.{decimals}")
    return text.rjust(width)


def format_par_record(line: SpectralLine) -> str:
    """Inverse of :func:`parse_par_record`; trailing fields are blank-filled."""
    iso = line.isotopologue
    iso_char = "0" if iso == 10 else (str(iso) if iso < 10 else "ABCDEFGHI"[iso - 11])
    head = (
        f"{line.molecule_id:2d}{iso_char}"
        + _fixed(line.nu0, 12, 6)
        + f"{line.intensity:10.3E}"
        + f"{line.einstein_a:10.3E}"
        + _fixed(line.gamma_air, 5, 4)
        + _fixed(line.gamma_self, 5, 3)
        + _fixed(line.elower, 10, 4)
        + _fixed(line.n_air, 4, 2)
        + _fixed(line.delta_air, 8, 6)
    )
    return head.ljust(RECORD_LENGTH)


@dataclass(frozen=True)
class Diagnostic:
    line_number: int
    message: str


@dataclass(frozen=True)
class LineCatalog:
    """Immutable set of lines sorted by position.

    ``species_index`` maps a molecule code to the catalog positions of its
    lines; each per-species slice is itself sorted by ``nu0`` so a band query
    is a pair of binary searches.
    """

    lines: tuple[SpectralLine, ...]
    diagnostics: tuple[Diagnostic, ...] = ()
    species_index: dict = field(init=False, repr=False, compare=False)
    _positions: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        order = sorted(range(len(self.lines)), key=lambda i: (self.lines[i].nu0, i))
        lines = tuple(self.lines[i] for i in order)
        object.__setattr__(self, "lines", lines)
        index: dict[int, np.ndarray] = {}
        for code in sorted({ln.molecule_id for ln in lines}):
            index[code] = np.array(
                [i for i, ln in enumerate(lines) if ln.molecule_id == code], dtype=np.intp
            )
            index[code].setflags(write=False)
        object.__setattr__(self, "species_index", index)
        positions = {}
        for code, idx in index.items():
            nu = np.array([lines[i].nu0 for i in idx])
            nu.setflags(write=False)
            positions[code] = nu
        object.__setattr__(self, "_positions", positions)

    def __len__(self) -> int:
        return len(self.lines)

    def __iter__(self):
        return iter(self.lines)

    def species_positions(self, species: GasSpecies) -> np.ndarray:
        return self._positions.get(GasSpecies.parse(species).code, np.empty(0))


def _read_source(source) -> list[str]:
    if isinstance(source, (str, os.PathLike)) and not (
        isinstance(source, str) and "\n" in source
    ):
        try:
            with open(source, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise IoFailure(f"cannot read catalog {source}: {exc}") from exc
    elif isinstance(source, str):
        data = source.encode("ascii", errors="replace")
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        try:
            data = source.read()
        except (OSError, ValueError) as exc:
            raise IoFailure(f"cannot read catalog stream: {exc}") from exc
        if isinstance(data, str):
            data = data.encode("ascii", errors="replace")
    return data.decode("ascii", errors="replace").splitlines()


def load_catalog(source: Union[str, os.PathLike, bytes, BinaryIO, TextIO]) -> LineCatalog:
    """Build a :class:`LineCatalog` from newline-separated ``.par`` records.

    `source` may be a path, raw bytes, or a readable stream. Malformed records
    are skipped and reported in ``catalog.diagnostics`` with their 1-based
    line numbers; blank lines are ignored.
    """
    lines: list[SpectralLine] = []
    diagnostics: list[Diagnostic] = []
    for number, text in enumerate(_read_source(source), start=1):
        if not text.strip():
            continue
        try:
            lines.append(parse_par_record(text))
        except RecordError as exc:
            diagnostics.append(Diagnostic(number, str(exc)))
            log.warning("catalog line %d skipped: %s", number, exc)
    if not lines:
        raise EmptyCatalog("no well-formed records in catalog source")
    return LineCatalog(tuple(lines), tuple(diagnostics))


def query_band(
    catalog: LineCatalog, species: GasSpecies, nu_min: float, nu_max: float
) -> list[SpectralLine]:
    """Lines of `species` with ``nu_min <= nu0 <= nu_max``, ascending."""
    if not nu_min < nu_max:
        raise InvalidBand(f"empty band [{nu_min}, {nu_max}]")
    species = GasSpecies.parse(species)
    idx = catalog.species_index.get(species.code)
    if idx is None:
        return []
    nu = catalog.species_positions(species)
    lo = np.searchsorted(nu, nu_min, side="left")
    hi = np.searchsorted(nu, nu_max, side="right")
    return [catalog.lines[i] for i in idx[lo:hi]]


def line_arrays(lines: Sequence[SpectralLine]) -> dict[str, np.ndarray]:
    """Column view of a line list for vectorized forward-model code."""
    names = ("nu0", "intensity", "gamma_air", "gamma_self", "elower", "n_air", "delta_air")
    return {n: np.array([getattr(ln, n) for ln in lines], dtype=float) for n in names}


FIXTURE_NAME = "fixture_lines.par"


def fixture_path():
    return resources.files("spectrosat") / "data" / FIXTURE_NAME


def fixture_catalog() -> LineCatalog:
    """The bundled synthetic catalog (see ``data/README.md`` for provenance)."""
    return load_catalog(io.BytesIO(fixture_path().read_bytes()))


def write_catalog(lines: Iterable[SpectralLine], path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for ln in lines:
            fh.write(format_par_record(ln) + "\n")
