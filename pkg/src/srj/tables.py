"""Parameter table store: shipped optimal schedules plus optimizer output.

The package ships the published optimal-schedule tables for P = 2..15 as a
plain-text file; the optimizer can extend or overwrite them.  Rows are keyed
by (P, N).  Lookup follows the effective-resolution rule: a problem of size
N_target may safely run a schedule optimized for any N <= N_target, because
that schedule's spectrum bound kappa_min is larger than the problem's and
Gamma stays below 1 on the whole band.  The reverse direction is unsafe, so
it is refused rather than approximated.

File format, one record per schedule::

    P N rho digits provenance
    omega_1 omega_2 ... omega_P
    beta_1 beta_2 ... beta_P

`rho` is a checksum (recomputed sum(omega*beta) must agree to 0.5%), `digits`
the precision the row was solved at, and provenance either ``paper-table``
(digitized from the publication) or ``computed`` (produced by the optimizer).
Lines starting with '#' and blank lines are ignored.  Printed betas may sum
to 1 only within rounding; they are renormalized on load.
"""

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .core import WeightSchedule

__all__ = [
    "NoSuchRowError",
    "ParameterTable",
    "TableFormatError",
    "TableRow",
    "shipped_table",
]

_PROVENANCES = ("paper-table", "computed")

# Printed betas carry table rounding; reject only gross violations.
_BETA_SUM_TOL = 1e-4
# The stored rho is a low-precision checksum of sum(omega*beta).
_RHO_CHECK_TOL = 5e-3


class TableFormatError(ValueError):
    """A table file failed to parse or a row violated an invariant."""


class NoSuchRowError(LookupError):
    """No stored row satisfies the lookup request."""


@dataclass(frozen=True, eq=False)
class TableRow:
    """One stored schedule with its provenance.

    Parameters
    ----------
    schedule : WeightSchedule
        The validated schedule (betas renormalized to machine precision).
    provenance : {'paper-table', 'computed'}
        Where the numbers came from.
    precision_digits : int
        Decimal digits carried by the source of the values.
    """

    schedule: WeightSchedule
    provenance: str
    precision_digits: int

    def __post_init__(self):
        if self.provenance not in _PROVENANCES:
            raise ValueError(
                f"provenance must be one of {_PROVENANCES}, got {self.provenance!r}"
            )
        if not (isinstance(self.precision_digits, (int, np.integer))
                and self.precision_digits >= 1):
            raise ValueError(f"precision_digits must be >= 1, got {self.precision_digits}")

    @property
    def p(self):
        return self.schedule.p

    @property
    def n(self):
        return self.schedule.n

    @property
    def rho(self):
        return self.schedule.rho

    def __eq__(self, other):
        if not isinstance(other, TableRow):
            return NotImplemented
        return (
            self.provenance == other.provenance
            and self.precision_digits == other.precision_digits
            and self.schedule.n == other.schedule.n
            and np.array_equal(self.schedule.omegas, other.schedule.omegas)
            and np.array_equal(self.schedule.betas, other.schedule.betas)
        )


@dataclass
class ParameterTable:
    """Mutable collection of schedule rows keyed by (P, N)."""

    _rows: dict = field(default_factory=dict)

    def __len__(self):
        return len(self._rows)

    def __contains__(self, key):
        return tuple(key) in self._rows

    def __eq__(self, other):
        if not isinstance(other, ParameterTable):
            return NotImplemented
        return self._rows == other._rows

    def keys(self):
        """All stored (P, N) keys, sorted."""
        return sorted(self._rows)

    def rows(self):
        """All stored rows in (P, N) order."""
        return [self._rows[k] for k in self.keys()]

    def get(self, p, n):
        """The exact row for (p, n).

        Raises
        ------
        NoSuchRowError
            If that exact key is absent.
        """
        try:
            return self._rows[(p, n)]
        except KeyError:
            raise NoSuchRowError(f"no stored row for P={p}, N={n}") from None

    def add(self, row, overwrite=False):
        """Insert a row; refuse to replace an existing (P, N) unless asked.

        Parameters
        ----------
        row : TableRow
        overwrite : bool
            Replacing a stored row is destructive, so it requires this
            explicit flag.
        """
        if not isinstance(row, TableRow):
            raise TypeError(f"expected TableRow, got {type(row).__name__}")
        key = (row.p, row.n)
        if key in self._rows and not overwrite:
            raise ValueError(
                f"row for P={key[0]}, N={key[1]} already stored; "
                "pass overwrite=True to replace it"
            )
        self._rows[key] = row

    def merge(self, other, overwrite=False):
        """Add every row of another table into this one."""
        for row in other.rows():
            self.add(row, overwrite=overwrite)

    def lookup(self, p, n_target):
        """Best stored schedule for a problem of size n_target.

        Returns the row with the largest N <= n_target among those with
        the requested P.  Schedules for larger N are never substituted:
        their kappa_min lies below the problem's slowest mode and the
        choice would be both suboptimal and potentially divergent.

        Parameters
        ----------
        p : int
            Number of distinct weights.
        n_target : int
            Grid size of the problem to be solved.

        Returns
        -------
        WeightSchedule

        Raises
        ------
        NoSuchRowError
            If no row for this P has N <= n_target.
        """
        best = None
        for (rp, rn), row in self._rows.items():
            if rp != p or rn > n_target:
                continue
            if best is None or rn > best.n:
                best = row
        if best is None:
            if any(rp == p for rp, _ in self._rows):
                stored = min(rn for rp, rn in self._rows if rp == p)
                raise NoSuchRowError(
                    f"P={p}: smallest stored N is {stored}, above target {n_target}"
                )
            raise NoSuchRowError(f"no rows stored for P={p}")
        return best.schedule

    def save(self, path):
        """Write the table in the documented plain-text format."""
        lines = [
            "# SRJ multilevel relaxation parameter tables",
            "# record: 'P N rho digits provenance' / omega line / beta line",
        ]
        for row in self.rows():
            s = row.schedule
            lines.append(
                f"{s.p} {s.n} {s.rho!r} {row.precision_digits} {row.provenance}"
            )
            lines.append(" ".join(repr(float(w)) for w in s.omegas))
            lines.append(" ".join(repr(float(b)) for b in s.betas))
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        """Parse a table file, validating every row.

        Raises
        ------
        TableFormatError
            On malformed syntax or an invariant violation, with the
            offending line number in the message.
        """
        with open(path) as f:
            raw = f.readlines()
        records = [
            (i + 1, ln.strip()) for i, ln in enumerate(raw)
            if ln.strip() and not ln.lstrip().startswith("#")
        ]
        if len(records) % 3 != 0:
            raise TableFormatError(
                f"{path}: {len(records)} data lines, not a multiple of 3"
            )
        table = cls()
        for j in range(0, len(records), 3):
            lineno, header = records[j]
            table.add(_parse_record(header, records[j + 1], records[j + 2], lineno))
        return table


def _parse_record(header, omega_rec, beta_rec, lineno):
    parts = header.split()
    if len(parts) != 5:
        raise TableFormatError(
            f"line {lineno}: header needs 'P N rho digits provenance', got {header!r}"
        )
    try:
        p, n = int(parts[0]), int(parts[1])
        rho_printed = float(parts[2])
        digits = int(parts[3])
    except ValueError as exc:
        raise TableFormatError(f"line {lineno}: {exc}") from None
    provenance = parts[4]
    if provenance not in _PROVENANCES:
        raise TableFormatError(
            f"line {lineno}: provenance must be one of {_PROVENANCES}, "
            f"got {provenance!r}"
        )

    om_lineno, om_line = omega_rec
    be_lineno, be_line = beta_rec
    try:
        omegas = [float(x) for x in om_line.split()]
    except ValueError as exc:
        raise TableFormatError(f"line {om_lineno}: {exc}") from None
    try:
        betas = [float(x) for x in be_line.split()]
    except ValueError as exc:
        raise TableFormatError(f"line {be_lineno}: {exc}") from None
    if len(omegas) != p:
        raise TableFormatError(
            f"line {om_lineno}: expected {p} weights, got {len(omegas)}"
        )
    if len(betas) != p:
        raise TableFormatError(
            f"line {be_lineno}: expected {p} fractions, got {len(betas)}"
        )

    total = math.fsum(betas)
    if abs(total - 1.0) > _BETA_SUM_TOL:
        raise TableFormatError(
            f"line {be_lineno}: fractions sum to {total!r}, "
            f"off 1 by more than {_BETA_SUM_TOL}"
        )
    if abs(total - 1.0) > 1e-13:
        # printed-table rounding; exact files round-trip untouched
        betas = [b / total for b in betas]

    try:
        schedule = WeightSchedule(omegas, betas, n)
    except ValueError as exc:
        raise TableFormatError(f"line {lineno}: {exc}") from None
    if abs(schedule.rho - rho_printed) > _RHO_CHECK_TOL * abs(rho_printed):
        raise TableFormatError(
            f"line {lineno}: stored rho {rho_printed} disagrees with "
            f"recomputed {schedule.rho:.6g} beyond {_RHO_CHECK_TOL:.1%}"
        )
    try:
        return TableRow(schedule, provenance, digits)
    except ValueError as exc:
        raise TableFormatError(f"line {lineno}: {exc}") from None


_shipped_cache = None


def shipped_table():
    """The parameter table distributed with the package.

    Returns a fresh ParameterTable each call; mutating it does not affect
    later calls.
    """
    global _shipped_cache
    if _shipped_cache is None:
        ref = resources.files("srj").joinpath("data/parameter_tables.txt")
        with resources.as_file(ref) as path:
            _shipped_cache = ParameterTable.load(path)
    table = ParameterTable()
    table.merge(_shipped_cache)
    return table
