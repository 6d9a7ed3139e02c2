"""Per-iteration run traces and their CSV round-trip.

Column order is a fixed contract consumed by the plotting frontend:
k, evals, wall_ns, psi, psi_gap, norm_gap, grad_psi_norm, z_err, v_err,
diverged.  Floats are written with shortest round-trip repr, so
parse(emit(trace)) is field-exact.
"""

import csv
import io
from dataclasses import dataclass, field, asdict

CSV_COLUMNS = ["k", "evals", "wall_ns", "psi", "psi_gap", "norm_gap",
               "grad_psi_norm", "z_err", "v_err", "diverged"]

_INT_COLUMNS = {"k", "evals", "wall_ns", "diverged"}


@dataclass
class TraceRow:
    k: int
    evals: int
    wall_ns: int
    psi: float
    psi_gap: float
    norm_gap: float
    grad_psi_norm: float
    z_err: float
    v_err: float
    diverged: int = 0


@dataclass
class RunTrace:
    rows: list
    meta: dict = field(default_factory=dict)

    @property
    def final_norm_gap(self) -> float:
        if self.rows and self.rows[-1].diverged:
            return 1.0
        return self.rows[-1].norm_gap if self.rows else float("nan")

    def emit_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            d = asdict(row)
            writer.writerow([str(d[c]) if c in _INT_COLUMNS else repr(float(d[c]))
                             for c in CSV_COLUMNS])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.emit_csv())


def parse_csv(text: str) -> RunTrace:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_COLUMNS:
        raise ValueError(f"unexpected trace columns {header}")
    rows = []
    for rec in reader:
        kwargs = {c: (int(v) if c in _INT_COLUMNS else float(v))
                  for c, v in zip(CSV_COLUMNS, rec)}
        rows.append(TraceRow(**kwargs))
    return RunTrace(rows=rows)


def read_csv(path) -> RunTrace:
    with open(path) as fh:
        return parse_csv(fh.read())
