"""Convergence tables: rates, CSV and aligned-text output, fixture comparison."""

import csv
import io
import math
from dataclasses import dataclass, field
from importlib import resources


@dataclass
class ConvergenceTable:
    """Errors per norm on a sequence of meshes n = n_0 < n_1 < ...

    ``percents`` maps a norm to 100 * error / reference norm when the
    reference norm is known.
    """

    ns: list
    errors: dict
    percents: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    printed_rates: dict = field(default_factory=dict)  # rates as read from a file, if any

    @property
    def norms(self):
        return list(self.errors)

    def rates(self, norm):
        """log2(err(n/2) / err(n)); None where the previous level is not n/2."""
        errs = self.errors[norm]
        out = [None]
        for k in range(1, len(self.ns)):
            if self.ns[k] != 2 * self.ns[k - 1] or errs[k] <= 0 or errs[k - 1] <= 0:
                out.append(None)
            else:
                out.append(math.log2(errs[k - 1] / errs[k]))
        return out

    def restrict(self, ns):
        """Copy keeping only the rows whose n is in ``ns``."""
        keep = [k for k, n in enumerate(self.ns) if n in ns]

        def pick(d):
            return {key: [vals[k] for k in keep] for key, vals in d.items() if vals is not None}

        return ConvergenceTable(
            [self.ns[k] for k in keep], pick(self.errors), pick(self.percents), dict(self.metadata), pick(self.printed_rates)
        )

    def columns(self):
        if len(self.norms) == 1 and not self.percents and self.metadata.get("kind") != "solve":
            return ["n", "err", "rate"]
        cols = ["n"]
        for norm in self.norms:
            cols += [f"{norm}_err", f"{norm}_pct", f"{norm}_rate"]
        return cols

    def rows(self):
        """Rows of raw values (None for blank cells), aligned with columns()."""
        simple = self.columns() == ["n", "err", "rate"]
        rates = {norm: self.rates(norm) for norm in self.norms}
        out = []
        for k, n in enumerate(self.ns):
            row = [n]
            for norm in self.norms:
                row.append(self.errors[norm][k])
                if not simple:
                    pct = self.percents.get(norm)
                    row.append(pct[k] if pct is not None else None)
                row.append(rates[norm][k])
            out.append(row)
        return out

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns())
        for row in self.rows():
            writer.writerow([_csv_cell(v) for v in row])
        return buf.getvalue()

    def format(self):
        """Aligned table with two-significant-digit errors, three-decimal percents, one-decimal rates."""
        cols = self.columns()
        lines = []
        if self.metadata:
            lines.append("# " + "  ".join(f"{k}={v}" for k, v in self.metadata.items()))
        cells = [cols]
        for row in self.rows():
            text = []
            for name, v in zip(cols, row):
                if v is None:
                    text.append("")
                elif name == "n":
                    text.append(str(v))
                elif name.endswith("err"):
                    text.append(f"{v:.1e}")
                elif name.endswith("pct"):
                    text.append(f"{v:.3f}")
                else:
                    text.append(f"{v:.1f}")
            cells.append(text)
        widths = [max(len(r[c]) for r in cells) for c in range(len(cols))]
        for r in cells:
            lines.append("  ".join(s.rjust(w) for s, w in zip(r, widths)))
        return "\n".join(lines) + "\n"

    def gnuplot(self):
        """Whitespace-separated data, one line per mesh, '#' header."""
        cols = self.columns()
        lines = ["# " + " ".join(cols)]
        for row in self.rows():
            lines.append(" ".join("nan" if v is None else _csv_cell(v) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text, metadata=None, norm="l2"):
        """Parse CSV written by to_csv; ``norm`` names the column of n,err,rate files."""
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        rows = [r for r in reader if r]
        ns = [int(r[0]) for r in rows]
        errors, percents = {}, {}
        if header == ["n", "err", "rate"]:
            errors[norm] = [float(r[1]) for r in rows]
        else:
            for c, name in enumerate(header):
                if name.endswith("_err"):
                    key = name[: -len("_err")]
                    errors[key] = [float(r[c]) for r in rows]
                    if header[c + 1] == f"{key}_pct":
                        percents[key] = [float(r[c + 1]) if r[c + 1] else None for r in rows]
        table = cls(ns, errors, percents, dict(metadata or {}))
        for c, name in enumerate(header):
            if name.endswith("rate"):
                key = norm if name == "rate" else name[: -len("_rate")]
                table.printed_rates[key] = [float(r[c]) if r[c] else None for r in rows]
        return table


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return f"{v:.17g}"


@dataclass
class CellCheck:
    row: int
    n: int
    column: str
    observed: float
    expected: float
    passed: bool


@dataclass
class FixtureReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def summary(self):
        bad = self.failures()
        lines = [f"{len(self.checks) - len(bad)}/{len(self.checks)} cells within tolerance"]
        for c in bad:
            lines.append(f"  FAIL row {c.row} (n={c.n}) {c.column}: observed {c.observed:.4g}, expected {c.expected:.4g}")
        return "\n".join(lines)


def compare_to_fixture(table, fixture, rate_tol=0.1, err_rel_tol=0.15, rows=None):
    """Cell-by-cell comparison: rates by absolute, errors by relative tolerance.

    ``fixture`` is a ConvergenceTable (typically loaded with from_csv); its
    printed rates are used when present. ``rows`` optionally restricts the
    comparison to the given mesh sizes.
    """
    if table.ns != fixture.ns or set(fixture.norms) - set(table.norms):
        raise ValueError(
            f"shape mismatch: table n={table.ns} norms={table.norms}, fixture n={fixture.ns} norms={fixture.norms}"
        )
    expected_rates = fixture.printed_rates or {m: fixture.rates(m) for m in fixture.norms}
    checks = []
    for norm in fixture.norms:
        observed_rates = table.rates(norm)
        for k, n in enumerate(table.ns):
            if rows is not None and n not in rows:
                continue
            obs, exp = table.errors[norm][k], fixture.errors[norm][k]
            ok = abs(obs - exp) <= err_rel_tol * abs(exp)
            checks.append(CellCheck(k, n, f"{norm}_err", obs, exp, ok))
            r_obs, r_exp = observed_rates[k], expected_rates[norm][k]
            if r_exp is not None and r_obs is not None:
                checks.append(CellCheck(k, n, f"{norm}_rate", r_obs, r_exp, abs(r_obs - r_exp) <= rate_tol + 1e-12))
    return FixtureReport(checks)


def load_fixture(name):
    """Reference table shipped under quadfem/fixtures/<name>.csv."""
    text = resources.files("quadfem").joinpath("fixtures", f"{name}.csv").read_text()
    return ConvergenceTable.from_csv(text, {"fixture": name})


def fixture_names():
    root = resources.files("quadfem").joinpath("fixtures")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".csv"))
