"""CSV output: a ``# schema=N`` line, optional comment lines, header, rows."""

from __future__ import annotations

import csv
import io
import math

SCHEMA_VERSION = 1


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def render(columns, rows, comments=()) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA_VERSION}\n")
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read(text: str) -> tuple[list[str], list[list[str]]]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    table = list(csv.reader(lines))
    return table[0], table[1:]


PLOT_TEMPLATE = '''"""Plot {csv_name}; generated sidecar, edit freely."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {csv_path!r}
with open(path) as fh:
    rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))

groups = {{}}
for r in rows:
    groups.setdefault(r.get({group!r}, ""), []).append(r)
for name, rs in groups.items():
    plt.plot([float(r[{x!r}]) for r in rs], [float(r[{y!r}]) for r in rs], marker="o", label=name or None)
plt.xlabel({x!r})
plt.ylabel({y!r})
{logscale}if len(groups) > 1:
    plt.legend()
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''


def plot_script(csv_path: str, x: str, y: str, group: str = "scheme", loglog: bool = False) -> str:
    import os

    return PLOT_TEMPLATE.format(csv_name=os.path.basename(csv_path), csv_path=csv_path, x=x, y=y,
                                group=group, logscale='plt.xscale("log")\nplt.yscale("log")\n' if loglog else "")
