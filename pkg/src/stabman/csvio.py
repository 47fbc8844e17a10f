"""CSV writing with reproducible float formatting.

Floats are rendered with %.17g so round-trips are exact and repeated
runs produce byte-identical files.
"""

from __future__ import annotations

__all__ = ["format_cell", "write_csv"]


def format_cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "%.17g" % v
    if hasattr(v, "item"):
        return format_cell(v.item())
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(c) for c in row) + "\n")
