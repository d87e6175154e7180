"""
Direction comparison table: slice minima along the x-axis vs the diagonal
Reads summary.json of one or more run directories and prints a markdown table
with the reference values of the last sub-critical run for comparison.

Usage: python scripts/isotropy_table.py runs/a [runs/b ...]
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from core.constants import REFERENCE
from core.diagnostics import relative_deviation

# ── Layout ──────────────────────────────────────────────────────
HEADERS = ["run", "N", "A", "quantity", "x-axis", "diagonal", "deviation"]
QUANTITIES = (
    ("t_min", "t of w_min"),
    ("w_min", "w_min"),
    ("w_min_initial", "w_min(0)"),
)
REFERENCE_ROWS = (
    ("t of w_min", REFERENCE.T_MIN_X, REFERENCE.T_MIN_DIAG),
    ("w_min", REFERENCE.W_MIN_X, REFERENCE.W_MIN_DIAG),
    ("w_min(0)", REFERENCE.W0_MIN_X, REFERENCE.W0_MIN_DIAG),
)


def row(cells) -> str:
    return "| " + " | ".join(str(c) for c in cells) + " |"


def run_rows(run_dir: Path) -> list[str]:
    summary = json.loads((run_dir / "summary.json").read_text())
    isotropy = summary.get("isotropy")
    if not isotropy:
        return [row([run_dir.name, summary["N"], summary["A"], "(no minima)", "", "", ""])]
    rows = []
    for key, label in QUANTITIES:
        entry = isotropy[key]
        rows.append(row([run_dir.name, summary["N"], f"{summary['A']:.8f}", label,
                         f"{entry['x_axis']:.8f}", f"{entry['diagonal']:.8f}",
                         f"{entry['deviation']:.3e}"]))
    return rows


def main(argv: list[str]) -> int:
    if not argv:
        print(__doc__.strip().splitlines()[-1], file=sys.stderr)
        return 2
    lines = [row(HEADERS), row(["---"] * len(HEADERS))]
    for label, x, diag in REFERENCE_ROWS:
        lines.append(row(["reference", "", "", label, f"{x:.8f}", f"{diag:.8f}",
                          f"{relative_deviation(x, diag):.3e}"]))
    for arg in argv:
        lines.extend(run_rows(Path(arg)))
    print("\n".join(lines))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
