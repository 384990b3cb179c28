"""Rewrite the CLI golden files after an intentional output change."""
import json
from pathlib import Path

from drainnet.cli import run

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden"


def main():
    cases = json.loads((GOLDEN / "cases.json").read_text())
    for name, argv in cases.items():
        out = GOLDEN / f"{name}.out"
        code = run(argv + ["--out", str(out)])
        print(f"{name}: exit {code}")


if __name__ == "__main__":
    main()
