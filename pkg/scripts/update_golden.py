"""Regenerate the product golden file used by the CLI tests."""
from pathlib import Path

from instikit import corpus
from instikit.cli import main

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden" / "atm_product_cap2.json"

if __name__ == "__main__":
    raise SystemExit(main(["product", str(corpus.path()), "--capacity", "2", "-o", str(GOLDEN)]))
