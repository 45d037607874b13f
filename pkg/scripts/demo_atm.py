"""Walk through the bundled ATM model: checks, a simulated run, the product and the law suites."""
import argparse
import json
import tempfile
from pathlib import Path

from instikit import corpus
from instikit.cli import main


def section(title):
    print(f"\n== {title}")


def run(*argv):
    print("$ instikit " + " ".join(argv))
    code = main(list(argv))
    print(f"(exit {code})")
    return code


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--iterations", type=int, default=200)
    args = ap.parse_args()
    atm = str(corpus.path())

    section("static and dynamic checks")
    run("check", atm)

    section("card(1) then PIN(2): the completion of PINEntered sends verify(1,2)")
    run("simulate", atm, "ATM", "card(1)", "PIN(2)", "--steps", "4")

    section("reachable product fragment of AtmSystem at capacity 2")
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "product.json"
        run("product", atm, "--capacity", "2", "-o", str(out))
        doc = json.loads(out.read_text())
        print(f"{len(doc['configurations'])} configurations, {len(doc['transitions'])} transitions")

    section("institution laws over admissible morphisms")
    run("laws", "--iterations", str(args.iterations))

    section("the same suites over unrestricted morphisms")
    run("laws", "--iterations", str(args.iterations), "--scope", "general")

    section("a reduct that forgets emitted messages")
    run("laws", "--iterations", str(args.iterations), "--institution", "env", "--demo-broken-reduct")
