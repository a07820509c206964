"""Write the public benchmark tables used by the acceptance suite as plain CSV.

Sources: scikit-learn's bundled Wisconsin diagnostic table and the KEEL/UCI
copies shipped in the ``imbalanced-databases`` wheel. Usage::

    pip download imbalanced-databases --no-deps -d /tmp/idb
    python -m zipfile -e /tmp/idb/imbalanced_databases-*.whl /tmp/idb/x
    python tools/make_fixtures.py /tmp/idb/x/imbalanced_databases/data tests/data
"""

import csv
import sys
from pathlib import Path

from sklearn.datasets import load_breast_cancer


def _keel_rows(path):
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith(("@", "%")):
            continue
        yield [c.strip() for c in line.split(",")]


def _keel_header(path):
    names = []
    for line in Path(path).read_text().splitlines():
        if line.lower().startswith("@attribute"):
            names.append(line.split()[1])
    return names


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def main(src, dst):
    src, dst = Path(src), Path(dst)
    dst.mkdir(parents=True, exist_ok=True)

    bc = load_breast_cancer()
    header = [n.replace(" ", "_") for n in bc.feature_names] + ["diagnosis"]
    rows = [[repr(float(v)) for v in x] + [bc.target_names[t]] for x, t in zip(bc.data, bc.target)]
    _write(dst / "wisconsin.csv", header, rows)

    pima = src / "pima" / "pima.dat"
    _write(dst / "diabetes.csv", _keel_header(pima)[:-1] + ["class"], _keel_rows(pima))

    yeast = src / "yeast1" / "yeast1.dat"
    _write(dst / "yeast1.csv", _keel_header(yeast)[:-1] + ["class"], _keel_rows(yeast))

    # UCI glass: leading id column dropped
    glass_header = ["RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe", "type"]
    glass_rows = [r[1:] for r in _keel_rows(src / "glass" / "glass.data.txt")]
    _write(dst / "glass.csv", glass_header, glass_rows)

    kc1 = src / "kc1" / "kc1.arff.txt"
    header = _keel_header(kc1)
    _write(dst / "kc1.csv", [h.replace("(", "_").replace(")", "") for h in header], _keel_rows(kc1))


if __name__ == "__main__":
    main(*sys.argv[1:3])
