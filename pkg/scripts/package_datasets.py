"""Build the packaged dataset CSVs under data/.

Sources are the UCI files shipped inside two PyPI wheels (common_datasets,
keel_ds) plus scikit-learn's bundled iris and wine tables.  Multi-class
sources keep their two most represented classes; sources larger than the
15-qubit size are stratified-subsampled with a fixed seed.

Datasets that could not be obtained offline are replaced by a source of the
same qubit footprint; such files carry a ``__sub_<source>`` suffix.

Usage: python scripts/package_datasets.py [--cache DIR] [--out DIR]
"""

from __future__ import annotations

import argparse
import csv
import io
import subprocess
import sys
import zipfile
from pathlib import Path

import numpy as np
from sklearn.datasets import load_iris, load_wine

WHEELS = {
    "common_datasets": "common_datasets-0.3.10-py3-none-any.whl",
    "keel_ds": "keel_ds-0.2.5-py3-none-any.whl",
}
CD_ROOT = "common_datasets/data/classification/"
SUBSAMPLE_SEED = 0


def fetch_wheels(cache: Path) -> dict:
    cache.mkdir(parents=True, exist_ok=True)
    missing = [name for name, whl in WHEELS.items() if not (cache / whl).exists()]
    if missing:
        specs = [f"{name}=={WHEELS[name].split('-')[1]}" for name in missing]
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-d", str(cache), *specs],
            check=True,
        )
    return {name: zipfile.ZipFile(cache / whl) for name, whl in WHEELS.items()}


def read_member(wheel: zipfile.ZipFile, member: str) -> str:
    return wheel.read(member).decode("utf-8")


def parse_keel(text: str):
    """KEEL .dat: '@' header lines, then comma-separated rows with the class last."""
    rows = [line for line in text.splitlines() if line.strip() and not line.startswith("@")]
    cells = [[c.strip() for c in row.split(",")] for row in rows]
    return [c[:-1] for c in cells], [c[-1] for c in cells]


def two_largest_classes(features, labels):
    names, counts = np.unique(labels, return_counts=True)
    # ties broken by class name for determinism
    keep = [n for _, n in sorted(zip(-counts, names))[:2]]
    mask = np.isin(labels, keep)
    return features[mask], labels[mask]


def stratified_subsample(features, labels, size, seed=SUBSAMPLE_SEED):
    """Keep ``size`` rows with class proportions as close as possible to the input."""
    n = labels.shape[0]
    if size >= n:
        return features, labels
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(labels, return_counts=True)
    quota = np.floor(counts * size / n).astype(int)
    remainders = counts * size / n - quota
    for i in np.argsort(-remainders, kind="stable")[: size - quota.sum()]:
        quota[i] += 1
    chosen = np.concatenate(
        [rng.choice(np.flatnonzero(labels == c), q, replace=False) for c, q in zip(classes, quota)]
    )
    chosen.sort()
    return features[chosen], labels[chosen]


def write_csv(path: Path, features, labels):
    path.parent.mkdir(parents=True, exist_ok=True)
    d = features.shape[1]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{j + 1}" for j in range(d)] + ["class"])
        for row, label in zip(features, labels):
            writer.writerow([repr(float(v)) for v in row] + [label])


def iris_pairs():
    iris = load_iris()
    names = np.array(iris.target_names)[iris.target]
    for a, b in (("setosa", "versicolor"), ("setosa", "virginica"), ("versicolor", "virginica")):
        mask = np.isin(names, [a, b])
        yield f"01_iris_{a}_{b}", iris.data[mask], names[mask]


def build(cache: Path, out: Path):
    wheels = fetch_wheels(cache)
    cd, keel = wheels["common_datasets"], wheels["keel_ds"]
    manifest = []

    def emit(name, source, features, labels, size=None, subdir=""):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels).astype(str)
        features, labels = two_largest_classes(features, labels)
        if size is not None:
            features, labels = stratified_subsample(features, labels, size)
        write_csv(out / subdir / f"{name}.csv", features, labels)
        classes, counts = np.unique(labels, return_counts=True)
        manifest.append(
            (subdir or ".", name, source, features.shape[0], features.shape[1],
             ", ".join(f"{c}: {n}" for c, n in zip(classes, counts)))
        )

    for name, x, y in iris_pairs():
        emit(name, "scikit-learn iris", x, y)

    x, y = parse_keel(read_member(keel, "keel_ds/data/balanced/raw/titanic.dat"))
    emit("02_transfusion__sub_titanic", "KEEL titanic (keel_ds wheel)", x, y, 748)

    x, y = parse_keel(read_member(cd, CD_ROOT + "bupa/bupa.dat"))
    emit("03_vertebral_column_2C__sub_bupa", "UCI liver disorders / KEEL bupa", x, y, 310)

    x, y = parse_keel(read_member(cd, CD_ROOT + "appendicitis/appendicitis.dat"))
    emit("04_seeds_1_2__sub_appendicitis", "KEEL appendicitis", x, y)

    text = read_member(cd, CD_ROOT + "ecoli/ecoli.data.txt")
    rows = [line.split() for line in text.splitlines() if line.strip()]
    emit("05_ecoli_cp_im", "UCI ecoli (raw)", [r[1:8] for r in rows], [r[8] for r in rows])

    rows = list(csv.reader(io.StringIO(read_member(cd, CD_ROOT + "glass/glass.data.txt"))))
    rows = [r for r in rows if r]
    gx, gy = [r[1:10] for r in rows], [r[10] for r in rows]
    emit("06_glasses_1_2", "UCI glass identification (raw)", gx, gy, 80)
    emit("06_glasses_1_2", "UCI glass identification (raw)", gx, gy, subdir="32qubits")

    x, y = parse_keel(read_member(cd, CD_ROOT + "saheart/saheart.dat"))
    x = [[{"Present": "1", "Absent": "0"}.get(v, v) for v in row] for row in x]
    emit("07_breast_tissue_adi_fadmasgla__sub_saheart", "KEEL saheart (famhist Present=1, Absent=0)", x, y, 71)

    x, y = parse_keel(read_member(cd, CD_ROOT + "wisconsin/wisconsin.dat"))
    emit("08_breast_cancer__sub_wisconsin", "UCI breast cancer Wisconsin (original) / KEEL", x, y, 80)
    emit("08_breast_cancer__sub_wisconsin", "UCI breast cancer Wisconsin (original) / KEEL", x, y, 116, "32qubits")

    wine = load_wine()
    wy = np.array(wine.target_names)[wine.target]
    emit("09_accent_recognition_uk_us__sub_wine", "scikit-learn wine", wine.data, wy, 80)
    emit("09_accent_recognition_uk_us__sub_wine", "scikit-learn wine", wine.data, wy, subdir="32qubits")

    x, y = parse_keel(read_member(cd, CD_ROOT + "australian/australian.dat"))
    emit("10_leaf_11_9__sub_australian", "UCI statlog australian credit / KEEL", x, y, 30)

    lines = [
        "| set | file | source | N | d | classes |",
        "|---|---|---|---|---|---|",
    ]
    lines += [f"| {s} | {n}.csv | {src} | {rows} | {d} | {cls} |" for s, n, src, rows, d, cls in manifest]
    (out / "MANIFEST.md").write_text(
        "# Packaged datasets\n\nGenerated by `scripts/package_datasets.py` "
        f"(subsample seed {SUBSAMPLE_SEED}).\n\n" + "\n".join(lines) + "\n",
        encoding="utf-8",
    )


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    root = Path(__file__).resolve().parent.parent
    parser.add_argument("--cache", type=Path, default=root / ".cache" / "wheels")
    parser.add_argument("--out", type=Path, default=root / "data")
    args = parser.parse_args(argv)
    build(args.cache, args.out)


if __name__ == "__main__":
    main()
