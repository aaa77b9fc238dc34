#!/usr/bin/env python3
"""Benchmark a grid of fingerprints x classifiers on one dataset manifest.

Mirrors the full evaluation protocol: one feature extraction pass, a dictionary
per cluster count, then 10-fold CV for every (fingerprint, classifier) cell.
Writes one CSV row per cell. Intended for real micrograph datasets; on the
procedural dataset it doubles as a slow smoke test.

Example:
    python scripts/run_benchmark_grid.py --manifest data/manifest.csv \
        --feature sift --k-grid 10,20,50 --orders 0,1 --out grid_results.csv
"""
import argparse
import csv
import sys
import time
from pathlib import Path

from microfp.cluster import fit_kmeans
from microfp.dataset import load_manifest, load_micrographs, stratified_folds
from microfp.evaluation import MethodSpec, run_cv
from microfp.featureio import build_population
from microfp.fingerprint import FingerprintStack, build_fingerprint
from microfp.keypoints import detect_sift, detect_surf

METHODS = {
    "svm": dict(kind="svm", kernel="chi2"),
    "rf": dict(kind="rf", n_trees=500),
    "kmeans": dict(kind="kmeans"),
    "spectral": dict(kind="spectral"),
    "laplace": dict(kind="laplace"),
    "poisson": dict(kind="poisson"),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--manifest", type=Path, required=True)
    parser.add_argument("--feature", choices=("sift", "surf"), default="sift")
    parser.add_argument("--k-grid", default="10,20,50")
    parser.add_argument("--orders", default="0,1")
    parser.add_argument("--vlad", action="store_true", help="VLAD-normalise the order-1/2 fingerprints")
    parser.add_argument("--methods", default="svm,rf,kmeans,spectral,laplace,poisson")
    parser.add_argument("--folds", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, required=True)
    args = parser.parse_args()

    manifest = load_manifest(args.manifest)
    labels = manifest.labels()
    plan = stratified_folds(manifest, args.folds, args.seed)
    images = load_micrographs(manifest, root=args.manifest.parent)

    detect = detect_sift if args.feature == "sift" else detect_surf
    t0 = time.time()
    sets = [detect(img)[1] for img in images]
    print(f"extracted {sum(len(s) for s in sets)} features in {time.time() - t0:.0f}s", file=sys.stderr)

    population = build_population(sets)
    dictionaries = {}
    for k in (int(v) for v in args.k_grid.split(",")):
        t0 = time.time()
        dictionaries[k] = fit_kmeans(population, k, seed=args.seed)
        print(f"K={k} dictionary in {time.time() - t0:.0f}s", file=sys.stderr)

    rows = []
    for order in (int(v) for v in args.orders.split(",")):
        for k, dictionary in dictionaries.items():
            fingerprints = [
                build_fingerprint(fs, [dictionary], order, vlad=args.vlad and order > 0, diagonal=order == 2)
                for fs in sets
            ]
            stack = FingerprintStack.from_fingerprints(fingerprints)
            for name in args.methods.split(","):
                spec = MethodSpec(**METHODS[name])
                t0 = time.time()
                result = run_cv(stack, labels, spec, plan, seed=args.seed)
                rows.append(
                    {
                        "recipe": stack.recipe.tag(),
                        "method": name,
                        "mean_acc": f"{result.mean:.4f}",
                        "std_acc": f"{result.std:.4f}",
                        "seconds": f"{time.time() - t0:.1f}",
                    }
                )
                print(f"{stack.recipe.tag():30s} {name:9s} {result.mean:.4f} +- {result.std:.4f}", file=sys.stderr)

    with args.out.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["recipe", "method", "mean_acc", "std_acc", "seconds"])
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
