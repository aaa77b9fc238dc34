"""Command-line pipeline: extract -> cluster -> fingerprint -> classify.

Subcommands compose through files: feature directories of MFP1 files, MFP1
dictionaries and MFP1 fingerprint stacks. `evaluate` chains all stages with
content-hash caching; `sweep` compares SL against label propagation across
label rates; `synth` writes the procedural two-texture dataset.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import featureio
from . import fingerprint as fp
from .cluster import fit_kmeans, load_dictionary, save_dictionary
from .dataset import load_image, load_manifest, stratified_folds
from .errors import DataError, NumericalError
from .evaluation import CvResult, MethodSpec, label_rate_sweep, run_cv, run_cv_refit, sweep_to_csv
from .keypoints import PatchGridSpec, SiftParams, SurfParams, dense_patches, detect_sift, detect_surf
from .synth import generate_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse variant that uses exit code 1 for usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _threads(override: int | None = None) -> int:
    if override is not None and override > 0:
        return override
    env = os.environ.get("MICROFP_THREADS")
    if env:
        return max(int(env), 1)
    return max(os.cpu_count() or 1, 1)


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def _hash_inputs(params: dict, paths: list[Path]) -> str:
    digest = hashlib.sha256()
    digest.update(json.dumps(params, sort_keys=True, default=str).encode())
    for path in sorted(paths):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


def _stage_cached(meta_path: Path, current_hash: str) -> bool:
    if not meta_path.is_file():
        return False
    stored = json.loads(meta_path.read_text()).get("hash")
    if stored == current_hash:
        return True
    raise DataError(
        f"outputs next to {meta_path} were produced by a different configuration; use a fresh output directory"
    )


def _write_stage_meta(meta_path: Path, current_hash: str) -> None:
    meta_path.write_text(json.dumps({"hash": current_hash}))


# -- extract -------------------------------------------------------------------


def _extract_one(path: Path, method: str, sift_params: SiftParams, surf_params: SurfParams, patch: PatchGridSpec):
    img = load_image(path)
    if method == "sift":
        _, fs = detect_sift(img, sift_params)
    elif method == "surf":
        _, fs = detect_surf(img, surf_params)
    else:
        fs = dense_patches(img, patch)
    return fs


def extract_features(manifest_path: Path, out_dir: Path, method: str, threads: int | None = None, patch_side: int = 16, stride: int = 16) -> list[Path]:
    manifest = load_manifest(manifest_path)
    root = manifest_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    sift_params = SiftParams()
    surf_params = SurfParams()
    patch = PatchGridSpec(patch_side=patch_side, stride=stride)
    paths = [root / p if not Path(p).is_absolute() else Path(p) for p, _ in manifest.entries]

    def one(path: Path):
        return _extract_one(path, method, sift_params, surf_params, patch)

    with ThreadPoolExecutor(max_workers=_threads(threads)) as pool:
        sets = list(pool.map(one, paths))
    written = []
    for fs in sets:
        if len(fs) == 0:
            print(f"warning: no {method} features in {fs.image_id}; skipping", file=sys.stderr)
            continue
        target = out_dir / f"{fs.image_id}.mfp1"
        featureio.write_features(fs, target)
        written.append(target)
    return written


def cmd_extract(args) -> int:
    written = extract_features(
        Path(args.manifest), Path(args.out), args.method, threads=args.threads, patch_side=args.patch_side, stride=args.stride
    )
    print(f"wrote {len(written)} feature files to {args.out}")
    return EXIT_OK


# -- cluster -------------------------------------------------------------------


def _load_feature_dir(feature_dir: Path) -> list:
    files = sorted(feature_dir.glob("*.mfp1"))
    if not files:
        raise DataError(f"no .mfp1 feature files in {feature_dir}")
    sets = []
    for path in files:
        loaded = featureio.read_features(path)
        if isinstance(loaded, featureio.FeatureTensor):
            loaded = fp.cnn_as_features(loaded.values, image_id=loaded.image_id, kind=loaded.kind)
        sets.append(loaded)
    return sets


def cmd_cluster(args) -> int:
    sets = _load_feature_dir(Path(args.features))
    pop = featureio.build_population(sets)
    dictionary = fit_kmeans(pop, args.k, seed=args.seed, max_iter=args.max_iter, tol=args.tol, n_init=args.n_init)
    save_dictionary(dictionary, Path(args.out))
    print(f"fitted K={dictionary.k} dictionary on {len(pop)} features, inertia {dictionary.inertia:.6g}")
    return EXIT_OK


# -- fingerprint -----------------------------------------------------------------


def build_stack(feature_dir: Path, dict_paths: list[Path], order: int, vlad: bool, diagonal: bool, with_h0: bool) -> fp.FingerprintStack:
    sets = _load_feature_dir(feature_dir)
    dictionaries = [load_dictionary(p) for p in dict_paths]
    fingerprints = [
        fp.build_fingerprint(fs, dictionaries, order, vlad=vlad, diagonal=diagonal, with_h0=with_h0) for fs in sets
    ]
    return fp.FingerprintStack.from_fingerprints(fingerprints)


def cmd_fingerprint(args) -> int:
    dict_paths = [Path(p) for p in args.dict]
    if args.multiscale:
        wanted = [int(k) for k in args.multiscale.split(",")]
        by_k = {load_dictionary(p).k: p for p in dict_paths}
        missing = [k for k in wanted if k not in by_k]
        if missing:
            raise DataError(f"no dictionary supplied for K values {missing}")
        dict_paths = [by_k[k] for k in wanted]
    stack = build_stack(Path(args.features), dict_paths, args.order, args.vlad, args.diag, args.with_h0)
    fp.save_stack(stack, Path(args.out))
    print(f"wrote {len(stack)} x {stack.n} stack ({stack.recipe.tag()}) to {args.out}")
    return EXIT_OK


# -- classify --------------------------------------------------------------------


def _labels_for_stack(stack: fp.FingerprintStack, manifest_path: Path) -> np.ndarray:
    manifest = load_manifest(manifest_path)
    by_stem = {Path(p).stem: int(label) for (p, _), label in zip(manifest.entries, manifest.labels())}
    missing = [i for i in stack.ids if i not in by_stem]
    if missing:
        raise DataError(f"stack rows missing from manifest: {missing[:5]}")
    return np.array([by_stem[i] for i in stack.ids], dtype=np.int64)


def _method_from_args(args) -> MethodSpec:
    return MethodSpec(
        kind=args.method,
        kernel=args.kernel,
        gamma=args.gamma,
        C=args.C,
        n_trees=args.n_trees,
        max_depth=args.max_depth,
        min_leaf=args.min_leaf,
        knn=args.knn,
        label_rate=args.label_rate,
    )


def write_results(out_dir: Path, result: CvResult, config_echo: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_config.json").write_text(json.dumps(config_echo, sort_keys=True, indent=2))
    results = out_dir / "results.csv"
    recipe_tag = result.recipe.tag() if result.recipe is not None else ""
    with results.open("w", newline="") as fh:
        fh.write(f"# config {json.dumps(config_echo, sort_keys=True)}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["recipe", "method", "p", "mean_acc", "std_acc", "seed", "kernel", "ssl_score", "dict_per_fold", "pca_per_fold"]
        )
        writer.writerow(
            [
                recipe_tag,
                result.protocol["method"],
                result.protocol.get("label_rate", ""),
                f"{result.mean:.6f}",
                f"{result.std:.6f}",
                result.protocol["seed"],
                result.protocol.get("kernel", ""),
                result.protocol.get("ssl_score", ""),
                result.protocol["dict_per_fold"],
                result.protocol["pca_per_fold"],
            ]
        )
    for fold, confusion in enumerate(result.confusions):
        with (out_dir / f"confusion_{fold}.csv").open("w", newline="") as fh:
            csv.writer(fh).writerows(confusion.counts.tolist())
    return results


def cmd_classify(args) -> int:
    stack = fp.load_stack(Path(args.stack))
    labels = _labels_for_stack(stack, Path(args.manifest))
    manifest = load_manifest(Path(args.manifest))
    plan = stratified_folds(manifest, args.folds, args.seed)
    # the fold plan indexes manifest order; align it with stack row order
    stem_to_pos = {Path(p).stem: i for i, (p, _) in enumerate(manifest.entries)}
    assignments = np.array([plan.assignments[stem_to_pos[i]] for i in stack.ids], dtype=np.int64)
    plan = dataclasses.replace(plan, assignments=assignments)
    method = _method_from_args(args)
    if method.kind == "spectral":
        from .graph import knn_graph, laplacian_spectrum

        spectrum = laplacian_spectrum(knn_graph(stack.matrix, method.knn))
        print("smallest Laplacian eigenvalues (gap hints at cluster count):")
        print("  " + "  ".join(f"{v:.4g}" for v in spectrum))
    result = run_cv(
        stack,
        labels,
        method,
        plan,
        seed=args.seed,
        ssl_score=args.ssl_score,
        pca_r=args.pca,
        pca_per_fold=args.pca_per_fold,
    )
    config_echo = {k: v for k, v in vars(args).items() if k != "func"}
    results = write_results(Path(args.out), result, config_echo)
    print(f"{method.kind}: mean accuracy {result.mean:.4f} +- {result.std:.4f} ({results})")
    return EXIT_OK


# -- evaluate (full pipeline with caching) -----------------------------------------


@dataclass
class RunConfig:
    """Everything one pipeline run depends on; echoed into every results file."""

    manifest: str
    out: str
    feature: str = "sift"
    method: str = "svm"
    order: int = 0
    vlad: bool = False
    diag: bool = False
    with_h0: bool = False
    k: str = "10"
    kernel: str = "chi2"
    gamma: float | None = None
    C: float = 1.0
    n_trees: int = 500
    max_depth: int = 10
    min_leaf: int = 1
    knn: int = 10
    label_rate: float = 0.05
    folds: int = 10
    seed: int = 0
    pca: int | None = None
    pca_per_fold: bool = False
    dict_per_fold: bool = False
    ssl_score: str = "holdout"
    patch_side: int = 16
    stride: int = 16
    threads: int | None = None

    def k_values(self) -> tuple[int, ...]:
        return tuple(int(v) for v in str(self.k).split(","))


_BOOL_KEYS = {"vlad", "diag", "with_h0", "pca_per_fold", "dict_per_fold"}
_INT_KEYS = {"order", "n_trees", "max_depth", "min_leaf", "knn", "folds", "seed", "patch_side", "stride"}
_OPT_INT_KEYS = {"pca", "threads"}
_FLOAT_KEYS = {"C", "label_rate"}
_OPT_FLOAT_KEYS = {"gamma"}


def parse_config_file(path: Path, overrides: dict | None = None) -> RunConfig:
    """key=value per line; '#' starts a comment; unknown keys are rejected."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values: dict = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in known:
            raise DataError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = raw
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    coerced: dict = {}
    for key, raw in values.items():
        if isinstance(raw, str):
            if key in _BOOL_KEYS:
                coerced[key] = raw.lower() in ("1", "true", "yes", "on")
            elif key in _INT_KEYS:
                coerced[key] = int(raw)
            elif key in _OPT_INT_KEYS:
                coerced[key] = None if raw.lower() in ("", "none") else int(raw)
            elif key in _FLOAT_KEYS:
                coerced[key] = float(raw)
            elif key in _OPT_FLOAT_KEYS:
                coerced[key] = None if raw.lower() in ("", "none") else float(raw)
            else:
                coerced[key] = raw
        else:
            coerced[key] = raw
    if "manifest" not in coerced or "out" not in coerced:
        raise DataError("config must set manifest= and out=")
    return RunConfig(**coerced)


def run_pipeline(config: RunConfig) -> CvResult:
    """extract -> cluster -> fingerprint -> classify with content-hash stage caching."""
    manifest_path = Path(config.manifest)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = dataclasses.asdict(config)

    # extract
    feature_dir = out_dir / "features"
    try:
        manifest = load_manifest(manifest_path)
        root = manifest_path.parent
        image_paths = [root / p if not Path(p).is_absolute() else Path(p) for p, _ in manifest.entries]
        extract_params = {
            "stage": "extract",
            "feature": config.feature,
            "patch_side": config.patch_side,
            "stride": config.stride,
        }
        extract_hash = _hash_inputs(extract_params, [manifest_path, *image_paths])
        meta = feature_dir / ".stage.json"
        if not _stage_cached(meta, extract_hash):
            extract_features(
                manifest_path,
                feature_dir,
                config.feature,
                threads=config.threads,
                patch_side=config.patch_side,
                stride=config.stride,
            )
            _write_stage_meta(meta, extract_hash)
    except (DataError, NumericalError) as exc:
        raise StageError("extract", exc) from exc

    labels = manifest.labels()
    plan = stratified_folds(manifest, config.folds, config.seed)
    method = MethodSpec(
        kind=config.method,
        kernel=config.kernel,
        gamma=config.gamma,
        C=config.C,
        n_trees=config.n_trees,
        max_depth=config.max_depth,
        min_leaf=config.min_leaf,
        knn=config.knn,
        label_rate=config.label_rate,
    )

    feature_files = sorted(feature_dir.glob("*.mfp1"))

    if config.dict_per_fold:
        try:
            sets = _load_feature_dir(feature_dir)
            order_stems = [fs.image_id for fs in sets]
            stem_to_pos = {Path(p).stem: i for i, (p, _) in enumerate(manifest.entries)}
            aligned_labels = np.array([labels[stem_to_pos[s]] for s in order_stems], dtype=np.int64)
            assignments = np.array([plan.assignments[stem_to_pos[s]] for s in order_stems], dtype=np.int64)
            aligned_plan = dataclasses.replace(plan, assignments=assignments)
            result = run_cv_refit(
                sets,
                aligned_labels,
                method,
                aligned_plan,
                k_values=config.k_values(),
                order=config.order,
                vlad=config.vlad,
                diagonal=config.diag,
                seed=config.seed,
                kmeans_seed=config.seed,
                ssl_score=config.ssl_score,
            )
        except (DataError, NumericalError) as exc:
            raise StageError("classify", exc) from exc
        write_results(out_dir, result, echo)
        return result

    # cluster
    dict_paths = []
    try:
        for k in config.k_values():
            dict_path = out_dir / f"dict_k{k}.mfp1"
            params = {"stage": "cluster", "k": k, "seed": config.seed}
            stage_hash = _hash_inputs(params, feature_files)
            meta = out_dir / f".dict_k{k}.stage.json"
            if not _stage_cached(meta, stage_hash):
                sets = _load_feature_dir(feature_dir)
                pop = featureio.build_population(sets)
                save_dictionary(fit_kmeans(pop, k, seed=config.seed), dict_path)
                _write_stage_meta(meta, stage_hash)
            dict_paths.append(dict_path)
    except (DataError, NumericalError) as exc:
        raise StageError("cluster", exc) from exc

    # fingerprint
    stack_path = out_dir / "stack.mfp1"
    try:
        params = {
            "stage": "fingerprint",
            "order": config.order,
            "vlad": config.vlad,
            "diag": config.diag,
            "with_h0": config.with_h0,
        }
        stage_hash = _hash_inputs(params, feature_files + dict_paths)
        meta = out_dir / ".stack.stage.json"
        if not _stage_cached(meta, stage_hash):
            stack = build_stack(feature_dir, dict_paths, config.order, config.vlad, config.diag, config.with_h0)
            fp.save_stack(stack, stack_path)
            _write_stage_meta(meta, stage_hash)
        stack = fp.load_stack(stack_path)
    except (DataError, NumericalError) as exc:
        raise StageError("fingerprint", exc) from exc

    # classify
    try:
        stem_to_pos = {Path(p).stem: i for i, (p, _) in enumerate(manifest.entries)}
        aligned_labels = np.array([labels[stem_to_pos[s]] for s in stack.ids], dtype=np.int64)
        assignments = np.array([plan.assignments[stem_to_pos[s]] for s in stack.ids], dtype=np.int64)
        aligned_plan = dataclasses.replace(plan, assignments=assignments)
        result = run_cv(
            stack,
            aligned_labels,
            method,
            aligned_plan,
            seed=config.seed,
            ssl_score=config.ssl_score,
            pca_r=config.pca,
            pca_per_fold=config.pca_per_fold,
        )
    except (DataError, NumericalError) as exc:
        raise StageError("classify", exc) from exc
    write_results(out_dir, result, echo)
    return result


def cmd_evaluate(args) -> int:
    overrides = {
        "manifest": args.manifest,
        "out": args.out,
        "method": args.method,
        "feature": args.feature,
        "seed": args.seed,
    }
    if args.config:
        config = parse_config_file(Path(args.config), overrides)
    else:
        missing = [k for k in ("manifest", "out") if overrides.get(k) is None]
        if missing:
            raise DataError(f"evaluate needs --config or --{missing[0]}")
        config = RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    result = run_pipeline(config)
    print(f"{config.method}: mean accuracy {result.mean:.4f} +- {result.std:.4f} ({config.out}/results.csv)")
    return EXIT_OK


# -- sweep ---------------------------------------------------------------------


def cmd_sweep(args) -> int:
    stack = fp.load_stack(Path(args.stack))
    labels = _labels_for_stack(stack, Path(args.manifest))
    methods = []
    for kind in args.methods.split(","):
        methods.append(
            MethodSpec(
                kind=kind.strip(),
                kernel=args.kernel,
                C=args.C,
                n_trees=args.n_trees,
                knn=args.knn,
            )
        )
    p_list = [float(p) for p in args.p_list.split(",")]
    rows = label_rate_sweep(stack, labels, p_list, methods, repetitions=args.repetitions, seed=args.seed)
    config_echo = {k: v for k, v in vars(args).items() if k != "func"}
    sweep_to_csv(rows, Path(args.out), config_echo)
    print(f"wrote {len(rows)} sweep rows to {args.out}")
    return EXIT_OK


# -- synth ---------------------------------------------------------------------


def cmd_synth(args) -> int:
    manifest = generate_dataset(
        Path(args.out), n_images=args.n_images, size=args.size, seed=args.seed, noise=args.noise, spread=args.spread
    )
    print(f"wrote {args.n_images} images and {manifest}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="microfp", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract base features from every manifest image")
    p.add_argument("--method", choices=("sift", "surf", "patch"), required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--patch-side", type=int, default=16)
    p.add_argument("--stride", type=int, default=16)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("cluster", help="fit a k-means dictionary on a feature directory")
    p.add_argument("--features", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--n-init", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("fingerprint", help="build a fingerprint stack from features and dictionaries")
    p.add_argument("--dict", action="append", required=True, help="dictionary file; repeat for multi-scale")
    p.add_argument("--features", required=True)
    p.add_argument("--order", type=int, choices=(0, 1, 2), required=True)
    p.add_argument("--vlad", action="store_true")
    p.add_argument("--diag", action="store_true")
    p.add_argument("--with-h0", action="store_true")
    p.add_argument("--multiscale", default=None, help="comma-separated K values selecting/ordering dictionaries")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("classify", help="cross-validate one classifier on a fingerprint stack")
    p.add_argument("--stack", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", choices=("svm", "rf", "kmeans", "spectral", "laplace", "poisson"), required=True)
    p.add_argument("--kernel", choices=("linear", "chi2"), default="linear")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--n-trees", type=int, default=500)
    p.add_argument("--max-depth", type=int, default=10)
    p.add_argument("--min-leaf", type=int, default=1)
    p.add_argument("--knn", type=int, default=10)
    p.add_argument("--label-rate", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--pca", type=int, default=None)
    p.add_argument("--pca-per-fold", action="store_true")
    p.add_argument("--ssl-score", choices=("holdout", "all-unlabelled"), default="holdout")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="run the whole pipeline from a key=value config file")
    p.add_argument("--config", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--method", default=None)
    p.add_argument("--feature", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="label-rate sweep comparing SL with label propagation")
    p.add_argument("--stack", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--methods", default="svm,laplace,poisson")
    p.add_argument("--p-list", default="0.01,0.02,0.05,0.1,0.2,0.5")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--kernel", choices=("linear", "chi2"), default="chi2")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--n-trees", type=int, default=500)
    p.add_argument("--knn", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate the procedural two-texture dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-images", type=int, default=40)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--spread", type=float, default=0.0, help="widen per-image parameter ranges in [0, 1]")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc.cause, NumericalError) else EXIT_DATA
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
