"""End-to-end plumbing: homogenize runs, datasets, benchmarks.

Everything here works on files in the exchange formats (containers,
JSON sidecars, manifests) so external tools, including the surrogate
trainer, interact with the solver stack only through artifacts on
disk. Sample generation and benchmark cells are embarrassingly
parallel; a thread pool sized by the PREFINE_THREADS environment
variable (default: CPU count) runs them, and every output is keyed by
sample index so results are byte-identical across pool sizes.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import os
from pathlib import Path

import numpy as np

from .container import (
    ContainerError,
    load_model,
    read_container,
    save_model,
    sidecar_path,
    write_container,
)
from .estimators import Homogenizer, ScalingCalibrator
from .geometry import (
    GrfSpec,
    LevelSetSpec,
    Network,
    TpmsFamily,
    VoxelModel,
    generate_grf,
    solve_level_for_fraction,
    volume_fraction,
    voxelize,
)
from .homogenization import HomogenizedTensor, ScalingFactor

__all__ = [
    "thread_count",
    "active_nodes",
    "prolong_fields",
    "import_initial_guess",
    "generate_tpms_model",
    "coarse_model",
    "run_homogenize",
    "gen_dataset",
    "bench_warmstart",
    "calibrate_from_manifest",
]

DEFAULT_FAMILIES = ("gyroid", "primitive", "diamond")


def thread_count() -> int:
    """Worker cap: PREFINE_THREADS if set, else the CPU count."""
    raw = os.environ.get("PREFINE_THREADS", "").strip()
    if raw:
        value = int(raw)
        if value < 1:
            raise ValueError(f"PREFINE_THREADS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def active_nodes(occupancy: np.ndarray) -> np.ndarray:
    """Boolean (m, m, m) mask of nodes that touch at least one solid voxel.

    Node (i, j, k) is a corner of the eight voxels (i-1..i, j-1..j,
    k-1..k) with periodic wrap; it carries physical displacement data
    exactly when one of them is solid. Values stored at the remaining
    nodes are pinned gauge zeros.
    """
    occupancy = np.asarray(occupancy, dtype=bool)
    active = np.zeros_like(occupancy)
    for di in (0, 1):
        for dj in (0, 1):
            for dk in (0, 1):
                active |= np.roll(occupancy, (di, dj, dk), axis=(0, 1, 2))
    return active


def prolong_fields(
    coarse: np.ndarray, n: int, occupancy: np.ndarray | None = None
) -> np.ndarray:
    """Periodic trilinear prolongation of fields to resolution n.

    ``coarse`` has shape (6, 3, m, m, m) with nodes at the coarse grid
    coordinates j/m; values are interpolated at the fine node
    coordinates i/n with periodic wrap. The coarse resolution m need
    not divide n.

    When ``occupancy`` (the coarse (m, m, m) solid mask) is given,
    interpolation draws only from active coarse nodes with the weights
    renormalized, so the gauge zeros stored at void nodes never bleed
    into solid regions. Fine nodes whose whole coarse support is void
    get zero.
    """
    coarse = np.asarray(coarse, dtype=np.float64)
    if coarse.ndim != 5 or coarse.shape[:2] != (6, 3):
        raise ValueError(f"expected shape (6, 3, m, m, m), got {coarse.shape}")
    m = coarse.shape[2]
    target = np.arange(n) / n * m
    j0 = np.floor(target).astype(np.int64) % m
    j1 = (j0 + 1) % m
    frac = target - np.floor(target)
    if occupancy is None:
        weight = np.ones((m, m, m))
    else:
        occupancy = np.asarray(occupancy, dtype=bool)
        if occupancy.shape != (m, m, m):
            raise ValueError(
                f"occupancy shape {occupancy.shape} does not match coarse "
                f"resolution {m}"
            )
        weight = active_nodes(occupancy).astype(np.float64)
    total = np.zeros(coarse.shape[:2] + (n, n, n))
    norm = np.zeros((n, n, n))
    axes = ((j0, 1.0 - frac), (j1, frac))
    for ci, wi in axes:
        for cj, wj in axes:
            for ck, wk in axes:
                w = (
                    wi[:, None, None]
                    * wj[None, :, None]
                    * wk[None, None, :]
                    * weight[np.ix_(ci, cj, ck)]
                )
                total += w * coarse[..., ci, :, :][..., cj, :][..., ck]
                norm += w
    return total / np.where(norm == 0.0, 1.0, norm)


def import_initial_guess(path, expected_n: int) -> np.ndarray:
    """Load warm-start fields as a (6, 3, n, n, n) grid.

    A JSON sidecar with a "normalization" block ({"mean": [18],
    "std": [18]}) marks fields stored in normalized units; they are
    de-normalized channel by channel (channel = 3 * case + component)
    before use.
    """
    arr = read_container(path)
    n = expected_n
    if arr.shape != (6, 3, n, n, n):
        raise ContainerError(
            f"{path}: warm-start fields must have shape (6, 3, {n}, {n}, {n}), "
            f"got {arr.shape}"
        )
    arr = arr.astype(np.float64)
    side = sidecar_path(path)
    if side.exists():
        with open(side) as fh:
            meta = json.load(fh)
        stats = meta.get("normalization")
        if stats:
            mean = np.asarray(stats["mean"], dtype=np.float64).reshape(6, 3, 1, 1, 1)
            std = np.asarray(stats["std"], dtype=np.float64).reshape(6, 3, 1, 1, 1)
            arr = arr * std + mean
    return arr


def generate_tpms_model(
    family: str | TpmsFamily,
    network: str | Network,
    vf: float,
    n: int,
    nu: float,
    E: float = 1.0,
) -> tuple[VoxelModel, dict]:
    """Build a TPMS model hitting a target volume fraction.

    Returns the model plus the sidecar metadata (family, network,
    level, achieved fraction).
    """
    family = TpmsFamily(family)
    network = Network(network)
    level = solve_level_for_fraction(family, network, vf, n)
    model = voxelize(LevelSetSpec(family, network, level), n, nu, E)
    meta = {
        "family": family.value,
        "network": network.value,
        "c": level,
        "target_vf": vf,
        "volume_fraction": volume_fraction(model),
    }
    return model, meta


def coarse_model(model: VoxelModel, meta: dict, factor: int) -> VoxelModel:
    """Coarse companion of a model for prolongation warm starts.

    Regenerates from the recorded recipe (TPMS level or GRF seed) when
    the sidecar carries one, so the coarse geometry is the true
    low-resolution counterpart; otherwise falls back to majority
    block-downsampling of the occupancy.
    """
    factor = int(factor)
    if factor < 2:
        raise ValueError(f"coarsening factor must be >= 2, got {factor}")
    n = model.resolution
    if n % factor != 0:
        raise ValueError(f"resolution {n} not divisible by factor {factor}")
    m = n // factor
    family = (meta or {}).get("family")
    tpms_names = {f.value for f in TpmsFamily}
    if family in tpms_names and (meta or {}).get("c") is not None:
        spec = LevelSetSpec(
            TpmsFamily(family), Network(meta["network"]), float(meta["c"])
        )
        return voxelize(spec, m, model.poisson_ratio, model.young_modulus)
    if family == "grf" and (meta or {}).get("seed") is not None:
        spec = GrfSpec(
            wave_count=int(meta["wave_count"]),
            seed=int(meta["seed"]),
            target_porosity=float(meta["target_porosity"]),
        )
        return generate_grf(spec, m, model.poisson_ratio, model.young_modulus)
    blocks = model.occupancy.reshape(m, factor, m, factor, m, factor)
    occupancy = blocks.mean(axis=(1, 3, 5)) >= 0.5
    return VoxelModel(m, occupancy, model.poisson_ratio, model.young_modulus)


def _coarse_init(model: VoxelModel, meta: dict, factor: int, solver: dict) -> tuple[np.ndarray, dict]:
    """Solve the coarse companion and prolong its fields to the fine grid."""
    small = coarse_model(model, meta, factor)
    est = Homogenizer(**solver).fit(small)
    init = prolong_fields(est.fields_, model.resolution, small.occupancy)
    info = {
        "coarse_resolution": small.resolution,
        "coarse_iterations": est.total_iterations_,
        "coarse_wall_time_s": sum(r.wall_time for r in est.reports_),
    }
    return init, info


def run_homogenize(
    model_path,
    out_dir,
    tol: float = 1e-8,
    method: str = "pcg",
    preconditioner: str = "jacobi_diag",
    max_iters: int = 50_000,
    init_path=None,
    tol_fine: float | None = None,
) -> dict:
    """Homogenize one stored model; write tensor, fields, reports.

    Produces ``tensor.json`` (entries plus convergence warnings),
    ``tensor.pft``, ``fields.pft``, and ``reports.json`` in
    ``out_dir``; returns the tensor JSON payload.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, _meta = load_model(model_path)
    init = None
    if init_path is not None:
        init = import_initial_guess(init_path, model.resolution)
    est = Homogenizer(
        method=method,
        preconditioner=preconditioner,
        tol=tol,
        max_iters=max_iters,
        tol_fine=tol_fine,
    ).fit(model, init)

    unconverged = [i for i, r in enumerate(est.reports_) if not r.converged]
    gated = [
        i
        for i, r in enumerate(est.reports_)
        if r.iterations == 0 and tol_fine is not None and r.initial_residual < tol_fine
    ]
    payload = est.tensor_.to_json_dict()
    payload["unconverged_cases"] = unconverged
    payload["gated_cases"] = gated
    with open(out / "tensor.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    write_container(out / "tensor.pft", est.tensor_.matrix)
    write_container(out / "fields.pft", est.fields_)
    with open(out / "reports.json", "w") as fh:
        json.dump([r.to_json_dict() for r in est.reports_], fh, indent=2)
        fh.write("\n")
    return payload


def _draw_sample_spec(index: int, config: dict) -> dict:
    """Deterministic per-sample generation parameters."""
    families = list(config.get("families", DEFAULT_FAMILIES))
    networks = list(config.get("networks", ["solid"]))
    vf_lo, vf_hi = config.get("vf_range", (0.26, 0.66))
    nu_lo, nu_hi = config.get("nu_range", (0.1, 0.4))
    seed = int(config.get("seed", 0))
    rng = np.random.default_rng(np.random.SeedSequence((seed, index)))
    return {
        "id": index,
        "kind": "tpms",
        "family": families[index % len(families)],
        "network": networks[index % len(networks)],
        "vf": float(rng.uniform(vf_lo, vf_hi)),
        "nu": float(rng.uniform(nu_lo, nu_hi)),
        "seed": seed,
    }


def _generate_sample(spec: dict, config: dict, out: Path) -> dict:
    """Generate, solve, and persist one dataset sample."""
    n = int(config.get("resolution", 16))
    solver = dict(config.get("solver", {}))
    solver.setdefault("tol", 1e-8)
    stem = f"sample_{spec['id']:04d}"
    if spec["kind"] == "tpms":
        model, meta = generate_tpms_model(
            spec["family"], spec["network"], spec["vf"], n, spec["nu"]
        )
        meta["seed"] = spec["seed"]
    else:
        grf = GrfSpec(
            wave_count=int(spec["wave_count"]),
            seed=int(spec["seed"]),
            target_porosity=float(spec["target_porosity"]),
        )
        model = generate_grf(grf, n, spec["nu"])
        meta = {
            "family": "grf",
            "network": None,
            "c": None,
            "seed": spec["seed"],
            "wave_count": spec["wave_count"],
            "target_porosity": spec["target_porosity"],
            "volume_fraction": volume_fraction(model),
        }

    est = Homogenizer(**solver).fit(model)
    model_file = f"{stem}.model.pft"
    fields_file = f"{stem}.fields.pft"
    report_file = f"{stem}.reports.json"
    tensor_file = f"{stem}.tensor.json"
    save_model(model, out / model_file, meta)
    write_container(out / fields_file, est.fields_)
    with open(out / report_file, "w") as fh:
        json.dump([r.to_json_dict() for r in est.reports_], fh, indent=2)
        fh.write("\n")
    with open(out / tensor_file, "w") as fh:
        json.dump(est.tensor_.to_json_dict(), fh, indent=2)
        fh.write("\n")

    record = {
        "id": spec["id"],
        "model_file": model_file,
        "fields_file": fields_file,
        "report_file": report_file,
        "tensor_file": tensor_file,
        "family": meta["family"],
        "network": meta["network"],
        "c": meta["c"],
        "n": n,
        "nu": model.poisson_ratio,
        "E": model.young_modulus,
        "volume_fraction": meta["volume_fraction"],
        "solver_tol": solver["tol"],
        "seed": spec["seed"],
    }
    if spec["kind"] == "grf":
        record["wave_count"] = spec["wave_count"]
        record["target_porosity"] = spec["target_porosity"]
    return record


def gen_dataset(config: dict, out_dir) -> dict:
    """Generate a homogenized dataset and write its manifest.

    Config keys: count, resolution, seed, families, networks,
    vf_range, nu_range, solver {tol, method, preconditioner,
    max_iters}, and optionally grf {count, porosities, wave_count}.
    Failures are recorded per sample without stopping the run.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = int(config.get("count", 0))
    specs = [_draw_sample_spec(i, config) for i in range(count)]

    grf_cfg = config.get("grf") or {}
    grf_count = int(grf_cfg.get("count", 0))
    porosities = list(grf_cfg.get("porosities", (0.35, 0.25, 0.15)))
    nu_lo, nu_hi = config.get("nu_range", (0.1, 0.4))
    base_seed = int(config.get("seed", 0))
    for g in range(grf_count):
        rng = np.random.default_rng(np.random.SeedSequence((base_seed, count + g)))
        specs.append(
            {
                "id": count + g,
                "kind": "grf",
                "wave_count": int(grf_cfg.get("wave_count", 32)),
                "seed": base_seed * 1_000_003 + g,
                "target_porosity": float(porosities[g % len(porosities)]),
                "nu": float(rng.uniform(nu_lo, nu_hi)),
            }
        )

    samples: list[dict | None] = [None] * len(specs)
    failures: list[dict] = []

    def work(spec):
        return spec["id"], _generate_sample(spec, config, out)

    with concurrent.futures.ThreadPoolExecutor(max_workers=thread_count()) as pool:
        futures = {pool.submit(work, spec): spec for spec in specs}
        for fut in concurrent.futures.as_completed(futures):
            spec = futures[fut]
            try:
                idx, record = fut.result()
                samples[idx] = record
            except Exception as exc:  # record and continue
                failures.append({"id": spec["id"], "error": str(exc)})

    kept = [s for s in samples if s is not None]
    manifest = {"samples": kept}
    if failures:
        manifest["failures"] = sorted(failures, key=lambda f: f["id"])
    stats = _normalization_stats(out, kept)
    if stats is not None:
        manifest["normalization"] = stats
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def _normalization_stats(out: Path, samples: list[dict]) -> dict | None:
    """Per-channel mean/std of the stored fields (18 channels)."""
    if not samples:
        return None
    count = 0
    total = np.zeros(18)
    total_sq = np.zeros(18)
    for record in samples:
        grid = read_container(out / record["fields_file"]).reshape(18, -1)
        total += grid.sum(axis=1)
        total_sq += (grid**2).sum(axis=1)
        count += grid.shape[1]
    mean = total / count
    var = np.maximum(total_sq / count - mean**2, 0.0)
    std = np.sqrt(var)
    std[std == 0.0] = 1.0
    return {"mean": mean.tolist(), "std": std.tolist()}


def _init_label(source) -> str:
    if source == "zero":
        return "zero"
    if isinstance(source, dict) and "coarse" in source:
        return f"coarse{int(source['coarse'])}"
    if isinstance(source, dict) and "file" in source:
        return f"file:{source['file']}"
    raise ValueError(f"unknown init source {source!r}")


def bench_warmstart(spec: dict, out_dir) -> dict:
    """Cold-vs-warm iteration benchmark over models, tols, inits.

    Spec keys: models (list of model container paths), tols,
    init_sources ("zero", {"coarse": k}, {"file": path}), solver
    {method, preconditioner, max_iters}. Writes bench.json and
    bench.csv; returns the JSON payload with per-cell rows, per
    (init, tol) mean iteration counts, and warm/cold ratios.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model_paths = list(spec.get("models", ()))
    tols = [float(t) for t in spec.get("tols", (1e-5,))]
    sources = list(spec.get("init_sources", ("zero",)))
    solver = dict(spec.get("solver", {}))
    solver.pop("tol", None)  # the tol axis comes from the spec's tols list
    solver.setdefault("method", "pcg")
    solver.setdefault("preconditioner", "jacobi_diag")
    solver.setdefault("max_iters", 50_000)
    if not model_paths or not tols or not sources:
        raise ValueError("benchmark needs models, tols, and init_sources")

    loaded = []
    for path in model_paths:
        model, meta = load_model(path)
        loaded.append((str(path), model, meta))

    # warm-start fields are tol-independent; build each once per model
    inits: dict[tuple[str, str], tuple[np.ndarray | None, dict]] = {}
    for path, model, meta in loaded:
        for source in sources:
            label = _init_label(source)
            if source == "zero":
                inits[(path, label)] = (None, {})
            elif "coarse" in source:
                init, info = _coarse_init(
                    model, meta, int(source["coarse"]), solver
                )
                inits[(path, label)] = (init, info)
            else:
                init = import_initial_guess(source["file"], model.resolution)
                inits[(path, label)] = (init, {})

    def run_cell(path, model, label, tol):
        init, info = inits[(path, label)]
        est = Homogenizer(tol=tol, **solver).fit(model, init)
        reports = est.reports_
        row = {
            "model": path,
            "init": label,
            "tol": tol,
            "iterations": est.total_iterations_,
            "mean_iterations": est.total_iterations_ / 6.0,
            "wall_time_s": sum(r.wall_time for r in reports),
            "mean_initial_residual": float(
                np.mean([r.initial_residual for r in reports])
            ),
            "converged_all": all(r.converged for r in reports),
        }
        row.update(info)
        return row

    cells = [
        (path, model, _init_label(source), tol)
        for path, model, _meta in loaded
        for source in sources
        for tol in tols
    ]
    rows: list[dict | None] = [None] * len(cells)
    with concurrent.futures.ThreadPoolExecutor(max_workers=thread_count()) as pool:
        futures = {
            pool.submit(run_cell, path, model, label, tol): i
            for i, (path, model, label, tol) in enumerate(cells)
        }
        for fut in concurrent.futures.as_completed(futures):
            i = futures[fut]
            try:
                rows[i] = fut.result()
            except Exception as exc:
                path, _model, label, tol = cells[i]
                rows[i] = {
                    "model": path,
                    "init": label,
                    "tol": tol,
                    "error": str(exc),
                }

    table = [r for r in rows if r is not None]
    labels = [_init_label(s) for s in sources]
    means: dict[str, dict[str, float]] = {}
    for label in labels:
        means[label] = {}
        for tol in tols:
            vals = [
                r["iterations"]
                for r in table
                if r.get("init") == label and r.get("tol") == tol and "error" not in r
            ]
            means[label][repr(tol)] = float(np.mean(vals)) if vals else float("nan")
    ratios = {
        label: {
            repr(tol): (
                means[label][repr(tol)] / means["zero"][repr(tol)]
                if "zero" in means and means["zero"][repr(tol)] > 0
                else float("nan")
            )
            for tol in tols
        }
        for label in labels
        if label != "zero"
    }
    payload = {
        "rows": table,
        "mean_iterations": means,
        "warm_cold_ratio": ratios,
        "tols": tols,
    }
    with open(out / "bench.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    fieldnames = [
        "model",
        "init",
        "tol",
        "iterations",
        "mean_iterations",
        "wall_time_s",
        "mean_initial_residual",
        "converged_all",
        "coarse_resolution",
        "coarse_iterations",
        "coarse_wall_time_s",
        "error",
    ]
    with open(out / "bench.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        for row in table:
            writer.writerow(row)
    return payload


def calibrate_from_manifest(manifest_path, out_path, mask_threshold: float = 1e-3) -> ScalingFactor:
    """Fit the entrywise scaling factor from manifest tensor pairs.

    Each usable sample names a reference ``tensor_file`` and a
    predicted ``pred_tensor_file`` (written by an external surrogate);
    the fitted factor is saved as JSON at ``out_path``.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    root = manifest_path.parent
    pairs = []
    for record in manifest.get("samples", ()):
        pred_file = record.get("pred_tensor_file")
        truth_file = record.get("tensor_file")
        if not pred_file or not truth_file:
            continue
        with open(root / pred_file) as fh:
            pred = HomogenizedTensor.from_json_dict(json.load(fh))
        with open(root / truth_file) as fh:
            truth = HomogenizedTensor.from_json_dict(json.load(fh))
        pairs.append((pred, truth))
    if not pairs:
        raise ValueError(
            f"{manifest_path}: no samples with both tensor_file and "
            "pred_tensor_file"
        )
    calibrator = ScalingCalibrator(mask_threshold=mask_threshold).fit(
        [p for p, _ in pairs], [t for _, t in pairs]
    )
    factor = calibrator.factor_
    with open(out_path, "w") as fh:
        json.dump(factor.to_json_dict(), fh, indent=2)
        fh.write("\n")
    return factor
