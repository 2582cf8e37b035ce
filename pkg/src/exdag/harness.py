"""Experiment harness: dataset CSV/JSON I/O and the simulation sweeps that
reproduce the bivariate-direction and multivariate-recovery experiments at
desk scale, plus exhaustive oracle and identifiability verification sweeps.
"""

from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import oracle as oracle_mod
from .ci_test import DEFAULT_ALPHA
from .discovery import (
    NoSinkFoundError,
    X_TO_Y,
    bivariate_direction,
    discover,
)
from .graphs import (
    Dag,
    ci_set,
    enumerate_dags,
    icm_unroll,
    markov_equivalent_dags,
)
from .sampling import (
    BetaColumnsPrior,
    EnvDataset,
    MixturePrior,
    XorBetaPrior,
    bivariate_xor_model,
    sample_dataset,
)

PRESET_GRAPHS: Dict[str, Dag] = {
    # 3-node fork A->B, A->C
    "fork3": Dag(3, frozenset({(0, 1), (0, 2)})),
    # 3-node collider B->A<-C
    "collider3": Dag(3, frozenset({(1, 0), (2, 0)})),
    "chain3": Dag(3, frozenset({(0, 1), (1, 2)})),
    "chain4": Dag(4, frozenset({(0, 1), (1, 2), (2, 3)})),
    # 4-node chain with the extra B->D shortcut
    "diamond4": Dag(4, frozenset({(0, 1), (1, 2), (2, 3), (1, 3)})),
}


def preset_graph(name: str) -> Dag:
    try:
        return PRESET_GRAPHS[name]
    except KeyError:
        raise ValueError(f"unknown preset graph {name!r}; options: {sorted(PRESET_GRAPHS)}")


def beta_columns_prior(g: Dag, a: float = 1.0, b: float = 3.0) -> MixturePrior:
    """Independent Beta(a, b) per CPT column for every (binary) node."""
    return MixturePrior(tuple(BetaColumnsPrior(a, b) for _ in range(g.d)))


def default_binary_prior(g: Dag, a: float = 1.0, b: float = 3.0) -> MixturePrior:
    """Multivariate experiment prior: every node is a Ber(psi) flip xor the
    parity of its parents with psi ~ Beta(a, b), extending the bivariate
    benchmark's mechanism to arbitrary binary graphs.  Per-column Beta
    draws (see `beta_columns_prior`) make the sink tests nearly powerless
    at the published environment counts."""
    return MixturePrior(tuple(XorBetaPrior(a, b) for _ in range(g.d)))


def derive_seed(*parts: int) -> int:
    """Stable sub-seed derivation for repeat/grid indexing."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _stable_tag(name: str) -> int:
    return int.from_bytes(name.encode()[:6], "big")


@dataclass
class ExperimentConfig:
    kind: str
    env_grid: Tuple[int, ...] = ()
    graphs: Tuple[str, ...] = ()
    samples_per_env: int = 2
    repeats: int = 20
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    paper_scale: bool = False
    force: bool = True
    out_dir: Optional[str] = None

    def __post_init__(self):
        self.env_grid = tuple(int(e) for e in self.env_grid)
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# dataset CSV round trip


def write_dataset_csv(ds: EnvDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["env", "sample"] + [f"X{i + 1}" for i in range(ds.d)])
        for e, rows in enumerate(ds.envs):
            for n in range(rows.shape[0]):
                writer.writerow([e, n] + [int(v) for v in rows[n]])
    sidecar = {
        "seed": ds.seed,
        "cardinalities": list(ds.cardinalities),
        "prior": ds.prior_description,
        "true_graph": ds.true_graph.to_dict() if ds.true_graph is not None else None,
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(sidecar, indent=2) + "\n")


class CsvFormatError(ValueError):
    pass


def ingest_csv(path) -> EnvDataset:
    """Parse the `env,sample,X1..Xd` dataset format, with its JSON sidecar
    (cardinalities, seed, true graph) when present."""
    path = Path(path)
    with path.open() as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file")
        if header[:2] != ["env", "sample"] or len(header) < 3:
            raise CsvFormatError(f"{path}: header must be env,sample,X1,...,Xd")
        d = len(header) - 2
        per_env: Dict[int, Dict[int, List[int]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 2:
                raise CsvFormatError(f"{path}:{lineno}: expected {d + 2} columns, got {len(row)}")
            try:
                values = [int(v) for v in row]
            except ValueError:
                raise CsvFormatError(f"{path}:{lineno}: non-integer value in {row}")
            env, sample = values[0], values[1]
            per_env.setdefault(env, {})[sample] = values[2:]
    if not per_env:
        raise CsvFormatError(f"{path}: no data rows")

    sidecar_path = Path(str(path) + ".meta.json")
    cardinalities = seed = true_graph = None
    prior_description = None
    if sidecar_path.exists():
        meta = json.loads(sidecar_path.read_text())
        if meta.get("cardinalities"):
            cardinalities = tuple(meta["cardinalities"])
        seed = meta.get("seed")
        prior_description = meta.get("prior")
        if meta.get("true_graph"):
            true_graph = Dag.from_dict(meta["true_graph"])

    envs = []
    for env in sorted(per_env):
        samples = per_env[env]
        if sorted(samples) != list(range(len(samples))):
            raise CsvFormatError(f"{path}: environment {env} has non-contiguous sample indices")
        envs.append(np.array([samples[n] for n in range(len(samples))], dtype=np.int64))
    if cardinalities is None:
        cardinalities = tuple(int(max(rows[:, i].max() for rows in envs)) + 1 for i in range(d))
    return EnvDataset(
        d=d,
        cardinalities=cardinalities,
        envs=envs,
        true_graph=true_graph,
        seed=seed,
        prior_description=prior_description,
    )


def discover_file(path, alpha: float = DEFAULT_ALPHA, force: bool = False):
    ds = ingest_csv(path)
    if ds.min_samples < 2:
        raise ValueError(
            "discovery needs at least 2 samples in every environment "
            "(the cross-sample tests reference sample index 1)"
        )
    return discover(ds, alpha=alpha, force=force)


# ---------------------------------------------------------------------------
# bivariate sweep


def _bivariate_point(args):
    n_envs, repeats, alpha, seed, samples_per_env = args
    g, prior = bivariate_xor_model()
    correct = 0
    for r in range(repeats):
        ds = sample_dataset(g, prior, n_envs, samples_per_env, derive_seed(seed, n_envs, r))
        if bivariate_direction(ds, alpha) == X_TO_Y:
            correct += 1
    return {"n_envs": n_envs, "repeats": repeats, "correct_fraction": correct / repeats}


def run_bivariate_sweep(cfg: ExperimentConfig, workers: int = 1) -> List[dict]:
    """Correct-direction fraction of the three-hypothesis decision on the
    xor benchmark, per environment count."""
    grid = cfg.env_grid or (500, 2000, 4000)
    jobs = [(e, cfg.repeats, cfg.alpha, cfg.seed, cfg.samples_per_env) for e in grid]
    rows = list(_pool_map(_bivariate_point, jobs, workers))
    rows.sort(key=lambda r: r["n_envs"])
    if cfg.out_dir:
        _write_sweep(cfg, rows, "bivariate_sweep.csv", ["n_envs", "repeats", "correct_fraction"])
    return rows


# ---------------------------------------------------------------------------
# multivariate recovery


def _multivariate_graph(args):
    name, n_envs, repeats, alpha, seed, samples_per_env, force = args
    g = preset_graph(name)
    prior = default_binary_prior(g)
    exact = 0
    edge_hits = {e: 0 for e in sorted(g.edges)}
    deadlocks = 0
    for r in range(repeats):
        ds = sample_dataset(g, prior, n_envs, samples_per_env, derive_seed(seed, _stable_tag(name), r))
        try:
            result = discover(ds, alpha=alpha, force=force)
        except NoSinkFoundError:
            deadlocks += 1
            continue
        if result.graph == g:
            exact += 1
        for e in edge_hits:
            if e in result.graph.edges:
                edge_hits[e] += 1
    return {
        "graph": name,
        "n_envs": n_envs,
        "repeats": repeats,
        "graph_recovery": exact / repeats,
        "edge_recovery": {f"{u}->{v}": hits / repeats for (u, v), hits in edge_hits.items()},
        "deadlocks": deadlocks,
    }


def default_env_count(name: str, paper_scale: bool) -> int:
    g = preset_graph(name)
    if g.d <= 3:
        return 10_000
    return 100_000 if paper_scale else 20_000


def run_multivariate(cfg: ExperimentConfig, workers: int = 1) -> List[dict]:
    """Full-graph and per-edge recovery rates for the preset graphs."""
    names = cfg.graphs or ("fork3", "collider3", "chain4", "diamond4")
    jobs = []
    for idx, name in enumerate(names):
        n_envs = cfg.env_grid[idx] if idx < len(cfg.env_grid) else default_env_count(
            name, cfg.paper_scale
        )
        jobs.append(
            (name, n_envs, cfg.repeats, cfg.alpha, cfg.seed, cfg.samples_per_env, cfg.force)
        )
    rows = list(_pool_map(_multivariate_graph, jobs, workers))
    rows.sort(key=lambda r: r["graph"])
    if cfg.out_dir:
        flat = [
            {
                "graph": r["graph"],
                "n_envs": r["n_envs"],
                "repeats": r["repeats"],
                "graph_recovery": r["graph_recovery"],
                "deadlocks": r["deadlocks"],
                "edge_recovery": json.dumps(r["edge_recovery"], sort_keys=True),
            }
            for r in rows
        ]
        _write_sweep(
            cfg, flat, "multivariate.csv",
            ["graph", "n_envs", "repeats", "graph_recovery", "deadlocks", "edge_recovery"],
        )
    return rows


# ---------------------------------------------------------------------------
# oracle verification sweep


def run_oracle_sweep(
    d: int,
    models_per_graph: int = 5,
    samples_per_env: int = 2,
    max_condition_size: int = 3,
    seed: int = 0,
    out_dir: Optional[str] = None,
) -> dict:
    """Exhaustive check over all DAGs on d nodes: exact distributions are
    Markov to the unrolled graph, generically faithful, their independence
    sets match the graph's, and the unrolled independence sets are pairwise
    distinct across DAGs."""
    dags = enumerate_dags(d)
    rng = np.random.default_rng(seed)
    graph_reports = []
    graph_ci_sets = []
    for gi, g in enumerate(dags):
        dmag_cis = ci_set(icm_unroll(g, samples_per_env), max_condition_size)
        graph_ci_sets.append(frozenset(s.sort_key() for s in dmag_cis))
        markov_ok = True
        faithful_count = 0
        bridge_count = 0
        for _ in range(models_per_graph):
            model = oracle_mod.random_generic_model(g, samples_per_env, rng)
            report = oracle_mod.verify_markov_faithful(model, max_condition_size)
            if not report.markov_ok:
                markov_ok = False
            if report.faithful:
                faithful_count += 1
            exact_set = oracle_mod.true_ci_set(model, max_condition_size)
            if exact_set == dmag_cis:
                bridge_count += 1
        graph_reports.append(
            {
                "graph": g.to_dict(),
                "markov_ok": markov_ok,
                "faithful_fraction": faithful_count / models_per_graph,
                "bridge_fraction": bridge_count / models_per_graph,
            }
        )
    n_distinct = len(set(graph_ci_sets))
    result = {
        "d": d,
        "n_dags": len(dags),
        "models_per_graph": models_per_graph,
        "all_markov_ok": all(r["markov_ok"] for r in graph_reports),
        "icm_ci_sets_distinct": n_distinct == len(dags),
        "graphs": graph_reports,
    }
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "oracle_sweep.json").write_text(json.dumps(result, indent=2) + "\n")
    return result


def run_identifiability(d: int = 3, samples_per_env: int = 2, out_dir: Optional[str] = None) -> dict:
    """Partition all DAGs on d nodes into classes: by unrolled independence
    sets (expected all singletons) and by classical skeleton/v-structure
    equivalence (expected coarser)."""
    dags = enumerate_dags(d)
    icm_keys = [
        frozenset(s.sort_key() for s in ci_set(icm_unroll(g, samples_per_env), d))
        for g in dags
    ]
    icm_classes: Dict[frozenset, List[int]] = {}
    for idx, key in enumerate(icm_keys):
        icm_classes.setdefault(key, []).append(idx)

    iid_class_of = [-1] * len(dags)
    n_iid_classes = 0
    for i, g in enumerate(dags):
        if iid_class_of[i] >= 0:
            continue
        iid_class_of[i] = n_iid_classes
        for j in range(i + 1, len(dags)):
            if iid_class_of[j] < 0 and markov_equivalent_dags(g, dags[j]):
                iid_class_of[j] = n_iid_classes
        n_iid_classes += 1
    iid_sizes = [iid_class_of.count(c) for c in range(n_iid_classes)]

    result = {
        "d": d,
        "n_dags": len(dags),
        "icm_class_sizes": sorted(len(v) for v in icm_classes.values()),
        "iid_class_count": n_iid_classes,
        "iid_class_sizes": sorted(iid_sizes),
    }
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "identifiability.json").write_text(json.dumps(result, indent=2) + "\n")
    return result


# ---------------------------------------------------------------------------
# helpers


def _pool_map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _write_sweep(cfg: ExperimentConfig, rows: List[dict], csv_name: str, fields: List[str]):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / csv_name).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in fields})
    manifest = {"config": cfg.to_dict(), "output": csv_name}
    (out / (csv_name.rsplit(".", 1)[0] + "_manifest.json")).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
