"""Generative sampling of exchangeable multi-environment categorical data.

Each environment draws one conditional-probability table (CPT) per variable
from its prior, then produces conditionally i.i.d. ancestral samples through
the causal graph using those fixed CPTs.  Environments use counter-based
seeding (root seed, environment index), so generation is reproducible and
parallelizable per environment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .graphs import Dag

COLUMN_SUM_TOL = 1e-12


@dataclass(frozen=True)
class BetaColumnsPrior:
    """Binary node whose P(X=1 | parent config) is an independent Beta draw
    per parent configuration."""

    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("Beta parameters must be strictly positive")

    cardinality = 2


@dataclass(frozen=True)
class XorBetaPrior:
    """Binary node equal to an independent Ber(psi) flip xor the parity of
    its binary parents, psi ~ Beta(a, b).  As a CPT this ties all columns:
    P(X=1 | pa) = psi when the parents' parity is even, 1 - psi when odd.
    With no parents it reduces to X ~ Ber(psi)."""

    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("Beta parameters must be strictly positive")

    cardinality = 2


@dataclass(frozen=True)
class DirichletColumnsPrior:
    """Categorical node whose CPT columns are independent Dirichlet draws."""

    alpha: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if len(self.alpha) < 2:
            raise ValueError("Dirichlet prior needs at least two categories")
        if any(a <= 0 for a in self.alpha):
            raise ValueError("Dirichlet parameters must be strictly positive")

    @property
    def cardinality(self):
        return len(self.alpha)


class AtomMixturePrior:
    """Explicit finite mixture of CPT atoms: (weight, cpt) pairs."""

    def __init__(self, atoms: Sequence[Tuple[float, np.ndarray]]):
        if not atoms:
            raise ValueError("atom mixture needs at least one atom")
        self.atoms = [(float(w), np.asarray(cpt, dtype=float)) for w, cpt in atoms]
        total = sum(w for w, _ in self.atoms)
        if any(w < 0 for w, _ in self.atoms) or abs(total - 1.0) > COLUMN_SUM_TOL:
            raise ValueError("atom weights must be nonnegative and sum to 1")
        k = self.atoms[0][1].shape[0]
        for _, cpt in self.atoms:
            if cpt.ndim != 2 or cpt.shape[0] != k:
                raise ValueError("all atoms must share CPT shape (k, n_parent_configs)")
            _check_cpt(cpt)

    @property
    def cardinality(self):
        return self.atoms[0][1].shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, AtomMixturePrior)
            and len(self.atoms) == len(other.atoms)
            and all(
                w1 == w2 and np.array_equal(c1, c2)
                for (w1, c1), (w2, c2) in zip(self.atoms, other.atoms)
            )
        )

    def __repr__(self):
        return f"AtomMixturePrior({len(self.atoms)} atoms, k={self.cardinality})"


NodePrior = Union[BetaColumnsPrior, XorBetaPrior, DirichletColumnsPrior, AtomMixturePrior]


@dataclass(frozen=True)
class MixturePrior:
    """Per-node priors over CPTs (the discrete analogue of the de Finetti
    mixing measures, one per causal mechanism)."""

    node_priors: Tuple[NodePrior, ...]

    def __post_init__(self):
        object.__setattr__(self, "node_priors", tuple(self.node_priors))

    @property
    def d(self):
        return len(self.node_priors)

    @property
    def cardinalities(self) -> Tuple[int, ...]:
        return tuple(p.cardinality for p in self.node_priors)

    def describe(self) -> List[str]:
        return [repr(p) for p in self.node_priors]


def _check_cpt(cpt: np.ndarray):
    if np.any(cpt < -COLUMN_SUM_TOL) or np.any(cpt > 1 + COLUMN_SUM_TOL):
        raise ValueError("CPT entries must lie in [0, 1]")
    sums = cpt.sum(axis=0)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise ValueError("every CPT column must sum to 1")


@dataclass
class EnvParams:
    """One environment's realized CPTs, cpts[i] has shape (k_i, prod_{j in PA_i} k_j)."""

    cpts: List[np.ndarray]

    def __post_init__(self):
        for cpt in self.cpts:
            _check_cpt(np.asarray(cpt))


def parent_configs(g: Dag, cardinalities: Sequence[int], i: int) -> Tuple[Tuple[int, ...], int]:
    """Sorted parent list of node i and the number of joint parent configurations."""
    pa = tuple(sorted(g.parents(i)))
    n_cfg = 1
    for p in pa:
        n_cfg *= cardinalities[p]
    return pa, n_cfg


def parent_config_index(values: np.ndarray, pa_cards: Sequence[int]) -> np.ndarray:
    """Mixed-radix column index for parent value combinations (C order:
    first parent most significant)."""
    if len(pa_cards) == 0:
        return np.zeros(values.shape[0] if values.ndim > 1 else 1, dtype=np.intp)
    return np.ravel_multi_index(tuple(values.T), tuple(pa_cards))


def _draw_node_cpt(prior: NodePrior, n_cfg: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(prior, BetaColumnsPrior):
        p1 = rng.beta(prior.a, prior.b, size=n_cfg)
        return np.vstack([1.0 - p1, p1])
    if isinstance(prior, XorBetaPrior):
        if n_cfg & (n_cfg - 1):
            raise ValueError("XorBetaPrior requires binary parents")
        psi = rng.beta(prior.a, prior.b)
        parity = np.array([bin(cfg).count("1") % 2 for cfg in range(n_cfg)])
        p1 = np.where(parity == 0, psi, 1.0 - psi)
        return np.vstack([1.0 - p1, p1])
    if isinstance(prior, DirichletColumnsPrior):
        cols = rng.dirichlet(np.asarray(prior.alpha), size=n_cfg)
        return cols.T
    if isinstance(prior, AtomMixturePrior):
        weights = np.array([w for w, _ in prior.atoms])
        idx = rng.choice(len(prior.atoms), p=weights)
        cpt = prior.atoms[idx][1]
        if cpt.shape[1] != n_cfg:
            raise ValueError(
                f"atom CPT has {cpt.shape[1]} columns, graph implies {n_cfg} parent configs"
            )
        return cpt.copy()
    raise TypeError(f"unknown prior type {type(prior).__name__}")


def sample_env_params(
    prior: MixturePrior, g: Dag, rng_seed: Union[int, np.random.Generator]
) -> EnvParams:
    """Draw one independent CPT per node.  Deterministic given the seed."""
    if prior.d != g.d:
        raise ValueError(f"prior covers {prior.d} nodes, graph has {g.d}")
    rng = _as_rng(rng_seed)
    cards = prior.cardinalities
    cpts = []
    for i in range(g.d):
        _, n_cfg = parent_configs(g, cards, i)
        cpts.append(_draw_node_cpt(prior.node_priors[i], n_cfg, rng))
    return EnvParams(cpts)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass
class EnvDataset:
    """Categorical observations indexed (environment, sample, variable)."""

    d: int
    cardinalities: Tuple[int, ...]
    envs: List[np.ndarray]  # each of shape (N_e, d)
    true_graph: Optional[Dag] = None
    seed: Optional[int] = None
    prior_description: Optional[List[str]] = None

    def __post_init__(self):
        self.cardinalities = tuple(int(k) for k in self.cardinalities)
        if len(self.cardinalities) != self.d:
            raise ValueError("need one cardinality per variable")
        arrays = []
        for e, rows in enumerate(self.envs):
            rows = np.asarray(rows)
            if rows.ndim != 2 or rows.shape[1] != self.d:
                raise ValueError(f"environment {e}: rows must have shape (N_e, {self.d})")
            if rows.shape[0] < 1:
                raise ValueError(f"environment {e} is empty")
            arrays.append(rows)
        self.envs = arrays
        n0 = arrays[0].shape[0]
        self._stack = np.stack(arrays) if all(a.shape[0] == n0 for a in arrays) else None
        if self._stack is not None:
            # validate value ranges on the stacked array in one pass
            flat = self._stack.reshape(-1, self.d)
            bad = [
                i
                for i, k in enumerate(self.cardinalities)
                if flat[:, i].min() < 0 or flat[:, i].max() >= k
            ]
        else:
            bad = []
            for rows in arrays:
                for i, k in enumerate(self.cardinalities):
                    if rows[:, i].min() < 0 or rows[:, i].max() >= k:
                        bad.append(i)
        if bad:
            i = bad[0]
            k = self.cardinalities[i]
            for e, rows in enumerate(arrays):
                if rows[:, i].min() < 0 or rows[:, i].max() >= k:
                    raise ValueError(
                        f"environment {e}: variable {i} value out of range [0, {k})"
                    )

    @property
    def n_envs(self):
        return len(self.envs)

    @property
    def min_samples(self):
        return min(rows.shape[0] for rows in self.envs)

    def stacked(self) -> Optional[np.ndarray]:
        """(n_envs, N, d) array when all environments share a sample count, else None."""
        return self._stack

    def values_at(self, coords: Sequence[Tuple[int, int]]) -> np.ndarray:
        """Per-environment observation of the given (variable, sample) coordinates.

        Returns an array of shape (n_envs, len(coords)).  Raises if any
        environment has fewer samples than a referenced sample index.
        """
        max_sample = max(s for _, s in coords) if coords else 0
        if self.min_samples <= max_sample:
            raise ValueError(
                f"statement references sample index {max_sample} but some environment "
                f"has only {self.min_samples} samples"
            )
        stack = self.stacked()
        if stack is not None:
            return np.stack([stack[:, s, v] for v, s in coords], axis=1)
        return np.array([[rows[s, v] for v, s in coords] for rows in self.envs])


def sample_dataset(
    g: Dag,
    prior: MixturePrior,
    n_envs: int,
    samples_per_env: int,
    rng_seed: int,
) -> EnvDataset:
    """Per environment: one CPT draw per node, then ancestral sampling."""
    if n_envs < 1 or samples_per_env < 1:
        raise ValueError("n_envs and samples_per_env must be >= 1")
    cards = prior.cardinalities
    run_env = _compile_sampler(g, prior, cards)
    envs = [
        run_env(np.random.default_rng((rng_seed, e)), samples_per_env)
        for e in range(n_envs)
    ]
    return EnvDataset(
        d=g.d,
        cardinalities=cards,
        envs=envs,
        true_graph=g,
        seed=rng_seed,
        prior_description=prior.describe(),
    )


def _compile_sampler(g: Dag, prior: MixturePrior, cards):
    """Build a fast per-environment sampler.

    Makes exactly the same generator calls (same order, sizes, and
    distributions) as sample_env_params followed by _ancestral_sample, so the
    output stream is identical, but hoists validation, dispatch, and parent
    bookkeeping out of the per-environment loop.
    """
    if prior.d != g.d:
        raise ValueError(f"prior covers {prior.d} nodes, graph has {g.d}")
    d = g.d
    order = g.topological_order()
    drawers = []  # per node: rng -> p0 row (binary) or cumulative CPT (general)
    binary = []
    for i in range(d):
        p = prior.node_priors[i]
        _, n_cfg = parent_configs(g, cards, i)
        if isinstance(p, BetaColumnsPrior):
            def draw(rng, a=p.a, b=p.b, n=n_cfg):
                return 1.0 - rng.beta(a, b, size=n)
            is_binary = True
        elif isinstance(p, XorBetaPrior):
            if n_cfg & (n_cfg - 1):
                raise ValueError("XorBetaPrior requires binary parents")
            odd = np.array([bin(c).count("1") & 1 for c in range(n_cfg)], dtype=bool)
            def draw(rng, a=p.a, b=p.b, odd=odd):
                psi = rng.beta(a, b)
                return 1.0 - np.where(odd, 1.0 - psi, psi)
            is_binary = True
        elif isinstance(p, DirichletColumnsPrior):
            def draw(rng, alpha=np.asarray(p.alpha), n=n_cfg):
                return np.cumsum(rng.dirichlet(alpha, size=n).T, axis=0)
            is_binary = False
        elif isinstance(p, AtomMixturePrior):
            weights = np.array([w for w, _ in p.atoms])
            csums = [np.cumsum(cpt, axis=0) for _, cpt in p.atoms]
            for cs in csums:
                if cs.shape[1] != n_cfg:
                    raise ValueError(
                        f"atom CPT has {cs.shape[1]} columns, graph implies {n_cfg} parent configs"
                    )
            def draw(rng, w=weights, cs=csums, k=len(p.atoms)):
                return cs[rng.choice(k, p=w)]
            is_binary = False
        else:
            raise TypeError(f"unknown prior type {type(p).__name__}")
        drawers.append(draw)
        binary.append(is_binary)
    # mixed-radix parent-config multipliers, first (lowest-index) parent most
    # significant, matching np.ravel_multi_index C order
    mults = []
    for i in range(d):
        pa, _ = parent_configs(g, cards, i)
        pairs = []
        radix = 1
        for p in reversed(pa):
            pairs.append((p, radix))
            radix *= cards[p]
        mults.append(tuple(reversed(pairs)))

    def run_env(rng, n):
        tables = [drawers[i](rng) for i in range(d)]
        values = np.zeros((n, d), dtype=np.int64)
        for i in order:
            if mults[i]:
                (p0, m0), rest = mults[i][0], mults[i][1:]
                cfg = values[:, p0] * m0 if m0 > 1 else values[:, p0]
                for p, m in rest:
                    cfg = cfg + (values[:, p] * m if m > 1 else values[:, p])
            else:
                cfg = 0
            u = rng.random(n)
            table = tables[i]
            if binary[i]:
                values[:, i] = u >= table[cfg]
            elif mults[i]:
                values[:, i] = (u[None, :] >= table[:, cfg]).sum(axis=0)
            else:
                values[:, i] = (u[None, :] >= table[:, :1]).sum(axis=0)
        return values

    return run_env


def _ancestral_sample(order, pa_info, cards, params: EnvParams, n: int, rng) -> np.ndarray:
    values = np.zeros((n, len(cards)), dtype=np.int64)
    for i in order:
        pa, _ = pa_info[i]
        if pa:
            cfg = np.ravel_multi_index(
                tuple(values[:, p] for p in pa), tuple(cards[p] for p in pa)
            )
        else:
            cfg = np.zeros(n, dtype=np.intp)
        probs = params.cpts[i][:, cfg]  # (k_i, n)
        u = rng.random(n)
        values[:, i] = (u[None, :] >= np.cumsum(probs, axis=0)).sum(axis=0)
    return values


def bivariate_xor_model() -> Tuple[Dag, MixturePrior]:
    """The bivariate benchmark: X -> Y with X ~ Ber(theta), Y = Ber(psi) xor X,
    theta and psi drawn Beta(1, 3) independently per environment."""
    g = Dag(2, frozenset({(0, 1)}))
    prior = MixturePrior((BetaColumnsPrior(1.0, 3.0), XorBetaPrior(1.0, 3.0)))
    return g, prior


def degenerate_check(ds: EnvDataset, alpha: float = 0.05) -> List[str]:
    """Flag variables whose marginal looks identical across environments
    (which would break faithfulness of the exchangeable process) and
    variables that are outright constant."""
    from .ci_test import chi2_sf  # local import to avoid a module cycle

    warnings = []
    for i in range(ds.d):
        k = ds.cardinalities[i]
        counts = np.zeros((ds.n_envs, k))
        for e, rows in enumerate(ds.envs):
            counts[e] = np.bincount(rows[:, i], minlength=k)
        col_tot = counts.sum(axis=0)
        if np.count_nonzero(col_tot) <= 1:
            warnings.append(f"variable {i} is constant across the whole dataset")
            continue
        # G-test of homogeneity across environments
        row_tot = counts.sum(axis=1, keepdims=True)
        expected = row_tot * (col_tot / col_tot.sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(counts > 0, counts * np.log(counts / expected), 0.0)
        stat = 2.0 * terms.sum()
        dof = (ds.n_envs - 1) * (np.count_nonzero(col_tot) - 1)
        p = chi2_sf(stat, dof)
        if p > alpha:
            warnings.append(
                f"variable {i}: no detectable heterogeneity across environments "
                f"(homogeneity p={p:.3g}); marginal may collapse to i.i.d."
            )
    return warnings
