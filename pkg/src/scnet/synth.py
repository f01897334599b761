"""Synthetic graphs: tiered supply chains, Erdos-Renyi, and power-law configuration models.

Every generator is deterministic in its seed. The supply-chain generator
grows tier by tier from the MSF seeds: each firm gets a Poisson number of
brand-new suppliers in the next tier plus a Poisson number of links to
suppliers already created in that tier, picked with probability
proportional to ``in_degree ** attachment_exponent`` among the next-tier
firms created earlier in the same round. Optional lateral
links (to later-created firms of the same tier) keep the graph acyclic;
loop injection adds customer-ward back-edges, which is the only source of
cycles.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .graph import FirmAttrs, SupplyGraph

logger = logging.getLogger(__name__)

COUNTRIES = (
    "US", "CN", "JP", "DE", "GB", "KR", "TW", "FR", "CA", "IN", "CH", "NL", "IT", "SE", "IL",
    "AU", "IE", "SG", "MX", "BR", "ES", "DK", "BE", "FI", "MY", "TH", "HK", "NO", "AT", "PL",
)
INDUSTRIES = tuple(str(c) for c in range(2800, 3900, 5)) + ("5047", "5122", "7372", "8731")
PA_CHUNK = 256


@dataclass(frozen=True)
class SupplyGenParams:
    msf_count: int = 270
    tier_count: int = 10
    mean_new_suppliers_per_firm: float = 1.45
    mean_existing_suppliers_per_firm: float = 2.6
    attachment_exponent: float = 1.0
    cross_tier_edge_prob: float = 0.05
    loop_injection_prob: float = 0.01
    self_loop_prob: float = 0.002
    country_pool: tuple[str, ...] = COUNTRIES
    industry_pool: tuple[str, ...] = INDUSTRIES
    pool_skew: float = 1.1  # Zipf exponent over pool ranks
    employee_lognormal: tuple[float, float] = (6.0, 2.0)
    missing_industry_rate: float = 0.33
    missing_employee_rate: float = 0.05
    missing_country_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("cross_tier_edge_prob", "loop_injection_prob", "self_loop_prob",
                     "missing_industry_rate", "missing_employee_rate", "missing_country_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.tier_count < 1 or self.msf_count < 1:
            raise ValueError("tier_count and msf_count must be >= 1")
        if not self.country_pool or not self.industry_pool:
            raise ValueError("attribute pools must be non-empty")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["country_pool"] = list(self.country_pool)
        d["industry_pool"] = list(self.industry_pool)
        d["employee_lognormal"] = list(self.employee_lognormal)
        return d


@dataclass(frozen=True)
class GroundTruth:
    """What the generator knows before any attribute is masked."""

    creation_tier: np.ndarray
    country: tuple[str, ...]
    industry: tuple[str, ...]
    employees: np.ndarray
    params: SupplyGenParams


def _pa_pick(rng, pool: np.ndarray, indeg: np.ndarray, count: int, alpha: float) -> np.ndarray:
    """Preferential picks from ``pool``, weights refreshed every ``PA_CHUNK`` draws."""
    out = np.empty(count, dtype=np.int64)
    for start in range(0, count, PA_CHUNK):
        stop = min(start + PA_CHUNK, count)
        w = indeg[pool] ** alpha
        picks = rng.choice(pool, size=stop - start, p=w / w.sum())
        np.add.at(indeg, picks, 1)
        out[start:stop] = picks
    return out


def _zipf_choice(rng, pool: tuple[str, ...], size: int, skew: float) -> np.ndarray:
    w = 1.0 / np.arange(1, len(pool) + 1) ** skew
    return np.asarray(pool, dtype=object)[rng.choice(len(pool), size=size, p=w / w.sum())]


def gen_supply_chain(params: SupplyGenParams = SupplyGenParams()) -> tuple[SupplyGraph, GroundTruth]:
    rng = np.random.default_rng(params.seed)
    n = params.msf_count
    created = [np.arange(n)]
    tier_of = [0] * n
    customer_of = {}  # first customer of each non-MSF firm, for loop injection
    src_parts, dst_parts = [], []
    cap = n
    indeg = np.zeros(cap, dtype=np.float64)

    def grow(size):
        nonlocal indeg
        if size > len(indeg):
            indeg = np.concatenate([indeg, np.zeros(max(size, 2 * len(indeg)) - len(indeg))])

    for t in range(params.tier_count):
        cur = created[t]
        if cur.size == 0:
            break
        k_new = rng.poisson(params.mean_new_suppliers_per_firm, size=cur.size)
        if t == 0:
            k_new = np.maximum(k_new, 1)  # every MSF has a supply chain
        k_old = rng.poisson(params.mean_existing_suppliers_per_firm, size=cur.size)
        first_new = n
        # firms are handled in chunks; each chunk links preferentially to the
        # next-tier firms created by earlier chunks, then adds its own new ones
        step = max(8, -(-cur.size // 200))
        for lo in range(0, cur.size, step):
            chunk = slice(lo, lo + step)
            pool = np.arange(first_new, n)
            src = np.repeat(cur[chunk], k_old[chunk])
            if src.size and pool.size:
                lateral = rng.random(src.size) < params.cross_tier_edge_prob
                fwd = src[~lateral]
                src_parts.append(fwd)
                dst_parts.append(_pa_pick(rng, pool, indeg, fwd.size, params.attachment_exponent))
                lat = src[lateral]
                hi = cur.max()
                lat = lat[(lat < hi)] if t > 0 else lat[:0]
                if lat.size:
                    src_parts.append(lat)
                    dst_parts.append(np.array([rng.integers(s + 1, hi + 1) for s in lat.tolist()], dtype=np.int64))
            parents = np.repeat(cur[chunk], k_new[chunk])
            new_ids = np.arange(n, n + parents.size)
            n += new_ids.size
            grow(n)
            indeg[new_ids] = 1
            src_parts.append(parents)
            dst_parts.append(new_ids)
            tier_of.extend([t + 1] * new_ids.size)
            customer_of.update(zip(new_ids.tolist(), parents.tolist()))
        created.append(np.arange(first_new, n))

    src = np.concatenate(src_parts) if src_parts else np.empty(0, dtype=np.int64)
    dst = np.concatenate(dst_parts) if dst_parts else np.empty(0, dtype=np.int64)
    tiers = np.array(tier_of, dtype=np.int64)

    extra_src, extra_dst = [], []
    if params.loop_injection_prob > 0:
        for f in np.flatnonzero((tiers >= 2) & (rng.random(n) < params.loop_injection_prob)).tolist():
            anc = customer_of[f]
            for _ in range(int(rng.integers(0, 2))):
                if tiers[anc] <= 1:
                    break
                anc = customer_of[anc]
            extra_src.append(f)
            extra_dst.append(anc)
    if params.self_loop_prob > 0:
        loops = np.flatnonzero(rng.random(n) < params.self_loop_prob)
        extra_src.extend(loops.tolist())
        extra_dst.extend(loops.tolist())
    edges = np.column_stack([np.concatenate([src, extra_src]), np.concatenate([dst, extra_dst])]).astype(np.int64)
    _, first = np.unique(edges, axis=0, return_index=True)
    edges = edges[np.sort(first)]

    country = _zipf_choice(rng, params.country_pool, n, params.pool_skew)
    industry = _zipf_choice(rng, params.industry_pool, n, params.pool_skew)
    industry[: params.msf_count] = "5047"
    mu, sigma = params.employee_lognormal
    employees = np.floor(rng.lognormal(mu, sigma, size=n)).astype(np.int64)

    miss_c = rng.random(n) < params.missing_country_rate
    miss_i = rng.random(n) < params.missing_industry_rate
    miss_e = rng.random(n) < params.missing_employee_rate
    miss_i[: params.msf_count] = False
    width = len(str(n))
    attrs = [
        FirmAttrs(
            firm_id=f"F{i:0{width}d}",
            country=None if miss_c[i] else str(country[i]),
            industry=None if miss_i[i] else str(industry[i]),
            employees=None if miss_e[i] else int(employees[i]),
            is_msf=i < params.msf_count,
        )
        for i in range(n)
    ]
    truth = GroundTruth(tiers, tuple(map(str, country)), tuple(map(str, industry)), employees, params)
    return SupplyGraph(attrs, edges), truth


# -------------------------------------------------------------- random graphs
def _designate(n: int, rng, msf_fraction: float) -> list[FirmAttrs]:
    k = max(1, int(round(msf_fraction * n)))
    msf = np.zeros(n, dtype=bool)
    msf[rng.choice(n, size=k, replace=False)] = True
    width = len(str(n))
    return [FirmAttrs(f"N{i:0{width}d}", is_msf=bool(msf[i])) for i in range(n)]


def _orient(rng, pairs: np.ndarray) -> np.ndarray:
    flip = rng.random(len(pairs)) < 0.5
    out = pairs.copy()
    out[flip] = pairs[flip, ::-1]
    return out


def gen_er(n: int, mean_degree: float, seed: int = 0, msf_fraction: float = 0.01) -> SupplyGraph:
    """G(n, p) with ``p = mean_degree / (n - 1)``, each edge given a random direction."""
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    p = mean_degree / (n - 1)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mean degree {mean_degree} is impossible for n={n}")
    total = n * (n - 1) // 2
    m = int(rng.binomial(total, p))
    chosen = np.empty((0, 2), dtype=np.int64)
    while len(chosen) < m:
        draw = rng.integers(0, n, size=(int((m - len(chosen)) * 1.1) + 16, 2))
        draw = draw[draw[:, 0] != draw[:, 1]]
        draw.sort(axis=1)
        merged = np.concatenate([chosen, draw])
        _, first = np.unique(merged, axis=0, return_index=True)
        chosen = merged[np.sort(first)]
    chosen = chosen[:m]
    attrs = _designate(n, rng, msf_fraction)
    return SupplyGraph(attrs, _orient(rng, chosen))


def sample_discrete_powerlaw(
    size: int,
    gamma: float,
    kmin: int = 1,
    rng: np.random.Generator | None = None,
    kmax: int | None = None,
    table_max: int = 1_000_000,
) -> np.ndarray:
    """Draw from ``P(k) ~ k^-gamma`` on ``k >= kmin`` (and ``<= kmax`` if given).

    Inverse-CDF on an exact table; with no ``kmax``, values past the table
    come from the continuous approximation, whose mass there is tiny.
    """
    if gamma <= 1.0:
        raise ValueError("gamma must be > 1")
    if kmin < 1:
        raise ValueError("kmin must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    top = kmin + table_max if kmax is None else min(kmax, kmin + table_max)
    ks = np.arange(kmin, top + 1, dtype=np.float64)
    pmf = ks ** -gamma
    if kmax is None:
        norm = special.zeta(gamma, kmin)
        tail_mass = special.zeta(gamma, top + 1) / norm
    else:
        norm = pmf.sum()
        tail_mass = 0.0
    cdf = np.cumsum(pmf / norm)
    u = rng.random(size)
    out = np.empty(size, dtype=np.int64)
    body = u < 1.0 - tail_mass
    idx = np.minimum(np.searchsorted(cdf, u[body], side="right"), len(ks) - 1)
    out[body] = ks[idx].astype(np.int64)
    if (~body).any():
        w = rng.random(int((~body).sum()))
        out[~body] = np.floor((top + 0.5) * (1.0 - w) ** (-1.0 / (gamma - 1.0)) + 0.5).astype(np.int64)
    return out


def gen_configuration_powerlaw(
    n: int,
    gamma: float,
    kmin: int = 1,
    seed: int = 0,
    msf_fraction: float = 0.01,
    kmax: int | None = None,
) -> SupplyGraph:
    """Configuration model on a power-law degree sequence.

    Degrees are capped at ``n - 1`` unless ``kmax`` says otherwise. Stubs
    are paired uniformly; self-loops and repeated pairs are discarded.
    """
    if gamma <= 1.0 or kmin < 1:
        raise ValueError("need gamma > 1 and kmin >= 1")
    rng = np.random.default_rng(seed)
    kmax = n - 1 if kmax is None else kmax
    deg = sample_discrete_powerlaw(n, gamma, kmin, rng, kmax=kmax)
    while deg.sum() % 2:
        i = int(rng.integers(n))
        logger.info("odd stub total; resampling degree of node %d", i)
        deg[i] = sample_discrete_powerlaw(1, gamma, kmin, rng, kmax=kmax)[0]
    stubs = np.repeat(np.arange(n), deg)
    rng.shuffle(stubs)
    pairs = stubs.reshape(-1, 2)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs.sort(axis=1)
    _, first = np.unique(pairs, axis=0, return_index=True)
    pairs = pairs[np.sort(first)]
    attrs = _designate(n, rng, msf_fraction)
    return SupplyGraph(attrs, _orient(rng, pairs))
