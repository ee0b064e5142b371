"""Monte Carlo valuation adjustments from pathwise close-out losses.

Every adjustment is the mean of a discounted close-out loss evaluated at a
stopping time: the first default time ``tau`` for the trigger-free terms and
the first trigger time ``tau_R`` for the terms with rating triggers.

Paths are processed in fixed-size chunks (independent of the worker count);
chunk statistics are merged in chunk order, so results are bitwise
reproducible for a given seed however many threads run the chunks.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .collateral import CollateralLedger, build_ledger, closeout_collateral
from .ctmc_sim import Closeout, JumpTable, PathBatch, StoppingBatch, TriggerLevels, simulate_paths, stopping_times
from .errors import InconsistentPathSet, InsufficientPaths, MissingBaseline, NumericError
from .instruments import CdsPricer, IrsPricer
from .markov_copula import (
    CopulaSpec,
    JointGenerator,
    build_joint_generator,
    build_joint_generator_3,
    change_measure,
    component_values,
)
from .rates import RatePaths, log_convention, make_grid, simulate_rate_paths
from .rating_model import GeneratorMatrix, generator_from_annual_matrix
from .scenario import RecoverySpec, Scenario

log = logging.getLogger(__name__)

CHUNK_PATHS = 4096
UNITS = 1e-3

BASE_TERMS = ("UCVA", "DVA", "UCVA_R", "DVA_R", "URVA", "DRVA", "UCVA_Rh", "DVA_Rh")
DERIVED_TERMS = ("CVA", "CVA_R", "RVA", "URVA_h", "DRVA_h", "CVA_Rh", "RVA_h")
ALL_TERMS = BASE_TERMS + DERIVED_TERMS


# -- pathwise legs ------------------------------------------------------------


@dataclass
class CloseoutState:
    """What is known on each path at one stopping time.

    ``classification`` uses :class:`Closeout` codes; paths that never stop
    before maturity carry ``Closeout.NONE`` and their other fields are ignored.
    """

    event_idx: np.ndarray
    classification: np.ndarray
    s_delta: np.ndarray
    collateral: np.ndarray
    discount: np.ndarray
    path_index: np.ndarray


def _loss(discount, one_minus_r, x):
    return discount * one_minus_r * np.maximum(x, 0.0)


def pathwise_cva_terms(at_default: CloseoutState, at_trigger: CloseoutState, rec: RecoverySpec) -> dict:
    """Discounted close-out legs per path.

    Returns arrays for ``UCVA, DVA`` (close-out at the first default),
    ``UCVA_R, DVA_R`` (close-out at the first trigger), ``URVA, DRVA`` and the
    rehypothecated legs ``UCVA_Rh, DVA_Rh``.
    """
    if not np.array_equal(at_default.path_index, at_trigger.path_index):
        raise InconsistentPathSet("default and trigger states come from different path sets")
    d, r = at_default.event_idx, at_trigger.event_idx
    if np.any((d >= 0) & ((r < 0) | (r > d))):
        raise InconsistentPathSet("first trigger time after first default time")
    l1, l2 = 1.0 - rec.R1, 1.0 - rec.R2

    def legs(st: CloseoutState, c1=None, c2=None):
        cls = st.classification
        hit1 = (cls == Closeout.CPTY_DEFAULT) | (cls == Closeout.BOTH_DEFAULT)
        hit2 = (cls == Closeout.INV_DEFAULT) | (cls == Closeout.BOTH_DEFAULT)
        c1 = st.collateral if c1 is None else c1
        c2 = st.collateral if c2 is None else c2
        u = np.where(hit1, _loss(st.discount, l1, st.s_delta - c1), 0.0)
        d = np.where(hit2, _loss(st.discount, l2, c2 - st.s_delta), 0.0)
        return u, d

    ucva, dva = legs(at_default)
    ucva_r, dva_r = legs(at_trigger)
    early = (at_trigger.event_idx >= 0) & (at_trigger.event_idx != at_default.event_idx)
    urva = np.where(early, ucva, 0.0)
    drva = np.where(early, dva, 0.0)
    _, c1, c2 = closeout_collateral(at_trigger.collateral, at_trigger.classification, rec.Rh1, rec.Rh2)
    ucva_h, _ = legs(at_trigger, c1=c1)
    _, dva_h = legs(at_trigger, c2=c2)
    return {
        "UCVA": ucva,
        "DVA": dva,
        "UCVA_R": ucva_r,
        "DVA_R": dva_r,
        "URVA": urva,
        "DRVA": drva,
        "UCVA_Rh": ucva_h,
        "DVA_Rh": dva_h,
    }


def add_derived(terms: dict) -> dict:
    t = dict(terms)
    t["CVA"] = t["UCVA"] - t["DVA"]
    t["CVA_R"] = t["UCVA_R"] - t["DVA_R"]
    t["RVA"] = t["URVA"] - t["DRVA"]
    t["URVA_h"] = t["UCVA_R"] - t["UCVA_Rh"]
    t["DRVA_h"] = t["DVA_Rh"] - t["DVA_R"]
    t["CVA_Rh"] = t["UCVA_Rh"] - t["DVA_Rh"]
    t["RVA_h"] = t["CVA"] - t["CVA_Rh"]
    return t


def check_pathwise(terms: dict, triggers: TriggerLevels, K: int, rec: RecoverySpec) -> None:
    """Exact pathwise identities; raises on the first violation."""
    if not np.array_equal(terms["URVA"], terms["UCVA"] - terms["UCVA_R"]):
        raise NumericError("pathwise URVA differs from UCVA - UCVA_R")
    if not np.array_equal(terms["DRVA"], terms["DVA"] - terms["DVA_R"]):
        raise NumericError("pathwise DRVA differs from DVA - DVA_R")
    if triggers.K1 == K and triggers.K2 == K:
        if np.any(terms["URVA"]) or np.any(terms["DRVA"]):
            raise NumericError("URVA/DRVA nonzero with triggers at default")
        if not (np.array_equal(terms["UCVA_R"], terms["UCVA"]) and np.array_equal(terms["DVA_R"], terms["DVA"])):
            raise NumericError("CVA^R differs from CVA with triggers at default")
    if rec.Rh1 == 1.0 and rec.Rh2 == 1.0:
        if not (np.array_equal(terms["UCVA_Rh"], terms["UCVA_R"]) and np.array_equal(terms["DVA_Rh"], terms["DVA_R"])):
            raise NumericError("rehypothecated CVA differs from CVA^R with unit collateral recovery")


# -- streaming statistics ------------------------------------------------------


@dataclass
class RunningStat:
    """Count, mean and centred sum of squares; merged with Chan's formula."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, x: np.ndarray) -> "RunningStat":
        n = int(x.size)
        if n == 0:
            return cls()
        mean = math.fsum(x.tolist()) / n
        return cls(n, mean, float(np.dot(x - mean, x - mean)))

    def merge(self, other: "RunningStat") -> "RunningStat":
        if other.n == 0:
            return RunningStat(self.n, self.mean, self.m2)
        if self.n == 0:
            return RunningStat(other.n, other.mean, other.m2)
        n = self.n + other.n
        d = other.mean - self.mean
        mean = self.mean + d * other.n / n
        m2 = self.m2 + other.m2 + d * d * self.n * other.n / n
        return RunningStat(n, mean, m2)

    @property
    def se(self) -> float:
        if self.n < 2:
            return float("nan")
        return math.sqrt(self.m2 / (self.n - 1) / self.n)


# -- report ------------------------------------------------------------------


@dataclass
class AdjustmentReport:
    """Estimates (per unit notional) and standard errors for one grid cell.

    ``CVA``, ``CVA_R``, ``RVA``, ``URVA_h``, ``DRVA_h``, ``CVA_Rh`` and
    ``RVA_h`` are formed from the base estimates so the bookkeeping identities
    hold exactly; their standard errors come from the pathwise differences.
    """

    triggers: TriggerLevels
    scheme: str
    alpha: float
    n_paths: int
    seed: int
    estimates: dict
    std_errors: dict
    labels: tuple = ("A", "B", "C", "D")

    def __getattr__(self, name):
        est = self.__dict__.get("estimates", {})
        if name in est:
            return est[name]
        raise AttributeError(name)

    @property
    def mitigation_pct(self) -> float:
        cva = abs(self.estimates["CVA"])
        if cva == 0:
            return float("nan")
        return (cva - abs(self.estimates["CVA_R"])) / cva * 100.0

    @property
    def pair_label(self) -> str:
        return self.labels[self.triggers.K1 - 1] + self.labels[self.triggers.K2 - 1]

    def check_identities(self) -> None:
        e = self.estimates
        scale = sum(abs(e[k]) for k in BASE_TERMS) + 1e-300
        tol = 64 * np.finfo(float).eps * scale
        checks = {
            "CVA^R = UCVA^R - DVA^R": e["CVA_R"] - (e["UCVA_R"] - e["DVA_R"]),
            "CVA = UCVA - DVA": e["CVA"] - (e["UCVA"] - e["DVA"]),
            "RVA = CVA - CVA^R": e["RVA"] - (e["CVA"] - e["CVA_R"]),
            "RVA = URVA - DRVA": e["RVA"] - (e["URVA"] - e["DRVA"]),
            "RVA^h = RVA + URVA^h + DRVA^h": e["RVA_h"] - (e["RVA"] + e["URVA_h"] + e["DRVA_h"]),
        }
        for name, gap in checks.items():
            if not abs(gap) <= tol:
                raise NumericError(f"identity {name} violated by {gap:.3e}")


def _report(stats: dict, triggers, scheme, alpha, n, seed, labels) -> AdjustmentReport:
    est = {k: stats[k].mean for k in BASE_TERMS}
    est["CVA"] = est["UCVA"] - est["DVA"]
    est["CVA_R"] = est["UCVA_R"] - est["DVA_R"]
    est["RVA"] = est["CVA"] - est["CVA_R"]
    est["URVA_h"] = est["UCVA_R"] - est["UCVA_Rh"]
    est["DRVA_h"] = est["DVA_Rh"] - est["DVA_R"]
    est["CVA_Rh"] = est["UCVA_Rh"] - est["DVA_Rh"]
    est["RVA_h"] = est["CVA"] - est["CVA_Rh"]
    se = {k: stats[k].se for k in ALL_TERMS}
    rep = AdjustmentReport(triggers, scheme, alpha, n, seed, est, se, labels)
    rep.check_identities()
    return rep


# -- market set-up -------------------------------------------------------------


def strip_default(g: GeneratorMatrix) -> GeneratorMatrix:
    """Remove transitions into the default category (a default-free party)."""
    a = g.a.copy()
    a[:, -1] = 0.0
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, -a.sum(axis=1))
    return GeneratorMatrix(a)


@dataclass
class Market:
    """Everything shared by all paths of one (scenario, copula alpha) run."""

    scenario: Scenario
    alpha: float
    joint: JointGenerator
    table: JumpTable
    initial_state: int
    grid: np.ndarray
    product: object
    marginals: tuple = field(default_factory=tuple)

    @property
    def K(self) -> int:
        return self.scenario.scale.K


def build_market(scenario: Scenario, alpha: float) -> Market:
    g1 = generator_from_annual_matrix(scenario.P1)
    g2 = generator_from_annual_matrix(scenario.P2)
    if scenario.investor_default_free:
        g2 = strip_default(g2)
    spec = CopulaSpec(alpha)
    log_convention(scenario.rates)
    K = scenario.scale.K
    i1, i2, i3 = scenario.initial
    if scenario.instrument == "cds":
        g3 = generator_from_annual_matrix(scenario.P3)
        joint = build_joint_generator_3(g1, g2, g3, spec)
        init = ((i1 - 1) * K + (i2 - 1)) * K + (i3 - 1)
        product = CdsProduct(scenario, g3)
        marginals = (g1, g2, g3)
    else:
        joint = build_joint_generator(g1, g2, spec)
        init = (i1 - 1) * K + (i2 - 1)
        product = IrsProduct(scenario)
        marginals = (g1, g2)
    joint = change_measure(joint, scenario.measure)
    grid = make_grid(scenario.maturity, scenario.call_dates, product.grid_times)
    return Market(scenario, alpha, joint, JumpTable.from_generator(joint.a), init, grid, product, marginals)


class IrsProduct:
    def __init__(self, scenario: Scenario):
        self.pricer = IrsPricer(scenario.irs, scenario.rates)
        self.grid_times = np.concatenate([self.pricer.resets, self.pricer.dates])

    def header(self) -> dict:
        return {"fixed_rate": self.pricer.fixed_rate}

    def prepare(self, batch: PathBatch, rates: RatePaths):
        return self.pricer.fixings(self.pricer.reset_rates(rates))

    def at_calls(self, batch, rates, prep, call_dates):
        out = np.empty((len(rates), len(call_dates)))
        for i, t in enumerate(call_dates):
            col = rates.column(t)
            out[:, i] = self.pricer.price(np.full(len(rates), t), rates.r[:, col], prep)[0]
        return out

    def at_events(self, batch, rates, prep, t, event_idx):
        return self.pricer.price(t, rates.rate_at(t), prep)[1]


class CdsProduct:
    def __init__(self, scenario: Scenario, g3: GeneratorMatrix):
        pricer = CdsPricer(scenario.cds, g3, scenario.rates)
        if pricer.spread is None:
            pricer.spread = pricer.par_spread(scenario.initial[2], scenario.rates.r0)
        self.pricer = pricer
        self.K = scenario.scale.K
        self.grid_times = np.array([scenario.cds.tenor])

    def header(self) -> dict:
        return {"spread": self.pricer.spread}

    def prepare(self, batch, rates):
        return None

    def at_calls(self, batch, rates, prep, call_dates):
        ref = batch.ratings_at(call_dates, 2)
        out = np.empty((len(rates), len(call_dates)))
        for i, t in enumerate(call_dates):
            col = rates.column(t)
            out[:, i] = self.pricer.price(np.full(len(rates), t), ref[:, i], rates.r[:, col])[0]
        return out

    def at_events(self, batch, rates, prep, t, event_idx):
        ref = np.ones(len(t), dtype=np.int64)
        hit = event_idx >= 0
        ref[hit] = component_values(batch.states[event_idx[hit]], self.K, 3, 2)
        return self.pricer.price(t, ref, rates.rate_at(t))[1]


# -- chunk evaluation -------------------------------------------------------------


def _closeout_state(market, batch, rates, prep, ledger: CollateralLedger, idx, cls, s_delta_cache) -> CloseoutState:
    valid = idx >= 0
    t = np.zeros(len(idx))
    t[valid] = batch.times[idx[valid]]
    key = idx.tobytes()
    if key not in s_delta_cache:
        s_delta_cache[key] = market.product.at_events(batch, rates, prep, t, idx)
    tc = np.where(valid, t, np.inf)
    return CloseoutState(
        event_idx=idx,
        classification=cls,
        s_delta=s_delta_cache[key],
        collateral=ledger.at(tc),
        discount=rates.discount_at(t),
        path_index=batch.path_index,
    )


@dataclass
class ChunkResult:
    stats: dict  # (scheme, pair) -> {term: RunningStat}
    n: int


def run_chunk(market: Market, schemes, triggers, seed: int, lo: int, hi: int, keep_terms: bool = False):
    """Simulate paths ``lo..hi-1`` and return per-cell statistics (and terms if asked)."""
    sc = market.scenario
    idx = np.arange(lo, hi, dtype=np.int64)
    batch = simulate_paths(market.joint, market.initial_state, sc.maturity, seed, idx, market.table)
    rates = simulate_rate_paths(sc.rates, market.grid, seed, idx)
    prep = market.product.prepare(batch, rates)
    calls = sc.call_dates
    S_calls = None
    stops = {tr: stopping_times(batch, tr) for tr in triggers}
    first = next(iter(stops.values()))
    stats, kept = {}, {}
    cache: dict = {}
    for scheme in schemes:
        cspec = sc.collateral_spec(scheme)
        if cspec.active and S_calls is None:
            S_calls = market.product.at_calls(batch, rates, prep, calls)
            r1_calls = batch.ratings_at(calls, 0)
            r2_calls = batch.ratings_at(calls, 1)
            bank_calls = np.exp(rates.log_bank[:, [rates.column(t) for t in calls]])
        if cspec.active:
            ledger = build_ledger(cspec, S_calls, bank_calls, r1_calls, r2_calls)
        else:
            ledger = build_ledger(cspec, np.zeros((len(idx), 0)), 1.0, None, None)
        at_default = _closeout_state(market, batch, rates, prep, ledger, first.tau_idx, first.default_class, cache)
        for tr, st in stops.items():
            at_trig = _closeout_state(market, batch, rates, prep, ledger, st.tauR_idx, st.classification, cache)
            terms = pathwise_cva_terms(at_default, at_trig, sc.recovery)
            check_pathwise(terms, tr, market.K, sc.recovery)
            terms = add_derived(terms)
            stats[(scheme, tr)] = {k: RunningStat.of(v) for k, v in terms.items()}
            if keep_terms:
                kept[(scheme, tr)] = terms
    if keep_terms:
        return ChunkResult(stats, len(idx)), kept, batch, stops
    return ChunkResult(stats, len(idx))


def chunk_bounds(n_paths: int, chunk: int = CHUNK_PATHS):
    return [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]


def estimate_grid(
    scenario: Scenario,
    alpha: float,
    schemes=None,
    triggers=None,
    n_paths: int | None = None,
    base_seed: int | None = None,
    workers: int = 1,
    market: Market | None = None,
) -> dict:
    """Reports for every (scheme, trigger pair) of one copula alpha, on common random numbers."""
    n = scenario.n_paths if n_paths is None else int(n_paths)
    seed = scenario.base_seed if base_seed is None else int(base_seed)
    if n < 2:
        raise InsufficientPaths(f"need at least 2 paths, got {n}")
    schemes = tuple(scenario.schemes if schemes is None else schemes)
    triggers = tuple(scenario.triggers if triggers is None else triggers)
    market = market or build_market(scenario, alpha)
    bounds = chunk_bounds(n)
    job = lambda b: run_chunk(market, schemes, triggers, seed, b[0], b[1])  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(job, bounds))
    else:
        results = [job(b) for b in bounds]
    merged = {key: {k: RunningStat() for k in ALL_TERMS} for key in results[0].stats}
    for res in results:  # chunk order, whatever the scheduling was
        for key, st in res.stats.items():
            acc = merged[key]
            for k in ALL_TERMS:
                acc[k] = acc[k].merge(st[k])
    labels = tuple(scenario.scale.labels)
    return {
        key: _report(st, key[1], key[0], alpha, n, seed, labels)
        for key, st in merged.items()
    }


def estimate_adjustments(scenario: Scenario, n_paths: int | None = None, base_seed: int | None = None, workers: int = 1) -> AdjustmentReport:
    """Report for the first scheme, first trigger pair and first copula alpha of ``scenario``."""
    n = scenario.n_paths if n_paths is None else n_paths
    if n is None or n < 2:
        raise InsufficientPaths(f"need at least 2 paths, got {n}")
    key = (scenario.schemes[0], scenario.triggers[0])
    grid = estimate_grid(scenario, scenario.copula_alphas[0], (key[0],), (key[1],), n, base_seed, workers)
    return grid[key]


def mitigation_table(reports: dict, K: int = 4) -> dict:
    """Percentage reduction of ``|CVA^R|`` against the trigger-free ``(K, K)`` cell.

    ``reports`` maps :class:`TriggerLevels` to reports sharing everything but
    the triggers.
    """
    base = TriggerLevels(K, K)
    if base not in reports:
        raise MissingBaseline("mitigation needs the (default, default) trigger cell")
    ref = abs(reports[base].estimates["CVA_R"])
    if ref == 0:
        raise MissingBaseline("baseline CVA^R is zero; mitigation undefined")
    return {tr: (ref - abs(rep.estimates["CVA_R"])) / ref * 100.0 for tr, rep in reports.items()}
