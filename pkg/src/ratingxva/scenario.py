"""Scenario definition and the TOML-based scenario file format.

A scenario file is TOML (the ``.cfg`` extension is conventional here). Every
key is optional except the transition matrices; see ``configs/irs_reference.cfg``
for a complete example and README.md for the schema.
"""

from __future__ import annotations

import hashlib
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .collateral import SCHEMES, THRESHOLD_MODES, CollateralSpec
from .ctmc_sim import TriggerLevels
from .errors import ConfigError, ValidationError
from .instruments import CdsSpec, IrsSpec
from .markov_copula import CopulaSpec, MeasureChangeSpec
from .rates import CONVENTIONS, VasicekParams
from .rating_model import RatingScale, TransitionMatrix, validate_transition_matrix

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

log = logging.getLogger(__name__)

DEFAULT_PATHS = 200_000
DEFAULT_SEED = 20120101
DEFAULT_TRIGGER_GRID = ("BB", "BC", "CB", "CC", "BD", "DB", "CD", "DC", "DD")


@dataclass(frozen=True)
class RecoverySpec:
    R1: float = 0.4
    R2: float = 0.4
    Rh1: float = 1.0
    Rh2: float = 1.0

    def __post_init__(self):
        for name in ("R1", "R2", "Rh1", "Rh2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"recovery {name}={v} outside [0, 1]")
        if self.R1 > self.Rh1 or self.R2 > self.Rh2:
            raise ValidationError("rehypothecation recoveries must not be below the plain recoveries")


@dataclass(frozen=True)
class Scenario:
    scale: RatingScale
    P1: TransitionMatrix
    P2: TransitionMatrix
    P3: TransitionMatrix | None = None
    initial: tuple = (1, 1, 1)
    copula_alphas: tuple = (0.0,)
    measure: MeasureChangeSpec = field(default_factory=MeasureChangeSpec)
    triggers: tuple = ()
    instrument: str = "irs"
    irs: IrsSpec = field(default_factory=IrsSpec)
    cds: CdsSpec = field(default_factory=CdsSpec)
    rates: VasicekParams = field(default_factory=VasicekParams)
    schemes: tuple = ("none",)
    collateral: CollateralSpec = field(default_factory=CollateralSpec)
    call_freq: int | None = None
    recovery: RecoverySpec = field(default_factory=RecoverySpec)
    investor_default_free: bool = False
    n_paths: int = DEFAULT_PATHS
    base_seed: int = DEFAULT_SEED
    out_dir: str = "out"
    config_hash: str = ""

    def __post_init__(self):
        K = self.scale.K
        for m in (self.P1, self.P2) + ((self.P3,) if self.P3 is not None else ()):
            validate_transition_matrix(m, self.scale)
        if self.instrument not in ("irs", "cds"):
            raise ValidationError(f"instrument must be 'irs' or 'cds', got {self.instrument!r}")
        if self.instrument == "cds" and self.P3 is None:
            raise ValidationError("a CDS scenario needs the reference entity's matrix P3")
        for x in self.initial:
            if not 1 <= x < K:
                raise ValidationError(f"initial rating {x} must lie in 1..{K - 1}")
        if not self.triggers:
            raise ValidationError("trigger grid is empty")
        for t in self.triggers:
            t.check(K, self.initial)
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValidationError(f"unknown collateral scheme {s!r}")
        for a in self.copula_alphas:
            CopulaSpec(a)
        if self.n_paths < 0:
            raise ValidationError("n_paths must be >= 0")

    @property
    def n_components(self) -> int:
        return 3 if self.instrument == "cds" else 2

    @property
    def maturity(self) -> float:
        return self.cds.tenor if self.instrument == "cds" else self.irs.tenor

    @property
    def call_dates(self) -> np.ndarray:
        """Margin call dates strictly inside ``(0, T)``."""
        freq = self.call_freq or (12 if self.instrument == "cds" else self.irs.freq)
        T = self.maturity
        dates = np.round(np.arange(1, int(np.floor(T * freq + 1e-9)) + 1) / freq, 12)
        return dates[dates < T - 1e-12]

    def collateral_spec(self, scheme: str) -> CollateralSpec:
        return replace(self.collateral, scheme=scheme, call_dates=tuple(self.call_dates), K=self.scale.K)


# -- config parsing ---------------------------------------------------------

_KNOWN = {
    "run": {"n_paths", "seed", "out"},
    "ratings": {"K", "initial", "P1", "P2", "P3", "investor_default_free"},
    "copula": {"alpha"},
    "measure": {"alpha1", "alpha2"},
    "triggers": {"pairs"},
    "instrument": {"type", "tenor", "freq", "fixed_rate", "notional", "payer", "spread", "reference_recovery"},
    "rates": {"r0", "theta", "alpha", "sigma", "convention"},
    "collateral": {"scheme", "mta", "ia1", "ia2", "delta", "call_freq", "threshold_mode", "table"},
    "recovery": {"R1", "R2", "Rh1", "Rh2"},
}


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(sec) - _KNOWN[name]
    if unknown:
        raise ConfigError(f"[{name}]: unknown key(s) {sorted(unknown)}")
    return sec


def _num(sec: dict, sect: str, key: str, default, kind=float):
    v = sec.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{sect}.{key}: expected a number, got {v!r}")
    if kind is int and float(v) != int(v):
        raise ConfigError(f"{sect}.{key}: expected an integer, got {v!r}")
    return kind(v)


def _matrix(sec: dict, key: str, required: bool):
    if key not in sec:
        if required:
            raise ConfigError(f"ratings.{key}: transition matrix is required")
        return None
    try:
        arr = np.array(sec[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"ratings.{key}: not a numeric matrix ({exc})") from exc
    return TransitionMatrix(arr)


def _pair(scale: RatingScale, v, where: str) -> TriggerLevels:
    if isinstance(v, str) and len(v) == 2:
        v = [v[0], v[1]]
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{where}: trigger pair must be two categories, got {v!r}")
    return TriggerLevels(scale.parse(v[0]), scale.parse(v[1]))


def content_hash(text: str) -> str:
    """Git blob hash of the config text (``git hash-object`` of the same file)."""
    data = text.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def load_scenario(text: str, source: str = "<config>") -> Scenario:
    """Parse and validate a scenario file.

    Raises
    ------
    ConfigError
        Malformed TOML (with line and column) or a bad key/value.
    ValidationError
        Values parse but break a model invariant.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    unknown = set(doc) - set(_KNOWN)
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}")
    run = _section(doc, "run")
    rt = _section(doc, "ratings")
    cop = _section(doc, "copula")
    meas = _section(doc, "measure")
    trig = _section(doc, "triggers")
    ins = _section(doc, "instrument")
    rts = _section(doc, "rates")
    col = _section(doc, "collateral")
    rec = _section(doc, "recovery")

    try:
        scale = RatingScale(_num(rt, "ratings", "K", 4, int))
        P1, P2 = _matrix(rt, "P1", True), _matrix(rt, "P2", True)
        P3 = _matrix(rt, "P3", False)
        initial = tuple(scale.parse(x) for x in rt.get("initial", ["A", "A", "A"]))
        if len(initial) == 2:
            initial = initial + (1,)
        alphas = cop.get("alpha", 0.0)
        alphas = tuple(float(a) for a in (alphas if isinstance(alphas, list) else [alphas]))
        pairs = trig.get("pairs", list(DEFAULT_TRIGGER_GRID))
        triggers = tuple(_pair(scale, p, f"triggers.pairs[{i}]") for i, p in enumerate(pairs))
        kind = str(ins.get("type", "irs")).lower()
        fixed = ins.get("fixed_rate", "par")
        irs = IrsSpec(
            notional=_num(ins, "instrument", "notional", 1.0),
            tenor=_num(ins, "instrument", "tenor", 10.0),
            freq=_num(ins, "instrument", "freq", 4, int),
            fixed_rate=None if fixed == "par" else _num(ins, "instrument", "fixed_rate", None),
            payer=bool(ins.get("payer", True)),
        ) if kind == "irs" else IrsSpec()
        spread = ins.get("spread", "par")
        cds = CdsSpec(
            notional=_num(ins, "instrument", "notional", 1.0),
            tenor=_num(ins, "instrument", "tenor", 5.0),
            spread=None if spread == "par" else _num(ins, "instrument", "spread", None),
            reference_recovery=_num(ins, "instrument", "reference_recovery", 0.4),
        ) if kind == "cds" else CdsSpec()
        convention = rts.get("convention", "speed_level")
        if convention not in CONVENTIONS:
            raise ConfigError(f"rates.convention: expected one of {CONVENTIONS}, got {convention!r}")
        rates = VasicekParams(
            r0=_num(rts, "rates", "r0", 0.05),
            theta=_num(rts, "rates", "theta", 0.1),
            alpha_mr=_num(rts, "rates", "alpha", 0.05),
            sigma=_num(rts, "rates", "sigma", 0.01),
            convention=convention,
        )
        schemes = col.get("scheme", ["none"])
        schemes = tuple(schemes if isinstance(schemes, list) else [schemes])
        mode = col.get("threshold_mode", "symmetric")
        if mode not in THRESHOLD_MODES:
            raise ConfigError(f"collateral.threshold_mode: expected one of {THRESHOLD_MODES}, got {mode!r}")
        collateral = CollateralSpec(
            scheme="none",
            mta=_num(col, "collateral", "mta", 0.0),
            ia_cpty=_num(col, "collateral", "ia1", 0.0),
            ia_inv=_num(col, "collateral", "ia2", 0.0),
            margin_period=_num(col, "collateral", "delta", 0.0),
            threshold_mode=mode,
            table=tuple(col.get("table", ())),
            K=scale.K,
        )
        if "custom" in schemes:
            CollateralSpec(scheme="custom", table=collateral.table, K=scale.K)
        recovery = RecoverySpec(
            R1=_num(rec, "recovery", "R1", 0.4),
            R2=_num(rec, "recovery", "R2", 0.4),
            Rh1=_num(rec, "recovery", "Rh1", 1.0),
            Rh2=_num(rec, "recovery", "Rh2", 1.0),
        )
        n_paths = _num(run, "run", "n_paths", DEFAULT_PATHS, int)
        if "n_paths" not in run:
            log.info("n_paths not set; using default %d", DEFAULT_PATHS)
        scenario = Scenario(
            scale=scale,
            P1=P1,
            P2=P2,
            P3=P3,
            initial=initial,
            copula_alphas=alphas,
            measure=MeasureChangeSpec(_num(meas, "measure", "alpha1", 0.0), _num(meas, "measure", "alpha2", 0.0)),
            triggers=triggers,
            instrument=kind,
            irs=irs,
            cds=cds,
            rates=rates,
            schemes=schemes,
            collateral=collateral,
            call_freq=_num(col, "collateral", "call_freq", None, int),
            recovery=recovery,
            investor_default_free=bool(rt.get("investor_default_free", False)),
            n_paths=n_paths,
            base_seed=_num(run, "run", "seed", DEFAULT_SEED, int),
            out_dir=str(run.get("out", "out")),
            config_hash=content_hash(text),
        )
    except ConfigError:
        raise
    except ValidationError as exc:
        raise type(exc)(f"{source}: {exc}") from exc
    return scenario


def load_scenario_file(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return load_scenario(text, str(path))


def shipped_config(name: str) -> Path:
    """Path of a config bundled with the package (``irs_reference.cfg``, ``cds_reference.cfg``)."""
    return Path(__file__).with_name("configs") / name
