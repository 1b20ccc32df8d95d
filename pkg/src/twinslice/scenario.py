"""Scenario files: the documented key-value format, defaults and validation.

Grammar (also documented in the README):

* full-line comments start with ``#``; blank lines are ignored
* ``[section]`` headers group keys; a section may appear once
* ``key = value`` lines; a key may appear once within its section
* values are integers, floats, words, or comma-separated float lists

Loading is pure: the same bytes always produce the same Scenario, and the
scenario hash is a digest of the fully-resolved configuration (defaults
included), so it also identifies runs built with overrides.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .domain import QoSRequirement, ResourceGrid, ServiceClass, UserTerminal
from .envsim import Environment, FadingModel, FadingParams, LinkBudget
from .nn import FeatureScaling
from .twin import DelayClass, DigitalTwin


class ScenarioError(Exception):
    """Base class for scenario loading failures."""


class ScenarioParseError(ScenarioError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class ScenarioSemanticError(ScenarioError):
    pass


@dataclass(frozen=True)
class LambdaSchedule:
    """Slot-indexed URLLC arrival rate: constant, or cycling held values."""

    values: tuple[float, ...]
    dwell: int = 100  # slots each value is held before moving on

    def __post_init__(self):
        if not self.values:
            raise ValueError("schedule needs at least one value")
        if any(v < 0 for v in self.values):
            raise ValueError("lambda values must be >= 0")
        if self.dwell < 1:
            raise ValueError("dwell must be >= 1")

    @classmethod
    def constant(cls, value: float) -> "LambdaSchedule":
        return cls(values=(float(value),), dwell=1)

    def at(self, t: int) -> float:
        return self.values[(t // self.dwell) % len(self.values)]


@dataclass(frozen=True)
class TrainSettings:
    epochs: int = 30
    learning_rate: float = 0.05
    batch_size: int = 64
    hidden_sizes: tuple[int, ...] = (600, 300, 250)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be >= 1")


#: Default per-class link budget spans; users get evenly staggered means so
#: the scheduler faces a stable user ranking instead of pure fading noise.
EMBB_SNR_SPAN_DB = (8.0, 13.0)
URLLC_SNR_SPAN_DB = (0.0, 4.0)


def _staggered(span: tuple[float, float], n: int) -> tuple[float, ...]:
    lo, hi = span
    if n <= 1:
        return ((lo + hi) / 2.0,) * n
    step = (hi - lo) / (n - 1)
    return tuple(lo + i * step for i in range(n))


@dataclass(frozen=True)
class Scenario:
    n_embb: int = 10
    n_urllc: int = 10
    # () means "stagger the defaults across the class's users"
    embb_mean_snr_db: tuple[float, ...] = ()
    urllc_mean_snr_db: tuple[float, ...] = ()
    fading: FadingParams = field(
        default_factory=lambda: FadingParams(FadingModel.RICIAN, k_factor=5.0)
    )
    num_rbs: int = 50
    rb_bandwidth: float = 1e6
    slot_duration: float = 1e-3
    lambda_schedule: LambdaSchedule = field(
        default_factory=lambda: LambdaSchedule.constant(100.0)
    )
    qos: QoSRequirement = field(default_factory=QoSRequirement)
    twin_delay: DelayClass = DelayClass.MINIMAL
    moderate_slots: int = 2
    significant_slots: int = 20
    twin_cadence: int = 1
    history_depth: int = 0  # 0 = sized automatically from the delay
    seed: int = 1
    horizon_slots: int = 5000
    outage_window: int = 100
    urllc_fraction: float = 0.5
    reference_snr_db: float = 10.0
    reference_lambda: float = 100.0
    train: TrainSettings = field(default_factory=TrainSettings)

    def __post_init__(self):
        if self.n_embb < 0 or self.n_urllc < 0 or self.n_embb + self.n_urllc < 1:
            raise ValueError("need at least one user")
        for name, count, snrs in (
            ("embb_mean_snr_db", self.n_embb, self.embb_mean_snr_db),
            ("urllc_mean_snr_db", self.n_urllc, self.urllc_mean_snr_db),
        ):
            if count > 0 and len(snrs) not in (0, 1, count):
                raise ValueError(
                    f"{name} must be a scalar or one value per user "
                    f"({count}), got {len(snrs)}"
                )
        if self.horizon_slots < 1:
            raise ValueError("horizon_slots must be >= 1")
        if self.outage_window < 1:
            raise ValueError("outage_window must be >= 1")
        if not 0.0 <= self.urllc_fraction <= 1.0:
            raise ValueError("urllc_fraction must be in [0, 1]")
        if self.twin_cadence < 1:
            raise ValueError("twin cadence must be >= 1")
        if self.moderate_slots < 0 or self.significant_slots < self.moderate_slots:
            raise ValueError("need 0 <= moderate_slots <= significant_slots")
        if not self.reference_lambda > 0:
            raise ValueError("reference_lambda must be > 0")
        # Exercise the constituent type invariants now, not at first use.
        ResourceGrid(self.num_rbs, self.rb_bandwidth)
        if not self.slot_duration > 0:
            raise ValueError("slot_duration must be > 0")

    # -- derived objects ---------------------------------------------------

    @property
    def grid(self) -> ResourceGrid:
        return ResourceGrid(self.num_rbs, self.rb_bandwidth)

    def embb_snrs(self) -> tuple[float, ...]:
        if not self.embb_mean_snr_db:
            return _staggered(EMBB_SNR_SPAN_DB, self.n_embb)
        if len(self.embb_mean_snr_db) == 1:
            return self.embb_mean_snr_db * self.n_embb
        return self.embb_mean_snr_db

    def urllc_snrs(self) -> tuple[float, ...]:
        if not self.urllc_mean_snr_db:
            return _staggered(URLLC_SNR_SPAN_DB, self.n_urllc)
        if len(self.urllc_mean_snr_db) == 1:
            return self.urllc_mean_snr_db * self.n_urllc
        return self.urllc_mean_snr_db

    def users(self) -> tuple[UserTerminal, ...]:
        """eMBB users take ids 0..n_embb-1, URLLC users follow."""
        embb = self.embb_snrs()
        urllc = self.urllc_snrs()
        users = [
            UserTerminal(
                id=i,
                service=ServiceClass.EMBB,
                link=LinkBudget(embb[i], self.fading),
            )
            for i in range(self.n_embb)
        ]
        users.extend(
            UserTerminal(
                id=self.n_embb + i,
                service=ServiceClass.URLLC,
                link=LinkBudget(urllc[i], self.fading),
            )
            for i in range(self.n_urllc)
        )
        return tuple(users)

    def scaling(self) -> FeatureScaling:
        return FeatureScaling(
            reference_snr_db=self.reference_snr_db,
            reference_lambda=self.reference_lambda,
            slot_duration=self.slot_duration,
        )

    def environment(
        self,
        seed: Optional[int] = None,
        lam_override: Optional[float] = None,
    ) -> Environment:
        schedule: Callable[[int], float]
        if lam_override is not None:
            schedule = LambdaSchedule.constant(lam_override).at
        else:
            schedule = self.lambda_schedule.at
        return Environment(
            users=self.users(),
            grid=self.grid,
            qos=self.qos,
            slot_duration=self.slot_duration,
            lambda_schedule=schedule,
            seed=self.seed if seed is None else seed,
        )

    def make_twin(self) -> DigitalTwin:
        return DigitalTwin(
            delay=self.twin_delay,
            moderate_slots=self.moderate_slots,
            significant_slots=self.significant_slots,
            cadence=self.twin_cadence,
            history_depth=self.history_depth or None,
        )

    def with_lambda(self, lam: float) -> "Scenario":
        return replace(self, lambda_schedule=LambdaSchedule.constant(lam))

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    def canonical_text(self) -> str:
        """Fully-resolved key=value dump; the basis of the scenario hash."""
        items = [
            ("users.embb", self.n_embb),
            ("users.urllc", self.n_urllc),
            ("users.embb_mean_snr_db", ",".join(f"{v:g}" for v in self.embb_snrs())),
            ("users.urllc_mean_snr_db", ",".join(f"{v:g}" for v in self.urllc_snrs())),
            ("channel.fading", self.fading.model.value),
            ("channel.rician_k", f"{self.fading.k_factor:g}"),
            ("grid.num_rbs", self.num_rbs),
            ("grid.rb_bandwidth_hz", f"{self.rb_bandwidth:g}"),
            ("grid.slot_duration_s", f"{self.slot_duration:g}"),
            ("traffic.lambda_values", ",".join(f"{v:g}" for v in self.lambda_schedule.values)),
            ("traffic.lambda_dwell", self.lambda_schedule.dwell),
            ("qos.embb_min_rate_bps", f"{self.qos.embb_min_rate:g}"),
            ("qos.urllc_packet_bits", self.qos.urllc_packet_bits),
            ("qos.urllc_outage_threshold", f"{self.qos.urllc_outage_threshold:g}"),
            ("twin.delay", self.twin_delay.value),
            ("twin.moderate_slots", self.moderate_slots),
            ("twin.significant_slots", self.significant_slots),
            ("twin.cadence", self.twin_cadence),
            ("twin.history_depth", self.history_depth),
            ("run.seed", self.seed),
            ("run.horizon_slots", self.horizon_slots),
            ("run.outage_window", self.outage_window),
            ("run.urllc_fraction", f"{self.urllc_fraction:g}"),
            ("features.reference_snr_db", f"{self.reference_snr_db:g}"),
            ("features.reference_lambda", f"{self.reference_lambda:g}"),
            ("train.epochs", self.train.epochs),
            ("train.learning_rate", f"{self.train.learning_rate:g}"),
            ("train.batch_size", self.train.batch_size),
            ("train.hidden_sizes", ",".join(str(h) for h in self.train.hidden_sizes)),
            ("train.seed", self.train.seed),
        ]
        return "\n".join(f"{k}={v}" for k, v in items) + "\n"

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: Scenario
    policies: tuple[str, ...]
    out_dir: str
    lambdas: Optional[tuple[float, ...]] = None  # None = scenario schedule
    weights_path: Optional[str] = None
    base_seed: Optional[int] = None  # None = scenario seed
    dump_twin: bool = False  # also write per-slot twin snapshot logs

    def __post_init__(self):
        if not self.policies:
            raise ValueError("need at least one policy")
        if self.lambdas is not None and any(v < 0 for v in self.lambdas):
            raise ValueError("sweep values must be >= 0")


# -- parsing -----------------------------------------------------------------

_WORD, _INT, _FLOAT, _FLOATS, _INTS = "word", "int", "float", "floats", "ints"

#: section -> key -> value kind accepted by the parser.
_SCHEMA: dict[str, dict[str, str]] = {
    "users": {
        "embb": _INT,
        "urllc": _INT,
        "embb_mean_snr_db": _FLOATS,
        "urllc_mean_snr_db": _FLOATS,
    },
    "grid": {
        "num_rbs": _INT,
        "rb_bandwidth_hz": _FLOAT,
        "slot_duration_s": _FLOAT,
    },
    "channel": {"fading": _WORD, "rician_k": _FLOAT},
    "traffic": {
        "urllc_lambda": _FLOAT,
        "urllc_lambda_values": _FLOATS,
        "urllc_lambda_dwell": _INT,
    },
    "qos": {
        "embb_min_rate_bps": _FLOAT,
        "urllc_packet_bits": _INT,
        "urllc_outage_threshold": _FLOAT,
    },
    "twin": {
        "delay": _WORD,
        "moderate_slots": _INT,
        "significant_slots": _INT,
        "cadence": _INT,
        "history_depth": _INT,
    },
    "run": {
        "seed": _INT,
        "horizon_slots": _INT,
        "outage_window": _INT,
        "urllc_fraction": _FLOAT,
    },
    "features": {"reference_snr_db": _FLOAT, "reference_lambda": _FLOAT},
    "train": {
        "epochs": _INT,
        "learning_rate": _FLOAT,
        "batch_size": _INT,
        "hidden_sizes": _INTS,
        "seed": _INT,
    },
}


def _parse_value(kind: str, raw: str, line: int, col: int):
    try:
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _WORD:
            return raw.strip().lower()
        if kind == _FLOATS:
            return tuple(float(p) for p in raw.split(","))
        if kind == _INTS:
            return tuple(int(p) for p in raw.split(","))
    except ValueError:
        raise ScenarioParseError(f"cannot parse {kind} value {raw!r}", line, col)
    raise AssertionError(kind)


def parse_scenario_text(text: str) -> Scenario:
    """Parse and validate scenario text; see the module docstring for grammar."""
    values: dict[tuple[str, str], object] = {}
    section: Optional[str] = None
    seen_sections: set[str] = set()

    for lineno, rawline in enumerate(text.splitlines(), start=1):
        stripped = rawline.strip()
        if not stripped or stripped.startswith("#"):
            continue
        col = rawline.index(stripped[0]) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ScenarioParseError("unterminated section header", lineno, col)
            name = stripped[1:-1].strip().lower()
            if name not in _SCHEMA:
                raise ScenarioParseError(f"unknown section [{name}]", lineno, col)
            if name in seen_sections:
                raise ScenarioParseError(f"duplicate section [{name}]", lineno, col)
            seen_sections.add(name)
            section = name
            continue
        if "=" not in stripped:
            raise ScenarioParseError("expected 'key = value'", lineno, col)
        if section is None:
            raise ScenarioParseError("key outside any [section]", lineno, col)
        key, _, raw = stripped.partition("=")
        key = key.strip().lower()
        if key not in _SCHEMA[section]:
            raise ScenarioParseError(
                f"unknown key {key!r} in section [{section}]", lineno, col
            )
        if (section, key) in values:
            raise ScenarioParseError(f"duplicate key {key!r}", lineno, col)
        values[(section, key)] = _parse_value(
            _SCHEMA[section][key], raw.strip(), lineno, col
        )

    return _build_scenario(values)


def _build_scenario(values: dict[tuple[str, str], object]) -> Scenario:
    def get(section: str, key: str, default):
        return values.get((section, key), default)

    fading_name = get("channel", "fading", "rician")
    try:
        model = FadingModel(fading_name)
    except ValueError:
        raise ScenarioSemanticError(
            f"fading must be one of rayleigh|rician, got {fading_name!r}"
        )
    delay_name = get("twin", "delay", "minimal")
    try:
        delay = DelayClass(delay_name)
    except ValueError:
        raise ScenarioSemanticError(
            f"twin delay must be minimal|moderate|significant, got {delay_name!r}"
        )

    if ("traffic", "urllc_lambda") in values and (
        "traffic",
        "urllc_lambda_values",
    ) in values:
        raise ScenarioSemanticError(
            "give either urllc_lambda or urllc_lambda_values, not both"
        )
    if ("traffic", "urllc_lambda_values") in values:
        schedule = LambdaSchedule(
            values=values[("traffic", "urllc_lambda_values")],  # type: ignore[arg-type]
            dwell=int(get("traffic", "urllc_lambda_dwell", 100)),
        )
    else:
        schedule = LambdaSchedule.constant(float(get("traffic", "urllc_lambda", 100.0)))

    try:
        qos = QoSRequirement(
            embb_min_rate=float(get("qos", "embb_min_rate_bps", 0.0)),
            urllc_packet_bits=int(get("qos", "urllc_packet_bits", 256)),
            urllc_outage_threshold=float(get("qos", "urllc_outage_threshold", 0.07)),
        )
        train = TrainSettings(
            epochs=int(get("train", "epochs", 30)),
            learning_rate=float(get("train", "learning_rate", 0.05)),
            batch_size=int(get("train", "batch_size", 64)),
            hidden_sizes=tuple(get("train", "hidden_sizes", (600, 300, 250))),
            seed=int(get("train", "seed", 0)),
        )
        return Scenario(
            n_embb=int(get("users", "embb", 10)),
            n_urllc=int(get("users", "urllc", 10)),
            embb_mean_snr_db=tuple(get("users", "embb_mean_snr_db", ())),
            urllc_mean_snr_db=tuple(get("users", "urllc_mean_snr_db", ())),
            fading=FadingParams(
                model=model, k_factor=float(get("channel", "rician_k", 5.0))
            ),
            num_rbs=int(get("grid", "num_rbs", 50)),
            rb_bandwidth=float(get("grid", "rb_bandwidth_hz", 1e6)),
            slot_duration=float(get("grid", "slot_duration_s", 1e-3)),
            lambda_schedule=schedule,
            qos=qos,
            twin_delay=delay,
            moderate_slots=int(get("twin", "moderate_slots", 2)),
            significant_slots=int(get("twin", "significant_slots", 20)),
            twin_cadence=int(get("twin", "cadence", 1)),
            history_depth=int(get("twin", "history_depth", 0)),
            seed=int(get("run", "seed", 1)),
            horizon_slots=int(get("run", "horizon_slots", 5000)),
            outage_window=int(get("run", "outage_window", 100)),
            urllc_fraction=float(get("run", "urllc_fraction", 0.5)),
            reference_snr_db=float(get("features", "reference_snr_db", 10.0)),
            reference_lambda=float(get("features", "reference_lambda", 100.0)),
            train=train,
        )
    except ValueError as exc:
        raise ScenarioSemanticError(str(exc)) from exc


def load_scenario(path) -> Scenario:
    """Read, parse and validate a scenario file. Pure: no side effects."""
    with open(path, "r", encoding="utf-8") as f:
        return parse_scenario_text(f.read())
