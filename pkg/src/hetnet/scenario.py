"""Model parameters for the two-tier network and their validation.

All powers and SIR thresholds are linear inside the library. dB values are
accepted only when reading scenario files (see :func:`load_scenario`).
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


class Mode(str, enum.Enum):
    COCHANNEL = "cochannel"
    ORTHOGONAL = "orthogonal"
    PARTIAL = "partial"

    @classmethod
    def parse(cls, value: "str | Mode") -> "Mode":
        if isinstance(value, Mode):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValueError(f"unknown spectrum sharing mode {value!r}")


class ScenarioError(ValueError):
    """Raised by :func:`validate` with every violated invariant."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class NetworkParams:
    """Geometry and physical-layer constants.

    Densities are per m^2, lengths in m, powers in W. ``chi`` is the linear
    wall penetration factor (0.1 for a 10 dB loss).
    """

    lambda_B: float = 2e-5
    lambda_F: float = 1e-4
    c: float = 7.85
    R: float = 50.0
    r_0: float = 15.0
    P_B: float = 10 ** (46 / 10) / 1000
    P_F: float = 10 ** (20 / 10) / 1000
    chi: float = 0.1
    alpha: float = 4.0

    @property
    def delta(self) -> float:
        return 2.0 / self.alpha


@dataclass(frozen=True)
class McsTable:
    """Strictly increasing linear SIR thresholds of the T MCS levels."""

    thresholds: tuple[float, ...] = tuple(10 ** (3 * i / 10) for i in range(8))

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))

    def __len__(self) -> int:
        return len(self.thresholds)

    @classmethod
    def from_db(cls, values_db: Iterable[float]) -> "McsTable":
        return cls(tuple(db_to_linear(v) for v in values_db))


@dataclass(frozen=True)
class TrafficParams:
    """Macro-tier real-time traffic.

    ``lambda_M`` is the service arrival density (per min per m^2), ``mu`` the
    departure rate (per min), ``N`` the channel count and ``r_th_over_b`` the
    per-service spectral-efficiency demand in b/s/Hz.
    """

    lambda_M: float = 2e-4
    mu: float = 1.0
    N: int = 20
    r_th_over_b: float = 0.5
    mcs: McsTable = field(default_factory=McsTable)

    @property
    def lambda_m(self) -> float:
        """Per-channel arrival density lambda_M / N."""
        return self.lambda_M / self.N


@dataclass(frozen=True)
class SpectrumConfig:
    mode: Mode = Mode.COCHANNEL
    n_f: int = 10
    r_m: float = 60.0
    beta_M: float = 1.0
    beta_F: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))

    def p_c(self, n_channels: int) -> float:
        """Fraction of channels shared with the femto tier in partial mode."""
        return self.n_f / n_channels


@dataclass(frozen=True)
class Scenario:
    network: NetworkParams = field(default_factory=NetworkParams)
    traffic: TrafficParams = field(default_factory=TrafficParams)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    name: str = "default"

    def replace(self, **overrides) -> "Scenario":
        """Return a copy with flat field overrides applied.

        Keys are field names of any of the three records (``lambda_F``,
        ``r_m``, ``lambda_M``, ``n_f``, ``mode`` ...) plus ``name``.
        """
        groups = {"network": {}, "traffic": {}, "spectrum": {}}
        name = overrides.pop("name", self.name)
        for key, value in overrides.items():
            for group in groups:
                if key in _FIELDS[group]:
                    groups[group][key] = value
                    break
            else:
                raise KeyError(f"unknown scenario field {key!r}")
        return Scenario(
            network=dataclasses.replace(self.network, **groups["network"]),
            traffic=dataclasses.replace(self.traffic, **groups["traffic"]),
            spectrum=dataclasses.replace(self.spectrum, **groups["spectrum"]),
            name=name,
        )


_FIELDS = {
    "network": {f.name for f in dataclasses.fields(NetworkParams)},
    "traffic": {f.name for f in dataclasses.fields(TrafficParams)},
    "spectrum": {f.name for f in dataclasses.fields(SpectrumConfig)},
}


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (float(value_db) / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


def per_channel_mu_density(traffic: TrafficParams) -> float:
    """Density of MUs present on one channel at a snapshot, lambda_M/(N mu)."""
    return traffic.lambda_M / (traffic.N * traffic.mu)


def _positive(errors, name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        errors.append(f"{name} must be positive and finite (got {value!r})")


def validate(scenario: Scenario) -> Scenario:
    """Check every record invariant.

    Returns the scenario unchanged when valid; otherwise raises
    :class:`ScenarioError` listing all violations at once.
    """
    errors: list[str] = []
    net, tr, sp = scenario.network, scenario.traffic, scenario.spectrum

    for name in ("lambda_B", "R", "r_0", "P_B", "P_F"):
        _positive(errors, name, getattr(net, name))
    # an empty femto tier is a legitimate reference case
    for name in ("lambda_F", "c"):
        value = getattr(net, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
            errors.append(f"{name} must be non-negative and finite (got {value!r})")
    if not net.alpha > 2:
        errors.append(f"alpha must exceed 2 (got {net.alpha!r})")
    if not 0 < net.chi <= 1:
        errors.append(f"chi must lie in (0, 1] (got {net.chi!r})")
    if net.r_0 > 0 and net.R > 0 and not net.r_0 < net.R:
        errors.append(f"r_0 must be smaller than R (got r_0={net.r_0!r}, R={net.R!r})")

    if not tr.lambda_M >= 0:
        errors.append(f"lambda_M must be non-negative (got {tr.lambda_M!r})")
    _positive(errors, "mu", tr.mu)
    if not (isinstance(tr.N, int) and tr.N >= 2):
        errors.append(f"N must be an integer >= 2 (got {tr.N!r})")
    _positive(errors, "r_th_over_b", tr.r_th_over_b)
    thresholds = tr.mcs.thresholds
    if len(thresholds) < 1:
        errors.append("mcs table needs at least one threshold")
    elif any(not (t > 0) for t in thresholds):
        errors.append(f"mcs thresholds must be positive (got {thresholds!r})")
    elif any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        errors.append(f"mcs thresholds must be strictly increasing (got {thresholds!r})")

    if sp.mode in (Mode.ORTHOGONAL, Mode.PARTIAL):
        if not isinstance(sp.n_f, int) or sp.n_f < 1:
            errors.append(f"n_f must be an integer >= 1 in {sp.mode.value} mode (got {sp.n_f!r})")
        elif isinstance(tr.N, int) and sp.n_f > tr.N - 1:
            errors.append(
                f"n_f={sp.n_f} leaves no channel for the macro tier; "
                f"macro tier needs >=1 channel (N={tr.N})"
            )
    if not sp.r_m >= 0:
        errors.append(f"r_m must be non-negative (got {sp.r_m!r})")
    _positive(errors, "beta_M", sp.beta_M)
    _positive(errors, "beta_F", sp.beta_F)

    if errors:
        raise ScenarioError(errors)
    return scenario


# --- scenario files -------------------------------------------------------

FILE_KEYS = (
    "lambda_b", "lambda_f", "c", "r_cluster", "r0", "p_b_dbm", "p_f_dbm",
    "chi_db", "alpha", "lambda_m_arrivals", "mu", "n_channels", "rth_over_b",
    "mcs_db", "mode", "n_f", "r_m", "beta_m_db", "beta_f_db",
)


class ScenarioFileError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _to_file_values(scenario: Scenario) -> dict[str, str]:
    net, tr, sp = scenario.network, scenario.traffic, scenario.spectrum
    g = lambda x: format(float(x), ".12g")  # noqa: E731
    return {
        "lambda_b": g(net.lambda_B),
        "lambda_f": g(net.lambda_F),
        "c": g(net.c),
        "r_cluster": g(net.R),
        "r0": g(net.r_0),
        "p_b_dbm": g(linear_to_db(net.P_B * 1000)),
        "p_f_dbm": g(linear_to_db(net.P_F * 1000)),
        "chi_db": g(-linear_to_db(net.chi)),
        "alpha": g(net.alpha),
        "lambda_m_arrivals": g(tr.lambda_M),
        "mu": g(tr.mu),
        "n_channels": str(tr.N),
        "rth_over_b": g(tr.r_th_over_b),
        "mcs_db": ",".join(g(linear_to_db(t)) for t in tr.mcs.thresholds),
        "mode": sp.mode.value,
        "n_f": str(sp.n_f),
        "r_m": g(sp.r_m),
        "beta_m_db": g(linear_to_db(sp.beta_M)),
        "beta_f_db": g(linear_to_db(sp.beta_F)),
    }


def dump_scenario(scenario: Scenario) -> str:
    """Render a scenario in the key = value file format."""
    return "".join(f"{k} = {v}\n" for k, v in _to_file_values(scenario).items())


def parse_scenario(text: str, name: str = "scenario", base: Scenario | None = None) -> Scenario:
    """Parse ``key = value`` lines on top of ``base`` (defaults if omitted).

    ``chi_db`` is the wall penetration *loss* in dB, so ``chi_db = 10`` means
    a linear factor of 0.1. Blank lines and ``#`` comments are ignored.
    Raises :class:`ScenarioFileError` with line-numbered messages.
    """
    base = base or Scenario()
    errors: list[str] = []
    values: dict[str, tuple[int, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in FILE_KEYS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        values[key] = (lineno, value)

    net, tr, sp = {}, {}, {}

    def number(key, convert=float):
        lineno, value = values[key]
        try:
            return convert(value)
        except ValueError:
            errors.append(f"line {lineno}: {key} expects a number, got {value!r}")
            return None

    simple = {
        "lambda_b": (net, "lambda_B", float),
        "lambda_f": (net, "lambda_F", float),
        "c": (net, "c", float),
        "r_cluster": (net, "R", float),
        "r0": (net, "r_0", float),
        "alpha": (net, "alpha", float),
        "lambda_m_arrivals": (tr, "lambda_M", float),
        "mu": (tr, "mu", float),
        "n_channels": (tr, "N", int),
        "rth_over_b": (tr, "r_th_over_b", float),
        "n_f": (sp, "n_f", int),
        "r_m": (sp, "r_m", float),
    }
    for key, (target, fname, convert) in simple.items():
        if key in values:
            v = number(key, convert)
            if v is not None:
                target[fname] = v
    dbm = {"p_b_dbm": "P_B", "p_f_dbm": "P_F"}
    for key, fname in dbm.items():
        if key in values:
            v = number(key)
            if v is not None:
                net[fname] = db_to_linear(v) / 1000.0
    if "chi_db" in values:
        v = number("chi_db")
        if v is not None:
            net["chi"] = db_to_linear(-v)
    for key, fname in (("beta_m_db", "beta_M"), ("beta_f_db", "beta_F")):
        if key in values:
            v = number(key)
            if v is not None:
                sp[fname] = db_to_linear(v)
    if "mcs_db" in values:
        lineno, value = values["mcs_db"]
        try:
            tr["mcs"] = McsTable.from_db(float(x) for x in value.split(",") if x.strip())
        except ValueError:
            errors.append(f"line {lineno}: mcs_db expects a comma list of numbers, got {value!r}")
    if "mode" in values:
        lineno, value = values["mode"]
        try:
            sp["mode"] = Mode.parse(value)
        except ValueError as exc:
            errors.append(f"line {lineno}: {exc}")

    if errors:
        raise ScenarioFileError(errors)
    return Scenario(
        network=dataclasses.replace(base.network, **net),
        traffic=dataclasses.replace(base.traffic, **tr),
        spectrum=dataclasses.replace(base.spectrum, **sp),
        name=name,
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), name=path.stem)
