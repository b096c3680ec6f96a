"""Scenario configuration: a flat, diff-friendly key=value file format with
units spelled out in key names, plus built-in presets that reproduce the
reference experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .phy import BUILTIN_PROFILES, PhyProfile, get_profile


class ConfigError(ValueError):
    """Invalid scenario configuration; `field` carries the offending key."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class Scenario:
    snr_db: tuple[float, ...]
    name: str = "custom"
    profile: str = "80211a-24mbps"
    controller: str = "cac"              # cac | dac | edca-static
    payload_bytes: int = 1500
    duration_s: float = 30.0
    replications: int = 3
    seed: int = 1
    capture_mode: str = "none"           # none | threshold
    capture_threshold_db: float = 10.0
    traffic: str = "saturated"           # saturated | onoff
    burst_bytes: int = 10_000_000
    silent_mean_s: float = 30.0
    static_cw: int = 16
    static_beb: bool = False             # let the static baseline double its window
    hidden_pairs: tuple[tuple[int, int], ...] = ()
    hidden_from_ap: tuple[int, ...] = ()
    hidden_links: tuple[tuple[int, int], ...] = ()   # directed: first cannot hear second
    allow_asymmetric: bool = False
    defer_min_samples: int = 20
    kp_override: float | None = None
    ki_override: float | None = None
    cw_floor_override: int | None = None
    cw_ceiling_override: int | None = None
    snr_jitter_db: float = 0.0           # per-replication SNR redraw sigma
    station_add_order: str = "ascending"  # sweep growth order by link quality

    @property
    def n_stations(self) -> int:
        return len(self.snr_db)

    def phy(self) -> PhyProfile:
        return get_profile(self.profile)

    def validate(self) -> None:
        if self.profile not in BUILTIN_PROFILES:
            raise ConfigError("profile", f"unknown profile {self.profile!r}")
        if self.controller not in ("cac", "dac", "edca-static"):
            raise ConfigError("controller", f"unknown controller {self.controller!r}")
        if self.traffic not in ("saturated", "onoff"):
            raise ConfigError("traffic", f"unknown traffic model {self.traffic!r}")
        if self.capture_mode not in ("none", "threshold"):
            raise ConfigError("capture_mode", f"unknown capture mode {self.capture_mode!r}")
        if self.n_stations < 1:
            raise ConfigError("snr_db", "at least one station required")
        if any(not math.isfinite(s) for s in self.snr_db):
            raise ConfigError("snr_db", "SNR values must be finite")
        if self.replications < 1:
            raise ConfigError("replications", "must be >= 1")
        phy = self.phy()
        if self.duration_s * 1e6 < 10 * phy.beacon_interval:
            raise ConfigError("duration_s", "must span at least 10 beacon intervals")
        if self.payload_bytes < 1:
            raise ConfigError("payload_bytes", "must be positive")
        if self.traffic == "onoff":
            if self.burst_bytes < self.payload_bytes:
                raise ConfigError("burst_bytes", "must hold at least one frame")
            if self.silent_mean_s <= 0:
                raise ConfigError("silent_mean_s", "must be positive")
        if self.static_cw < 1:
            raise ConfigError("static_cw", "must be >= 1")
        ids = range(1, self.n_stations + 1)
        for a, b in self.hidden_pairs:
            if a == b or a not in ids or b not in ids:
                raise ConfigError("hidden_pairs", f"bad station pair ({a},{b})")
        for a in self.hidden_from_ap:
            if a not in ids:
                raise ConfigError("hidden_from_ap", f"unknown station {a}")
        if self.hidden_links and not self.allow_asymmetric:
            raise ConfigError("hidden_links",
                              "asymmetric hearing requires allow_asymmetric = true")
        for a, b in self.hidden_links:
            if a == b or a not in ids or b not in ids:
                raise ConfigError("hidden_links", f"bad directed pair ({a},{b})")
        if (self.hidden_pairs or self.hidden_from_ap or self.hidden_links) \
                and self.traffic != "saturated":
            raise ConfigError("traffic",
                              "hidden topologies support saturated traffic only")
        if self.station_add_order not in ("ascending", "descending"):
            raise ConfigError("station_add_order", "ascending or descending")
        if self.snr_jitter_db < 0:
            raise ConfigError("snr_jitter_db", "must be >= 0")

    def is_fully_connected(self) -> bool:
        return not (self.hidden_pairs or self.hidden_from_ap or self.hidden_links)


def hidden_node_visibility(scenario: Scenario) -> tuple[dict[int, set[int]], set[int]]:
    """Build per-station heard sets (audible node ids, AP = 0) and the set of
    stations the AP hears. Stations default to hearing everyone.
    """
    scenario.validate()
    n = scenario.n_stations
    heard = {i: set(range(0, n + 1)) for i in range(1, n + 1)}
    ap_hears = set(range(1, n + 1))
    for a, b in scenario.hidden_pairs:
        heard[a].discard(b)
        heard[b].discard(a)
    for a in scenario.hidden_from_ap:
        heard[a].discard(0)
        ap_hears.discard(a)
        for i in heard:
            if i != a:
                heard[i].discard(a)
    for a, b in scenario.hidden_links:
        heard[a].discard(b)
    return heard, ap_hears


# -- flat key = value config files -------------------------------------------

_LIST_FIELDS = {"snr_db"}
_PAIR_FIELDS = {"hidden_pairs", "hidden_links"}
_INT_LIST_FIELDS = {"hidden_from_ap"}
_OPTIONAL_FLOATS = {"kp_override", "ki_override"}
_OPTIONAL_INTS = {"cw_floor_override", "cw_ceiling_override"}


def _parse_value(name: str, raw: str, target_type):
    raw = raw.strip()
    if name in _PAIR_FIELDS:
        if not raw:
            return ()
        pairs = []
        for chunk in raw.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                a, b = chunk.split("-")
                pairs.append((int(a), int(b)))
            except ValueError:
                raise ConfigError(name, f"expected 'a-b' pairs, got {chunk!r}")
        return tuple(pairs)
    if name in _LIST_FIELDS:
        try:
            return tuple(float(v) for v in raw.split(",") if v.strip())
        except ValueError:
            raise ConfigError(name, f"expected comma-separated numbers, got {raw!r}")
    if name in _INT_LIST_FIELDS:
        try:
            return tuple(int(v) for v in raw.split(",") if v.strip())
        except ValueError:
            raise ConfigError(name, f"expected comma-separated integers, got {raw!r}")
    if name in _OPTIONAL_FLOATS | _OPTIONAL_INTS:
        if raw.lower() in ("", "none"):
            return None
        caster = float if name in _OPTIONAL_FLOATS else int
        try:
            return caster(raw)
        except ValueError:
            raise ConfigError(name, f"expected a number, got {raw!r}")
    if target_type is bool:
        if raw.lower() in ("true", "yes", "1"):
            return True
        if raw.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(name, f"expected true/false, got {raw!r}")
    if target_type is int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(name, f"expected an integer, got {raw!r}")
    if target_type is float:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(name, f"expected a number, got {raw!r}")
    return raw


def parse_scenario(text: str) -> Scenario:
    spec_fields = {f.name: f for f in fields(Scenario)}
    type_of = {"name": str, "profile": str, "controller": str, "capture_mode": str,
               "traffic": str, "station_add_order": str,
               "payload_bytes": int, "replications": int, "seed": int,
               "burst_bytes": int, "static_cw": int, "defer_min_samples": int,
               "duration_s": float, "capture_threshold_db": float,
               "silent_mean_s": float, "snr_jitter_db": float,
               "static_beb": bool, "allow_asymmetric": bool}
    values = {}
    n_stations_hint = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key == "stations":
            n_stations_hint = _parse_value(key, raw, int)
            continue
        if key not in spec_fields:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _parse_value(key, raw, type_of.get(key, str))
    if "snr_db" not in values:
        raise ConfigError("snr_db", "missing required key")
    if n_stations_hint is not None:
        snr = values["snr_db"]
        if len(snr) == 1:
            values["snr_db"] = snr * n_stations_hint
        elif len(snr) != n_stations_hint:
            raise ConfigError("stations",
                              f"stations = {n_stations_hint} but {len(snr)} SNR values given")
    scenario = Scenario(**values)
    scenario.validate()
    return scenario


def emit_scenario(scenario: Scenario) -> str:
    """Serialize with every field explicit; parse(emit(s)) == s."""
    lines = [f"# scenario: {scenario.name}"]
    for f in fields(Scenario):
        v = getattr(scenario, f.name)
        if f.name in _PAIR_FIELDS:
            rendered = "; ".join(f"{a}-{b}" for a, b in v)
        elif f.name in _LIST_FIELDS:
            rendered = ", ".join(repr(x) for x in v)
        elif f.name in _INT_LIST_FIELDS:
            rendered = ", ".join(str(x) for x in v)
        elif v is None:
            rendered = "none"
        elif isinstance(v, bool):
            rendered = "true" if v else "false"
        elif isinstance(v, float):
            rendered = repr(v)
        else:
            rendered = str(v)
        lines.append(f"{f.name} = {rendered}")
    return "\n".join(lines) + "\n"


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# -- presets ------------------------------------------------------------------

# Per-node SNR table read off the testbed link-quality figure; values are
# approximate dB levels, stations numbered in decreasing link quality.
TESTBED_SNR_DB = (40.0, 39.2, 38.5, 37.8, 37.0, 36.2, 35.5, 34.7, 34.0,
                  33.2, 32.5, 31.7, 31.0, 29.5, 28.0, 26.0, 24.5)

# Ten-node subset used by the throughput/fairness/SNR experiments.
_SUBSET_10 = (0, 2, 4, 6, 8, 10, 12, 13, 14, 15)
SNR_SUBSET_10 = tuple(TESTBED_SNR_DB[i] for i in _SUBSET_10)


def _presets() -> dict[str, Scenario]:
    return {
        "fig5_cac_point_of_operation": Scenario(
            name="fig5_cac_point_of_operation",
            controller="cac",
            snr_db=(30.0,) * 10,
            capture_mode="none",
            duration_s=120.0,
            replications=1,
            seed=5,
        ),
        "fig7_udp_total": Scenario(
            name="fig7_udp_total",
            controller="cac",
            snr_db=SNR_SUBSET_10,
            capture_mode="threshold",
            duration_s=30.0,
            replications=3,
            seed=7,
        ),
        "fig9_snr_correlation": Scenario(
            name="fig9_snr_correlation",
            controller="cac",
            snr_db=SNR_SUBSET_10,
            capture_mode="threshold",
            duration_s=30.0,
            replications=3,
            seed=9,
        ),
        "fig10_hidden": Scenario(
            name="fig10_hidden",
            controller="cac",
            snr_db=(31.0, 30.0),
            capture_mode="none",
            hidden_pairs=((1, 2),),
            duration_s=30.0,
            replications=3,
            seed=10,
        ),
        "fig11_sweep_n": Scenario(
            name="fig11_sweep_n",
            controller="cac",
            snr_db=(30.0,) * 18,
            capture_mode="none",
            duration_s=15.0,
            replications=1,
            seed=11,
        ),
        "fig12_delay": Scenario(
            name="fig12_delay",
            controller="cac",
            snr_db=SNR_SUBSET_10,
            capture_mode="threshold",
            traffic="onoff",
            burst_bytes=10_000_000,
            silent_mean_s=30.0,
            duration_s=300.0,
            replications=1,
            seed=12,
        ),
    }


PRESETS = _presets()


def get_preset(name: str) -> Scenario:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; "
                          f"known: {sorted(PRESETS)}") from None
