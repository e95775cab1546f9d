"""Synthetic worlds: CBS/UG placement, gains, Zipf workloads and mapping units."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import Cbs, Flow, Instance, UserGroup
from .rng import stream

SECTION_LENGTHS = (5, 10, 25, 50)


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    area_side: float = 500.0
    cbs_density: float = 80.0  # per km^2
    ug_density: float = 40.0  # per km^2
    radius_range: tuple[float, float] = (150.0, 300.0)
    capacity_total: float = 1200.0
    rate_fraction: float = 0.9
    n_domains: int = 50
    contents_per_domain: int = 10_000
    alpha_s: float = 0.8
    alpha_c: float = 1.5
    alpha_u: float = 0.5
    iota: int = 16
    content_size: float = 30e6
    cache_size: float = 60e9
    mu: tuple[float, float, float] = (1.0, 1.0, 200.0)
    section_len: int = 5
    duration_s: float = 5000.0
    interval_s: float = 100.0
    warmup_s: float = 500.0
    hit_sample_s: float = 2.0
    seed: int = 0
    # extensions beyond the evaluation knobs
    chrd_window_s: float = 0.0  # 0 -> one interval
    tick_s: float = 1.0
    n_groups: int = 10
    top_k: int = 20_000

    @property
    def area_km2(self) -> float:
        return (self.area_side / 1000.0) ** 2

    @property
    def rate(self) -> float:
        return self.rate_fraction * self.capacity_total

    @property
    def cache_slots(self) -> int:
        return max(1, int(self.cache_size // self.content_size))

    @property
    def chrd_window(self) -> float:
        return self.chrd_window_s if self.chrd_window_s > 0 else self.interval_s

    def validate(self) -> "ScenarioConfig":
        positive = ["area_side", "cbs_density", "ug_density", "capacity_total", "n_domains",
                    "contents_per_domain", "alpha_s", "alpha_c", "alpha_u", "iota",
                    "content_size", "cache_size", "section_len", "interval_s",
                    "hit_sample_s", "tick_s", "n_groups", "top_k"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.rate_fraction <= 1:
            raise ConfigError(f"rate_fraction must lie in (0, 1], got {self.rate_fraction}")
        lo, hi = self.radius_range
        if not 0 < lo <= hi:
            raise ConfigError(f"radius_range must satisfy 0 < lo <= hi, got {self.radius_range}")
        if self.duration_s < 0 or self.warmup_s < 0:
            raise ConfigError("duration_s and warmup_s must be non-negative")
        for name in ("duration_s", "warmup_s"):
            n = getattr(self, name) / self.interval_s
            if abs(n - round(n)) > 1e-9:
                raise ConfigError(f"{name} must be a multiple of interval_s")
        if len(self.mu) != 3 or any(m < 0 for m in self.mu):
            raise ConfigError(f"mu needs three non-negative weights, got {self.mu}")
        return self

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["radius_range"] = list(self.radius_range)
        out["mu"] = list(self.mu)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, value, known[key].default)
        return cls(**kwargs).validate()

    def to_text(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            if isinstance(value, list):
                value = ", ".join(repr(v) for v in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def _coerce(key, value, default):
    try:
        if isinstance(default, tuple):
            if isinstance(value, str):
                value = [v for v in value.replace("(", "").replace(")", "").split(",") if v.strip()]
            parts = tuple(float(v) for v in value)
            if len(parts) != len(default):
                raise ValueError(f"expected {len(default)} values")
            return parts
        if isinstance(default, int) and not isinstance(default, bool):
            as_float = float(value)
            if as_float != int(as_float):
                raise ValueError("expected an integer")
            return int(as_float)
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None


def parse_config(text: str) -> ScenarioConfig:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    data = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        data[key] = value
    return ScenarioConfig.from_dict(data)


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())


# -- geometry ------------------------------------------------------------


def sample_ppp(area_side: float, density: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous PPP on the square [0, side]^2; density per km^2."""
    mean = density * (area_side / 1000.0) ** 2
    n = int(rng.poisson(mean))
    return rng.uniform(0.0, area_side, size=(n, 2))


def assign_radii_capacities(n_cbs: int, radius_range, capacity_total: float,
                            rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if n_cbs == 0:
        raise ValueError("cannot split capacity over zero CBSs")
    lo, hi = radius_range
    radii = rng.uniform(lo, hi, size=n_cbs)
    return radii, proportional_capacities(radii, capacity_total)


def proportional_capacities(radii, capacity_total: float) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    return capacity_total * radii / radii.sum()


def distance_matrix(ug_pos, cbs_pos) -> np.ndarray:
    ug = np.asarray(ug_pos, dtype=float).reshape(-1, 2)
    cb = np.asarray(cbs_pos, dtype=float).reshape(-1, 2)
    return np.hypot(ug[:, None, 0] - cb[None, :, 0], ug[:, None, 1] - cb[None, :, 1])


def connectivity_matrix(ug_pos, cbs_pos, radii) -> np.ndarray:
    """t[u, j] = 1 iff the UG lies in CBS j's closed coverage disc."""
    d = distance_matrix(ug_pos, cbs_pos)
    return (d <= np.asarray(radii, dtype=float)[None, :]).astype(np.int8)


def distance_gains(dist) -> np.ndarray:
    return 100.0 * np.exp(-np.asarray(dist, dtype=float) / 500.0)


# -- workload ------------------------------------------------------------


def zipf_pmf(n: int, alpha: float) -> np.ndarray:
    if n < 1:
        raise ValueError("zipf_pmf needs n >= 1")
    weights = np.arange(1, n + 1, dtype=float) ** (-float(alpha))
    return weights / weights.sum()


def build_flows(rate: float, ug_pmf, domain_pmf) -> np.ndarray:
    """Expected rate of every (UG, domain) flow, shape (U, S)."""
    return rate * np.outer(np.asarray(ug_pmf, dtype=float), np.asarray(domain_pmf, dtype=float))


def quantize_to_units(rates, iota: int) -> tuple[float, np.ndarray, np.ndarray]:
    """(lambda0, unit counts, signed residuals) for a vector of flow rates.

    lambda0 = max rate / iota; each nonzero flow gets round(rate / lambda0)
    units (halves to even), at least one.
    """
    rates = np.asarray(rates, dtype=float)
    top = float(rates.max(initial=0.0))
    if top <= 0:
        raise ValueError("cannot quantize all-zero traffic")
    lam0 = top / iota
    counts = np.rint(rates / lam0).astype(np.int64)
    counts = np.where(rates > 0, np.maximum(counts, 1), 0)
    counts = np.minimum(counts, iota)
    return lam0, counts, rates - counts * lam0


def shuffle_sections(pmf, section_len: int, rng: np.random.Generator) -> np.ndarray:
    """Permute values uniformly inside consecutive blocks of ``section_len`` ranks."""
    pmf = np.asarray(pmf, dtype=float)
    out = pmf.copy()
    for start in range(0, len(pmf), section_len):
        block = slice(start, min(start + section_len, len(pmf)))
        out[block] = rng.permutation(pmf[block])
    return out


# -- worlds --------------------------------------------------------------


@dataclass(eq=False)
class World:
    config: ScenarioConfig
    cbs_pos: np.ndarray
    radii: np.ndarray
    capacities: np.ndarray
    ug_pos: np.ndarray
    ug_pmf: np.ndarray
    domain_pmf: np.ndarray
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_cbs(self) -> int:
        return len(self.radii)

    @property
    def n_ugs(self) -> int:
        return len(self.ug_pos)

    @property
    def n_domains(self) -> int:
        return len(self.domain_pmf)

    def connectivity(self) -> np.ndarray:
        return connectivity_matrix(self.ug_pos, self.cbs_pos, self.radii)

    def gains(self) -> np.ndarray:
        return distance_gains(distance_matrix(self.ug_pos, self.cbs_pos))

    def instance(self, flow_rates: np.ndarray, weights: Optional[np.ndarray] = None,
                 iota: Optional[int] = None) -> tuple[Instance, np.ndarray]:
        """Instance over every (UG, domain) flow in UG-major order, plus residuals.

        ``flow_rates`` has shape (U, S).
        """
        rates = np.asarray(flow_rates, dtype=float).reshape(-1)
        lam0, counts, residuals = quantize_to_units(rates, iota or self.config.iota)
        n_s = self.n_domains
        flows = [Flow(ug=idx // n_s, domain=idx % n_s, rate=float(r), unit_count=int(n))
                 for idx, (r, n) in enumerate(zip(rates, counts))]
        ug_of_flow = np.repeat(np.arange(self.n_ugs), n_s)
        conn = self.connectivity()[ug_of_flow]
        gains = self.gains()[ug_of_flow]
        slots = self.config.cache_slots
        cbss = [Cbs(id=f"cbs{j}", position=(float(p[0]), float(p[1])), radius=float(r),
                    capacity=float(c), cache_slots=slots)
                for j, (p, r, c) in enumerate(zip(self.cbs_pos, self.radii, self.capacities))]
        ugs = [UserGroup(id=f"ug{u}", position=(float(p[0]), float(p[1])))
               for u, p in enumerate(self.ug_pos)]
        if weights is None:
            weights = np.zeros_like(gains)
        inst = Instance(cbss=cbss, user_groups=ugs, n_domains=n_s, flows=flows, lambda0=lam0,
                        connectivity=conn, gains=gains, weights=weights, mu=self.config.mu)
        return inst, residuals

    def base_instance(self) -> tuple[Instance, np.ndarray]:
        return self.instance(build_flows(self.config.rate, self.ug_pmf, self.domain_pmf))

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "cbs_positions": self.cbs_pos.tolist(),
            "radii": self.radii.tolist(),
            "capacities": self.capacities.tolist(),
            "ug_positions": self.ug_pos.tolist(),
            "ug_pmf": self.ug_pmf.tolist(),
            "domain_pmf": self.domain_pmf.tolist(),
            "residuals": self.residuals.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "World":
        return cls(config=ScenarioConfig.from_dict(data["config"]),
                   cbs_pos=np.asarray(data["cbs_positions"], dtype=float).reshape(-1, 2),
                   radii=np.asarray(data["radii"], dtype=float),
                   capacities=np.asarray(data["capacities"], dtype=float),
                   ug_pos=np.asarray(data["ug_positions"], dtype=float).reshape(-1, 2),
                   ug_pmf=np.asarray(data["ug_pmf"], dtype=float),
                   domain_pmf=np.asarray(data["domain_pmf"], dtype=float),
                   residuals=np.asarray(data.get("residuals", []), dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "World":
        return cls.from_dict(json.loads(text))


def generate_world(config: ScenarioConfig, n_ugs: Optional[int] = None) -> World:
    """Place CBSs and UGs for ``config.seed``; ``n_ugs`` forces the UG count."""
    seed = config.seed
    cbs_pos = sample_ppp(config.area_side, config.cbs_density, stream(seed, "ppp-cbs"))
    radii, caps = assign_radii_capacities(len(cbs_pos), config.radius_range,
                                          config.capacity_total, stream(seed, "radii"))
    if n_ugs is None:
        ug_pos = sample_ppp(config.area_side, config.ug_density, stream(seed, "ppp-ug"))
    else:
        ug_pos = stream(seed, "ug-forced").uniform(0.0, config.area_side, size=(n_ugs, 2))
    n_u = len(ug_pos)
    world = World(config=config, cbs_pos=cbs_pos, radii=radii, capacities=caps, ug_pos=ug_pos,
                  ug_pmf=zipf_pmf(n_u, config.alpha_u) if n_u else np.zeros(0),
                  domain_pmf=zipf_pmf(config.n_domains, config.alpha_s))
    if n_u:
        _, world.residuals = world.base_instance()
    return world
