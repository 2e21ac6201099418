"""Declarative problem and run configuration.

Problems load either by catalog name or from an inline definition whose
field expressions are polynomial / exponential terms with coefficient lists
(grammar documented in the CLI module and the README).
"""

from __future__ import annotations

import json
from dataclasses import dataclass


from .catalog import catalog_names, get_problem
from .errors import ConfigError
from .problems import (
    BoxDomain,
    EpsilonSchedule,
    ProblemSpec,
    ScalarField,
    classify_maximum,
    constant_field,
    exponential_field,
    polynomial_field,
    power_epsilon,
    zero_epsilon,
)

KNOWN_CHECKS = ("laplace", "constants", "lln", "fluctuations", "preposition1", "sampler")


@dataclass(frozen=True)
class RunConfig:
    problem: object  # catalog name or inline definition dict
    n_sweep: tuple[int, ...] = (25, 100, 400, 1600)
    grid_res: int = 64
    tol: float = 1e-10
    safety_factor: float = 1.1
    seed: int = 0
    checks: tuple[str, ...] = ("laplace",)
    output_path: str = "."
    sample_count: int = 100_000
    ks_threshold: float = 0.02

    def validate(self) -> None:
        if not self.n_sweep or any(
            b <= a for a, b in zip(self.n_sweep, self.n_sweep[1:])
        ):
            raise ConfigError("n_sweep must be nonempty and strictly increasing")
        unknown = [c for c in self.checks if c not in KNOWN_CHECKS]
        if unknown:
            raise ConfigError(f"unknown checks: {unknown}; known: {list(KNOWN_CHECKS)}")
        if not self.checks:
            raise ConfigError("at least one check is required")


def field_from_config(cfg, dimension: int) -> ScalarField:
    if cfg is None:
        return constant_field(1.0)
    if isinstance(cfg, (int, float)):
        return constant_field(float(cfg))
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ConfigError(f"field definition needs a 'type': {cfg!r}")
    kind = cfg["type"]
    if kind == "constant":
        return constant_field(float(cfg.get("value", 1.0)))
    if kind == "polynomial":
        try:
            terms = [(float(t["coeff"]), tuple(int(e) for e in t["powers"])) for t in cfg["terms"]]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad polynomial terms: {exc}") from exc
        if any(len(p) != dimension for _, p in terms):
            raise ConfigError("polynomial powers must match the problem dimension")
        return polynomial_field(terms, name=cfg.get("name", "poly"))
    if kind == "exponential":
        lin = [float(v) for v in cfg.get("linear", [])]
        if len(lin) != dimension:
            raise ConfigError("exponential linear coefficients must match the dimension")
        return exponential_field(
            float(cfg.get("scale", 1.0)), lin, float(cfg.get("offset", 0.0)),
            name=cfg.get("name", "exp"),
        )
    raise ConfigError(f"unknown field type {kind!r}")


def epsilon_from_config(cfg) -> EpsilonSchedule:
    if cfg is None:
        return zero_epsilon()
    kind = cfg.get("class", "zero")
    if kind == "zero":
        return zero_epsilon()
    if kind == "power":
        return power_epsilon(float(cfg["exponent"]), float(cfg.get("scale", 1.0)))
    raise ConfigError(f"unknown epsilon class {kind!r}")


def problem_from_config(cfg) -> ProblemSpec:
    """Resolve a problem: a bare string (or {"catalog": name}) picks a
    catalog entry; a dict with domain/f defines one inline, classified
    automatically."""
    if isinstance(cfg, str):
        try:
            return get_problem(cfg)
        except Exception as exc:
            raise ConfigError(
                f"unknown catalog problem {cfg!r}; available: {catalog_names()}"
            ) from exc
    if not isinstance(cfg, dict):
        raise ConfigError("problem must be a catalog name or an inline definition")
    if "catalog" in cfg:
        return problem_from_config(cfg["catalog"])

    try:
        dom_cfg = cfg["domain"]
        box = BoxDomain(dom_cfg["lower"], dom_cfg["upper"], dom_cfg.get("rotation"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad domain: {exc}") from exc
    m = box.dimension
    if "f" not in cfg:
        raise ConfigError("inline problem needs an 'f' field definition")
    f = field_from_config(cfg["f"], m)
    g = field_from_config(cfg.get("g"), m)
    sigma = field_from_config(cfg["sigma"], m) if "sigma" in cfg else None
    eps = epsilon_from_config(cfg.get("epsilon"))
    name = cfg.get("name", "inline")

    draft = ProblemSpec(
        name=name,
        dimension=m,
        domain=box,
        f_limit=f,
        g=g,
        maximum=_placeholder_maximum(box),
        sigma=sigma,
        epsilon=eps,
        n_zero=1,
    )
    info = classify_maximum(draft, grid_res=int(cfg.get("classify_grid_res", 64)))
    if "neighborhood" in cfg:
        nb_cfg = cfg["neighborhood"]
        nb = BoxDomain(nb_cfg["lower"], nb_cfg["upper"], box.rotation)
        from dataclasses import replace

        info = replace(info, neighborhood=nb)
    from .problems import default_n_zero

    n0 = default_n_zero(
        box, info.neighborhood, info.kind, lambda n: box.to_box(info.x_star_of_N(n))
    )
    return ProblemSpec(
        name=name,
        dimension=m,
        domain=box,
        f_limit=f,
        g=g,
        maximum=info,
        sigma=sigma,
        epsilon=eps,
        n_zero=max(n0, int(cfg.get("n_zero", 1))),
    )


def _placeholder_maximum(box: BoxDomain):
    from .problems import INTERIOR, MaximumInfo

    center = 0.5 * (box.lower + box.upper)
    return MaximumInfo(
        kind=INTERIOR,
        x_star=box.to_ambient(center),
        x_star_of_N=lambda n: box.to_ambient(center),
        neighborhood=BoxDomain(box.lower, box.upper, box.rotation),
    )


def load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
