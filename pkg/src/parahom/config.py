"""Flat key-value experiment configuration with per-kind schemas.

Config files are diff-friendly text: one ``key = value`` pair per line,
``#`` comments, no nesting.  List-valued keys use comma separation.
Every key is schema-checked before any compute; unknown keys and invalid
values raise :class:`ConfigError` naming the field.
"""

import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError

KINDS = (
    "heat-kernel", "sample-env", "greens", "corrector", "qmatrix", "ahom",
    "avg-greens", "rate-fit", "correlate", "thm13", "malliavin", "poincare",
    "sde-appendix",
)


def _positive(x):
    return x > 0


def _even_positive(x):
    return x > 0 and x % 2 == 0


def _dim(x):
    return x in (1, 2, 3)


@dataclass
class Key:
    """One schema entry: parser, default (None = required), validator."""

    parse: callable
    default: object = None
    check: callable = None
    why: str = ""


def _int_list(s):
    return [int(p) for p in str(s).split(",") if p.strip() != ""]


def _float_list(s):
    return [float(p) for p in str(s).split(",") if p.strip() != ""]


_ENV_KEYS = {
    "d": Key(int, 1, _dim, "spatial dimension in {1,2,3}"),
    "L": Key(int, 16, _even_positive, "even positive side length"),
    "dt": Key(float, 0.05, _positive, "positive time step"),
    "m": Key(float, 1.0, _positive, "positive mass"),
    "potential": Key(str, "dipole", lambda s: s in ("quadratic", "dipole"),
                     "'quadratic' or 'dipole'"),
    "c": Key(float, 1.0, _positive, "positive quadratic curvature"),
    "a_dip": Key(float, 0.3, lambda x: 0 <= x < 1, "dipole amplitude in [0,1)"),
    "seed": Key(int, 0, lambda x: x >= 0, "non-negative master seed"),
}

SCHEMAS = {
    "heat-kernel": {
        "d": Key(int, 1, _dim, "spatial dimension in {1,2,3}"),
        "radius": Key(int, 40, _positive, "positive truncation radius"),
        "t": Key(float, 1.0, lambda x: x >= 0, "non-negative time"),
        "seed": Key(int, 0, lambda x: x >= 0, "non-negative master seed"),
    },
    "sample-env": {**_ENV_KEYS, "n_steps": Key(int, 20, _positive)},
    "greens": {
        **_ENV_KEYS,
        "t_index": Key(int, 20, _positive),
        "source_site": Key(int, 0, lambda x: x >= 0),
    },
    "corrector": {
        **_ENV_KEYS,
        "n_steps": Key(int, 8, _positive),
        "xi": Key(_float_list, [0.0]),
        "eta": Key(float, 0.01, _positive, "positive regularization"),
    },
    "qmatrix": {
        **_ENV_KEYS,
        "n_steps": Key(int, 8, _positive),
        "n_env": Key(int, 4, _positive),
        "xi": Key(_float_list, [0.0]),
        "eta": Key(float, 0.01, _positive, "positive regularization"),
    },
    "ahom": {
        **_ENV_KEYS,
        "n_steps": Key(int, 8, _positive),
        "n_env": Key(int, 4, _positive),
        "etas": Key(_float_list, [1e-1, 1e-2, 1e-3]),
    },
    "avg-greens": {
        **_ENV_KEYS,
        "t_indices": Key(_int_list, [10, 20]),
        "n_samples": Key(int, 8, _positive),
        "x_max": Key(int, 4, lambda x: x >= 0, "non-negative coordinate range"),
    },
    "rate-fit": {
        "scales": Key(_float_list, None),
        "values": Key(_float_list, None),
        "mode": Key(str, "epsilon", lambda s: s in ("epsilon", "greens-decay")),
        "d": Key(int, 1, _dim),
        "seed": Key(int, 0, lambda x: x >= 0),
    },
    "correlate": {
        **_ENV_KEYS,
        "n_samples": Key(int, 2000, _positive),
        "x_max": Key(int, 2, lambda x: x >= 0),
        "anchors": Key(_int_list, [0]),
        "method": Key(str, "pathwise", lambda s: s in ("pathwise", "forward")),
    },
    "thm13": {
        **_ENV_KEYS,
        "t_indices": Key(_int_list, [20, 30, 45, 68, 100]),
        "n_samples": Key(int, 100, _positive),
        "n_env_cell": Key(int, 4, _positive),
        "etas": Key(_float_list, [0.13, 0.013, 0.0013]),
    },
    "malliavin": {
        **_ENV_KEYS,
        "y_site": Key(int, 1, lambda x: x >= 0),
        "s_index": Key(int, 50, lambda x: x >= 0),
        "x_site": Key(int, 0, lambda x: x >= 0),
        "t_index": Key(int, 100, _positive),
        "delta": Key(float, 1e-5, lambda x: 1e-7 <= x <= 1e-3,
                     "perturbation in [1e-7, 1e-3]"),
    },
    "poincare": {
        **_ENV_KEYS,
        "n_steps": Key(int, 120, _positive),
        "n_samples": Key(int, 2000, _positive),
        "functional": Key(str, "site", lambda s: s in ("site", "tanh-sum", "sin-sum")),
    },
    "sde-appendix": {
        "seed": Key(int, 0, lambda x: x >= 0),
        "n_paths": Key(int, 30000, _positive),
        "n_keep": Key(int, 20000, _positive),
    },
}


@dataclass
class ExperimentConfig:
    """A schema-validated experiment: kind plus resolved parameters."""

    kind: str
    params: dict = field(default_factory=dict)

    @property
    def seed(self):
        return self.params.get("seed", 0)

    def canonical_text(self):
        lines = [f"kind = {self.kind}"]
        for k in sorted(self.params):
            v = self.params[k]
            if isinstance(v, list):
                v = ",".join(repr(p) for p in v)
            lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def config_hash(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]

    def as_jsonable(self):
        return {"kind": self.kind, **{k: self.params[k] for k in sorted(self.params)}}


def parse_config_text(text, kind=None):
    """Parse flat ``key = value`` text into raw string pairs."""
    raw = {}
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {line!r}")
        k, v = (p.strip() for p in line.split("=", 1))
        if k in raw:
            raise ConfigError(f"line {ln}: duplicate key {k!r}")
        raw[k] = v
    if "kind" in raw:
        file_kind = raw.pop("kind")
        if kind is not None and file_kind != kind:
            raise ConfigError(
                f"kind: config file says {file_kind!r}, subcommand is {kind!r}"
            )
        kind = file_kind
    return kind, raw


def resolve_config(kind, raw, seed_override=None):
    """Validate raw string pairs against the schema for ``kind``."""
    if kind not in SCHEMAS:
        raise ConfigError(f"kind: unknown experiment kind {kind!r}; "
                          f"choose one of {', '.join(KINDS)}")
    schema = SCHEMAS[kind]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key for kind {kind!r}")
    params = {}
    for name, key in schema.items():
        if name in raw:
            try:
                val = key.parse(raw[name])
            except (TypeError, ValueError):
                raise ConfigError(f"{name}: cannot parse {raw[name]!r}") from None
        elif key.default is not None:
            val = key.default
        else:
            raise ConfigError(f"{name}: required key missing for kind {kind!r}")
        if key.check is not None and not key.check(val):
            hint = f" ({key.why})" if key.why else ""
            raise ConfigError(f"{name}: invalid value {val!r}{hint}")
        params[name] = val
    if seed_override is not None and "seed" in schema:
        params["seed"] = int(seed_override)
    return ExperimentConfig(kind, params)


def load_config(path, kind=None, seed_override=None):
    with open(path, encoding="utf-8") as fh:
        kind, raw = parse_config_text(fh.read(), kind=kind)
    if kind is None:
        raise ConfigError("kind: missing (set it in the file or use a subcommand)")
    return resolve_config(kind, raw, seed_override=seed_override)


def fmt17(x):
    """Locale-independent float with 17 significant digits."""
    return format(float(x), ".17g")


def dump_json(obj, path):
    """Deterministic JSON artifact (sorted keys, '\\n' endings)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
