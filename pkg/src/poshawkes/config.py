"""Flat ``key = value`` run configuration with typed fields and overrides."""

from dataclasses import asdict, dataclass, fields, replace

from .events import DEFAULT_EPOCH, DEFAULT_TZ


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    events: str = ""
    calendar: str = ""
    model_in: str = ""
    model_out: str = "model.txt"
    output: str = ""
    svg: str = ""
    out_dir: str = "."
    t_a: float = float("nan")
    t_b: float = float("nan")
    epoch: str = DEFAULT_EPOCH
    timezone: str = DEFAULT_TZ
    model: str = "hawkes"
    kernel_mode: str = "paper"
    window_s: float = 14400.0
    ridge: float = 1e-6
    tol: float = 1e-8
    max_iter: int = 100
    influence_max_iter: int = 600
    influence_rel_tol: float = 1e-8
    horizon_start: float = float("nan")
    horizon_hours: float = 192.0
    n_realizations: int = 30
    seed: int = 0
    train_days: float = 30.0
    block_days: float = 15.0
    eval_days: float = 8.0
    models: str = "hawkes,nhpp,regression"
    future_integral: str = "rate"
    phat_contributors: str = "history"
    early_window_s: float = 3600.0
    synth_days: int = 90
    synth_p0_median: float = 0.004

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type is int and isinstance(v, float) and v != int(v):
                raise ConfigError(f"{f.name} must be an integer, got {v}")
        checks = [
            (self.model in ("hawkes", "nhpp", "regression"), "model must be hawkes|nhpp|regression"),
            (self.kernel_mode in ("paper", "continuous"), "kernel_mode must be paper|continuous"),
            (self.future_integral in ("paper", "causal", "rate"), "future_integral must be paper|causal|rate"),
            (self.phat_contributors in ("history", "window"), "phat_contributors must be history|window"),
            (self.window_s > 0, "window_s must be positive"),
            (self.ridge >= 0, "ridge must be non-negative"),
            (self.n_realizations >= 1, "n_realizations must be at least 1"),
            (self.horizon_hours >= 0, "horizon_hours must be non-negative"),
            (self.seed >= 0, "seed must be a non-negative integer"),
            (self.synth_days > 0, "synth_days must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        bad = [m for m in self.model_list if m not in ("hawkes", "nhpp", "regression")]
        if bad:
            raise ConfigError(f"unknown model kind(s) in models: {', '.join(bad)}")

    @property
    def model_list(self):
        return [m.strip() for m in self.models.split(",") if m.strip()]

    def dumps(self):
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in asdict(self).items())


_TYPES = {f.name: f.type for f in fields(Config)}


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def _cast(key, text):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    typ = _TYPES[key]
    text = text.strip()
    try:
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {typ.__name__}") from None
    return text


def parse_config(text, origin="<config>"):
    """Parse ``key = value`` lines (``#`` comments) into a dict of typed overrides."""
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{origin}:{n}: expected 'key = value', got {raw!r}")
        out[key.strip()] = _cast(key.strip(), value)
    return out


def load_config(path=None, overrides=None):
    """Defaults, then the file at ``path``, then ``overrides`` (already typed or text)."""
    values = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                values.update(parse_config(fh.read(), path))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        values[k] = _cast(k, v) if isinstance(v, str) else v
    try:
        return replace(Config(), **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
