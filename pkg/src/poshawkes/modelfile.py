"""Versioned flat-text ``key = value`` serialization of fitted models.

Floats are written with ``repr`` so a load/save round trip is exact. Keys are
namespaced with dots (``beta.protest``, ``p0.<origin id>``); sequences are
comma-separated. No timestamps are written, so equal fits give equal bytes.
"""

import hashlib

import numpy as np

from .background import BackgroundModel
from .baselines import NhppModel, RetweetRegression
from .covariates import COVARIATE_NAMES
from .errors import DataError
from .events import EmpiricalDistributions
from .influence_fit import InfluenceFit
from .intensity import HawkesModel
from .kernels import KernelMode

FORMAT_VERSION = 1
MAGIC = "# poshawkes model file"


def dataset_fingerprint(ds):
    """SHA-256 over the canonical ``(id, parent, time, followers, pos)`` rows of ``ds``."""
    h = hashlib.sha256()
    h.update(f"{ds.t_a!r},{ds.t_b!r}\n".encode())
    for c in ds.cascades:
        for m in c.members:
            h.update(f"{m.event_id},{m.parent_id or ''},{m.time_s!r},{m.followers},{m.pos}\n".encode())
    return h.hexdigest()


def _floats(values):
    return ",".join(repr(float(v)) for v in values)


def _ints(values):
    return ",".join(str(int(v)) for v in values)


def _parse_floats(text):
    return tuple(float(x) for x in text.split(",")) if text else ()


def _parse_ints(text):
    return tuple(int(x) for x in text.split(",")) if text else ()


def _check_key(key):
    if "\n" in key or "=" in key or key != key.strip():
        raise DataError(f"identifier {key!r} cannot be stored in a model file")


def _beta_lines(prefix, coef):
    return [(f"{prefix}.{name}", repr(float(v))) for name, v in zip(COVARIATE_NAMES, coef)]


def _dists_lines(d):
    return [
        ("dists.pos", _ints(d.pos_samples)),
        ("dists.followers", _ints(d.follower_samples)),
        ("dists.p0", _floats(d.p0_samples)),
    ]


def _background_lines(bg):
    out = _beta_lines("beta", bg.beta) + [("background.ridge", repr(float(bg.ridge)))]
    for k in ("iterations", "grad_inf", "n_events"):
        if k in bg.meta:
            out.append((f"background.{k}", repr(bg.meta[k])))
    return out


def dumps(model, fingerprint="", meta=None):
    """Serialize a ``HawkesModel``, ``NhppModel`` or ``(BackgroundModel, RetweetRegression, dists)``."""
    lines = [("format_version", str(FORMAT_VERSION))]
    if isinstance(model, HawkesModel):
        inf = model.influence
        lines += [("kind", "hawkes"), ("kernel_mode", model.mode.value),
                  ("t_a", repr(float(model.t_a))), ("t_b", repr(float(model.t_b)))]
        lines += _background_lines(model.background)
        lines += [
            ("influence.r0", repr(float(inf.r0))),
            ("influence.phi0", repr(float(inf.phi0))),
            ("influence.tau_m", repr(float(inf.tau_m))),
            ("influence.period", repr(float(inf.period))),
            ("influence.window_s", repr(float(inf.window_s))),
            ("influence.loss", repr(float(inf.loss))),
            ("influence.iterations", str(int(inf.meta.get("iterations", 0)))),
            ("influence.n_windows", str(int(inf.meta.get("n_windows", 0)))),
            ("influence.warnings", ";".join(inf.meta.get("warnings", []))),
        ]
        lines += _dists_lines(model.dists)
        for oid in sorted(inf.p0_by_origin):
            _check_key(oid)
            lines.append((f"p0.{oid}", repr(float(inf.p0_by_origin[oid]))))
    elif isinstance(model, NhppModel):
        lines += [("kind", "nhpp")] + _beta_lines("gamma", model.gamma) + [("nhpp.ridge", repr(float(model.ridge)))]
    elif isinstance(model, tuple) and len(model) == 3 and isinstance(model[1], RetweetRegression):
        bg, reg, dists = model
        lines += [("kind", "regression")] + _background_lines(bg)
        lines += [(f"regression.weight.{f}", repr(float(w))) for f, w in zip(reg.features, reg.weights)]
        lines += [("regression.early_window_s", repr(float(reg.early_window_s))),
                  ("regression.features", ",".join(reg.features))]
        lines += _dists_lines(dists)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    lines.append(("dataset.fingerprint", fingerprint))
    for k, v in sorted((meta or {}).items()):
        _check_key(k)
        lines.append((f"meta.{k}", str(v).replace("\n", " ")))
    return MAGIC + "\n" + "".join(f"{k} = {v}\n" for k, v in lines)


def _parse(text):
    kv = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"model file: expected 'key = value', got {raw!r}", line=n)
        kv[key.strip()] = value.strip()
    return kv


def _need(kv, key):
    try:
        return kv[key]
    except KeyError:
        raise DataError(f"model file is missing {key!r}") from None


def _coef(kv, prefix):
    return np.array([float(_need(kv, f"{prefix}.{n}")) for n in COVARIATE_NAMES])


def _background(kv):
    meta = {}
    for k, cast in (("iterations", int), ("grad_inf", float), ("n_events", int)):
        if f"background.{k}" in kv:
            meta[k] = cast(kv[f"background.{k}"])
    return BackgroundModel(_coef(kv, "beta"), float(_need(kv, "background.ridge")), meta)


def _dists(kv):
    return EmpiricalDistributions(
        _parse_ints(kv.get("dists.pos", "")),
        _parse_ints(kv.get("dists.followers", "")),
        _parse_floats(kv.get("dists.p0", "")),
    )


def loads(text):
    """Inverse of :func:`dumps`; returns ``(model, info)``."""
    kv = _parse(text)
    version = _need(kv, "format_version")
    if version != str(FORMAT_VERSION):
        raise DataError(f"unsupported model file version {version} (expected {FORMAT_VERSION})")
    kind = _need(kv, "kind")
    info = {
        "kind": kind,
        "fingerprint": kv.get("dataset.fingerprint", ""),
        "meta": {k[5:]: v for k, v in kv.items() if k.startswith("meta.")},
    }
    if kind == "hawkes":
        mode = KernelMode.parse(_need(kv, "kernel_mode"))
        warnings = [w for w in kv.get("influence.warnings", "").split(";") if w]
        p0 = {k[3:]: float(v) for k, v in kv.items() if k.startswith("p0.")}
        inf = InfluenceFit(
            p0,
            float(_need(kv, "influence.r0")),
            float(_need(kv, "influence.phi0")),
            float(_need(kv, "influence.tau_m")),
            float(_need(kv, "influence.loss")),
            mode,
            float(_need(kv, "influence.window_s")),
            float(_need(kv, "influence.period")),
            {"iterations": int(kv.get("influence.iterations", 0)), "warnings": warnings,
             "n_windows": int(kv.get("influence.n_windows", 0))},
        )
        model = HawkesModel(_background(kv), inf, _dists(kv), mode,
                            float(_need(kv, "t_b")), float(_need(kv, "t_a")))
    elif kind == "nhpp":
        model = NhppModel(_coef(kv, "gamma"), float(_need(kv, "nhpp.ridge")))
    elif kind == "regression":
        features = tuple(_need(kv, "regression.features").split(","))
        w = np.array([float(_need(kv, f"regression.weight.{f}")) for f in features])
        reg = RetweetRegression(w, float(_need(kv, "regression.early_window_s")), features)
        model = (_background(kv), reg, _dists(kv))
    else:
        raise DataError(f"unknown model kind {kind!r}")
    return model, info


def save(path, model, fingerprint="", meta=None):
    text = dumps(model, fingerprint, meta)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return text


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
