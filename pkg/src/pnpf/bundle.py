"""Model persistence: a versioned JSON container with base64-packed float64
arrays.  Round-trips are byte-identical."""

from __future__ import annotations

import base64
import json

import numpy as np

from .energyfields import EnergyField
from .errors import PnpfError
from .model import BUNDLE_VERSION, PnpfModel
from .nets import FilmMLP
from .safeset import SafetySamples
from .trajgen import GeneratorModel, NominalTrajectory

__all__ = ["save_model", "load_model"]


def _enc(a) -> dict:
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    return {"shape": list(a.shape),
            "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _dec(d) -> np.ndarray:
    a = np.frombuffer(base64.b64decode(d["data"]), dtype=np.float64)
    return a.reshape(d["shape"]).copy()


def _scalar_or_array(v):
    return _enc(v) if isinstance(v, np.ndarray) else float(v)


def _load_scalar_or_array(v):
    return _dec(v) if isinstance(v, dict) else float(v)


def _pack_net(net: FilmMLP) -> dict:
    return {"arch": net.arch(), "params": {k: _enc(v) for k, v in net.params.items()}}


def _unpack_net(doc: dict) -> FilmMLP:
    net = FilmMLP(**doc["arch"])
    for k in net.params:
        net.params[k] = _dec(doc["params"][k])
    return net


def _pack_field(f: EnergyField) -> dict:
    return {
        "net": _pack_net(f.net), "kind": f.kind, "periodic": f.periodic,
        "num_frequencies": f.num_frequencies, "s_total": f.s_total,
        "x_mean": _enc(f.x_mean), "x_scale": _scalar_or_array(f.x_scale),
        "target_mean": f.target_mean, "target_scale": f.target_scale,
        "s_range": list(f.s_range),
    }


def _unpack_field(doc: dict) -> EnergyField:
    return EnergyField(net=_unpack_net(doc["net"]), kind=doc["kind"],
                       periodic=doc["periodic"],
                       num_frequencies=doc["num_frequencies"],
                       s_total=doc["s_total"], x_mean=_dec(doc["x_mean"]),
                       x_scale=_load_scalar_or_array(doc["x_scale"]),
                       target_mean=doc["target_mean"],
                       target_scale=doc["target_scale"],
                       s_range=tuple(doc["s_range"]))


def save_model(model: PnpfModel, path):
    doc = {
        "version": BUNDLE_VERSION,
        "mode": model.mode, "dim": model.dim,
        "s_w": model.s_w, "lambda_slope": model.lambda_slope,
        "alpha": model.alpha, "v_max": model.v_max,
        "nominal": {
            "points": _enc(model.nominal.points), "s": _enc(model.nominal.s),
            "s0": model.nominal.s0, "n_ext": model.nominal.n_ext,
            "mode": model.nominal.mode, "s_period": model.nominal.s_period,
        },
        "nominal_field": _pack_field(model.nominal_field),
        "safety_field": _pack_field(model.safety_field),
        "samples": {
            "x_in": _enc(model.samples.x_in), "s_in": _enc(model.samples.s_in),
            "x_out": _enc(model.samples.x_out),
            "eps_sdf": model.samples.eps_sdf,
            "bounds": _enc(model.samples.bounds),
        },
    }
    if model.generator is not None:
        g = model.generator
        doc["generator"] = {
            "net": _pack_net(g.net), "embeddings": _enc(g.embeddings),
            "mode": g.mode, "period": g.period, "x_mean": _enc(g.x_mean),
            "x_scale": _scalar_or_array(g.x_scale),
            "n_time_points": g.n_time_points,
        }
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True)


def load_model(path) -> PnpfModel:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise PnpfError(f"malformed bundle {path}: line {e.lineno}: {e.msg}") from e
    if doc.get("version") != BUNDLE_VERSION:
        raise PnpfError(f"unsupported bundle version in {path}")
    nom = doc["nominal"]
    nominal = NominalTrajectory(points=_dec(nom["points"]), s=_dec(nom["s"]),
                                s0=nom["s0"], n_ext=nom["n_ext"],
                                mode=nom["mode"], s_period=nom["s_period"])
    sm = doc["samples"]
    samples = SafetySamples(x_in=_dec(sm["x_in"]), s_in=_dec(sm["s_in"]),
                            x_out=_dec(sm["x_out"]), eps_sdf=sm["eps_sdf"],
                            bounds=_dec(sm["bounds"]))
    generator = None
    if "generator" in doc:
        g = doc["generator"]
        generator = GeneratorModel(net=_unpack_net(g["net"]),
                                   embeddings=_dec(g["embeddings"]),
                                   mode=g["mode"], period=g["period"],
                                   x_mean=_dec(g["x_mean"]),
                                   x_scale=_load_scalar_or_array(g["x_scale"]),
                                   n_time_points=g["n_time_points"])
    return PnpfModel(mode=doc["mode"], dim=doc["dim"], nominal=nominal,
                     nominal_field=_unpack_field(doc["nominal_field"]),
                     safety_field=_unpack_field(doc["safety_field"]),
                     samples=samples, s_w=doc["s_w"],
                     lambda_slope=doc["lambda_slope"], alpha=doc["alpha"],
                     v_max=doc["v_max"], generator=generator)
