"""HDF5 persistence for fields, operators, curvature, observations and chains.

Files are written without timestamps so identical content gives identical
bytes. Headers are stored as a JSON string attribute named ``header``.
"""

from __future__ import annotations

import json

import h5py
import numpy as np

from .curvature import LowRankCurvature
from .mcmc import ChainRecord
from .proposals import WeightOperator
from .spectral import Basis, SpectralField

FORMAT_VERSION = 1


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o)}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_json_default)


def _dataset(group, name, data):
    return group.create_dataset(name, data=data, track_times=False)


def _header(f, kind: str, header: dict | None):
    f.attrs["format"] = f"fsmcmc/{kind}"
    f.attrs["version"] = FORMAT_VERSION
    f.attrs["header"] = dumps(header or {})


def read_header(path) -> dict:
    with h5py.File(path, "r") as f:
        return json.loads(f.attrs["header"])


def _expect(f, kind):
    fmt = f.attrs.get("format", "")
    if fmt != f"fsmcmc/{kind}":
        raise ValueError(f"{f.filename}: expected a {kind} file, found {fmt!r}")


# fields -------------------------------------------------------------------

def _write_field(group, name, u: SpectralField):
    ds = _dataset(group, name, u.coefficients)
    ds.attrs["basis_kind"] = u.basis.kind
    ds.attrs["K"] = u.basis.K


def _read_field(group, name) -> SpectralField:
    ds = group[name]
    return SpectralField(Basis(str(ds.attrs["basis_kind"]), int(ds.attrs["K"])), ds[()])


def save_field(path, u: SpectralField, header: dict | None = None):
    with h5py.File(path, "w") as f:
        _header(f, "field", header)
        _write_field(f, "coefficients", u)


def load_field(path) -> SpectralField:
    with h5py.File(path, "r") as f:
        _expect(f, "field")
        return _read_field(f, "coefficients")


# operators ----------------------------------------------------------------

def _write_operator(group, B: WeightOperator):
    g = group.create_group("operator", track_order=False)
    g.attrs["dim"] = B.dim
    g.attrs["beta"] = B.beta
    g.attrs["variant"] = B.variant
    g.attrs["complement_profile"] = B.complement_profile
    g.attrs["meta"] = dumps(B.meta)
    _dataset(g, "profile", B.profile)
    _dataset(g, "weights", B.weights)
    if B.axes is not None:
        _dataset(g, "axes", B.axes)
    else:
        _dataset(g, "vectors", B.vectors)


def _read_operator(group) -> WeightOperator:
    g = group["operator"]
    kw = {"axes": g["axes"][()]} if "axes" in g else {"vectors": g["vectors"][()]}
    return WeightOperator(int(g.attrs["dim"]), float(g.attrs["beta"]), g["profile"][()],
                          float(g.attrs["complement_profile"]), variant=str(g.attrs["variant"]),
                          meta=json.loads(g.attrs["meta"]), **kw)


def _write_curvature(group, c: LowRankCurvature):
    g = group.create_group("curvature")
    _dataset(g, "eigenvalues", c.eigenvalues)
    _dataset(g, "eigenvectors", c.eigenvectors)
    if c.linearization_point is not None:
        _dataset(g, "linearization_point", c.linearization_point)
    g.attrs["residual_estimate"] = c.residual_estimate
    g.attrs["converged"] = bool(c.converged)
    g.attrs["n_applies"] = c.n_applies
    g.attrs["meta"] = dumps(c.meta)


def _read_curvature(group) -> LowRankCurvature:
    g = group["curvature"]
    w = g["linearization_point"][()] if "linearization_point" in g else None
    return LowRankCurvature(g["eigenvalues"][()], g["eigenvectors"][()], float(g.attrs["residual_estimate"]),
                            bool(g.attrs["converged"]), int(g.attrs["n_applies"]), w,
                            json.loads(g.attrs["meta"]))


def save_operator(path, B: WeightOperator, curvature: LowRankCurvature | None = None,
                  header: dict | None = None, extra: dict | None = None):
    """Persist a tuned operator (and the curvature it came from)."""
    with h5py.File(path, "w") as f:
        _header(f, "operator", header)
        _write_operator(f, B)
        if curvature is not None:
            _write_curvature(f, curvature)
        for name, arr in (extra or {}).items():
            _dataset(f, name, np.asarray(arr))


def load_operator(path) -> tuple[WeightOperator, LowRankCurvature | None, dict]:
    with h5py.File(path, "r") as f:
        _expect(f, "operator")
        B = _read_operator(f)
        c = _read_curvature(f) if "curvature" in f else None
        extra = {k: f[k][()] for k in f.keys() if k not in ("operator", "curvature")}
        return B, c, extra


# observations ---------------------------------------------------------------

def save_observations(path, y: np.ndarray, truth: SpectralField, header: dict):
    with h5py.File(path, "w") as f:
        _header(f, "observations", header)
        _dataset(f, "y", np.asarray(y, dtype=float))
        _write_field(f, "truth", truth)


def load_observations(path) -> tuple[np.ndarray, SpectralField, dict]:
    with h5py.File(path, "r") as f:
        _expect(f, "observations")
        return f["y"][()], _read_field(f, "truth"), json.loads(f.attrs["header"])


# chain records --------------------------------------------------------------

_COLUMNS = ("phi", "accepted", "alpha", "flags", "beta")
_DTYPES = {"phi": "f8", "accepted": "?", "alpha": "f8", "flags": "i1", "beta": "f8"}


class ChainWriter:
    """Append-only chain file; columns grow in chunks while the chain runs."""

    def __init__(self, path, labels, header: dict | None = None, chunk: int = 4096):
        self.path = path
        self.chunk = chunk
        self.written = 0
        self.f = h5py.File(path, "w")
        _header(self.f, "chain", header)
        self.f.attrs["labels"] = dumps(labels or [])
        self.f.attrs["complete"] = False
        body = self.f.create_group("body")
        for name in _COLUMNS:
            body.create_dataset(name, shape=(0,), maxshape=(None,), dtype=_DTYPES[name],
                                chunks=(chunk,), track_times=False)
        self._ncol = None

    def due(self, done: int) -> bool:
        return done - self.written >= self.chunk

    def append(self, phi, accepted, alpha, flags, beta, values, done: int):
        if done <= self.written:
            return
        body = self.f["body"]
        if self._ncol is None:
            self._ncol = values.shape[1]
            body.create_dataset("values", shape=(0, self._ncol), maxshape=(None, self._ncol), dtype="f8",
                                chunks=(self.chunk, max(self._ncol, 1)), track_times=False)
        sl = slice(self.written, done)
        for name, arr in zip(_COLUMNS, (phi, accepted, alpha, flags, beta)):
            ds = body[name]
            ds.resize((done,))
            ds[sl] = arr[sl]
        ds = body["values"]
        ds.resize((done, self._ncol))
        ds[sl] = values[sl]
        self.written = done
        self.f.flush()

    def finish(self, rec: ChainRecord):
        self.f.attrs["header"] = dumps(rec.header)
        self.f.attrs["production_start"] = rec.production_start
        self.f.attrs["complete"] = not rec.partial
        if rec.final_state is not None:
            _dataset(self.f, "final_state", rec.final_state)

    def close(self):
        if self.f:
            self.f.close()
            self.f = None


def save_record(path, rec: ChainRecord):
    w = ChainWriter(path, rec.labels, rec.header, chunk=max(1, min(len(rec), 65536)))
    try:
        w.append(rec.phi, rec.accepted, rec.alpha, rec.flags, rec.beta, rec.values, len(rec))
        w.finish(rec)
    finally:
        w.close()


def load_record(path) -> ChainRecord:
    with h5py.File(path, "r") as f:
        _expect(f, "chain")
        b = f["body"]
        values = b["values"][()] if "values" in b else np.zeros((b["phi"].shape[0], 0))
        return ChainRecord(json.loads(f.attrs["labels"]), b["phi"][()], b["accepted"][()], b["alpha"][()],
                           b["flags"][()], b["beta"][()], values, int(f.attrs.get("production_start", 0)),
                           json.loads(f.attrs["header"]),
                           f["final_state"][()] if "final_state" in f else None,
                           not bool(f.attrs["complete"]))
