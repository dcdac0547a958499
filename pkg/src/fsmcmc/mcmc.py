"""Metropolis-Hastings on whitened coordinates with prior-reversible proposals.

Chains live on the real whitened vector ``x`` (prior ``N(0, I)``). Because the
proposal keeps the prior invariant, the acceptance probability only involves
the potential: ``alpha = min(1, exp(Phi(x) - Phi(x')))``.
"""

from __future__ import annotations

import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .proposals import WeightOperator, propose
from .spectral import GaussianMeasure, SpectralField, coefficients_to_real

log = logging.getLogger(__name__)

FORWARD_FAILURES = (ArithmeticError, np.linalg.LinAlgError)

FLAG_OK = 0
FLAG_NAN = 1
FLAG_FORWARD_FAILURE = 2


def substream(master_seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named purpose (``"data"``, ``"chain-3"``, ...)."""
    key = zlib.crc32(name.encode())
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(key,)))


class Potential:
    """``Phi(u) = |G(u) - y|^2 / (2 gamma^2)`` evaluated at whitened ``x``.

    ``model`` needs an ``evaluate(coefficients) -> observations`` method.
    Every call increments :attr:`n_evals`.
    """

    def __init__(self, model, data: np.ndarray, gamma: float, prior: GaussianMeasure):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        data = np.asarray(data, dtype=float)
        if hasattr(model, "observation_dim") and data.shape != (model.observation_dim,):
            raise ValueError(f"data has shape {data.shape}, model observes {model.observation_dim} values")
        self.model = model
        self.data = data
        self.gamma = float(gamma)
        self.prior = prior
        self.n_evals = 0

    def __call__(self, x: np.ndarray) -> float:
        self.n_evals += 1
        r = self.model.evaluate(self.prior.unwhiten_real(x)) - self.data
        return 0.5 * float(r @ r) / self.gamma ** 2


class ZeroPotential:
    """``Phi = 0``: no data, the chain is the proposal chain."""

    def __init__(self):
        self.n_evals = 0

    def __call__(self, x) -> float:
        self.n_evals += 1
        return 0.0


class QuadraticPotential:
    """``Phi(x) = |x - y|^2 / (2 gamma^2)``: identity forward map in whitened coordinates."""

    def __init__(self, data, gamma: float):
        self.data = np.asarray(data, dtype=float)
        self.gamma = float(gamma)
        self.n_evals = 0

    def __call__(self, x) -> float:
        self.n_evals += 1
        r = np.asarray(x) - self.data
        return 0.5 * float(r @ r) / self.gamma ** 2


def potential_eval(p: Potential, u_whitened: SpectralField, prior: GaussianMeasure) -> float:
    if u_whitened.basis != prior.basis:
        from .spectral import BasisMismatchError
        raise BasisMismatchError("field and prior live on different bases")
    return p(coefficients_to_real(prior.basis, u_whitened.coefficients))


def accept_probability(phi_current: float, phi_proposed: float) -> float:
    """``min(1, exp(phi_current - phi_proposed))``; NaN inputs give 0."""
    d = phi_current - phi_proposed
    if np.isnan(d):
        return 0.0
    return 1.0 if d >= 0 else float(np.exp(d))


@dataclass(frozen=True, eq=False)
class ChainState:
    x: np.ndarray
    phi: float
    rng: np.random.Generator
    step: int = 0
    n_accepted: int = 0
    alpha: float = 1.0
    accepted: bool = True
    flag: int = FLAG_OK


def initial_state(x0: np.ndarray, potential, rng: np.random.Generator) -> ChainState:
    x0 = np.asarray(x0, dtype=float).copy()
    return ChainState(x0, potential(x0), rng)


def mh_step(state: ChainState, B: WeightOperator, potential) -> ChainState:
    """One Metropolis-Hastings transition; the potential is evaluated once."""
    rng = state.rng
    proposal = propose(state.x, B, rng)
    log_u = np.log(rng.random())
    flag = FLAG_OK
    try:
        phi_new = potential(proposal)
    except FORWARD_FAILURES as err:
        log.warning("forward evaluation failed at step %d: %s", state.step + 1, err)
        phi_new = np.nan
        flag = FLAG_FORWARD_FAILURE
    if np.isnan(phi_new) and flag == FLAG_OK:
        flag = FLAG_NAN
    alpha = accept_probability(state.phi, phi_new)
    if flag == FLAG_OK and log_u < state.phi - phi_new:
        return ChainState(proposal, phi_new, rng, state.step + 1, state.n_accepted + 1, alpha, True)
    return replace(state, step=state.step + 1, alpha=alpha, accepted=False, flag=flag)


@dataclass(frozen=True)
class AdaptationSchedule:
    """Robbins-Monro tuning of ``beta`` during the first ``n_steps`` steps.

    ``log beta <- log beta + n^{-decay} (alpha_n - target)``, clipped to
    ``[beta_min, beta_max]``, then frozen.
    """

    target: float = 0.3
    n_steps: int = 1000
    decay: float = 0.6
    beta_min: float = 1e-4
    beta_max: float = 1.0

    def __post_init__(self):
        if not 0 < self.target < 1:
            raise ValueError("target acceptance must lie in (0, 1)")
        if not 0 < self.beta_min <= self.beta_max <= 1:
            raise ValueError("need 0 < beta_min <= beta_max <= 1")
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")

    def update(self, beta: float, n: int, alpha: float) -> float:
        lb = np.log(beta) + n ** (-self.decay) * (alpha - self.target)
        return float(np.clip(np.exp(lb), self.beta_min, self.beta_max))


class Recorder:
    """Maps a whitened state to the recorded columns.

    ``modes=None`` records every whitened real coordinate. Otherwise the
    unwhitened coefficients of the listed modes are recorded: one column per
    sine mode, a (re, im) pair per torus mode.
    """

    def __init__(self, prior: GaussianMeasure, modes=None):
        basis = prior.basis
        self.prior = prior
        if modes is None:
            self.whitened = True
            self.labels = basis.real_labels()
            self._idx = None
            return
        self.whitened = False
        idx = [basis.index_of(m) for m in modes]
        self._idx = np.array(idx, dtype=np.int64)
        sc = prior.sqrt_eigenvalues[self._idx]
        mean = prior.mean.coefficients[self._idx]
        n = basis.n_modes
        if basis.kind == "sine":
            self.labels = [f"k={int(m)}" for m in modes]
            self._cols = self._idx
            self._scale = sc
            self._shift = mean
        else:
            self.labels = []
            for m in modes:
                k1, k2 = basis.wavevectors[basis.index_of(m)]
                self.labels += [f"({k1},{k2}).re", f"({k1},{k2}).im"]
            self._cols = np.stack([self._idx, self._idx + n], axis=1).ravel()
            self._scale = np.repeat(sc / np.sqrt(2.0), 2)
            self._shift = np.stack([mean.real, mean.imag], axis=1).ravel()

    @property
    def n_columns(self) -> int:
        return len(self.labels)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self._idx is None:
            return x
        return self._scale * x[self._cols] + self._shift


@dataclass
class ChainRecord:
    """Sample stream of one chain.

    ``values[n]`` holds the recorded columns after step ``n + 1``;
    ``production[n]`` marks steps after burn-in/adaptation.
    """

    labels: list
    phi: np.ndarray
    accepted: np.ndarray
    alpha: np.ndarray
    flags: np.ndarray
    beta: np.ndarray
    values: np.ndarray
    production_start: int = 0
    header: dict = field(default_factory=dict)
    final_state: np.ndarray | None = None
    partial: bool = False

    def __len__(self):
        return len(self.phi)

    @property
    def step(self) -> np.ndarray:
        return np.arange(1, len(self) + 1)

    @property
    def production(self) -> np.ndarray:
        return self.step > self.production_start

    @property
    def acceptance_rate(self) -> float:
        a = self.accepted[self.production_start:]
        return float(a.mean()) if len(a) else float("nan")

    @property
    def mean_alpha(self) -> float:
        a = self.alpha[self.production_start:]
        return float(a.mean()) if len(a) else float("nan")

    def production_values(self) -> np.ndarray:
        return self.values[self.production_start:]

    def column(self, label: str) -> np.ndarray:
        return self.production_values()[:, self.labels.index(label)]


def run_chain(x0: np.ndarray, B: WeightOperator, potential, n_steps: int, rng: np.random.Generator,
              recorder: Recorder | None = None, schedule: AdaptationSchedule | None = None,
              burn_in: int | None = None, header: dict | None = None, writer=None) -> ChainRecord:
    """Run ``n_steps`` MH transitions from whitened ``x0``.

    With a schedule, ``beta`` is adapted during the first ``schedule.n_steps``
    steps and frozen afterwards. Steps before ``burn_in`` (default: the
    adaptation length, or 0) are kept in the record but not marked production.
    ``writer`` (see :class:`fsmcmc.io.ChainWriter`) receives the record in
    chunks; an ``OSError`` from it stops the chain and marks the record partial.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    n_adapt = schedule.n_steps if schedule is not None else 0
    burn_in = n_adapt if burn_in is None else burn_in
    if recorder is None:
        recorder = Recorder(potential.prior) if hasattr(potential, "prior") else None
    ncol = recorder.n_columns if recorder is not None else len(x0)
    labels = recorder.labels if recorder is not None else [str(i) for i in range(len(x0))]
    record = lambda x: recorder(x) if recorder is not None else x  # noqa: E731

    phi = np.empty(n_steps)
    accepted = np.zeros(n_steps, dtype=bool)
    alpha = np.empty(n_steps)
    flags = np.zeros(n_steps, dtype=np.int8)
    betas = np.empty(n_steps)
    values = np.empty((n_steps, ncol))
    evals0 = getattr(potential, "n_evals", 0)
    state = initial_state(x0, potential, rng)
    beta = B.beta
    partial = False
    done = 0
    for n in range(n_steps):
        state = mh_step(state, B, potential)
        phi[n] = state.phi
        accepted[n] = state.accepted
        alpha[n] = state.alpha
        flags[n] = state.flag
        betas[n] = beta
        values[n] = record(state.x)
        done = n + 1
        if n < n_adapt:
            new_beta = schedule.update(beta, n + 1, state.alpha)
            if new_beta != beta:
                beta = new_beta
                B = B.with_beta(beta)
        if writer is not None and writer.due(done):
            try:
                writer.append(phi, accepted, alpha, flags, betas, values, done)
            except OSError as err:
                log.error("persisting chain failed after %d steps: %s", done, err)
                partial = True
                break
    hdr = dict(header or {})
    hdr.update({"n_steps": done, "beta_final": float(beta), "operator": B.describe(),
                "n_potential_evals": int(getattr(potential, "n_evals", evals0 - 1) - evals0)})
    rec = ChainRecord(labels, phi[:done], accepted[:done], alpha[:done], flags[:done], betas[:done],
                      values[:done], min(burn_in, done), hdr, state.x.copy(), partial)
    if writer is not None and not partial:
        try:
            writer.append(phi, accepted, alpha, flags, betas, values, done)
            writer.finish(rec)
        except OSError as err:
            log.error("finalising chain file failed: %s", err)
            rec.partial = True
    return rec


@dataclass
class ChainTask:
    """Everything one chain of an ensemble needs; picklable for process pools."""

    x0: np.ndarray
    B: WeightOperator
    potential: object
    n_steps: int
    seed: int
    name: str
    recorder: Recorder | None = None
    schedule: AdaptationSchedule | None = None
    burn_in: int | None = None
    header: dict = field(default_factory=dict)
    path: str | None = None


def _run_task(task: ChainTask) -> ChainRecord:
    rng = substream(task.seed, task.name)
    header = {**task.header, "seed": task.seed, "stream": task.name}
    writer = None
    if task.path is not None:
        from .io import ChainWriter
        writer = ChainWriter(task.path, task.recorder.labels if task.recorder else None, header)
    try:
        x0 = task.x0 if task.x0 is not None else rng.standard_normal(task.B.dim)
        return run_chain(x0, task.B, task.potential, task.n_steps, rng, task.recorder,
                         task.schedule, task.burn_in, header, writer)
    finally:
        if writer is not None:
            writer.close()


def run_ensemble(tasks: list[ChainTask], workers: int = 1) -> list:
    """Run independent chains, concurrently when ``workers > 1``.

    A chain that raises is reported as the exception object in its slot, so
    one failure does not discard the others.
    """
    if not tasks:
        raise ValueError("need at least one chain")

    def guard(fut_or_task, call):
        try:
            return call(fut_or_task)
        except Exception as err:  # noqa: BLE001 - isolate per-chain failures
            log.error("chain failed: %s", err)
            return err

    if workers <= 1 or len(tasks) == 1:
        return [guard(t, _run_task) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_task, t) for t in tasks]
        return [guard(f, lambda f: f.result()) for f in futures]
