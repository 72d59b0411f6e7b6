"""Monte Carlo experiments, blindness statistics and robustness sweeps.

Every trial gets its own seed sequence derived from the master seed and the
trial index, so summaries do not depend on how trials are spread over
worker processes.
"""

from __future__ import annotations

import json
import math
import time
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import chisquare

from . import rng as rngmod
from .adversary import (
    Attack,
    Honest,
    Malicious,
    NoiseModel,
    Noisy,
    ServerBehaviour,
    analytic_p_bounds,
    dephasing_noise,
    depolarizing_noise,
    estimate_p_bounds,
    sigma_m_attack,
)
from .bounds import (
    InfeasibleError,
    RobustnessParams,
    abort_probability_bound,
    composable_epsilon,
    correctness_epsilon,
    optimize_verifiability_bound,
)
from .graph import (
    Colouring,
    bipartite_colouring,
    colouring_from_classes,
    greedy_colouring,
)
from .library import resolve_pattern
from .pattern import MeasurementPattern
from .protocol import (
    Accept,
    ProtocolParams,
    RedoSettings,
    classical_model,
    run_protocol,
)
from .statevector import pauli_channel
from .ubqc import (
    RedoRequested,
    Server,
    ServerOptions,
    reference_output,
    run_with_server,
    sample_computation_secrets,
    sample_test_secrets,
)

SUMMARY_SCHEMA = "vbqc.summary/1"
CONFIG_FIELDS = {
    "pattern", "colouring", "classes", "params", "behaviour", "trials", "seed",
    "jobs", "out", "redo", "engine", "input", "schema",
}


# --- configuration ----------------------------------------------------------------


def make_behaviour(preset: Mapping | None) -> ServerBehaviour:
    """Build a Server behaviour from a preset description.

    ``{"kind": "honest"}``, ``{"kind": "depolarizing", "p": 0.05}``,
    ``{"kind": "dephasing", "q": 0.1}``, ``{"kind": "pauli", "px": .., "py": .., "pz": ..}``,
    ``{"kind": "sigma_m", "m": 4, "target": 1}`` or
    ``{"kind": "attack", "runs": {"0": [[1, "X"]]}}``. Noise presets accept
    an optional ``"schedule"``.
    """
    if preset is None:
        return Honest()
    kind = preset.get("kind", "honest")
    schedule = preset.get("schedule", "after_entangle")
    if kind == "honest":
        return Honest()
    if kind == "depolarizing":
        return Noisy(depolarizing_noise(float(preset["p"]), schedule))
    if kind == "dephasing":
        return Noisy(dephasing_noise(float(preset["q"]), schedule))
    if kind == "pauli":
        ch = pauli_channel(float(preset.get("px", 0)), float(preset.get("py", 0)), float(preset.get("pz", 0)))
        return Noisy(NoiseModel(ch, schedule, label="pauli"))
    if kind == "sigma_m":
        return Malicious(sigma_m_attack(int(preset["m"]), int(preset["target"]), pauli=preset.get("pauli", "X")))
    if kind == "attack":
        runs = {int(j): tuple((int(v), str(pa)) for v, pa in devs) for j, devs in preset["runs"].items()}
        return Malicious(Attack(runs))
    raise ValueError(f"unknown behaviour kind {kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    pattern: str = "identity"
    colouring: str = "greedy"  # greedy | bipartite | explicit
    classes: tuple[tuple[int, ...], ...] | None = None
    params: Mapping[str, int] = field(default_factory=lambda: {"n": 5, "d": 3, "t": 2, "w": 1})
    behaviour: Mapping | None = None
    trials: int = 100
    seed: int = 0
    jobs: int = 1
    out: str | None = None
    redo: Mapping[str, float] | None = None
    engine: str = "quantum"
    input: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.colouring not in ("greedy", "bipartite", "explicit"):
            raise ValueError("colouring must be greedy, bipartite or explicit")
        if self.colouring == "explicit" and not self.classes:
            raise ValueError("explicit colouring needs 'classes'")
        if self.engine not in ("quantum", "classical"):
            raise ValueError("engine must be quantum or classical")

    @classmethod
    def from_dict(cls, data: Mapping) -> ExperimentConfig:
        unknown = set(data) - CONFIG_FIELDS
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        data = {k: v for k, v in data.items() if k != "schema"}
        if data.get("classes") is not None:
            data["classes"] = tuple(tuple(c) for c in data["classes"])
        if data.get("input") is not None:
            data["input"] = tuple(data["input"])
        return cls(**data)

    @classmethod
    def load(cls, path: str) -> ExperimentConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["params"] = dict(self.params)
        return out

    # resolved pieces

    def resolve_pattern(self) -> MeasurementPattern:
        return resolve_pattern(self.pattern)

    def resolve_colouring(self, p: MeasurementPattern) -> Colouring:
        if self.colouring == "explicit":
            return colouring_from_classes(self.classes)
        if self.colouring == "bipartite":
            c = bipartite_colouring(p.graph, p.order)
            if c is None:
                raise ValueError(f"pattern {p.name!r} is not bipartite")
            return c
        return greedy_colouring(p.graph, p.order)

    def resolve_params(self, k: int) -> ProtocolParams:
        prm = dict(self.params)
        if "d" not in prm:
            return ProtocolParams.from_ratios(prm["n"], prm.get("delta_ratio", 0.5), prm["omega"], k)
        n = prm.get("n", prm["d"] + prm.get("t", 0))
        t = prm.get("t", n - prm["d"])
        w = prm["w"] if "w" in prm else int(math.ceil(prm["omega"] * t - 1e-12))
        return ProtocolParams(n=n, d=prm["d"], t=t, w=w, k=k)

    def nominal_omega(self, params: ProtocolParams) -> float:
        """The configured ``omega`` if given, else ``w/t``.

        With ``w = ceil(omega t)``, accepting ``Y < w`` implies ``Y <= omega t``,
        so bounds evaluated at the nominal ``omega`` cover the run.
        """
        return float(self.params.get("omega", params.omega))

    def resolve_input(self, p: MeasurementPattern) -> tuple[int, ...]:
        return tuple(self.input) if self.input is not None else (0,) * len(p.graph.inputs)

    def resolve_redo(self) -> RedoSettings:
        r = dict(self.redo or {})
        return RedoSettings(
            server_rate=float(r.get("server_rate", 0.0)),
            client_rate=float(r.get("client_rate", 0.0)),
            p_succ=r.get("p_succ"),
        )


@dataclass
class Summary:
    trials: int
    accept: int = 0
    abort: int = 0
    correct_accept: int = 0
    incorrect_accept: int = 0
    mean_c_fail: float = 0.0
    colour_trap_failure: dict[int, float] = field(default_factory=dict)
    redo_total: int = 0
    bounds: dict = field(default_factory=dict)
    wall_time: float = field(default=0.0, compare=False)

    def check(self) -> None:
        assert self.accept + self.abort == self.trials
        assert self.correct_accept + self.incorrect_accept == self.accept

    @property
    def accept_rate(self) -> float:
        return self.accept / self.trials

    @property
    def correct_accept_rate(self) -> float:
        return self.correct_accept / self.trials

    @property
    def incorrect_accept_rate(self) -> float:
        return self.incorrect_accept / self.trials

    def to_dict(self) -> dict:
        """Serialisable form; ``wall_time`` is left out so equal runs give equal bytes."""
        return {
            "schema": SUMMARY_SCHEMA,
            "trials": self.trials,
            "accept": self.accept,
            "abort": self.abort,
            "correct_accept": self.correct_accept,
            "incorrect_accept": self.incorrect_accept,
            "mean_c_fail": self.mean_c_fail,
            "colour_trap_failure": {str(k): v for k, v in sorted(self.colour_trap_failure.items())},
            "redo_total": self.redo_total,
            "bounds": self.bounds,
        }


# --- Monte Carlo ---------------------------------------------------------------------


@dataclass(frozen=True)
class _Job:
    cfg: ExperimentConfig
    start: int
    stop: int
    keep_records: bool


def _run_chunk(job: _Job):
    cfg = job.cfg
    p = cfg.resolve_pattern()
    c = cfg.resolve_colouring(p)
    params = cfg.resolve_params(c.k)
    x = cfg.resolve_input(p)
    behaviour = make_behaviour(cfg.behaviour)
    redo = cfg.resolve_redo()
    model = classical_model(p, x) if cfg.engine == "classical" else None
    ref = model.reference if model else reference_output(p, x)
    rows = []
    for i in range(job.start, job.stop):
        seed = rngmod.trial_seed(cfg.seed, i)
        verdict, trace = run_protocol(
            p, c, params, x, behaviour, seed, engine=cfg.engine, redo=redo, model=model
        )
        colour_fail = [(r.colour, r.failed) for r in trace.runs if r.colour is not None]
        rec = trace.to_record() if job.keep_records else None
        if rec is not None:
            rec["seed"] = {"master": cfg.seed, "trial": i}
        rows.append(
            (
                isinstance(verdict, Accept),
                isinstance(verdict, Accept) and verdict.y == ref,
                trace.c_fail,
                colour_fail,
                sum(trace.redo_counts),
                rec,
            )
        )
    return rows


def attach_bounds(cfg: ExperimentConfig, params: ProtocolParams, p: MeasurementPattern, c: Colouring) -> dict:
    """Analytic comparison values that apply to this configuration."""
    omega = cfg.nominal_omega(params)
    out: dict = {"omega": omega, "secure_regime": omega < 1 / (2 * params.k)}
    try:
        ob = optimize_verifiability_bound(params.n, params.d, params.t, params.k, omega)
        out["verifiability"] = ob.to_dict()
        out["composable_epsilon"] = composable_epsilon(min(ob.value, 1.0))
    except InfeasibleError as exc:
        out["verifiability"] = str(exc)
    behaviour = make_behaviour(cfg.behaviour)
    if isinstance(behaviour, Noisy):
        try:
            p_min, p_max, _ = analytic_p_bounds(behaviour.noise, c)
        except ValueError:
            return out
        out["p_min"], out["p_max"] = p_min, p_max
        out.update(robustness_bounds(p_min, p_max, params))
    return out


def robustness_bounds(p_min: float, p_max: float, params: ProtocolParams) -> dict:
    """Noise-robustness bounds at the protocol's actual ratio ``w/t``."""
    out = {}
    omega = params.omega
    if p_max < 0.5 and omega > p_max:
        rp = RobustnessParams(p_min, p_max, omega, params.tau, params.delta_ratio, params.n)
        out["correctness_epsilon"] = correctness_epsilon(rp)
    if omega < p_min:
        out["accept_bound"] = abort_probability_bound(p_min, omega, params.tau, params.n)
    return out


def monte_carlo(cfg: ExperimentConfig, keep_records: bool = False, chunk: int = 250):
    """Run ``cfg.trials`` protocol executions and summarise the verdicts.

    Returns the :class:`Summary`, plus the per-trial trace records when
    ``keep_records`` is set (or when ``cfg.out`` asks for them).
    """
    start = time.perf_counter()
    keep = keep_records or cfg.out is not None
    jobs = [_Job(cfg, a, min(a + chunk, cfg.trials), keep) for a in range(0, cfg.trials, chunk)]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    rows = [r for part in parts for r in part]

    p = cfg.resolve_pattern()
    c = cfg.resolve_colouring(p)
    params = cfg.resolve_params(c.k)
    s = Summary(trials=cfg.trials)
    per_colour = {col: [0, 0] for col in range(c.k)}
    c_fail_total = 0
    for accepted, correct, c_fail, colour_fail, redos, _ in rows:
        s.accept += accepted
        s.abort += not accepted
        s.correct_accept += correct
        s.incorrect_accept += accepted and not correct
        c_fail_total += c_fail
        s.redo_total += redos
        for col, failed in colour_fail:
            per_colour[col][0] += failed
            per_colour[col][1] += 1
    s.mean_c_fail = c_fail_total / cfg.trials
    s.colour_trap_failure = {col: (f / m if m else 0.0) for col, (f, m) in per_colour.items()}
    s.bounds = attach_bounds(cfg, params, p, c)
    s.wall_time = time.perf_counter() - start
    s.check()
    records = [r[-1] for r in rows] if keep else None
    if cfg.out is not None:
        write_records(cfg.out, records, s)
    return (s, records) if keep_records else s


def write_records(path: str, records: Sequence[dict], summary: Summary) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        fh.write(json.dumps(summary.to_dict(), sort_keys=True) + "\n")


# --- blindness -----------------------------------------------------------------------


def _transcript_row(p, deltas, outcomes) -> list[int]:
    return [deltas[v] for v in p.vertices] + [outcomes[v] for v in p.vertices]


def sample_transcripts(
    p: MeasurementPattern,
    c: Colouring,
    samples: int,
    seed,
    kind: str = "computation",
    x=None,
    broken: bool = False,
    redo_rate: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Server-side views ``(delta_v..., b_v...)`` of independent honest runs.

    ``kind`` is ``"computation"``, ``"test"`` or ``"mix"`` (fair coin per
    sample). ``broken`` zeroes the angle pad, as a negative control. The
    second array flags samples whose run was redone at least once.
    """
    x = x if x is not None else (0,) * len(p.graph.inputs)
    rows = np.empty((samples, 2 * len(p.vertices)), dtype=np.int64)
    redone = np.zeros(samples, dtype=bool)
    for i in range(samples):
        attempt = 0
        while True:
            rng = rngmod.substream(seed, i, attempt)
            is_test = kind == "test" or (kind == "mix" and rng.random() < 0.5)
            if is_test:
                secrets = sample_test_secrets(p, c, int(rng.integers(0, c.k)), rng)
            else:
                secrets = sample_computation_secrets(p, rng)
            if broken:
                secrets = replace(secrets, theta={v: 0 for v in secrets.theta})
            server = Server(p.graph, Honest(), ServerOptions(redo_rate=redo_rate))
            try:
                tr = run_with_server(p, secrets, x, server, 0, rng, rng)
            except RedoRequested:
                attempt += 1
                continue
            break
        rows[i] = _transcript_row(p, tr.deltas, tr.outcomes)
        redone[i] = attempt > 0
    return rows, redone


def delta_uniformity(p: MeasurementPattern, rows: np.ndarray) -> dict:
    """Per-vertex chi-square test of uniform ``delta``, Bonferroni-adjusted."""
    nv = len(p.vertices)
    pvals = {}
    for i, v in enumerate(p.vertices):
        counts = np.bincount(rows[:, i], minlength=8)
        pvals[v] = float(chisquare(counts).pvalue)
    adjusted = {v: min(1.0, pv * nv) for v, pv in pvals.items()}
    return {"p_values": pvals, "adjusted": adjusted, "min_adjusted": min(adjusted.values())}


def _one_hot(p: MeasurementPattern, rows: np.ndarray) -> np.ndarray:
    nv = len(p.vertices)
    feats = [np.eye(8)[rows[:, i]] for i in range(nv)]
    feats.append(rows[:, nv:].astype(float))
    return np.hstack(feats)


def distinguishing_auc(p: MeasurementPattern, a: np.ndarray, b: np.ndarray, seed: int = 0) -> float:
    """Held-out ROC AUC of a logistic classifier separating transcripts ``a`` from ``b``."""
    from sklearn.linear_model import LogisticRegression
    from sklearn.metrics import roc_auc_score
    from sklearn.model_selection import train_test_split

    X = np.vstack([_one_hot(p, a), _one_hot(p, b)])
    y = np.r_[np.zeros(len(a)), np.ones(len(b))]
    Xtr, Xte, ytr, yte = train_test_split(X, y, test_size=0.5, random_state=seed, stratify=y)
    clf = LogisticRegression(max_iter=1000).fit(Xtr, ytr)
    return float(roc_auc_score(yte, clf.predict_proba(Xte)[:, 1]))


@dataclass
class BlindnessReport:
    uniformity: dict
    auc: dict
    control_min_p: float
    samples: int

    def passed(self, alpha: float = 0.01, band: tuple[float, float] = (0.45, 0.55)) -> bool:
        ok_u = all(u["min_adjusted"] > alpha for u in self.uniformity.values())
        ok_a = all(band[0] <= v <= band[1] for v in self.auc.values())
        return ok_u and ok_a and self.control_min_p < 1e-6

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "uniformity_min_adjusted_p": {k: u["min_adjusted"] for k, u in self.uniformity.items()},
            "auc": self.auc,
            "control_min_p": self.control_min_p,
        }


def blindness_test(cfg: ExperimentConfig, samples: int = 10_000) -> BlindnessReport:
    """Uniformity of every ``delta_v`` plus three two-sample distinguishers.

    The distinguishers compare computation vs test runs, input 0 vs the
    all-ones input, and runs with vs without a forced Server redo. A
    negative control with the angle pad switched off must be flagged.
    """
    p = cfg.resolve_pattern()
    c = cfg.resolve_colouring(p)
    zero = (0,) * len(p.graph.inputs)
    ones = (1,) * len(p.graph.inputs)
    seed = rngmod.seed_sequence(cfg.seed)
    comp, _ = sample_transcripts(p, c, samples, rngmod.child(seed, 1), "computation", zero)
    test, _ = sample_transcripts(p, c, samples, rngmod.child(seed, 2), "test")
    mix, _ = sample_transcripts(p, c, samples, rngmod.child(seed, 3), "mix", zero)
    comp1, _ = sample_transcripts(p, c, samples, rngmod.child(seed, 4), "computation", ones)
    redo_rows, redone = sample_transcripts(p, c, 2 * samples, rngmod.child(seed, 5), "computation", zero, redo_rate=0.5)
    control, _ = sample_transcripts(p, c, min(samples, 2000), rngmod.child(seed, 6), "mix", zero, broken=True)
    uniformity = {
        "computation": delta_uniformity(p, comp),
        "test": delta_uniformity(p, test),
        "mix": delta_uniformity(p, mix),
    }
    auc = {
        "run_type": distinguishing_auc(p, comp, test),
        "input": distinguishing_auc(p, comp, comp1),
        "redo": distinguishing_auc(p, redo_rows[~redone], redo_rows[redone]),
    }
    control_min = min(delta_uniformity(p, control)["p_values"].values())
    return BlindnessReport(uniformity, auc, control_min, samples)


# --- robustness ------------------------------------------------------------------------


def robustness_sweep(
    noise_levels: Sequence[float],
    omegas: Sequence[float],
    cfg: ExperimentConfig,
    estimate_trials: int = 1000,
) -> list[dict]:
    """Accept rates against the two noise-robustness bounds on a ``(p, omega)`` grid.

    ``cfg.params`` supplies ``n`` and optionally ``delta_ratio``; ``w`` is
    set from each ``omega``. Each row records the measured ``p_min`` and
    ``p_max``, the regime and whichever bound applies.
    """
    p = cfg.resolve_pattern()
    c = cfg.resolve_colouring(p)
    n = int(cfg.params["n"])
    delta_ratio = float(cfg.params.get("delta_ratio", 0.5))
    rows = []
    for i, level in enumerate(noise_levels):
        noise = depolarizing_noise(level)
        est = estimate_p_bounds(noise, p, c, estimate_trials, seed=rngmod.child(cfg.seed, 1000 + i))
        for omega in omegas:
            params = ProtocolParams.from_ratios(n, delta_ratio, omega, c.k)
            sub = replace(
                cfg,
                params=params.to_dict(),
                behaviour={"kind": "depolarizing", "p": level},
            )
            s = monte_carlo(sub)
            if params.omega > est.p_max:
                regime = "accept"
            elif params.omega < est.p_min:
                regime = "abort"
            else:
                regime = "unbounded"
            row = {
                "noise": level,
                "omega": omega,
                "w": params.w,
                "p_min": est.p_min,
                "p_max": est.p_max,
                "regime": regime,
                "accept_rate": s.accept_rate,
                "correct_accept_rate": s.correct_accept_rate,
            }
            if est.p_max < 0.5:
                row.update(robustness_bounds(est.p_min, est.p_max, params))
            rows.append(row)
    return rows


# --- sigma_m sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class AttackCell:
    m: int
    target: int
    trials: int
    incorrect_accept: int  # accepted with at least d/2 computation runs hit
    wrong_output: int  # accepted with a corrupted majority output
    mean_failed_tests: float
    mean_affected: float

    @property
    def frequency(self) -> float:
        return self.incorrect_accept / self.trials

    def to_dict(self) -> dict:
        return {**asdict(self), "frequency": self.frequency}


def sigma_m_sweep(
    p: MeasurementPattern,
    c: Colouring,
    params: ProtocolParams,
    trials: int,
    seed=0,
    ms: Sequence[int] | None = None,
    targets: Sequence[int] | None = None,
) -> list[AttackCell]:
    """Classical fast-path Monte Carlo for every ``(m, target)`` cell.

    A cell's failure event is the conservative one: accepted (``Y < w``)
    while at least ``d/2`` computation runs carry the deviation. The
    output actually goes wrong only if the target's outcome feeds an output
    bit and more than ``d/2`` runs are hit.
    """
    from .adversary import sample_sigma_m_outcomes
    from .ubqc import output_sensitivity

    ms = range(params.n + 1) if ms is None else ms
    targets = p.vertices if targets is None else targets
    sens = output_sensitivity(p)
    cells = []
    for m in ms:
        for v in targets:
            rng = rngmod.substream(seed, m, v)
            y, z = sample_sigma_m_outcomes(params.n, params.d, params.k, m, trials, rng, c.assignment[v])
            accepted = y < params.w
            bad = accepted & (2 * z >= params.d)
            wrong = accepted & (2 * z > params.d) if sens[v] else np.zeros_like(accepted)
            cells.append(
                AttackCell(
                    m=m,
                    target=v,
                    trials=trials,
                    incorrect_accept=int(bad.sum()),
                    wrong_output=int(wrong.sum()),
                    mean_failed_tests=float(y.mean()),
                    mean_affected=float(z.mean()),
                )
            )
    return cells
