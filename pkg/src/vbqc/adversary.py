"""Server deviation models and the classical evaluator for Pauli attacks.

Attack deviations are written in the *measurement frame* of the targeted
qubit: ``X`` (or ``Y``) flips the reported outcome, ``Z`` leaves it alone.
Physically the Server applies ``U^dag P U`` right before measuring, where
``U = H Z(-delta)`` rotates the ``delta`` basis onto the computational one.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom, hypergeom

from .graph import Colouring
from .pattern import to_radians
from .statevector import PAULIS, KrausChannel, dephasing_channel, depolarizing_channel

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SCHEDULES = ("after_entangle", "before_entangle")


def frame_pauli_matrix(pauli: str, delta: int) -> np.ndarray:
    """Physical operator equal to ``pauli`` in the ``delta`` measurement frame."""
    u = H @ np.diag([1.0, np.exp(-1j * to_radians(delta))])
    return u.conj().T @ PAULIS[pauli] @ u


@dataclass(frozen=True)
class Attack:
    """Per-run single-qubit Pauli deviations, injected just before measurement.

    ``deviations[j]`` lists ``(vertex, pauli)`` pairs for run ``j`` (0-based).
    """

    deviations: Mapping[int, tuple[tuple[int, str], ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean = {}
        for j, devs in self.deviations.items():
            devs = tuple((int(v), str(p)) for v, p in devs)
            for _, p in devs:
                if p not in PAULIS:
                    raise ValueError(f"unknown Pauli {p!r}")
            if devs:
                clean[int(j)] = devs
        object.__setattr__(self, "deviations", clean)

    def for_run(self, j: int) -> tuple[tuple[int, str], ...]:
        return self.deviations.get(j, ())

    def targets(self) -> set[int]:
        return {v for devs in self.deviations.values() for v, _ in devs}

    @property
    def attacked_runs(self) -> list[int]:
        return sorted(self.deviations)


def sigma_m_attack(m: int, target: int, n: int | None = None, pauli: str = "X") -> Attack:
    """Deviation on ``target`` in each of the first ``m`` runs."""
    if m < 0 or (n is not None and m > n):
        raise ValueError(f"m must lie in [0, n]; got m={m}, n={n}")
    return Attack({j: ((target, pauli),) for j in range(m)})


@dataclass(frozen=True)
class NoiseModel:
    """Run-independent single-qubit channel applied to every qubit of every run.

    ``per_run`` optionally overrides the channel for individual runs; no
    state is carried from one run to the next.
    """

    channel: KrausChannel
    schedule: str = "after_entangle"
    per_run: Mapping[int, KrausChannel] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self) -> None:
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.channel.n_qubits != 1:
            raise ValueError("noise channels act on one qubit at a time")

    def channel_for_run(self, j: int) -> KrausChannel:
        return self.per_run.get(j, self.channel)


def depolarizing_noise(p: float, schedule: str = "after_entangle") -> NoiseModel:
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing parameter must lie in [0, 1]")
    return NoiseModel(depolarizing_channel(p), schedule=schedule, label=f"depolarizing({p})")


def dephasing_noise(q: float, schedule: str = "after_entangle") -> NoiseModel:
    if not 0.0 <= q <= 1.0:
        raise ValueError("dephasing probability must lie in [0, 1]")
    return NoiseModel(dephasing_channel(q), schedule=schedule, label=f"dephasing({q})")


@dataclass(frozen=True)
class Honest:
    pass


@dataclass(frozen=True)
class Noisy:
    noise: NoiseModel


@dataclass(frozen=True)
class Malicious:
    attack: Attack


ServerBehaviour = Honest | Noisy | Malicious


# --- classical evaluation of Pauli attacks -----------------------------------


@dataclass(frozen=True)
class AttackOutcome:
    failed_tests: int  # Y
    affected_computations: int  # Z
    accepted: bool  # Y < w
    corruption_possible: bool  # Z >= d/2
    output_flips: tuple[tuple[int, ...], ...] | None = None
    verdict_output: tuple[int, ...] | None = None  # None means Abort when computed

    @property
    def incorrect_accept(self) -> bool:
        """Bound-side failure event: accepted while at least d/2 runs were hit."""
        return self.accepted and self.corruption_possible


def _flipping(pauli: str) -> bool:
    return pauli in ("X", "Y")


def classical_attack_outcome(
    attack: Attack,
    computation_runs: Iterable[int],
    test_colours: Mapping[int, int],
    colouring: Colouring,
    w: int,
    sensitivity: Mapping[int, Sequence[int]] | None = None,
    reference: Sequence[int] | None = None,
) -> AttackOutcome:
    """Evaluate a Pauli attack on one protocol configuration without simulation.

    A test run fails iff some flipping deviation sits on a vertex of the run's
    trap colour. A computation run counts as affected iff it carries any
    flipping deviation. When ``sensitivity`` (vertex -> output bits flipped by
    an outcome flip at that vertex) and the ``reference`` output are given, the
    actual majority-vote verdict is also computed.
    """
    comp = sorted(computation_runs)
    d = len(comp)
    for devs in attack.deviations.values():
        if any(p == "Z" for _, p in devs) and not any(_flipping(p) for _, p in devs):
            raise ValueError("Z-only deviations leave traps untouched; use the quantum path")
    failed = 0
    for j, col in test_colours.items():
        if any(_flipping(p) and colouring.assignment[v] == col for v, p in attack.for_run(j)):
            failed += 1
    affected = sum(1 for j in comp if any(_flipping(p) for _, p in attack.for_run(j)))
    accepted = failed < w
    flips = verdict = None
    if sensitivity is not None and reference is not None:
        outputs = []
        flips_list = []
        for j in comp:
            y = list(reference)
            flipped: set[int] = set()
            for v, p in attack.for_run(j):
                if _flipping(p):
                    flipped ^= set(sensitivity[v])
            for i in flipped:
                y[i] ^= 1
            flips_list.append(tuple(sorted(flipped)))
            outputs.append(tuple(y))
        flips = tuple(flips_list)
        if accepted:
            counts: dict[tuple[int, ...], int] = {}
            for y in outputs:
                counts[y] = counts.get(y, 0) + 1
            best = max(counts.items(), key=lambda kv: kv[1])
            if 2 * best[1] > d:
                verdict = best[0]
    return AttackOutcome(
        failed_tests=failed,
        affected_computations=affected,
        accepted=accepted,
        corruption_possible=2 * affected >= d,
        output_flips=flips,
        verdict_output=verdict,
    )


def sample_sigma_m_outcomes(
    n: int,
    d: int,
    k: int,
    m: int,
    trials: int,
    rng: np.random.Generator,
    target_colour: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo draws of ``(Y, Z)`` for the sigma_m attack.

    Vectorised equivalent of drawing a uniform partition and uniform test
    colours and calling :func:`classical_attack_outcome`; only the first ``m``
    runs are attacked and a test run fails iff it drew ``target_colour``.
    """
    keys = rng.random((trials, n))
    is_comp = np.zeros((trials, n), dtype=bool)
    idx = np.argpartition(keys, d - 1, axis=1)[:, :d] if d > 0 else np.empty((trials, 0), int)
    np.put_along_axis(is_comp, idx, True, axis=1)
    hit = rng.integers(0, k, size=(trials, n)) == target_colour
    attacked = np.zeros(n, dtype=bool)
    attacked[:m] = True
    z = (is_comp & attacked).sum(axis=1)
    y = (~is_comp & attacked & hit).sum(axis=1)
    return y, z


def _check_size(n: int, d: int, k: int, limit: int) -> None:
    size = math.comb(n, d) * k ** (n - d)
    if n > 16 or size > limit:
        raise ValueError(f"instance too large to enumerate ({size} configurations)")


@dataclass(frozen=True)
class FailureProbability:
    """Exact failure probability under the two accept conventions."""

    strict: float  # accept iff Y < w
    inclusive: float  # accept iff Y <= w
    configurations: int = 0


def exact_failure_probability(
    n: int, d: int, k: int, w: int, m: int, limit: int = 5_000_000
) -> FailureProbability:
    """Pr[accept and Z >= d/2] for sigma_m by enumerating every configuration.

    Every partition ``(C, T)`` and every colour vector on ``T`` is equally
    likely; the attacked vertex has colour 0 without loss of generality.
    """
    if not 0 < d < n or not 0 <= m <= n:
        raise ValueError("need 0 < d < n and 0 <= m <= n")
    _check_size(n, d, k, limit)
    t = n - d
    strict = inclusive = 0
    total = 0
    attacked = set(range(m))
    for comp in itertools.combinations(range(n), d):
        comp_set = set(comp)
        tests = [j for j in range(n) if j not in comp_set]
        z = len(attacked & comp_set)
        hit_runs = [j in attacked for j in tests]
        corrupt = 2 * z >= d
        for colours in itertools.product(range(k), repeat=t):
            total += 1
            if not corrupt:
                continue
            y = sum(1 for h, c in zip(hit_runs, colours) if h and c == 0)
            strict += y < w
            inclusive += y <= w
    return FailureProbability(strict / total, inclusive / total, total)


def failure_probability(n: int, d: int, k: int, w: float, m: int, inclusive: bool = False) -> float:
    """Closed-form sum of the sigma_m failure probability.

    ``Z`` is hypergeometric (``m`` attacked runs among ``n``, ``d`` of them
    computations) and, given ``Z = z``, ``Y`` is Binomial(m - z, 1/k).
    """
    total = 0.0
    ymax = math.floor(w) if inclusive else math.ceil(w) - 1
    for z in range(max(0, m - (n - d)), min(m, d) + 1):
        if 2 * z < d:
            continue
        pz = hypergeom.pmf(z, n, d, m)
        total += pz * binom.cdf(ymax, m - z, 1 / k) if ymax >= 0 else 0.0
    return float(total)


def worst_case_failure(n: int, d: int, k: int, w: float, inclusive: bool = False) -> tuple[int, float]:
    """``(m*, max_m failure_probability)`` over the whole sigma_m family."""
    vals = [failure_probability(n, d, k, w, m, inclusive) for m in range(n + 1)]
    m_star = int(np.argmax(vals))
    return m_star, vals[m_star]


# --- classical emulation of Pauli noise ----------------------------------------


def pauli_probabilities(ch: KrausChannel) -> tuple[float, float, float] | None:
    """``(px, py, pz)`` if ``ch`` is a Pauli channel, else ``None``."""
    if ch.n_qubits != 1:
        return None
    probs = dict.fromkeys("IXYZ", 0.0)
    for k in ch.operators:
        for name, pm in PAULIS.items():
            c = np.vdot(pm, k) / 2
            if np.allclose(k, c * pm, atol=1e-12):
                probs[name] += float(abs(c) ** 2)
                break
        else:
            return None
    return probs["X"], probs["Y"], probs["Z"]


def outcome_flip_probability(noise: NoiseModel, j: int = 0) -> float:
    """Per-qubit flip probability of a decoded outcome under ``noise`` in run ``j``.

    The one-time pad ``theta`` twirls the channel: a ``Z`` error flips the
    outcome, an ``X`` or ``Y`` error replaces it with a fair coin. This is
    exact only when the error strikes right before the qubit is measured.
    """
    if noise.schedule != "after_entangle":
        raise ValueError("classical emulation needs the after_entangle schedule")
    probs = pauli_probabilities(noise.channel_for_run(j))
    if probs is None:
        raise ValueError("classical emulation needs a Pauli channel")
    px, py, pz = probs
    return pz + (px + py) / 2


def analytic_test_failure(flip: float, traps: int) -> float:
    """Probability that at least one of ``traps`` independent traps fails."""
    return 1.0 - (1.0 - flip) ** traps


# --- noise characterisation --------------------------------------------------------


@dataclass(frozen=True)
class ColourEstimate:
    failures: int
    trials: int
    rate: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class PBounds:
    """Per-colour test-run failure estimates and their extremes.

    ``p_min``/``p_max`` are the extreme point estimates; ``p_min_ci`` and
    ``p_max_ci`` are the matching outer Wilson interval ends.
    """

    p_min: float
    p_max: float
    p_min_ci: float
    p_max_ci: float
    per_colour: Mapping[int, ColourEstimate]


def wilson_interval(failures: int, trials: int, confidence: float = 0.99) -> tuple[float, float]:
    from scipy.stats import binomtest

    ci = binomtest(failures, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def estimate_p_bounds(
    noise: NoiseModel | None,
    pattern,
    colouring: Colouring,
    trials: int = 1000,
    seed=0,
    confidence: float = 0.99,
) -> PBounds:
    """Estimate test-run failure probabilities per colour with honest-but-noisy runs.

    ``trials`` test runs per colour are simulated on the state-vector
    backend; ``noise=None`` means a noiseless Server.
    """
    from . import rng as rngmod
    from .ubqc import execute_run, failed_traps, sample_test_secrets

    if trials < 1:
        raise ValueError("trials must be positive")
    behaviour = Honest() if noise is None else Noisy(noise)
    per = {}
    for col in range(colouring.k):
        fails = 0
        for i in range(trials):
            rng = rngmod.substream(seed, col, i)
            secrets = sample_test_secrets(pattern, colouring, col, rng)
            tr = execute_run(pattern, secrets, None, behaviour, rng, run_index=i)
            fails += bool(failed_traps(secrets, tr, pattern.graph))
        lo, hi = wilson_interval(fails, trials, confidence)
        per[col] = ColourEstimate(fails, trials, fails / trials, lo, hi)
    rates = [e.rate for e in per.values()]
    return PBounds(
        p_min=min(rates),
        p_max=max(rates),
        p_min_ci=min(e.ci_low for e in per.values()),
        p_max_ci=max(e.ci_high for e in per.values()),
        per_colour=per,
    )


def analytic_p_bounds(noise: NoiseModel, colouring: Colouring) -> tuple[float, float, dict[int, float]]:
    """Exact per-colour failure probabilities for Pauli noise before measurement."""
    q = outcome_flip_probability(noise)
    per = {c: analytic_test_failure(q, len(colouring.colour_class(c))) for c in range(colouring.k)}
    return min(per.values()), max(per.values()), per
