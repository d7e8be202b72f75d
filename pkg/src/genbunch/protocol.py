"""Two-stage assessment of a sampling device by its bunching statistics.

Stage I checks that the source emits one particle per input mode. Stage II
counts runs in which every particle lands in a chosen output subset and
compares the frequency with ``per(H)/mu(n)``. The device is simulated by
Bernoulli draws on the exact bunching probability of its J-function.

Also here: the scattershot variant, the truncated permanent estimator for
dilute networks, the Fourier suppression law and the network loophole that
fools it, and the unitary embedding of a lossy network.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .bunching import (
    BunchingProblem,
    build_h,
    full_output_distribution,
    limit_probabilities,
    occupation_numbers,
    prob_all_in_subset,
)
from .config import settings, use_settings
from .errors import CapacityError, ContractError
from .haarstats import AverageSpec, avg_classical_approx, avg_quantum
from .indist import JFunction, j_distinguishable, j_indistinguishable
from .numkit import (
    RngStream,
    as_matrix,
    check_unitary,
    permanent_ryser,
    polar_and_svd,
    principal_permanents,
    ryser_flops,
)

log = logging.getLogger(__name__)

__all__ = [
    "RandomPhase",
    "UniformMultinomial",
    "ExplicitFockMixture",
    "DeviceModel",
    "ProtocolReport",
    "Stage1Result",
    "ScattershotResult",
    "RunRecord",
    "EstimatorConfig",
    "EstimatorResult",
    "SuppressionReport",
    "LoopholeReport",
    "device_bunching_probability",
    "stage1_check",
    "run_standard_protocol",
    "run_scattershot",
    "haar_average_of_fock_mixture",
    "fock_mixture_probability",
    "approx_permanent",
    "approx_permanent_from_rows",
    "redraw_subset",
    "fourier_network",
    "allowed_by_suppression",
    "suppression_check",
    "loophole_network",
    "loophole_demo",
    "lossy_embedding",
    "embedding_factors",
    "embedding_product_form",
    "EmbeddingFactors",
]


# -- sources ------------------------------------------------------------------


def _fock_occupations(s: int, n: int):
    """All occupation vectors of ``n`` particles over ``s`` modes."""
    for modes in itertools.combinations_with_replacement(range(s), n):
        yield tuple(np.bincount(modes, minlength=s).tolist())


@dataclass(frozen=True)
class RandomPhase:
    """``n`` indistinguishable bosons, each in a random-phase superposition of ``s`` modes.

    Equivalent to a uniform mixture over all occupations of the ``s`` modes.
    """

    n: int
    s: int

    def mixture(self) -> "ExplicitFockMixture":
        occs = list(_fock_occupations(self.s, self.n))
        w = math.factorial(self.n) * math.factorial(self.s - 1) / math.factorial(self.s + self.n - 1)
        return ExplicitFockMixture(tuple([w] * len(occs)), tuple(occs))


@dataclass(frozen=True)
class UniformMultinomial:
    """``n`` distinguishable particles, each placed uniformly at random in one of ``n`` modes."""

    n: int


@dataclass(frozen=True)
class ExplicitFockMixture:
    """Mixture of Fock states of indistinguishable bosons over the device input modes."""

    weights: tuple[float, ...]
    occupations: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.occupations) or not len(w):
            raise ContractError("need one weight per occupation")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
            raise ContractError("mixture weights must be non-negative and sum to 1")
        if len({sum(o) for o in self.occupations}) != 1:
            raise ContractError("all occupations must hold the same number of particles")

    @property
    def n(self) -> int:
        return sum(self.occupations[0])


AdversarySource = Union[RandomPhase, UniformMultinomial, ExplicitFockMixture]


@dataclass(frozen=True, eq=False)
class DeviceModel:
    """A network, its nominal input modes, and the source that actually feeds it.

    ``source`` is either an internal-state model (anything with a
    ``j_function()`` method) for single particles in ``input_modes``, or an
    adversary source whose modes are taken from ``input_modes`` in order.
    """

    network: np.ndarray
    input_modes: tuple[int, ...]
    source: object
    lossy: bool = False

    def __post_init__(self):
        u = as_matrix(self.network, square=True)
        if self.lossy:
            polar_and_svd(u)
        else:
            check_unitary(u)
        object.__setattr__(self, "network", u)
        object.__setattr__(self, "input_modes", tuple(int(k) for k in self.input_modes))

    @property
    def n(self) -> int:
        return len(self.input_modes)


def fock_mixture_probability(u, modes, mixture: ExplicitFockMixture, subset) -> float:
    """``sum_n w_n per(H_n)/mu(n)`` for a mixture of occupations of ``modes``."""
    total = 0.0
    for w, occ in zip(mixture.weights, mixture.occupations):
        if w == 0:
            continue
        inputs = tuple(np.repeat(np.asarray(modes)[: len(occ)], occ))
        h = build_h(BunchingProblem(u, inputs, tuple(subset)))
        total += w * limit_probabilities(h, occupation_numbers(inputs)).boson
    return total


def device_bunching_probability(device: DeviceModel, subset) -> float:
    """Exact probability that every particle emitted by the device lands in ``subset``."""
    src = device.source
    u = device.network
    if isinstance(src, UniformMultinomial):
        h = build_h(BunchingProblem(u, device.input_modes[: src.n], tuple(subset)))
        return float((np.trace(h).real / src.n) ** src.n)
    if isinstance(src, RandomPhase):
        if src.s > device.n:
            raise ContractError("RandomPhase uses more modes than the device offers")
        return fock_mixture_probability(u, device.input_modes, src.mixture(), subset)
    if isinstance(src, ExplicitFockMixture):
        return fock_mixture_probability(u, device.input_modes, src, subset)
    if not hasattr(src, "j_function"):
        raise ContractError(f"unsupported source {type(src).__name__}")
    j = src.j_function()
    h = build_h(BunchingProblem(u, device.input_modes, tuple(subset)))
    return prob_all_in_subset(j, h, occupation_numbers(device.input_modes))


# -- stage I --------------------------------------------------------------------


class Stage1Result(NamedTuple):
    collision_free_prob: float
    verdict: str


def stage1_check(source, n: int | None = None) -> Stage1Result:
    """Probability that the source puts at most one particle in each mode.

    Internal-state models of single particles give 1. The verdict is
    ``PASS`` only when collisions are impossible.
    """
    if isinstance(source, UniformMultinomial):
        p = math.factorial(source.n) / source.n**source.n
    elif isinstance(source, RandomPhase):
        mix = source.mixture()
        p = math.comb(source.s, source.n) * mix.weights[0]
    elif isinstance(source, ExplicitFockMixture):
        p = float(sum(w for w, o in zip(source.weights, source.occupations) if max(o) <= 1))
    elif hasattr(source, "j_function"):
        occ = getattr(source, "occupation", None)
        p = 1.0 if occ is None or max(occ) <= 1 else 0.0
    else:
        raise ContractError(f"unsupported source {type(source).__name__}")
    return Stage1Result(p, "PASS" if p >= 1.0 - 1e-12 else "FAIL")


# -- stage II -------------------------------------------------------------------


def _band(p: float, runs: int) -> tuple[float, float]:
    half = settings().band_sigmas * math.sqrt(max(p * (1 - p), 0.0) / runs)
    return max(0.0, p - half), min(1.0, p + half)


@dataclass
class ProtocolReport:
    protocol: str
    runs: int
    bunched: int
    predicted: float
    band: tuple[float, float]
    verdict: str
    seed: int
    stage1_collisions: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def frequency(self) -> float:
        return self.bunched / self.runs if self.runs else float("nan")

    def to_dict(self) -> dict:
        out = {
            "protocol": self.protocol,
            "runs": self.runs,
            "bunched": self.bunched,
            "predicted": self.predicted,
            "band": list(self.band),
            "verdict": self.verdict,
            "seed": self.seed,
        }
        if self.stage1_collisions:
            out["stage1_collisions"] = self.stage1_collisions
        out.update(self.extra)
        return out


def _stream(rng) -> RngStream:
    return rng if isinstance(rng, RngStream) else RngStream(int(rng))


def run_standard_protocol(device: DeviceModel, subset, runs: int, rng) -> ProtocolReport:
    """Simulate both stages and compare the bunched frequency with ``per(H)/mu(n)``.

    Stage I draws the number of runs with a multiply occupied input; any such
    run fails the device. Stage II draws ``runs`` Bernoulli outcomes with the
    device's exact bunching probability. The verdict is ``FAIL`` when the
    frequency leaves the band ``p +- 3 sqrt(p(1-p)/runs)`` around the ideal
    boson prediction, and ``INCONCLUSIVE`` for zero runs.
    """
    subset = tuple(int(k) for k in subset)
    if len(subset) < 1:
        raise ContractError("output subset must be non-empty")
    if runs < 0:
        raise ContractError("runs must be non-negative")
    stream = _stream(rng)
    ideal = build_h(BunchingProblem(device.network, device.input_modes, subset))
    predicted = limit_probabilities(ideal, occupation_numbers(device.input_modes)).boson
    if runs == 0:
        return ProtocolReport("standard", 0, 0, predicted, (0.0, 1.0), "INCONCLUSIVE",
                              stream.master_seed)
    collision_free = stage1_check(device.source).collision_free_prob
    collisions = int(stream.child(0).generator().binomial(runs, 1.0 - collision_free))
    p_true = device_bunching_probability(device, subset)
    bunched = int(np.count_nonzero(stream.child(1).generator().random(runs) < p_true))
    band = _band(predicted, runs)
    freq = bunched / runs
    ok = collisions == 0 and band[0] <= freq <= band[1]
    report = ProtocolReport("standard", runs, bunched, predicted, band,
                            "PASS" if ok else "FAIL", stream.master_seed, collisions)
    log.info("standard protocol: f=%.6g predicted=%.6g band=[%.6g, %.6g] -> %s",
             freq, predicted, band[0], band[1], report.verdict)
    return report


# -- scattershot ----------------------------------------------------------------


class RunRecord(NamedTuple):
    inputs: tuple[int, ...]
    probability: float
    bunched: bool


@dataclass
class ScattershotResult:
    report: ProtocolReport
    mean_prob: float
    mean_prob_se: float
    analytic_boson: float
    analytic_classical: float
    classical_correction: float
    records: list[RunRecord]


def run_scattershot(network, n: int, runs: int, j_model, rng, subset=None) -> ScattershotResult:
    """Scattershot protocol: a fresh uniform ``n``-subset of input modes in every run.

    Each run computes the exact bunching probability for its inputs and draws
    the Bernoulli outcome. The verdict compares the bunched frequency with the
    closed-form Haar average, which needs no permanent at all. ``subset``
    defaults to the first ``K`` modes of the standard geometry for ``n``.
    """
    from .haarstats import select_k

    u = check_unitary(network)
    m = u.shape[0]
    if n > m:
        raise ContractError(f"n={n} exceeds the number of modes {m}")
    if n > settings().permanent_cap:
        raise CapacityError(f"n={n} exceeds the permanent cap")
    if subset is None:
        subset = tuple(range(select_k(n, m=m).k)) if n >= 3 else tuple(range(m))
    subset = tuple(int(k) for k in subset)
    j = j_model.j_function() if hasattr(j_model, "j_function") else j_model
    if not isinstance(j, JFunction) or j.n != n:
        raise ContractError("j_model must give a J-function for n particles")
    stream = _stream(rng)
    draws = stream.child(0).generator()
    outcomes = stream.child(1).generator().random(runs)
    records = []
    for r in range(runs):
        inputs = tuple(sorted(int(x) for x in draws.choice(m, size=n, replace=False)))
        h = build_h(BunchingProblem(u, inputs, subset))
        p = prob_all_in_subset(j, h)
        records.append(RunRecord(inputs, p, bool(outcomes[r] < p)))
    probs = np.array([rec.probability for rec in records])
    spec = AverageSpec(n, m, len(subset))
    boson = avg_quantum(spec)
    classical = avg_classical_approx(spec)
    bunched = sum(rec.bunched for rec in records)
    if runs:
        band = _band(boson, runs)
        verdict = "PASS" if band[0] <= bunched / runs <= band[1] else "FAIL"
    else:
        band, verdict = (0.0, 1.0), "INCONCLUSIVE"
    report = ProtocolReport("scattershot", runs, bunched, boson, band, verdict, stream.master_seed)
    se = float(np.std(probs, ddof=1) / math.sqrt(runs)) if runs > 1 else float("nan")
    return ScattershotResult(
        report,
        float(np.mean(probs)) if runs else float("nan"),
        se,
        boson,
        classical.value,
        classical.value * classical.correction_scale,
        records,
    )


def haar_average_of_fock_mixture(source: ExplicitFockMixture | RandomPhase, n: int, m: int, k: int) -> float:
    """Haar average of the bunching probability of a Fock mixture of indistinguishable bosons.

    Every occupation has the same average, so the weights drop out.
    """
    if source.n != n:
        raise ContractError("source particle number does not match n")
    return avg_quantum(AverageSpec(n, m, k))


# -- truncated permanent estimator ----------------------------------------------


@dataclass(frozen=True)
class EstimatorConfig:
    """Accuracy target ``eps = N^-kappa`` in a dilute network ``M ~ N^(2 + delta)``."""

    kappa: float
    delta: float
    truncation_order: int | None = None

    def __post_init__(self):
        if self.kappa <= 0 or self.delta <= 0:
            raise ContractError("kappa and delta must be positive")
        if self.truncation_order is not None and self.truncation_order < 1:
            raise ContractError("truncation order must be >= 1")

    @property
    def s(self) -> int:
        if self.truncation_order is not None:
            return self.truncation_order
        return math.ceil((self.kappa + 1) / self.delta - 1e-12)


@dataclass(frozen=True)
class EstimatorResult:
    estimate: float
    truncation_order: int
    flop_estimate: int  # C(N, s) s 2^s
    measured_work: int  # Ryser work actually spent, all orders up to s
    ts_empirical: float  # T_s = sum of order-s principal permanents of Phi
    ts_mean: float  # Haar average of T_s
    epsilon: float
    chebyshev_bound: float  # Pr(T_s > eps) <= <T_s>/eps
    exact_fallback: bool


def _rising(x: int, s: int) -> float:
    out = 1.0
    for i in range(s):
        out *= x + i
    return out


def approx_permanent_from_rows(rows, complement, cfg: EstimatorConfig) -> EstimatorResult:
    """Estimator core for the ``N`` input rows of a unitary network.

    ``H = I - Phi`` with ``Phi = B B^dag`` and ``B = rows[:, complement]``, and
    ``per(I - Phi) = sum_beta (-1)^|beta| per(Phi[beta, beta])`` over all index
    subsets. The sum is truncated after subsets of size ``s``.
    """
    rows = as_matrix(rows)
    n, m = rows.shape
    complement = np.asarray(complement, dtype=np.int64)
    b = rows[:, complement]
    phi = b @ b.conj().T
    s = cfg.s
    eps = float(n) ** (-cfg.kappa)
    ts_mean = math.comb(n, min(s, n)) * _rising(len(complement), min(s, n)) / _rising(m, min(s, n))
    if s > n:
        log.warning("truncation order s=%d exceeds N=%d; computing the exact permanent", s, n)
        exact = permanent_ryser(np.eye(n) - phi).real
        return EstimatorResult(exact, n, ryser_flops(n), ryser_flops(n), 0.0, ts_mean, eps,
                               ts_mean / eps, True)
    estimate = 1.0
    work = 0
    ts = 0.0
    for r in range(1, s + 1):
        combos = np.array(list(itertools.combinations(range(n), r)), dtype=np.int64)
        t_r = float(np.sum(principal_permanents(phi, combos)).real)
        work += len(combos) * ryser_flops(r)
        estimate += (-1) ** r * t_r
        ts = t_r
    return EstimatorResult(
        estimate, s, math.comb(n, s) * ryser_flops(s), work, ts, ts_mean, eps,
        ts_mean / eps, False,
    )


def approx_permanent(problem: BunchingProblem, cfg: EstimatorConfig) -> EstimatorResult:
    """Estimate ``per(H)`` from low-order principal permanents of the complement matrix."""
    u = check_unitary(problem.network)
    if len(set(problem.input_modes)) != problem.n:
        raise ContractError("the estimator needs single particles in distinct input modes")
    complement = np.setdiff1d(np.arange(problem.m), problem.output_subset)
    return approx_permanent_from_rows(u[list(problem.input_modes)], complement, cfg)


def redraw_subset(rows, l: int, cfg: EstimatorConfig, rng, max_tries: int = 100):
    """Draw random complement sets of size ``l`` until ``T_s <= eps``.

    Returns the accepted complement, its estimator result and the number of
    draws; raises :class:`ContractError` if ``max_tries`` draws all fail.
    """
    rows = as_matrix(rows)
    gen = _stream(rng).generator() if not isinstance(rng, np.random.Generator) else rng
    for attempt in range(1, max_tries + 1):
        comp = np.sort(gen.choice(rows.shape[1], size=l, replace=False))
        res = approx_permanent_from_rows(rows, comp, cfg)
        if res.ts_empirical <= res.epsilon:
            return comp, res, attempt
    raise ContractError(f"no subset with T_s <= eps in {max_tries} draws")


# -- suppression law and loophole -------------------------------------------------


def fourier_network(m: int) -> np.ndarray:
    """``F[k, l] = exp(2 pi i k l / m) / sqrt(m)`` with 0-based ``k, l``.

    Differs from the 1-based convention only by input and output phases, which
    leave every output probability unchanged.
    """
    if m < 1:
        raise ContractError("m must be >= 1")
    k = np.arange(m)
    return np.exp(2j * np.pi * np.outer(k, k) / m) / math.sqrt(m)


def allowed_by_suppression(config, n: int) -> bool:
    """Whether the mode indices of an output occupation sum to a multiple of ``n``."""
    return sum(i * c for i, c in enumerate(config)) % n == 0


@dataclass
class SuppressionReport:
    m: int
    input_modes: tuple[int, ...]
    allowed: list[tuple[int, ...]]
    forbidden_max_prob: float
    allowed_fraction: float
    allowed_probability: float


def suppression_check(n: int, p_exponent: int = 2, k1: int = 0, j: JFunction | None = None) -> SuppressionReport:
    """Output distribution of a Fourier network with a cyclic input, against the suppression law.

    ``M = n^p`` and the inputs are ``k1 + a n^(p-1)``. ``allowed`` lists the
    configurations whose index sum is divisible by ``n``.
    """
    if p_exponent < 2:
        raise ContractError("p_exponent must be >= 2")
    m = n**p_exponent
    step = n ** (p_exponent - 1)
    if not 0 <= k1 < step:
        raise ContractError(f"k1 must lie in [0, {step})")
    modes = tuple(k1 + a * step for a in range(n))
    j = j_indistinguishable(n) if j is None else j
    dist = full_output_distribution(fourier_network(m), modes, j)
    allowed = [c for c in dist if allowed_by_suppression(c, n)]
    forbidden = [p for c, p in dist.items() if not allowed_by_suppression(c, n)]
    return SuppressionReport(
        m,
        modes,
        allowed,
        float(max(forbidden)) if forbidden else 0.0,
        len(allowed) / len(dist),
        float(sum(dist[c] for c in allowed)),
    )


def loophole_network(n1: int) -> np.ndarray:
    """Two diagonal blocks, each interleaving two copies of the ``n1^2``-mode Fourier matrix.

    Inside a block of size ``2 n1^2`` the even local modes form one copy and the
    odd local modes the other.
    """
    m1 = n1 * n1
    f = fourier_network(m1)
    block = np.zeros((2 * m1, 2 * m1), dtype=np.complex128)
    block[0::2, 0::2] = f
    block[1::2, 1::2] = f
    return np.kron(np.eye(2), block)


@dataclass
class LoopholeReport:
    adversary_network: np.ndarray
    input_modes: tuple[int, ...]
    all_outputs_in_allowed_set: bool
    block_laws_hold: bool
    support_size: int
    honest_forbidden_prob: float  # total forbidden probability for the Fourier network, same input


def _block_law(config, n1: int) -> bool:
    m1 = n1 * n1
    sums = {}
    counts = {}
    for g, c in enumerate(config):
        if c:
            block, r = divmod(g, 2 * m1)
            key = (block, r % 2)
            sums[key] = sums.get(key, 0) + c * (r // 2)
            counts[key] = counts.get(key, 0) + c
    return all(counts[key] == n1 and sums[key] % n1 == 0 for key in sums)


def loophole_demo(n1: int = 2, k1: int = 1, zero_tol: float | None = None) -> LoopholeReport:
    """Two mutually distinguishable groups of ``n1`` bosons fed into :func:`loophole_network`.

    Every output with nonzero probability satisfies the Fourier suppression law
    for ``N = 2 n1`` particles, although neither the network nor the particles
    are the ones the law is meant to certify.
    """
    if n1 != 2:
        raise CapacityError("exact enumeration is only supported for n1 = 2 (N = 4, M = 16)")
    n = 2 * n1
    m = n * n
    step = n
    if not 0 <= k1 < step:
        raise ContractError(f"k1 must lie in [0, {step})")
    modes = tuple(k1 + a * step for a in range(n))
    j = j_distinguishable(labels=[0] * n1 + [1] * n1)
    tol = settings().suppression_zero_tol if zero_tol is None else zero_tol
    u = loophole_network(n1)
    with use_settings(distribution_mode_cap=max(m, settings().distribution_mode_cap)):
        dist = full_output_distribution(u, modes, j)
        honest = full_output_distribution(fourier_network(m), modes, j)
    support = [c for c, p in dist.items() if p > tol]
    return LoopholeReport(
        u,
        modes,
        all(allowed_by_suppression(c, n) for c in support),
        all(_block_law(c, n1) for c in support),
        len(support),
        float(sum(p for c, p in honest.items() if not allowed_by_suppression(c, n))),
    )


# -- lossy networks -----------------------------------------------------------------


class EmbeddingFactors(NamedTuple):
    eigvecs: np.ndarray  # S, with sqrt(U U^dag) = S D S^dag
    transmissions: np.ndarray  # diagonal of D
    unitary_factor: np.ndarray  # from U = sqrt(U U^dag) W


def embedding_factors(u) -> EmbeddingFactors:
    """Eigen-decomposition of ``sqrt(U U^dag)`` in a canonical gauge.

    Columns of ``S`` are permuted to put the largest entries on the diagonal
    where possible and rephased so the diagonal is real non-negative; this
    makes a diagonal loss matrix give ``S = I``.
    """
    pol = polar_and_svd(u)
    s = pol.left_vectors.copy()
    eta = pol.singular_values.copy()
    order = np.argmax(np.abs(s), axis=0)
    if len(set(order.tolist())) == len(order):
        perm = np.argsort(order)
        s, eta = s[:, perm], eta[perm]
    diag = np.diagonal(s)
    phase = np.where(np.abs(diag) > 0, np.conj(diag) / np.where(np.abs(diag) > 0, np.abs(diag), 1), 1)
    s = s * phase
    # lossless directions get exactly zero leakage
    eta = np.where(eta >= 1.0 - settings().passivity_tol, 1.0, eta)
    return EmbeddingFactors(s, np.clip(eta, 0.0, 1.0), pol.unitary_factor)


def lossy_embedding(u) -> np.ndarray:
    """``2M x 2M`` unitary whose top-left block is the passive network ``u``.

    ``[[U, V], [-V^dag W, D]]`` with ``D`` the singular values of ``U``,
    ``V = S Q``, ``Q = diag(sqrt(1 - D^2))``. The extra modes take vacuum input
    and their outputs are the loss channels.
    """
    u = as_matrix(u, square=True)
    s, d, w = embedding_factors(u)
    q = np.sqrt(np.clip(1.0 - d**2, 0.0, None))
    v = s * q
    top = np.hstack([u, v])
    bottom = np.hstack([-v.conj().T @ w, np.diag(d).astype(np.complex128)])
    return np.vstack([top, bottom])


def embedding_product_form(u) -> np.ndarray:
    """The same embedding assembled as a product of four unitaries."""
    u = as_matrix(u, square=True)
    s, d, w = embedding_factors(u)
    m = u.shape[0]
    eye = np.eye(m)
    zero = np.zeros((m, m))
    q = np.diag(np.sqrt(np.clip(1.0 - d**2, 0.0, None)))
    dd = np.diag(d)
    left = np.block([[s, zero], [zero, eye]])
    core = np.block([[dd, q], [-q, dd]])
    right = np.block([[w, zero], [zero, eye]])
    return left @ core @ left.conj().T @ right
