"""Monte-Carlo engine, analytic rate bounds and figure presets."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .array import sa
from .channel import channel_matrix, generate_multipath, place_ues
from .errors import PreconditionError
from .precoding import MuMimoChannel, precode
from .scenario import Scenario

SCHEMES = ("FLDMA_MMSE", "FLDMA_ZF", "SDMA_MMSE", "SDMA_ZF")
SWEEPABLE = ("snr_db", "num_ues", "theta_max_deg", "r_max", "rho_max", "num_paths", "rician_kappa")
# condition number of H H^H above which a trial is flagged (but still counted)
ILL_CONDITIONED = 1e10


@dataclass
class TrialRecord:
    trial_index: int
    spectral_efficiency: dict
    condition_number: dict


def trial_seeds(seed: int, trial_index: int) -> tuple[np.random.Generator, np.random.Generator, int]:
    """Independent streams for geometry, multipath and the offset permutation.

    All schemes of one trial share these, so FLDMA and SDMA see the same UEs.
    """
    ss = np.random.SeedSequence([seed, trial_index])
    geo, paths, plan = ss.spawn(3)
    return np.random.default_rng(geo), np.random.default_rng(paths), int(plan.generate_state(1)[0])


def draw_ues(scenario: Scenario, trial_index: int):
    geo_rng, path_rng, plan_seed = trial_seeds(scenario.seed, trial_index)
    locs = place_ues(scenario.num_ues, scenario.theta_max, scenario.r_max, geo_rng)
    ues = [
        generate_multipath(loc, scenario.num_paths, scenario.rician_kappa, scenario.theta_max, scenario.r_max, path_rng)
        for loc in locs
    ]
    return ues, plan_seed


def run_trial(scenario: Scenario, trial_index: int, schemes=SCHEMES) -> TrialRecord:
    """One Monte-Carlo draw evaluated for every requested scheme."""
    ues, plan_seed = draw_ues(scenario, trial_index)
    channels = {}
    se, cond = {}, {}
    gamma = scenario.snr_linear
    for name in schemes:
        family, kind = name.split("_")
        if family not in channels:
            if family == "FLDMA":
                plan = scenario.plan(plan_seed if scenario.plan_redraw == "per_trial" else None)
                rho = scenario.overhead_rho
            elif family == "SDMA":
                plan, rho = scenario.sdma_plan(), 0.0
            else:
                raise ValueError(f"unknown scheme {name!r}")
            channels[family] = (MuMimoChannel(channel_matrix(ues, plan), gamma), rho)
        ch, rho = channels[family]
        model = scenario.sinr_model
        if model == "closed_form" and kind == "ZF":
            model = "unit_columns"
        res = precode(ch, kind.lower(), model, scenario.num_subcarriers, rho)
        se[name] = res.sum_rate
        cond[name] = res.condition_number
    return TrialRecord(trial_index, se, cond)


def _run_chunk(args):
    scenario, indices, schemes = args
    return [run_trial(scenario, i, schemes) for i in indices]


def run_trials(scenario: Scenario, schemes=SCHEMES, workers: int = 1) -> list[TrialRecord]:
    """All trials of ``scenario`` in trial order, optionally in worker processes."""
    indices = list(range(scenario.trials))
    if workers <= 1 or scenario.trials < 2:
        return [run_trial(scenario, i, schemes) for i in indices]
    chunks = [indices[w::workers] for w in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [(scenario, c, tuple(schemes)) for c in chunks if c]))
    records = [r for part in parts for r in part]
    records.sort(key=lambda r: r.trial_index)
    return records


# bounds ------------------------------------------------------------------


def two_ue_bound(gamma: float, num_antennas: int, num_subcarriers: int, rho_max: float) -> float:
    """Approximate two-UE sum-rate ceiling with ``|eta|^2 = 1/(M-1)``."""
    if num_antennas < 2:
        raise PreconditionError("two-UE bound needs M >= 2")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    overhead = num_subcarriers / (num_subcarriers + rho_max)
    arg = ((gamma + 1.0) ** 2 - gamma**2 / (num_antennas - 1)) / (1.0 + gamma)
    return 2.0 * overhead * math.log2(arg)


@dataclass(frozen=True)
class BoundValue:
    value: float
    applicable: bool


def multi_ue_bound(gamma: float, num_antennas: int, num_ues: int, num_subcarriers: int, rho_max: float) -> BoundValue:
    """High-SNR K-UE ceiling ``K N/(N+rho) log2(gamma (M-K+1)/M)``.

    Outside the region ``gamma (M-K+1)/M > 1`` the expression is meaningless;
    the result is then flagged non-applicable with a NaN value.
    """
    if not 1 <= num_ues <= num_antennas:
        raise PreconditionError(f"need 1 <= K <= M, got K={num_ues}, M={num_antennas}")
    arg = gamma * (num_antennas - num_ues + 1) / num_antennas
    if not arg > 1:
        return BoundValue(float("nan"), False)
    overhead = num_subcarriers / (num_subcarriers + rho_max)
    return BoundValue(num_ues * overhead * math.log2(arg), True)


def corollary3_predicate(theta1: float, theta2: float, num_antennas: int) -> bool:
    """True when an FDA pair is expected to beat the PA pair at these angles."""
    x = (math.sin(theta1) - math.sin(theta2)) / 2.0
    return sa(num_antennas, x) ** 2 > 1.0 / num_antennas


def scenario_bound(scenario: Scenario, scheme: str) -> float:
    if not scheme.startswith("FLDMA"):
        return float("nan")
    g, m, n, rho = scenario.snr_linear, scenario.num_antennas, scenario.num_subcarriers, scenario.overhead_rho
    if scenario.num_ues == 2:
        return two_ue_bound(g, m, n, rho)
    return multi_ue_bound(g, m, scenario.num_ues, n, rho).value


# correlation oracle ------------------------------------------------------


@dataclass(frozen=True)
class Lemma1Sample:
    mean: complex
    variance: float
    mean_stderr: float
    variance_stderr: float
    num_shuffles: int


def lemma1_oracle(p: float, q: float, num_antennas: int, num_shuffles: int, seed) -> Lemma1Sample:
    """Brute-force statistics of ``eta = (1/M) sum_m exp(j 2 pi (m p - z_m q))``.

    ``z`` is a uniformly random permutation of ``0..M-1``, drawn afresh for
    every shuffle.  The mean standard error is ``sqrt(var / n)`` and the
    variance standard error ``sqrt((m4 - var^2) / n)`` with ``m4`` the fourth
    central absolute moment.
    """
    if num_shuffles < 1:
        raise ValueError("num_shuffles must be positive")
    rng = np.random.default_rng(seed)
    m = np.arange(num_antennas)
    perms = rng.permuted(np.tile(m, (num_shuffles, 1)), axis=1)
    angle_part = np.exp(2j * np.pi * m * p)
    dist_part = np.exp(-2j * np.pi * m * q)[perms]
    eta = (dist_part * angle_part).mean(axis=1)
    mean = eta.mean()
    dev2 = np.abs(eta - mean) ** 2
    var = float(dev2.mean())
    m4 = float((dev2**2).mean())
    return Lemma1Sample(
        complex(mean),
        var,
        math.sqrt(var / num_shuffles),
        math.sqrt(max(m4 - var**2, 0.0) / num_shuffles),
        num_shuffles,
    )


# sweeps ------------------------------------------------------------------


@dataclass
class SweepSpec:
    base: Scenario
    parameter: str
    values: list
    comparison: tuple = ("FLDMA_MMSE", "SDMA_MMSE")
    label: str = ""

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.parameter!r}; choose from {', '.join(SWEEPABLE)}")
        self.values = list(self.values)
        if not self.values:
            raise ValueError("sweep values must be non-empty")
        diffs = np.diff(np.asarray(self.values, dtype=float))
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("sweep values must be strictly monotone")
        bad = [s for s in self.comparison if s not in SCHEMES]
        if bad:
            raise ValueError(f"unknown scheme {bad[0]!r}")
        self.comparison = tuple(self.comparison)

    def scenarios(self):
        return [self.base.replace(**{self.parameter: v}) for v in self.values]


@dataclass
class SweepPoint:
    value: float
    scheme: str
    mean: float
    stderr: float
    ci95: float
    bound: float
    trials: int
    ill_conditioned: int
    rho_max: float


@dataclass
class SweepResult:
    spec: SweepSpec
    points: list = field(default_factory=list)
    wall_clock: float = 0.0

    def series(self, scheme: str):
        pts = [p for p in self.points if p.scheme == scheme]
        return (
            np.array([p.value for p in pts], dtype=float),
            np.array([p.mean for p in pts]),
            np.array([p.stderr for p in pts]),
        )

    def point(self, scheme: str, value) -> SweepPoint:
        for p in self.points:
            if p.scheme == scheme and p.value == value:
                return p
        raise KeyError((scheme, value))


def summarize(records, scenario: Scenario, scheme: str, value) -> SweepPoint:
    se = np.array([r.spectral_efficiency[scheme] for r in records])
    n = se.size
    mean = float(np.mean(se))
    stderr = float(np.std(se, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    bad = sum(1 for r in records if r.condition_number[scheme] > ILL_CONDITIONED)
    rho = scenario.overhead_rho if scheme.startswith("FLDMA") else 0.0
    return SweepPoint(value, scheme, mean, stderr, 1.96 * stderr, scenario_bound(scenario, scheme), n, bad, rho)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("FLDMA_WORKERS", "1")))
    except ValueError:
        return 1


def monte_carlo(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Run every sweep point; results do not depend on ``workers``."""
    workers = default_workers() if workers is None else workers
    start = time.perf_counter()
    result = SweepResult(spec)
    for value, scenario in zip(spec.values, spec.scenarios()):
        records = run_trials(scenario, spec.comparison, workers)
        for scheme in spec.comparison:
            result.points.append(summarize(records, scenario, scheme, value))
    result.wall_clock = time.perf_counter() - start
    return result


# presets -----------------------------------------------------------------

_MULTI_UE = dict(snr_db=30.0, rho_max=30.0, theta_max_deg=60.0)


def _fig6(theta_deg):
    return [
        SweepSpec(
            Scenario(num_ues=2, theta_max_deg=theta_deg, rho_max=rho),
            "snr_db",
            [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            ("FLDMA_MMSE",),
            f"rho_max={rho:g}",
        )
        for rho in (1.0, 10.0, 50.0)
    ]


def _fig7():
    thetas = [0.0, 1.0, 2.0, 3.0, 5.0, 10.0, 15.0, 20.0, 30.0, 45.0, 60.0]
    return [
        SweepSpec(Scenario(num_ues=2, snr_db=20.0, rho_max=rho), "theta_max_deg", thetas, ("FLDMA_MMSE", "SDMA_MMSE"), f"rho_max={rho:g}")
        for rho in (1.0, 10.0, 50.0)
    ]


def _fig8():
    return [SweepSpec(Scenario(num_ues=10, **_MULTI_UE), "num_ues", list(range(10, 101, 10)), SCHEMES, "rho_max=30")]


def _fig9():
    return [
        SweepSpec(
            Scenario(num_ues=100, rician_kappa=0.0, **_MULTI_UE), "num_paths", [0, 2, 4, 8], ("FLDMA_MMSE", "SDMA_MMSE"), "kappa=0"
        )
    ]


def _fig10():
    return [
        SweepSpec(
            Scenario(num_ues=100, num_paths=4, **_MULTI_UE), "rician_kappa", [0.0, 1.0, 10.0], ("FLDMA_MMSE", "SDMA_MMSE"), "P=4"
        )
    ]


def _fig11():
    thetas = [5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0, 60.0]
    specs = []
    for k in (40, 100):
        for rho in (1.0, 10.0, 30.0, 50.0):
            base = Scenario(num_ues=k, snr_db=30.0, rho_max=rho, theta_max_deg=60.0)
            specs.append(SweepSpec(base, "theta_max_deg", thetas, ("FLDMA_MMSE", "SDMA_MMSE"), f"K={k},rho_max={rho:g}"))
    return specs


def _fig12():
    ranges = [500.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0]
    specs = []
    for k in (40, 100):
        for rho in (1.0, 10.0, 30.0, 50.0):
            base = Scenario(num_ues=k, snr_db=30.0, rho_max=rho, theta_max_deg=60.0)
            specs.append(SweepSpec(base, "r_max", ranges, ("FLDMA_MMSE", "SDMA_MMSE"), f"K={k},rho_max={rho:g}"))
    return specs


PRESETS = {
    "fig6a": lambda: _fig6(5.0),
    "fig6b": lambda: _fig6(20.0),
    "fig7": _fig7,
    "fig8": _fig8,
    "fig9": _fig9,
    "fig10": _fig10,
    "fig11": _fig11,
    "fig12": _fig12,
}


def preset(name: str, **overrides) -> list[SweepSpec]:
    """Sweep specs of a named preset; ``overrides`` patch every base scenario."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    specs = PRESETS[name]()
    if overrides:
        for s in specs:
            patch = {k: v for k, v in overrides.items() if k != s.parameter}
            s.base = s.base.replace(**patch)
    return specs
