"""Experiment configuration, the training loop, method comparison and diagnostics.

Config files are flat ``key = value`` text; ``#`` starts a comment. See
``CONFIG_KEYS`` for the accepted keys and their types. Unknown keys are
rejected.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import distributions as dist
from . import envs
from . import information_geometry as ig
from . import natural_gradient as ng
from .distributions import GAUSSIAN, LOG_SCALE, NATURAL, ParamVector
from .errors import ChartViolationError, ConfigError, DegenerateGradientError

METHODS = ("vanilla", "npg-exact-fisher", "npg-sampled-fisher", "npg-cg")
CSV_HEADER = ("iter", "objective", "grad_norm", "natgrad_norm", "alpha", "predicted_kl",
              "realized_kl", "solver_iters", "backtracks", "ms")


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = "gaussian-bandit"
    # gaussian bandit
    target: float = 2.0
    mu0: float = 0.0
    sigma0: float = 1.0
    # gridworld
    width: int = 4
    height: int = 4
    start: tuple[int, int] = (0, 0)
    goal: tuple[int, int] = (3, 3)
    step_reward: float = -0.01
    goal_reward: float = 1.0
    horizon: int = 50
    # policy and optimizer
    chart: str = NATURAL
    method: str = "npg-exact-fisher"
    epsilon: float | None = None
    alpha: float | None = None
    batch_size: int = 1000
    iterations: int = 50
    gamma: float = 0.99
    seed: int = 0
    damping: float = ig.DEFAULT_DAMPING
    baseline: str = "none"
    backtracking: bool = False
    sigma_floor: float = 1e-3
    cg_tol: float = 1e-10
    sample_budget: int = 10_000_000
    timing: bool = False
    out: str | None = None
    # comparison
    threshold: float = -0.25
    compare_methods: tuple[str, ...] = ()
    compare_seeds: tuple[int, ...] = ()

    def validate(self, *, for_compare: bool = False) -> ExperimentConfig:
        """Raise :class:`ConfigError` on any invariant violation; return self."""
        def bad(msg):
            raise ConfigError(msg)

        if self.env not in ("gaussian-bandit", "gridworld"):
            bad(f"env must be gaussian-bandit or gridworld, got {self.env!r}")
        if self.chart not in dist.CHARTS:
            bad(f"unknown chart {self.chart!r}")
        if self.env == "gridworld" and self.chart != NATURAL:
            bad("the gridworld's softmax policy only has the natural chart")
        if self.env == "gaussian-bandit" and not self.sigma0 > 0:
            bad("sigma0 must be positive")
        if self.iterations < 1:
            bad("iterations must be positive")
        if self.batch_size < 1:
            bad("batch_size must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            bad("gamma must lie in [0, 1]")
        if self.damping < 0:
            bad("damping must be nonnegative")
        if self.baseline not in envs.BASELINES:
            bad(f"baseline must be one of {envs.BASELINES}")
        if not self.sigma_floor > 0:
            bad("sigma_floor must be positive")
        if self.batch_size * self.iterations > self.sample_budget:
            bad(f"batch_size * iterations = {self.batch_size * self.iterations} "
                f"exceeds sample_budget {self.sample_budget}")
        if self.env == "gridworld":
            try:
                self.environment()
            except ValueError as exc:
                bad(str(exc))
        if for_compare:
            if len(self.compare_methods) < 2:
                bad("compare needs at least 2 methods (compare_methods)")
            if len(self.compare_seeds) < 2:
                bad("compare needs at least 2 seeds (compare_seeds)")
            for m in self.compare_methods:
                self.for_method(m).validate()
            return self
        if self.method not in METHODS:
            bad(f"method must be one of {METHODS}, got {self.method!r}")
        if self.method == "vanilla":
            if self.alpha is None or self.epsilon is not None:
                bad("vanilla takes alpha and no epsilon")
            if not self.alpha > 0:
                bad("alpha must be positive")
        else:
            if self.epsilon is None or self.alpha is not None:
                bad(f"{self.method} takes epsilon and no alpha")
            if not self.epsilon > 0:
                bad("epsilon must be positive")
        return self

    def for_method(self, method: str) -> ExperimentConfig:
        """The single-method config a comparison runs for ``method``."""
        if method == "vanilla":
            return dataclasses.replace(self, method=method, epsilon=None)
        return dataclasses.replace(self, method=method, alpha=None)

    def family(self) -> dist.PolicyFamily:
        if self.env == "gaussian-bandit":
            return dist.gaussian_family(self.chart)
        return dist.categorical_family(4)

    def environment(self):
        if self.env == "gaussian-bandit":
            return envs.GaussianBandit(self.target)
        return envs.Gridworld(self.width, self.height, self.start, self.goal,
                              self.step_reward, self.goal_reward, self.horizon)

    def initial_theta(self) -> ParamVector:
        if self.env == "gaussian-bandit":
            theta = dist.params([self.mu0, self.sigma0])
            return dist.reparameterize(dist.gaussian_family(), theta, self.chart)
        return dist.params(np.zeros(4 * self.width * self.height))


# key -> parser; values are the text after "=" with surrounding space stripped
def _bool(s: str) -> bool:
    v = s.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _pair(s: str) -> tuple[int, int]:
    parts = [p.strip() for p in s.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'x, y', got {s!r}")
    return int(parts[0]), int(parts[1])


def _strs(s: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in s.split(",") if p.strip())


def _ints(s: str) -> tuple[int, ...]:
    out = []
    for p in _strs(s):
        if ".." in p:
            lo, hi = p.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(p))
    return tuple(out)


CONFIG_KEYS = {
    "env": str, "target": float, "mu0": float, "sigma0": float,
    "width": int, "height": int, "start": _pair, "goal": _pair,
    "step_reward": float, "goal_reward": float, "horizon": int,
    "chart": str, "method": str, "epsilon": float, "alpha": float,
    "batch_size": int, "iterations": int, "gamma": float, "seed": int,
    "damping": float, "baseline": str, "backtracking": _bool,
    "sigma_floor": float, "cg_tol": float, "sample_budget": int, "timing": _bool,
    "out": str, "threshold": float, "compare_methods": _strs, "compare_seeds": _ints,
}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse config text. ``overrides`` replace parsed values (``None`` is ignored)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(values) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), **overrides)


def bundled_config(name: str) -> ExperimentConfig:
    """Load one of the configs shipped in ``natgrad/configs`` (e.g. ``"race"``)."""
    text = resources.files("natgrad").joinpath("configs", f"{name}.cfg").read_text()
    return parse_config(text)


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if isinstance(v, bool):
            v = str(v).lower()
        elif isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MetricsRow:
    iter: int
    objective: float
    grad_norm: float
    natgrad_norm: float | None = None
    alpha: float | None = None
    predicted_kl: float | None = None
    realized_kl: float | None = None
    solver_iters: int | None = None
    backtracks: int | None = None
    ms: float | None = None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


@dataclass
class MetricsTable:
    rows: list[MetricsRow] = field(default_factory=list)
    aborted: str | None = None
    samples_used: int = 0
    final_theta: ParamVector | None = None

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.rows])

    def iterations_to_threshold(self, threshold: float) -> int | None:
        """Index of the first iteration whose batch objective reaches ``threshold``."""
        for r in self.rows:
            if r.objective >= threshold:
                return r.iter
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_HEADER) + "\n")
        for r in self.rows:
            buf.write(",".join(_fmt(getattr(r, k)) for k in CSV_HEADER) + "\n")
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())


def read_metrics_csv(text: str) -> list[MetricsRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")
    ints = {"iter", "solver_iters", "backtracks"}
    rows = []
    for rec in reader:
        kw = {}
        for k, v in zip(CSV_HEADER, rec):
            kw[k] = None if v == "" else (int(v) if k in ints else float(v))
        rows.append(MetricsRow(**kw))
    return rows


def _batch_seed(seed: int, iteration: int) -> int:
    return int(np.random.SeedSequence([seed, iteration]).generate_state(1, np.uint64)[0])


def _apply_sigma_floor(cfg: ExperimentConfig, family, theta: ParamVector) -> ParamVector:
    if family.kind != GAUSSIAN:
        return theta
    v = theta.values.copy()
    floor = cfg.sigma_floor if family.chart == NATURAL else np.log(cfg.sigma_floor)
    if v[1] >= floor:
        return theta
    v[1] = floor
    return ParamVector(v, theta.chart)


def run_experiment(cfg: ExperimentConfig) -> MetricsTable:
    """Train one policy; one metrics row per iteration.

    Each iteration rolls out a batch, estimates the REINFORCE gradient and,
    for the natural methods, a Fisher matrix, then takes one update. A chart
    violation (e.g. a vanilla step driving sigma negative) ends the run;
    the rows so far are kept and ``aborted`` holds the reason. If
    ``cfg.out`` is set the CSV is written there in either case.
    """
    cfg.validate()
    env = cfg.environment()
    family = cfg.family()
    theta = cfg.initial_theta()
    table = MetricsTable()
    tabular = cfg.env == "gridworld"

    for k in range(cfg.iterations):
        t0 = time.perf_counter()
        batch = envs.rollout_batch(env, family, theta, cfg.batch_size, _batch_seed(cfg.seed, k))
        table.samples_used += len(batch)
        objective = envs.estimate_objective(batch, cfg.gamma)
        grad = envs.reinforce_gradient(batch, cfg.gamma, cfg.baseline, theta.chart)
        row = dict(iter=k, objective=objective, grad_norm=float(np.linalg.norm(grad.values)))
        try:
            if cfg.method == "vanilla":
                theta = ng.vanilla_update(theta, grad, cfg.alpha, family)
                row["alpha"] = cfg.alpha
            else:
                weights = envs.state_visit_frequencies(batch, env.n_states) if tabular else None
                fisher, solver = _fisher_for(cfg, family, theta, batch, weights)
                try:
                    rep = ng.npg_update(family, theta, grad, fisher, cfg.epsilon, audit=True,
                                        backtracking=cfg.backtracking, solver_choice=solver,
                                        state_weights=weights)
                except DegenerateGradientError:
                    # nothing to follow this iteration; keep theta
                    rep = None
                if rep is not None:
                    theta = rep.theta_new
                    row.update(natgrad_norm=float(np.linalg.norm(rep.natural_gradient.values)),
                               alpha=rep.alpha, predicted_kl=rep.predicted_kl,
                               realized_kl=rep.realized_kl, solver_iters=rep.solve.iterations,
                               backtracks=rep.backtrack_count)
            theta = _apply_sigma_floor(cfg, family, theta)
        except ChartViolationError as exc:
            table.rows.append(MetricsRow(**row))
            table.aborted = f"iteration {k}: {exc}"
            break
        if cfg.timing:
            row["ms"] = (time.perf_counter() - t0) * 1e3
        table.rows.append(MetricsRow(**row))

    assert table.samples_used <= cfg.sample_budget, "sample budget exceeded"
    table.final_theta = theta
    if cfg.out:
        table.write(cfg.out)
    return table


def _fisher_for(cfg, family, theta, batch, weights):
    scores = envs.step_scores(batch)
    if cfg.method == "npg-exact-fisher":
        if weights is None:
            f = dist.fisher_analytic(family, theta)
            if family.kind != GAUSSIAN:
                f = ig.damp(f, cfg.damping)
        else:
            f = ig.damp(ig.FisherEstimate(dist.tabular_fisher(family, theta, weights)),
                        cfg.damping)
        return f, "auto"
    if cfg.method == "npg-sampled-fisher":
        return ig.damp(ig.fisher_from_samples(scores), cfg.damping), "auto"
    return ig.fisher_vector_product(scores, cfg.damping), "cg"


@dataclass(frozen=True)
class RunOutcome:
    method: str
    seed: int
    iterations_to_threshold: int | None
    final_objective: float
    iterations_run: int
    aborted: str | None


@dataclass(frozen=True)
class MethodSummary:
    method: str
    runs: int
    reached: int
    median_iters: float
    mean_iters: float
    std_iters: float
    mean_final_objective: float
    std_final_objective: float


@dataclass
class ComparisonReport:
    threshold: float
    iteration_cap: int
    outcomes: list[RunOutcome]
    summaries: list[MethodSummary]

    def summary(self, method: str) -> MethodSummary:
        """The first summary for ``method`` (a method may be listed more than once)."""
        return next(s for s in self.summaries if s.method == method)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("method,seed,iters_to_threshold,reached,final_objective,iterations_run,aborted\n")
        for o in self.outcomes:
            iters = self.iteration_cap if o.iterations_to_threshold is None else o.iterations_to_threshold
            buf.write(f"{o.method},{o.seed},{iters},{int(o.iterations_to_threshold is not None)},"
                      f"{_fmt(o.final_objective)},{o.iterations_run},{int(o.aborted is not None)}\n")
        buf.write("\n# summary\n")
        buf.write("method,runs,reached,median_iters,mean_iters,std_iters,"
                  "mean_final_objective,std_final_objective\n")
        for s in self.summaries:
            buf.write(",".join([s.method, str(s.runs), str(s.reached)]
                               + [_fmt(v) for v in (s.median_iters, s.mean_iters, s.std_iters,
                                                    s.mean_final_objective,
                                                    s.std_final_objective)]) + "\n")
        return buf.getvalue()

    def text_summary(self) -> str:
        lines = [f"threshold J >= {self.threshold:g}; runs that never reach it count as "
                 f"{self.iteration_cap} (censored)",
                 f"{'method':<20} {'reached':>9} {'median':>8} {'mean':>8} {'std':>8} "
                 f"{'final J':>10}"]
        for s in self.summaries:
            lines.append(f"{s.method:<20} {s.reached:>4}/{s.runs:<4} {s.median_iters:>8.1f} "
                         f"{s.mean_iters:>8.1f} {s.std_iters:>8.1f} "
                         f"{s.mean_final_objective:>10.4f}")
        return "\n".join(lines)


def compare_methods(config_base: ExperimentConfig, methods=None, seeds=None) -> ComparisonReport:
    """Run every (method, seed) cell and summarize iterations-to-threshold.

    Runs that never reach ``config_base.threshold`` (including aborted ones)
    are censored at the iteration cap rather than treated as errors.
    """
    methods = tuple(methods or config_base.compare_methods)
    seeds = tuple(seeds or config_base.compare_seeds)
    cfg = dataclasses.replace(config_base, compare_methods=methods, compare_seeds=seeds, out=None)
    cfg.validate(for_compare=True)
    cap = cfg.iterations
    outcomes = []
    per_method = []
    for m in methods:
        mine = []
        for s in seeds:
            table = run_experiment(dataclasses.replace(cfg.for_method(m), seed=s))
            mine.append(RunOutcome(m, s, table.iterations_to_threshold(cfg.threshold),
                                   float(table.rows[-1].objective), len(table.rows),
                                   table.aborted))
        outcomes += mine
        per_method.append((m, mine))
    summaries = []
    for m, mine in per_method:
        iters = np.array([cap if o.iterations_to_threshold is None else o.iterations_to_threshold
                          for o in mine], dtype=float)
        finals = np.array([o.final_objective for o in mine])
        summaries.append(MethodSummary(
            m, len(mine), sum(o.iterations_to_threshold is not None for o in mine),
            float(np.median(iters)), float(iters.mean()), float(iters.std()),
            float(finals.mean()), float(finals.std()),
        ))
    return ComparisonReport(cfg.threshold, cap, outcomes, summaries)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool


@dataclass
class DiagnosticsReport:
    checks: list[Check]
    pairs: list[tuple[tuple[float, float], tuple[float, float], ng.DistanceRecord]]
    fisher_deviation: float
    sampled_fisher_curve: list[tuple[int, float]]
    chart_table: list[tuple[float, float, float]]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def text(self) -> str:
        out = ["Euclidean vs KL (gaussian pairs, nats):"]
        for a, b, r in self.pairs:
            out.append(f"  {a} -> {b}: euclidean={r.euclidean:.6g} "
                       f"KL(a||b)={r.kl_ab:.6g} KL(b||a)={r.kl_ba:.6g}")
        out.append(f"Fisher vs FD KL-Hessian, max scaled deviation: {self.fisher_deviation:.3g}")
        out.append("Sampled Fisher relative error (gaussian theta=(0,1)):")
        out += [f"  N={n:>7d}  err={e:.4g}" for n, e in self.sampled_fisher_curve]
        out.append("Chart gap KL(natural-chart step || log-chart step):")
        out.append(f"  {'epsilon':>8} {'npg':>12} {'vanilla':>12}")
        out += [f"  {e:>8.0e} {d1:>12.4e} {d2:>12.4e}" for e, d1, d2 in self.chart_table]
        out.append("Checks:")
        out += [f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.value:.6g} "
                f"(tolerance {c.tolerance:g})" for c in self.checks]
        return "\n".join(out)


UNIT_SHIFT_PAIRS = (((0.0, 0.3), (1.0, 0.3)), ((0.0, 3.0), (1.0, 3.0)))


def fisher_fd_deviation(n_points: int = 20, seed: int = 0) -> float:
    """Max over random points of ``|F - H_fd|_inf / (1 + |F|_inf)`` for both families."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    cases = []
    for _ in range(n_points):
        cases.append((dist.gaussian_family(), dist.params([rng.uniform(-2, 2), rng.uniform(0.3, 3)])))
        cases.append((dist.gaussian_family(LOG_SCALE),
                      dist.params([rng.uniform(-2, 2), rng.uniform(-1, 1)], LOG_SCALE)))
        k = int(rng.integers(2, 6))
        cases.append((dist.categorical_family(k), dist.params(rng.normal(size=k))))
    for family, theta in cases:
        f = dist.fisher_matrix(family, theta)
        h = ig.kl_hessian_fd(family, theta).matrix
        worst = max(worst, np.max(np.abs(f - h)) / (1 + np.max(np.abs(f))))
    return float(worst)


def sampled_fisher_error(n: int, seed: int) -> float:
    """Max entrywise relative error of the outer-product Fisher at gaussian (0, 1)."""
    family = dist.gaussian_family()
    theta = dist.params([0.0, 1.0])
    xs = dist.sample_batch(family, theta, n, np.random.default_rng(seed))
    est = ig.fisher_from_samples(dist.score_batch(family, theta, xs)).matrix
    return fisher_relative_error(est, dist.fisher_matrix(family, theta))


def fisher_relative_error(estimate: np.ndarray, exact: np.ndarray) -> float:
    """Largest entrywise error, each entry scaled by ``sqrt(F_ii F_jj)``."""
    d = np.sqrt(np.diag(exact))
    return float(np.max(np.abs(estimate - exact) / np.outer(d, d)))


def run_diagnostics() -> DiagnosticsReport:
    """Recompute every numerical diagnostic and check it against its tolerance."""
    family = dist.gaussian_family()
    checks = []
    pairs = []
    for a, b in UNIT_SHIFT_PAIRS:
        pairs.append((a, b, ng.euclidean_vs_kl_diagnostic(family, dist.params(a), dist.params(b))))
    for (a, b, r), kl in zip(pairs, (50 / 9, 5 / 90)):
        checks.append(Check(f"euclidean {a}->{b}", abs(r.euclidean - 1.0), 1e-12,
                            abs(r.euclidean - 1.0) <= 1e-12))
        checks.append(Check(f"closed-form KL {a}->{b}", abs(r.kl_ab - kl), 1e-4,
                            abs(r.kl_ab - kl) <= 1e-4))
    ratio = pairs[0][2].kl_ab / pairs[1][2].kl_ab
    checks.append(Check("KL ratio narrow/wide pair", ratio, 99.0, ratio >= 99.0))

    dev = fisher_fd_deviation()
    checks.append(Check("Fisher vs FD KL-Hessian", dev, 1e-4, dev <= 1e-4))

    curve = [(n, sampled_fisher_error(n, seed=1)) for n in (100, 1000, 10_000, 100_000)]
    checks.append(Check("sampled Fisher error at N=1e5", curve[-1][1], 0.05, curve[-1][1] <= 0.05))

    theta = dist.params([0.0, 0.5])
    grad = dist.params(envs.GaussianBandit(2.0).expected_gradient(0.0, 0.5))
    table = [(e, ng.chart_gap(theta, grad, e, "npg"), ng.chart_gap(theta, grad, e, "vanilla"))
             for e in (1e-2, 1e-3, 1e-4)]
    superlinear = all(table[i + 1][1] <= table[i][1] / 10 for i in range(len(table) - 1))
    worst = max(table[i + 1][1] / (table[i][1] / 10) for i in range(len(table) - 1))
    checks.append(Check("npg chart gap decays superlinearly (worst d(e/10)/(d(e)/10))",
                        worst, 1.0, superlinear))
    dominance = table[-1][2] / table[-1][1]
    checks.append(Check("vanilla/npg chart gap at 1e-4", dominance, 10.0, dominance > 10.0))
    return DiagnosticsReport(checks, pairs, dev, curve, table)
