"""Replicated experiments: relative error vs k, error vs r, meta-task series."""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np

from .._rng import spawn
from ..assignment import AssignmentError, check_parameters, degree_regular_assignment
from ..iteration import (
    SeriesConfig, Variant, run_metatask_series, run_to_convergence, update_function,
    weighted_vote,
)
from ..population import make_population, sample_answers
from ..theory import (
    CrowdMoments, asymptotic_decisions, convergence_condition, fan_in, series_mean,
    series_variance_bound,
)
from .config import ExperimentConfig, parse_value
from .output import Check, Table
from .stats import relative_error, rises_after_peak, sample_moments

# acceptance thresholds
CONVERGED_REL_ERR = 0.2
DIVERGED_REL_ERR = 0.5
MEAN_Z = 4.0
MEAN_CELL_FRACTION = 0.95
VAR_CELL_FRACTION = 0.99
AGREEMENT_FRACTION = 0.95


@dataclass
class ExperimentResult:
    name: str
    tables: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def crowd_notes(cfg: ExperimentConfig, crowd: CrowdMoments, r: int, s: int) -> list[str]:
    spec = cfg.reliability
    return [
        f"nominal reliability: mean={spec.mean:.6g} variance={spec.variance:.6g} "
        f"phi={spec.phi:.6g} phi^2={spec.phi ** 2:.6g}",
        f"empirical reliability (after {spec.clip_policy}): mean={crowd.e_p:.6g} "
        f"variance={(crowd.phi - crowd.bias ** 2) / 4:.6g} phi={crowd.phi:.6g} "
        f"phi^2={crowd.phi ** 2:.6g}",
        f"1/((s-1)(r-1)) = {1 / fan_in(r, s):.6g}; convergence condition "
        f"{'holds' if convergence_condition(crowd, r, s) else 'fails'} (empirical moments)",
    ]


def _tracked_edges(asg, reliabilities, n):
    """First edge of the median-reliability user, then users at spread quantiles."""
    order = np.argsort(reliabilities, kind="stable")
    quantiles = [0.5, 0.1, 0.9, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6, 0.0, 1.0]
    out = []
    for q in quantiles:
        user = int(order[min(int(q * len(order)), len(order) - 1)])
        e = int(asg.user_edges[user][0])
        if e not in out:
            out.append(e)
        if len(out) == n:
            break
    m = 0
    while len(out) < min(n, asg.n_edges):
        if m not in out:
            out.append(m)
        m += 1
    return out


def run_relative_error_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Per-edge sample mean, variance and relative error of the weights over k.

    One graph and one population are fixed; every replication draws fresh
    answers and fresh initial weights (``resample_answers`` and
    ``resample_graph`` change this).
    """
    if cfg.experiment != "relative_error_vs_k":
        raise ValueError("config is not a relative_error_vs_k experiment")
    variant = Variant(cfg.variant)
    Q, U, r, s, K, R = cfg.n_questions, cfg.n_users, cfg.r, cfg.s, cfg.iterations, cfg.replications
    if R < 2:
        raise ValueError("need at least two replications for a sample variance")
    g_seed, p_seed, fixed_answer_seed, rep_seed = spawn(cfg.master_seed, 4)
    pop = make_population(U, Q, cfg.reliability, p_seed, cfg.truth)
    asg = degree_regular_assignment(Q, U, r, s, g_seed)
    update = update_function(variant)

    answers, weights, graphs = [], [], []
    for ss in spawn(rep_seed, R):
        a_seed, w_seed, rg_seed = ss.spawn(3)
        rep_asg = degree_regular_assignment(Q, U, r, s, rg_seed) if cfg.resample_graph else asg
        graphs.append(rep_asg)
        answers.append(sample_answers(rep_asg, pop, a_seed if cfg.resample_answers
                                      else fixed_answer_seed).values)
        weights.append(np.random.default_rng(w_seed).normal(
            cfg.init_mean, np.sqrt(cfg.init_variance), asg.n_edges))
    answers = np.stack(answers)
    y = np.stack(weights)

    traj = np.empty((K, R, asg.n_edges))
    for k in range(K):
        if cfg.resample_graph:
            y = np.stack([update(g, a, w) for g, a, w in zip(graphs, answers, y)])
        else:
            y = update(asg, answers, y)
        traj[k] = y
    peak = float(np.max(np.abs(traj))) if K else 0.0

    result = ExperimentResult("relative_error_vs_k")
    crowd = CrowdMoments.from_population(pop)
    result.notes += crowd_notes(cfg, crowd, r, s)
    if peak > cfg.overflow_bound:
        msg = (f"weights reached {peak:.3g} > overflow_bound={cfg.overflow_bound:g}; "
               "consider the normalized variant")
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        result.notes.append("WARNING " + msg)

    if K:
        mu, var = sample_moments(traj, axis=1)
        rel = relative_error(mu, var)
    else:
        mu = var = rel = np.empty((0, asg.n_edges))
    tracked = _tracked_edges(asg, pop.reliabilities, cfg.tracked_edges)
    typical = tracked[0]

    stats = Table(("k", "edge", "mu_hat", "var_hat", "rel_err"))
    for k in range(K):
        for e in range(asg.n_edges):
            stats.add(k + 1, e, float(mu[k, e]), float(var[k, e]), float(rel[k, e]))
    traj_table = Table(("replication", "k", "variant", "edge", "value"))
    for rep in range(R):
        for k in range(K):
            for e in tracked:
                traj_table.add(rep, k + 1, variant.value, e, float(traj[k, rep, e]))
    result.tables = {"relative_error_vs_k": stats, "trajectories": traj_table}

    typical_rel = rel[:, typical] if K else np.empty(0)
    user = int(asg.edge_user[typical])
    result.notes.append(
        f"typical edge {typical} (user {user}, p={pop.reliabilities[user]:.4f}, "
        f"question {int(asg.edge_question[typical])})")
    result.notes.append("typical edge rel_err by k: " + " ".join(f"{v:.4g}" for v in typical_rel))
    if K:
        med = np.nanmedian(np.where(np.isnan(rel), np.inf, rel), axis=1)
        result.notes.append("median rel_err over edges by k: " + " ".join(f"{v:.4g}" for v in med))
        result.checks += relative_error_checks(typical_rel, convergence_condition(crowd, r, s))

    result.data.update(assignment=asg, population=pop, crowd=crowd, mu=mu, var=var, rel=rel,
                       typical_edge=typical, typical_rel=typical_rel, tracked=tracked)
    return result


def relative_error_checks(rel_by_k, condition_holds: bool) -> list[Check]:
    rel = np.where(np.isnan(rel_by_k), np.inf, rel_by_k)
    if condition_holds:
        last = float(rel[-1])
        rises = rises_after_peak(rel)
        return [
            Check("relative error below 0.2 by the last iteration", last < CONVERGED_REL_ERR,
                  f"rel_err(K)={last:.4g}"),
            Check("relative error non-increasing after its peak (one rise allowed)", rises <= 1,
                  f"{rises} rises after the peak"),
        ]
    low = float(np.min(rel))
    return [Check("relative error never below 0.5", low >= DIVERGED_REL_ERR,
                  f"min over k = {low:.4g}")]


def _r_sweep_point(cfg: ExperimentConfig, r: int, seed):
    Q, s = cfg.n_questions, cfg.s
    U = r * Q // s
    variant = Variant(cfg.variant)
    errs, iters, majority = [], [], []
    for ss in spawn(seed, cfg.replications):
        g_seed, p_seed, a_seed, w_seed = ss.spawn(4)
        asg = degree_regular_assignment(Q, U, r, s, g_seed)
        pop = make_population(U, Q, cfg.reliability, p_seed, cfg.truth)
        answers = sample_answers(asg, pop, a_seed).values
        y0 = np.random.default_rng(w_seed).normal(cfg.init_mean, np.sqrt(cfg.init_variance),
                                                  asg.n_edges)
        if variant is Variant.RAW:
            y, k = y0, cfg.iterations
            update = update_function(variant)
            for _ in range(cfg.iterations):
                y = update(asg, answers, y)
        else:
            y, k = run_to_convergence(asg, answers, y0, variant, cfg.steady_tol,
                                      cfg.steady_max_iterations)
        decisions = np.sign(weighted_vote(asg, answers, y))
        errs.append(np.mean(decisions != pop.truth))
        iters.append(k)
        plain = np.sign(answers.reshape(Q, r).sum(axis=1))
        majority.append(np.mean(plain != pop.truth))
    errs = 100 * np.asarray(errs)
    se = errs.std(ddof=1) / np.sqrt(len(errs)) if len(errs) > 1 else np.nan
    return U, errs.mean(), se, float(np.mean(iters)), 100 * float(np.mean(majority))


def run_error_vs_r_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Mean percentage of wrongly decided questions for each r, s held fixed.

    ``|U|`` is set to ``r |Q| / s``; every replication draws a new graph,
    population and answers.  Normalized and hard-decision weights are iterated
    until they settle, raw weights for ``iterations`` steps.
    """
    if cfg.experiment != "error_vs_r":
        raise ValueError("config is not an error_vs_r experiment")
    if Variant(cfg.variant) is Variant.SERIES:
        raise ValueError("the r sweep runs a single meta-task; series variant not allowed")
    result = ExperimentResult("error_vs_r")
    table = Table(("r", "n_users", "error_pct", "std_err_pct", "mean_iterations",
                   "majority_error_pct"))
    seeds = spawn(cfg.master_seed, len(cfg.r_values))
    errors = {}
    for r, seed in zip(cfg.r_values, seeds):
        U, rem = divmod(r * cfg.n_questions, cfg.s)
        try:
            if rem:
                raise AssignmentError(f"r*|Q| = {r * cfg.n_questions} not divisible by s={cfg.s}")
            check_parameters(cfg.n_questions, U, r, cfg.s)
        except AssignmentError as exc:
            msg = f"skipping r={r}: {exc}"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            result.notes.append("WARNING " + msg)
            continue
        U, err, se, iters, maj = _r_sweep_point(cfg, r, seed)
        errors[r] = err
        table.add(r, U, float(err), float(se), iters, maj)
    result.tables = {"error_vs_r": table}
    spec = cfg.reliability
    result.notes.append(f"reliability mean={spec.mean:.6g} variance={spec.variance:.6g} "
                        f"phi^2={spec.phi ** 2:.6g}; s={cfg.s}, |Q|={cfg.n_questions}")
    if spec.mean > 0.5:
        result.checks += error_vs_r_checks(errors)
    result.data["errors"] = errors
    return result


def error_vs_r_checks(errors: dict) -> list[Check]:
    checks = []
    tail = [errors[r] for r in sorted(errors) if r >= 4]
    if len(tail) >= 2:
        rises = int(np.sum(np.diff(tail) > 0))
        checks.append(Check("error non-increasing in r for r >= 4 (one rise allowed)", rises <= 1,
                            f"{rises} rises over r >= 4"))
    if 3 in errors and 8 in errors:
        checks.append(Check("error at r=3 above error at r=8", errors[3] > errors[8],
                            f"{errors[3]:.3f}% vs {errors[8]:.3f}%"))
    return checks


def run_series_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Replicated meta-task series against the closed-form mean and variance bound.

    The population is fixed; each replication is an independent series of
    ``iterations`` meta-tasks.  Per (user, k) cell the empirical mean of the
    user's weights is compared with the predicted mean (within 4 standard
    errors) and the empirical variance of its edge weights with the bound.
    """
    if cfg.experiment != "series_moments":
        raise ValueError("config is not a series_moments experiment")
    Q, U, r, s, K, R = cfg.n_questions, cfg.n_users, cfg.r, cfg.s, cfg.iterations, cfg.replications
    if K < 1 or R < 2:
        raise ValueError("need iterations >= 1 and replications >= 2")
    p_seed, rep_seed = spawn(cfg.master_seed, 2)
    pop = make_population(U, Q, cfg.reliability, p_seed, cfg.truth)
    crowd = CrowdMoments.from_population(pop)
    user_w = np.empty((R, K, U))
    edge_w = np.empty((R, K, U, s))
    agreement = np.empty((R, K))
    errors = np.empty((R, K))
    for rep, ss in enumerate(spawn(rep_seed, R)):
        scfg = SeriesConfig(Q, U, r, s, K, cfg.reliability, ss, cfg.truth, cfg.init_mean,
                            cfg.init_variance, cfg.carry_rule)
        for k, st in enumerate(run_metatask_series(scfg, population=pop)):
            user_w[rep, k] = st.user_weights
            edge_w[rep, k] = st.state.weights[st.assignment.user_edges]
            oracle = asymptotic_decisions(st.assignment, st.answers.values, pop.reliabilities,
                                          crowd.e_p)
            agreement[rep, k] = np.mean(oracle == st.decisions)
            errors[rep, k] = st.error_rate

    emp_mean, emp_mean_var = sample_moments(user_w, axis=0)  # (K, U)
    std_err = np.sqrt(emp_mean_var / R)
    pooled = edge_w.transpose(1, 2, 0, 3).reshape(K, U, R * s)
    _, emp_var = sample_moments(pooled, axis=2)
    p = pop.reliabilities
    pred_mean = np.array([[series_mean(pa, crowd, k) for pa in p] for k in range(1, K + 1)])
    bound = np.array([series_variance_bound(cfg.init_variance, crowd, r, s, k)
                      for k in range(1, K + 1)])
    mean_ok = np.abs(emp_mean - pred_mean) <= MEAN_Z * std_err
    var_ok = emp_var <= bound[:, None]

    table = Table(("k", "user", "source", "mean", "variance", "std_err", "mean_within_4se",
                   "var_within_bound"))
    for k in range(K):
        for a in range(U):
            table.add(k + 1, a, "simulation", float(emp_mean[k, a]), float(emp_var[k, a]),
                      float(std_err[k, a]), bool(mean_ok[k, a]), bool(var_ok[k, a]))
            table.add(k + 1, a, "theory", float(pred_mean[k, a]), float(bound[k]), None, None,
                      None)
    decisions = Table(("k", "agreement_with_asymptotic_rule", "error_rate"))
    for k in range(K):
        decisions.add(k + 1, float(agreement[:, k].mean()), float(errors[:, k].mean()))

    result = ExperimentResult("series_moments")
    result.tables = {"series_moments": table, "series_decisions": decisions}
    result.notes += crowd_notes(cfg, crowd, r, s)
    result.notes.append("theory uses the empirical crowd moments of the sampled population")
    condition = convergence_condition(crowd, r, s)
    late = cfg.late_k or K // 2 + 1
    late_agreement = float(agreement[:, late - 1:].mean())
    result.notes.append(f"agreement with asymptotic rule over k >= {late}: {late_agreement:.4f}")
    result.checks += series_checks(mean_ok, var_ok, late_agreement if condition else None)
    result.data.update(population=pop, crowd=crowd, emp_mean=emp_mean, emp_var=emp_var,
                       std_err=std_err, pred_mean=pred_mean, bound=bound, agreement=agreement,
                       errors=errors, late_agreement=late_agreement, user_weights=user_w,
                       condition=condition)
    return result


def series_checks(mean_ok, var_ok, late_agreement=None) -> list[Check]:
    mf, vf = float(np.mean(mean_ok)), float(np.mean(var_ok))
    checks = [
        Check("empirical mean within 4 s.e. of predicted mean in >= 95% of cells",
              mf >= MEAN_CELL_FRACTION, f"{mf:.4f} of {np.size(mean_ok)} cells"),
        Check("empirical variance within the closed-form bound in >= 99% of cells",
              vf >= VAR_CELL_FRACTION, f"{vf:.4f} of {np.size(var_ok)} cells"),
    ]
    if late_agreement is not None:
        checks.append(Check("late decisions agree with the asymptotic rule on >= 95% of questions",
                            late_agreement >= AGREEMENT_FRACTION, f"{late_agreement:.4f}"))
    return checks


def run_custom_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """Error rate by iteration for each value of one swept key.

    Each point runs ``replications`` single meta-tasks on fresh graphs,
    populations and answers.
    """
    if cfg.experiment != "custom_sweep":
        raise ValueError("config is not a custom_sweep experiment")
    table = Table((cfg.sweep_key, "k", "mean_error_rate", "std_err"))
    result = ExperimentResult("custom_sweep")
    for raw, seed in zip(cfg.sweep_values, spawn(cfg.master_seed, len(cfg.sweep_values))):
        value = parse_value(cfg.sweep_key, raw)
        point = dataclasses.replace(cfg, **{cfg.sweep_key: value})
        variant = Variant(point.variant)
        if variant is Variant.SERIES:
            raise ValueError("custom_sweep runs single meta-tasks; series variant not allowed")
        update = update_function(variant)
        K = point.iterations
        errs = np.empty((point.replications, K + 1))
        for rep, ss in enumerate(spawn(seed, point.replications)):
            g_seed, p_seed, a_seed, w_seed = ss.spawn(4)
            asg = degree_regular_assignment(point.n_questions, point.n_users, point.r, point.s,
                                            g_seed)
            pop = make_population(point.n_users, point.n_questions, point.reliability, p_seed,
                                  point.truth)
            answers = sample_answers(asg, pop, a_seed).values
            y = np.random.default_rng(w_seed).normal(point.init_mean,
                                                     np.sqrt(point.init_variance), asg.n_edges)
            for k in range(K + 1):
                if k:
                    y = update(asg, answers, y)
                errs[rep, k] = np.mean(np.sign(weighted_vote(asg, answers, y)) != pop.truth)
        for k in range(K + 1):
            se = errs[:, k].std(ddof=1) / np.sqrt(len(errs)) if len(errs) > 1 else float("nan")
            table.add(format_sweep(value), k, float(errs[:, k].mean()), float(se))
    result.tables = {"custom_sweep": table}
    result.notes.append(f"swept {cfg.sweep_key} over {', '.join(cfg.sweep_values)}")
    return result


def format_sweep(v):
    return v if not isinstance(v, tuple) else ",".join(map(str, v))


RUNNERS = {
    "relative_error_vs_k": run_relative_error_experiment,
    "error_vs_r": run_error_vs_r_experiment,
    "series_moments": run_series_experiment,
    "custom_sweep": run_custom_sweep,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg)
