//! Subcommand implementations.

use std::fs;

use daeobs::associated::{construct, structure_scale, Construction, STRUCTURE_TOL};
use daeobs::dae::{dual_dae, DaeSystem};
use daeobs::equivalence::{build_equivalence, equation_defects, verify_equivalence, FeedbackEquivalence};
use daeobs::exec::{map_indexed, Execution};
use daeobs::linalg::{block_diag, inv_spd, min_symmetric_eigenvalue, spectral_abscissa, Mat, Vector, DEFAULT_RANK_TOL};
use daeobs::lq::{
    assemble_controller, optimal_cost, solve_are, solve_are_weighted, RiccatiSolution, SolverOptions, DEFAULT_ARE_TOL,
};
use daeobs::observer::synthesize_dual;
use daeobs::random::random_construction;
use daeobs::simulate::{
    batch_run, default_step, run_rng, trailing_max_abs, uniform_grid, BatchConfig, Experiment, NoiseMode, PrimalModel,
};

use crate::output::{emit, read_input, sci, to_json, write_text};
use crate::problem::ProblemFile;
use crate::report::*;
use crate::{CliError, Common, EquivalenceArgs, SimulateArgs};

const DEFAULT_SEED: u64 = 0;
const DEFAULT_RUNS: usize = 10;
const DEFAULT_TRIALS: usize = 20;
/// Tolerance of the equivalence check.
pub const EQUIVALENCE_TOL: f64 = 1e-8;
/// Fraction of the horizon over which the trailing error is measured.
const TRAILING_FRACTION: f64 = 0.1;

struct Loaded {
    file: ProblemFile,
    digest: String,
    opts: SolverOptions,
}

fn load(common: &Common) -> Result<Loaded, CliError> {
    let (text, digest) = read_input(&common.input)?;
    let file = ProblemFile::parse(&text)?;
    for (flag, v) in [("--rank-tol", common.rank_tol), ("--are-tol", common.are_tol)] {
        if let Some(x) = v {
            if !(x > 0.0) || !x.is_finite() {
                return Err(CliError::Parse(format!("{flag} must be positive and finite, got {x}")));
            }
        }
    }
    let opts = SolverOptions {
        rank_tol: common.rank_tol.or(file.options.rank_tol).unwrap_or(DEFAULT_RANK_TOL),
        are_tol: common.are_tol.or(file.options.are_tol).unwrap_or(DEFAULT_ARE_TOL),
    };
    Ok(Loaded { file, digest, opts })
}

fn tolerances(opts: &SolverOptions) -> Tolerances {
    Tolerances { rank_tol: opts.rank_tol, are_tol: opts.are_tol }
}

fn dimensions(sys: &DaeSystem, c: &Construction) -> Dimensions {
    Dimensions { n: sys.n(), m: sys.m(), r: c.cf.r, n_hat: c.lti.n_hat, k: c.lti.k, dim_x: c.lti.x_space.dim() }
}

fn structure_checks(sys: &DaeSystem, c: &Construction) -> Vec<Check> {
    let d = c.lti.structure_defects(sys, &c.cf, &c.ond);
    let tol = STRUCTURE_TOL * structure_scale(sys, &c.cf);
    vec![
        Check::at_most("normalization |S E T - diag(I, 0)|", c.cf.normalization_defect(sys.e()), tol),
        Check::at_most("output nulling defect", c.ond.defects(&c.cf).max(), STRUCTURE_TOL),
        Check::at_most("|E D_s|", d.e_ds, tol),
        Check::at_most("|Lambda E C_s - I|", d.lambda_left_inverse, tol),
        Check::at_most("|(I - P_V) G L|", d.gl_in_v, tol),
        Check::at_most("rank deficit of E C_s", d.e_cs_rank_deficit as f64, 0.0),
        Check::at_most("rank deficit of D_l", d.d_l_rank_deficit as f64, 0.0),
    ]
}

fn riccati_checks(c: &Construction, e: &Mat, rs: &RiccatiSolution, opts: &SolverOptions, identity_defect: f64) -> Vec<Check> {
    let mut checks = vec![Check::at_most("Riccati residual", rs.residual, opts.are_tol * (1.0 + rs.p.norm()))];
    if c.lti.n_hat > 0 {
        let a_c = &c.lti.a_l - &c.lti.b_l * &rs.k;
        checks.push(Check::below("closed-loop spectral abscissa", spectral_abscissa(&a_c), 0.0));
        checks.push(Check::above("min eigenvalue of P", min_symmetric_eigenvalue(&rs.p), 0.0));
    }
    checks.push(Check::at_most("|B_c E C_x - I|", identity_defect, 1e-9 * (1.0 + e.norm() * (1.0 + rs.k.norm()))));
    checks
}

fn finish(checks: &[Check], command: &str) -> Result<(), CliError> {
    if all_pass(checks) {
        return Ok(());
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    Err(CliError::InvariantFailed(format!("{command}: invariant check failed: {}", failed.join(", "))))
}

pub fn synthesize_observer(common: &Common) -> Result<(), CliError> {
    let ld = load(common)?;
    let prob = ld.file.estimation()?;
    let syn = synthesize_dual(&prob.obs, &prob.q0, &prob.q, &prob.r, &ld.opts).map_err(CliError::at("dual LQ step"))?;
    let obsv = syn.observer(&prob.ell).map_err(CliError::at("estimability check"))?;
    let c = &syn.construction;
    let mut dims = dimensions(&syn.dual, c);
    dims.m = prob.obs.p();
    let mut invariants = structure_checks(&syn.dual, c);
    invariants.extend(riccati_checks(c, syn.dual.e(), &syn.riccati, &ld.opts, syn.controller.identity_defect(syn.dual.e())));
    invariants.push(Check::at_most("negative part of sigma", (-obsv.sigma).max(0.0), 0.0));
    let report = ObserverReport {
        header: Header::new("synthesize-observer", &ld.digest),
        options: tolerances(&ld.opts),
        dimensions: dims,
        observer: ObserverJson { a_o: mj(&obsv.a_o), b_o: mj(&obsv.b_o), c_o: mj(&obsv.c_o) },
        sigma: obsv.sigma,
        riccati: RiccatiJson::new(&syn.riccati),
        lambda: mj(&obsv.lambda),
        invariants,
    };
    emit(common.output.as_deref(), &to_json(&report))?;
    finish(&report.invariants, "synthesize-observer")
}

pub fn solve_lq(common: &Common) -> Result<(), CliError> {
    let ld = load(common)?;
    let sys = ld.file.dae()?;
    let w = ld.file.lq_weights()?;
    let x0 = ld.file.initial_state()?;
    let c = construct(&sys, ld.opts.rank_tol).map_err(CliError::at("associated LTI construction"))?;
    let rs = solve_are(&c.lti, &w, &ld.opts).map_err(CliError::at("LQ Riccati step"))?;
    let ctrl = assemble_controller(&c.lti, sys.e(), &rs).map_err(CliError::at("controller assembly"))?;
    let optimal_value = match &x0 {
        Some(x0) => {
            let resid = c.lti.consistency_residual(sys.e(), x0).map_err(CliError::at("initial state"))?;
            if !c.lti.is_consistent(sys.e(), x0).map_err(CliError::at("initial state"))? {
                return Err(CliError::Core { step: "initial state", source: daeobs::Error::Inconsistent { residual: resid } });
            }
            Some(optimal_cost(&rs, &(&c.lti.lambda * (sys.e() * x0))))
        }
        None => None,
    };
    let mut invariants = structure_checks(&sys, &c);
    invariants.extend(riccati_checks(&c, sys.e(), &rs, &ld.opts, ctrl.identity_defect(sys.e())));
    let report = LqReport {
        header: Header::new("solve-lq", &ld.digest),
        options: tolerances(&ld.opts),
        dimensions: dimensions(&sys, &c),
        controller: ControllerJson { a_c: mj(&ctrl.a_c), b_c: mj(&ctrl.b_c), c_x: mj(&ctrl.c_x), c_u: mj(&ctrl.c_u) },
        riccati: RiccatiJson::new(&rs),
        optimal_value,
        invariants,
    };
    emit(common.output.as_deref(), &to_json(&report))?;
    finish(&report.invariants, "solve-lq")
}

pub fn associated_lti(common: &Common) -> Result<(), CliError> {
    let ld = load(common)?;
    let sys = ld.file.dae()?;
    let c = construct(&sys, ld.opts.rank_tol).map_err(CliError::at("associated LTI construction"))?;
    let report = AssociatedLtiReport {
        header: Header::new("associated-lti", &ld.digest),
        options: tolerances(&ld.opts),
        dimensions: dimensions(&sys, &c),
        lti: LtiJson::new(&c.lti),
        invariants: structure_checks(&sys, &c),
    };
    emit(common.output.as_deref(), &to_json(&report))?;
    finish(&report.invariants, "associated-lti")
}

fn csv_text(exp: &Experiment) -> String {
    let p = exp.y.dim();
    let mut out = String::from("t");
    for j in 1..=p {
        out.push_str(&format!(",y_{j}"));
    }
    out.push_str(",estimate,true_value,error\n");
    for (i, &t) in exp.y.grid.iter().enumerate() {
        out.push_str(&sci(t));
        for j in 0..p {
            out.push(',');
            out.push_str(&sci(exp.y.values[(j, i)]));
        }
        for s in [&exp.estimate, &exp.true_value, &exp.error] {
            out.push(',');
            out.push_str(&sci(s.values[(0, i)]));
        }
        out.push('\n');
    }
    out
}

/// `12 / |abscissa(A_o)|` clamped to `[1, 1000]`.
pub fn default_horizon(a_o: &Mat) -> f64 {
    let a = spectral_abscissa(a_o);
    if a.is_finite() && a < 0.0 {
        (12.0 / -a).clamp(1.0, 1000.0)
    } else {
        1.0
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let common = &args.common;
    let dir = common.output.as_deref().ok_or_else(|| CliError::Parse("simulate needs --output <directory>".into()))?;
    let ld = load(common)?;
    let prob = ld.file.estimation()?;
    let syn = synthesize_dual(&prob.obs, &prob.q0, &prob.q, &prob.r, &ld.opts).map_err(CliError::at("dual LQ step"))?;
    let obsv = syn.observer(&prob.ell).map_err(CliError::at("estimability check"))?;
    let model = PrimalModel::new(&prob.obs, ld.opts.rank_tol).map_err(CliError::at("primal model construction"))?;

    let fo = &ld.file.options;
    let horizon = args.horizon.or(fo.horizon).unwrap_or_else(|| default_horizon(&obsv.a_o));
    let step = args.step.or(fo.step).unwrap_or_else(|| {
        [&obsv.a_o, &model.disturbed.a_l, &model.autonomous.a_l].iter().map(|a| default_step(a)).fold(f64::INFINITY, f64::min)
    });
    for (flag, x) in [("--horizon", horizon), ("--step", step)] {
        if !(x > 0.0) || !x.is_finite() {
            return Err(CliError::Parse(format!("{flag} must be positive and finite, got {x}")));
        }
    }
    let seed = args.seed.or(fo.seed).unwrap_or(DEFAULT_SEED);
    let runs = args.runs.or(fo.runs).unwrap_or(DEFAULT_RUNS);
    let mode = if args.clean { NoiseMode::Clean } else { NoiseMode::Noisy };
    let cfg = BatchConfig { horizon, step, runs, seed, mode, exec: Execution::default() };
    let grid = uniform_grid(horizon, step).map_err(CliError::at("time grid"))?;

    let results = map_indexed(runs, cfg.exec, |i| {
        let (real, exp) = batch_run(&prob, &obsv, &model, &grid, &cfg, i)?;
        let summary = RunJson {
            index: i,
            csv: format!("run_{i:03}.csv"),
            rho: real.rho,
            initial_abs_error: exp.error.values[(0, 0)].abs(),
            final_sq_error: exp.final_sq_error,
            trailing_max_abs_error: trailing_max_abs(&exp.error, TRAILING_FRACTION),
        };
        Ok((summary, csv_text(&exp)))
    });
    let results: Vec<_> = results.into_iter().collect::<Result<_, daeobs::Error>>().map_err(CliError::at("simulation"))?;

    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    for (run, csv) in &results {
        write_text(&dir.join(&run.csv), csv)?;
    }
    let runs_json: Vec<RunJson> = results.into_iter().map(|(r, _)| r).collect();
    let bound = obsv.finite_horizon_bound(horizon);
    let max_final = runs_json.iter().map(|r| r.final_sq_error).fold(0.0, f64::max);
    let max_ratio =
        runs_json.iter().map(|r| r.trailing_max_abs_error / r.initial_abs_error.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);

    let mut invariants = Vec::new();
    match mode {
        NoiseMode::Noisy => {
            let max_rho = runs_json.iter().map(|r| r.rho).fold(0.0, f64::max);
            invariants.push(Check::at_most("sampled rho", max_rho, 1.0 + 1e-12));
            invariants.push(Check::at_most(
                "final squared error <= finite-horizon bound",
                max_final,
                bound + 1e-6 + 1e-5 * (1.0 + bound),
            ));
        }
        NoiseMode::Clean => {
            let slowest = -spectral_abscissa(&obsv.a_o);
            if slowest > 0.0 && horizon * (1.0 - TRAILING_FRACTION) * slowest >= 10.0 {
                let worst = runs_json
                    .iter()
                    .map(|r| r.trailing_max_abs_error - 1e-3 * r.initial_abs_error)
                    .fold(f64::NEG_INFINITY, f64::max);
                invariants.push(Check::at_most("trailing error - 1e-3 * initial error", worst.max(0.0), 1e-9));
            }
        }
    }
    let summary = SimulationSummary {
        header: Header::new("simulate", &ld.digest),
        options: SimulationOptions {
            rank_tol: ld.opts.rank_tol,
            are_tol: ld.opts.are_tol,
            horizon,
            step,
            seed,
            runs,
            noisy: mode == NoiseMode::Noisy,
        },
        dimensions: {
            let mut d = dimensions(&syn.dual, &syn.construction);
            d.m = prob.obs.p();
            d
        },
        sigma: obsv.sigma,
        finite_horizon_bound: bound,
        runs: runs_json,
        max_final_sq_error: max_final,
        max_trailing_ratio: max_ratio,
        invariants,
    };
    write_text(&dir.join("summary.json"), &to_json(&summary))?;
    finish(&summary.invariants, "simulate")
}

/// System, cost weight and reference point for the equivalence check.
struct EquivalenceSetup {
    kind: &'static str,
    sys: DaeSystem,
    weight: Option<Mat>,
    x0: Option<Vector>,
    m_report: usize,
}

fn equivalence_setup(file: &ProblemFile) -> Result<EquivalenceSetup, CliError> {
    if file.has("E") {
        let sys = file.dae()?;
        let weight = if file.has("Q") && file.has("R") {
            let w = file.lq_weights()?;
            Some(w.s())
        } else {
            None
        };
        let m_report = sys.m();
        Ok(EquivalenceSetup { kind: "dae", weight, x0: file.initial_state()?, sys, m_report })
    } else {
        let prob = file.estimation()?;
        let weight = block_diag(&inv_spd(&prob.q)?, &inv_spd(&prob.r)?);
        Ok(EquivalenceSetup {
            kind: "dual",
            sys: dual_dae(&prob.obs),
            weight: Some(weight),
            x0: Some(prob.ell.clone()),
            m_report: prob.obs.p(),
        })
    }
}

fn value(setup: &EquivalenceSetup, c: &Construction, opts: &SolverOptions) -> Result<Option<f64>, daeobs::Error> {
    let (Some(w), Some(x0)) = (&setup.weight, &setup.x0) else {
        return Ok(None);
    };
    if !c.lti.is_consistent(setup.sys.e(), x0)? {
        return Ok(None);
    }
    let rs = solve_are_weighted(&c.lti, w, opts)?;
    Ok(Some(optimal_cost(&rs, &(&c.lti.lambda * (setup.sys.e() * x0)))))
}

fn corrupt(c1: &Construction, c2: &Construction, eq: &mut FeedbackEquivalence) {
    let delta = 1e-3 * (1.0 + eq.u.norm().max(eq.t.norm()));
    if eq.u.nrows() > 0 {
        eq.u[(0, 0)] += delta;
    } else if eq.t_lti.nrows() > 0 {
        eq.t_lti[(0, 0)] += delta;
    }
    if eq.t.nrows() > 0 && eq.u.nrows() == 0 {
        eq.t[(0, 0)] += delta;
    }
    let (defects, scale) = equation_defects(c1, c2, &eq.t, &eq.f, &eq.u);
    eq.defects = defects;
    eq.scale = scale;
}

pub fn check_equivalence(args: &EquivalenceArgs) -> Result<(), CliError> {
    let common = &args.common;
    let ld = load(common)?;
    let setup = equivalence_setup(&ld.file)?;
    let opts = ld.opts;
    let fo = &ld.file.options;
    let trials = args.trials.or(fo.trials).unwrap_or(DEFAULT_TRIALS);
    let seed = args.seed.or(fo.seed).unwrap_or(DEFAULT_SEED);
    let base = construct(&setup.sys, opts.rank_tol).map_err(CliError::at("associated LTI construction"))?;

    let trial = |i: usize| -> Result<TrialJson, daeobs::Error> {
        let (c1, c2) = if i == 0 {
            (base.clone(), base.clone())
        } else {
            let mut rng = run_rng(seed, i);
            (random_construction(&mut rng, &setup.sys, opts.rank_tol)?, random_construction(&mut rng, &setup.sys, opts.rank_tol)?)
        };
        let mut eq = build_equivalence(&c1, &c2)?;
        if args.corrupt {
            corrupt(&c1, &c2, &mut eq);
        }
        let defects = eq.relative_defects().0;
        let similarity = verify_equivalence(&c1.lti, &c2.lti, &eq).max_relative();
        let value_difference = match (value(&setup, &c1, &opts)?, value(&setup, &c2, &opts)?) {
            (Some(a), Some(b)) => Some((a - b).abs() / (1.0 + a.abs().max(b.abs()))),
            _ => None,
        };
        let pass = defects.iter().all(|&d| d <= EQUIVALENCE_TOL)
            && similarity <= EQUIVALENCE_TOL
            && value_difference.is_none_or(|d| d <= EQUIVALENCE_TOL);
        Ok(TrialJson { index: i, defects, similarity_residual: similarity, value_difference, pass })
    };
    let results: Vec<TrialJson> = map_indexed(trials, Execution::default(), trial)
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(CliError::at("equivalence trial"))?;

    let mut max_defects = [0.0f64; 6];
    for t in &results {
        for (m, d) in max_defects.iter_mut().zip(t.defects) {
            *m = m.max(d);
        }
    }
    let max_similarity = results.iter().map(|t| t.similarity_residual).fold(0.0, f64::max);
    let value_diffs: Vec<f64> = results.iter().filter_map(|t| t.value_difference).collect();
    let max_value = if value_diffs.is_empty() { None } else { Some(value_diffs.iter().copied().fold(0.0, f64::max)) };
    let failed: Vec<usize> = results.iter().filter(|t| !t.pass).map(|t| t.index).collect();

    let mut invariants = vec![
        Check::at_most("max relative defect", max_defects.iter().copied().fold(0.0, f64::max), EQUIVALENCE_TOL),
        Check::at_most("max similarity residual", max_similarity, EQUIVALENCE_TOL),
    ];
    if let Some(v) = max_value {
        invariants.push(Check::at_most("max optimal value difference", v, EQUIVALENCE_TOL));
    }
    let report = EquivalenceReport {
        header: Header::new("check-equivalence", &ld.digest),
        options: EquivalenceOptions { rank_tol: opts.rank_tol, are_tol: opts.are_tol, trials, seed, corrupt: args.corrupt },
        system: setup.kind.into(),
        dimensions: {
            let mut d = dimensions(&setup.sys, &base);
            d.m = setup.m_report;
            d
        },
        tolerance: EQUIVALENCE_TOL,
        max_defects,
        max_similarity_residual: max_similarity,
        max_value_difference: max_value,
        trials: results,
        invariants,
    };
    emit(common.output.as_deref(), &to_json(&report))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::EquivalenceFailed(format!(
            "check-equivalence: feedback equivalence violated at tolerance {EQUIVALENCE_TOL:e} in trials {failed:?}"
        )))
    }
}
