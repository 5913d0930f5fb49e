//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs the shipped configs on seed 1 and the property checks, prints the
//! verdicts and exits 0 regardless of outcome.

use std::path::PathBuf;
use std::time::Instant;

use incentive_core::algorithms::{
    daio_dual_value, lagrangian, zeta_estimator_bias_check, Algorithm, GradientSource, Optimizer, Plant, RampTrigger, StepSchedule,
    ZetaSampler, ZoConfig,
};
use incentive_core::baseline::{convex_optimum, solve_lp, LpProblem};
use incentive_core::grid::{ac_power_flow, compute_sensitivity, NetworkCase, OperatingPoint, SafetyMode, SafetySpec, SensitivityModel};
use incentive_core::harness::{build_environment, execute, load_case, run_algorithm, Environment, ExperimentConfig, ExperimentResult, RunSummary};
use incentive_core::linalg::Matrix;
use incentive_core::response::{ResponseFamily, ResponseModel, ResponseParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let mut cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    cfg.seeds = vec![1];
    cfg
}

fn run(name: &str) -> (ExperimentResult, f64) {
    let start = Instant::now();
    let result = execute(&config(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    (result, start.elapsed().as_secs_f64())
}

fn find<'a>(r: &'a ExperimentResult, scenario: &str, algorithm: &str) -> (usize, &'a RunSummary) {
    r.manifest
        .runs
        .iter()
        .enumerate()
        .find(|(_, s)| s.scenario == scenario && s.algorithm == algorithm)
        .unwrap_or_else(|| panic!("no run {scenario}/{algorithm}"))
}

fn baseline_of(r: &ExperimentResult, scenario: &str) -> incentive_core::harness::Baseline {
    r.manifest
        .environments
        .iter()
        .find(|e| e.scenario == scenario)
        .and_then(|e| e.baseline.clone())
        .unwrap_or_else(|| panic!("no baseline for {scenario}"))
}

fn min_dual(r: &ExperimentResult) -> f64 {
    r.manifest.runs.iter().filter_map(|s| s.min_dual).fold(f64::INFINITY, f64::min)
}

fn quad_convex(report: &mut Report) -> f64 {
    let (r, secs) = run("quad_convex.toml");
    let opt = baseline_of(&r, "quad_convex");
    let target = opt.values[0];
    let rel = |c: f64| (c - target).abs() / target;
    let (d, _) = find(&r, "quad_convex", "DAIO");
    let (f, _) = find(&r, "quad_convex", "FOIO-exact");
    let (_, z) = find(&r, "quad_convex", "ZOIO");
    let daio = &r.traces[d][499];
    let foio = &r.traces[f][1499];
    let zoio = z.trailing_mean_cost.unwrap_or(f64::NAN);
    let ok = rel(daio.cost) <= 0.01 && rel(foio.cost) <= 0.01 && rel(zoio) <= 0.05 && secs < 30.0 && opt.certified[0];
    report.line(
        "1",
        ok,
        format!(
            "optimum {target:.5} (certified {}); DAIO@500 {:.5} ({:+.2}%, feasible {}); FOIO@1500 {:.5} ({:+.2}%, feasible {}); \
             ZOIO trailing mean@10000 {zoio:.5} ({:+.2}%); {secs:.1} s",
            opt.certified[0],
            daio.cost,
            100.0 * (daio.cost / target - 1.0),
            daio.feasible,
            foio.cost,
            100.0 * (foio.cost / target - 1.0),
            foio.feasible,
            100.0 * (zoio / target - 1.0),
        ),
    );
    min_dual(&r)
}

fn step(report: &mut Report) -> f64 {
    let (r, secs) = run("step.toml");
    let mut ok = secs < 120.0;
    let mut parts = Vec::new();
    for d in [2, 6, 10] {
        let scenario = format!("step_d{d}");
        let lb = baseline_of(&r, &scenario).values[0];
        let (_, iii) = find(&r, &scenario, "III");
        let (_, foio) = find(&r, &scenario, "FOIO-linear");
        let (_, zoio) = find(&r, &scenario, "ZOIO");
        let feasible = [iii, foio, zoio].iter().all(|s| s.final_feasible == Some(true));
        let (fc, ic) = (foio.final_cost.unwrap_or(f64::NAN), iii.final_cost.unwrap_or(f64::NAN));
        let ratio = fc / lb;
        ok &= feasible && ratio <= 1.35 && ic > fc;
        parts.push(format!(
            "D={d}: feasible III/FOIO/ZOIO {}/{}/{}, FOIO {ratio:.3}x bound, III {:.1}x bound",
            iii.final_feasible == Some(true),
            foio.final_feasible == Some(true),
            zoio.final_feasible == Some(true),
            ic / lb
        ));
    }
    report.line("2", ok, format!("{}; {secs:.1} s", parts.join("; ")));
    min_dual(&r)
}

fn coarse(report: &mut Report) -> f64 {
    let (r, _) = run("coarse_gradient.toml");
    let lb = baseline_of(&r, "step_d6").values[0];
    let runs: Vec<&RunSummary> = r.manifest.runs.iter().filter(|s| s.scenario == "step_d6").collect();
    let costs: Vec<f64> = runs.iter().map(|s| s.final_cost.unwrap_or(f64::NAN)).collect();
    let feasible = runs.iter().all(|s| s.final_feasible == Some(true));
    let spread = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max) - costs.iter().copied().fold(f64::INFINITY, f64::min);
    let detail: Vec<String> = runs.iter().zip(&costs).map(|(s, c)| format!("{} {:.3}x", s.algorithm, c / lb)).collect();
    report.line(
        "3",
        feasible && runs.len() == 3 && spread <= 0.4 * lb,
        format!("{}; all feasible {feasible}; spread {:.3} of the bound", detail.join(", "), spread / lb),
    );
    min_dual(&r)
}

fn time_varying(report: &mut Report) -> f64 {
    let (r, secs) = run("time_varying.json");
    let scenario = "tv_quad_d6";
    let average = baseline_of(&r, scenario).average();
    let mut ok = secs < 300.0;
    let mut parts = Vec::new();
    for (alg, limit) in [("FOIO-exact", 1.10), ("ZOIO", 1.40)] {
        let (_, s) = find(&r, scenario, alg);
        let ratio = s.mean_cost.unwrap_or(f64::NAN) / average;
        let quick = s.recovery.iter().filter(|x| x.is_some_and(|k| k <= 300)).count();
        let share = quick as f64 / s.recovery.len().max(1) as f64;
        ok &= ratio <= limit && share >= 0.9;
        parts.push(format!("{alg} {ratio:.3}x oracle average (limit {limit}), recovered within 300 in {quick}/{}", s.recovery.len()));
    }
    report.line("4", ok, format!("{}; {secs:.1} s", parts.join("; ")));
    min_dual(&r)
}

/// One bus with `h(i) = δ(1 − i)² − 1/4` for the quadratic family.
fn toy(delta: f64) -> Plant<f64> {
    let sens = SensitivityModel::from_parts(
        Matrix::from_rows(&[vec![1.0]]),
        Matrix::from_rows(&[vec![0.0]]),
        vec![0.5],
        vec![0.0],
        vec![0.0],
    )
    .unwrap();
    let spec = SafetySpec::uniform(1, 0.5, 2.0, SafetyMode::LowerOnly).unwrap();
    let params = ResponseParams::new(vec![0.0], vec![delta], vec![1.0]).unwrap();
    Plant::new(sens, spec, ResponseModel::quadratic(params), vec![0.0]).unwrap()
}

fn zoio_band(env: &Environment, eps: f64, sigma: f64, noise: f64, stream: usize) -> (f64, f64) {
    let config = ZoConfig { sigma, p: 0.0, decay: 0.95, zeta: ZetaSampler::Uniform, noise };
    let alg = Algorithm::Zoio {
        config,
        primal_step: eps,
        dual: StepSchedule::ramp(RampTrigger::OnViolationBeforeFirstFeasible),
        lambda0: 0.0,
    };
    let (summary, trace) = run_algorithm(env, None, alg, &format!("ZOIO-band-{stream}"), 10_000).unwrap();
    let tail = &trace[trace.len() - trace.len() / 10..];
    let mean = tail.iter().map(|r| r.cost).sum::<f64>() / tail.len() as f64;
    let band = tail.iter().map(|r| (r.cost - mean).abs()).fold(0.0, f64::max);
    (band, summary.min_dual.unwrap_or(f64::NAN))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn properties(report: &mut Report) -> f64 {
    let plant = toy(1.0);
    let mut duals = f64::INFINITY;

    // (a) dual distance to λ★ = 1 under a step inside the admissible bound.
    let h0 = plant.h(&[0.0]).unwrap();
    let lambda0 = 0.8;
    let bound = 2.0 * daio_dual_value(&plant, &[lambda0]).unwrap() / h0.iter().map(|x| x * x).sum::<f64>();
    let eps = 0.5 * bound;
    let mut opt = Optimizer::new(Algorithm::Daio { dual: StepSchedule::constant(eps), lambda0 }, 1, 0).unwrap();
    let mut dist = (lambda0 - 1.0f64).abs();
    let mut monotone = true;
    for _ in 0..200 {
        opt.step(&plant).unwrap();
        let d = (opt.state.dual[0] - 1.0).abs();
        monotone &= d <= dist + 1e-15;
        dist = d;
        duals = duals.min(opt.state.dual[0]);
    }
    let a = monotone && bound > 0.0;

    // (b) saddle gap L(i, λ★) − m(λ) under the diminishing schedule.
    let alg = Algorithm::Foio {
        gradient: GradientSource::Exact,
        primal: StepSchedule::harmonic(),
        dual: StepSchedule::harmonic(),
        lambda0: 0.0,
    };
    let mut opt = Optimizer::new(alg, 1, 0).unwrap();
    for _ in 0..100_000 {
        opt.step(&plant).unwrap();
        duals = duals.min(opt.state.dual[0]);
    }
    let primal = lagrangian(&opt.state.incentive, &[1.0], &plant, None).unwrap();
    let dual = if opt.state.dual[0] > 0.0 { daio_dual_value(&plant, &opt.state.dual).unwrap() } else { 0.0 };
    let gap = primal - dual;
    let b = gap < 1e-3;

    // (c) trailing band of the zeroth-order cost on the 33-bus quad-convex case.
    let cfg = config("quad_convex.toml");
    let case = load_case(&cfg).unwrap();
    let env = build_environment(&cfg, &case, &cfg.variants()[0], 1).unwrap();
    let (base, d1) = zoio_band(&env, 1e-4, 0.005, 0.0, 0);
    let (halved, d2) = zoio_band(&env, 5e-5, 0.0025, 0.0, 0);
    duals = duals.min(d1).min(d2);
    let mut noisy = Vec::new();
    for e_y in [0.0, 1e-3, 1e-2] {
        let bands: Vec<f64> = (0..5)
            .map(|s| {
                let (b, d) = zoio_band(&env, 1e-4, 0.005, e_y, s);
                duals = duals.min(d);
                b
            })
            .collect();
        noisy.push(median(bands));
    }
    let c = halved < base && noisy[0] < noisy[1] && noisy[1] < noisy[2];

    report.line(
        "5",
        a && b && c && duals >= 0.0,
        format!(
            "(a) dual distance monotone {monotone} at step {eps:.3} (bound {bound:.3}); (b) saddle gap {gap:.2e} after 1e5; \
             (c) band {base:.2e} -> {halved:.2e} when halved, median {:.2e} / {:.2e} / {:.2e} for e_y 0 / 1e-3 / 1e-2; (d) min dual {duals:.3e}",
            noisy[0], noisy[1], noisy[2]
        ),
    );
    duals
}

fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|k| b[k] / a[k][k]).collect())
}

/// Best vertex of `{A x ≤ b, lo ≤ x ≤ hi}` by enumerating every active set.
fn vertex_optimum(c: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<f64> {
    let n = c.len();
    let m = rows.len();
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    fn next(pick: &mut [usize], m: usize) -> bool {
        let n = pick.len();
        for k in (0..n).rev() {
            if pick[k] < m - n + k {
                pick[k] += 1;
                for j in k + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (k, p) in pick.iter_mut().enumerate() {
        *p = k;
    }
    loop {
        let a: Vec<Vec<f64>> = pick.iter().map(|&r| rows[r].0.clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&r| rows[r].1).collect();
        if let Some(x) = solve_small(a, b) {
            if rows.iter().all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-9) {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |w: f64| w.min(v)));
            }
        }
        if !next(&mut pick, m) {
            break;
        }
    }
    best
}

fn oracles(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut lp_worst = 0.0f64;
    let mut lp_mismatch = 0;
    let mut lps = 0;
    for n in 1..=3 {
        for m in 1..=3 {
            for _ in 0..60 {
                let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
                let b: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..1.5)).collect();
                let bounds: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..0.3), rng.random_range(0.5..2.0))).collect();
                let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
                for (j, &(lo, hi)) in bounds.iter().enumerate() {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    rows.push((e.clone(), hi));
                    e[j] = -1.0;
                    rows.push((e, -lo));
                }
                let oracle = vertex_optimum(&c, &rows);
                let lp = LpProblem::new(c.clone(), Matrix::from_rows(&a), b.clone(), bounds).unwrap();
                lps += 1;
                match (solve_lp(&lp), oracle) {
                    (Ok(s), Some(v)) => lp_worst = lp_worst.max((s.objective - v).abs()),
                    (Err(_), None) => {}
                    _ => lp_mismatch += 1,
                }
            }
        }
    }

    let mut kkt_worst = 0.0f64;
    for family in [
        ResponseFamily::Linear,
        ResponseFamily::QuadraticConvex,
        ResponseFamily::PolynomialConvex { degree: 4 },
        ResponseFamily::PolynomialConvex { degree: 6 },
    ] {
        let y: f64 = match family {
            ResponseFamily::Linear => 1.0,
            ResponseFamily::QuadraticConvex => 2.0,
            ResponseFamily::PolynomialConvex { degree } => degree as f64,
            _ => unreachable!(),
        };
        for delta in [4.0f64, 5.0, 6.0, 8.0, 12.0] {
            // v = 1 − 0.02 g ≥ 0.81 allows 4.5 of excess over u★ = 5.
            let sens = SensitivityModel::from_parts(
                Matrix::from_rows(&[vec![0.02]]),
                Matrix::from_rows(&[vec![0.0]]),
                vec![1.0],
                vec![0.0],
                vec![0.0],
            )
            .unwrap();
            let spec = SafetySpec::uniform(1, 0.9, 2.0, SafetyMode::LowerOnly).unwrap();
            let params = ResponseParams::new(vec![5.0], vec![delta], vec![1.0]).unwrap();
            let plant = Plant::new(sens, spec, ResponseModel::new(params, family.clone()).unwrap(), vec![0.0]).unwrap();
            let analytic: f64 = if delta <= 4.5 { 0.0 } else { 1.0 - (4.5 / delta).powf(1.0 / y) };
            let got = convex_optimum(&plant, 1e-10).unwrap();
            kkt_worst = kkt_worst.max((got.cost - analytic).abs());
        }
    }

    let mut fd_worst = 0.0f64;
    for family in [
        ResponseFamily::Linear,
        ResponseFamily::QuadraticConvex,
        ResponseFamily::PolynomialConvex { degree: 4 },
        ResponseFamily::PolynomialConcave { degree: 4 },
        ResponseFamily::PolynomialConcave { degree: 8 },
    ] {
        for _ in 0..100 {
            let n = 4;
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
            let i: Vec<f64> = t.iter().map(|&t| t * rng.random_range(0.05..0.95)).collect();
            let model = ResponseModel::new(ResponseParams::new(u, d.clone(), t.clone()).unwrap(), family.clone()).unwrap();
            let grad = model.gradient(&i).unwrap();
            for j in 0..n {
                let h = 1e-6 * t[j];
                let fd = (model.demand_at(j, i[j] + h) - model.demand_at(j, i[j] - h)) / (2.0 * h);
                fd_worst = fd_worst.max((grad[j] - fd).abs() / grad[j].abs().max(d[j] / t[j]));
            }
        }
    }

    let samples = 200_000;
    let n = 5;
    let zeta = zeta_estimator_bias_check(ZetaSampler::Uniform, n, samples, &mut rng);
    let zeta_tol = 5.0 * (n as f64) / 3.0 / (samples as f64).sqrt();

    let ok = lp_worst < 1e-8 && lp_mismatch == 0 && kkt_worst < 1e-6 && fd_worst < 1e-4 && zeta < zeta_tol;
    report.line(
        "6",
        ok,
        format!(
            "simplex vs vertices over {lps} LPs: worst {lp_worst:.1e}, {lp_mismatch} status mismatches; convex vs analytic {kkt_worst:.1e}; \
             gradient vs finite difference {fd_worst:.1e} relative to max(|g'|, delta/t); mean zeta zeta' off identity by {zeta:.2e} (tolerance {zeta_tol:.2e})"
        ),
    );
}

fn model_checks(report: &mut Report) {
    let case = NetworkCase::ieee33();
    let (p0, q0) = case.nominal_demand();
    let sens = compute_sensitivity(&case, &OperatingPoint::zeros(p0.len())).unwrap();
    let symmetric = sens.r.max_asymmetry() < 1e-12 && sens.x.max_asymmetry() < 1e-12;
    let positive = sens.r.min_entry() > 0.0 && sens.x.min_entry() > 0.0;

    let gap = |s: f64| {
        let p: Vec<f64> = p0.iter().map(|&x| x * s).collect();
        let q: Vec<f64> = q0.iter().map(|&x| x * s).collect();
        let op = OperatingPoint::from_demand(&p, &q);
        let lin = sens.voltage_at(&op.p, &op.q);
        let ac = ac_power_flow(&case, &op).unwrap();
        lin.iter().zip(&ac).map(|(l, a)| (l - a * a).abs()).fold(0.0, f64::max)
    };
    let ratio = gap(1.0) / gap(0.5);

    let cfg = config("quad_convex.toml");
    let case = load_case(&cfg).unwrap();
    let env = build_environment(&cfg, &case, &cfg.variants()[0], 1).unwrap();
    let at_setpoint = env.base.h(&env.base.response.params.t).unwrap();
    let base_feasible = at_setpoint.iter().all(|&h| h <= 0.0);
    let violations = env.inflated_violations;

    report.line(
        "7",
        symmetric && positive && ratio >= 3.5 && base_feasible && violations > 5,
        format!(
            "R, X symmetric {symmetric}, positive {positive}; linear-vs-AC gap ratio {ratio:.2} on halving; \
             base feasible {base_feasible}; {violations} violations after inflation"
        ),
    );
}

fn main() {
    let mut report = Report { passed: 0, failed: 0 };
    let mut duals = f64::INFINITY;
    duals = duals.min(quad_convex(&mut report));
    duals = duals.min(step(&mut report));
    duals = duals.min(coarse(&mut report));
    duals = duals.min(time_varying(&mut report));
    duals = duals.min(properties(&mut report));
    oracles(&mut report);
    model_checks(&mut report);
    println!("dual variables over every run: minimum {duals:.3e}");
    println!("acceptance: {} passed, {} failed", report.passed, report.failed);
}
