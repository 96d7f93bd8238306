//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Set `ACCEPTANCE_ONLY=3,6` to run a subset.

use divindex::estimators::{jackknife, shannon_value, EstimatorKind, SampleCounts};
use divindex::indices::{self, gamma_of, holder_beta, IndexSpec};
use divindex::montecarlo::{run_experiment_with_workers, ExperimentConfig, RateReport, Standardization};
use divindex::oracle::{self, exact_estimator_law, exact_kolmogorov};
use divindex::{check_conditions, ConditionSpec, DistConfig, Distribution, Estimator, Family, Hypothesis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::ExitCode;
use std::time::{Duration, Instant};

// tolerances and budgets pinned from the acceptance criteria
const C1_TOL: f64 = 1e-12;
const C1_BUDGET: Duration = Duration::from_secs(1);
const C2_BUDGET: Duration = Duration::from_secs(1);
const C3_REPLICATES: usize = 100_000;
const C3_N: u64 = 8;
const C3_MEAN_SDS: f64 = 3.0;
const C3_D_SLACK: f64 = 0.005;
const C3_BUDGET: Duration = Duration::from_secs(120);
const C4_BUDGET: Duration = Duration::from_secs(10);
const C5_RANDOM_SAMPLES: usize = 10_000;
const C5_MAX_N: u64 = 200;
const C5_IDENTITY_TOL: f64 = 1e-10;
const C5_NAIVE_TOL: f64 = 1e-12;
const C5_BUDGET: Duration = Duration::from_secs(60);
const RATE_GRID: [u64; 4] = [100, 400, 1600, 6400];
const RATE_REPLICATES: usize = 20_000;
const RATE_MAX_LAST_D: f64 = 0.05;
const RATE_BUDGET: Duration = Duration::from_secs(300);
const C8_BUDGET: Duration = Duration::from_secs(30);
const C9_N: u64 = 1000;
const C9_REPLICATES: usize = 10_000;
const C9_BUDGET: Duration = Duration::from_secs(120);
const DKW: f64 = 1.36;

const MASTER_SEED: u64 = 20_240_601;
const WORKERS: usize = 1;
const OTHER_WORKERS: usize = 3;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    check(took <= budget, format!("took {took:.1?}, budget {budget:?}"))
}

fn c1_closed_form_variance() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for &lambda in &[0.1, 0.25, 0.4] {
        for &n in &[1u64 << 4, 1 << 10, 1 << 20] {
            let d = Distribution::perturbed_uniform(lambda, n).map_err(|e| e.to_string())?;
            let v = indices::sigma_sq(&d, &IndexSpec::SIMPSON).map_err(|e| e.to_string())?;
            let nf = n as f64;
            let expected = nf.powf(-2.0 * lambda) - nf.powf(-4.0 * lambda);
            let err = (v.sigma_sq - expected).abs();
            worst = worst.max(err);
            check(err <= C1_TOL, format!("lambda {lambda}, n {n}: {} vs {expected}", v.sigma_sq))?;
        }
    }
    within_budget(start, C1_BUDGET)?;
    Ok(format!("9 cells, max abs error {worst:.2e}"))
}

fn c2_holder_table() -> Outcome {
    let start = Instant::now();
    // (μ, ν, β, γ), β by hand from the four-case table
    let grid: [(f64, f64, f64, f64); 12] = [
        (2.0, 0.0, 1.0, 0.5),
        (1.5, 0.0, 0.5, 0.25),
        (1.3, 1.0, 0.3, 0.15),
        (3.0, 1.0, 1.0, 0.5),
        (1.3, 2.5, 0.3, 0.15),
        (2.5, 1.6, 0.6, 0.1),
        (4.0, 3.0, 1.0, 0.5),
        (1.8, 1.2, 0.2, 0.1),
        (1.0, 1.4, 0.4, 0.2),
        (1.0, 5.0, 1.0, 0.5),
        (1.0, 0.0, 1.0, 0.5),
        (1.0, 1.0, 1.0, 0.5),
    ];
    for (mu, nu, beta, gamma) in grid {
        let b = holder_beta(mu, nu).ok_or(format!("({mu}, {nu}) has no beta"))?;
        check((b - beta).abs() < 1e-12, format!("beta({mu}, {nu}) = {b}, expected {beta}"))?;
        let g = gamma_of(b).map_err(|e| e.to_string())?;
        check((g - gamma).abs() < 1e-12, format!("gamma({mu}, {nu}) = {g}, expected {gamma}"))?;
    }
    let simpson = IndexSpec::SIMPSON;
    check(simpson.beta() == Some(1.0) && simpson.gamma() == Some(0.5), "simpson is not beta 1, gamma 0.5")?;
    within_budget(start, C2_BUDGET)?;
    Ok("12 grid points, all four cases".into())
}

fn experiment(
    family: Family,
    index: IndexSpec,
    estimator: EstimatorKind,
    grid: Vec<u64>,
    replicates: usize,
) -> ExperimentConfig {
    ExperimentConfig {
        distribution: DistConfig::new(family),
        index,
        estimator,
        n_grid: grid,
        replicates,
        master_seed: MASTER_SEED,
        standardization: Standardization::TrueSigma,
        delta: None,
        epsilon: None,
    }
}

fn run(config: &ExperimentConfig, reports: &mut Vec<(ExperimentConfig, RateReport)>) -> Result<RateReport, String> {
    let r = run_experiment_with_workers(config, WORKERS).map_err(|e| e.to_string())?;
    reports.push((config.clone(), r.clone()));
    Ok(r)
}

fn c3_oracle_equivalence(reports: &mut Vec<(ExperimentConfig, RateReport)>) -> Outcome {
    let start = Instant::now();
    let probs = [0.2, 0.3, 0.5];
    let cases = [
        (IndexSpec::SIMPSON, EstimatorKind::Plugin),
        (IndexSpec::Shannon, EstimatorKind::Plugin),
        (IndexSpec::Shannon, EstimatorKind::MillerMadow),
        (IndexSpec::Shannon, EstimatorKind::Jackknife),
    ];
    let m = C3_REPLICATES as f64;
    let mut notes = Vec::new();
    for (index, kind) in cases {
        let est = Estimator::new(index, kind).map_err(|e| e.to_string())?;
        let dist = Distribution::finite(probs.to_vec()).map_err(|e| e.to_string())?;
        let truth = indices::theta(&dist, &index).map_err(|e| e.to_string())?;
        let sigma = indices::sigma_sq(&dist, &index).map_err(|e| e.to_string())?.sigma();
        let law = exact_estimator_law(&probs, C3_N, &est).map_err(|e| e.to_string())?;
        let scale = sigma / (C3_N as f64).sqrt();
        let exact_mean_t = (law.mean() - truth) / scale;
        let exact_sd_t = law.sd() / scale;
        let exact_d = exact_kolmogorov(&law, truth, scale).map_err(|e| e.to_string())?;

        let config = experiment(Family::Finite(probs.to_vec()), index, kind, vec![C3_N], C3_REPLICATES);
        let report = run(&config, reports)?;
        let p = &report.points[0];
        let label = format!("{index}/{kind}");
        let mean_gap = (p.mean - exact_mean_t).abs();
        check(
            mean_gap <= C3_MEAN_SDS * exact_sd_t / m.sqrt(),
            format!("{label}: mean gap {mean_gap:.4} > {:.4}", C3_MEAN_SDS * exact_sd_t / m.sqrt()),
        )?;
        let d_gap = (p.d_n - exact_d).abs();
        check(
            d_gap <= DKW / m.sqrt() + C3_D_SLACK,
            format!("{label}: |D_mc − D_exact| = {d_gap:.4}"),
        )?;
        notes.push(format!("{label} D {:.4}/{:.4}", p.d_n, exact_d));
    }
    within_budget(start, C3_BUDGET)?;
    Ok(notes.join(", "))
}

fn c4_moment_bound() -> Outcome {
    let start = Instant::now();
    let mut cells = 0;
    let mut worst_ratio: f64 = 0.0;
    for &p in &[0.01, 0.05, 0.1, 0.25, 0.5] {
        for &n in &[10u64, 100, 1000] {
            for &beta in &[0.25, 0.5, 0.75, 1.0] {
                let b = oracle::verify_moment_bound(p, n, beta).map_err(|e| e.to_string())?;
                check(b.holds, format!("p {p}, n {n}, beta {beta}: {} > {}", b.lhs, b.rhs))?;
                worst_ratio = worst_ratio.max(b.lhs / b.rhs);
                cells += 1;
            }
        }
    }
    within_budget(start, C4_BUDGET)?;
    Ok(format!("{cells} cells hold, max lhs/rhs {worst_ratio:.3}"))
}

fn naive_jackknife(ys: &[u64]) -> (f64, f64) {
    let n: u64 = ys.iter().sum();
    let live: Vec<u64> = ys.iter().copied().filter(|&y| y > 0).collect();
    let h = shannon_value(&live, n);
    let mut loo = 0.0;
    for (i, &y) in ys.iter().enumerate() {
        for _ in 0..y {
            let mut reduced = ys.to_vec();
            reduced[i] -= 1;
            let r: Vec<u64> = reduced.into_iter().filter(|&c| c > 0).collect();
            loo += shannon_value(&r, n - 1);
        }
    }
    let nf = n as f64;
    (nf * h - (nf - 1.0) / nf * loo, (nf - 1.0) / nf * (nf * h - loo))
}

fn compositions(n: u64, k: usize) -> Vec<Vec<u64>> {
    if k == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn c5_jackknife() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut min_bias = f64::INFINITY;
    for i in 0..C5_RANDOM_SAMPLES {
        let k = rng.gen_range(1..=12usize);
        let w: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let total: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
        let dist = Distribution::finite(probs).map_err(|e| e.to_string())?;
        let n = rng.gen_range(2..=C5_MAX_N);
        let counts = dist.sample_counts(n, MASTER_SEED ^ i as u64).map_err(|e| e.to_string())?;
        let est = jackknife(&counts).map_err(|e| e.to_string())?;
        let b = est.jackknife_bias.unwrap_or(f64::NAN);
        check(b >= 0.0, format!("sample {i}: B_JK = {b}"))?;
        min_bias = min_bias.min(b);
    }

    let mut worst_identity: f64 = 0.0;
    for n in 2..=10 {
        let id = oracle::jackknife_identity(&[0.3, 0.7], n).map_err(|e| e.to_string())?;
        worst_identity = worst_identity.max(id.discrepancy());
        check(id.discrepancy() <= C5_IDENTITY_TOL, format!("identity off at n {n}: {id:?}"))?;
    }

    let mut multisets = 0;
    for n in 2..=12u64 {
        for k in 1..=4usize {
            for ys in compositions(n, k) {
                let c = SampleCounts::from_dense(&ys).map_err(|e| e.to_string())?;
                let e = jackknife(&c).map_err(|e| e.to_string())?;
                let (v, b) = naive_jackknife(&ys);
                check(
                    (e.value - v).abs() <= C5_NAIVE_TOL && (e.jackknife_bias.unwrap() - b).abs() <= C5_NAIVE_TOL,
                    format!("closed form differs from naive on {ys:?}"),
                )?;
                multisets += 1;
            }
        }
    }
    within_budget(start, C5_BUDGET)?;
    Ok(format!(
        "min B_JK {min_bias:.2e}, identity max gap {worst_identity:.1e}, {multisets} multisets match"
    ))
}

fn rate_checks(label: &str, r: &RateReport) -> Outcome {
    let first = &r.points[0];
    let last = &r.points[r.points.len() - 1];
    check(
        r.decreasing_beyond_noise,
        format!("{label}: D {:.4} -> {:.4} not beyond bands", first.d_n, last.d_n),
    )?;
    let fit = r.fit.as_ref().ok_or(format!("{label}: no fit"))?;
    check(fit.slope < 0.0, format!("{label}: slope {:.3} not negative", fit.slope))?;
    check(
        last.d_n <= RATE_MAX_LAST_D,
        format!("{label}: D_{} = {:.4} > {RATE_MAX_LAST_D}", last.n, last.d_n),
    )?;
    let ds: Vec<String> = r.points.iter().map(|p| format!("{:.4}", p.d_n)).collect();
    Ok(format!(
        "D = [{}], slope {:.3}{}",
        ds.join(", "),
        fit.slope,
        if r.noise_dominated { " (noise-dominated points present)" } else { "" }
    ))
}

fn c6_rate_smooth(reports: &mut Vec<(ExperimentConfig, RateReport)>) -> Outcome {
    let start = Instant::now();
    let config = experiment(
        Family::Zipf { lambda: 2.0 },
        IndexSpec::SIMPSON,
        EstimatorKind::Plugin,
        RATE_GRID.to_vec(),
        RATE_REPLICATES,
    );
    let r = run(&config, reports)?;
    let out = rate_checks("simpson/zipf(2)", &r)?;
    within_budget(start, RATE_BUDGET)?;
    Ok(format!("{out}, reference exponent {:?}", r.theoretical_exponents.first().map(|e| e.value)))
}

fn c7_rate_shannon(reports: &mut Vec<(ExperimentConfig, RateReport)>) -> Outcome {
    let start = Instant::now();
    let mut config = experiment(
        Family::Geometric { lambda: 1.0 },
        IndexSpec::Shannon,
        EstimatorKind::Plugin,
        RATE_GRID.to_vec(),
        RATE_REPLICATES,
    );
    config.delta = Some(0.2);
    let r = run(&config, reports)?;
    let out = rate_checks("shannon/geometric(1)", &r)?;
    check(
        r.theoretical_exponents.iter().any(|e| (e.value + 0.1).abs() < 1e-15),
        "exponent -delta/2 = -0.1 not reported",
    )?;
    within_budget(start, RATE_BUDGET)?;
    Ok(format!("{out}, reference exponent -0.1"))
}

fn c8_conditions() -> Outcome {
    let start = Instant::now();
    let grid: Vec<u64> = vec![100, 1_000, 10_000, 100_000, 1_000_000];
    let parse = |s: &str| s.parse().map_err(|e: divindex::Error| e.to_string());
    let cases = [
        ("zipf(5)", Family::Zipf { lambda: 5.0 }, "ceil(n^(1/5))", None),
        ("geometric(1)", Family::Geometric { lambda: 1.0 }, "ceil(ln n)", None),
        ("log-quartic", Family::LogQuartic {}, "ceil(n^0.3)", Some(0.7)),
    ];
    let mut notes = Vec::new();
    for (label, family, k, eps) in cases {
        let hypothesis = if eps.is_some() { Hypothesis::Jackknife } else { Hypothesis::PluginEntropy };
        let mut spec = ConditionSpec::entropy(hypothesis, 0.1, parse(k)?, grid.clone());
        if let Some(e) = eps {
            spec = spec.with_epsilon(e);
        }
        let r = check_conditions(&DistConfig::new(family), &spec).map_err(|e| format!("{label}: {e}"))?;
        for q in &r.quantities {
            check(
                q.values.iter().all(|v| v.is_finite() && *v >= 0.0),
                format!("{label}: {} has non-finite or negative values", q.name),
            )?;
            check(q.bounded(), format!("{label}: {} not bounded: {:?}", q.name, q.values))?;
        }
        if eps.is_some() {
            let pm = r.quantity("power_moment").ok_or("power moment missing")?;
            check(!pm.divergent, format!("{label}: sum p^(1-eps) diverges"))?;
            notes.push(format!("{label} sum p^0.3 = {:.4}", pm.max.unwrap_or(f64::NAN)));
        } else {
            notes.push(format!("{label} bounded"));
        }
    }
    within_budget(start, C8_BUDGET)?;
    Ok(notes.join(", "))
}

fn c9_bias_correction(reports: &mut Vec<(ExperimentConfig, RateReport)>) -> Outcome {
    let start = Instant::now();
    let mut means = Vec::new();
    for kind in [EstimatorKind::Plugin, EstimatorKind::MillerMadow, EstimatorKind::Jackknife] {
        let config = experiment(Family::Geometric { lambda: 1.0 }, IndexSpec::Shannon, kind, vec![C9_N], C9_REPLICATES);
        let r = run(&config, reports)?;
        let p = &r.points[0];
        // mean of the estimator minus H, recovered from the standardized mean
        means.push(p.mean * p.sigma / (C9_N as f64).sqrt());
    }
    let (plugin, mm, jk) = (means[0], means[1], means[2]);
    check(mm.abs() < plugin.abs(), format!("|MM bias| {mm:.2e} not below |plug-in bias| {plugin:.2e}"))?;
    check(jk >= plugin, format!("JK mean below plug-in mean ({jk:.2e} < {plugin:.2e})"))?;
    within_budget(start, C9_BUDGET)?;
    Ok(format!("bias plug-in {plugin:.2e}, MM {mm:.2e}, JK {jk:.2e}"))
}

fn c10_determinism(reports: &[(ExperimentConfig, RateReport)]) -> Outcome {
    check(!reports.is_empty(), "no Monte Carlo reports to re-run")?;
    for (config, report) in reports {
        let again = run_experiment_with_workers(config, OTHER_WORKERS).map_err(|e| e.to_string())?;
        let a = serde_json::to_string(report).map_err(|e| e.to_string())?;
        let b = serde_json::to_string(&again).map_err(|e| e.to_string())?;
        check(a == b, format!("report differs with {OTHER_WORKERS} workers for {:?}", config.n_grid))?;
    }
    Ok(format!(
        "{} reports bit-identical with {WORKERS} vs {OTHER_WORKERS} workers",
        reports.len()
    ))
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |i: u32| only.as_ref().is_none_or(|v| v.contains(&i));

    let mut reports = Vec::new();
    let mut failed = 0;
    let mut report = |i: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(i) {
            return;
        }
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {i:>2} PASS  {name} [{took:.1?}]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {i:>2} FAIL  {name} [{took:.1?}]: {detail}");
            }
        }
    };

    report(1, "closed-form variance", &mut c1_closed_form_variance);
    report(2, "holder/rate table", &mut c2_holder_table);
    report(3, "oracle equivalence", &mut || c3_oracle_equivalence(&mut reports));
    report(4, "moment bound", &mut c4_moment_bound);
    report(5, "jackknife identities", &mut c5_jackknife);
    report(6, "rate shape, smooth index", &mut || c6_rate_smooth(&mut reports));
    report(7, "rate shape, shannon", &mut || c7_rate_shannon(&mut reports));
    report(8, "condition checkers", &mut c8_conditions);
    report(9, "bias correction", &mut || c9_bias_correction(&mut reports));
    let snapshot = reports.clone();
    report(10, "determinism", &mut || c10_determinism(&snapshot));

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
