//! Named verification suites. Each check produces a status, a one-line
//! summary, structured data and optional tables; the CLI serializes them and
//! the acceptance tests read them back.

use std::time::Instant;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::duhamel::{
    a_time_l1, build_lambda_sweep, contraction_coefficient, free_quantity, perturbed_quantity,
    fixed_point_residual, free_estimate_grid, lambda_perturbation_norm, evolution_l1_quantity, potential_a_l1,
    radial_bump, resolvent_norm, ATimeL1Table, ConvolutionSymbol, LambdaSweep,
};
use crate::error::Result;
use crate::kernels::{
    a_kernel_integrands, a_kernel_parts, low_freq_integrand, low_freq_parts, free_kernel_integrands,
    free_kernel_parts, split_kernel_integrand, LowFreqPart, LowFreqVariant, KernelIntegrand, KernelPlan,
    WaveKernelSpec,
};
use crate::oscint::{adaptive_reference, filon_cc, Amplitude, FilonPlan};
use crate::potentials::{assemble_vdelta_inv, check_decay_condition, solve_t, RadialPotential, SolveMethod};
use crate::specfun::Sign;
use crate::verify::{
    fit_decay, oscillatory_bound_check, linear_grid, log_grid, relative_change, sup_over_sigma, sup_ratio,
    uniform_time_integral, BoundReport, BoundShape, BoundSpec, DecayFit, Sample, MIN_LEVELS,
    STABILITY_THRESHOLD,
};

/// `h` values for the localized free-kernel bounds.
pub const LOCALIZED_H: [f64; 3] = [1.0, 4.0, 16.0];

/// Time window of the decay-exponent fits.
pub const FIT_WINDOW: (f64, f64) = (10.0, 200.0);

/// Spectral parameters of the low-frequency resolvent difference check.
pub const RESOLVENT_LAMBDAS: [f64; 3] = [0.1, 0.025, 0.00625];

/// Time step, in units of `h`, of the FFT-sampled time integrals.
const TIME_STEP: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// the computation itself failed (quadrature, singular matrix, tail)
    Error,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub summary: String,
    pub data: Value,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:.17e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<CheckResult>,
    pub tables: Vec<Table>,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        SuiteReport {
            suite: suite.name().to_string(),
            checks: vec![],
            tables: vec![],
        }
    }

    pub fn status(&self) -> Status {
        if self.checks.iter().any(|c| c.status == Status::Error) {
            Status::Error
        } else if self.checks.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else {
            Status::Pass
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    fn run(&mut self, cfg: &ExperimentConfig, name: &str, f: impl FnOnce() -> Result<Outcome>) {
        if !cfg.selected(name) {
            return;
        }
        let start = Instant::now();
        let (status, summary, data) = match f() {
            Ok(o) => {
                self.tables.extend(o.tables);
                let st = if o.passed { Status::Pass } else { Status::Fail };
                (st, o.summary, o.data)
            }
            Err(e) => (Status::Error, e.to_string(), Value::Null),
        };
        self.checks.push(CheckResult {
            name: name.to_string(),
            status,
            summary,
            data,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
}

/// What a check hands back to the runner.
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    pub data: Value,
    pub tables: Vec<Table>,
}

impl Outcome {
    fn new(passed: bool, summary: String, data: Value) -> Self {
        Outcome {
            passed,
            summary,
            data,
            tables: vec![],
        }
    }

    fn with_table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    KernelEval,
    FreeDecay,
    Resolvent,
    Born,
    Scaling,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::KernelEval => "kernel-eval",
            Suite::FreeDecay => "free-decay",
            Suite::Resolvent => "resolvent",
            Suite::Born => "born",
            Suite::Scaling => "scaling",
        }
    }

    pub fn all() -> [Suite; 5] {
        [
            Suite::Scaling,
            Suite::KernelEval,
            Suite::FreeDecay,
            Suite::Resolvent,
            Suite::Born,
        ]
    }
}

pub fn run_suite(suite: Suite, cfg: &ExperimentConfig) -> SuiteReport {
    let mut r = SuiteReport::new(suite);
    match suite {
        Suite::Scaling => scaling_suite(cfg, &mut r),
        Suite::KernelEval => kernel_eval_suite(cfg, &mut r),
        Suite::FreeDecay => free_decay_suite(cfg, &mut r),
        Suite::Resolvent => resolvent_suite(cfg, &mut r),
        Suite::Born => born_suite(cfg, &mut r),
    }
    r
}

fn spec_for(cfg: &ExperimentConfig, h: f64) -> WaveKernelSpec {
    WaveKernelSpec {
        order: cfg.order(),
        cutoffs: cfg.cutoffs(),
        h,
        quad: cfg.quad,
    }
}

fn rel_defect(a: Complex64, b: Complex64) -> f64 {
    let m = a.norm().max(b.norm());
    if m == 0.0 {
        0.0
    } else {
        (a - b).norm() / m
    }
}

fn report_outcome(r: &BoundReport) -> Outcome {
    Outcome::new(
        r.stable,
        format!(
            "sup-ratio {:.4e}, refinement change {:.2}%, extension change {:.2}%",
            r.constant,
            100.0 * r.refinement_change,
            100.0 * r.extension_change
        ),
        serde_json::to_value(r).unwrap_or(Value::Null),
    )
}

// ---------------------------------------------------------------- scaling

const SCALING_S: [f64; 5] = [0.3, 1.0, 2.5, 6.0, 15.0];
const SCALING_TAU: [f64; 5] = [0.5, 3.0, 10.0, 25.0, 60.0];
const SCALING_H: [f64; 3] = [1.5, 3.7, 12.0];

fn scaling_suite(cfg: &ExperimentConfig, r: &mut SuiteReport) {
    let n = cfg.order().dim_f64();
    let tol = cfg.tolerances.scaling;
    r.run(cfg, "kernel_scaling", || {
        // K_h(hs, hτ) against h^{−n}K₁(s, τ)
        let mut table = Table::new(
            "kernel_scaling",
            &["sigma", "t", "h", "lhs_re", "lhs_im", "defect"],
        );
        let mut worst = 0.0f64;
        for &h in &SCALING_H {
            let sh = spec_for(cfg, h);
            let s1 = spec_for(cfg, 1.0);
            for &s in &SCALING_S {
                let ph = free_kernel_parts(&sh, h * s)?;
                let p1 = free_kernel_parts(&s1, s)?;
                for &tau in &SCALING_TAU {
                    let lhs = sum_value(&ph, h * tau);
                    let rhs = sum_value(&p1, tau) * h.powf(-n);
                    let d = rel_defect(lhs, rhs);
                    worst = worst.max(d);
                    table.push(vec![h * s, h * tau, h, lhs.re, lhs.im, d]);
                }
            }
        }
        Ok(Outcome::new(
            worst <= tol,
            format!("max relative defect {worst:.3e} over 5x5x3 grid (tolerance {tol:.0e})"),
            json!({ "max_defect": worst, "tolerance": tol }),
        )
        .with_table(table))
    });
    r.run(cfg, "a_kernel_scaling", || {
        let mut table = Table::new("a_kernel_scaling", &["sigma", "t", "h", "sign", "defect"]);
        let mut worst = 0.0f64;
        for &h in &SCALING_H {
            let sh = spec_for(cfg, h);
            let s1 = spec_for(cfg, 1.0);
            for sign in Sign::both() {
                for &s in &SCALING_S {
                    let ph = a_kernel_parts(&sh, h * s, sign)?;
                    let p1 = a_kernel_parts(&s1, s, sign)?;
                    for &tau in &SCALING_TAU {
                        let lhs = sum_value(&ph, h * tau);
                        let rhs = sum_value(&p1, tau) * h.powf(1.0 - n);
                        let d = rel_defect(lhs, rhs);
                        worst = worst.max(d);
                        table.push(vec![h * s, h * tau, h, sign.value(), d]);
                    }
                }
            }
        }
        Ok(Outcome::new(
            worst <= tol,
            format!("max relative defect {worst:.3e} over 5x5x3 grid, both signs (tolerance {tol:.0e})"),
            json!({ "max_defect": worst, "tolerance": tol }),
        )
        .with_table(table))
    });
}

fn sum_value(parts: &[KernelPlan], t: f64) -> Complex64 {
    parts.iter().map(|p| p.value(t)).sum()
}

/// `(value, error estimate, flagged)` of a sum of plans.
fn sum_sample(parts: &[KernelPlan], t: f64) -> (Complex64, f64, bool) {
    parts
        .iter()
        .fold((Complex64::new(0.0, 0.0), 0.0, false), |(v, e, f), p| {
            let s = p.eval(t);
            (v + s.value, e + s.err, f || s.flagged)
        })
}

// ------------------------------------------------------------ kernel-eval

fn kernel_eval_suite(cfg: &ExperimentConfig, r: &mut SuiteReport) {
    r.run(cfg, "kernel_grids", || {
        let cols = ["sigma", "t", "h", "re", "im", "err"];
        let mut k = Table::new("kernel_K", &cols);
        let mut ap = Table::new("kernel_A_plus", &cols);
        let mut am = Table::new("kernel_A_minus", &cols);
        let mut flagged = 0usize;
        let mut count = 0usize;
        let mut hs = vec![1.0];
        hs.extend(cfg.h.iter().copied().filter(|&h| h != 1.0));
        for &h in &hs {
            let spec = spec_for(cfg, h);
            let sigmas: Vec<f64> = log_grid(0.1, 20.0, 12).into_iter().map(|s| s * h).collect();
            let ts: Vec<f64> = linear_grid(-10.0, 40.0, 0.5).into_iter().map(|t| t * h).collect();
            let mut dump = |parts: Vec<KernelPlan>, sigma: f64, table: &mut Table| {
                for &t in &ts {
                    let (v, e, f) = sum_sample(&parts, t);
                    flagged += f as usize;
                    count += 1;
                    table.push(vec![sigma, t, h, v.re, v.im, e]);
                }
            };
            for &s in &sigmas {
                dump(free_kernel_parts(&spec, s)?, s, &mut k);
                dump(a_kernel_parts(&spec, s, Sign::Plus)?, s, &mut ap);
                dump(a_kernel_parts(&spec, s, Sign::Minus)?, s, &mut am);
            }
        }
        Ok(Outcome {
            passed: flagged == 0,
            summary: format!("{count} samples, {flagged} above the quadrature target"),
            data: json!({ "samples": count, "flagged": flagged, "h": hs }),
            tables: vec![k, ap, am],
        })
    });
    r.run(cfg, "quadrature_cross_oracle", || quadrature_cross_oracle(cfg));
}

/// Randomized kernel integrands drawn from every kernel family.
pub fn random_integrands(cfg: &ExperimentConfig, count: usize) -> Result<Vec<(String, KernelIntegrand)>> {
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let order = cfg.order();
    let fam = cfg.cutoffs();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let h = 2f64.powf(rng.gen_range(0.0..4.0));
        let spec = spec_for(cfg, h);
        let sigma = 10f64.powf(rng.gen_range(-1.3..1.7));
        let sign = if rng.gen_bool(0.5) {
            Sign::Plus
        } else {
            Sign::Minus
        };
        let (label, ig) = match i % 5 {
            0 => ("free", free_kernel_integrands(&spec, sigma)?.remove(0)),
            1 => {
                let s = sigma.max(2.0 * h);
                ("free_split", split_kernel_integrand(&spec, s, sign)?)
            }
            2 => ("a_kernel", a_kernel_integrands(&spec, sigma, sign)?.remove(0)),
            3 => {
                let eps = rng.gen_range(0.0..0.1);
                let v = LowFreqVariant::part(LowFreqPart::Near).with_epsilon(eps);
                ("low_freq_near", low_freq_integrand(order, &fam, sigma, v)?)
            }
            _ => {
                let s = sigma.max(4.0);
                let v = LowFreqVariant::part(LowFreqPart::FarSplit(sign));
                ("low_freq_far", low_freq_integrand(order, &fam, s, v)?)
            }
        };
        out.push((format!("{label} sigma={:.4} h={h:.3}", ig.sigma), ig));
    }
    Ok(out)
}

/// Filon against adaptive Gauss–Kronrod; the defect is relative to `∫|g|`.
pub fn quadrature_cross_oracle(cfg: &ExperimentConfig) -> Result<Outcome> {
    let tol = cfg.tolerances.quadrature;
    let cases = random_integrands(cfg, 20)?;
    let ts = [1.0, 1e2, 1e4];
    let rows: Vec<(String, [f64; 3])> = cases
        .par_iter()
        .map(|(label, ig)| {
            let amp = Amplitude::new(|l: f64| ig.amplitude(l), ig.lo, ig.hi);
            let mass = FilonPlan::scalar(ig.lo, ig.hi, &cfg.quad, &amp.g)?.mass();
            let mut d = [0.0; 3];
            for (k, &t) in ts.iter().enumerate() {
                let (f, _) = filon_cc(&amp, t, &cfg.quad)?;
                let r = adaptive_reference(&amp, t, 1e-3 * tol * mass)?;
                d[k] = (f - r).norm() / mass;
            }
            Ok((label.clone(), d))
        })
        .collect::<Result<_>>()?;
    let worst = rows
        .iter()
        .flat_map(|(_, d)| d.iter().copied())
        .fold(0.0, f64::max);
    let mut table = Table::new("quadrature_cross_oracle", &["case", "t1", "t100", "t10000"]);
    for (i, (_, d)) in rows.iter().enumerate() {
        table.push(vec![i as f64, d[0], d[1], d[2]]);
    }
    Ok(Outcome::new(
        worst <= tol,
        format!(
            "{} integrands x 3 times, max defect / ∫|g| = {worst:.3e} (tolerance {tol:.0e})",
            rows.len()
        ),
        json!({
            "cases": rows.iter().map(|(l, d)| json!({ "integrand": l, "defects": d })).collect::<Vec<_>>(),
            "max_defect": worst,
            "tolerance": tol,
        }),
    )
    .with_table(table))
}

// ------------------------------------------------------------- free-decay

fn free_decay_suite(cfg: &ExperimentConfig, r: &mut SuiteReport) {
    r.run(cfg, "free_decay_slope", || free_decay_slope(cfg));
    for h in LOCALIZED_H {
        r.run(cfg, &format!("localized_decay_h{h}"), || localized_decay(cfg, h));
    }
    let d = (cfg.order().dim_f64() - 1.0) / 2.0;
    for s in [0.0, d] {
        r.run(cfg, &format!("time_moment_s{s}"), || time_moment(cfg, s));
    }
    r.run(cfg, "time_moment_transfer", || time_moment_transfer(cfg));
    r.run(cfg, "a_kernel_time_l1", || a_kernel_time_l1(cfg));
    r.run(cfg, "a_kernel_small_sigma", || a_kernel_small_sigma(cfg));
    r.run(cfg, "low_freq_log_decay", || low_freq_log_decay(cfg));
    r.run(cfg, "low_freq_slope", || low_freq_slope(cfg, 0.0));
    r.run(cfg, "low_freq_eps_slope", || low_freq_slope(cfg, 0.05));
    for k in [1.0, 1.5, 2.0] {
        r.run(cfg, &format!("oscillatory_bound_k{k}"), || {
            Ok(report_outcome(&oscillatory_bound_check(
                cfg.order(),
                &cfg.cutoffs(),
                k,
                &cfg.quad,
            )?))
        });
    }
}

fn fit_table(name: &str, sup: &[f64], ts: &[f64], fit: &DecayFit) -> Table {
    let mut t = Table::new(name, &["t", "sup_sigma", "fitted"]);
    for (&x, &q) in ts.iter().zip(sup) {
        let lc = if fit.log_correction { (x + 2.0).ln() } else { 1.0 };
        t.push(vec![x, q, (fit.intercept + fit.slope * x.ln()).exp() * lc]);
    }
    t
}

fn slope_outcome(
    cfg: &ExperimentConfig,
    name: &str,
    ts: &[f64],
    sup: &[f64],
    log_correction: bool,
) -> Result<Outcome> {
    let expected = -(cfg.order().dim_f64() - 1.0) / 2.0;
    let fit = fit_decay(ts, sup, log_correction)?;
    let tol = cfg.tolerances.slope;
    let ok = (fit.slope - expected).abs() <= tol;
    Ok(Outcome::new(
        ok,
        format!(
            "slope {:.4} (expected {expected} ± {tol}), rms {:.2e}, window [{}, {}]",
            fit.slope, fit.rms, fit.window.0, fit.window.1
        ),
        json!({ "fit": fit, "expected": expected, "tolerance": tol }),
    )
    .with_table(fit_table(name, sup, ts, &fit)))
}

/// `σ` grid around the wave front `σ ≈ t` for `t` up to `t_max`.
fn front_sigmas(t_max: f64, step: f64) -> Vec<f64> {
    linear_grid(step, 1.2 * t_max + 10.0, step)
}

pub fn free_decay_slope(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = spec_for(cfg, 1.0);
    let ts = log_grid(FIT_WINDOW.0, FIT_WINDOW.1, 24);
    let sup = sup_over_sigma(&front_sigmas(FIT_WINDOW.1, 0.05), &ts, |s| {
        free_kernel_parts(&spec, s)
    })?;
    let mut out = slope_outcome(cfg, "free_decay_slope", &ts, &sup.sup, false)?;
    // Near σ = 0 the kernel is the Fourier tail of the cutoff, which beats
    // the front for t up to about 60; the front-only fit is recorded beside
    // the verdict so the two regimes can be told apart.
    let front = fit_decay(&ts, &sup.front_sup, false)?;
    if let Some(obj) = out.data.as_object_mut() {
        obj.insert("front_fit".into(), json!(front));
        obj.insert("argsup".into(), json!(sup.argsup));
    }
    out.summary.push_str(&format!("; front-only (σ ≥ t/2) slope {:.4}", front.slope));
    let mut table = Table::new("free_decay_front", &["t", "argsup_sigma", "front_sup"]);
    for ((&t, &at), &f) in ts.iter().zip(&sup.argsup).zip(&sup.front_sup) {
        table.push(vec![t, at, f]);
    }
    Ok(out.with_table(table))
}

/// Sup over `(σ, t)` of `|K_h|` against `h^{−(n+1)/2}⟨t⟩^{−s}σ^{s−(n−1)/2}`
/// with `s = (n−1)/2`; levels refine the `σ` and `t` grids, extensions
/// double the range.
pub fn localized_decay(cfg: &ExperimentConfig, h: f64) -> Result<Outcome> {
    let order = cfg.order();
    let s = (order.dim_f64() - 1.0) / 2.0;
    let spec = spec_for(cfg, h);
    let bound = BoundSpec::new(
        format!("localized_decay_h{h}"),
        BoundShape::LocalizedDecay { s },
        order,
    );
    let rep = sup_ratio(&bound, MIN_LEVELS, 2, |level, ext| {
        let top = 10.0 * 2f64.powi(ext as i32);
        let sigmas: Vec<f64> = linear_grid(0.05, top + 5.0, 0.4 / 2f64.powi(level as i32))
            .into_iter()
            .map(|x| x * h)
            .collect();
        let ts: Vec<f64> = log_grid(0.5, top, (12 << level) * (1 + ext) + 1)
            .into_iter()
            .map(|x| x * h)
            .collect();
        kernel_samples(&sigmas, &ts, h, |sg| free_kernel_parts(&spec, sg))
    })?;
    Ok(report_outcome(&rep))
}

fn kernel_samples(
    sigmas: &[f64],
    ts: &[f64],
    h: f64,
    parts: impl Fn(f64) -> Result<Vec<KernelPlan>> + Sync,
) -> Result<Vec<Sample>> {
    let rows: Vec<Vec<Sample>> = sigmas
        .par_iter()
        .map(|&sigma| {
            let p = parts(sigma)?;
            Ok(ts
                .iter()
                .map(|&t| Sample {
                    sigma,
                    t,
                    h,
                    magnitude: sum_value(&p, t).norm(),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// `∫|t|^s |K_h(σ, t)| dt`.
pub fn free_time_moment(spec: &WaveKernelSpec, sigma: f64, s: f64, step: f64) -> Result<f64> {
    let parts = free_kernel_integrands(spec, sigma)?;
    let h = spec.h;
    Ok(uniform_time_integral(
        &parts,
        s,
        step * h,
        2.0 * sigma + 40.0 * h,
        1e-7,
        1e6 * h + 64.0 * sigma,
    )?
    .value)
}

/// Time moments against `σ^{s−(n−1)/2}` (h = 1) over `σ ∈ [0.1, 50]`.
pub fn time_moment(cfg: &ExperimentConfig, s: f64) -> Result<Outcome> {
    let order = cfg.order();
    let spec = spec_for(cfg, 1.0);
    let bound = BoundSpec::new(format!("time_moment_s{s}"), BoundShape::TimeMoment { s }, order);
    let rep = sup_ratio(&bound, MIN_LEVELS, 2, |level, ext| {
        let top = 12.5 * 2f64.powi(ext as i32);
        let sigmas = log_grid(0.1, top, (6 << level) * (3 + ext) + 1);
        let step = TIME_STEP * 2f64.powi(-(level as i32));
        sigmas
            .par_iter()
            .map(|&sigma| {
                Ok(Sample {
                    sigma,
                    t: 0.0,
                    h: 1.0,
                    magnitude: free_time_moment(&spec, sigma, s, step)?,
                })
            })
            .collect()
    })?;
    Ok(report_outcome(&rep))
}

/// `∫|t|^s|K_h(σ,t)|dt = h^{s+1−n}∫|τ|^s|K₁(σ/h,τ)|dτ`.
pub fn time_moment_transfer(cfg: &ExperimentConfig) -> Result<Outcome> {
    let n = cfg.order().dim_f64();
    let h = 3.7;
    let tol = cfg.tolerances.transfer;
    let mut worst = 0.0f64;
    let mut table = Table::new("time_moment_transfer", &["sigma", "s", "lhs", "rhs", "defect"]);
    for s in [0.0, (n - 1.0) / 2.0] {
        for sigma in [0.2, 1.0, 5.0, 20.0] {
            let lhs = free_time_moment(&spec_for(cfg, h), sigma, s, TIME_STEP)?;
            let rhs = h.powf(s + 1.0 - n) * free_time_moment(&spec_for(cfg, 1.0), sigma / h, s, TIME_STEP)?;
            let d = relative_change(lhs, rhs);
            worst = worst.max(d);
            table.push(vec![sigma, s, lhs, rhs, d]);
        }
    }
    Ok(Outcome::new(
        worst <= tol,
        format!("h = {h} against rescaled h = 1: max relative defect {worst:.3e} (tolerance {tol:.0e})"),
        json!({ "h": h, "max_defect": worst, "tolerance": tol }),
    )
    .with_table(table))
}

/// `max_± ∫|A_h^±(σ, t)| dt`.
pub fn a_time_l1_max(spec: &WaveKernelSpec, sigma: f64, step: f64) -> Result<f64> {
    let mut m = 0.0f64;
    for sign in Sign::both() {
        m = m.max(a_time_l1(spec, sigma, sign, step)?.value);
    }
    Ok(m)
}

fn a_time_l1_report(
    cfg: &ExperimentConfig,
    bound: BoundSpec,
    range: impl Fn(usize) -> (f64, f64) + Sync,
) -> Result<Outcome> {
    let spec = spec_for(cfg, 1.0);
    let rep = sup_ratio(&bound, MIN_LEVELS, 2, |level, ext| {
        let (lo, hi) = range(ext);
        let decades = (hi / lo).log10();
        let sigmas = log_grid(lo, hi, ((4.0 * decades).ceil() as usize) * (1 << level) + 1);
        let step = TIME_STEP * 2f64.powi(-(level as i32));
        sigmas
            .par_iter()
            .map(|&sigma| {
                Ok(Sample {
                    sigma,
                    t: 0.0,
                    h: 1.0,
                    magnitude: a_time_l1_max(&spec, sigma, step)?,
                })
            })
            .collect()
    })?;
    Ok(report_outcome(&rep))
}

/// Against `σ^{−n+5/2} + σ^{−(n−1)/2}` on `[0.05, 50]`, reached by two
/// doublings of `[0.2, 12.5]` at both ends.
pub fn a_kernel_time_l1(cfg: &ExperimentConfig) -> Result<Outcome> {
    let bound = BoundSpec::new("a_kernel_time_l1", BoundShape::ResolventTimeL1, cfg.order());
    a_time_l1_report(cfg, bound, |ext| {
        let f = 2f64.powi(ext as i32);
        (0.2 / f, 12.5 * f)
    })
}

/// Against `σ^{1/2−n+2}` on `σ ≤ 0.5`, extended downwards by factors of 4.
pub fn a_kernel_small_sigma(cfg: &ExperimentConfig) -> Result<Outcome> {
    let bound = BoundSpec::new("a_kernel_small_sigma", BoundShape::SmallSigmaBranch, cfg.order());
    a_time_l1_report(cfg, bound, |ext| (0.05 / 4f64.powi(ext as i32), 0.5))
}

fn low_freq_sup(cfg: &ExperimentConfig, ts: &[f64], step: f64, epsilon: f64) -> Result<Vec<f64>> {
    let order = cfg.order();
    let fam = cfg.cutoffs();
    let t_max = ts.iter().cloned().fold(0.0, f64::max);
    Ok(sup_over_sigma(&front_sigmas(t_max, step), ts, |s| {
        low_freq_parts(order, &fam, s, epsilon, &cfg.quad)
    })?
    .sup)
}

/// `sup_σ|K(σ,t)|` against `⟨t⟩^{−(n−1)/2}log(|t|+2)`; levels refine both
/// grids, extensions double the time range.
pub fn low_freq_log_decay(cfg: &ExperimentConfig) -> Result<Outcome> {
    let bound = BoundSpec::new("low_freq_log_decay", BoundShape::LogDecay, cfg.order());
    let rep = sup_ratio(&bound, MIN_LEVELS, 2, |level, ext| {
        let top = 100.0 * 2f64.powi(ext as i32);
        let ts = log_grid(FIT_WINDOW.0, top, (6 << level) * (2 + ext) + 1);
        let sup = low_freq_sup(cfg, &ts, 0.5 / 2f64.powi(level as i32), 0.0)?;
        Ok(ts
            .iter()
            .zip(sup)
            .map(|(&t, m)| Sample {
                sigma: 0.0,
                t,
                h: 1.0,
                magnitude: m,
            })
            .collect())
    })?;
    Ok(report_outcome(&rep))
}

/// Decay exponent of the low-frequency kernel; with `epsilon = 0` the fit
/// divides out `log(t+2)`, with `epsilon > 0` it does not.
pub fn low_freq_slope(cfg: &ExperimentConfig, epsilon: f64) -> Result<Outcome> {
    let ts = log_grid(FIT_WINDOW.0, FIT_WINDOW.1, 24);
    let sup = low_freq_sup(cfg, &ts, 0.125, epsilon)?;
    let name = if epsilon > 0.0 {
        "low_freq_eps_slope"
    } else {
        "low_freq_slope"
    };
    let mut o = slope_outcome(cfg, name, &ts, &sup, epsilon == 0.0)?;
    if let Value::Object(m) = &mut o.data {
        m.insert("epsilon".into(), json!(epsilon));
    }
    Ok(o)
}

// -------------------------------------------------------------- resolvent

fn resolvent_suite(cfg: &ExperimentConfig, r: &mut SuiteReport) {
    let order = cfg.order();
    r.run(cfg, "newton_constant", || {
        let c = order.newton_constant();
        let tol = cfg.tolerances.newton;
        let mut worst = 0.0f64;
        for rr in [0.1, 1.0, 3.0, 10.0] {
            for sign in Sign::both() {
                let k = crate::kernels::resolvent_kernel(order, 0.0, rr, sign)?;
                let exact = Complex64::new(c * rr.powf(2.0 - order.dim_f64()), 0.0);
                worst = worst.max(rel_defect(k, exact));
            }
        }
        Ok(Outcome::new(
            worst <= tol,
            format!("λ = 0 kernel against Γ(n/2−1)/(4π^(n/2)) r^(2−n): max relative defect {worst:.3e}"),
            json!({ "constant": c, "max_defect": worst, "tolerance": tol }),
        ))
    });
    let setup = || -> Result<_> {
        let grid = cfg.grids.radial_grid(order)?;
        let v = cfg.potential()?;
        Ok((grid, v))
    };
    r.run(cfg, "resolvent_bounded", || {
        let (grid, v) = setup()?;
        let lambdas = [1.0, 0.5, 0.1, 0.025, 0.00625];
        let mut table = Table::new("resolvent_bounded", &["lambda", "sign", "norm"]);
        let mut sups = vec![];
        for &l in &lambdas {
            let mut m = 0.0f64;
            for sign in Sign::both() {
                let x = resolvent_norm(&v, &grid, l, sign);
                table.push(vec![l, sign.value(), x]);
                m = m.max(x);
            }
            sups.push(m);
        }
        let change = relative_change(sups[sups.len() - 1], sups[sups.len() - 2]);
        let ok = sups.iter().all(|x| x.is_finite()) && change < STABILITY_THRESHOLD;
        Ok(Outcome::new(
            ok,
            format!(
                "‖VR₀(λ)‖ max {:.4e}; change over the last λ step {:.2}%",
                sups.iter().cloned().fold(0.0, f64::max),
                100.0 * change
            ),
            json!({ "lambdas": lambdas, "norms": sups }),
        )
        .with_table(table))
    });
    r.run(cfg, "resolvent_difference_rate", || {
        let (grid, v) = setup()?;
        let mut table = Table::new("resolvent_difference_rate", &["lambda", "sign", "norm", "ratio"]);
        let mut ok = true;
        let mut ratios = vec![];
        for sign in Sign::both() {
            let mut prev: Option<f64> = None;
            for &l in &RESOLVENT_LAMBDAS {
                let x = lambda_perturbation_norm(&v, &grid, l, sign);
                let q = x / l.sqrt();
                table.push(vec![l, sign.value(), x, q]);
                if let Some(p) = prev {
                    ok &= q <= (1.0 + STABILITY_THRESHOLD) * p;
                }
                prev = Some(q);
                ratios.push(q);
            }
        }
        Ok(Outcome::new(
            ok,
            format!(
                "‖VR₀(λ)−VR₀(0)‖/λ^(1/2) = {:?} over λ = {RESOLVENT_LAMBDAS:?}",
                ratios.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>()
            ),
            json!({ "lambdas": RESOLVENT_LAMBDAS, "ratios": ratios }),
        )
        .with_table(table))
    });
    r.run(cfg, "t_solve", || {
        let (grid, v) = setup()?;
        let t = solve_t(&assemble_vdelta_inv(&v, &grid))?;
        let tol = cfg.tolerances.solve_agreement;
        let norm = t.t.l1_norm();
        let bound = 1.0 / (1.0 - t.neumann_q);
        let agreement = t.agreement.unwrap_or(f64::INFINITY);
        let ok = t.method == SolveMethod::Series && agreement <= tol && norm <= bound;
        Ok(Outcome::new(
            ok,
            format!(
                "q = {:.4}, series/direct agreement {agreement:.2e}, ‖T‖ = {norm:.4} ≤ 1/(1−q) = {bound:.4}",
                t.neumann_q
            ),
            json!({
                "coupling": v.coupling,
                "decay": v.decay,
                "neumann_q": t.neumann_q,
                "agreement": agreement,
                "t_norm": norm,
                "neumann_bound": bound,
                "residual": t.residual,
                "series_terms": t.series_terms,
            }),
        ))
    });
    let ys = [0.0, 0.5, 1.0, 2.0, 4.0];
    r.run(cfg, "decay_condition", || {
        let (_, v) = setup()?;
        let rep = check_decay_condition(&v, order, &ys, cfg.grids.r_max)?;
        Ok(Outcome::new(
            !rep.divergent,
            format!(
                "δ = {}: sup {:.4e}, shell growth ratio {:.4}",
                v.decay, rep.sup, rep.growth_ratio
            ),
            serde_json::to_value(&rep).unwrap_or(Value::Null),
        ))
    });
    r.run(cfg, "decay_condition_control", || {
        // δ = 2 sits on the borderline and must be flagged, growing like √2 per doubling
        let (_, v) = setup()?;
        let v2 = RadialPotential::new(v.coupling, 2.0)?;
        let rep = check_decay_condition(&v2, order, &ys, cfg.grids.r_max)?;
        let ok = rep.divergent && (rep.growth_ratio - 2f64.sqrt()).abs() <= 0.05;
        Ok(Outcome::new(
            ok,
            format!(
                "δ = 2: flagged {}, shell growth ratio {:.4} (√2 = {:.4})",
                rep.divergent,
                rep.growth_ratio,
                2f64.sqrt()
            ),
            serde_json::to_value(&rep).unwrap_or(Value::Null),
        ))
    });
}

// ------------------------------------------------------------------- born

/// Everything the perturbed checks need at one `h`.
#[derive(Clone, Debug, Serialize)]
pub struct BornLevel {
    pub h: f64,
    pub t_norm: f64,
    pub max_q: f64,
    /// fixed-point residual on the configured and on the refined grids
    pub residual: [f64; 2],
    pub u_scale: f64,
    /// `∫∫|U_h^± f|/‖f‖`, max over signs and bump centres
    pub evolution_l1: f64,
    pub perturbed: f64,
    pub free: f64,
    pub s_h: f64,
    pub contraction: f64,
}

const BUMP_CENTRES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
const BUMP_WIDTH: f64 = 0.25;

pub fn born_level(cfg: &ExperimentConfig, h: f64, table: &ATimeL1Table) -> Result<BornLevel> {
    let order = cfg.order();
    let spec = spec_for(cfg, h);
    let grids = cfg.grids;
    let grid = grids.radial_grid(order)?;
    let v = cfg.potential()?;
    let t = solve_t(&assemble_vdelta_inv(&v, &grid))?;
    let time = grids.time_grid(h)?;
    let sweeps: Vec<LambdaSweep> = Sign::both()
        .iter()
        .map(|&s| build_lambda_sweep(&v, &t, &spec, s, grids.lambda_nodes))
        .collect::<Result<_>>()?;
    let symbols: Vec<ConvolutionSymbol> = Sign::both()
        .iter()
        .map(|&s| ConvolutionSymbol::new(&v, &t.t.matrix, &grid, &spec, s, time))
        .collect();
    let f = radial_bump(&grid, 1.0, BUMP_WIDTH)?;
    let est = perturbed_quantity([&sweeps[0], &sweeps[1]], [&symbols[0], &symbols[1]], &f)?;
    let mut evolution_l1 = est.evolution_l1[0].max(est.evolution_l1[1]);
    for r0 in BUMP_CENTRES {
        let g = radial_bump(&grid, r0, BUMP_WIDTH)?;
        for sw in &sweeps {
            evolution_l1 = evolution_l1.max(evolution_l1_quantity(sw, &time, &g));
        }
    }
    let mut residual = [0.0f64; 2];
    let mut u_scale = 0.0f64;
    for sw in &sweeps {
        let r = fixed_point_residual(&v, sw, &spec, time)?;
        residual[0] = residual[0].max(r.residual);
        u_scale = u_scale.max(r.u_scale);
    }
    let fine = grids.refined();
    let fine_time = fine.time_grid(h)?;
    for sign in Sign::both() {
        let sw = build_lambda_sweep(&v, &t, &spec, sign, fine.lambda_nodes)?;
        residual[1] = residual[1].max(fixed_point_residual(&v, &sw, &spec, fine_time)?.residual);
    }
    let fgrid = free_estimate_grid(order, h)?;
    let ff = radial_bump(&fgrid, 1.0, BUMP_WIDTH)?;
    let free = free_quantity(&v, &spec, &fgrid, &ff, TIME_STEP)?.value;
    let s_h = potential_a_l1(&v, &grid, table, h)?;
    let t_norm = sweeps[0].t_norm();
    Ok(BornLevel {
        h,
        t_norm,
        max_q: sweeps.iter().map(|s| s.max_q()).fold(0.0, f64::max),
        residual,
        u_scale,
        evolution_l1,
        perturbed: est.value,
        free,
        s_h,
        contraction: contraction_coefficient(t_norm, s_h),
    })
}

fn born_suite(cfg: &ExperimentConfig, r: &mut SuiteReport) {
    let order = cfg.order();
    let n = order.dim_f64();
    r.run(cfg, "a_kernel_time_l1_h", || {
        // ∫|A_h|dt · h^{1/2} / (σ^{−n+5/2} + σ^{−(n−1)/2}) over σ ∈ [0.1, 50]
        let sigmas = log_grid(0.1, 50.0, 28);
        let bound = BoundSpec::new("a_kernel_time_l1_h", BoundShape::ResolventTimeL1, order);
        let mut sups = vec![];
        let mut table = Table::new("a_kernel_time_l1_h", &["h", "sigma", "integral", "ratio"]);
        for h in LOCALIZED_H {
            let spec = spec_for(cfg, h);
            let vals: Vec<f64> = sigmas
                .par_iter()
                .map(|&s| a_time_l1_max(&spec, s, TIME_STEP))
                .collect::<Result<_>>()?;
            let mut m = 0.0f64;
            for (&s, &x) in sigmas.iter().zip(&vals) {
                let q = x / bound.weight(s, 0.0, h);
                table.push(vec![h, s, x, q]);
                m = m.max(q);
            }
            sups.push(m);
        }
        let change = relative_change(sups[2], sups[1]);
        Ok(Outcome::new(
            change < STABILITY_THRESHOLD,
            format!(
                "sup-ratio per h ∈ {LOCALIZED_H:?}: {sups:.4?}; change over the last step {:.2}%",
                100.0 * change
            ),
            json!({ "h": LOCALIZED_H, "sups": sups, "change": change }),
        )
        .with_table(table))
    });
    let names = [
        "fixed_point_residual",
        "evolution_l1_bounded",
        "contraction",
        "perturbed_slope",
        "free_quantity_scaled",
    ];
    if !names.iter().any(|c| cfg.selected(c)) {
        return;
    }
    let start = Instant::now();
    let levels: Result<Vec<BornLevel>> = ATimeL1Table::build(order, &cfg.cutoffs(), &cfg.quad)
        .and_then(|table| cfg.h.iter().map(|&h| born_level(cfg, h, &table)).collect());
    let levels = match levels {
        Ok(l) => l,
        Err(e) => {
            let secs = start.elapsed().as_secs_f64();
            for c in names.iter().filter(|c| cfg.selected(c)) {
                r.checks.push(CheckResult {
                    name: c.to_string(),
                    status: Status::Error,
                    summary: e.to_string(),
                    data: Value::Null,
                    seconds: secs,
                });
            }
            return;
        }
    };
    let mut table = Table::new(
        "born_sweep",
        &[
            "h",
            "residual",
            "residual_refined",
            "evolution_l1",
            "perturbed",
            "free",
            "free_scaled",
            "s_h",
            "contraction",
            "t_norm",
            "max_q",
        ],
    );
    let d = (n - 1.0) / 2.0;
    for l in &levels {
        table.push(vec![
            l.h,
            l.residual[0],
            l.residual[1],
            l.evolution_l1,
            l.perturbed,
            l.free,
            l.free * l.h.powf(d),
            l.s_h,
            l.contraction,
            l.t_norm,
            l.max_q,
        ]);
    }
    r.tables.push(table);
    let data = serde_json::to_value(&levels).unwrap_or(Value::Null);
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let tol = cfg.tolerances.residual;
    let dec = cfg.tolerances.residual_decrease;
    r.run(cfg, "fixed_point_residual", || {
        let worst = levels.iter().map(|l| l.residual[0]).fold(0.0, f64::max);
        let min_dec = levels
            .iter()
            .map(|l| l.residual[0] / l.residual[1])
            .fold(f64::INFINITY, f64::min);
        Ok(Outcome::new(
            worst <= tol && min_dec >= dec,
            format!("max residual {worst:.3e} (≤ {tol:.0e}); smallest decrease under refinement {min_dec:.2}x (≥ {dec})"),
            json!({ "levels": data, "max_residual": worst, "min_decrease": min_dec }),
        ))
    });
    r.run(cfg, "evolution_l1_bounded", || {
        let q: Vec<f64> = levels.iter().map(|l| l.evolution_l1).collect();
        let change = if q.len() >= 2 {
            relative_change(q[q.len() - 1], q[q.len() - 2])
        } else {
            f64::INFINITY
        };
        Ok(Outcome::new(
            change < STABILITY_THRESHOLD,
            format!(
                "∫∫|U f|/‖f‖ over h = {hs:?}: {q:.4?}; change over the last step {:.2}%",
                100.0 * change
            ),
            json!({ "h": hs, "values": q, "change": change }),
        ))
    });
    r.run(cfg, "contraction", || {
        let last = levels.last().expect("h list is non-empty");
        Ok(Outcome::new(
            last.contraction < 1.0,
            format!(
                "coefficient {:.4} at h = {} (‖T‖ = {:.4}, S_h = {:.4e})",
                last.contraction, last.h, last.t_norm, last.s_h
            ),
            json!({ "h": last.h, "coefficient": last.contraction, "t_norm": last.t_norm, "s_h": last.s_h }),
        ))
    });
    r.run(cfg, "perturbed_slope", || {
        let q: Vec<f64> = levels.iter().map(|l| l.perturbed).collect();
        let fit = fit_decay(&hs, &q, false)?;
        Ok(Outcome::new(
            fit.slope <= -1.0,
            format!(
                "h-slope {:.4} (≤ −1), excess over −1: {:.4}",
                fit.slope,
                -1.0 - fit.slope
            ),
            json!({ "h": hs, "values": q, "fit": fit }),
        ))
    });
    r.run(cfg, "free_quantity_scaled", || {
        let q: Vec<f64> = levels.iter().map(|l| l.free * l.h.powf(d)).collect();
        let ok = q.windows(2).all(|w| w[1] <= (1.0 + STABILITY_THRESHOLD) * w[0]);
        Ok(Outcome::new(
            ok,
            format!("free quantity × h^{d} over h = {hs:?}: {q:.4?}"),
            json!({ "h": hs, "values": q }),
        ))
    });
}
