//! Verdicts from kernel samples: sup-ratio stability reports, time integrals
//! with tail control, and log-log decay regressions.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cutoffs::CutoffFamily;
use crate::error::{Error, Result};
use crate::kernels::{low_freq_g, eval_parts, oscillatory_plan, KernelIntegrand, KernelPlan};
use crate::oscint::QuadConfig;
use crate::specfun::SpectralOrder;

/// Relative change below which a sup-ratio counts as settled.
pub const STABILITY_THRESHOLD: f64 = 0.10;

/// Fewest refinement levels a report may be built from.
pub const MIN_LEVELS: usize = 3;

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Right-hand side shapes of the bounds under test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum BoundShape {
    /// `⟨t⟩^{−s}⟨σ⟩^{s−(n−1)/2}`
    KernelDecay { s: f64 },
    /// `h^{−(n+1)/2}⟨t⟩^{−s}σ^{s−(n−1)/2}`
    LocalizedDecay { s: f64 },
    /// `h^{−(n−1)/2}σ^{s−(n−1)/2}`
    TimeMoment { s: f64 },
    /// `h^{−1/2}(σ^{−n+5/2} + σ^{−(n−1)/2})`
    ResolventTimeL1,
    /// `σ^{1/2−n+2}`
    SmallSigmaBranch,
    /// `⟨t⟩^{−(n−1)/2} log(|t| + 2)`
    LogDecay,
    /// `⟨t⟩^{−(n−1)/2}`
    Decay,
    /// `|t|^{−(n−1)/2}`
    OffDiagonal,
    /// `|t|^{−k}`
    PowerT { k: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundSpec {
    pub name: String,
    pub shape: BoundShape,
    pub order: SpectralOrder,
}

impl BoundSpec {
    pub fn new(name: impl Into<String>, shape: BoundShape, order: SpectralOrder) -> Self {
        BoundSpec {
            name: name.into(),
            shape,
            order,
        }
    }

    pub fn weight(&self, sigma: f64, t: f64, h: f64) -> f64 {
        let n = self.order.dim_f64();
        let d = (n - 1.0) / 2.0;
        match self.shape {
            BoundShape::KernelDecay { s } => japanese(t).powf(-s) * japanese(sigma).powf(s - d),
            BoundShape::LocalizedDecay { s } => {
                h.powf(-(n + 1.0) / 2.0) * japanese(t).powf(-s) * sigma.powf(s - d)
            }
            BoundShape::TimeMoment { s } => h.powf(-d) * sigma.powf(s - d),
            BoundShape::ResolventTimeL1 => {
                h.powf(-0.5) * (sigma.powf(2.5 - n) + sigma.powf(-d))
            }
            BoundShape::SmallSigmaBranch => sigma.powf(2.5 - n),
            BoundShape::LogDecay => japanese(t).powf(-d) * (t.abs() + 2.0).ln(),
            BoundShape::Decay => japanese(t).powf(-d),
            BoundShape::OffDiagonal => t.abs().powf(-d),
            BoundShape::PowerT { k } => t.abs().powf(-k),
        }
    }
}

/// One magnitude to be compared against a bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub sigma: f64,
    pub t: f64,
    pub h: f64,
    pub magnitude: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub name: String,
    /// sup of `|sample|/w` at each refinement level (base range)
    pub level_sups: Vec<f64>,
    /// sup at the finest level for the base range and each extension
    pub extension_sups: Vec<f64>,
    pub refinement_change: f64,
    pub extension_change: f64,
    pub stable: bool,
    pub constant: f64,
    /// `(σ, t, h)` where the final sup is attained
    pub argmax: Option<[f64; 3]>,
}

pub fn relative_change(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

fn sup_of(bound: &BoundSpec, samples: &[Sample]) -> Result<(f64, Option<[f64; 3]>)> {
    let mut best = 0.0;
    let mut at = None;
    for s in samples {
        let w = bound.weight(s.sigma, s.t, s.h);
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::NonPositive { at: s.t, value: w });
        }
        if !s.magnitude.is_finite() {
            return Err(Error::domain("sup_ratio", format!("non-finite sample at sigma {}", s.sigma)));
        }
        let r = s.magnitude / w;
        if r > best || at.is_none() {
            best = r;
            at = Some([s.sigma, s.t, s.h]);
        }
    }
    Ok((best, at))
}

/// Sup of `|sample|/w` over the sampler's grid.
///
/// `sampler(level, extension)` returns the samples for refinement `level`
/// and range extension `extension`; levels `0..levels` are taken on the base
/// range, extensions `1..=extensions` at the finest level.
pub fn sup_ratio(
    bound: &BoundSpec,
    levels: usize,
    extensions: usize,
    sampler: impl Fn(usize, usize) -> Result<Vec<Sample>>,
) -> Result<BoundReport> {
    if levels < MIN_LEVELS {
        return Err(Error::domain("sup_ratio", format!("need at least {MIN_LEVELS} levels")));
    }
    let mut level_sups = vec![];
    let mut at = None;
    for l in 0..levels {
        let (s, a) = sup_of(bound, &sampler(l, 0)?)?;
        level_sups.push(s);
        at = a;
    }
    let mut extension_sups = vec![*level_sups.last().unwrap()];
    for e in 1..=extensions {
        let (s, a) = sup_of(bound, &sampler(levels - 1, e)?)?;
        extension_sups.push(s);
        at = a;
    }
    Ok(assemble_report(&bound.name, level_sups, extension_sups, at))
}

/// Report from precomputed sup values.
pub fn assemble_report(
    name: &str,
    level_sups: Vec<f64>,
    extension_sups: Vec<f64>,
    argmax: Option<[f64; 3]>,
) -> BoundReport {
    let last_two = |v: &[f64]| match v.len() {
        0 | 1 => 0.0,
        k => relative_change(v[k - 1], v[k - 2]),
    };
    let refinement_change = last_two(&level_sups);
    let extension_change = last_two(&extension_sups);
    let constant = extension_sups
        .last()
        .or(level_sups.last())
        .copied()
        .unwrap_or(0.0);
    BoundReport {
        name: name.to_string(),
        stable: level_sups.len() >= MIN_LEVELS
            && refinement_change < STABILITY_THRESHOLD
            && extension_change < STABILITY_THRESHOLD,
        level_sups,
        extension_sups,
        refinement_change,
        extension_change,
        constant,
        argmax,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeIntegral {
    pub value: f64,
    /// half-width of the final window `[−X, X]`
    pub extent: f64,
    /// contribution of the last doubling relative to the total
    pub tail: f64,
    pub evaluations: usize,
}

/// `∫ |t|^s f(t) dt` for a non-negative `f` by the trapezoid rule with
/// spacing `step` on `[−X, X]`, doubling `X` from `extent` until the added
/// shell is at most `tail_tol` of the total.
pub fn time_integral(
    f: impl Fn(f64) -> f64,
    s: f64,
    step: f64,
    extent: f64,
    tail_tol: f64,
    max_extent: f64,
) -> Result<TimeIntegral> {
    if !(step > 0.0 && extent > 0.0 && tail_tol > 0.0) {
        return Err(Error::domain("time_integral", "step, extent and tail_tol must be > 0"));
    }
    let g = |k: i64| {
        let t = k as f64 * step;
        let m = if s == 0.0 { 1.0 } else { t.abs().powf(s) };
        m * f(t)
    };
    let mut kmax = (extent / step).ceil() as i64;
    let mut total: f64 = (-kmax..=kmax).map(g).sum();
    let mut evaluations = (2 * kmax + 1) as usize;
    loop {
        let next = 2 * kmax;
        let shell: f64 = (kmax + 1..=next).map(|k| g(k) + g(-k)).sum();
        evaluations += 2 * (next - kmax) as usize;
        total += shell;
        kmax = next;
        let tail = if total > 0.0 { shell / total } else { 0.0 };
        if tail <= tail_tol {
            return Ok(TimeIntegral {
                value: total * step,
                extent: kmax as f64 * step,
                tail,
                evaluations,
            });
        }
        if kmax as f64 * step > max_extent {
            return Err(Error::TailNotConverged {
                extent: kmax as f64 * step,
                tail,
            });
        }
    }
}

/// `∫ |t|^s |Σ parts(t)| dt` from FFT samples of the kernel on a uniform
/// grid of spacing `step` (see [`uniform_integral_with`]).
pub fn uniform_time_integral(
    parts: &[KernelIntegrand],
    s: f64,
    step: f64,
    extent: f64,
    tail_tol: f64,
    max_extent: f64,
) -> Result<TimeIntegral> {
    uniform_integral_with(s, step, extent, tail_tol, max_extent, |count| {
        let mut sum = vec![Complex64::new(0.0, 0.0); count];
        for p in parts {
            for (a, b) in sum.iter_mut().zip(p.uniform_samples(step, count)?) {
                *a += b;
            }
        }
        Ok(sum.iter().map(|z| z.norm()).collect())
    })
}

/// `∫ |t|^s f(t) dt` for `f ≥ 0` given by `sampler(count)`, which returns
/// `f((k − count/2)·step)` for `k < count`. The window `[−X, X)` starts at
/// `extent` and doubles until the mass outside `[−X/2, X/2]` is at most
/// `tail_tol` of the total; the reported tail is that fraction.
pub fn uniform_integral_with(
    s: f64,
    step: f64,
    extent: f64,
    tail_tol: f64,
    max_extent: f64,
    mut sampler: impl FnMut(usize) -> Result<Vec<f64>>,
) -> Result<TimeIntegral> {
    if !(step > 0.0 && extent > 0.0 && tail_tol > 0.0) {
        return Err(Error::domain("uniform_time_integral", "step, extent and tail_tol must be > 0"));
    }
    let mut count = ((2.0 * extent / step).ceil() as usize).next_power_of_two().max(64);
    let mut evaluations = 0;
    loop {
        let vals = sampler(count)?;
        evaluations += count;
        let half = count as i64 / 2;
        let (mut total, mut outer) = (0.0, 0.0);
        for (k, v) in vals.iter().enumerate() {
            let j = k as i64 - half;
            let t = j as f64 * step;
            let g = if s == 0.0 { *v } else { t.abs().powf(s) * v };
            total += g;
            if 2 * j.abs() > half {
                outer += g;
            }
        }
        let tail = if total > 0.0 { outer / total } else { 0.0 };
        let x = half as f64 * step;
        if tail <= tail_tol {
            return Ok(TimeIntegral {
                value: total * step,
                extent: x,
                tail,
                evaluations,
            });
        }
        if x > max_extent {
            return Err(Error::TailNotConverged { extent: x, tail });
        }
        count *= 2;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub log_correction: bool,
}

/// Least squares of `log(q / log(x+2)^[lc])` against `log x`.
pub fn fit_decay(xs: &[f64], qs: &[f64], log_correction: bool) -> Result<DecayFit> {
    if xs.len() != qs.len() || xs.len() < 2 {
        return Err(Error::domain("fit_decay", "need at least two (x, q) pairs"));
    }
    let mut lx = Vec::with_capacity(xs.len());
    let mut ly = Vec::with_capacity(xs.len());
    for (&x, &q) in xs.iter().zip(qs) {
        if !(q > 0.0) || !(x > 0.0) {
            return Err(Error::NonPositive { at: x, value: q });
        }
        let y = if log_correction { q / (x + 2.0).ln() } else { q };
        lx.push(x.ln());
        ly.push(y.ln());
    }
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit_decay", "abscissae must not all coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(0.0, f64::max);
    Ok(DecayFit {
        slope,
        intercept,
        rms,
        window: (lo, hi),
        points: xs.len(),
        log_correction,
    })
}

/// `sup_σ |K(σ, t)|` for each `t`, with kernel parts built once per `σ`.
#[derive(Clone, Debug, Serialize)]
pub struct SigmaSup {
    pub ts: Vec<f64>,
    pub sup: Vec<f64>,
    pub argsup: Vec<f64>,
    /// sup restricted to the wave-front region `σ ≥ t/2`
    pub front_sup: Vec<f64>,
    pub flagged: usize,
}

pub fn sup_over_sigma(
    sigmas: &[f64],
    ts: &[f64],
    parts: impl Fn(f64) -> Result<Vec<KernelPlan>> + Sync,
) -> Result<SigmaSup> {
    let rows: Vec<(Vec<f64>, usize)> = sigmas
        .par_iter()
        .map(|&sigma| {
            let p = parts(sigma)?;
            let mut flagged = 0;
            let vals = ts
                .iter()
                .map(|&t| {
                    let (v, f) = eval_parts(&p, t);
                    flagged += f as usize;
                    v.norm()
                })
                .collect();
            Ok((vals, flagged))
        })
        .collect::<Result<_>>()?;
    let mut sup = vec![0.0; ts.len()];
    let mut argsup = vec![0.0; ts.len()];
    let mut front_sup = vec![0.0; ts.len()];
    let mut flagged = 0;
    for ((vals, f), &sigma) in rows.iter().zip(sigmas) {
        flagged += f;
        for (k, v) in vals.iter().enumerate() {
            if *v > sup[k] {
                sup[k] = *v;
                argsup[k] = sigma;
            }
            if 2.0 * sigma >= ts[k] && *v > front_sup[k] {
                front_sup[k] = *v;
            }
        }
    }
    Ok(SigmaSup {
        ts: ts.to_vec(),
        sup,
        argsup,
        front_sup,
        flagged,
    })
}

/// `count` points from `lo` to `hi`, equally spaced in `log`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// `lo, lo+step, …` up to and including `hi`.
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let m = ((hi - lo) / step).round() as usize;
    (0..=m).map(|i| lo + step * i as f64).collect()
}

/// Sup over `(σ, t)` of `|∫ e^{itλ} λ^{k−1} η_a(λ²) g(σλ) dλ| · |t|^k` with
/// the default `g = φ G`. Levels refine the `t` grid; extensions add one
/// decade of `σ` each, starting from `[0.1, 10]`.
pub fn oscillatory_bound_check(
    order: SpectralOrder,
    cutoffs: &CutoffFamily,
    k: f64,
    cfg: &QuadConfig,
) -> Result<BoundReport> {
    let fam = *cutoffs;
    let g = move |z: f64| low_freq_g(order, &fam, z);
    oscillatory_bound_check_with(order, cutoffs, k, cfg, g)
}

pub fn oscillatory_bound_check_with(
    order: SpectralOrder,
    cutoffs: &CutoffFamily,
    k: f64,
    cfg: &QuadConfig,
    g: impl Fn(f64) -> f64 + Sync + Send + Copy + 'static,
) -> Result<BoundReport> {
    let bound = BoundSpec::new(format!("oscillatory_bound_k{k}"), BoundShape::PowerT { k }, order);
    sup_ratio(&bound, MIN_LEVELS, 2, |level, ext| {
        let sigmas = log_grid(0.1, 10f64.powi(1 + ext as i32), 4 * (2 + ext) + 1);
        let ts = log_grid(10.0, 1000.0, (4 << level) * 2 + 1);
        let rows: Vec<Vec<Sample>> = sigmas
            .par_iter()
            .map(|&sigma| {
                let plan = oscillatory_plan(cutoffs, k, sigma, cfg, g)?;
                Ok(ts
                    .iter()
                    .map(|&t| Sample {
                        sigma,
                        t,
                        h: 1.0,
                        magnitude: plan.value(t).norm(),
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(rows.into_iter().flatten().collect())
    })
}

/// Max modulus over a slice of complex values.
pub fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o4() -> SpectralOrder {
        SpectralOrder::new(4).unwrap()
    }

    #[test]
    fn exact_power_law_fit() {
        let xs = log_grid(10.0, 200.0, 12);
        let qs: Vec<f64> = xs.iter().map(|x| 3.0 * x.powi(-2)).collect();
        let fit = fit_decay(&xs, &qs, false).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-6);
        assert!(fit.rms < 1e-12);
        let qs: Vec<f64> = xs.iter().map(|x| x.powf(-1.5) * (x + 2.0).ln()).collect();
        let fit = fit_decay(&xs, &qs, true).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-6);
        assert!(fit_decay(&xs, &vec![0.0; xs.len()], false).is_err());
    }

    #[test]
    fn zero_sampler() {
        let b = BoundSpec::new("zero", BoundShape::Decay, o4());
        let r = sup_ratio(&b, 3, 2, |_, _| {
            Ok(vec![Sample {
                sigma: 1.0,
                t: 2.0,
                h: 1.0,
                magnitude: 0.0,
            }])
        })
        .unwrap();
        assert_eq!(r.constant, 0.0);
        assert!(r.stable);
        assert!(sup_ratio(&b, 2, 0, |_, _| Ok(vec![])).is_err());
    }

    #[test]
    fn growing_sampler_is_unstable() {
        let b = BoundSpec::new("grow", BoundShape::PowerT { k: 1.0 }, o4());
        let r = sup_ratio(&b, 3, 2, |l, e| {
            let t = 10.0 * 2f64.powi((l + e) as i32);
            Ok(vec![Sample {
                sigma: 1.0,
                t,
                h: 1.0,
                magnitude: 1.0,
            }])
        })
        .unwrap();
        assert!(!r.stable);
    }

    #[test]
    fn gaussian_time_integral() {
        let r = time_integral(|t| (-t * t).exp(), 0.0, 0.05, 1.0, 1e-12, 100.0).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let r = time_integral(|t| (-t * t).exp(), 2.0, 0.05, 1.0, 1e-12, 100.0).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
        assert!(time_integral(|t| 1.0 / (1.0 + t.abs()), 0.0, 0.5, 1.0, 1e-6, 1e3).is_err());
    }

    #[test]
    fn weights_positive() {
        for shape in [
            BoundShape::KernelDecay { s: 1.5 },
            BoundShape::LocalizedDecay { s: 0.0 },
            BoundShape::TimeMoment { s: 1.5 },
            BoundShape::ResolventTimeL1,
            BoundShape::LogDecay,
            BoundShape::OffDiagonal,
        ] {
            let b = BoundSpec::new("w", shape, o4());
            assert!(b.weight(0.3, 7.0, 4.0) > 0.0);
        }
    }

    #[test]
    fn oscillatory_bound_zero_g() {
        let r = oscillatory_bound_check_with(o4(), &CutoffFamily::default(), 1.0, &QuadConfig::default(), |_| 0.0)
            .unwrap();
        assert_eq!(r.constant, 0.0);
    }
}
