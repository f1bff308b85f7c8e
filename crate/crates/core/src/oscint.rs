//! Oscillatory integrals `∫ e^{itλ} g(λ) dλ` over a finite support.
//!
//! [`FilonPlan`] is the workhorse: the amplitude is resolved once, panel by
//! panel, into Chebyshev coefficients at degrees `d` and `2d` on nested
//! Clenshaw–Curtis points; any frequency `t` is then integrated exactly
//! against the interpolant using the oscillatory Chebyshev moments. Panels
//! are chosen from the amplitude alone, so the accuracy does not depend on
//! `t`. Vector-valued amplitudes share the panels.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{adaptive_gk, gauss_legendre};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    /// Tolerance relative to `∫|g|`.
    pub target_tol: f64,
    pub panel_degree: usize,
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            target_tol: 1e-12,
            panel_degree: 16,
            max_panels: 4096,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_tol > 0.0) {
            return Err(Error::domain("QuadConfig", "target_tol must be > 0"));
        }
        if self.panel_degree < 8 {
            return Err(Error::domain("QuadConfig", "panel_degree must be >= 8"));
        }
        if self.max_panels == 0 {
            return Err(Error::domain("QuadConfig", "max_panels must be >= 1"));
        }
        Ok(())
    }
}

/// A scalar amplitude on `[lo, hi]`.
pub struct Amplitude<F> {
    pub g: F,
    pub lo: f64,
    pub hi: f64,
    pub smoothness_hint: u32,
}

impl<F: Fn(f64) -> Complex64> Amplitude<F> {
    pub fn new(g: F, lo: f64, hi: f64) -> Self {
        Amplitude {
            g,
            lo,
            hi,
            smoothness_hint: 1,
        }
    }
}

fn check_support(lo: f64, hi: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi {
        Ok(())
    } else {
        Err(Error::InvalidSupport { lo, hi })
    }
}

/// Moments `I_k(ω) = ∫_{−1}^{1} T_k(x) e^{iωx} dx`, `k = 0..=n`.
struct MomentTable {
    n: usize,
    nodes: Vec<f64>,
    /// `weights[k*m + j] = w_j T_k(x_j)`
    weighted_cheb: Vec<f64>,
}

impl MomentTable {
    fn new(n: usize) -> Self {
        let m = n + 48;
        let (x, w) = gauss_legendre(m);
        let mut weighted_cheb = vec![0.0; (n + 1) * m];
        for j in 0..m {
            let mut t0 = 1.0;
            let mut t1 = x[j];
            weighted_cheb[j] = w[j];
            if n >= 1 {
                weighted_cheb[m + j] = w[j] * t1;
            }
            for k in 2..=n {
                let t2 = 2.0 * x[j] * t1 - t0;
                weighted_cheb[k * m + j] = w[j] * t2;
                t0 = t1;
                t1 = t2;
            }
        }
        MomentTable {
            n,
            nodes: x,
            weighted_cheb,
        }
    }

    fn compute(&self, omega: f64, out: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let n = self.n;
        if omega.abs() >= n as f64 {
            let iw = Complex64::new(0.0, omega);
            let ep = Complex64::cis(omega);
            let em = Complex64::cis(-omega);
            let i0 = Complex64::new(2.0 * omega.sin() / omega, 0.0);
            out[0] = i0;
            if n == 0 {
                return;
            }
            let mut j_km2 = i0; // J_{k-2}
            let b1 = (ep + em) / iw;
            let i1 = b1 - i0 / iw;
            out[1] = i1;
            let mut j_km1 = 2.0 * i1; // J_{k-1}
            for k in 2..=n {
                let bk = if k % 2 == 0 { (ep - em) / iw } else { (ep + em) / iw };
                let ik = bk - (k as f64) * j_km1 / iw;
                out[k] = ik;
                let jk = j_km2 + 2.0 * ik;
                j_km2 = j_km1;
                j_km1 = jk;
            }
        } else {
            let m = self.nodes.len();
            scratch.clear();
            scratch.extend(self.nodes.iter().map(|&x| Complex64::cis(omega * x)));
            for (k, o) in out.iter_mut().enumerate().take(n + 1) {
                let row = &self.weighted_cheb[k * m..(k + 1) * m];
                let mut re = 0.0;
                let mut im = 0.0;
                for (w, e) in row.iter().zip(scratch.iter()) {
                    re += w * e.re;
                    im += w * e.im;
                }
                *o = Complex64::new(re, im);
            }
        }
    }
}

fn moment_table(n: usize) -> Arc<MomentTable> {
    use std::collections::HashMap;
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<MomentTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(MomentTable::new(n)))
        .clone()
}

#[derive(Clone)]
struct Panel {
    a: f64,
    b: f64,
    /// degree-2d coefficients, component-major
    hi: Vec<Complex64>,
    /// degree-d coefficients, component-major
    lo: Vec<Complex64>,
    bound: f64,
    mass: f64,
}

impl Panel {
    fn mid(&self) -> f64 {
        0.5 * (self.a + self.b)
    }
    fn half(&self) -> f64 {
        0.5 * (self.b - self.a)
    }
}

struct ByBound(Panel);
impl PartialEq for ByBound {
    fn eq(&self, o: &Self) -> bool {
        self.0.bound == o.0.bound
    }
}
impl Eq for ByBound {}
impl PartialOrd for ByBound {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for ByBound {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.bound.total_cmp(&o.0.bound)
    }
}

/// Resolved amplitude, reusable for any frequency.
#[derive(Clone)]
pub struct FilonPlan {
    lo: f64,
    hi: f64,
    degree: usize,
    comps: usize,
    panels: Vec<Panel>,
    mass: f64,
    bound: f64,
    converged: bool,
    target: f64,
    moments: Arc<MomentTable>,
}

struct PanelBuilder {
    degree: usize,
    comps: usize,
    /// cos(π j k / N)
    cos_table: Vec<f64>,
    nodes: Vec<f64>,
}

impl PanelBuilder {
    fn new(degree: usize, comps: usize) -> Self {
        let n = 2 * degree;
        let mut cos_table = vec![0.0; (n + 1) * (n + 1)];
        for j in 0..=n {
            for k in 0..=n {
                cos_table[j * (n + 1) + k] = (PI * ((j * k) % (2 * n)) as f64 / n as f64).cos();
            }
        }
        let nodes = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
        PanelBuilder {
            degree,
            comps,
            cos_table,
            nodes,
        }
    }

    fn build(&self, a: f64, b: f64, f: &mut dyn FnMut(f64, &mut [Complex64])) -> Panel {
        let n = 2 * self.degree;
        let d = self.degree;
        let c = self.comps;
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut samples = vec![Complex64::new(0.0, 0.0); (n + 1) * c];
        for j in 0..=n {
            let x = mid + half * self.nodes[j];
            f(x, &mut samples[j * c..(j + 1) * c]);
        }
        let mut hi = vec![Complex64::new(0.0, 0.0); c * (n + 1)];
        let mut lo = vec![Complex64::new(0.0, 0.0); c * (d + 1)];
        let mut mass = 0.0;
        for j in 0..=n {
            let theta = PI * j as f64 / n as f64;
            let w = PI / n as f64 * theta.sin();
            for comp in 0..c {
                mass += w * samples[j * c + comp].norm();
            }
        }
        mass *= half;
        for comp in 0..c {
            // degree 2d on all nodes
            for k in 0..=n {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..=n {
                    let wj = if j == 0 || j == n { 0.5 } else { 1.0 };
                    s += samples[j * c + comp] * (wj * self.cos_table[j * (n + 1) + k]);
                }
                let mut ck = s * (2.0 / n as f64);
                if k == 0 || k == n {
                    ck *= 0.5;
                }
                hi[comp * (n + 1) + k] = ck;
            }
            // degree d on the even nodes
            for k in 0..=d {
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..=d {
                    let wi = if i == 0 || i == d { 0.5 } else { 1.0 };
                    // cos(π i k / d) = cos(π (2i) k / n)
                    s += samples[2 * i * c + comp] * (wi * self.cos_table[(2 * i) * (n + 1) + k]);
                }
                let mut ck = s * (2.0 / d as f64);
                if k == 0 || k == d {
                    ck *= 0.5;
                }
                lo[comp * (d + 1) + k] = ck;
            }
        }
        let mut diff = 0.0;
        for comp in 0..c {
            for k in 0..=n {
                let l = if k <= d {
                    lo[comp * (d + 1) + k]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                diff += (hi[comp * (n + 1) + k] - l).norm();
            }
        }
        Panel {
            a,
            b,
            hi,
            lo,
            bound: 2.0 * half * diff,
            mass,
        }
    }
}

impl FilonPlan {
    /// Scalar plan.
    pub fn scalar(
        lo: f64,
        hi: f64,
        cfg: &QuadConfig,
        g: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        Self::vector(lo, hi, 1, cfg, &[lo, hi], move |x, out| out[0] = g(x))
    }

    /// Vector plan with `comps` components sharing panels; `breaks` gives the
    /// initial partition (must start at `lo` and end at `hi`).
    pub fn vector(
        lo: f64,
        hi: f64,
        comps: usize,
        cfg: &QuadConfig,
        breaks: &[f64],
        mut f: impl FnMut(f64, &mut [Complex64]),
    ) -> Result<Self> {
        check_support(lo, hi)?;
        cfg.validate()?;
        let builder = PanelBuilder::new(cfg.panel_degree, comps);
        let mut heap = BinaryHeap::new();
        let mut initial: Vec<f64> = breaks.to_vec();
        if initial.len() < 2 {
            initial = vec![lo, hi];
        }
        for w in initial.windows(2) {
            if w[1] > w[0] {
                heap.push(ByBound(builder.build(w[0], w[1], &mut f)));
            }
        }
        let width = hi - lo;
        let mut converged = false;
        let mut mass;
        let mut bound;
        loop {
            mass = heap.iter().map(|p| p.0.mass).sum::<f64>();
            bound = heap.iter().map(|p| p.0.bound).sum::<f64>();
            if bound <= cfg.target_tol * mass || mass == 0.0 {
                converged = true;
                break;
            }
            if heap.len() >= cfg.max_panels {
                break;
            }
            let worst = heap.pop().expect("non-empty");
            let p = worst.0;
            if p.b - p.a <= 1e-14 * width {
                heap.push(ByBound(p));
                break;
            }
            let m = p.mid();
            heap.push(ByBound(builder.build(p.a, m, &mut f)));
            heap.push(ByBound(builder.build(m, p.b, &mut f)));
        }
        let mut panels: Vec<Panel> = heap.into_iter().map(|p| p.0).collect();
        panels.sort_by(|x, y| x.a.total_cmp(&y.a));
        Ok(FilonPlan {
            lo,
            hi,
            degree: cfg.panel_degree,
            comps,
            panels,
            mass,
            bound,
            converged,
            target: cfg.target_tol * mass,
            moments: moment_table(2 * cfg.panel_degree),
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }
    pub fn components(&self) -> usize {
        self.comps
    }
    /// `∫|g|` estimate summed over components.
    pub fn mass(&self) -> f64 {
        self.mass
    }
    /// Frequency-uniform bound on the degree-d interpolation error.
    pub fn uniform_bound(&self) -> f64 {
        self.bound
    }
    pub fn converged(&self) -> bool {
        self.converged
    }
    /// Absolute acceptance threshold.
    pub fn target(&self) -> f64 {
        self.target
    }

    /// Integrate every component at frequency `t`; returns the summed
    /// degree-doubling error estimate `Σ_c |v_{2d} − v_d|`.
    pub fn eval_into(&self, t: f64, out: &mut [Complex64]) -> f64 {
        let n = 2 * self.degree;
        let d = self.degree;
        let c = self.comps;
        let mut mom = vec![Complex64::new(0.0, 0.0); n + 1];
        let mut scratch = Vec::new();
        let mut lo_acc = vec![Complex64::new(0.0, 0.0); c];
        out[..c].iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        for p in &self.panels {
            let half = p.half();
            self.moments.compute(t * half, &mut mom, &mut scratch);
            let phase = Complex64::cis(t * p.mid()) * half;
            for comp in 0..c {
                let coef = &p.hi[comp * (n + 1)..(comp + 1) * (n + 1)];
                let mut s = Complex64::new(0.0, 0.0);
                for (a, m) in coef.iter().zip(&mom) {
                    s += a * m;
                }
                let coef = &p.lo[comp * (d + 1)..(comp + 1) * (d + 1)];
                let mut sl = Complex64::new(0.0, 0.0);
                for (a, m) in coef.iter().zip(&mom) {
                    sl += a * m;
                }
                out[comp] += phase * s;
                lo_acc[comp] += phase * sl;
            }
        }
        out[..c]
            .iter()
            .zip(&lo_acc)
            .map(|(a, b)| (a - b).norm())
            .sum()
    }

    /// Scalar evaluation: (value, error estimate).
    pub fn eval(&self, t: f64) -> (Complex64, f64) {
        let mut out = [Complex64::new(0.0, 0.0)];
        let e = self.eval_into(t, &mut out);
        (out[0], e)
    }

    /// Scalar evaluation that fails when the estimate exceeds the target.
    pub fn eval_checked(&self, t: f64) -> Result<(Complex64, f64)> {
        let (v, e) = self.eval(t);
        if e <= self.target.max(1e-300) || self.mass == 0.0 {
            Ok((v, e))
        } else {
            Err(Error::ToleranceNotMet {
                value: v,
                estimate: e,
                target: self.target,
            })
        }
    }
}

/// One-shot Filon–Clenshaw–Curtis integration.
pub fn filon_cc<F: Fn(f64) -> Complex64>(
    amp: &Amplitude<F>,
    t: f64,
    cfg: &QuadConfig,
) -> Result<(Complex64, f64)> {
    let plan = FilonPlan::scalar(amp.lo, amp.hi, cfg, &amp.g)?;
    plan.eval_checked(t)
}

/// Independent oracle: adaptive Gauss–Kronrod on `e^{itλ}g(λ)` with initial
/// panels no wider than 3/4 of an oscillation period.
pub fn adaptive_reference<F: Fn(f64) -> Complex64>(
    amp: &Amplitude<F>,
    t: f64,
    tol: f64,
) -> Result<Complex64> {
    check_support(amp.lo, amp.hi)?;
    let width = amp.hi - amp.lo;
    let cost = t.abs() * width;
    if cost > 1e6 {
        return Err(Error::CostGuard(cost));
    }
    let periods = cost / (2.0 * PI);
    let n0 = ((periods / 0.75).ceil() as usize).max(1);
    let breaks: Vec<f64> = (0..=n0)
        .map(|i| amp.lo + width * i as f64 / n0 as f64)
        .collect();
    let r = adaptive_gk(
        |x| Complex64::cis(t * x) * (amp.g)(x),
        &breaks,
        tol,
        0.0,
        n0 * 16 + 20_000,
    );
    if r.converged {
        Ok(r.value)
    } else {
        Err(Error::ToleranceNotMet {
            value: r.value,
            estimate: r.error,
            target: tol,
        })
    }
}

/// `∫ e^{itλ} g(λ) dλ` at `t_k = (k − N/2)dt`, `k < N`, for every component,
/// from trapezoid samples of `g` and one inverse FFT per component.
///
/// By Poisson summation the result is exact up to the aliases
/// `Σ_{m≠0} I(t_k + mN dt)` provided `g` vanishes to all orders at both ends
/// of its support; amplitudes with endpoint singularities must use
/// [`FilonPlan`] instead.
pub fn uniform_samples(
    lo: f64,
    hi: f64,
    dt: f64,
    count: usize,
    comps: usize,
    mut f: impl FnMut(f64, &mut [Complex64]),
) -> Result<Vec<Vec<Complex64>>> {
    check_support(lo, hi)?;
    if !(dt > 0.0) || count < 2 {
        return Err(Error::domain("uniform_samples", "need dt > 0 and count >= 2"));
    }
    let dl = 2.0 * PI / (count as f64 * dt);
    let nl = ((hi - lo) / dl).floor() as usize + 1;
    if nl >= count {
        return Err(Error::domain(
            "uniform_samples",
            format!("support width {} needs more than {count} frequencies at dt = {dt}", hi - lo),
        ));
    }
    let mut rows = vec![vec![Complex64::new(0.0, 0.0); count]; comps];
    let mut buf = vec![Complex64::new(0.0, 0.0); comps];
    for j in 0..nl {
        f(lo + j as f64 * dl, &mut buf);
        // t_k λ_j = 2πkj/N − πj + t_k lo
        let sign = if j % 2 == 0 { dl } else { -dl };
        for (r, b) in rows.iter_mut().zip(&buf) {
            r[j] = b * sign;
        }
    }
    let fft = rustfft::FftPlanner::<f64>::new().plan_fft_inverse(count);
    for r in rows.iter_mut() {
        fft.process(r);
        for (k, z) in r.iter_mut().enumerate() {
            let t = (k as f64 - (count / 2) as f64) * dt;
            *z *= Complex64::cis(t * lo);
        }
    }
    Ok(rows)
}
