//! Frequency-localized propagator kernels, their Hankel splits, the free
//! resolvent kernel, the low-frequency kernels `A_h^±`, and the
//! low-frequency (`η_a`) kernels with their near/far decomposition.
//!
//! Every kernel is an oscillatory integral in λ whose amplitude does not
//! depend on `t`. Each is first described by a [`KernelIntegrand`]; a
//! [`KernelPlan`] resolves the amplitude once for evaluation at arbitrary
//! times, and [`KernelIntegrand::uniform_samples`] produces a whole uniform
//! time grid at once.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cutoffs::CutoffFamily;
use crate::error::{Error, Result};
use crate::oscint::{uniform_samples, FilonPlan, QuadConfig};
use crate::specfun::{
    hankel_increment, hankel_zero_limit, reduced_jnu, scaled_hankel_unchecked,
    symbol_b_unchecked, Sign, SpectralOrder,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveKernelSpec {
    pub order: SpectralOrder,
    pub cutoffs: CutoffFamily,
    pub h: f64,
    pub quad: QuadConfig,
}

impl WaveKernelSpec {
    pub fn new(order: SpectralOrder, h: f64) -> Self {
        WaveKernelSpec {
            order,
            cutoffs: CutoffFamily::default(),
            h,
            quad: QuadConfig::default(),
        }
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn a(&self) -> f64 {
        self.cutoffs.a
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelSample {
    pub sigma: f64,
    pub t: f64,
    pub h: f64,
    pub value: Complex64,
    pub err: f64,
    /// set when `err` exceeds the plan's acceptance threshold
    pub flagged: bool,
}

type AmplitudeFn = Box<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// `factor · ∫_lo^hi e^{i(t+shift)λ} g(λ) dλ` at fixed `σ`.
pub struct KernelIntegrand {
    pub sigma: f64,
    pub h: f64,
    pub lo: f64,
    pub hi: f64,
    pub factor: Complex64,
    pub shift: f64,
    g: AmplitudeFn,
}

impl KernelIntegrand {
    #[allow(clippy::too_many_arguments)]
    fn new(
        sigma: f64,
        h: f64,
        lo: f64,
        hi: f64,
        factor: Complex64,
        shift: f64,
        g: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        KernelIntegrand {
            sigma,
            h,
            lo,
            hi,
            factor,
            shift,
            g: Box::new(g),
        }
    }

    fn empty(sigma: f64, h: f64) -> Self {
        Self::new(sigma, h, 0.0, 0.0, Complex64::new(0.0, 0.0), 0.0, |_| Complex64::new(0.0, 0.0))
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn amplitude(&self, lambda: f64) -> Complex64 {
        (self.g)(lambda)
    }

    pub fn plan(&self, cfg: &QuadConfig) -> Result<KernelPlan> {
        if self.is_empty() {
            return Ok(KernelPlan::zero(self.sigma, self.h));
        }
        let plan = FilonPlan::scalar(self.lo, self.hi, cfg, &self.g)?;
        if !plan.converged() {
            return Err(Error::ToleranceNotMet {
                value: Complex64::new(0.0, 0.0),
                estimate: plan.uniform_bound(),
                target: plan.target(),
            });
        }
        Ok(KernelPlan {
            plan: Some(plan),
            factor: self.factor,
            shift: self.shift,
            sigma: self.sigma,
            h: self.h,
        })
    }

    /// Values at `t_k = (k − count/2)dt`; the amplitude must vanish to all
    /// orders at both ends of the support (see [`uniform_samples`]).
    pub fn uniform_samples(&self, dt: f64, count: usize) -> Result<Vec<Complex64>> {
        if self.is_empty() {
            return Ok(vec![Complex64::new(0.0, 0.0); count]);
        }
        let (f, s) = (self.factor, self.shift);
        let mut rows = uniform_samples(self.lo, self.hi, dt, count, 1, |l, o| {
            o[0] = f * Complex64::cis(s * l) * (self.g)(l)
        })?;
        Ok(rows.pop().unwrap())
    }
}

/// A resolved kernel at fixed `σ`: `value(t) = factor · ∫ e^{i(t+shift)λ} g(λ) dλ`.
#[derive(Clone)]
pub struct KernelPlan {
    plan: Option<FilonPlan>,
    factor: Complex64,
    shift: f64,
    sigma: f64,
    h: f64,
}

impl KernelPlan {
    fn zero(sigma: f64, h: f64) -> Self {
        KernelPlan {
            plan: None,
            factor: Complex64::new(0.0, 0.0),
            shift: 0.0,
            sigma,
            h,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eval(&self, t: f64) -> KernelSample {
        let (value, err, flagged) = match &self.plan {
            None => (Complex64::new(0.0, 0.0), 0.0, false),
            Some(p) => {
                let (v, e) = p.eval(t + self.shift);
                let scale = self.factor.norm();
                (self.factor * v, scale * e, e > p.target())
            }
        };
        KernelSample {
            sigma: self.sigma,
            t,
            h: self.h,
            value,
            err,
            flagged,
        }
    }

    pub fn value(&self, t: f64) -> Complex64 {
        self.eval(t).value
    }

    /// Bound on the magnitude over all `t`: `|factor|·∫|g|`.
    pub fn l1_amplitude(&self) -> f64 {
        self.plan.as_ref().map_or(0.0, |p| p.mass()) * self.factor.norm()
    }
}

fn check_sigma(op: &'static str, sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("sigma = {sigma} must be >= 0")))
    }
}

fn check_h(op: &'static str, h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("h = {h} must be > 0")))
    }
}

/// `(2π)^{−(ν+1)}`.
pub fn kernel_constant(order: SpectralOrder) -> f64 {
    (2.0 * PI).powf(-(order.nu() + 1.0))
}

/// `supp ψ(h²λ²) = [1/(2h), √2/h]`.
pub fn psi_h_support(h: f64) -> (f64, f64) {
    (0.5 / h, SQRT_2 / h)
}

/// `supp φ̃_h = [1/(√8 h), 2/h]`.
pub fn phi_tilde_h_support(h: f64) -> (f64, f64) {
    (1.0 / (8f64.sqrt() * h), 2.0 / h)
}

/// `K_h(σ, ·) = (2π)^{−(ν+1)} ∫ e^{itλ} λ^{n−1} G(σλ) ψ(h²λ²) dλ`, `G = J_ν(z)/z^ν`.
pub fn free_kernel_integrand(spec: &WaveKernelSpec, sigma: f64) -> Result<KernelIntegrand> {
    check_sigma("K_h", sigma)?;
    check_h("K_h", spec.h)?;
    let (lo, hi) = psi_h_support(spec.h);
    let order = spec.order;
    let fam = spec.cutoffs;
    let h = spec.h;
    let p = order.dimension() as i32 - 1;
    Ok(KernelIntegrand::new(
        sigma,
        h,
        lo,
        hi,
        kernel_constant(order).into(),
        0.0,
        move |l| (l.powi(p) * reduced_jnu(order, sigma * l) * fam.psi(h * h * l * l)).into(),
    ))
}

pub fn free_kernel_plan(spec: &WaveKernelSpec, sigma: f64) -> Result<KernelPlan> {
    free_kernel_integrand(spec, sigma)?.plan(&spec.quad)
}

pub fn k_h(spec: &WaveKernelSpec, sigma: f64, t: f64) -> Result<KernelSample> {
    Ok(free_kernel_plan(spec, sigma)?.eval(t))
}

/// Hankel-split kernel `K_h^±`: `𝒥_ν(σλ)` replaced by `e^{±iσλ}b_ν^±(σλ)`.
/// Needs `σ ≥ 2h` so that `σλ ≥ 1` on the amplitude support.
pub fn split_kernel_integrand(spec: &WaveKernelSpec, sigma: f64, sign: Sign) -> Result<KernelIntegrand> {
    check_h("K1_split", spec.h)?;
    if !(sigma >= 2.0 * spec.h) {
        return Err(Error::domain(
            "K1_split",
            format!("sigma = {sigma} below split threshold 2h = {}", 2.0 * spec.h),
        ));
    }
    let (lo, hi) = psi_h_support(spec.h);
    let order = spec.order;
    let fam = spec.cutoffs;
    let h = spec.h;
    let factor = kernel_constant(order) * sigma.powf(-2.0 * order.nu());
    Ok(KernelIntegrand::new(
        sigma,
        h,
        lo,
        hi,
        factor.into(),
        sign.value() * sigma,
        move |l| symbol_b_unchecked(order, sigma * l, sign) * (fam.psi(h * h * l * l) * l),
    ))
}

pub fn split_kernel_plan(spec: &WaveKernelSpec, sigma: f64, sign: Sign) -> Result<KernelPlan> {
    split_kernel_integrand(spec, sigma, sign)?.plan(&spec.quad)
}

pub fn k1_split(spec: &WaveKernelSpec, sigma: f64, t: f64, sign: Sign) -> Result<KernelSample> {
    Ok(split_kernel_plan(spec, sigma, sign)?.eval(t))
}

/// Free outgoing/incoming resolvent kernel at distance `r`:
/// `±(i/4)(2π)^{−ν} r^{2−n} ℋ_ν^±(λr)`.
pub fn resolvent_kernel(order: SpectralOrder, lambda: f64, r: f64, sign: Sign) -> Result<Complex64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain("resolvent_kernel", format!("r = {r} must be > 0")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::domain("resolvent_kernel", "lambda must be >= 0"));
    }
    let hk = if lambda == 0.0 {
        hankel_zero_limit(order, sign)
    } else {
        scaled_hankel_unchecked(order, lambda * r, sign)
    };
    Ok(resolvent_prefactor(order, sign) * r.powf(2.0 - order.dim_f64()) * hk)
}

/// `±(i/4)(2π)^{−ν}`.
pub fn resolvent_prefactor(order: SpectralOrder, sign: Sign) -> Complex64 {
    Complex64::new(0.0, sign.value() / 4.0) * (2.0 * PI).powf(-order.nu())
}

/// `A_h^±(σ, ·) = ±(i/4)(2π)^{−ν} σ^{2−n} ∫ e^{itλ} φ̃_h(λ)(ℋ^±(σλ) − ℋ^±(0)) dλ`.
pub fn a_kernel_integrand(spec: &WaveKernelSpec, sigma: f64, sign: Sign) -> Result<KernelIntegrand> {
    check_h("A_h", spec.h)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain("A_h", format!("sigma = {sigma} must be > 0")));
    }
    let (lo, hi) = phi_tilde_h_support(spec.h);
    let order = spec.order;
    let fam = spec.cutoffs;
    let h = spec.h;
    let factor = resolvent_prefactor(order, sign) * sigma.powf(2.0 - order.dim_f64());
    Ok(KernelIntegrand::new(sigma, h, lo, hi, factor, 0.0, move |l| {
        hankel_increment(order, sigma * l, sign) * fam.phi1_tilde(h * l)
    }))
}

pub fn a_kernel_plan(spec: &WaveKernelSpec, sigma: f64, sign: Sign) -> Result<KernelPlan> {
    a_kernel_integrand(spec, sigma, sign)?.plan(&spec.quad)
}

pub fn a_h_pm(spec: &WaveKernelSpec, sigma: f64, t: f64, sign: Sign) -> Result<KernelSample> {
    Ok(a_kernel_plan(spec, sigma, sign)?.eval(t))
}

/// Large-σ decomposition of `A_h^±` into the oscillatory part
/// `±(i/4)(2π)^{−ν}σ^{2−n}∫e^{i(t±σ)λ}φ̃_h 2b^±(σλ)dλ` and the constant part
/// `c^± σ^{2−n} ∫ e^{itλ} φ̃_h dλ` with `c^± = ±(i/4)(2π)^{−ν}(−ℋ^±(0))`.
/// Needs `σ ≥ √8 h`.
pub fn a_split_integrands(
    spec: &WaveKernelSpec,
    sigma: f64,
    sign: Sign,
) -> Result<(KernelIntegrand, KernelIntegrand)> {
    check_h("A_split", spec.h)?;
    let (lo, hi) = phi_tilde_h_support(spec.h);
    if !(sigma * lo >= 1.0) {
        return Err(Error::domain(
            "A_split",
            format!("sigma = {sigma} below split threshold {}", 1.0 / lo),
        ));
    }
    let order = spec.order;
    let fam = spec.cutoffs;
    let h = spec.h;
    let pre = resolvent_prefactor(order, sign) * sigma.powf(2.0 - order.dim_f64());
    let osc = KernelIntegrand::new(sigma, h, lo, hi, pre, sign.value() * sigma, move |l| {
        symbol_b_unchecked(order, sigma * l, sign) * (2.0 * fam.phi1_tilde(h * l))
    });
    let c = -pre * hankel_zero_limit(order, sign);
    let cst = KernelIntegrand::new(sigma, h, lo, hi, c, 0.0, move |l| fam.phi1_tilde(h * l).into());
    Ok((osc, cst))
}

pub fn a_split_plans(spec: &WaveKernelSpec, sigma: f64, sign: Sign) -> Result<(KernelPlan, KernelPlan)> {
    let (osc, cst) = a_split_integrands(spec, sigma, sign)?;
    Ok((osc.plan(&spec.quad)?, cst.plan(&spec.quad)?))
}

/// Pieces of the low-frequency kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowFreqPart {
    /// `K`
    Full,
    /// `K₁`, amplitude cut by `φ(σλ)`
    Near,
    /// `K₂`, amplitude cut by `1 − φ(σλ)`
    Far,
    /// `K₂^±`, the far part with `𝒥_ν` split into `e^{±iz}b^±`
    FarSplit(Sign),
}

/// Kernel variant; `epsilon > 0` raises the λ power by `2ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowFreqVariant {
    pub part: LowFreqPart,
    pub epsilon: f64,
}

impl LowFreqVariant {
    pub fn full() -> Self {
        LowFreqVariant {
            part: LowFreqPart::Full,
            epsilon: 0.0,
        }
    }
    pub fn part(part: LowFreqPart) -> Self {
        LowFreqVariant { part, epsilon: 0.0 }
    }
    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = eps;
        self
    }
}

/// `g(z) = (φ𝒥_ν)(z)/z^{n−2} = φ(z)G(z)`.
pub fn low_freq_g(order: SpectralOrder, cutoffs: &CutoffFamily, z: f64) -> f64 {
    cutoffs.phi(z) * reduced_jnu(order, z)
}

/// `K(σ, ·) = c_n σ^{2−n} ∫ e^{itλ} λ^{1−(n+1)/2+2ε} η_a(λ²) 𝒥_ν(σλ) dλ`,
/// evaluated through the combined amplitude
/// `c_n λ^{(n−3)/2+2ε} η_a(λ²) G(σλ)` which stays bounded at λ = 0.
pub fn low_freq_integrand(
    order: SpectralOrder,
    cutoffs: &CutoffFamily,
    sigma: f64,
    variant: LowFreqVariant,
) -> Result<KernelIntegrand> {
    check_sigma("low_freq_K", sigma)?;
    let eps = variant.epsilon;
    if !(eps >= 0.0 && eps <= 0.1) {
        return Err(Error::domain("low_freq_K", format!("epsilon = {eps} outside [0, 0.1]")));
    }
    let fam = *cutoffs;
    let top = (2.0 * fam.a).sqrt();
    let cn = kernel_constant(order);
    let n = order.dim_f64();
    let p = (n - 3.0) / 2.0 + 2.0 * eps;
    Ok(match variant.part {
        LowFreqPart::Full => KernelIntegrand::new(sigma, 1.0, 0.0, top, cn.into(), 0.0, move |l| {
            (l.powf(p) * fam.eta_a(l * l) * reduced_jnu(order, sigma * l)).into()
        }),
        LowFreqPart::Near => {
            let hi = if sigma > 0.0 { top.min(2.0 / sigma) } else { top };
            KernelIntegrand::new(sigma, 1.0, 0.0, hi, cn.into(), 0.0, move |l| {
                (l.powf(p) * fam.eta_a(l * l) * low_freq_g(order, &fam, sigma * l)).into()
            })
        }
        LowFreqPart::Far => {
            if sigma == 0.0 {
                return Ok(KernelIntegrand::empty(sigma, 1.0));
            }
            KernelIntegrand::new(sigma, 1.0, 1.0 / sigma, top, cn.into(), 0.0, move |l| {
                let z = sigma * l;
                (l.powf(p) * fam.eta_a(l * l) * (1.0 - fam.phi(z)) * reduced_jnu(order, z)).into()
            })
        }
        LowFreqPart::FarSplit(sign) => {
            if sigma == 0.0 {
                return Ok(KernelIntegrand::empty(sigma, 1.0));
            }
            let q = (1.0 - n) / 2.0 + 2.0 * eps;
            let factor = cn * sigma.powf(2.0 - n);
            KernelIntegrand::new(
                sigma,
                1.0,
                1.0 / sigma,
                top,
                factor.into(),
                sign.value() * sigma,
                move |l| {
                    let z = sigma * l;
                    symbol_b_unchecked(order, z, sign)
                        * (l.powf(q) * fam.eta_a(l * l) * (1.0 - fam.phi(z)))
                },
            )
        }
    })
}

pub fn low_freq_plan(
    order: SpectralOrder,
    cutoffs: &CutoffFamily,
    sigma: f64,
    variant: LowFreqVariant,
    cfg: &QuadConfig,
) -> Result<KernelPlan> {
    low_freq_integrand(order, cutoffs, sigma, variant)?.plan(cfg)
}

pub fn low_freq_k(
    order: SpectralOrder,
    cutoffs: &CutoffFamily,
    sigma: f64,
    t: f64,
    variant: LowFreqVariant,
    cfg: &QuadConfig,
) -> Result<KernelSample> {
    Ok(low_freq_plan(order, cutoffs, sigma, variant, cfg)?.eval(t))
}

/// `∫ e^{itλ} λ^{k−1} η_a(λ²) g(σλ) dλ` for a caller-supplied `g`.
pub fn oscillatory_plan(
    cutoffs: &CutoffFamily,
    k: f64,
    sigma: f64,
    cfg: &QuadConfig,
    g: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<KernelPlan> {
    check_sigma("oscillatory_plan", sigma)?;
    if !(k >= 1.0) {
        return Err(Error::domain("oscillatory_plan", format!("k = {k} must be >= 1")));
    }
    let fam = *cutoffs;
    let top = (2.0 * fam.a).sqrt();
    KernelIntegrand::new(sigma, 1.0, 0.0, top, 1.0.into(), 0.0, move |l| {
        (l.powf(k - 1.0) * fam.eta_a(l * l) * g(sigma * l)).into()
    })
    .plan(cfg)
}

/// Integrands whose sum is `K_h(σ, ·)`: the Hankel split for `σ ≥ 2h`, the
/// direct amplitude below.
pub fn free_kernel_integrands(spec: &WaveKernelSpec, sigma: f64) -> Result<Vec<KernelIntegrand>> {
    if sigma >= 2.0 * spec.h {
        Sign::both().iter().map(|&s| split_kernel_integrand(spec, sigma, s)).collect()
    } else {
        Ok(vec![free_kernel_integrand(spec, sigma)?])
    }
}

/// Integrands whose sum is `A_h^±(σ, ·)`.
pub fn a_kernel_integrands(spec: &WaveKernelSpec, sigma: f64, sign: Sign) -> Result<Vec<KernelIntegrand>> {
    if sigma * phi_tilde_h_support(spec.h).0 >= 1.0 {
        let (osc, cst) = a_split_integrands(spec, sigma, sign)?;
        Ok(vec![osc, cst])
    } else {
        Ok(vec![a_kernel_integrand(spec, sigma, sign)?])
    }
}

/// Integrands whose sum is the low-frequency kernel; near part plus the
/// split far part once `σ ≥ 4`.
pub fn low_freq_integrands(
    order: SpectralOrder,
    cutoffs: &CutoffFamily,
    sigma: f64,
    epsilon: f64,
) -> Result<Vec<KernelIntegrand>> {
    let v = |part| LowFreqVariant::part(part).with_epsilon(epsilon);
    if sigma >= 4.0 {
        let mut parts = vec![low_freq_integrand(order, cutoffs, sigma, v(LowFreqPart::Near))?];
        for s in Sign::both() {
            parts.push(low_freq_integrand(order, cutoffs, sigma, v(LowFreqPart::FarSplit(s)))?);
        }
        Ok(parts)
    } else {
        Ok(vec![low_freq_integrand(order, cutoffs, sigma, v(LowFreqPart::Full))?])
    }
}

pub fn plan_all(parts: &[KernelIntegrand], cfg: &QuadConfig) -> Result<Vec<KernelPlan>> {
    parts.iter().map(|p| p.plan(cfg)).collect()
}

pub fn free_kernel_parts(spec: &WaveKernelSpec, sigma: f64) -> Result<Vec<KernelPlan>> {
    plan_all(&free_kernel_integrands(spec, sigma)?, &spec.quad)
}

pub fn a_kernel_parts(spec: &WaveKernelSpec, sigma: f64, sign: Sign) -> Result<Vec<KernelPlan>> {
    plan_all(&a_kernel_integrands(spec, sigma, sign)?, &spec.quad)
}

pub fn low_freq_parts(
    order: SpectralOrder,
    cutoffs: &CutoffFamily,
    sigma: f64,
    epsilon: f64,
    cfg: &QuadConfig,
) -> Result<Vec<KernelPlan>> {
    plan_all(&low_freq_integrands(order, cutoffs, sigma, epsilon)?, cfg)
}

/// Sum of plan values at `t`; the flag is raised if any part is flagged.
pub fn eval_parts(parts: &[KernelPlan], t: f64) -> (Complex64, bool) {
    parts.iter().fold((Complex64::new(0.0, 0.0), false), |(v, f), p| {
        let s = p.eval(t);
        (v + s.value, f || s.flagged)
    })
}
