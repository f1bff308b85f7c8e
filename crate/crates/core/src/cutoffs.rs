//! Smooth cutoff family built from the mollifier `m(x) = e^{−1/x}`.
//!
//! `χ₁(σ) = m(σ−1)/(m(σ−1)+m(2−σ))` on (1,2); every other member is a
//! product or composition of `χ₁`. Values and first two derivatives are
//! carried together in a [`Jet`].

use std::f64::consts::SQRT_2;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oscint::{FilonPlan, QuadConfig};
use crate::quad::adaptive_gk;

/// Value with first and second derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet {
        v: 0.0,
        d1: 0.0,
        d2: 0.0,
    };

    pub fn constant(v: f64) -> Self {
        Jet { v, d1: 0.0, d2: 0.0 }
    }

    pub fn var(x: f64) -> Self {
        Jet { v: x, d1: 1.0, d2: 0.0 }
    }

    pub fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }

    pub fn scale(self, c: f64) -> Jet {
        Jet {
            v: c * self.v,
            d1: c * self.d1,
            d2: c * self.d2,
        }
    }

    /// `1 − self`.
    pub fn one_minus(self) -> Jet {
        Jet {
            v: 1.0 - self.v,
            d1: -self.d1,
            d2: -self.d2,
        }
    }

    /// `f ∘ g`, where `self` holds `f` and its derivatives evaluated at `g.v`.
    pub fn compose(self, g: Jet) -> Jet {
        Jet {
            v: self.v,
            d1: self.d1 * g.d1,
            d2: self.d2 * g.d1 * g.d1 + self.d1 * g.d2,
        }
    }

    pub fn get(self, order: u8) -> f64 {
        match order {
            0 => self.v,
            1 => self.d1,
            _ => self.d2,
        }
    }
}

/// Smooth step on [0,1]: `1/(1+e^u)`, `u = 1/x − 1/(1−x)`.
fn smoothstep(x: f64) -> Jet {
    if x <= 1e-100 {
        return Jet::ZERO;
    }
    if x >= 1.0 - 1e-16 {
        return Jet::constant(1.0);
    }
    let y = 1.0 - x;
    let u = 1.0 / x - 1.0 / y;
    let (p, q) = if u > 0.0 {
        let e = (-u).exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    } else {
        let e = u.exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    };
    let pq = p * q;
    let du = -1.0 / (x * x) - 1.0 / (y * y);
    let ddu = 2.0 / (x * x * x) - 2.0 / (y * y * y);
    Jet {
        v: p,
        d1: -pq * du,
        d2: (q - p) * pq * du * du - pq * ddu,
    }
}

fn linear(x: f64, c: f64) -> Jet {
    Jet { v: c * x, d1: c, d2: 0.0 }
}

fn square(x: f64) -> Jet {
    Jet { v: x * x, d1: 2.0 * x, d2: 2.0 }
}

fn chi1_jet(s: f64) -> Jet {
    smoothstep(s - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffMember {
    Chi1,
    ChiA,
    EtaA,
    Phi,
    Psi,
    Psi1,
    PsiTilde,
    Psi1Tilde,
    Phi1,
    Phi1Tilde,
}

impl CutoffMember {
    pub const ALL: [CutoffMember; 10] = [
        CutoffMember::Chi1,
        CutoffMember::ChiA,
        CutoffMember::EtaA,
        CutoffMember::Phi,
        CutoffMember::Psi,
        CutoffMember::Psi1,
        CutoffMember::PsiTilde,
        CutoffMember::Psi1Tilde,
        CutoffMember::Phi1,
        CutoffMember::Phi1Tilde,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CutoffMember::Chi1 => "chi1",
            CutoffMember::ChiA => "chi_a",
            CutoffMember::EtaA => "eta_a",
            CutoffMember::Phi => "phi",
            CutoffMember::Psi => "psi",
            CutoffMember::Psi1 => "psi1",
            CutoffMember::PsiTilde => "psi_tilde",
            CutoffMember::Psi1Tilde => "psi1_tilde",
            CutoffMember::Phi1 => "phi1",
            CutoffMember::Phi1Tilde => "phi1_tilde",
        }
    }
}

impl FromStr for CutoffMember {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CutoffMember::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMember(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffFamily {
    pub a: f64,
}

impl Default for CutoffFamily {
    fn default() -> Self {
        CutoffFamily { a: 0.125 }
    }
}

impl CutoffFamily {
    pub fn new(a: f64) -> Result<Self> {
        if a > 0.0 && a.is_finite() {
            Ok(CutoffFamily { a })
        } else {
            Err(Error::domain("CutoffFamily::new", format!("a = {a} must be > 0")))
        }
    }

    /// Closed support of a member (on the half line for even members).
    pub fn support(&self, m: CutoffMember) -> (f64, f64) {
        match m {
            CutoffMember::Chi1 => (1.0, f64::INFINITY),
            CutoffMember::ChiA => (self.a, f64::INFINITY),
            CutoffMember::EtaA => (0.0, 2.0 * self.a),
            CutoffMember::Phi => (0.0, 2.0),
            CutoffMember::Psi | CutoffMember::PsiTilde => (0.25, 2.0),
            CutoffMember::Psi1 | CutoffMember::Psi1Tilde => (0.125, 4.0),
            CutoffMember::Phi1 => (0.5, SQRT_2),
            CutoffMember::Phi1Tilde => (1.0 / 8f64.sqrt(), 2.0),
        }
    }

    pub fn jet(&self, m: CutoffMember, s: f64) -> Jet {
        match m {
            CutoffMember::Chi1 => chi1_jet(s),
            CutoffMember::ChiA => chi1_jet(s / self.a).compose(linear(s, 1.0 / self.a)),
            CutoffMember::EtaA => {
                if s < 0.0 {
                    Jet::ZERO
                } else {
                    self.jet(CutoffMember::ChiA, s).one_minus()
                }
            }
            CutoffMember::Phi => {
                let j = chi1_jet(s.abs()).one_minus();
                if s < 0.0 {
                    Jet {
                        v: j.v,
                        d1: -j.d1,
                        d2: j.d2,
                    }
                } else {
                    j
                }
            }
            CutoffMember::Psi => {
                let left = chi1_jet(4.0 * s).compose(linear(s, 4.0));
                left.mul(chi1_jet(s).one_minus())
            }
            CutoffMember::Psi1 => {
                let left = chi1_jet(8.0 * s).compose(linear(s, 8.0));
                let right = chi1_jet(s / 2.0).compose(linear(s, 0.5)).one_minus();
                left.mul(right)
            }
            CutoffMember::PsiTilde => {
                if s <= 0.0 {
                    return Jet::ZERO;
                }
                let r = s.sqrt();
                let pow = Jet {
                    v: r,
                    d1: 0.5 / r,
                    d2: -0.25 / (s * r),
                };
                pow.mul(self.jet(CutoffMember::Psi, s))
            }
            CutoffMember::Psi1Tilde => {
                if s <= 0.0 {
                    return Jet::ZERO;
                }
                let r = s.sqrt();
                let pow = Jet {
                    v: 1.0 / r,
                    d1: -0.5 / (s * r),
                    d2: 0.75 / (s * s * r),
                };
                pow.mul(self.jet(CutoffMember::Psi1, s))
            }
            CutoffMember::Phi1 => {
                Jet::var(s).mul(self.jet(CutoffMember::Psi, s * s).compose(square(s)))
            }
            CutoffMember::Phi1Tilde => self.jet(CutoffMember::Psi1, s * s).compose(square(s)),
        }
    }

    pub fn eval(&self, m: CutoffMember, s: f64, derivative_order: u8) -> Result<f64> {
        if derivative_order > 2 {
            return Err(Error::domain(
                "CutoffFamily::eval",
                format!("derivative order {derivative_order} > 2"),
            ));
        }
        Ok(self.jet(m, s).get(derivative_order))
    }

    pub fn eval_named(&self, name: &str, s: f64, derivative_order: u8) -> Result<f64> {
        self.eval(name.parse()?, s, derivative_order)
    }

    pub fn chi1(&self, s: f64) -> f64 {
        chi1_jet(s).v
    }
    pub fn psi(&self, s: f64) -> f64 {
        self.jet(CutoffMember::Psi, s).v
    }
    pub fn psi1(&self, s: f64) -> f64 {
        self.jet(CutoffMember::Psi1, s).v
    }
    pub fn eta_a(&self, s: f64) -> f64 {
        self.jet(CutoffMember::EtaA, s).v
    }
    pub fn phi(&self, mu: f64) -> f64 {
        self.jet(CutoffMember::Phi, mu).v
    }
    pub fn phi1(&self, l: f64) -> f64 {
        l * self.psi(l * l)
    }
    pub fn phi1_tilde(&self, l: f64) -> f64 {
        self.psi1(l * l)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DyadicReport {
    pub alpha: f64,
    pub gamma: f64,
    pub max_defect: f64,
    pub worst_sigma: f64,
    pub converged: bool,
}

/// Checks `σ^{−γ}η_a(σ) = ∫_{1/a}^∞ ψ(σθ) θ^{γ} dθ/θ` with
/// `ψ(σ) = σ^{1−γ}χ₁′(σ)`, `γ = α(n+1)/4`, after substituting `u = σθ`.
pub fn dyadic_identity_check(
    family: &CutoffFamily,
    n: u32,
    alpha: f64,
    sigmas: &[f64],
) -> Result<DyadicReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain("dyadic_identity_check", "alpha must lie in (0, 1]"));
    }
    let gamma = alpha * (n as f64 + 1.0) / 4.0;
    let mut max_defect = 0.0;
    let mut worst = f64::NAN;
    let mut converged = true;
    for &s in sigmas {
        if !(s > 0.0) {
            return Err(Error::domain("dyadic_identity_check", "sigma must be > 0"));
        }
        let lhs = s.powf(-gamma) * family.eta_a(s);
        let lower = (s / family.a).max(1.0);
        let rhs = if lower >= 2.0 {
            0.0
        } else {
            let r = adaptive_gk(
                |u: f64| u.powf(1.0 - gamma) * chi1_jet(u).d1 * u.powf(gamma - 1.0),
                &[lower, 2.0],
                1e-14,
                1e-14,
                10_000,
            );
            converged &= r.converged;
            s.powf(-gamma) * r.value
        };
        let d = (lhs - rhs).abs();
        if d > max_defect || worst.is_nan() {
            max_defect = d.max(max_defect);
            worst = s;
        }
    }
    if !converged {
        return Err(Error::ToleranceNotMet {
            value: max_defect.into(),
            estimate: max_defect,
            target: 1e-8,
        });
    }
    Ok(DyadicReport {
        alpha,
        gamma,
        max_defect,
        worst_sigma: worst,
        converged,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FourierL1 {
    pub h: f64,
    pub value: f64,
    pub extent: f64,
    pub tail: f64,
}

/// `∫|φ̂_h(t)|dt` with `φ_h(λ) = φ₁(hλ)`, extending the window dyadically
/// until the last shell contributes less than `1e−10` of the total.
pub fn fourier_transform_l1(family: &CutoffFamily, h: f64, cfg: &QuadConfig) -> Result<FourierL1> {
    if !(h > 0.0) {
        return Err(Error::domain("fourier_transform_l1", "h must be > 0"));
    }
    let fam = *family;
    let plan = FilonPlan::scalar(0.5 / h, SQRT_2 / h, cfg, move |l| {
        fam.phi1(h * l).into()
    })?;
    let mut f = |t: f64| plan.eval(t).0.norm();
    // integrand oscillates on the scale h; seed breakpoints every h
    let shell = |f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64| -> f64 {
        let n = ((b - a) / h).ceil().max(1.0) as usize;
        let breaks: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        adaptive_gk(f, &breaks, abs_tol, 1e-10, 100_000).value
    };
    let mut extent = 64.0 * h;
    let mut total = 2.0 * shell(&mut f, 0.0, extent, 0.0);
    loop {
        let add = 2.0 * shell(&mut f, extent, 2.0 * extent, 1e-12 * total);
        total += add;
        extent *= 2.0;
        if add <= 1e-10 * total {
            return Ok(FourierL1 {
                h,
                value: total,
                extent,
                tail: add,
            });
        }
        if extent > 1e5 * h {
            return Err(Error::TailNotConverged {
                extent,
                tail: add / total,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fam() -> CutoffFamily {
        CutoffFamily::default()
    }

    #[test]
    fn chi1_support_values() {
        let f = fam();
        assert_eq!(f.eval_named("chi1", 0.5, 0).unwrap(), 0.0);
        assert_eq!(f.eval_named("chi1", 3.0, 0).unwrap(), 1.0);
        assert!(f.eval_named("nope", 1.0, 0).is_err());
        assert!(f.eval(CutoffMember::Chi1, 1.0, 3).is_err());
        let g = CutoffFamily::new(1.0).unwrap();
        let s = g.eval(CutoffMember::EtaA, 0.7, 0).unwrap() + g.eval(CutoffMember::ChiA, 0.7, 0).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        assert!((f.chi1(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = fam();
        let h = 1e-5;
        for m in CutoffMember::ALL {
            let (lo, hi) = f.support(m);
            let hi = if hi.is_finite() { hi } else { lo * 3.0 };
            for i in 1..40 {
                let s = lo + (hi - lo) * i as f64 / 40.0;
                let j = f.jet(m, s);
                let fd1 = (f.jet(m, s + h).v - f.jet(m, s - h).v) / (2.0 * h);
                let fd2 = (f.jet(m, s + h).d1 - f.jet(m, s - h).d1) / (2.0 * h);
                let scale1 = j.d1.abs().max(1e-3);
                let scale2 = j.d2.abs().max(1e-1);
                assert!((fd1 - j.d1).abs() < 1e-6 * scale1 * 10.0, "{m:?} s={s}");
                assert!((fd2 - j.d2).abs() < 1e-6 * scale2 * 100.0, "{m:?} s={s}");
            }
        }
    }

    #[test]
    fn members_vanish_at_support_edges() {
        let f = fam();
        for m in [
            CutoffMember::Psi,
            CutoffMember::Psi1,
            CutoffMember::PsiTilde,
            CutoffMember::Psi1Tilde,
            CutoffMember::Phi1,
            CutoffMember::Phi1Tilde,
        ] {
            let (lo, hi) = f.support(m);
            for s in [lo - 1e-6, lo + 1e-6, hi - 1e-6, hi + 1e-6] {
                let j = f.jet(m, s);
                assert!(j.v.abs() < 1e-12 && j.d1.abs() < 1e-12 && j.d2.abs() < 1e-12, "{m:?} {s}");
            }
        }
        let (lo, hi) = f.support(CutoffMember::EtaA);
        assert_eq!(lo, 0.0);
        assert!(f.eta_a(hi + 1e-6).abs() < 1e-12);
    }

    #[test]
    fn identity_members() {
        let f = fam();
        for i in 0..=200 {
            let s = 0.25 + 1.75 * i as f64 / 200.0;
            assert!((f.psi1(s) - 1.0).abs() < 1e-15);
            let prod = f.jet(CutoffMember::Psi1Tilde, s).v * f.jet(CutoffMember::PsiTilde, s).v;
            assert!((prod - f.psi(s)).abs() < 1e-12);
            let l = 0.5 + (SQRT_2 - 0.5) * i as f64 / 200.0;
            assert!((f.phi1_tilde(l) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dyadic_identity() {
        let f1 = CutoffFamily::new(1.0).unwrap();
        let r = dyadic_identity_check(&f1, 4, 1.0, &[0.5]).unwrap();
        assert!(r.max_defect <= 1e-8);
        let r = dyadic_identity_check(&f1, 4, 1.0, &[2.5]).unwrap();
        assert_eq!(r.max_defect, 0.0);
        let f2 = CutoffFamily::new(0.25).unwrap();
        let r = dyadic_identity_check(&f2, 4, 0.5, &[0.3]).unwrap();
        assert!(r.max_defect <= 1e-8);
        let grid: Vec<f64> = (1..=50).map(|i| 0.25 * i as f64 / 50.0).collect();
        for n in [4, 5] {
            let r = dyadic_identity_check(&fam(), n, 0.7, &grid).unwrap();
            assert!(r.max_defect <= 1e-8, "{r:?}");
        }
    }

    #[test]
    fn fourier_l1_is_scale_invariant() {
        let cfg = QuadConfig::default();
        let a = fourier_transform_l1(&fam(), 1.0, &cfg).unwrap();
        let b = fourier_transform_l1(&fam(), 4.0, &cfg).unwrap();
        let c = fourier_transform_l1(&fam(), 10.0, &cfg).unwrap();
        assert!(a.value > 0.0 && a.value.is_finite());
        assert!((a.value - b.value).abs() < 1e-6 * a.value, "{a:?} {b:?}");
        assert!((a.value - c.value).abs() < 1e-6 * a.value, "{a:?} {c:?}");
    }

    proptest! {
        #[test]
        fn partition_of_unity(s in 1e-6f64..10.0, a in 0.01f64..2.0) {
            let f = CutoffFamily::new(a).unwrap();
            let sum = f.eta_a(s) + f.eval(CutoffMember::ChiA, s, 0).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-15);
        }

        #[test]
        fn chi1_monotone(x in 0.0f64..3.0, dx in 0.0f64..0.5) {
            let f = fam();
            prop_assert!(f.chi1(x + dx) >= f.chi1(x));
            prop_assert!(f.chi1(x) >= 0.0 && f.chi1(x) <= 1.0);
        }
    }
}
