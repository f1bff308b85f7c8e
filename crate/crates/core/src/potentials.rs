//! Radial potentials, radial grids with L¹ weights, angular averages of
//! `|x−y|`-kernels, the Newtonian operator `VΔ⁻¹` and `T = (1 − VΔ⁻¹)⁻¹`.
//!
//! Operators act on radial functions sampled on a [`RadialGrid`]; a matrix
//! entry `M_ij` already contains the source weight `w_j`, so that
//! `(Mf)_i = Σ_j M_ij f_j`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::resolvent_prefactor;
use crate::quad::{composite_gl, gauss_legendre};
use crate::specfun::{
    hankel_increment, hankel_zero_limit, reduced_jnu, reduced_jnu_increment, Sign, SpectralOrder,
};

/// `V(r) = c (1 + r²)^{−δ/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialPotential {
    pub coupling: f64,
    pub decay: f64,
}

impl RadialPotential {
    pub fn new(coupling: f64, decay: f64) -> Result<Self> {
        if !coupling.is_finite() || !(decay > 0.0) {
            return Err(Error::domain(
                "RadialPotential::new",
                format!("coupling {coupling} must be finite and decay {decay} > 0"),
            ));
        }
        Ok(RadialPotential { coupling, decay })
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.coupling * (1.0 + r * r).powf(-self.decay / 2.0)
    }

    pub fn with_coupling(mut self, c: f64) -> Self {
        self.coupling = c;
        self
    }
}

/// Nodes `r_i` and weights `w_i ≈ |S^{n−1}| ρ^{n−1} dρ`.
#[derive(Clone, Debug, Serialize)]
pub struct RadialGrid {
    pub order: SpectralOrder,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub r_max: f64,
}

impl RadialGrid {
    /// Geometric nodes on `[r_min, r_max]`; trapezoidal weights in
    /// `v = ρ^n/n`, the first weight also covering `[0, r_min]`.
    pub fn geometric(order: SpectralOrder, count: usize, r_min: f64, r_max: f64) -> Result<Self> {
        if count < 2 || !(r_min > 0.0) || !(r_max > r_min) {
            return Err(Error::domain(
                "RadialGrid::geometric",
                format!("need count >= 2 and 0 < r_min < r_max (got {count}, {r_min}, {r_max})"),
            ));
        }
        let ratio = (r_max / r_min).powf(1.0 / (count - 1) as f64);
        let mut nodes: Vec<f64> = (0..count).map(|i| r_min * ratio.powi(i as i32)).collect();
        nodes[count - 1] = r_max;
        Self::from_nodes(order, nodes)
    }

    pub fn from_nodes(order: SpectralOrder, nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] <= 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("RadialGrid::from_nodes", "nodes must be positive and increasing"));
        }
        let n = order.dim_f64();
        let area = order.sphere_area();
        let v: Vec<f64> = nodes.iter().map(|r| r.powf(n) / n).collect();
        let m = nodes.len();
        let mut weights = vec![0.0; m];
        weights[0] = v[0] + 0.5 * (v[1] - v[0]);
        for i in 1..m - 1 {
            weights[i] = 0.5 * (v[i + 1] - v[i - 1]);
        }
        weights[m - 1] = 0.5 * (v[m - 1] - v[m - 2]);
        for w in weights.iter_mut() {
            *w *= area;
        }
        let r_max = nodes[m - 1];
        Ok(RadialGrid {
            order,
            nodes,
            weights,
            r_max,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Volume of the ball of radius `r_max`.
    pub fn ball_volume(&self) -> f64 {
        self.order.sphere_area() * self.r_max.powf(self.order.dim_f64()) / self.order.dim_f64()
    }

    pub fn l1_norm<S: ComplexField<RealField = f64>>(&self, f: &DVector<S>) -> f64 {
        f.iter().zip(&self.weights).map(|(x, w)| x.clone().modulus() * w).sum()
    }
}

/// Dense operator on a radial grid.
#[derive(Clone, Debug)]
pub struct RadialOperator<S: ComplexField<RealField = f64>> {
    pub matrix: DMatrix<S>,
    pub grid: Arc<RadialGrid>,
}

impl<S: ComplexField<RealField = f64>> RadialOperator<S> {
    pub fn new(matrix: DMatrix<S>, grid: Arc<RadialGrid>) -> Self {
        RadialOperator { matrix, grid }
    }

    pub fn identity(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        RadialOperator {
            matrix: DMatrix::identity(n, n),
            grid,
        }
    }

    /// L¹→L¹ norm: `max_j Σ_i w_i |M_ij| / w_j`.
    pub fn l1_norm(&self) -> f64 {
        weighted_column_norm(&self.matrix, &self.grid.weights)
    }

    pub fn apply(&self, f: &DVector<S>) -> DVector<S> {
        &self.matrix * f
    }
}

impl RadialOperator<f64> {
    pub fn to_complex(&self) -> RadialOperator<Complex64> {
        RadialOperator {
            matrix: self.matrix.map(|x| Complex64::new(x, 0.0)),
            grid: self.grid.clone(),
        }
    }
}

pub fn weighted_column_norm<S: ComplexField<RealField = f64>>(m: &DMatrix<S>, w: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        let s: f64 = m
            .column(j)
            .iter()
            .zip(w)
            .map(|(x, wi)| x.clone().modulus() * wi)
            .sum();
        best = best.max(s / w[j]);
    }
    best
}

/// Newtonian kernel `Γ(n/2−1)/(4π^{n/2}) r^{2−n}`.
pub fn newton_kernel(order: SpectralOrder, r: f64) -> f64 {
    order.newton_constant() * r.powf(2.0 - order.dim_f64())
}

/// `∫_0^π sin^{n−2}θ dθ`.
fn sine_power_norm(order: SpectralOrder) -> f64 {
    match order.dimension() {
        4 => PI / 2.0,
        _ => 4.0 / 3.0,
    }
}

/// Spherical mean `(1/|S^{n−1}|)∫ f(|r e₁ − ρω|) dω` by Gauss–Legendre in the
/// polar angle with geometric refinement towards `θ = 0`.
///
/// `singular_exponent` is the `α` in `f(u) ~ u^{−α}` as `u → 0`; it is only
/// used to reject non-integrable cases at `r = ρ`.
pub fn angular_average(
    order: SpectralOrder,
    r: f64,
    rho: f64,
    singular_exponent: f64,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    if !(r > 0.0 && rho > 0.0) {
        return Err(Error::domain("angular_average", "r and rho must be > 0"));
    }
    let n = order.dim_f64();
    if r == rho && singular_exponent >= n - 1.0 {
        return Err(Error::NonIntegrable {
            alpha: singular_exponent,
            limit: n - 1.0,
        });
    }
    thread_local! {
        static RULE: (Vec<f64>, Vec<f64>) = gauss_legendre(16);
    }
    let d = (r - rho).abs();
    let theta_star = d / (r * rho).sqrt();
    let floor = if d == 0.0 { 1e-9 } else { (0.25 * theta_star).max(1e-12) };
    let mut breaks = vec![PI];
    let mut th = PI / 2.0;
    while th > floor {
        breaks.push(th);
        th *= 0.5;
    }
    breaks.push(0.0);
    breaks.reverse();
    let p = order.dimension() as i32 - 2;
    let four_r_rho = 4.0 * r * rho;
    let total = RULE.with(|rule| {
        let (xs, ws) = composite_gl(&breaks, rule);
        xs.iter()
            .zip(&ws)
            .map(|(&t, &w)| {
                let s = (0.5 * t).sin();
                let u = (d * d + four_r_rho * s * s).sqrt();
                w * t.sin().powi(p) * f(u)
            })
            .sum::<f64>()
    });
    Ok(total / sine_power_norm(order))
}

/// Closed-form spherical mean of the free resolvent kernel:
/// `±(i/4)π^{−ν}Γ(ν+1) r_>^{2−n} G(λr_<) ℋ^±(λr_>)`.
pub fn resolvent_average(order: SpectralOrder, lambda: f64, r: f64, rho: f64, sign: Sign) -> Complex64 {
    let (lo, hi) = if r < rho { (r, rho) } else { (rho, r) };
    let hk = hankel_zero_limit(order, sign) + hankel_increment(order, lambda * hi, sign);
    average_prefactor(order, sign) * hi.powf(2.0 - order.dim_f64()) * reduced_jnu(order, lambda * lo) * hk
}

/// Spherical mean of `R₀^±(λ) − R₀^±(0)`, free of cancellation at small `λ`.
pub fn resolvent_difference_average(
    order: SpectralOrder,
    lambda: f64,
    r: f64,
    rho: f64,
    sign: Sign,
) -> Complex64 {
    let (lo, hi) = if r < rho { (r, rho) } else { (rho, r) };
    let g = reduced_jnu(order, lambda * lo);
    let dg = reduced_jnu_increment(order, lambda * lo);
    let dh = hankel_increment(order, lambda * hi, sign);
    let h0 = hankel_zero_limit(order, sign);
    average_prefactor(order, sign) * hi.powf(2.0 - order.dim_f64()) * (dh * g + h0 * dg)
}

fn average_prefactor(order: SpectralOrder, sign: Sign) -> Complex64 {
    // (2π)^{−ν} from the kernel times 2^ν Γ(ν+1) from the Bessel addition theorem
    resolvent_prefactor(order, sign) * 2f64.powf(order.nu()) * order.gamma_nu_plus_one()
}

fn assemble<S: ComplexField<RealField = f64> + Copy + Send + Sync>(
    grid: &Arc<RadialGrid>,
    entry: impl Fn(usize, usize) -> S + Sync,
) -> RadialOperator<S> {
    let n = grid.len();
    let rows: Vec<Vec<S>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| entry(i, j) * S::from_real(grid.weights[j])).collect())
        .collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    RadialOperator::new(matrix, grid.clone())
}

/// `VΔ⁻¹` with kernel `−V(r) c_N max(r, ρ)^{2−n}` (the spherical mean of
/// the Newtonian kernel).
pub fn assemble_vdelta_inv(v: &RadialPotential, grid: &Arc<RadialGrid>) -> RadialOperator<f64> {
    let order = grid.order;
    let cn = order.newton_constant();
    let p = 2.0 - order.dim_f64();
    let vr: Vec<f64> = grid.nodes.iter().map(|&r| v.eval(r)).collect();
    assemble(grid, |i, j| {
        -vr[i] * cn * grid.nodes[i].max(grid.nodes[j]).powf(p)
    })
}

/// `(Δ⁻¹ f)(r)` at an arbitrary radius from grid samples of `f`.
pub fn newton_potential_at(grid: &RadialGrid, f: &[f64], r: f64) -> f64 {
    let order = grid.order;
    let cn = order.newton_constant();
    let p = 2.0 - order.dim_f64();
    -grid
        .nodes
        .iter()
        .zip(&grid.weights)
        .zip(f)
        .map(|((&rj, &wj), &fj)| cn * r.max(rj).powf(p) * wj * fj)
        .sum::<f64>()
}

/// `V R₀^±(λ)` as a radial operator.
pub fn assemble_resolvent(
    v: &RadialPotential,
    grid: &Arc<RadialGrid>,
    lambda: f64,
    sign: Sign,
) -> RadialOperator<Complex64> {
    let order = grid.order;
    let vr: Vec<f64> = grid.nodes.iter().map(|&r| v.eval(r)).collect();
    assemble(grid, |i, j| {
        resolvent_average(order, lambda, grid.nodes[i], grid.nodes[j], sign) * vr[i]
    })
}

/// `V(R₀^±(λ) − R₀^±(0))` as a radial operator.
pub fn assemble_resolvent_difference(
    v: &RadialPotential,
    grid: &Arc<RadialGrid>,
    lambda: f64,
    sign: Sign,
) -> RadialOperator<Complex64> {
    let order = grid.order;
    let vr: Vec<f64> = grid.nodes.iter().map(|&r| v.eval(r)).collect();
    assemble(grid, |i, j| {
        resolvent_difference_average(order, lambda, grid.nodes[i], grid.nodes[j], sign) * vr[i]
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Series,
    Direct,
}

#[derive(Clone, Debug)]
pub struct TSolve {
    pub t: RadialOperator<f64>,
    pub neumann_q: f64,
    pub method: SolveMethod,
    /// max entry difference between the series and the direct inverse
    pub agreement: Option<f64>,
    /// `‖T − I − VΔ⁻¹T‖`
    pub residual: f64,
    pub series_terms: usize,
}

/// `T = (1 − A)^{−1}` for `A = VΔ⁻¹`: Neumann series (summed by repeated
/// squaring) when `q = ‖A‖ < 1`, always cross-checked against LU.
pub fn solve_t(op: &RadialOperator<f64>) -> Result<TSolve> {
    let n = op.matrix.nrows();
    let a = &op.matrix;
    let q = op.l1_norm();
    let id = DMatrix::<f64>::identity(n, n);
    let direct = (&id - a)
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("1 - V*inv(Delta) is singular on this grid".into()))?;
    let w = &op.grid.weights;
    let residual_of = |t: &DMatrix<f64>| weighted_column_norm(&(t - &id - a * t), w);
    if q < 1.0 {
        // Π_j (I + A^{2^j}) = Σ_{k < 2^J} A^k
        let mut s = &id + a;
        let mut p = a * a;
        let mut terms = 2usize;
        while weighted_column_norm(&p, w) > 1e-14 && terms < (1 << 20) {
            s = &s + &s * &p;
            p = &p * &p;
            terms *= 2;
        }
        let agreement = (&s - &direct).amax();
        let residual = residual_of(&s);
        if agreement > 1e-9 {
            return Err(Error::Singular(format!(
                "series and direct inverse disagree by {agreement:.3e}"
            )));
        }
        Ok(TSolve {
            t: RadialOperator::new(s, op.grid.clone()),
            neumann_q: q,
            method: SolveMethod::Series,
            agreement: Some(agreement),
            residual,
            series_terms: terms,
        })
    } else {
        let residual = residual_of(&direct);
        Ok(TSolve {
            t: RadialOperator::new(direct, op.grid.clone()),
            neumann_q: q,
            method: SolveMethod::Direct,
            agreement: None,
            residual,
            series_terms: 0,
        })
    }
}

/// Coupling constant giving `‖VΔ⁻¹‖ = target_q` on `grid`.
pub fn coupling_for_q(decay: f64, grid: &Arc<RadialGrid>, target_q: f64) -> Result<f64> {
    let unit = RadialPotential::new(1.0, decay)?;
    let q1 = assemble_vdelta_inv(&unit, grid).l1_norm();
    Ok(target_q / q1)
}

#[derive(Clone, Debug, Serialize)]
pub struct Condition12Report {
    pub y_radii: Vec<f64>,
    pub r_max_values: Vec<f64>,
    /// `values[k][i]`: integral for `r_max_values[k]`, `y_radii[i]`
    pub values: Vec<Vec<f64>>,
    pub sup: f64,
    /// `ΔS(2R→4R)/ΔS(R→2R)` at the worst `|y|`
    pub growth_ratio: f64,
    pub divergent: bool,
}

/// `sup_y ∫ (|x−y|^{2−n} + |x−y|^{−(n−1)/2}) |V(x)| dx` truncated to
/// `|x| ≤ R`, for `R ∈ {R_max, 2R_max, 4R_max}`.
///
/// The divergence flag is set when the increment over the last doubling is
/// not smaller than over the previous one.
pub fn check_decay_condition(
    v: &RadialPotential,
    order: SpectralOrder,
    y_radii: &[f64],
    r_max: f64,
) -> Result<Condition12Report> {
    let n = order.dim_f64();
    let alpha = (n - 1.0) / 2.0;
    let area = order.sphere_area();
    let rule = gauss_legendre(16);
    let rs = [r_max, 2.0 * r_max, 4.0 * r_max];
    // shells [0,R], [R,2R], [2R,4R] for each y
    let mut shells = vec![vec![0.0; y_radii.len()]; 3];
    for (iy, &y) in y_radii.iter().enumerate() {
        let integrand = |r: f64| -> Result<f64> {
            let newton = if y == 0.0 { r.powf(2.0 - n) } else { r.max(y).powf(2.0 - n) };
            let avg = if y == 0.0 {
                r.powf(-alpha)
            } else {
                angular_average(order, r, y, alpha, |u| u.powf(-alpha))?
            };
            Ok(v.eval(r).abs() * (newton + avg) * area * r.powf(n - 1.0))
        };
        for (k, (a, b)) in [(0.0, rs[0]), (rs[0], rs[1]), (rs[1], rs[2])].into_iter().enumerate() {
            let breaks = radial_breaks(a, b, y);
            let (xs, ws) = composite_gl(&breaks, &rule);
            let mut s = 0.0;
            for (x, w) in xs.iter().zip(&ws) {
                s += w * integrand(*x)?;
            }
            shells[k][iy] = s;
        }
    }
    let mut values = vec![];
    let mut acc = vec![0.0; y_radii.len()];
    for shell in &shells {
        for (a, s) in acc.iter_mut().zip(shell) {
            *a += s;
        }
        values.push(acc.clone());
    }
    let sup = values[0].iter().cloned().fold(0.0, f64::max);
    let mut growth_ratio = 0.0f64;
    for iy in 0..y_radii.len() {
        let d1 = shells[1][iy];
        let d2 = shells[2][iy];
        let ratio = if d1 > 0.0 { d2 / d1 } else { 0.0 };
        growth_ratio = growth_ratio.max(ratio);
    }
    Ok(Condition12Report {
        y_radii: y_radii.to_vec(),
        r_max_values: rs.to_vec(),
        values,
        sup,
        growth_ratio,
        divergent: growth_ratio >= 1.0,
    })
}

/// Breakpoints on `[a, b]`, geometric away from 0 and graded towards `y`.
fn radial_breaks(a: f64, b: f64, y: f64) -> Vec<f64> {
    let mut pts = vec![a, b];
    let lo = a.max(1e-6);
    let mut x = lo;
    while x < b {
        pts.push(x);
        x *= 1.25;
    }
    if a == 0.0 {
        let mut x = lo;
        while x > 1e-12 {
            pts.push(x);
            x *= 0.25;
        }
    }
    if y > a && y < b {
        pts.push(y);
        let mut d = 0.5 * y;
        while d > 1e-9 * y {
            for p in [y - d, y + d] {
                if p > a && p < b {
                    pts.push(p);
                }
            }
            d *= 0.5;
        }
    }
    pts.sort_by(|p, q| p.total_cmp(q));
    pts.dedup_by(|p, q| (*p - *q).abs() <= 1e-15 * q.abs().max(1e-300));
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::resolvent_kernel;

    fn o4() -> SpectralOrder {
        SpectralOrder::new(4).unwrap()
    }

    #[test]
    fn angular_average_examples() {
        let o = o4();
        let v = angular_average(o, 2.0, 1.0, 2.0, |u| u.powi(-2)).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
        let v = angular_average(o, 0.3, 1.7, 0.0, |_| 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        let v = angular_average(o, 1.0, 1.0, 0.0, |u| u * u).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
        assert!(angular_average(o, 1.0, 1.0, 3.0, |u| u.powi(-3)).is_err());
    }

    #[test]
    fn newton_mean_value_on_grid() {
        for n in [4, 5] {
            let o = SpectralOrder::new(n).unwrap();
            let g = RadialGrid::geometric(o, 40, 1e-3, 64.0).unwrap();
            for &r in &g.nodes {
                for &rho in &g.nodes {
                    if r == rho {
                        continue;
                    }
                    let p = 2 - n as i32;
                    let v = angular_average(o, r, rho, (n - 2) as f64, |u| u.powi(p)).unwrap();
                    let e = r.max(rho).powi(p);
                    assert!((v - e).abs() < 1e-10 * e, "r={r} rho={rho} {v} {e}");
                }
            }
        }
    }

    #[test]
    fn grid_volume() {
        for n in [4, 5] {
            let o = SpectralOrder::new(n).unwrap();
            let g = RadialGrid::geometric(o, 240, 1e-3, 64.0).unwrap();
            let s: f64 = g.weights.iter().sum();
            assert!((s - g.ball_volume()).abs() < 1e-10 * g.ball_volume());
            assert!(g.weights.iter().all(|w| *w > 0.0));
        }
    }

    #[test]
    fn closed_form_resolvent_average_matches_quadrature() {
        for n in [4, 5] {
            let o = SpectralOrder::new(n).unwrap();
            for sign in Sign::both() {
                for &(lam, r, rho) in &[(0.7, 1.0, 2.5), (0.05, 10.0, 3.0), (2.0, 0.4, 0.5)] {
                    let re = angular_average(o, r, rho, (n - 2) as f64, |u| {
                        resolvent_kernel(o, lam, u, sign).unwrap().re
                    })
                    .unwrap();
                    let im = angular_average(o, r, rho, 0.0, |u| {
                        resolvent_kernel(o, lam, u, sign).unwrap().im
                    })
                    .unwrap();
                    let c = resolvent_average(o, lam, r, rho, sign);
                    assert!((c - Complex64::new(re, im)).norm() < 1e-10 * c.norm(), "{c} {re} {im}");
                    let d = resolvent_difference_average(o, lam, r, rho, sign);
                    let d2 = c - resolvent_average(o, 0.0, r, rho, sign);
                    assert!((d - d2).norm() < 1e-12 * c.norm());
                }
                let z = resolvent_average(o, 0.0, 2.0, 3.0, sign);
                assert!((z.re - o.newton_constant() * 3f64.powi(2 - n as i32)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn newton_operator_examples() {
        let o = o4();
        let area = o.sphere_area();
        let cn = o.newton_constant();
        let ball = RadialGrid::geometric(o, 200, 1e-4, 1.0).unwrap();
        let ones = vec![1.0; ball.len()];
        let v2 = newton_potential_at(&ball, &ones, 2.0);
        assert!((v2 + cn * area / 16.0).abs() < 1e-12 * cn * area / 16.0);
        let base = newton_potential_at(&ball, &ones, 1.5) * 1.5f64.powi(2);
        for r in [1.1, 3.0, 7.0, 50.0] {
            let x = newton_potential_at(&ball, &ones, r) * r * r;
            assert!((x - base).abs() < 1e-10 * base.abs());
        }
        let grid = Arc::new(RadialGrid::geometric(o, 50, 1e-3, 64.0).unwrap());
        let zero = RadialPotential::new(0.0, 3.0).unwrap();
        assert_eq!(assemble_vdelta_inv(&zero, &grid).l1_norm(), 0.0);
    }

    #[test]
    fn t_operator() {
        let o = o4();
        let grid = Arc::new(RadialGrid::geometric(o, 240, 1e-3, 64.0).unwrap());
        let zero = RadialPotential::new(0.0, 3.0).unwrap();
        let s = solve_t(&assemble_vdelta_inv(&zero, &grid)).unwrap();
        assert_eq!(s.neumann_q, 0.0);
        assert!((&s.t.matrix - DMatrix::<f64>::identity(240, 240)).amax() < 1e-15);
        for q in [0.5, 0.8] {
            let c = coupling_for_q(3.0, &grid, q).unwrap();
            let v = RadialPotential::new(c, 3.0).unwrap();
            let s = solve_t(&assemble_vdelta_inv(&v, &grid)).unwrap();
            assert!((s.neumann_q - q).abs() < 1e-12);
            assert_eq!(s.method, SolveMethod::Series);
            assert!(s.agreement.unwrap() <= 1e-9);
            assert!(s.t.l1_norm() <= 1.0 / (1.0 - s.neumann_q));
            assert!(s.residual < 1e-12);
        }
    }

    #[test]
    fn l1_norm_semantics_for_convolution() {
        // F(u) = e^{−u}; sup_ρ ∫ F(|x−y|)dx = |S^{n−1}| Γ(n)
        let o = o4();
        let grid = Arc::new(RadialGrid::geometric(o, 240, 1e-3, 64.0).unwrap());
        let op = assemble(&grid, |i, j| {
            angular_average(o, grid.nodes[i], grid.nodes[j], 0.0, |u| (-u).exp()).unwrap()
        });
        let exact = o.sphere_area() * 6.0;
        // a column where the grid resolves the unit decay length
        let j = grid.nodes.iter().position(|&r| r >= 1.0).unwrap();
        let col: f64 = (0..grid.len()).map(|i| grid.weights[i] * op.matrix[(i, j)].abs()).sum::<f64>()
            / grid.weights[j];
        assert!((col - exact).abs() < 0.01 * exact, "{col} {exact}");
        assert!(op.l1_norm() >= col);
    }

    #[test]
    fn decay_condition_shells() {
        let o = o4();
        let ys = [0.0, 0.5, 1.0, 2.0, 4.0];
        let good = check_decay_condition(&RadialPotential::new(1.0, 3.0).unwrap(), o, &ys, 64.0).unwrap();
        assert!(!good.divergent, "{good:?}");
        assert!(good.sup.is_finite() && good.sup > 0.0);
        let bad = check_decay_condition(&RadialPotential::new(1.0, 2.0).unwrap(), o, &ys, 64.0).unwrap();
        assert!(bad.divergent);
        assert!((bad.growth_ratio - 2f64.sqrt()).abs() < 0.05, "{}", bad.growth_ratio);
        let zero = check_decay_condition(&RadialPotential::new(0.0, 3.0).unwrap(), o, &ys, 64.0).unwrap();
        assert_eq!(zero.sup, 0.0);
        let stronger = check_decay_condition(&RadialPotential::new(2.0, 3.0).unwrap(), o, &ys, 64.0).unwrap();
        assert!(stronger.sup > good.sup);
        let faster = check_decay_condition(&RadialPotential::new(1.0, 4.0).unwrap(), o, &ys, 64.0).unwrap();
        assert!(faster.sup < good.sup);
    }
}
