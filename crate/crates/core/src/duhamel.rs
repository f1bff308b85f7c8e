//! Perturbed low-frequency evolution on radial grids.
//!
//! `M^±(λ) = T(1 + (VR₀^±(λ) − VR₀^±(0))T)^{−1}` is computed at Chebyshev
//! nodes on `supp φ_h`; `U_h^±(t) = ∫ e^{itλ}φ_h(λ)M^±(λ)dλ` is synthesized
//! from the nodal matrices with Filon weights of the Lagrange basis. Time
//! convolutions with `T V P_h^±` are evaluated with FFTs: the time samples
//! are transformed, multiplied by the λ-domain symbol `φ̃_h T(VR₀^±(λ) −
//! VR₀^±(0))` and transformed back, which equals direct summation against
//! the (periodized) kernel `A_h^±`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cutoffs::CutoffFamily;
use crate::error::{Error, Result};
use crate::kernels::{a_kernel_integrands, phi_tilde_h_support, WaveKernelSpec};
use crate::oscint::{uniform_samples, FilonPlan, QuadConfig};
use crate::potentials::{
    angular_average, assemble_resolvent, assemble_resolvent_difference, weighted_column_norm,
    RadialGrid, RadialPotential, TSolve,
};
use crate::specfun::{reduced_jnu, Sign, SpectralOrder};
use crate::verify::{log_grid, uniform_integral_with, uniform_time_integral, TimeIntegral};

type C = Complex64;

const ZERO: C = C { re: 0.0, im: 0.0 };

/// `sup supp φ₁`.
pub const LAMBDA_SUP: f64 = SQRT_2;

/// `supp φ_h = [1/(2h), √2/h]`.
pub fn phi_h_support(h: f64) -> (f64, f64) {
    (0.5 / h, LAMBDA_SUP / h)
}

/// Grid parameters for the perturbed computations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BornGrids {
    pub radial_nodes: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub lambda_nodes: usize,
    pub time_nodes: usize,
    /// time step in units of `h`
    pub time_step: f64,
}

impl Default for BornGrids {
    fn default() -> Self {
        BornGrids {
            radial_nodes: 64,
            r_min: 1e-2,
            r_max: 64.0,
            lambda_nodes: 33,
            time_nodes: 2048,
            time_step: 0.3125,
        }
    }
}

impl BornGrids {
    /// Doubled time window and doubled Chebyshev node spacing count.
    pub fn refined(&self) -> Self {
        BornGrids {
            lambda_nodes: 2 * (self.lambda_nodes - 1) + 1,
            time_nodes: 2 * self.time_nodes,
            ..*self
        }
    }

    pub fn radial_grid(&self, order: SpectralOrder) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::geometric(order, self.radial_nodes, self.r_min, self.r_max)?))
    }

    pub fn time_grid(&self, h: f64) -> Result<TimeGrid> {
        TimeGrid::new(self.time_step * h, self.time_nodes, h)
    }
}

/// Symmetric nodes `t_m = (m − N/2)Δt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, count: usize, h: f64) -> Result<Self> {
        let limit = PI * h / (4.0 * LAMBDA_SUP);
        if !(dt > 0.0 && dt <= limit) || count < 16 || count % 2 != 0 {
            return Err(Error::domain(
                "TimeGrid",
                format!("need 0 < dt <= {limit:.4} and an even count >= 16 (dt = {dt}, count = {count})"),
            ));
        }
        Ok(TimeGrid { dt, count })
    }

    pub fn node(&self, m: usize) -> f64 {
        (m as f64 - (self.count / 2) as f64) * self.dt
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|m| self.node(m)).collect()
    }

    pub fn extent(&self) -> f64 {
        self.dt * (self.count / 2) as f64
    }
}

/// `‖VR₀^±(λ) − VR₀^±(0)‖` on the radial L¹ space.
pub fn lambda_perturbation_norm(
    v: &RadialPotential,
    grid: &Arc<RadialGrid>,
    lambda: f64,
    sign: Sign,
) -> f64 {
    assemble_resolvent_difference(v, grid, lambda, sign).l1_norm()
}

/// `‖VR₀^±(λ)‖`.
pub fn resolvent_norm(v: &RadialPotential, grid: &Arc<RadialGrid>, lambda: f64, sign: Sign) -> f64 {
    assemble_resolvent(v, grid, lambda, sign).l1_norm()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodeInfo {
    pub lambda: f64,
    /// `‖(VR₀^±(λ) − VR₀^±(0))T‖`
    pub q: f64,
    /// `‖VR₀^±(λ) − VR₀^±(0)‖`
    pub perturbation: f64,
    /// `‖X X^{−1} − I‖` for `X = 1 + (VR₀^±(λ) − VR₀^±(0))T`
    pub residual: f64,
}

/// Barycentric Lagrange basis on Chebyshev–Lobatto nodes of `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct ChebyshevBasis {
    lo: f64,
    hi: f64,
    x: Vec<f64>,
    w: Vec<f64>,
}

impl ChebyshevBasis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        let m = count.max(2);
        let x: Vec<f64> = (0..m).map(|k| (PI * k as f64 / (m - 1) as f64).cos()).collect();
        let w = (0..m)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 || k == m - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        ChebyshevBasis { lo, hi, x, w }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn node(&self, k: usize) -> f64 {
        0.5 * (self.lo + self.hi) + 0.5 * (self.hi - self.lo) * self.x[k]
    }

    /// Values of every basis polynomial at `lambda`.
    pub fn eval_into(&self, lambda: f64, out: &mut [f64]) {
        let s = (2.0 * lambda - self.lo - self.hi) / (self.hi - self.lo);
        if let Some(k) = self.x.iter().position(|&xk| xk == s) {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[k] = 1.0;
            return;
        }
        let mut den = 0.0;
        for ((o, &xk), &wk) in out.iter_mut().zip(&self.x).zip(&self.w) {
            *o = wk / (s - xk);
            den += *o;
        }
        out.iter_mut().for_each(|o| *o /= den);
    }
}

/// Nodal operators `M^±(λ_c)` and the Filon plan for `U_h^±`.
pub struct LambdaSweep {
    pub order: SpectralOrder,
    pub h: f64,
    pub sign: Sign,
    pub grid: Arc<RadialGrid>,
    pub t: DMatrix<f64>,
    pub nodes: Vec<f64>,
    pub m: Vec<DMatrix<C>>,
    pub info: Vec<NodeInfo>,
    basis: ChebyshevBasis,
    beta: FilonPlan,
}

impl LambdaSweep {
    pub fn t_norm(&self) -> f64 {
        weighted_column_norm(&self.t, &self.grid.weights)
    }

    pub fn max_q(&self) -> f64 {
        self.info.iter().map(|i| i.q).fold(0.0, f64::max)
    }

    /// `M^±(λ)` by interpolation between the nodes.
    pub fn m_at(&self, lambda: f64) -> DMatrix<C> {
        let mut l = vec![0.0; self.basis.len()];
        self.basis.eval_into(lambda, &mut l);
        let n = self.grid.len();
        let mut out = DMatrix::from_element(n, n, ZERO);
        for (lc, mc) in l.iter().zip(&self.m) {
            out += mc * C::new(*lc, 0.0);
        }
        out
    }

    /// Filon weights `β_c(t) = ∫ e^{itλ} φ_h(λ) L_c(λ) dλ`.
    pub fn weights_at(&self, t: f64) -> Vec<C> {
        let mut out = vec![ZERO; self.basis.len()];
        self.beta.eval_into(t, &mut out);
        out
    }

    pub fn u_at(&self, t: f64) -> DMatrix<C> {
        let n = self.grid.len();
        let mut out = DMatrix::from_element(n, n, ZERO);
        for (b, mc) in self.weights_at(t).iter().zip(&self.m) {
            out += mc * *b;
        }
        out
    }

    /// `U_h^±(t_m) f` for every node of `time`.
    pub fn u_apply(&self, f: &DVector<C>, time: &TimeGrid) -> Vec<DVector<C>> {
        let mf: Vec<DVector<C>> = self.m.iter().map(|m| m * f).collect();
        (0..time.count)
            .into_par_iter()
            .map(|k| {
                let b = self.weights_at(time.node(k));
                let mut out = DVector::from_element(f.len(), ZERO);
                for (bc, v) in b.iter().zip(&mf) {
                    out.axpy(*bc, v, C::new(1.0, 0.0));
                }
                out
            })
            .collect()
    }
}

/// `M^±(λ) = T(1 + (VR₀^±(λ) − VR₀^±(0))T)^{−1}` at `count` Chebyshev nodes
/// on `supp φ_h`.
pub fn build_lambda_sweep(
    v: &RadialPotential,
    t: &TSolve,
    spec: &WaveKernelSpec,
    sign: Sign,
    count: usize,
) -> Result<LambdaSweep> {
    let grid = t.t.grid.clone();
    let h = spec.h;
    let (lo, hi) = phi_h_support(h);
    let basis = ChebyshevBasis::new(lo, hi, count);
    let tc = t.t.to_complex();
    let w = &grid.weights;
    let n = grid.len();
    let id = DMatrix::<C>::identity(n, n);
    let nodes: Vec<f64> = (0..basis.len()).map(|k| basis.node(k)).collect();
    let solved: Vec<(DMatrix<C>, NodeInfo)> = nodes
        .par_iter()
        .map(|&lambda| {
            let d = assemble_resolvent_difference(v, &grid, lambda, sign);
            let dt = &d.matrix * &tc.matrix;
            let q = weighted_column_norm(&dt, w);
            let x = &id + &dt;
            let inv = x
                .clone()
                .lu()
                .try_inverse()
                .ok_or(Error::NonInvertibleNode { lambda, q })?;
            let residual = weighted_column_norm(&(&x * &inv - &id), w);
            if !(residual <= 1e-10) {
                return Err(Error::NonInvertibleNode { lambda, q });
            }
            let m = &tc.matrix * inv;
            Ok((
                m,
                NodeInfo {
                    lambda,
                    q,
                    perturbation: d.l1_norm(),
                    residual,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let (m, info): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let fam = spec.cutoffs;
    let comps = basis.len();
    let mut lbuf = vec![0.0; comps];
    let beta = FilonPlan::vector(lo, hi, comps, &spec.quad, &[lo, hi], |l, out| {
        basis.eval_into(l, &mut lbuf);
        let p = fam.phi1(h * l);
        for (o, b) in out.iter_mut().zip(&lbuf) {
            *o = C::new(p * b, 0.0);
        }
    })?;
    if !beta.converged() {
        return Err(Error::ToleranceNotMet {
            value: ZERO,
            estimate: beta.uniform_bound(),
            target: beta.target(),
        });
    }
    Ok(LambdaSweep {
        order: spec.order,
        h,
        sign,
        grid,
        t: t.t.matrix.clone(),
        nodes,
        m,
        info,
        basis,
        beta,
    })
}

/// `φ̂_h(t) = ∫ e^{itλ} φ_h(λ) dλ`.
pub fn phi_hat_plan(cutoffs: &CutoffFamily, h: f64, cfg: &QuadConfig) -> Result<FilonPlan> {
    let (lo, hi) = phi_h_support(h);
    let fam = *cutoffs;
    FilonPlan::scalar(lo, hi, cfg, move |l| C::new(fam.phi1(h * l), 0.0))
}

/// The symbol `φ̃_h(λ_k) T (VR₀^±(λ_k) − VR₀^±(0))` at the FFT frequencies
/// inside `supp φ̃_h`.
pub struct ConvolutionSymbol {
    pub time: TimeGrid,
    pub padded: usize,
    pub dlambda: f64,
    pub ks: Vec<usize>,
    pub b: Vec<DMatrix<C>>,
}

impl ConvolutionSymbol {
    pub fn new(
        v: &RadialPotential,
        t: &DMatrix<f64>,
        grid: &Arc<RadialGrid>,
        spec: &WaveKernelSpec,
        sign: Sign,
        time: TimeGrid,
    ) -> Self {
        let padded = 2 * time.count;
        let dlambda = 2.0 * PI / (padded as f64 * time.dt);
        let (lo, hi) = phi_tilde_h_support(spec.h);
        let ks: Vec<usize> = (1..padded / 2)
            .filter(|&k| {
                let l = k as f64 * dlambda;
                l > lo && l < hi
            })
            .collect();
        let fam = spec.cutoffs;
        let h = spec.h;
        let tc = t.map(|x| C::new(x, 0.0));
        let b = ks
            .par_iter()
            .map(|&k| {
                let l = k as f64 * dlambda;
                let d = assemble_resolvent_difference(v, grid, l, sign);
                &tc * d.matrix * C::new(fam.phi1_tilde(h * l), 0.0)
            })
            .collect();
        ConvolutionSymbol {
            time,
            padded,
            dlambda,
            ks,
            b,
        }
    }

    /// `∫ T V P_h^±(t_m − τ) u(τ) dτ` for samples `u(t_m)` on the time grid.
    pub fn convolve(&self, u: &[DVector<C>]) -> Vec<DVector<C>> {
        let nt = self.time.count;
        assert_eq!(u.len(), nt);
        let n = u[0].len();
        let l = self.padded;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(l);
        let inv = planner.plan_fft_inverse(l);
        let mut rows: Vec<Vec<C>> = (0..n)
            .map(|i| {
                let mut r = vec![ZERO; l];
                for (m, um) in u.iter().enumerate() {
                    r[m] = um[i];
                }
                fwd.process(&mut r);
                r
            })
            .collect();
        let scale = C::new(self.time.dt * self.dlambda, 0.0);
        let mut out_rows = vec![vec![ZERO; l]; n];
        let mut uk = DVector::from_element(n, ZERO);
        for (&k, b) in self.ks.iter().zip(&self.b) {
            for i in 0..n {
                uk[i] = rows[i][k];
            }
            let yk = b * &uk * scale;
            for i in 0..n {
                out_rows[i][k] = yk[i];
            }
        }
        for r in out_rows.iter_mut() {
            inv.process(r);
        }
        rows.clear();
        (0..nt)
            .map(|m| DVector::from_iterator(n, out_rows.iter().map(|r| r[m])))
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointResidual {
    pub sign: Sign,
    pub h: f64,
    /// `max_t ‖U(t) − Tφ̂_h(t) + (2π)^{−1}∫TVP(t−τ)U(τ)dτ‖`
    pub residual: f64,
    /// `max_t ‖U(t)‖` for scale
    pub u_scale: f64,
    pub time: TimeGrid,
    pub lambda_nodes: usize,
}

/// Defect of the fixed-point identity for `U_h^±`, maximized over the time
/// grid in the radial L¹ operator norm.
///
/// The product `φ_h M = φ̃_h D · φ_h M` turns into a time convolution with a
/// `1/(2π)` from the Fourier inversion convention `∫ e^{itλ}` used for both
/// `P_h^±` and `U_h^±`.
pub fn fixed_point_residual(
    v: &RadialPotential,
    sweep: &LambdaSweep,
    spec: &WaveKernelSpec,
    time: TimeGrid,
) -> Result<FixedPointResidual> {
    let grid = &sweep.grid;
    let n = grid.len();
    let sym = ConvolutionSymbol::new(v, &sweep.t, grid, spec, sweep.sign, time);
    let phi_hat = phi_hat_plan(&spec.cutoffs, spec.h, &spec.quad)?;
    let ts = time.nodes();
    let ph: Vec<C> = ts.iter().map(|&t| phi_hat.eval(t).0).collect();
    let betas: Vec<Vec<C>> = ts.par_iter().map(|&t| sweep.weights_at(t)).collect();
    let w = &grid.weights;
    let per_col: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let cols: Vec<DVector<C>> = sweep.m.iter().map(|m| m.column(j).into_owned()).collect();
            let u: Vec<DVector<C>> = betas
                .iter()
                .map(|b| {
                    let mut out = DVector::from_element(n, ZERO);
                    for (bc, c) in b.iter().zip(&cols) {
                        out.axpy(*bc, c, C::new(1.0, 0.0));
                    }
                    out
                })
                .collect();
            let y = sym.convolve(&u);
            let mut defect = Vec::with_capacity(time.count);
            let mut size = Vec::with_capacity(time.count);
            for m in 0..time.count {
                let mut d = 0.0;
                let mut s = 0.0;
                for i in 0..n {
                    let rhs = C::new(sweep.t[(i, j)], 0.0) * ph[m] - y[m][i] / (2.0 * PI);
                    d += w[i] * (u[m][i] - rhs).norm();
                    s += w[i] * u[m][i].norm();
                }
                defect.push(d / w[j]);
                size.push(s / w[j]);
            }
            (defect, size)
        })
        .collect();
    let mut residual = 0.0f64;
    let mut u_scale = 0.0f64;
    for m in 0..time.count {
        let d = per_col.iter().map(|c| c.0[m]).fold(0.0, f64::max);
        let s = per_col.iter().map(|c| c.1[m]).fold(0.0, f64::max);
        residual = residual.max(d);
        u_scale = u_scale.max(s);
    }
    Ok(FixedPointResidual {
        sign: sweep.sign,
        h: spec.h,
        residual,
        u_scale,
        time,
        lambda_nodes: sweep.nodes.len(),
    })
}

/// Smooth radial bump `exp(−1/(1−s²))`, `s = (r − r₀)/width`, normalized in
/// L¹ on the grid.
pub fn radial_bump(grid: &RadialGrid, r0: f64, width: f64) -> Result<DVector<f64>> {
    let f = DVector::from_iterator(
        grid.len(),
        grid.nodes.iter().map(|&r| {
            let s = (r - r0) / width;
            if s.abs() < 1.0 {
                (-1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        }),
    );
    let norm = grid.l1_norm(&f);
    if !(norm > 0.0) {
        return Err(Error::domain(
            "radial_bump",
            format!("bump at r0 = {r0} of width {width} misses every grid node"),
        ));
    }
    Ok(f / norm)
}

fn series_l1(grid: &RadialGrid, series: &[DVector<C>], dt: f64) -> f64 {
    series.iter().map(|u| grid.l1_norm(u)).sum::<f64>() * dt
}

/// `∫∫|U_h^±(t) f| dt dx / ‖f‖`.
pub fn evolution_l1_quantity(sweep: &LambdaSweep, time: &TimeGrid, f: &DVector<f64>) -> f64 {
    let fc = f.map(|x| C::new(x, 0.0));
    let u = sweep.u_apply(&fc, time);
    series_l1(&sweep.grid, &u, time.dt) / sweep.grid.l1_norm(f)
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbedEstimate {
    pub h: f64,
    /// `∫‖V e^{it√G} ψ(h²G) f‖ dt / ‖f‖`
    pub value: f64,
    /// `∫∫|U_h^± f| / ‖f‖`, per sign
    pub evolution_l1: [f64; 2],
    /// `(πh)^{−1}(2π)^{−1}‖T‖ Σ_± S_h^± Q^±` with `S_h^±` the sup over `y` of
    /// `∫|V(x)|∫|A_h^±(|x−y|,t)|dtdx`
    pub chain_bound: Option<f64>,
}

/// The perturbed quantity through the convolution representation:
/// `V e^{it√G}ψ(h²G) = (iπh)^{−1}Σ_± ± (2π)^{−1} ∫ TVP_h^±(t−τ)U_h^±(τ)dτ`.
pub fn perturbed_quantity(
    sweeps: [&LambdaSweep; 2],
    symbols: [&ConvolutionSymbol; 2],
    f: &DVector<f64>,
) -> Result<PerturbedEstimate> {
    let grid = &sweeps[0].grid;
    let h = sweeps[0].h;
    let time = symbols[0].time;
    let fc = f.map(|x| C::new(x, 0.0));
    let mut total: Vec<DVector<C>> = vec![DVector::from_element(grid.len(), ZERO); time.count];
    let mut evolution_l1 = [0.0; 2];
    for (k, (sw, sym)) in sweeps.iter().zip(symbols).enumerate() {
        let u = sw.u_apply(&fc, &time);
        evolution_l1[k] = series_l1(grid, &u, time.dt) / grid.l1_norm(f);
        let y = sym.convolve(&u);
        let s = sw.sign.value();
        for (acc, ym) in total.iter_mut().zip(&y) {
            *acc += ym * C::new(s, 0.0);
        }
    }
    let pref = 1.0 / (PI * h * 2.0 * PI);
    let value = series_l1(grid, &total, time.dt) * pref / grid.l1_norm(f);
    Ok(PerturbedEstimate {
        h,
        value,
        evolution_l1,
        chain_bound: None,
    })
}

/// Same quantity straight from the λ-domain:
/// `(iπh)^{−1} ∫ e^{itλ} φ_h Σ_± ± T D^±(λ) M^±(λ) f dλ`.
pub fn perturbed_quantity_spectral(
    v: &RadialPotential,
    sweeps: [&LambdaSweep; 2],
    spec: &WaveKernelSpec,
    time: &TimeGrid,
    f: &DVector<f64>,
) -> Result<f64> {
    let grid = sweeps[0].grid.clone();
    let h = spec.h;
    let n = grid.len();
    let (lo, hi) = phi_h_support(h);
    let fc = f.map(|x| C::new(x, 0.0));
    let tc = sweeps[0].t.map(|x| C::new(x, 0.0));
    let fam = spec.cutoffs;
    let plan = FilonPlan::vector(lo, hi, n, &spec.quad, &[lo, hi], |l, out| {
        let mut acc = DVector::from_element(n, ZERO);
        for sw in sweeps {
            let d = assemble_resolvent_difference(v, &grid, l, sw.sign);
            let y = &tc * (&d.matrix * (sw.m_at(l) * &fc));
            acc += y * C::new(sw.sign.value(), 0.0);
        }
        let p = fam.phi1(h * l);
        for (o, a) in out.iter_mut().zip(acc.iter()) {
            *o = a * p;
        }
    })?;
    let vals: Vec<f64> = (0..time.count)
        .into_par_iter()
        .map(|m| {
            let mut out = vec![ZERO; n];
            plan.eval_into(time.node(m), &mut out);
            out.iter().zip(&grid.weights).map(|(z, w)| z.norm() * w).sum::<f64>()
        })
        .collect();
    Ok(vals.iter().sum::<f64>() * time.dt / (PI * h) / grid.l1_norm(f))
}

/// `σ ↦ ∫|A₁^±(σ, t)| dt` tabulated on a log grid, with power-law
/// extrapolation `σ^{−n+5/2}` below and `σ^{−(n−1)/2}` above the table.
#[derive(Clone, Debug, Serialize)]
pub struct ATimeL1Table {
    pub order: SpectralOrder,
    pub sigmas: Vec<f64>,
    pub values: Vec<f64>,
}

/// `∫|A_h^±(σ, t)| dt` with trapezoid step `step·h`.
pub fn a_time_l1(spec: &WaveKernelSpec, sigma: f64, sign: Sign, step: f64) -> Result<TimeIntegral> {
    let parts = a_kernel_integrands(spec, sigma, sign)?;
    let h = spec.h;
    uniform_time_integral(&parts, 0.0, step * h, 2.0 * sigma + 40.0 * h, 1e-6, 1e6 * h + 64.0 * sigma)
}

impl ATimeL1Table {
    pub fn build(order: SpectralOrder, cutoffs: &CutoffFamily, quad: &QuadConfig) -> Result<Self> {
        let spec = WaveKernelSpec {
            order,
            cutoffs: *cutoffs,
            h: 1.0,
            quad: *quad,
        };
        let sigmas = log_grid(1e-3, 64.0, 97);
        let values = sigmas
            .par_iter()
            .map(|&s| {
                let mut m = 0.0f64;
                for sign in Sign::both() {
                    m = m.max(a_time_l1(&spec, s, sign, 0.25)?.value);
                }
                Ok(m)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(ATimeL1Table {
            order,
            sigmas,
            values,
        })
    }

    pub fn eval(&self, sigma: f64) -> f64 {
        let n = self.order.dim_f64();
        let k = self.sigmas.len();
        if sigma <= self.sigmas[0] {
            return self.values[0] * (sigma / self.sigmas[0]).powf(2.5 - n);
        }
        if sigma >= self.sigmas[k - 1] {
            return self.values[k - 1] * (sigma / self.sigmas[k - 1]).powf(-(n - 1.0) / 2.0);
        }
        let x = sigma.ln();
        let i = self.sigmas.partition_point(|s| s.ln() <= x) - 1;
        let (x0, x1) = (self.sigmas[i].ln(), self.sigmas[i + 1].ln());
        let (y0, y1) = (self.values[i].ln(), self.values[i + 1].ln());
        (y0 + (y1 - y0) * (x - x0) / (x1 - x0)).exp()
    }

    /// `∫|A_h(σ, t)| dt = h^{2−n} F₁(σ/h)`.
    pub fn eval_h(&self, sigma: f64, h: f64) -> f64 {
        h.powf(2.0 - self.order.dim_f64()) * self.eval(sigma / h)
    }
}

/// `S_h = sup_y ∫ |V(x)| ∫|A_h(|x−y|, t)| dt dx` on the grid.
pub fn potential_a_l1(v: &RadialPotential, grid: &RadialGrid, table: &ATimeL1Table, h: f64) -> Result<f64> {
    let order = grid.order;
    let alpha = order.dim_f64() - 2.5;
    let vals: Vec<f64> = grid
        .nodes
        .par_iter()
        .map(|&rho| {
            let mut s = 0.0;
            for (&r, &w) in grid.nodes.iter().zip(&grid.weights) {
                let avg = angular_average(order, r, rho, alpha, |u| table.eval_h(u, h))?;
                s += w * v.eval(r).abs() * avg;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Coefficient of the self-referential term in the L¹(dt dx) bound for
/// `U_h^±`: `‖T‖ S_h / (2π)`.
pub fn contraction_coefficient(t_norm: f64, s_h: f64) -> f64 {
    t_norm * s_h / (2.0 * PI)
}

/// `∫‖V e^{it√G₀}ψ(h²G₀) f‖ dt / ‖f‖` with the free propagator applied
/// through the Hankel transform:
/// `u(r,t) = C∫e^{itλ}ψ(h²λ²)λ^{n−1}G(λr)(Σ_j G(λr_j)w_j f_j)dλ`,
/// `C = (2π)^{−(ν+1)}2^νΓ(ν+1)`.
pub fn free_quantity(
    v: &RadialPotential,
    spec: &WaveKernelSpec,
    grid: &RadialGrid,
    f: &DVector<f64>,
    step: f64,
) -> Result<TimeIntegral> {
    let order = spec.order;
    let h = spec.h;
    let n = grid.len();
    let nu = order.nu();
    let c = (2.0 * PI).powf(-(nu + 1.0)) * 2f64.powf(nu) * order.gamma_nu_plus_one();
    let (lo, hi) = crate::kernels::psi_h_support(h);
    let fam = spec.cutoffs;
    let p = order.dimension() as i32 - 1;
    let src: Vec<(f64, f64)> = grid
        .nodes
        .iter()
        .zip(&grid.weights)
        .zip(f.iter())
        .filter(|(_, fj)| **fj != 0.0)
        .map(|((r, w), fj)| (*r, w * fj))
        .collect();
    let vw: Vec<f64> = grid
        .nodes
        .iter()
        .zip(&grid.weights)
        .map(|(&r, &w)| v.eval(r).abs() * w)
        .collect();
    let norm = grid.l1_norm(f);
    if vw.iter().all(|&x| x == 0.0) {
        return Ok(TimeIntegral {
            value: 0.0,
            extent: 0.0,
            tail: 0.0,
            evaluations: 0,
        });
    }
    let amp = |l: f64, out: &mut [C]| {
        let hank: f64 = src.iter().map(|(r, wf)| reduced_jnu(order, l * r) * wf).sum();
        let a = c * fam.psi(h * h * l * l) * l.powi(p) * hank;
        for (o, &r) in out.iter_mut().zip(&grid.nodes) {
            *o = C::new(a * reduced_jnu(order, l * r), 0.0);
        }
    };
    let dt = step * h;
    let r = uniform_integral_with(
        0.0,
        dt,
        2.0 * grid.r_max + 20.0 * h,
        1e-6,
        64.0 * (grid.r_max + 20.0 * h),
        |count| {
            let rows = uniform_samples(lo, hi, dt, count, n, amp)?;
            Ok((0..count)
                .map(|k| rows.iter().zip(&vw).map(|(row, w)| row[k].norm() * w).sum())
                .collect())
        },
    )?;
    Ok(TimeIntegral {
        value: r.value / norm,
        ..r
    })
}

/// Radial grid used for the free quantity: the radius grows with `h` so the
/// wave scale `h` stays resolved.
pub fn free_estimate_grid(order: SpectralOrder, h: f64) -> Result<RadialGrid> {
    RadialGrid::geometric(order, 240, 1e-3, (16.0 * h).max(64.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{assemble_vdelta_inv, coupling_for_q, solve_t};
    use crate::kernels::{a_kernel_parts, eval_parts};
    use crate::verify::time_integral;

    fn cmax(m: &DMatrix<C>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    struct Setup {
        v: RadialPotential,
        t: TSolve,
        spec: WaveKernelSpec,
    }

    fn setup(c_q: f64, h: f64, nodes: usize) -> Setup {
        let o = SpectralOrder::new(4).unwrap();
        let grids = BornGrids {
            radial_nodes: nodes,
            ..BornGrids::default()
        };
        let grid = grids.radial_grid(o).unwrap();
        let c = if c_q == 0.0 { 0.0 } else { coupling_for_q(3.0, &grid, c_q).unwrap() };
        let v = RadialPotential::new(c, 3.0).unwrap();
        let t = solve_t(&assemble_vdelta_inv(&v, &grid)).unwrap();
        Setup {
            v,
            t,
            spec: WaveKernelSpec::new(o, h),
        }
    }

    #[test]
    fn chebyshev_basis_reproduces_polynomials() {
        let b = ChebyshevBasis::new(0.5, 2.0, 9);
        let mut l = vec![0.0; 9];
        for x in [0.5, 0.77, 1.3, 2.0] {
            b.eval_into(x, &mut l);
            let p: f64 = (0..9).map(|k| l[k] * b.node(k).powi(5)).sum();
            assert!((p - x.powi(5)).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_norm_scaling_and_zero() {
        let s = setup(0.5, 16.0, 48);
        let grid = s.t.t.grid.clone();
        let zero = RadialPotential::new(0.0, 3.0).unwrap();
        assert_eq!(lambda_perturbation_norm(&zero, &grid, 0.1, Sign::Plus), 0.0);
        let ratios: Vec<f64> = [0.1, 0.025, 0.00625]
            .iter()
            .map(|&l| lambda_perturbation_norm(&s.v, &grid, l, Sign::Plus) / l.sqrt())
            .collect();
        assert!(ratios[2] <= 1.1 * ratios[1] && ratios[1] <= 1.1 * ratios[0], "{ratios:?}");
        for l in [0.01, 0.1, 0.5, 1.0] {
            assert!(resolvent_norm(&s.v, &grid, l, Sign::Minus).is_finite());
        }
    }

    #[test]
    fn zero_potential_sweep_is_identity() {
        let s = setup(0.0, 16.0, 24);
        let sw = build_lambda_sweep(&s.v, &s.t, &s.spec, Sign::Plus, 9).unwrap();
        let id = DMatrix::<C>::identity(24, 24);
        for m in &sw.m {
            assert!(cmax(&(m - &id)) < 1e-15);
        }
        let time = BornGrids::default().time_grid(16.0).unwrap();
        let time = TimeGrid { count: 256, ..time };
        let r = fixed_point_residual(&s.v, &sw, &s.spec, time).unwrap();
        assert!(r.residual < 1e-12, "{}", r.residual);
        // U = φ̂_h · I
        let ph = phi_hat_plan(&s.spec.cutoffs, 16.0, &s.spec.quad).unwrap();
        let u = sw.u_at(3.0);
        assert!(cmax(&(u - id * ph.eval(3.0).0)) < 1e-12);
    }

    #[test]
    fn sweep_identities() {
        let s = setup(0.5, 16.0, 48);
        let w = &s.t.t.grid.weights;
        let tn = s.t.t.l1_norm();
        let tc = s.t.t.to_complex().matrix;
        for sign in Sign::both() {
            let sw = build_lambda_sweep(&s.v, &s.t, &s.spec, sign, 17).unwrap();
            assert!(sw.info.iter().all(|i| i.residual <= 1e-10));
            // smallest node against the first-order Neumann bound
            let k = sw
                .info
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.lambda.total_cmp(&b.1.lambda))
                .unwrap()
                .0;
            let i = sw.info[k];
            let diff = weighted_column_norm(&(&sw.m[k] - &tc), w);
            assert!(diff <= tn * tn * i.perturbation / (1.0 - i.q));
            // T − M = T D M at a middle node
            let mid = sw.nodes.len() / 2;
            let l = sw.nodes[mid];
            let d = assemble_resolvent_difference(&s.v, &s.t.t.grid, l, sign).matrix;
            let lhs = &tc - &sw.m[mid];
            let rhs = &tc * d * &sw.m[mid];
            assert!(cmax(&(lhs - rhs)) < 1e-9);
        }
    }

    #[test]
    fn conjugation_symmetry() {
        let s = setup(0.5, 16.0, 32);
        let p = build_lambda_sweep(&s.v, &s.t, &s.spec, Sign::Plus, 17).unwrap();
        let m = build_lambda_sweep(&s.v, &s.t, &s.spec, Sign::Minus, 17).unwrap();
        for t in [5.0, 40.0] {
            let a = m.u_at(-t);
            let b = p.u_at(t).map(|z| z.conj());
            assert!(cmax(&(a - &b)) < 1e-12 * cmax(&b).max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn convolution_matches_spectral_form() {
        let s = setup(0.5, 8.0, 32);
        let grids = BornGrids::default();
        let time = grids.time_grid(8.0).unwrap();
        let grid = s.t.t.grid.clone();
        let sw: Vec<LambdaSweep> = Sign::both()
            .iter()
            .map(|&sg| build_lambda_sweep(&s.v, &s.t, &s.spec, sg, 33).unwrap())
            .collect();
        let sy: Vec<ConvolutionSymbol> = Sign::both()
            .iter()
            .map(|&sg| ConvolutionSymbol::new(&s.v, &s.t.t.matrix, &grid, &s.spec, sg, time))
            .collect();
        let f = radial_bump(&grid, 1.0, 0.25).unwrap();
        let a = perturbed_quantity([&sw[0], &sw[1]], [&sy[0], &sy[1]], &f).unwrap();
        let b = perturbed_quantity_spectral(&s.v, [&sw[0], &sw[1]], &s.spec, &time, &f).unwrap();
        assert!((a.value - b).abs() < 1e-3 * b, "{} {}", a.value, b);
    }

    #[test]
    fn a_table_matches_direct_integral() {
        let o = SpectralOrder::new(4).unwrap();
        let fam = CutoffFamily::default();
        let q = QuadConfig::default();
        let table = ATimeL1Table::build(o, &fam, &q).unwrap();
        let spec = WaveKernelSpec::new(o, 1.0);
        for s in [0.02, 0.7, 9.0] {
            // Filon evaluations on a trapezoid grid, independent of the FFT path
            let d = Sign::both()
                .iter()
                .map(|&sg| {
                    let parts = a_kernel_parts(&spec, s, sg).unwrap();
                    let f = |t: f64| eval_parts(&parts, t).0.norm();
                    time_integral(f, 0.0, 0.1, 2.0 * s + 40.0, 1e-5, 1e5).unwrap().value
                })
                .fold(0.0, f64::max);
            assert!((table.eval(s) - d).abs() < 0.01 * d, "{s} {} {d}", table.eval(s));
        }
        // h-scaling of the time integral
        let s4 = WaveKernelSpec::new(o, 4.0);
        let d4 = a_time_l1(&s4, 2.8, Sign::Plus, 0.25).unwrap().value;
        let d1 = a_time_l1(&spec, 0.7, Sign::Plus, 0.25).unwrap().value;
        assert!((d4 - d1 * 4f64.powi(-2)).abs() < 1e-8 * d4);
    }

    #[test]
    fn free_quantity_zero_potential() {
        let o = SpectralOrder::new(4).unwrap();
        let spec = WaveKernelSpec::new(o, 1.0);
        let grid = RadialGrid::geometric(o, 60, 1e-3, 16.0).unwrap();
        let f = radial_bump(&grid, 1.0, 0.25).unwrap();
        let zero = RadialPotential::new(0.0, 3.0).unwrap();
        assert_eq!(free_quantity(&zero, &spec, &grid, &f, 0.1).unwrap().value, 0.0);
    }
}
