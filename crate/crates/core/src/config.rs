//! Experiment configuration: one TOML file, every field defaulted, so an
//! empty file reproduces the acceptance runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cutoffs::CutoffFamily;
use crate::duhamel::BornGrids;
use crate::error::{Error, Result};
use crate::oscint::QuadConfig;
use crate::potentials::RadialPotential;
use crate::specfun::SpectralOrder;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    /// `δ` in `|V(x)| ≤ C⟨x⟩^{−δ}`
    pub decay: f64,
    /// coupling chosen so that `‖VΔ⁻¹‖ = neumann_q` on the radial grid
    pub neumann_q: f64,
    /// explicit coupling; overrides `neumann_q`
    pub coupling: Option<f64>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            decay: 3.0,
            neumann_q: 0.5,
            coupling: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// relative defect of the exact scaling laws
    pub scaling: f64,
    /// allowed distance of fitted slopes from the predicted exponent
    pub slope: f64,
    /// Newtonian constant at `λ = 0`
    pub newton: f64,
    /// Neumann series against direct solve
    pub solve_agreement: f64,
    /// Filon against adaptive Gauss–Kronrod, relative to `∫|g|`
    pub quadrature: f64,
    /// fixed-point residual on the default grids
    pub residual: f64,
    /// required residual decrease factor under refinement
    pub residual_decrease: f64,
    /// relative agreement of the h-transfer identity for time integrals
    pub transfer: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            scaling: 1e-9,
            slope: 0.1,
            newton: 1e-10,
            solve_agreement: 1e-9,
            quadrature: 1e-8,
            residual: 1e-4,
            residual_decrease: 4.0,
            transfer: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// space dimension, 4 or 5
    pub n: u32,
    /// cutoff family parameter
    pub a: f64,
    /// h-sweep for the perturbed quantities, ascending
    pub h: Vec<f64>,
    pub potential: PotentialConfig,
    pub grids: BornGrids,
    pub quad: QuadConfig,
    pub tolerances: Tolerances,
    /// seed for the randomized quadrature cross-check
    pub seed: u64,
    /// names of the checks to run; empty selects all
    pub checks: Vec<String>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 4,
            a: CutoffFamily::default().a,
            h: vec![4.0, 8.0, 16.0, 32.0],
            potential: PotentialConfig::default(),
            grids: BornGrids::default(),
            quad: QuadConfig::default(),
            tolerances: Tolerances::default(),
            seed: 20_240_917,
            checks: vec![],
            out: PathBuf::from("out"),
        }
    }
}

fn invalid(field: &str, detail: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        line: None,
        detail: detail.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<document>".to_string());
            Error::Config {
                field,
                line,
                detail: msg,
            }
        })?;
        cfg.validate().map_err(|e| match e {
            Error::Config { field, detail, .. } => Error::Config {
                line: field_line(text, &field),
                field,
                detail,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            field: "--config".to_string(),
            line: None,
            detail: format!("{}: {e}", path.display()),
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.n, 4 | 5) {
            return Err(invalid(
                "n",
                format!("{} is not a supported dimension (4 or 5)", self.n),
            ));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(invalid("a", "must be positive"));
        }
        if self.h.is_empty() {
            return Err(invalid("h", "must list at least one value"));
        }
        if self.h.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(invalid("h", "values must be positive"));
        }
        if self.h.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("h", "must be sorted ascending without repeats"));
        }
        let p = &self.potential;
        if !(p.decay > 2.0 && p.decay.is_finite()) {
            return Err(invalid("potential.decay", "must exceed 2"));
        }
        if !(p.neumann_q > 0.0 && p.neumann_q < 1.0) {
            return Err(invalid("potential.neumann_q", "must lie in (0, 1)"));
        }
        if let Some(c) = p.coupling {
            if !c.is_finite() {
                return Err(invalid("potential.coupling", "must be finite"));
            }
        }
        let g = &self.grids;
        if g.radial_nodes < 8 {
            return Err(invalid("grids.radial_nodes", "must be at least 8"));
        }
        if !(g.r_min > 0.0 && g.r_max > g.r_min) {
            return Err(invalid("grids.r_max", "need 0 < r_min < r_max"));
        }
        if g.lambda_nodes < 3 {
            return Err(invalid("grids.lambda_nodes", "must be at least 3"));
        }
        if !g.time_nodes.is_power_of_two() || g.time_nodes < 64 {
            return Err(invalid("grids.time_nodes", "must be a power of two, at least 64"));
        }
        if !(g.time_step > 0.0) {
            return Err(invalid("grids.time_step", "must be positive"));
        }
        self.quad.validate().map_err(|e| invalid("quad", e.to_string()))?;
        let t = &self.tolerances;
        for (name, v) in [
            ("scaling", t.scaling),
            ("slope", t.slope),
            ("newton", t.newton),
            ("solve_agreement", t.solve_agreement),
            ("quadrature", t.quadrature),
            ("residual", t.residual),
            ("residual_decrease", t.residual_decrease),
            ("transfer", t.transfer),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(&format!("tolerances.{name}"), "must be positive"));
            }
        }
        Ok(())
    }

    pub fn order(&self) -> SpectralOrder {
        SpectralOrder::new(self.n).expect("validated")
    }

    pub fn cutoffs(&self) -> CutoffFamily {
        CutoffFamily { a: self.a }
    }

    pub fn selected(&self, check: &str) -> bool {
        self.checks.is_empty() || self.checks.iter().any(|c| c == check)
    }

    /// The configured potential; the coupling is solved for when only
    /// `neumann_q` is given.
    pub fn potential(&self) -> Result<RadialPotential> {
        let p = &self.potential;
        let c = match p.coupling {
            Some(c) => c,
            None => {
                let grid = self.grids.radial_grid(self.order())?;
                crate::potentials::coupling_for_q(p.decay, &grid, p.neumann_q)?
            }
        };
        RadialPotential::new(c, p.decay)
    }
}

/// Line of `key = …` for a dotted field path such as `grids.r_max`.
fn field_line(text: &str, field: &str) -> Option<usize> {
    let (table, key) = match field.rsplit_once('.') {
        Some((t, k)) => (t, k),
        None => ("", field),
    };
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(h) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        if current == table {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(
            ExperimentConfig::from_toml("").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn unsupported_dimension_names_field_and_line() {
        let err = ExperimentConfig::from_toml("a = 0.125\nn = 7\n").unwrap_err();
        match err {
            Error::Config { field, line, .. } => {
                assert_eq!(field, "n");
                assert_eq!(line, Some(2));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn nested_and_syntax_errors() {
        let err = ExperimentConfig::from_toml("[grids]\nr_min = 1.0\nr_max = 0.5\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref field, line: Some(3), .. } if field == "grids.r_max"));
        let err = ExperimentConfig::from_toml("n = 4\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref field, line: Some(2), .. } if field == "bogus"));
        let err = ExperimentConfig::from_toml("h = [8.0, 4.0]").unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::default();
        c.n = 5;
        c.h = vec![2.0, 3.0];
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }
}
