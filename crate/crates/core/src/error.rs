use num_complex::Complex64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("unknown cutoff member `{0}`")]
    UnknownMember(String),

    #[error("invalid support [{lo}, {hi}]")]
    InvalidSupport { lo: f64, hi: f64 },

    #[error("quadrature tolerance not met: estimate {estimate:.3e} exceeds target {target:.3e}")]
    ToleranceNotMet {
        value: Complex64,
        estimate: f64,
        target: f64,
    },

    #[error("cost guard exceeded: |t|*width = {0:.3e}")]
    CostGuard(f64),

    #[error("time-integral tail not converged at extent {extent}: relative tail {tail:.3e}")]
    TailNotConverged { extent: f64, tail: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("non-integrable singularity: exponent {alpha} >= {limit} at r = rho")]
    NonIntegrable { alpha: f64, limit: f64 },

    #[error("non-invertible lambda node {lambda:.6e} (contraction factor {q:.3e})")]
    NonInvertibleNode { lambda: f64, q: f64 },

    #[error("non-positive sample {value:.3e} at abscissa {at}")]
    NonPositive { at: f64, value: f64 },

    #[error("config error: field `{field}`{}: {detail}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        field: String,
        line: Option<usize>,
        detail: String,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for configuration problems, as opposed to numerical failures.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
