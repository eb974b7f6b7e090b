//! Fitting engines: alternating elastic-net/Procrustes and Adam-based
//! gradient descent for sparse PCA, plus softmax-parameterized archetypal
//! analysis, behind one configuration and result type.

mod aa;
mod elastic_net;
mod init;
mod qp;
mod sgd;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::decomp::{Generator, LossTrace, MixingSet, Problem, RegPair, DEFAULT_TOL, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::optim::AdamConfig;

pub use aa::fit_aa_sgd;
pub use elastic_net::{elastic_net_cd, elastic_net_cd_gram, ElasticNetSolution, CD_MAX_SWEEPS, CD_TOL};
pub use init::{init_pca, init_random};
pub use qp::fit_spca_qp;
pub use sgd::fit_spca_sgd;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "spca-qp")]
    SpcaQp,
    #[serde(rename = "spca-sgd")]
    SpcaSgd,
    #[serde(rename = "aa")]
    Aa,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::SpcaQp => "spca-qp",
            Method::SpcaSgd => "spca-sgd",
            Method::Aa => "aa",
        }
    }

    pub fn is_spca(self) -> bool {
        matches!(self, Method::SpcaQp | Method::SpcaSgd)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spca-qp" | "qp" => Ok(Method::SpcaQp),
            "spca-sgd" | "sgd" => Ok(Method::SpcaSgd),
            "aa" => Ok(Method::Aa),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Pca,
    Random,
}

impl Init {
    pub fn as_str(self) -> &'static str {
        match self {
            Init::Pca => "pca",
            Init::Random => "random",
        }
    }
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Init::Pca),
            "random" => Ok(Init::Random),
            other => Err(Error::InvalidArgument(format!("unknown init '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub k: usize,
    /// Ignored by archetypal analysis.
    pub reg: RegPair,
    pub method: Method,
    /// Ignored by archetypal analysis, which always starts from Gaussian logits.
    pub init: Init,
    pub seed: u64,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub window: usize,
}

impl FitConfig {
    pub fn new(k: usize, method: Method) -> Self {
        Self {
            k,
            reg: RegPair::NONE,
            method,
            init: Init::Pca,
            seed: 0,
            learning_rate: 0.01,
            max_iters: 20_000,
            tol: DEFAULT_TOL,
            window: DEFAULT_WINDOW,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be finite and >= 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        self.reg.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }

    fn check_problem(&self, problem: &Problem) -> Result<()> {
        self.validate()?;
        if self.method.is_spca() && (self.k > problem.shared_dim() || self.k > problem.tilde_dim()) {
            return Err(Error::InvalidArgument(format!(
                "K={} exceeds P={} or P̃={}",
                self.k,
                problem.shared_dim(),
                problem.tilde_dim()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub method: Method,
    pub init: Init,
    pub seed: u64,
    pub k: usize,
    pub reg: RegPair,
    pub generator: Generator,
    pub mixing: MixingSet,
    pub trace: LossTrace,
    /// The objective the engine minimized (softplus-surrogate l1 for the
    /// gradient engine, exact l1 for the alternating engine, SSE for AA).
    pub final_objective: f64,
    /// Objective with the exact `||G||_1` penalty.
    pub final_objective_exact: f64,
    pub final_sse: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Some Procrustes update or elastic-net coordinate hit a degenerate case.
    pub degenerate: bool,
    /// Worst mixing-constraint violation seen at any recorded iteration.
    pub max_constraint_violation: f64,
    pub adam: Option<AdamConfig>,
    pub wall_time: Duration,
}

/// Starting generator for a fit: either the configured initialization or a
/// warm start.
pub fn initial_generator(problem: &Problem, cfg: &FitConfig) -> Result<Generator> {
    match cfg.init {
        Init::Pca => init_pca(problem, cfg.k),
        Init::Random => Ok(init_random(cfg.k, problem.tilde_dim(), cfg.seed)),
    }
}

/// Dispatch on `cfg.method`. `start` overrides the initialization for the
/// SPCA engines.
pub fn fit(problem: &Problem, cfg: &FitConfig, start: Option<&Generator>) -> Result<FitResult> {
    match cfg.method {
        Method::SpcaQp => fit_spca_qp(problem, cfg, start),
        Method::SpcaSgd => fit_spca_sgd(problem, cfg, start),
        Method::Aa => fit_aa_sgd(problem, cfg),
    }
}
