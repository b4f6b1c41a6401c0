//! Single-transform linear systems `R = ΛΞ + Υ`, `Ξ = VX`.

use crate::engine::{Constraint, Side, SystemGraph, Truth};
use crate::error::{Error, Result};
use crate::estimators::{AnchorSpec, DiscretePrior, Prototype};
use crate::linops::{permuted_dft, sample_haar, OrthogonalOperator};
use crate::relay::gen_singular_values;
use crate::rng::{derive_seed, stream};
use crate::scalar::Scalar;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// How the orthogonal factor of a channel is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorChoice {
    /// Randomly permuted fast unitary transform.
    #[default]
    Dft,
    /// Dense Haar matrix.
    Haar,
}

pub fn draw_operator<S: Scalar>(choice: OperatorChoice, n: usize, seed: u64) -> Result<OrthogonalOperator<S>> {
    match choice {
        OperatorChoice::Dft => permuted_dft(n, seed),
        OperatorChoice::Haar => sample_haar(n, seed),
    }
}

/// Graph of `r = diag(gains) Ξ + υ` (first `gains.len()` rows observed),
/// `Ξ = VX`, `X` drawn from `prior`.
pub fn single_transform_graph<S: Scalar>(
    op: OrthogonalOperator<S>,
    gains: Vec<f64>,
    noise_var: f64,
    prior: DiscretePrior<S>,
) -> SystemGraph<S> {
    let n = op.dim();
    let m = prior.m();
    let truth_cov = prior.covariance();
    let constraints = vec![
        Constraint {
            name: "prior".into(),
            side: Side::Phi,
            ports: vec![0],
            prototype: Prototype::Discrete { dim: n, prior },
        },
        Constraint {
            name: "channel".into(),
            side: Side::Gamma,
            ports: vec![0],
            prototype: Prototype::Anchor(AnchorSpec {
                dim: n,
                gains,
                noise_var,
                prior: Some(truth_cov.clone()),
                truth_cov,
                observation: 0,
            }),
        },
    ];
    SystemGraph::new(vec![op], m, constraints)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmvConfig {
    pub n: usize,
    /// Observed rows; at most `n`.
    pub rows: usize,
    pub m: usize,
    pub kappa: f64,
    pub snr_db: f64,
    pub operator: OperatorChoice,
    pub seed: u64,
}

/// Draw one instance of the single-transform system with BPSK sources and
/// a geometric singular-value ladder normalised to `Σλ² = n`.
pub fn build_smv<S: Scalar>(cfg: &SmvConfig) -> Result<(SystemGraph<S>, Truth<S>)> {
    if cfg.rows == 0 || cfg.rows > cfg.n || cfg.m == 0 {
        return Err(Error::Config(format!(
            "need 1 <= rows <= n and M >= 1 (rows {}, n {}, M {})",
            cfg.rows, cfg.n, cfg.m
        )));
    }
    if !cfg.snr_db.is_finite() && cfg.snr_db != f64::INFINITY {
        return Err(Error::Config("SNR must be finite or +inf".into()));
    }
    let gains = gen_singular_values(cfg.rows, cfg.n as f64, cfg.kappa)?;
    let v = 10f64.powf(-cfg.snr_db / 10.0);
    let op = draw_operator::<S>(cfg.operator, cfg.n, derive_seed(cfg.seed, &[1]))?;
    let prior = DiscretePrior::<S>::bpsk(cfg.m);
    let x = prior.sample(&mut stream(derive_seed(cfg.seed, &[2])), cfg.n);
    let xi = op.forward(&x)?;
    let mut rng = stream(derive_seed(cfg.seed, &[3]));
    let mut r = DMatrix::zeros(cfg.n, cfg.m);
    for i in 0..cfg.rows {
        for j in 0..cfg.m {
            let noise = if v > 0.0 { S::gaussian(&mut rng, v) } else { S::zero() };
            r[(i, j)] = xi[(i, j)] * S::from_re(gains[i]) + noise;
        }
    }
    let graph = single_transform_graph(op, gains, v, prior);
    Ok((graph, Truth { x: vec![x], xi: vec![xi], observations: vec![r] }))
}
