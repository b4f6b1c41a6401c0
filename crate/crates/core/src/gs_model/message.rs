use super::params::GsParams;
use crate::error::{Error, Result};
use crate::linops::{Direction, OrthogonalOperator};
use crate::scalar::Scalar;
use nalgebra::DMatrix;

/// Which side of a transform `Ξ_k = V_k X_k` a message lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Xi,
    X,
}

/// Input to or output from a local estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flow {
    In,
    Out,
}

#[derive(Clone, Debug)]
pub struct EstimateMessage<S: Scalar> {
    pub values: DMatrix<S>,
    pub gs: GsParams<S>,
    pub port: usize,
    pub domain: Domain,
    pub flow: Flow,
    pub iteration: usize,
}

impl<S: Scalar> EstimateMessage<S> {
    pub fn new(
        values: DMatrix<S>,
        gs: GsParams<S>,
        port: usize,
        domain: Domain,
        flow: Flow,
        iteration: usize,
    ) -> Result<Self> {
        if values.ncols() != gs.m() {
            return Err(Error::Dimension(format!(
                "message has {} columns but GS parameters are {}x{}",
                values.ncols(),
                gs.m(),
                gs.m()
            )));
        }
        if values.iter().any(|v| !(v.re_f64().is_finite() && v.im_f64().is_finite())) {
            return Err(Error::Numerical(format!("non-finite message at port {port}")));
        }
        Ok(Self { values, gs, port, domain, flow, iteration })
    }

    /// All-zero message with zero GS parameters.
    pub fn uninformative(n: usize, m: usize, port: usize, domain: Domain, flow: Flow) -> Self {
        Self { values: DMatrix::zeros(n, m), gs: GsParams::zeros(m), port, domain, flow, iteration: 0 }
    }
}

/// Move a message across its port's transform. Forward maps an `X`-domain
/// output to a `Ξ`-domain input; adjoint maps a `Ξ` output to an `X` input.
/// The GS parameters are copied unchanged.
pub fn transport_through_transform<S: Scalar>(
    msg: &EstimateMessage<S>,
    op: &OrthogonalOperator<S>,
    dir: Direction,
) -> Result<EstimateMessage<S>> {
    let (from, to) = match dir {
        Direction::Forward => (Domain::X, Domain::Xi),
        Direction::Adjoint => (Domain::Xi, Domain::X),
    };
    if msg.domain != from {
        return Err(Error::Dimension(format!("{dir:?} transport expects a {from:?} message, got {:?}", msg.domain)));
    }
    let flow = match msg.flow {
        Flow::In => Flow::Out,
        Flow::Out => Flow::In,
    };
    Ok(EstimateMessage {
        values: op.apply(&msg.values, dir)?,
        gs: msg.gs.clone(),
        port: msg.port,
        domain: to,
        flow,
        iteration: msg.iteration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gs_model::gs_fit;
    use crate::linops::{gaussian_matrix, identity, sample_haar};

    #[test]
    fn identity_transport_keeps_everything() {
        let v = gaussian_matrix::<f64>(6, 1, 1.0, 1);
        let gs = GsParams::scaled_identity(1, 0.7, 0.2);
        let msg = EstimateMessage::new(v.clone(), gs.clone(), 0, Domain::X, Flow::Out, 3).unwrap();
        let out = transport_through_transform(&msg, &identity(6), Direction::Forward).unwrap();
        assert_eq!(out.values, v);
        assert_eq!(out.gs, gs);
        assert_eq!(out.domain, Domain::Xi);
        assert_eq!(out.flow, Flow::In);
    }

    #[test]
    fn round_trip_and_parameter_invariance() {
        let n = 64;
        let op = sample_haar::<f64>(n, 7).unwrap();
        let x = gaussian_matrix::<f64>(n, 2, 1.0, 2);
        let xh = &x * 0.5 + gaussian_matrix::<f64>(n, 2, 0.3, 3);
        let fit = gs_fit(&x, &xh).unwrap();
        let msg = EstimateMessage::new(xh.clone(), fit.params.clone(), 1, Domain::X, Flow::Out, 1).unwrap();
        let fwd = transport_through_transform(&msg, &op, Direction::Forward).unwrap();
        let back = transport_through_transform(&fwd, &op, Direction::Adjoint).unwrap();
        assert!((&back.values - &xh).amax() < 1e-9);
        let xi = op.forward(&x).unwrap();
        let fit_xi = gs_fit(&xi, &fwd.values).unwrap();
        assert!((&fit_xi.params.theta - &fit.params.theta).amax() < 1e-8);
        assert!((&fit_xi.params.sigma - &fit.params.sigma).amax() < 1e-8);
    }

    #[test]
    fn wrong_domain_and_dimension() {
        let msg = EstimateMessage::<f64>::uninformative(4, 1, 0, Domain::Xi, Flow::Out);
        assert!(transport_through_transform(&msg, &identity(4), Direction::Forward).is_err());
        assert!(transport_through_transform(&msg, &identity(5), Direction::Adjoint).is_err());
    }
}
