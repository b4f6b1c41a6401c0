use super::message::Domain;
use crate::error::{Error, Result};
use crate::scalar::{dot_re, norm2, Scalar};
use nalgebra::DMatrix;
use serde::Serialize;

/// Empirical GS errors of every estimator call on one side of one port.
/// `inputs[c]` and `outputs[c]` belong to call `c` (iteration `c + 1`).
#[derive(Clone, Debug)]
pub struct DomainLedger<S: Scalar> {
    pub truth: DMatrix<S>,
    pub inputs: Vec<DMatrix<S>>,
    pub outputs: Vec<DMatrix<S>>,
}

#[derive(Clone, Debug)]
struct PortLedger<S: Scalar> {
    xi: DomainLedger<S>,
    x: DomainLedger<S>,
}

/// Per-port error history kept for audits. Retention is opt-in and capped
/// at `max_calls` iterations.
#[derive(Clone, Debug)]
pub struct ErrorLedger<S: Scalar> {
    ports: Vec<PortLedger<S>>,
    max_calls: usize,
    enabled: bool,
}

impl<S: Scalar> ErrorLedger<S> {
    /// `truth[k] = (Ξ_k, X_k)`.
    pub fn new(truth: Vec<(DMatrix<S>, DMatrix<S>)>, max_calls: usize) -> Self {
        let ports = truth
            .into_iter()
            .map(|(xi, x)| PortLedger {
                xi: DomainLedger { truth: xi, inputs: vec![], outputs: vec![] },
                x: DomainLedger { truth: x, inputs: vec![], outputs: vec![] },
            })
            .collect();
        Self { ports, max_calls, enabled: true }
    }

    pub fn disabled() -> Self {
        Self { ports: vec![], max_calls: 0, enabled: false }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn ports(&self) -> usize {
        self.ports.len()
    }

    pub fn domain(&self, port: usize, domain: Domain) -> Option<&DomainLedger<S>> {
        self.ports.get(port).map(|p| match domain {
            Domain::Xi => &p.xi,
            Domain::X => &p.x,
        })
    }

    pub fn record(&mut self, port: usize, domain: Domain, z_in: DMatrix<S>, z_out: DMatrix<S>) -> Result<()> {
        if !self.enabled {
            return Err(Error::Unavailable("error ledger is disabled".into()));
        }
        let max = self.max_calls;
        let p = self.ports.get_mut(port).ok_or_else(|| Error::Index(format!("ledger has no port {port}")))?;
        let d = match domain {
            Domain::Xi => &mut p.xi,
            Domain::X => &mut p.x,
        };
        if d.inputs.len() < max {
            d.inputs.push(z_in);
            d.outputs.push(z_out);
        }
        Ok(())
    }

    /// `A^t = [Ξ, Z_Ξ^{out,1..t}, Z_Ξ^{in,2..t+1}]`, indexed by call: the Ξ-side stack whose
    /// image under `V^H` is [`ErrorLedger::b_stack`].
    pub fn a_stack(&self, port: usize, t: usize) -> Result<DMatrix<S>> {
        let d = self.domain(port, Domain::Xi).ok_or_else(|| Error::Index(format!("no port {port}")))?;
        if d.inputs.len() < t + 1 {
            return Err(Error::Unavailable(format!("A stack at t={t} needs {} Γ calls", t + 1)));
        }
        let mut parts = vec![&d.truth];
        parts.extend(d.outputs[..t].iter());
        parts.extend(d.inputs[1..=t].iter());
        Ok(hstack(&parts))
    }

    /// `B^t = [X, Z_X^{in,2..t+1}, Z_X^{out,1..t}]`.
    pub fn b_stack(&self, port: usize, t: usize) -> Result<DMatrix<S>> {
        let d = self.domain(port, Domain::X).ok_or_else(|| Error::Index(format!("no port {port}")))?;
        if d.inputs.len() < t + 1 {
            return Err(Error::Unavailable(format!("B stack at t={t} needs {} Φ calls", t + 1)));
        }
        let mut parts = vec![&d.truth];
        parts.extend(d.inputs[1..=t].iter());
        parts.extend(d.outputs[..t].iter());
        Ok(hstack(&parts))
    }
}

fn hstack<S: Scalar>(parts: &[&DMatrix<S>]) -> DMatrix<S> {
    let rows = parts[0].nrows();
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        out.columns_mut(c, p.ncols()).copy_from(*p);
        c += p.ncols();
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct CosineEntry {
    pub port: usize,
    pub domain: Domain,
    pub t_out: usize,
    /// Iteration of the input error, or 0 for the ground truth.
    pub t_in: usize,
    pub col_out: usize,
    pub col_in: usize,
    pub cosine: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KurtosisEntry {
    pub port: usize,
    pub domain: Domain,
    pub t: usize,
    pub col: usize,
    pub excess: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    pub t: usize,
    pub in_out: Vec<CosineEntry>,
    pub truth_out: Vec<CosineEntry>,
    pub kurtosis: Vec<KurtosisEntry>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct AuditRow {
    pub trial: usize,
    pub t: usize,
    pub metric: String,
    pub value: f64,
}

impl serde::Serialize for Domain {
    fn serialize<Se: serde::Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        s.serialize_str(match self {
            Domain::Xi => "xi",
            Domain::X => "x",
        })
    }
}

impl AuditReport {
    pub fn max_abs_in_out(&self) -> f64 {
        self.in_out.iter().map(|e| e.cosine.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_kurtosis(&self) -> f64 {
        self.kurtosis.iter().filter_map(|k| k.excess).map(f64::abs).fold(0.0, f64::max)
    }

    pub fn rows(&self, trial: usize) -> Vec<AuditRow> {
        let dom = |d: Domain| if d == Domain::Xi { "xi" } else { "x" };
        let mut rows = Vec::new();
        for e in &self.in_out {
            rows.push(AuditRow {
                trial,
                t: self.t,
                metric: format!("in_out_cos/port{}/{}/tin{}/{}{}", e.port, dom(e.domain), e.t_in, e.col_out, e.col_in),
                value: e.cosine,
            });
        }
        for e in &self.truth_out {
            rows.push(AuditRow {
                trial,
                t: self.t,
                metric: format!("truth_out_cos/port{}/{}/{}{}", e.port, dom(e.domain), e.col_out, e.col_in),
                value: e.cosine,
            });
        }
        for k in &self.kurtosis {
            if let Some(v) = k.excess {
                rows.push(AuditRow {
                    trial,
                    t: self.t,
                    metric: format!("in_kurtosis/port{}/{}/{}", k.port, dom(k.domain), k.col),
                    value: v,
                });
            }
        }
        rows
    }
}

fn cosine<S: Scalar>(f: &[S], g: &[S]) -> f64 {
    let nf = norm2(f);
    let ng = norm2(g);
    if nf == 0.0 || ng == 0.0 {
        return 0.0;
    }
    dot_re(f, g) / (nf * ng).sqrt()
}

/// Excess kurtosis of the real components of a column (real and imaginary
/// parts pooled in complex mode). `None` for an all-zero column.
pub(crate) fn excess_kurtosis<S: Scalar>(col: &[S]) -> Option<f64> {
    let mut vals: Vec<f64> = col.iter().map(|v| v.re_f64()).collect();
    if S::IS_COMPLEX {
        vals.extend(col.iter().map(|v| v.im_f64()));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in &vals {
        let d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        return None;
    }
    Some(m4 / (m2 * m2) - 3.0)
}

fn col<S: Scalar>(m: &DMatrix<S>, j: usize) -> &[S] {
    let n = m.nrows();
    &m.as_slice()[j * n..(j + 1) * n]
}

/// Orthogonality and Gaussianity audit at iteration `t` (1-based): the
/// normalized correlation between each output error of iteration `t` and
/// every input error of iterations `1..=t`, output errors against the truth,
/// and the excess kurtosis of each input-error column at `t`.
pub fn audit_orthogonality<S: Scalar>(ledger: &ErrorLedger<S>, t: usize) -> Result<AuditReport> {
    if !ledger.is_enabled() {
        return Err(Error::Unavailable("auditing requires an enabled error ledger".into()));
    }
    if t == 0 {
        return Err(Error::Index("audit iterations start at 1".into()));
    }
    let mut report = AuditReport { t, ..Default::default() };
    for port in 0..ledger.ports() {
        for domain in [Domain::Xi, Domain::X] {
            let d = ledger.domain(port, domain).expect("port in range");
            if d.outputs.len() < t {
                return Err(Error::Unavailable(format!(
                    "port {port} {domain:?} has only {} iterations",
                    d.outputs.len()
                )));
            }
            let out = &d.outputs[t - 1];
            let m = out.ncols();
            for t_in in 1..=t {
                let zin = &d.inputs[t_in - 1];
                for a in 0..m {
                    for b in 0..m {
                        report.in_out.push(CosineEntry {
                            port,
                            domain,
                            t_out: t,
                            t_in,
                            col_out: a,
                            col_in: b,
                            cosine: cosine(col(out, a), col(zin, b)),
                        });
                    }
                }
            }
            for a in 0..m {
                for b in 0..m {
                    report.truth_out.push(CosineEntry {
                        port,
                        domain,
                        t_out: t,
                        t_in: 0,
                        col_out: a,
                        col_in: b,
                        cosine: cosine(col(out, a), col(&d.truth, b)),
                    });
                }
                report.kurtosis.push(KurtosisEntry {
                    port,
                    domain,
                    t,
                    col: a,
                    excess: excess_kurtosis(col(&d.inputs[t - 1], a)),
                });
            }
        }
    }
    Ok(report)
}
