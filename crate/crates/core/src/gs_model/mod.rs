//! Gram-Schmidt message model: parameters `(Θ, Σ)`, messages carrying them,
//! transport through orthogonal transforms and the error ledger used for
//! orthogonality and Gaussianity audits.

mod audit;
mod linalg;
mod message;
mod params;

pub use audit::{audit_orthogonality, AuditReport, AuditRow, CosineEntry, DomainLedger, ErrorLedger, KurtosisEntry};
pub use linalg::{hermitian_pinv, hermitian_sqrt, hermitize, min_eigenvalue, spectral_map};
pub use message::{transport_through_transform, Domain, EstimateMessage, Flow};
pub use params::{gs_fit, GsFit, GsParams, NaturalParams, SIGMA_FLOOR};
