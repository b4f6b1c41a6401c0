//! The clipped two-hop relay system and its baselines.

mod clip;
mod method1;
mod methods;
mod model;

pub use clip::{clip, clip_moments, eta, ClipMoments, ClipSpec};
pub use method1::{method1_system, Method1System};
pub(crate) use methods::mean_stderr;
pub use methods::{method_se, run_method, Method, MethodOutcome, MethodSettings, TrackingMode};
pub use model::{
    build_relay_graph, gen_singular_values, ClipTreatment, RelayConfig, RelayModel, RelayRealization, PORT_D, PORT_ETA,
    PORT_R, PORT_S,
};
