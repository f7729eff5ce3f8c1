//! Constructive polynomial approximation: Runge and C¹ Mergelyan fits on
//! admissible sets, almost-geodesic bridges, and the patching demonstrations.

mod arnoldi;
mod bridge;
mod fit;
mod patch;

pub use arnoldi::{ArnoldiBasis, ArnoldiPoly};
pub use bridge::{build_bridge, hermite_bridge, BridgeMap};
pub use fit::{fit_scattered, mergelyan_c1_fit, mergelyan_c1_fit_until, runge_polyfit, FitOptions, FitReport, FitSet};
pub use patch::{extend_doubling, weak_oka1_patch, DoublingReport, PatchLift, PatchOptions, PatchReport};
