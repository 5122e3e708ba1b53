//! Post-processing of trajectories: profiles, norms, decay fits and the
//! scattering detectors.

mod dispersive;
mod fit;
mod norms;
mod profile;
mod remainder;
mod scattering;

pub use dispersive::{dispersive_estimate_check, DispersiveReport, DispersiveRow};
pub use fit::{decay_fit, DecayFit};
pub use norms::{record, records, xt_norm, DiagnosticsRecord, FitConfig, XtNorm};
pub use profile::{profile, profiles, ProfileSnapshot};
pub use remainder::{
    f_identity_check, remainder_exact, remainder_fd, remainder_fd_orbitals, remainder_quadrature, remainder_scale,
    restrict_profile, sup_aggregate, FIdentityReport, COARSE_MAX_POINTS,
};
pub use scattering::{
    operator_scattering, phase_drift, scattering_cauchy, CauchyDistances, OperatorScattering, PhaseDrift,
};
