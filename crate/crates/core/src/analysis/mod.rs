//! Metrics derived from training records, activations and random features.

mod fit;
mod gaps;
mod hermite;
mod smin;

pub use fit::{fit_decay, fit_decay_default, least_squares, loglog_slope, pl_trace, DecayFit, LineFit, PlEntry, PlTrace, PL_LOSS_FLOOR};
pub use gaps::{gap_stats, weight_profile, GapStats, ProfileCurve, ProfileEntry, WeightBlock, WeightProfile};
pub use hermite::{hermite_coefficients, hermite_values, HermiteSpectrum};
pub use smin::{sigma_wx_smin, sigma_wx_smin_probe, SminLevel, SminProbe};
