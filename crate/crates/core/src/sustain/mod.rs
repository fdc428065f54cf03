//! Event-sequence subtype and stage inference on z-scored data.

mod events;
mod fit;
mod io;
mod mcmc;
mod model;
mod probe;

pub use events::{expected_z, expected_z_table, Event, EventSet, Sequence};
pub use fit::{fit_sustain, fit_sustain_within, SustainConfig, SustainFit};
pub use io::{load_model, save_model, write_position_csv};
pub use mcmc::{mcmc_sample, McmcResult};
pub use model::{sequence_loglik, stage_and_assign, subject_logliks, StagePosterior, SubtypeModel};
pub use probe::{
    extrapolate_iter_ms, ordering_space_log10, scaling_probe, simulate_subjects, write_probe_csv,
    ProbeConfig, ProbeRow, ProbeStatus, Simulated,
};
