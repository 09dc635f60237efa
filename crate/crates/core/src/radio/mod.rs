//! OFDM / ULA signal model: geometry types, delay-beam transforms, leakage
//! kernels, the pilot sensing operator and the NMSE metric.

mod grid;
mod kernel;
mod sensing;
mod transform;

pub use grid::{
    wrap_beam, ArrayGeometry, CfrSnapshot, DelayBeamSpectrum, DelayWindow, OfdmGrid, PilotPattern,
};
pub use kernel::{beam_grid, beam_kernel, beam_kernel_deriv, delay_kernel, delay_kernel_deriv, dirichlet_power};
pub use sensing::{build_sensing_model, SensingModel};
pub use transform::{
    dft_matrix, from_delay_beam, ground_truth_spectrum, nmse_db, to_delay_beam, to_delay_beam_full,
    DelayBeamTransform, NMSE_FLOOR_DB,
};
