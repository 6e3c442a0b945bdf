//! Numerical core for simulating a two-level system coupled to a lossy
//! resonator, with the loss modeled explicitly as an Ohmic bath of harmonic
//! oscillators in star geometry.
//!
//! The crate is organized bottom-up:
//!
//! - [`bath`]: Ohmic spectral density, star-geometry discretization, and the
//!   normal-mode transformation that maps resonator + bath onto an effective
//!   multimode environment seen by the spin.
//! - [`model`]: Hamiltonian assembly, both as a dense matrix (small systems)
//!   and as a matrix product operator (chain simulations).
//! - [`tnet`]: matrix product state machinery — DMRG ground-state search and
//!   TDVP real-time evolution with Krylov local integrators.
//! - [`oracle`]: dense exact-diagonalization reference implementations used
//!   to validate the tensor-network engine on small instances.
//! - [`protocols`]: the two experiment drivers — bias relaxation and linear
//!   coupling quenches — producing time series and quench records.
//! - [`analysis`]: Lambert-W evaluation, freeze-out times, Kibble-Zurek
//!   exponent algebra, and the curve fitters (stretched exponential,
//!   exponential-of-inverse-square-root divergence, power law).
//! - [`validate`]: the ED-vs-MPS equivalence suite shared by tests and the
//!   command-line `validate` subcommand.
//!
//! Units: the spin splitting Δ sets the energy scale (Δ = 1), ħ = 1, and
//! times are quoted in units of 1/Δ.

pub mod analysis;
pub mod bath;
pub mod model;
pub mod oracle;
pub mod protocols;
pub mod tnet;
pub mod validate;

pub use analysis::{
    AnalysisError, BktFit, FreezeOutResult, PowerLawFit, SecondOrderKz, StretchedFit,
    TwoLevelEstimate,
};
pub use bath::{BathError, BathParams, DiscretizedBath, EffectiveBath, GridKind};
pub use model::{ModelError, ModelParams, SiteLayout};
pub use oracle::{DenseState, EdGroundState, OracleError};
pub use protocols::{
    Engine, EngineNumerics, ProtocolError, QuenchConfig, QuenchRecord, RelaxationConfig,
    TimeSeries,
};
pub use tnet::{MpoOperator, MpsState, TnetError};
