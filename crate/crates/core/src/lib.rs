//! Latent sub-population models for a single observed epidemic series.
//!
//! The observed weekly infection counts are explained either as a
//! non-negative combination of pre-built curves ([`dictionary`]) or as a
//! mixture of `M` fittable curves ([`mixture`]). [`eval`] scores both against
//! classical SIR ([`sir`]) and a last-value baseline, on in-sample modeling and
//! on walk-forward forecasting.
//!
//! Numerical kernels are generic over [`Scalar`] (`f32` or `f64`); fitting and
//! evaluation run in `f64`. Concrete aliases for both precisions are exported
//! at the crate root.

pub mod dictionary;
pub mod eval;
pub mod ingest;
pub mod mixture;
pub mod nnls;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod series;
pub mod sir;
pub mod synth;

pub use dictionary::{
    build_gaussian_dictionary, build_sir_dictionary, dict_fit, dict_predict, solve_nnls_ridge,
    AtomMeta, DictFit, Dictionary, DictionaryError, Weights,
};
pub use rng::{SeededRng, DEFAULT_SEED};
pub use scalar::Scalar;
pub use series::{SeriesError, WeeklySeries};
pub use sir::{
    fit_classical, simulate, simulate_shifted, step, ClassicalFit, ShiftedSirParams, SirError,
    SirParams, SirState, SirTrajectory,
};

pub type SirState32 = SirState<f32>;
pub type SirState64 = SirState<f64>;
pub type SirParams32 = SirParams<f32>;
pub type SirParams64 = SirParams<f64>;
pub type ShiftedSirParams32 = ShiftedSirParams<f32>;
pub type ShiftedSirParams64 = ShiftedSirParams<f64>;
pub type Dictionary32 = Dictionary<f32>;
pub type Dictionary64 = Dictionary<f64>;
pub type Weights32 = Weights<f32>;
pub type Weights64 = Weights<f64>;
