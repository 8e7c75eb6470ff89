//! Synthetic observed series built from three latent shifted-SIR sub-populations.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::ingest::default_window_start;
use crate::rng::SeededRng;
use crate::series::{SeriesError, WeeklySeries};
use crate::sir::{simulate_shifted, ShiftedSirParams};

pub const SYNTH_COUNTRY: &str = "Synthetic";
pub const SYNTH_WEEKS: usize = 52;

/// Frozen sub-populations: `(S₀, β, k)` = `(5·10⁴, 0.9, 0)`, `(3·10⁴, 0.9, 18)`,
/// `(4·10⁴, 0.75, 30)`, each with `γ = 0.5` and `C = 100`.
pub fn default_components() -> [ShiftedSirParams<f64>; 3] {
    let sub = |s0, beta, k| ShiftedSirParams {
        s0,
        beta,
        gamma: 0.5,
        c: 100.0,
        k,
    };
    [sub(5e4, 0.9, 0), sub(3e4, 0.9, 18), sub(4e4, 0.75, 30)]
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub params: Vec<ShiftedSirParams<f64>>,
    /// Infected counts of each latent sub-population, weeks `0..=weeks`.
    pub components: Vec<Vec<f64>>,
    /// What a modeler gets to see: the sum of the components.
    pub observed: WeeklySeries,
}

/// Sums the component curves. With `noise > 0` each observed week is scaled
/// by `max(0, 1 + noise·z)`, `z` standard normal drawn from `seed`.
pub fn generate(
    params: &[ShiftedSirParams<f64>],
    weeks: usize,
    noise: f64,
    seed: u64,
) -> Result<SyntheticDataset, SeriesError> {
    let components: Vec<Vec<f64>> = params
        .iter()
        .map(|p| simulate_shifted(p, weeks).expect("component shifts lie inside the horizon"))
        .collect();
    let mut observed = vec![0.0; weeks + 1];
    for c in &components {
        for (o, v) in observed.iter_mut().zip(c) {
            *o += v;
        }
    }
    if noise > 0.0 {
        let mut rng = SeededRng::new(seed, 0);
        for o in observed.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *o *= (1.0 + noise * z).max(0.0);
        }
    }
    Ok(SyntheticDataset {
        params: params.to_vec(),
        components,
        observed: WeeklySeries::new(SYNTH_COUNTRY, default_window_start(), observed)?,
    })
}

pub fn default_dataset() -> SyntheticDataset {
    generate(&default_components(), SYNTH_WEEKS, 0.0, 0)
        .expect("default synthetic parameters are valid")
}

/// Number of interior points strictly above both neighbours.
pub fn strict_local_maxima(values: &[f64]) -> usize {
    values
        .windows(3)
        .filter(|w| w[1] > w[0] && w[1] > w[2])
        .count()
}
