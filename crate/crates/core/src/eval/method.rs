use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{
    default_gaussian_dictionary, default_sir_dictionary, dict_fit_values, dict_predict, AtomMeta,
    Dictionary, DictionaryError, Weights, DEFAULT_LAMBDA,
};
use crate::mixture::{
    fit_gaussian_mixture_values, fit_sir_mixture_values, gaussian_mixture_eval, sir_mixture_eval,
    GaussianMixtureFit, GsaConfig, MixtureError, SirMixtureFit, DEFAULT_COMPONENTS,
};
use crate::rng::DEFAULT_SEED;
use crate::sir::{
    fit_classical_values, simulate, teacher_forced_susceptibles, ClassicalFit, SirError, SirState,
};

/// Weeks the dictionaries are built for: a 53-point window plus four weeks of lead.
pub const DICTIONARY_WEEKS: usize = 56;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Sir,
    GaussDict,
    SirDict,
    MixGauss,
    MixSir,
    Slow,
}

impl MethodKind {
    pub const ALL: [MethodKind; 6] = [
        MethodKind::GaussDict,
        MethodKind::SirDict,
        MethodKind::Sir,
        MethodKind::MixGauss,
        MethodKind::MixSir,
        MethodKind::Slow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Sir => "sir",
            MethodKind::GaussDict => "gauss-dict",
            MethodKind::SirDict => "sir-dict",
            MethodKind::MixGauss => "mix-gauss",
            MethodKind::MixSir => "mix-sir",
            MethodKind::Slow => "slow",
        }
    }

    /// Whether the fitted model is a curve over weeks (as opposed to a state recursion).
    pub fn is_curve(self) -> bool {
        matches!(
            self,
            MethodKind::GaussDict | MethodKind::SirDict | MethodKind::MixGauss | MethodKind::MixSir
        )
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error(
    "unknown method `{0}` (expected one of sir, gauss-dict, sir-dict, mix-gauss, mix-sir, slow)"
)]
pub struct UnknownMethod(pub String);

impl FromStr for MethodKind {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Sir(#[from] SirError),
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error("history needs at least {needed} points, got {got}")]
    HistoryTooShort { needed: usize, got: usize },
    #[error("prediction for week {week} is outside the model's {available}-week horizon")]
    BeyondHorizon { week: usize, available: usize },
}

impl FitError {
    /// True when the dictionary solver hit its iteration cap.
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            FitError::Dictionary(DictionaryError::Solver(
                crate::nnls::NnlsError::NonConvergence { .. }
            ))
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub lambda: f64,
    pub components: usize,
    /// Annealing schedule for the mixtures; bounds are filled per fit.
    pub gsa: GsaConfig,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            components: DEFAULT_COMPONENTS,
            gsa: GsaConfig {
                seed: DEFAULT_SEED,
                ..GsaConfig::default()
            },
        }
    }
}

/// A modeling method ready to be fitted; dictionaries are built once and shared.
#[derive(Debug, Clone)]
pub struct Method {
    kind: MethodKind,
    config: MethodConfig,
    dictionary: Option<Arc<Dictionary<f64>>>,
}

impl Method {
    pub fn new(kind: MethodKind, config: MethodConfig) -> Result<Self, FitError> {
        let dictionary = match kind {
            MethodKind::GaussDict => Some(Arc::new(default_gaussian_dictionary(DICTIONARY_WEEKS))),
            MethodKind::SirDict => Some(Arc::new(default_sir_dictionary(DICTIONARY_WEEKS)?)),
            _ => None,
        };
        Ok(Self {
            kind,
            config,
            dictionary,
        })
    }

    /// Dictionary method over a caller-supplied dictionary.
    pub fn with_dictionary(
        kind: MethodKind,
        config: MethodConfig,
        dictionary: Arc<Dictionary<f64>>,
    ) -> Self {
        Self {
            kind,
            config,
            dictionary: Some(dictionary),
        }
    }

    pub fn kind(&self) -> MethodKind {
        self.kind
    }

    pub fn config(&self) -> &MethodConfig {
        &self.config
    }

    pub fn dictionary(&self) -> Option<&Arc<Dictionary<f64>>> {
        self.dictionary.as_ref()
    }

    /// Fits on `history` (weeks `0..history.len()`); `stream` selects the RNG
    /// substream for stochastic fits.
    pub fn fit(&self, history: &[f64], stream: u64) -> Result<FittedModel, FitError> {
        let needed = if self.kind == MethodKind::Sir { 3 } else { 2 };
        if history.len() < needed {
            return Err(FitError::HistoryTooShort {
                needed,
                got: history.len(),
            });
        }
        let gsa = GsaConfig {
            stream,
            bounds: Vec::new(),
            ..self.config.gsa.clone()
        };
        Ok(match self.kind {
            MethodKind::Slow => FittedModel::Slow,
            MethodKind::Sir => FittedModel::Sir(fit_classical_values(history)?),
            MethodKind::GaussDict | MethodKind::SirDict => {
                let dict = self
                    .dictionary
                    .clone()
                    .expect("dictionary methods carry a dictionary");
                let fit = dict_fit_values(&dict, history, self.config.lambda)?;
                FittedModel::Dictionary {
                    dictionary: dict,
                    weights: fit.weights,
                    support_size: fit.support_size,
                    objective: fit.objective,
                }
            }
            MethodKind::MixGauss => FittedModel::MixGauss(fit_gaussian_mixture_values(
                history,
                self.config.components,
                &gsa,
            )?),
            MethodKind::MixSir => FittedModel::MixSir(fit_sir_mixture_values(
                history,
                self.config.components,
                &gsa,
            )?),
        })
    }
}

/// Anything that can predict week `origin + horizon` from observations up to `origin`.
pub trait Predictor {
    fn predict(&self, observed: &[f64], origin: usize, horizon: usize) -> Result<f64, FitError>;
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Slow,
    Sir(ClassicalFit),
    Dictionary {
        dictionary: Arc<Dictionary<f64>>,
        weights: Weights<f64>,
        support_size: usize,
        objective: f64,
    },
    MixGauss(GaussianMixtureFit),
    MixSir(SirMixtureFit),
}

impl FittedModel {
    /// Fitted curve over `weeks`; `None` for state-recursive models.
    pub fn curve(&self, weeks: std::ops::Range<usize>) -> Result<Option<Vec<f64>>, FitError> {
        Ok(match self {
            FittedModel::Slow | FittedModel::Sir(_) => None,
            FittedModel::Dictionary {
                dictionary,
                weights,
                ..
            } => Some(dict_predict(dictionary, weights, weeks)?),
            FittedModel::MixGauss(fit) => Some(gaussian_mixture_eval(&fit.params, weeks)),
            FittedModel::MixSir(fit) => {
                let max_k = fit.params.components.iter().map(|c| c.k).max().unwrap_or(0);
                let all = sir_mixture_eval(&fit.params, weeks.end.saturating_sub(1).max(max_k))?;
                Some(all[weeks].to_vec())
            }
        })
    }

    pub fn objective(&self) -> Option<f64> {
        match self {
            FittedModel::Slow => None,
            FittedModel::Sir(f) => Some(f.objective),
            FittedModel::Dictionary { objective, .. } => Some(*objective),
            FittedModel::MixGauss(f) => Some(f.objective),
            FittedModel::MixSir(f) => Some(f.objective),
        }
    }

    /// Serializable description of the fitted parameters.
    pub fn record(&self, kind: MethodKind, seed: u64) -> ModelRecord {
        let (components, bounds, parameters) = match self {
            FittedModel::Slow => (0, Vec::new(), serde_json::Value::Array(Vec::new())),
            FittedModel::Sir(f) => (1, Vec::new(), serde_json::to_value(f).unwrap_or_default()),
            FittedModel::Dictionary {
                dictionary,
                weights,
                support_size,
                ..
            } => {
                let atoms: Vec<serde_json::Value> = weights
                    .support()
                    .into_iter()
                    .map(|i| {
                        serde_json::json!({
                            "atom_index": i,
                            "meta": dictionary.meta()[i],
                            "theta": weights.theta[i],
                        })
                    })
                    .collect();
                (
                    *support_size,
                    Vec::new(),
                    serde_json::json!({ "lambda": weights.lambda, "support": atoms }),
                )
            }
            FittedModel::MixGauss(f) => (
                f.params.components.len(),
                f.bounds.clone(),
                serde_json::to_value(&f.params).unwrap_or_default(),
            ),
            FittedModel::MixSir(f) => (
                f.params.components.len(),
                f.bounds.clone(),
                serde_json::to_value(&f.params.components).unwrap_or_default(),
            ),
        };
        ModelRecord {
            model_family: kind.name().to_string(),
            m: components,
            bounds,
            seed,
            parameters,
            objective: self.objective(),
            mape: None,
        }
    }

    /// Atoms with non-zero weight, for stem plots.
    pub fn selected_atoms(&self) -> Vec<(usize, AtomMeta, f64)> {
        match self {
            FittedModel::Dictionary {
                dictionary,
                weights,
                ..
            } => weights
                .support()
                .into_iter()
                .map(|i| (i, dictionary.meta()[i].clone(), weights.theta[i]))
                .collect(),
            _ => Vec::new(),
        }
    }
}

impl Predictor for FittedModel {
    fn predict(&self, observed: &[f64], origin: usize, horizon: usize) -> Result<f64, FitError> {
        let week = origin + horizon;
        match self {
            FittedModel::Slow => Ok(observed[origin]),
            FittedModel::Sir(fit) => {
                let s = teacher_forced_susceptibles(&observed[..=origin], &fit.params);
                let start = SirState::new(s[origin], observed[origin], 0.0);
                let traj = simulate(start, &fit.params, horizon);
                Ok(traj.states[horizon].i)
            }
            FittedModel::Dictionary { dictionary, .. } if week >= dictionary.weeks() => {
                Err(FitError::BeyondHorizon {
                    week,
                    available: dictionary.weeks(),
                })
            }
            _ => Ok(self
                .curve(week..week + 1)?
                .and_then(|v| v.first().copied())
                .expect("curve models return one value")),
        }
    }
}

/// JSON export of one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub model_family: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub objective: Option<f64>,
    pub mape: Option<f64>,
}
