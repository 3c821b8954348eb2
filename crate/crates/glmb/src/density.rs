//! The delta-GLMB density as an enumerated hypothesis table, with
//! normalization, truncation and exact L1 truncation-error accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{GlmbError, Result};
use crate::gaussian::{GaussianComponent, GaussianMixture};
use crate::label::Label;

/// How a hypothesis row was produced. Debugging/test aid only; carries no
/// filtering semantics (the row index plays the role of the association
/// history).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Update {
        parent: usize,
        /// Per-track assignment in sorted-label order; 0 = misdetected.
        association: Vec<u32>,
    },
    Prediction {
        parent: usize,
        survivors: Vec<Label>,
        births: Vec<Label>,
    },
}

/// One row of the hypothesis table: a label set with its weight and one
/// kinematic density per label. The label set is exactly the key set of
/// `tracks`, so realizations always carry distinct labels.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub log_weight: f64,
    pub tracks: BTreeMap<Label, GaussianMixture>,
    pub provenance: Option<Provenance>,
}

impl Hypothesis {
    pub fn new(log_weight: f64, tracks: BTreeMap<Label, GaussianMixture>) -> Self {
        Hypothesis {
            log_weight,
            tracks,
            provenance: None,
        }
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    pub fn cardinality(&self) -> usize {
        self.tracks.len()
    }

    /// Labels in canonical (lexicographic) order.
    pub fn sorted_labels(&self) -> Vec<Label> {
        self.tracks.keys().copied().collect()
    }
}

/// Enumerated delta-GLMB parameter set. After `normalize` the weights sum
/// to one; every stored track density is normalized.
#[derive(Debug, Clone)]
pub struct GlmbDensity {
    pub hypotheses: Vec<Hypothesis>,
    pub time_index: u32,
}

/// Exact L1 error of discarding hypotheses from an unnormalized density,
/// together with the bound on the normalized-density L1 distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationError {
    /// Sum of the discarded weights: total - kept.
    pub absolute: f64,
    /// 2 (total - kept) / total.
    pub normalized_bound: f64,
}

/// L1 truncation error from the kept and total (unnormalized) weight sums.
pub fn l1_truncation_error(kept_weight_sum: f64, total_weight_sum: f64) -> Result<TruncationError> {
    if total_weight_sum <= 0.0 {
        return Err(GlmbError::Degenerate(
            "total weight sum must be positive".into(),
        ));
    }
    if kept_weight_sum < 0.0 || kept_weight_sum > total_weight_sum * (1.0 + 1e-12) {
        return Err(GlmbError::InvalidInput(format!(
            "kept weight {kept_weight_sum} outside [0, total={total_weight_sum}]"
        )));
    }
    let absolute = (total_weight_sum - kept_weight_sum).max(0.0);
    Ok(TruncationError {
        absolute,
        normalized_bound: 2.0 * absolute / total_weight_sum,
    })
}

fn log_sum_exp(logs: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = logs.collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl GlmbDensity {
    /// The default initial prior: one empty-label-set hypothesis of weight 1.
    pub fn empty_prior(time_index: u32) -> Self {
        GlmbDensity {
            hypotheses: vec![Hypothesis::new(0.0, BTreeMap::new())],
            time_index,
        }
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    /// Linear-domain sum of hypothesis weights.
    pub fn weight_sum(&self) -> f64 {
        self.hypotheses.iter().map(|h| h.weight()).sum()
    }

    /// Rescales weights so they sum to one, in the log domain via
    /// log-sum-exp so widely scaled weights survive.
    pub fn normalize(mut self) -> Result<Self> {
        if self.hypotheses.is_empty() {
            return Err(GlmbError::Degenerate(
                "cannot normalize an empty density".into(),
            ));
        }
        let lse = log_sum_exp(self.hypotheses.iter().map(|h| h.log_weight));
        if !lse.is_finite() {
            return Err(GlmbError::Degenerate(
                "all hypothesis weights vanished; nothing to normalize".into(),
            ));
        }
        for h in &mut self.hypotheses {
            h.log_weight -= lse;
        }
        Ok(self)
    }

    /// Keeps the `cap` highest-weight hypotheses (ties broken by
    /// lexicographic label set, then enumeration order), renormalizes, and
    /// reports the pre-normalization L1 truncation error. Relative order of
    /// the kept hypotheses is preserved.
    pub fn prune_to_cap(self, cap: usize) -> Result<(Self, TruncationError)> {
        if cap == 0 {
            return Err(GlmbError::InvalidInput("cap must be at least 1".into()));
        }
        let total = self.weight_sum();
        if self.hypotheses.len() <= cap {
            let err = l1_truncation_error(total, total)?;
            return Ok((self.normalize()?, err));
        }
        let keys: Vec<Vec<Label>> = self.hypotheses.iter().map(|h| h.sorted_labels()).collect();
        let mut order: Vec<usize> = (0..self.hypotheses.len()).collect();
        order.sort_by(|&a, &b| {
            self.hypotheses[b]
                .log_weight
                .total_cmp(&self.hypotheses[a].log_weight)
                .then_with(|| keys[a].cmp(&keys[b]))
                .then_with(|| a.cmp(&b))
        });
        let mut keep = vec![false; self.hypotheses.len()];
        for &i in order.iter().take(cap) {
            keep[i] = true;
        }
        let mut kept_sum = 0.0;
        let hypotheses: Vec<Hypothesis> = self
            .hypotheses
            .into_iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(h, _)| {
                kept_sum += h.weight();
                h
            })
            .collect();
        let err = l1_truncation_error(kept_sum.min(total), total)?;
        let pruned = GlmbDensity {
            hypotheses,
            time_index: self.time_index,
        }
        .normalize()?;
        Ok((pruned, err))
    }

    /// Cardinality distribution rho(n) for n = 0..=n_max: the summed weights
    /// of hypotheses with exactly n labels.
    pub fn cardinality_distribution(&self, n_max: usize) -> Vec<f64> {
        let mut rho = vec![0.0; n_max + 1];
        for h in &self.hypotheses {
            let n = h.cardinality();
            if n <= n_max {
                rho[n] += h.weight();
            }
        }
        rho
    }

    /// Existence probability of each label: the summed weights of all
    /// hypotheses containing it.
    pub fn existence_probabilities(&self) -> BTreeMap<Label, f64> {
        let mut r: BTreeMap<Label, f64> = BTreeMap::new();
        for h in &self.hypotheses {
            let w = h.weight();
            for label in h.tracks.keys() {
                *r.entry(*label).or_insert(0.0) += w;
            }
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DensityFile::from(self)).expect("density serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DensityFile = serde_json::from_str(text)
            .map_err(|e| GlmbError::InvalidInput(format!("density file: {e}")))?;
        file.into_density()
    }
}

/// Versioned on-disk form of a density (see `docs/formats.md`).
#[derive(Debug, Serialize, Deserialize)]
struct DensityFile {
    format: String,
    version: u32,
    time_index: u32,
    hypotheses: Vec<HypothesisFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HypothesisFile {
    log_weight: f64,
    tracks: Vec<TrackFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackFile {
    label: Label,
    components: Vec<ComponentFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ComponentFile {
    weight: f64,
    mean: Vec<f64>,
    /// Row-major covariance.
    covariance: Vec<Vec<f64>>,
}

const DENSITY_FORMAT: &str = "glmb-density";
const DENSITY_VERSION: u32 = 1;

impl From<&GlmbDensity> for DensityFile {
    fn from(d: &GlmbDensity) -> Self {
        DensityFile {
            format: DENSITY_FORMAT.into(),
            version: DENSITY_VERSION,
            time_index: d.time_index,
            hypotheses: d
                .hypotheses
                .iter()
                .map(|h| HypothesisFile {
                    log_weight: h.log_weight,
                    provenance: h.provenance.clone(),
                    tracks: h
                        .tracks
                        .iter()
                        .map(|(label, mix)| TrackFile {
                            label: *label,
                            components: mix
                                .components()
                                .iter()
                                .map(|c| ComponentFile {
                                    weight: c.weight,
                                    mean: c.mean.iter().copied().collect(),
                                    covariance: (0..c.covariance.nrows())
                                        .map(|i| {
                                            (0..c.covariance.ncols())
                                                .map(|j| c.covariance[(i, j)])
                                                .collect()
                                        })
                                        .collect(),
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl DensityFile {
    fn into_density(self) -> Result<GlmbDensity> {
        if self.format != DENSITY_FORMAT || self.version != DENSITY_VERSION {
            return Err(GlmbError::InvalidInput(format!(
                "unsupported density file {}/{}",
                self.format, self.version
            )));
        }
        let hypotheses = self
            .hypotheses
            .into_iter()
            .map(|h| {
                let mut tracks = BTreeMap::new();
                for t in h.tracks {
                    let comps = t
                        .components
                        .into_iter()
                        .map(|c| {
                            let dim = c.mean.len();
                            let mut cov = nalgebra::DMatrix::zeros(dim, dim);
                            for (i, row) in c.covariance.iter().enumerate() {
                                for (j, v) in row.iter().enumerate() {
                                    cov[(i, j)] = *v;
                                }
                            }
                            GaussianComponent::new(
                                c.weight,
                                nalgebra::DVector::from_vec(c.mean),
                                cov,
                            )
                        })
                        .collect();
                    tracks.insert(t.label, GaussianMixture::new(comps)?);
                }
                Ok(Hypothesis {
                    log_weight: h.log_weight,
                    tracks,
                    provenance: h.provenance,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GlmbDensity {
            hypotheses,
            time_index: self.time_index,
        })
    }
}
