//! The delta-GLMB recursion: measurement update via ranked assignment,
//! prediction via K-shortest survivor/birth subsets, MAP-cardinality state
//! estimation, PHD look-ahead allocation, and the main filter loop.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::assignment::ranked_assignments;
use crate::density::{GlmbDensity, Hypothesis, Provenance, TruncationError};
use crate::error::{GlmbError, Result};
use crate::gaussian::GaussianMixture;
use crate::kshortest::k_shortest_subsets;
use crate::label::Label;
use crate::model::LinearGaussianModel;
use crate::track::{
    birth_cost_vector, birth_weight, constituent_updated_phd_mass, cost_matrix_update,
    eta_survival, predict_track, survival_cost_vector, update_track, TrackUpdate,
};

/// Truncation and look-ahead knobs of the filter.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    /// Desired overall hypothesis count; also scales the per-hypothesis
    /// requested counts T(h) and K(h).
    pub j_max: usize,
    /// Birth-subset coverage used to pick K_B.
    pub birth_mass_fraction: f64,
    /// PHD-mass coverage used by the look-ahead to select hypotheses.
    pub lookahead_mass_fraction: f64,
    pub lookahead_enabled: bool,
    /// Cardinality cap for the MAP estimator.
    pub n_max: usize,
    /// Hypotheses below this normalized weight are dropped before the cap.
    pub weight_floor: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            j_max: 1000,
            birth_mass_fraction: 0.99,
            lookahead_mass_fraction: 0.95,
            lookahead_enabled: true,
            n_max: 20,
            weight_floor: 1e-15,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.j_max == 0 {
            return Err(GlmbError::InvalidInput("j_max must be at least 1".into()));
        }
        for (name, f) in [
            ("birth_mass_fraction", self.birth_mass_fraction),
            ("lookahead_mass_fraction", self.lookahead_mass_fraction),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(GlmbError::InvalidInput(format!(
                    "{name} must lie in (0,1], got {f}"
                )));
            }
        }
        if self.weight_floor.is_nan() || self.weight_floor < 0.0 {
            return Err(GlmbError::InvalidInput(
                "weight_floor must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Multi-target state estimate for one step: the labels of the best
/// hypothesis at the MAP cardinality with their posterior means.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    pub time: u32,
    pub tracks: BTreeMap<Label, DVector<f64>>,
}

impl StateEstimate {
    pub fn cardinality(&self) -> usize {
        self.tracks.len()
    }
}

/// Bookkeeping from one update step.
#[derive(Debug, Clone, Copy)]
pub struct UpdateInfo {
    /// L1 error of the floor/cap truncation among the computed children
    /// (the full association sum is never materialized).
    pub truncation: TruncationError,
    pub ranked_assignment_calls: usize,
}

/// Bookkeeping from one prediction step.
#[derive(Debug, Clone, Copy)]
pub struct PredictionInfo {
    /// Exact L1 error versus the untruncated prediction: one minus the sum
    /// of all kept unnormalized child weights.
    pub truncation: TruncationError,
    /// Number of birth subsets kept (K_B).
    pub birth_subset_count: usize,
}

/// Per-step diagnostics record.
#[derive(Debug, Clone, Serialize)]
pub struct StepDiagnostics {
    pub step: u32,
    pub measurement_count: usize,
    pub hypothesis_count: usize,
    pub prediction_l1_error: f64,
    pub update_l1_error: f64,
    /// Effective sample size of the hypothesis weights, 1 / sum(w^2).
    pub ess: f64,
    pub map_cardinality: usize,
    /// Posterior cardinality distribution up to the last non-zero entry
    /// (JSON-lines output only; the CSV columns are fixed).
    pub cardinality_distribution: Vec<f64>,
    pub ranked_assignment_calls: usize,
    pub wall_ms: f64,
}

/// Output of a full filter run.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub estimates: Vec<StateEstimate>,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// The generic allocation T(h) = ceil(w(h) * J_max), at least 1.
pub fn weight_proportional_requests(density: &GlmbDensity, j_max: usize) -> Vec<usize> {
    density
        .hypotheses
        .iter()
        .map(|h| ((h.weight() * j_max as f64).ceil() as usize).max(1))
        .collect()
}

/// Selection order shared by the floor/cap truncation: weight descending,
/// ties by lexicographic label set, then enumeration order. Label keys are
/// materialized once; the comparator runs hot on pooled children.
fn selection_order(hypotheses: &[Hypothesis]) -> Vec<usize> {
    let keys: Vec<Vec<Label>> = hypotheses.iter().map(|h| h.sorted_labels()).collect();
    let mut order: Vec<usize> = (0..hypotheses.len()).collect();
    order.sort_by(|&a, &b| {
        hypotheses[b]
            .log_weight
            .total_cmp(&hypotheses[a].log_weight)
            .then_with(|| keys[a].cmp(&keys[b]))
            .then_with(|| a.cmp(&b))
    });
    order
}

/// Drops hypotheses below the weight floor, keeps the `cap` best of the rest,
/// renormalizes. Input must be normalized; returns the kept weight fraction.
/// Relative order of the kept hypotheses is preserved.
fn floor_and_cap(density: GlmbDensity, floor: f64, cap: usize) -> Result<(GlmbDensity, f64)> {
    let order = selection_order(&density.hypotheses);
    let mut keep = vec![false; density.hypotheses.len()];
    let mut kept = 0usize;
    for &i in &order {
        if kept >= cap {
            break;
        }
        if density.hypotheses[i].weight() >= floor {
            keep[i] = true;
            kept += 1;
        }
    }
    if kept == 0 {
        // Everything sits below the floor; keep the single best row.
        keep[order[0]] = true;
    }
    let mut kept_sum = 0.0;
    let hypotheses: Vec<Hypothesis> = density
        .hypotheses
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(h, _)| {
            kept_sum += h.weight();
            h
        })
        .collect();
    let out = GlmbDensity {
        hypotheses,
        time_index: density.time_index,
    }
    .normalize()?;
    Ok((out, kept_sum.min(1.0)))
}

/// Measurement update with the generic weight-proportional allocation.
pub fn update_step(
    prior: &GlmbDensity,
    measurements: &[DVector<f64>],
    model: &LinearGaussianModel,
    config: &FilterConfig,
) -> Result<(GlmbDensity, UpdateInfo)> {
    let requests = weight_proportional_requests(prior, config.j_max);
    update_step_with_requests(prior, measurements, model, config, &requests)
}

/// Measurement update with explicit per-hypothesis requested counts (as
/// produced by [`lookahead_allocate`]). Hypotheses with a zero request
/// produce no children and vanish at normalization.
pub fn update_step_with_requests(
    prior: &GlmbDensity,
    measurements: &[DVector<f64>],
    model: &LinearGaussianModel,
    config: &FilterConfig,
    requests: &[usize],
) -> Result<(GlmbDensity, UpdateInfo)> {
    if prior.is_empty() {
        return Err(GlmbError::Degenerate("update of an empty prior".into()));
    }
    if requests.len() != prior.len() {
        return Err(GlmbError::InvalidInput(
            "one requested count per prior hypothesis is required".into(),
        ));
    }
    let ranked_assignment_calls = prior
        .hypotheses
        .iter()
        .zip(requests)
        .filter(|(h, &t)| t > 0 && h.cardinality() > 0)
        .count();

    let per_parent: Vec<Vec<Hypothesis>> = prior
        .hypotheses
        .par_iter()
        .enumerate()
        .map(|(h_idx, hyp)| -> Result<Vec<Hypothesis>> {
            let t_req = requests[h_idx];
            if t_req == 0 {
                return Ok(Vec::new());
            }
            let labels = hyp.sorted_labels();
            if labels.is_empty() {
                // The empty product over labels is 1: a single unchanged child.
                return Ok(vec![Hypothesis {
                    log_weight: hyp.log_weight,
                    tracks: BTreeMap::new(),
                    provenance: Some(Provenance::Update {
                        parent: h_idx,
                        association: Vec::new(),
                    }),
                }]);
            }
            let cost = cost_matrix_update(hyp, measurements, model)?;
            let ranked = ranked_assignments(&cost, t_req)?;

            // Updates shared by many association maps are computed once.
            let mut detect_memo: HashMap<(usize, usize), Option<TrackUpdate>> = HashMap::new();
            let mut miss_memo: Vec<Option<TrackUpdate>> = vec![None; labels.len()];
            let mut children = Vec::with_capacity(ranked.len());
            'theta: for sol in &ranked {
                let mut log_weight = hyp.log_weight;
                let mut tracks = BTreeMap::new();
                for (i, &label) in labels.iter().enumerate() {
                    let update = match sol.map.measurement_for(i) {
                        None => {
                            if miss_memo[i].is_none() {
                                miss_memo[i] = update_track(
                                    &hyp.tracks[&label],
                                    None,
                                    measurements,
                                    model,
                                    label,
                                )?;
                            }
                            miss_memo[i].clone()
                        }
                        Some(j) => match detect_memo.entry((i, j)) {
                            std::collections::hash_map::Entry::Occupied(e) => e.get().clone(),
                            std::collections::hash_map::Entry::Vacant(v) => v
                                .insert(update_track(
                                    &hyp.tracks[&label],
                                    Some(j),
                                    measurements,
                                    model,
                                    label,
                                )?)
                                .clone(),
                        },
                    };
                    match update {
                        Some(up) => {
                            log_weight += up.log_eta;
                            tracks.insert(label, up.posterior);
                        }
                        // Zero-likelihood association: drop this map.
                        None => continue 'theta,
                    }
                }
                children.push(Hypothesis {
                    log_weight,
                    tracks,
                    provenance: Some(Provenance::Update {
                        parent: h_idx,
                        association: sol.map.assignment().to_vec(),
                    }),
                });
            }
            Ok(children)
        })
        .collect::<Result<Vec<_>>>()?;

    let pooled: Vec<Hypothesis> = per_parent.into_iter().flatten().collect();
    if pooled.is_empty() {
        return Err(GlmbError::Degenerate(
            "every updated hypothesis had zero likelihood".into(),
        ));
    }
    let normalized = GlmbDensity {
        hypotheses: pooled,
        time_index: prior.time_index,
    }
    .normalize()?;
    let (updated, kept_fraction) = floor_and_cap(normalized, config.weight_floor, config.j_max)?;
    let truncation = TruncationError {
        absolute: 1.0 - kept_fraction,
        normalized_bound: 2.0 * (1.0 - kept_fraction),
    };
    Ok((
        updated,
        UpdateInfo {
            truncation,
            ranked_assignment_calls,
        },
    ))
}

/// Prediction to the next step, labeling new births with `posterior.time_index + 1`.
pub fn predict_step(
    posterior: &GlmbDensity,
    model: &LinearGaussianModel,
    config: &FilterConfig,
) -> Result<(GlmbDensity, PredictionInfo)> {
    predict_step_at(posterior, model, config, posterior.time_index + 1)
}

/// Prediction with an explicit birth step: birth component `i` spawns label
/// `(birth_time, i)`.
pub fn predict_step_at(
    posterior: &GlmbDensity,
    model: &LinearGaussianModel,
    config: &FilterConfig,
    birth_time: u32,
) -> Result<(GlmbDensity, PredictionInfo)> {
    if posterior.is_empty() {
        return Err(GlmbError::Degenerate(
            "prediction of an empty posterior".into(),
        ));
    }

    // Birth side: enumerate birth subsets best-first until the requested
    // mass coverage is reached; that prefix length is K_B.
    let birth_subsets: Vec<(Vec<usize>, f64)> = if model.births.is_empty() {
        vec![(Vec::new(), 0.0)]
    } else {
        let costs = birth_cost_vector(model)?;
        let all = k_shortest_subsets(&costs, 1usize << costs.len().min(30))?;
        let mut subsets = Vec::new();
        let mut coverage = 0.0;
        for s in all {
            let w = birth_weight(&s.members, model);
            subsets.push((s.members, w.ln()));
            coverage += w;
            if coverage >= config.birth_mass_fraction {
                break;
            }
        }
        subsets
    };
    let birth_tracks: Vec<(Label, GaussianMixture)> = model
        .births
        .iter()
        .map(|b| (Label::new(birth_time, b.index), b.density.clone()))
        .collect();

    let per_parent: Vec<Vec<Hypothesis>> = posterior
        .hypotheses
        .par_iter()
        .enumerate()
        .map(|(h_idx, hyp)| -> Result<Vec<Hypothesis>> {
            let k_req = ((hyp.weight() * config.j_max as f64).ceil() as usize).max(1);
            let labels = hyp.sorted_labels();
            let etas: Vec<f64> = labels
                .iter()
                .map(|&l| eta_survival(&hyp.tracks[&l], model, l))
                .collect();
            let costs = survival_cost_vector(&etas)?;
            let survivor_subsets = k_shortest_subsets(&costs, k_req)?;
            let predicted: Vec<GaussianMixture> = labels
                .iter()
                .map(|&l| predict_track(&hyp.tracks[&l], model, l))
                .collect::<Result<Vec<_>>>()?;
            let log_survive: Vec<f64> = etas.iter().map(|e| e.ln()).collect();
            let log_die: Vec<f64> = etas.iter().map(|e| (1.0 - e).ln()).collect();

            let mut children = Vec::with_capacity(survivor_subsets.len() * birth_subsets.len());
            for subset in &survivor_subsets {
                let mut base = hyp.log_weight;
                let mut in_subset = vec![false; labels.len()];
                for &i in &subset.members {
                    in_subset[i] = true;
                }
                for i in 0..labels.len() {
                    base += if in_subset[i] {
                        log_survive[i]
                    } else {
                        log_die[i]
                    };
                }
                for (birth_members, log_wb) in &birth_subsets {
                    let mut tracks = BTreeMap::new();
                    let mut survivors = Vec::with_capacity(subset.members.len());
                    for &i in &subset.members {
                        tracks.insert(labels[i], predicted[i].clone());
                        survivors.push(labels[i]);
                    }
                    let mut births = Vec::with_capacity(birth_members.len());
                    for &b in birth_members {
                        let (label, density) = &birth_tracks[b];
                        tracks.insert(*label, density.clone());
                        births.push(*label);
                    }
                    children.push(Hypothesis {
                        log_weight: base + log_wb,
                        tracks,
                        provenance: Some(Provenance::Prediction {
                            parent: h_idx,
                            survivors,
                            births,
                        }),
                    });
                }
            }
            Ok(children)
        })
        .collect::<Result<Vec<_>>>()?;

    let pooled: Vec<Hypothesis> = per_parent.into_iter().flatten().collect();
    // The untruncated child weights of a normalized posterior sum to one, so
    // the kept mass before normalization is the exact L1 accounting.
    let pooled_sum: f64 = pooled.iter().map(|h| h.weight()).sum();
    let normalized = GlmbDensity {
        hypotheses: pooled,
        time_index: birth_time,
    }
    .normalize()?;
    let (predicted, kept_fraction) = floor_and_cap(normalized, config.weight_floor, config.j_max)?;
    let kept_mass = (pooled_sum * kept_fraction).min(1.0);
    let truncation = TruncationError {
        absolute: 1.0 - kept_mass,
        normalized_bound: 2.0 * (1.0 - kept_mass),
    };
    Ok((
        predicted,
        PredictionInfo {
            truncation,
            birth_subset_count: birth_subsets.len(),
        },
    ))
}

/// Probability-weight coverage that the look-ahead may never drop: the PHD
/// mass score under-weights low-cardinality hypotheses (mass scales with the
/// label count), so the selection is additionally forced to retain the
/// hypotheses carrying this fraction of the posterior weight. Only
/// negligible-weight rows are skippable; that is also the regime in which
/// skipping saves work without moving the posterior.
const LOOKAHEAD_WEIGHT_COVERAGE: f64 = 0.999;

/// PHD look-ahead: scores every hypothesis by its constituent updated PHD
/// mass and selects the smallest prefix (by descending mass) covering the
/// configured fraction of the total mass, plus the smallest prefix by weight
/// covering [`LOOKAHEAD_WEIGHT_COVERAGE`] of the probability, plus all
/// empty-label hypotheses (they carry no PHD mass but cost no
/// ranked-assignment call). Selected hypotheses get a requested count
/// proportional to their normalized mass score, floored by their generic
/// weight-proportional budget; unselected ones get 0 and are dropped. A
/// vanishing total mass falls back to the weight-proportional allocation.
pub fn lookahead_allocate(
    prior: &GlmbDensity,
    measurements: &[DVector<f64>],
    model: &LinearGaussianModel,
    config: &FilterConfig,
) -> Vec<usize> {
    let masses = constituent_updated_phd_mass(&prior.hypotheses, measurements, model);
    let total: f64 = masses.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return weight_proportional_requests(prior, config.j_max);
    }
    let n = masses.len();
    let mut selected = vec![false; n];

    let mut mass_order: Vec<usize> = (0..n).collect();
    mass_order.sort_by(|&a, &b| masses[b].total_cmp(&masses[a]).then_with(|| a.cmp(&b)));
    let mut coverage = 0.0;
    for &i in &mass_order {
        selected[i] = true;
        coverage += masses[i];
        if coverage >= config.lookahead_mass_fraction * total {
            break;
        }
    }

    let weights: Vec<f64> = prior.hypotheses.iter().map(|h| h.weight()).collect();
    let weight_total: f64 = weights.iter().sum();
    let mut weight_order: Vec<usize> = (0..n).collect();
    weight_order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then_with(|| a.cmp(&b)));
    let mut coverage = 0.0;
    for &i in &weight_order {
        selected[i] = true;
        coverage += weights[i];
        if coverage >= LOOKAHEAD_WEIGHT_COVERAGE * weight_total {
            break;
        }
    }

    prior
        .hypotheses
        .iter()
        .enumerate()
        .map(|(i, hyp)| {
            if !selected[i] && hyp.cardinality() > 0 {
                return 0;
            }
            let by_mass = ((masses[i] / total) * config.j_max as f64).ceil() as usize;
            let by_weight = (weights[i] * config.j_max as f64).ceil() as usize;
            by_mass.max(by_weight).max(1)
        })
        .collect()
}

/// MAP-cardinality estimate: pick the cardinality maximizing rho(n) (ties go
/// to the smaller n), then report the labels and posterior means of the
/// highest-weight hypothesis of that cardinality.
pub fn estimate_state(posterior: &GlmbDensity, config: &FilterConfig) -> StateEstimate {
    if posterior.is_empty() {
        return StateEstimate {
            time: posterior.time_index,
            tracks: BTreeMap::new(),
        };
    }
    let rho = posterior.cardinality_distribution(config.n_max);
    let mut n_hat = 0usize;
    let mut best = f64::NEG_INFINITY;
    for (n, &p) in rho.iter().enumerate() {
        if p > best {
            best = p;
            n_hat = n;
        }
    }
    let mut chosen: Option<usize> = None;
    for (i, h) in posterior.hypotheses.iter().enumerate() {
        if h.cardinality() != n_hat {
            continue;
        }
        let better = match chosen {
            None => true,
            Some(c) => {
                let cur = &posterior.hypotheses[c];
                h.log_weight > cur.log_weight
                    || (h.log_weight == cur.log_weight && h.sorted_labels() < cur.sorted_labels())
            }
        };
        if better {
            chosen = Some(i);
        }
    }
    // All cardinalities above n_max: fall back to the global best row.
    let chosen = chosen.unwrap_or_else(|| selection_order(&posterior.hypotheses)[0]);
    let tracks = posterior.hypotheses[chosen]
        .tracks
        .iter()
        .map(|(label, mix)| (*label, mix.mean()))
        .collect();
    StateEstimate {
        time: posterior.time_index,
        tracks,
    }
}

/// Runs the full recursion over a sequence of measurement scans: per step
/// predict, update (with optional look-ahead allocation), estimate.
/// Scan `s` uses birth labels `(s, i)`.
pub fn run_filter(
    scans: &[Vec<DVector<f64>>],
    model: &LinearGaussianModel,
    config: &FilterConfig,
    initial: GlmbDensity,
) -> Result<FilterOutput> {
    model.validate()?;
    config.validate()?;
    let step_context = |s: usize| {
        move |e: GlmbError| match e {
            GlmbError::InvalidInput(m) => GlmbError::InvalidInput(format!("step {s}: {m}")),
            GlmbError::Degenerate(m) => GlmbError::Degenerate(format!("step {s}: {m}")),
            GlmbError::Numerical(m) => GlmbError::Numerical(format!("step {s}: {m}")),
        }
    };

    let mut posterior = initial.normalize()?;
    let mut estimates = Vec::with_capacity(scans.len());
    let mut diagnostics = Vec::with_capacity(scans.len());
    for (s, scan) in scans.iter().enumerate() {
        let start = Instant::now();
        let (predicted, pred_info) =
            predict_step_at(&posterior, model, config, s as u32).map_err(step_context(s))?;
        let requests = if config.lookahead_enabled {
            lookahead_allocate(&predicted, scan, model, config)
        } else {
            weight_proportional_requests(&predicted, config.j_max)
        };
        let (updated, upd_info) =
            update_step_with_requests(&predicted, scan, model, config, &requests)
                .map_err(step_context(s))?;
        let estimate = estimate_state(&updated, config);
        let ess = {
            let sq: f64 = updated
                .hypotheses
                .iter()
                .map(|h| h.weight() * h.weight())
                .sum();
            if sq > 0.0 {
                1.0 / sq
            } else {
                0.0
            }
        };
        let mut cardinality_distribution = updated.cardinality_distribution(config.n_max);
        while cardinality_distribution.len() > 1 && cardinality_distribution.last() == Some(&0.0) {
            cardinality_distribution.pop();
        }
        diagnostics.push(StepDiagnostics {
            step: s as u32,
            measurement_count: scan.len(),
            hypothesis_count: updated.len(),
            prediction_l1_error: pred_info.truncation.absolute,
            update_l1_error: upd_info.truncation.absolute,
            ess,
            map_cardinality: estimate.cardinality(),
            cardinality_distribution,
            ranked_assignment_calls: upd_info.ranked_assignment_calls,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        estimates.push(estimate);
        posterior = updated;
    }
    Ok(FilterOutput {
        estimates,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianComponent;
    use crate::model::{BirthComponent, ClutterIntensity};
    use crate::oracle;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;

    fn base_model(births: Vec<BirthComponent>) -> LinearGaussianModel {
        LinearGaussianModel::constant_velocity_2d(
            1.0,
            5.0,
            10.0,
            0.99,
            0.88,
            ClutterIntensity::Uniform { density: 1.65e-5 },
            births,
        )
    }

    fn single_track(mean: Vec<f64>, cov_scale: f64) -> GaussianMixture {
        let dim = mean.len();
        GaussianMixture::single(
            DVector::from_vec(mean),
            DMatrix::identity(dim, dim) * cov_scale,
        )
        .unwrap()
    }

    fn hyp(log_weight: f64, tracks: Vec<(Label, GaussianMixture)>) -> Hypothesis {
        Hypothesis::new(log_weight, tracks.into_iter().collect())
    }

    fn exhaustive_config() -> FilterConfig {
        FilterConfig {
            j_max: 100_000,
            lookahead_enabled: false,
            weight_floor: 0.0,
            ..FilterConfig::default()
        }
    }

    /// Matches filter children to oracle children through their provenance.
    fn assert_matches_oracle(got: &GlmbDensity, expected: &GlmbDensity, tol: f64) {
        assert_eq!(got.len(), expected.len(), "hypothesis counts differ");
        for g in &got.hypotheses {
            let e = expected
                .hypotheses
                .iter()
                .find(|e| e.provenance == g.provenance)
                .unwrap_or_else(|| panic!("no oracle row for {:?}", g.provenance));
            assert_relative_eq!(g.weight(), e.weight(), max_relative = tol, epsilon = 1e-300);
            assert_eq!(g.sorted_labels(), e.sorted_labels());
            for (label, mix) in &g.tracks {
                let emix = &e.tracks[label];
                assert_eq!(mix.len(), emix.len());
                for (c, ec) in mix.components().iter().zip(emix.components()) {
                    assert_relative_eq!(c.weight, ec.weight, max_relative = tol);
                    for i in 0..c.mean.len() {
                        assert_relative_eq!(
                            c.mean[i],
                            ec.mean[i],
                            max_relative = tol,
                            epsilon = tol
                        );
                        for j in 0..c.mean.len() {
                            assert_relative_eq!(
                                c.covariance[(i, j)],
                                ec.covariance[(i, j)],
                                max_relative = tol,
                                epsilon = tol
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn empty_label_set_update_is_identity() {
        let model = base_model(vec![]);
        let prior = GlmbDensity::empty_prior(0);
        let z = vec![DVector::from_vec(vec![5.0, 5.0])];
        let (posterior, info) = update_step(&prior, &z, &model, &exhaustive_config()).unwrap();
        assert_eq!(posterior.len(), 1);
        assert_relative_eq!(posterior.hypotheses[0].weight(), 1.0, max_relative = 1e-12);
        assert_eq!(posterior.hypotheses[0].cardinality(), 0);
        assert_eq!(info.ranked_assignment_calls, 0);
    }

    #[test]
    fn one_track_one_measurement_matches_direct_evaluation() {
        let model = base_model(vec![]);
        let prior = GlmbDensity {
            hypotheses: vec![hyp(
                0.0,
                vec![(Label::new(0, 1), single_track(vec![0.0; 4], 25.0))],
            )],
            time_index: 0,
        };
        let z = vec![DVector::from_vec(vec![3.0, -2.0])];
        let (posterior, _) = update_step(&prior, &z, &model, &exhaustive_config()).unwrap();
        assert_eq!(posterior.len(), 2);
        let expected = oracle::update_direct(&prior, &z, &model);
        assert_matches_oracle(&posterior, &expected, 1e-9);
    }

    #[test]
    fn two_tracks_two_measurements_all_seven_maps() {
        let model = base_model(vec![]);
        let prior = GlmbDensity {
            hypotheses: vec![hyp(
                0.0,
                vec![
                    (
                        Label::new(0, 1),
                        single_track(vec![0.0, 0.0, 1.0, 0.0], 25.0),
                    ),
                    (
                        Label::new(0, 2),
                        single_track(vec![50.0, 50.0, 0.0, 1.0], 25.0),
                    ),
                ],
            )],
            time_index: 0,
        };
        let z = vec![
            DVector::from_vec(vec![2.0, 1.0]),
            DVector::from_vec(vec![49.0, 52.0]),
        ];
        let (posterior, _) = update_step(&prior, &z, &model, &exhaustive_config()).unwrap();
        assert_eq!(posterior.len(), 7);
        let expected = oracle::update_direct(&prior, &z, &model);
        assert_matches_oracle(&posterior, &expected, 1e-9);

        // Children of one parent arrive in non-increasing weight order.
        let weights: Vec<f64> = posterior.hypotheses.iter().map(|h| h.weight()).collect();
        for w in weights.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn prediction_keeps_full_label_set_in_high_survival_limit() {
        let mut model = base_model(vec![]);
        model.survival_prob = 0.9999;
        let prior = GlmbDensity {
            hypotheses: vec![hyp(
                0.0,
                vec![
                    (Label::new(0, 1), single_track(vec![0.0; 4], 25.0)),
                    (
                        Label::new(0, 2),
                        single_track(vec![10.0, 0.0, 0.0, 0.0], 25.0),
                    ),
                ],
            )],
            time_index: 0,
        };
        let (predicted, _) = predict_step(&prior, &model, &exhaustive_config()).unwrap();
        let top = predicted
            .hypotheses
            .iter()
            .max_by(|a, b| a.log_weight.total_cmp(&b.log_weight))
            .unwrap();
        assert_eq!(top.cardinality(), 2);
        assert!(top.weight() > 0.999);
    }

    #[test]
    fn prediction_matches_direct_double_sum() {
        let mut model = base_model(vec![BirthComponent {
            existence: 0.04,
            density: single_track(vec![0.0, 0.0, 100.0, 0.0], 100.0),
            index: 1,
        }]);
        model.survival_prob = 0.9;
        let prior = GlmbDensity {
            hypotheses: vec![hyp(
                0.0,
                vec![
                    (Label::new(0, 1), single_track(vec![0.0; 4], 25.0)),
                    (
                        Label::new(0, 2),
                        single_track(vec![10.0, 0.0, 0.0, 0.0], 25.0),
                    ),
                ],
            )],
            time_index: 0,
        };
        let config = FilterConfig {
            birth_mass_fraction: 1.0,
            ..exhaustive_config()
        };
        let (predicted, info) = predict_step(&prior, &model, &config).unwrap();
        assert_eq!(predicted.len(), 8); // 4 survivor subsets x 2 birth subsets
        assert_eq!(info.birth_subset_count, 2);
        assert!(info.truncation.absolute.abs() < 1e-12);

        let expected = oracle::predict_direct(&prior, &model, 1)
            .normalize()
            .unwrap();
        assert_matches_oracle(&predicted, &expected, 1e-9);
    }

    #[test]
    fn untruncated_children_sum_to_parent_weight() {
        let mut model = base_model(vec![
            BirthComponent {
                existence: 0.04,
                density: single_track(vec![0.0, 0.0, 100.0, 0.0], 100.0),
                index: 1,
            },
            BirthComponent {
                existence: 0.1,
                density: single_track(vec![-100.0, 0.0, -100.0, 0.0], 100.0),
                index: 2,
            },
        ]);
        model.survival_prob = 0.85;
        let parent_weights: [f64; 2] = [0.4, 0.6];
        let prior = GlmbDensity {
            hypotheses: vec![
                hyp(
                    parent_weights[0].ln(),
                    vec![(Label::new(0, 1), single_track(vec![0.0; 4], 25.0))],
                ),
                hyp(
                    parent_weights[1].ln(),
                    vec![
                        (Label::new(0, 1), single_track(vec![0.0; 4], 25.0)),
                        (
                            Label::new(0, 2),
                            single_track(vec![5.0, 0.0, 0.0, 0.0], 25.0),
                        ),
                        (
                            Label::new(0, 3),
                            single_track(vec![-5.0, 0.0, 0.0, 0.0], 25.0),
                        ),
                    ],
                ),
            ],
            time_index: 0,
        };
        let raw = oracle::predict_direct(&prior, &model, 1);
        for (parent, expected) in parent_weights.iter().enumerate() {
            let sum: f64 = raw
                .hypotheses
                .iter()
                .filter(|h| matches!(&h.provenance, Some(Provenance::Prediction { parent: p, .. }) if *p == parent))
                .map(|h| h.weight())
                .sum();
            assert_relative_eq!(sum, *expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn lookahead_single_hypothesis_gets_full_budget() {
        let model = base_model(vec![]);
        let prior = GlmbDensity {
            hypotheses: vec![hyp(
                0.0,
                vec![(Label::new(0, 1), single_track(vec![0.0; 4], 25.0))],
            )],
            time_index: 0,
        };
        let config = FilterConfig {
            j_max: 64,
            ..FilterConfig::default()
        };
        let z = vec![DVector::from_vec(vec![0.0, 0.0])];
        let requests = lookahead_allocate(&prior, &z, &model, &config);
        assert_eq!(requests, vec![64]);
    }

    #[test]
    fn lookahead_prefix_rule_drops_weak_hypothesis() {
        let model = base_model(vec![]);
        // One strong hypothesis explaining the measurement, one negligible.
        let prior = GlmbDensity {
            hypotheses: vec![
                hyp(
                    0.999_f64.ln(),
                    vec![(Label::new(0, 1), single_track(vec![0.0; 4], 25.0))],
                ),
                hyp(
                    0.001_f64.ln(),
                    vec![(
                        Label::new(0, 2),
                        single_track(vec![900.0, 900.0, 0.0, 0.0], 25.0),
                    )],
                ),
            ],
            time_index: 0,
        };
        let config = FilterConfig {
            j_max: 100,
            lookahead_mass_fraction: 0.95,
            ..FilterConfig::default()
        };
        let z = vec![DVector::from_vec(vec![1.0, 0.0])];
        let requests = lookahead_allocate(&prior, &z, &model, &config);
        assert!(requests[0] >= 1);
        assert_eq!(requests[1], 0);
    }

    #[test]
    fn lookahead_equal_masses_selects_all_ten() {
        let model = base_model(vec![]);
        let hyps: Vec<Hypothesis> = (0..10)
            .map(|i| {
                hyp(
                    0.1_f64.ln(),
                    vec![(Label::new(0, i + 1), single_track(vec![0.0; 4], 25.0))],
                )
            })
            .collect();
        let prior = GlmbDensity {
            hypotheses: hyps,
            time_index: 0,
        };
        let config = FilterConfig {
            lookahead_mass_fraction: 0.95,
            ..FilterConfig::default()
        };
        let z = vec![DVector::from_vec(vec![0.0, 0.0])];
        let requests = lookahead_allocate(&prior, &z, &model, &config);
        // ceil(10 * 0.95) = 10: the prefix must reach coverage.
        assert_eq!(requests.iter().filter(|&&t| t > 0).count(), 10);
    }

    #[test]
    fn estimate_single_hypothesis_two_tracks() {
        let d = GlmbDensity {
            hypotheses: vec![hyp(
                0.0,
                vec![
                    (
                        Label::new(0, 1),
                        single_track(vec![1.0, 2.0, 3.0, 4.0], 1.0),
                    ),
                    (
                        Label::new(0, 2),
                        single_track(vec![-1.0, -2.0, 0.0, 0.0], 1.0),
                    ),
                ],
            )],
            time_index: 7,
        };
        let est = estimate_state(&d, &FilterConfig::default());
        assert_eq!(est.time, 7);
        assert_eq!(est.cardinality(), 2);
        assert_relative_eq!(est.tracks[&Label::new(0, 1)][0], 1.0);
    }

    #[test]
    fn estimate_picks_map_cardinality() {
        let d = GlmbDensity {
            hypotheses: vec![
                hyp(
                    0.3_f64.ln(),
                    vec![(
                        Label::new(0, 2),
                        single_track(vec![9.0, 0.0, 0.0, 0.0], 1.0),
                    )],
                ),
                hyp(
                    0.7_f64.ln(),
                    vec![
                        (Label::new(0, 1), single_track(vec![0.0; 4], 1.0)),
                        (
                            Label::new(0, 2),
                            single_track(vec![9.0, 0.0, 0.0, 0.0], 1.0),
                        ),
                    ],
                ),
            ],
            time_index: 0,
        };
        let est = estimate_state(&d, &FilterConfig::default());
        assert_eq!(est.cardinality(), 2);
        assert!(est.tracks.contains_key(&Label::new(0, 1)));
    }

    #[test]
    fn estimate_tie_prefers_smaller_cardinality() {
        let d = GlmbDensity {
            hypotheses: vec![
                hyp(
                    0.5_f64.ln(),
                    vec![(Label::new(0, 1), single_track(vec![0.0; 4], 1.0))],
                ),
                hyp(
                    0.5_f64.ln(),
                    vec![
                        (Label::new(0, 1), single_track(vec![0.0; 4], 1.0)),
                        (
                            Label::new(0, 2),
                            single_track(vec![9.0, 0.0, 0.0, 0.0], 1.0),
                        ),
                    ],
                ),
            ],
            time_index: 0,
        };
        let est = estimate_state(&d, &FilterConfig::default());
        assert_eq!(est.cardinality(), 1);
    }

    #[test]
    fn lookahead_agrees_with_full_expansion_on_low_clutter() {
        // Two well-separated targets, sparse clutter: the MAP cardinality
        // sequence must be essentially unchanged by the look-ahead.
        let mut model = base_model(vec![
            BirthComponent {
                existence: 0.04,
                density: single_track(vec![-300.0, 0.0, 15.0, 5.0], 100.0),
                index: 1,
            },
            BirthComponent {
                existence: 0.04,
                density: single_track(vec![300.0, 50.0, -10.0, -8.0], 100.0),
                index: 2,
            },
        ]);
        model.clutter = ClutterIntensity::Uniform {
            density: 2.0 / 4.0e6,
        };
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(88);
        let scans: Vec<Vec<DVector<f64>>> = (0..20)
            .map(|k| {
                let k = k as f64;
                let mut scan = vec![
                    DVector::from_vec(vec![
                        -300.0 + 15.0 * k + rng.random_range(-10.0..10.0),
                        5.0 * k + rng.random_range(-10.0..10.0),
                    ]),
                    DVector::from_vec(vec![
                        300.0 - 10.0 * k + rng.random_range(-10.0..10.0),
                        50.0 - 8.0 * k + rng.random_range(-10.0..10.0),
                    ]),
                ];
                if rng.random::<f64>() < 0.5 {
                    scan.push(DVector::from_vec(vec![
                        rng.random_range(-1000.0..1000.0),
                        rng.random_range(-1000.0..1000.0),
                    ]));
                }
                scan
            })
            .collect();
        let with = FilterConfig {
            j_max: 300,
            lookahead_enabled: true,
            ..FilterConfig::default()
        };
        let without = FilterConfig {
            lookahead_enabled: false,
            ..with.clone()
        };
        let a = run_filter(&scans, &model, &with, GlmbDensity::empty_prior(0)).unwrap();
        let b = run_filter(&scans, &model, &without, GlmbDensity::empty_prior(0)).unwrap();
        let agree = a
            .estimates
            .iter()
            .zip(&b.estimates)
            .filter(|(x, y)| x.cardinality() == y.cardinality())
            .count();
        assert!(
            agree as f64 >= 0.95 * scans.len() as f64,
            "only {agree}/20 steps agree"
        );
        let calls_with: usize = a
            .diagnostics
            .iter()
            .map(|d| d.ranked_assignment_calls)
            .sum();
        let calls_without: usize = b
            .diagnostics
            .iter()
            .map(|d| d.ranked_assignment_calls)
            .sum();
        assert!(calls_with < calls_without);
    }

    #[test]
    fn run_filter_no_births_stays_empty() {
        let model = base_model(vec![]);
        let scans: Vec<Vec<DVector<f64>>> = vec![vec![]; 5];
        let out = run_filter(
            &scans,
            &model,
            &FilterConfig::default(),
            GlmbDensity::empty_prior(0),
        )
        .unwrap();
        assert_eq!(out.estimates.len(), 5);
        assert!(out.estimates.iter().all(|e| e.cardinality() == 0));
    }

    #[test]
    fn run_filter_confirms_single_target_quickly() {
        // One target, high detection, no clutter in the data; the model keeps
        // a small positive clutter intensity.
        let mut model = base_model(vec![BirthComponent {
            existence: 0.04,
            density: GaussianMixture::new(vec![GaussianComponent::new(
                1.0,
                DVector::from_vec(vec![0.0, 0.0, 10.0, 0.0]),
                DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 100.0, 100.0, 100.0])),
            )])
            .unwrap(),
            index: 1,
        }]);
        model.detection_prob = 0.98;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        let scans: Vec<Vec<DVector<f64>>> = (0..20)
            .map(|k| {
                let x = 10.0 * k as f64 + rng.random_range(-1.0..1.0);
                let y = rng.random_range(-1.0..1.0);
                vec![DVector::from_vec(vec![x, y])]
            })
            .collect();
        let config = FilterConfig {
            j_max: 300,
            ..FilterConfig::default()
        };
        let out = run_filter(&scans, &model, &config, GlmbDensity::empty_prior(0)).unwrap();
        for est in &out.estimates[3..] {
            assert_eq!(est.cardinality(), 1, "step {} lost the target", est.time);
        }
        // Diagnostics are present and finite at every step.
        assert!(out
            .diagnostics
            .iter()
            .all(|d| d.prediction_l1_error.is_finite() && d.update_l1_error.is_finite()));
    }
}
