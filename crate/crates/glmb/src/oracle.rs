//! Brute-force reference computations used to cross-check the fast paths.
//!
//! Everything in here enumerates exhaustively or evaluates the defining
//! formulas directly, deliberately avoiding the algorithms under test
//! (Murty partitioning, best-first subset search, the cost-matrix /
//! Kalman shortcuts). Instances must stay small enough to enumerate;
//! callers are expected to respect the documented caps.

use nalgebra::{DMatrix, DVector};

use crate::assignment::CostMatrix;
use crate::density::{GlmbDensity, Hypothesis, Provenance};
use crate::gaussian::{GaussianComponent, GaussianMixture};
use crate::label::Label;
use crate::model::LinearGaussianModel;

/// Every valid association map for `n_tracks` tracks and `n_meas`
/// measurements: entries in `0..=n_meas`, injective on positive values.
pub fn enumerate_association_maps(n_tracks: usize, n_meas: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; n_tracks];
    fn recurse(
        i: usize,
        n_tracks: usize,
        n_meas: usize,
        current: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if i == n_tracks {
            out.push(current.clone());
            return;
        }
        for a in 0..=n_meas as u32 {
            if a > 0 && current[..i].contains(&a) {
                continue;
            }
            current[i] = a;
            recurse(i + 1, n_tracks, n_meas, current, out);
        }
    }
    recurse(0, n_tracks, n_meas, &mut current, &mut out);
    out
}

/// Cost of an association map against the matrix, summed in row order.
pub fn map_cost(cost: &CostMatrix, map: &[u32]) -> f64 {
    map.iter()
        .enumerate()
        .filter(|(_, &a)| a > 0)
        .map(|(i, &a)| cost.get(i, a as usize - 1))
        .sum()
}

/// Full ranked enumeration by exhaustive search: all finite-cost maps sorted
/// by (cost, lexicographic assignment vector).
pub fn ranked_assignments_brute(cost: &CostMatrix) -> Vec<(Vec<u32>, f64)> {
    let mut maps: Vec<(Vec<u32>, f64)> = enumerate_association_maps(cost.rows(), cost.cols())
        .into_iter()
        .map(|m| {
            let c = map_cost(cost, &m);
            (m, c)
        })
        .filter(|(_, c)| c.is_finite())
        .collect();
    maps.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    maps
}

/// All subsets of `0..costs.len()` sorted by (total cost, cardinality,
/// lexicographic member list). Costs are summed in index order.
pub fn ranked_subsets_brute(costs: &[f64]) -> Vec<(Vec<usize>, f64)> {
    let n = costs.len();
    assert!(n <= 20, "brute-force subset enumeration capped at 20 nodes");
    let mut out = Vec::with_capacity(1 << n);
    for mask in 0u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let total: f64 = members.iter().map(|&i| costs[i]).sum();
        out.push((members, total));
    }
    out.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then_with(|| a.0.len().cmp(&b.0.len()))
            .then_with(|| a.0.cmp(&b.0))
    });
    out
}

/// Gaussian density evaluated through an explicit inverse, independent of the
/// Cholesky path used by the main code.
pub fn gaussian_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let dim = x.len();
    let inv = cov
        .clone()
        .try_inverse()
        .expect("oracle covariance must be invertible");
    let det = cov.determinant();
    let d = x - mean;
    let quad = (d.transpose() * inv * &d)[(0, 0)];
    ((2.0 * std::f64::consts::PI).powi(dim as i32) * det)
        .sqrt()
        .recip()
        * (-0.5 * quad).exp()
}

/// Textbook single-component Kalman update, coded independently of the main
/// track-update path (explicit inverse, no symmetrization).
pub fn kalman_update(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    z: &DVector<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let s = h * cov * h.transpose() + r;
    let k = cov
        * h.transpose()
        * s.try_inverse()
            .expect("oracle innovation covariance singular");
    let mean_post = mean + &k * (z - h * mean);
    let eye = DMatrix::identity(cov.nrows(), cov.ncols());
    let cov_post = (eye - &k * h) * cov;
    (mean_post, cov_post)
}

/// Direct single-track measurement update: the per-component weights,
/// normalizer and posterior parameters evaluated from their definitions.
/// `assoc` is `None` for misdetection, `Some(j)` for measurement `j`.
/// Returns `(eta, posterior)` with linear-domain eta.
pub fn update_track_direct(
    p: &GaussianMixture,
    assoc: Option<usize>,
    measurements: &[DVector<f64>],
    model: &LinearGaussianModel,
    label: Label,
) -> (f64, GaussianMixture) {
    let pd = model.detection_prob_for(label);
    let (h, r) = model.observation_for(label);
    match assoc {
        None => {
            let eta = (1.0 - pd) * p.weight_sum();
            (eta, p.clone())
        }
        Some(j) => {
            let z = &measurements[j];
            let kappa = model.clutter.eval(z);
            let mut weights = Vec::new();
            let mut comps = Vec::new();
            for c in p.components() {
                let z_pred = &h * &c.mean;
                let s = &h * &c.covariance * h.transpose() + &r;
                let q = gaussian_pdf(z, &z_pred, &s);
                let w = c.weight * pd * q / kappa;
                let (mean_post, cov_post) = kalman_update(&c.mean, &c.covariance, z, &h, &r);
                weights.push(w);
                comps.push((mean_post, cov_post));
            }
            let eta: f64 = weights.iter().sum();
            let components: Vec<GaussianComponent> = weights
                .iter()
                .zip(comps)
                .map(|(&w, (m, p))| GaussianComponent::new(w / eta, m, p))
                .collect();
            (eta, GaussianMixture::from_components(components))
        }
    }
}

/// Direct Bayes update of a whole density: for each hypothesis, enumerate
/// every association map, evaluate the per-track normalizers and posteriors
/// from the definitions, weight children by `w * prod(eta)` and normalize
/// across the pooled table. Children carry provenance for matching.
pub fn update_direct(
    prior: &GlmbDensity,
    measurements: &[DVector<f64>],
    model: &LinearGaussianModel,
) -> GlmbDensity {
    let mut children: Vec<Hypothesis> = Vec::new();
    for (parent_idx, hyp) in prior.hypotheses.iter().enumerate() {
        let labels = hyp.sorted_labels();
        let parent_w = hyp.log_weight.exp();
        for map in enumerate_association_maps(labels.len(), measurements.len()) {
            let mut weight = parent_w;
            let mut tracks = std::collections::BTreeMap::new();
            for (i, &label) in labels.iter().enumerate() {
                let assoc = match map[i] {
                    0 => None,
                    j => Some(j as usize - 1),
                };
                let (eta, posterior) =
                    update_track_direct(&hyp.tracks[&label], assoc, measurements, model, label);
                weight *= eta;
                tracks.insert(label, posterior);
            }
            children.push(Hypothesis {
                log_weight: weight.ln(),
                tracks,
                provenance: Some(Provenance::Update {
                    parent: parent_idx,
                    association: map,
                }),
            });
        }
    }
    let total: f64 = children.iter().map(|h| h.log_weight.exp()).sum();
    for h in &mut children {
        h.log_weight -= total.ln();
    }
    GlmbDensity {
        hypotheses: children,
        time_index: prior.time_index,
    }
}

/// Direct prediction of a whole density: the double sum over survivor subsets
/// J of each label set and birth subsets L, with weights
/// `w * eta_S^J * (1-eta_S)^(I-J) * w_B(L)` evaluated literally.
pub fn predict_direct(
    posterior: &GlmbDensity,
    model: &LinearGaussianModel,
    birth_time: u32,
) -> GlmbDensity {
    let birth_labels: Vec<Label> = model
        .births
        .iter()
        .map(|b| Label::new(birth_time, b.index))
        .collect();
    let n_birth = birth_labels.len();
    let mut children = Vec::new();
    for (parent_idx, hyp) in posterior.hypotheses.iter().enumerate() {
        let labels = hyp.sorted_labels();
        let parent_w = hyp.log_weight.exp();
        let predicted: std::collections::BTreeMap<Label, GaussianMixture> = labels
            .iter()
            .map(|&l| {
                (
                    l,
                    crate::track::predict_track(&hyp.tracks[&l], model, l).unwrap(),
                )
            })
            .collect();
        for j_mask in 0u32..(1 << labels.len()) {
            let mut w_surv = parent_w;
            for (i, &label) in labels.iter().enumerate() {
                let eta = model.survival_prob_for(label);
                w_surv *= if j_mask >> i & 1 == 1 { eta } else { 1.0 - eta };
            }
            for l_mask in 0u32..(1 << n_birth) {
                let mut weight = w_surv;
                let mut tracks = std::collections::BTreeMap::new();
                let mut survivors = Vec::new();
                let mut births = Vec::new();
                for (i, &label) in labels.iter().enumerate() {
                    if j_mask >> i & 1 == 1 {
                        tracks.insert(label, predicted[&label].clone());
                        survivors.push(label);
                    }
                }
                for (b, birth) in model.births.iter().enumerate() {
                    let r = birth.existence;
                    if l_mask >> b & 1 == 1 {
                        weight *= r;
                        tracks.insert(birth_labels[b], birth.density.clone());
                        births.push(birth_labels[b]);
                    } else {
                        weight *= 1.0 - r;
                    }
                }
                children.push(Hypothesis {
                    log_weight: weight.ln(),
                    tracks,
                    provenance: Some(Provenance::Prediction {
                        parent: parent_idx,
                        survivors,
                        births,
                    }),
                });
            }
        }
    }
    GlmbDensity {
        hypotheses: children,
        time_index: birth_time,
    }
}
