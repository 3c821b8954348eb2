//! Single-track Gaussian-mixture operations: prediction, measurement update,
//! assignment cost entries, survival/birth cost vectors and PHD masses.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::assignment::CostMatrix;
use crate::density::Hypothesis;
use crate::error::{GlmbError, Result};
use crate::gaussian::{log_gaussian, GaussianComponent, GaussianMixture};
use crate::label::Label;
use crate::model::LinearGaussianModel;

/// Log threshold below which a likelihood ratio is treated as having
/// underflowed to zero (the smallest positive normal double).
const LOG_UNDERFLOW: f64 = -708.3964185322641;

/// Result of a single-track measurement update: the normalizer eta_Z in the
/// log domain and the renormalized posterior mixture.
#[derive(Debug, Clone)]
pub struct TrackUpdate {
    pub log_eta: f64,
    pub posterior: GaussianMixture,
}

impl TrackUpdate {
    pub fn eta(&self) -> f64 {
        self.log_eta.exp()
    }
}

/// Kinematic prediction: each component (m, P) maps to (Fm, Q + F P F^T)
/// with weights unchanged.
pub fn predict_track(
    p: &GaussianMixture,
    model: &LinearGaussianModel,
    label: Label,
) -> Result<GaussianMixture> {
    let (f, q) = model.motion_for(label);
    if f.ncols() != p.dim() {
        return Err(GlmbError::InvalidInput(format!(
            "transition matrix is {}x{} but the track state has dimension {}",
            f.nrows(),
            f.ncols(),
            p.dim()
        )));
    }
    let components = p
        .components()
        .iter()
        .map(|c| {
            let mean = &f * &c.mean;
            let cov = &q + &f * &c.covariance * f.transpose();
            let cov = (&cov + cov.transpose()) * 0.5;
            GaussianComponent::new(c.weight, mean, cov)
        })
        .collect();
    Ok(GaussianMixture::from_components(components))
}

/// Survival probability mass <p_S, p>. State-independent p_S collapses the
/// inner product to the constant; the mixture argument is kept for shape.
pub fn eta_survival(_p: &GaussianMixture, model: &LinearGaussianModel, label: Label) -> f64 {
    model.survival_prob_for(label)
}

/// Node costs -ln(eta / (1 - eta)) for the survivor-subset ranking.
pub fn survival_cost_vector(etas: &[f64]) -> Result<Vec<f64>> {
    etas.iter()
        .map(|&eta| {
            if eta > 0.0 && eta < 1.0 {
                Ok(-(eta / (1.0 - eta)).ln())
            } else {
                Err(GlmbError::InvalidInput(format!(
                    "survival probability {eta} yields an infinite node cost"
                )))
            }
        })
        .collect()
}

/// Node costs -ln(r_B / (1 - r_B)) for the birth-subset ranking, one per
/// birth component in model order.
pub fn birth_cost_vector(model: &LinearGaussianModel) -> Result<Vec<f64>> {
    survival_cost_vector(&model.births.iter().map(|b| b.existence).collect::<Vec<_>>())
}

/// Multi-Bernoulli birth-set weight w_B(L) for the birth components selected
/// by `subset` (indices into `model.births`).
pub fn birth_weight(subset: &[usize], model: &LinearGaussianModel) -> f64 {
    let mut w = 1.0;
    for (b, birth) in model.births.iter().enumerate() {
        if subset.contains(&b) {
            w *= birth.existence;
        } else {
            w *= 1.0 - birth.existence;
        }
    }
    w
}

/// Per-component measurement-space quantities shared by the cost matrix and
/// the Kalman update.
struct ComponentProjection {
    log_weight: f64,
    z_pred: DVector<f64>,
    innovation_chol: Cholesky<f64, Dyn>,
}

fn project_components(
    p: &GaussianMixture,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    context: &str,
) -> Result<Vec<ComponentProjection>> {
    p.components()
        .iter()
        .map(|c| {
            let z_pred = h * &c.mean;
            let s = h * &c.covariance * h.transpose() + r;
            let s = (&s + s.transpose()) * 0.5;
            let innovation_chol = Cholesky::new(s).ok_or_else(|| {
                GlmbError::Numerical(format!("{context}: singular innovation covariance"))
            })?;
            Ok(ComponentProjection {
                log_weight: c.weight.ln(),
                z_pred,
                innovation_chol,
            })
        })
        .collect()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Assignment cost matrix for one hypothesis against a measurement set:
/// entry (i, j) is -ln( p_D sum_k w_k q_k(z_j; l_i) / ((1 - p_D) kappa(z_j)) )
/// with q_k(z; l) = N(z; H m_k, H P_k H^T + R). Entries whose likelihood
/// ratio underflows to zero are clamped to +inf (forbidden pairing).
pub fn cost_matrix_update(
    hyp: &Hypothesis,
    measurements: &[DVector<f64>],
    model: &LinearGaussianModel,
) -> Result<CostMatrix> {
    let labels = hyp.sorted_labels();
    let mut data = Vec::with_capacity(labels.len() * measurements.len());
    for &label in &labels {
        let pd = model.detection_prob_for(label);
        let (h, r) = model.observation_for(label);
        let projections = project_components(
            &hyp.tracks[&label],
            &h,
            &r,
            &format!("cost matrix for track {label}"),
        )?;
        let mut logs = Vec::with_capacity(projections.len());
        for z in measurements {
            let kappa = model.clutter.eval(z);
            if !kappa.is_finite() || kappa <= 0.0 {
                return Err(GlmbError::InvalidInput(
                    "clutter intensity must be positive at every measurement".into(),
                ));
            }
            logs.clear();
            logs.extend(
                projections
                    .iter()
                    .map(|c| c.log_weight + log_gaussian(z, &c.z_pred, &c.innovation_chol)),
            );
            let log_ratio = pd.ln() + log_sum_exp(&logs) - (1.0 - pd).ln() - kappa.ln();
            data.push(if log_ratio < LOG_UNDERFLOW {
                f64::INFINITY
            } else {
                -log_ratio
            });
        }
    }
    CostMatrix::new(labels.len(), measurements.len(), data)
}

/// Measurement update of one track. `assoc` is `None` for misdetection and
/// `Some(j)` for the 0-based measurement index. Returns `Ok(None)` when every
/// component likelihood underflows (the caller drops that association).
pub fn update_track(
    p: &GaussianMixture,
    assoc: Option<usize>,
    measurements: &[DVector<f64>],
    model: &LinearGaussianModel,
    label: Label,
) -> Result<Option<TrackUpdate>> {
    let pd = model.detection_prob_for(label);
    let Some(j) = assoc else {
        // Misdetection: weights scale by (1 - p_D), gain zero, density kept.
        return Ok(Some(TrackUpdate {
            log_eta: (1.0 - pd).ln(),
            posterior: p.clone(),
        }));
    };
    let z = measurements
        .get(j)
        .ok_or_else(|| GlmbError::InvalidInput(format!("measurement index {j} out of range")))?;
    let (h, r) = model.observation_for(label);
    let kappa = model.clutter.eval(z);
    let projections = project_components(p, &h, &r, &format!("update of track {label}"))?;

    let mut log_weights = Vec::with_capacity(p.len());
    let mut updated = Vec::with_capacity(p.len());
    for (c, proj) in p.components().iter().zip(&projections) {
        let log_q = log_gaussian(z, &proj.z_pred, &proj.innovation_chol);
        log_weights.push(proj.log_weight + pd.ln() + log_q - kappa.ln());
        // K = P H^T S^{-1}; computed as (S^{-1} H P)^T through the Cholesky.
        let gain_t = proj.innovation_chol.solve(&(&h * &c.covariance));
        let gain = gain_t.transpose();
        let mean = &c.mean + &gain * (z - &proj.z_pred);
        let cov = (DMatrix::identity(p.dim(), p.dim()) - &gain * &h) * &c.covariance;
        let cov = (&cov + cov.transpose()) * 0.5;
        updated.push((mean, cov));
    }
    let log_eta = log_sum_exp(&log_weights);
    if log_eta < LOG_UNDERFLOW {
        return Ok(None);
    }
    let components = log_weights
        .iter()
        .zip(updated)
        .map(|(&lw, (mean, cov))| GaussianComponent::new((lw - log_eta).exp(), mean, cov))
        .collect();
    Ok(Some(TrackUpdate {
        log_eta,
        posterior: GaussianMixture::from_components(components),
    }))
}

/// Mass of one hypothesis' PHD: weight times label count (each normalized
/// track density integrates to one).
pub fn phd_mass(hyp: &Hypothesis) -> f64 {
    hyp.weight() * hyp.cardinality() as f64
}

/// Constituent updated PHD mass of each hypothesis: the integral of the
/// misdetection term plus, for every measurement, the hypothesis' share of
/// that measurement's detection term against the pooled denominator.
/// Assumes label-independent detection probability and likelihood, so the
/// global p_D, H, R are used throughout.
pub fn constituent_updated_phd_mass(
    hypotheses: &[Hypothesis],
    measurements: &[DVector<f64>],
    model: &LinearGaussianModel,
) -> Vec<f64> {
    let pd = model.detection_prob;
    let h = &model.observation;
    let r = &model.observation_noise;
    // numerators[hi][zi] = p_D * sum_{l in I_h} w_h <g(z|.), p(., l)>
    let numerators: Vec<Vec<f64>> = hypotheses
        .iter()
        .map(|hyp| {
            let w = hyp.weight();
            let mut nums = vec![0.0; measurements.len()];
            for mixture in hyp.tracks.values() {
                let projections = project_components(mixture, h, r, "phd mass")
                    .expect("track densities are positive definite");
                for (zi, z) in measurements.iter().enumerate() {
                    let q: f64 = projections
                        .iter()
                        .map(|c| {
                            (c.log_weight + log_gaussian(z, &c.z_pred, &c.innovation_chol)).exp()
                        })
                        .sum();
                    nums[zi] += w * pd * q;
                }
            }
            nums
        })
        .collect();
    let denominators: Vec<f64> = (0..measurements.len())
        .map(|zi| {
            model.clutter.eval(&measurements[zi]) + numerators.iter().map(|n| n[zi]).sum::<f64>()
        })
        .collect();
    hypotheses
        .iter()
        .zip(&numerators)
        .map(|(hyp, nums)| {
            let miss = (1.0 - pd) * phd_mass(hyp);
            let detect: f64 = nums.iter().zip(&denominators).map(|(n, d)| n / d).sum();
            miss + detect
        })
        .collect()
}
