//! Gaussian mixture densities and mixture housekeeping.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{GlmbError, Result};

pub const LN_2PI: f64 = 1.837877066409345483560659472811;

/// One weighted Gaussian component.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        GaussianComponent {
            weight,
            mean,
            covariance,
        }
    }
}

/// Weighted sum of Gaussians representing one track's kinematic density.
/// Stored mixtures are normalized; unnormalized intermediates are transient.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    /// Validates and normalizes.
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(GlmbError::InvalidInput(
                "mixture needs at least one component".into(),
            ));
        }
        let dim = components[0].mean.len();
        for c in &components {
            if c.weight < 0.0 || !c.weight.is_finite() {
                return Err(GlmbError::InvalidInput(
                    "component weights must be non-negative".into(),
                ));
            }
            if c.mean.len() != dim || c.covariance.nrows() != dim || c.covariance.ncols() != dim {
                return Err(GlmbError::InvalidInput(
                    "component dimensions disagree".into(),
                ));
            }
            let asym = (&c.covariance - c.covariance.transpose()).abs().max();
            if asym > 1e-9 {
                return Err(GlmbError::InvalidInput(format!(
                    "covariance not symmetric (max asymmetry {asym:.3e})"
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if total <= 0.0 {
            return Err(GlmbError::Degenerate(
                "mixture has zero total weight".into(),
            ));
        }
        let mut mixture = GaussianMixture { components };
        for c in &mut mixture.components {
            c.weight /= total;
        }
        Ok(mixture)
    }

    /// Wraps pre-validated components without touching the weights.
    pub(crate) fn from_components(components: Vec<GaussianComponent>) -> Self {
        GaussianMixture { components }
    }

    pub fn single(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        GaussianMixture::new(vec![GaussianComponent::new(1.0, mean, covariance)])
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn weight_sum(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Mixture mean (the posterior mean reported by the state estimator).
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim());
        for c in &self.components {
            m += c.weight * &c.mean;
        }
        m
    }
}

/// log N(x; mean, S) with S given through its Cholesky factor.
pub fn log_gaussian(x: &DVector<f64>, mean: &DVector<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let dim = x.len() as f64;
    let diff = x - mean;
    let solved = chol
        .l()
        .solve_lower_triangular(&diff)
        .expect("triangular solve");
    let quad = solved.norm_squared();
    let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    -0.5 * (dim * LN_2PI + log_det + quad)
}

/// Cholesky with a context-tagged error for singular matrices.
pub fn cholesky(m: &DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
        .ok_or_else(|| GlmbError::Numerical(format!("{context}: matrix not positive definite")))
}

/// Mixture housekeeping: drops components below `weight_floor`, merges
/// components within `merge_distance` (squared Mahalanobis) by moment
/// matching, caps the count at `max_components` by weight, renormalizes.
pub fn prune_merge_mixture(
    p: &GaussianMixture,
    weight_floor: f64,
    merge_distance: f64,
    max_components: usize,
) -> Result<GaussianMixture> {
    let mut pool: Vec<GaussianComponent> = p
        .components
        .iter()
        .filter(|c| c.weight >= weight_floor)
        .cloned()
        .collect();
    if pool.is_empty() {
        // Keep the single strongest component rather than emptying the track.
        let best = p
            .components
            .iter()
            .max_by(|a, b| a.weight.total_cmp(&b.weight))
            .expect("mixtures are non-empty");
        pool.push(best.clone());
    }

    let mut merged: Vec<GaussianComponent> = Vec::new();
    let mut alive: Vec<bool> = vec![true; pool.len()];
    let mut remaining = pool.len();
    while remaining > 0 {
        let pivot = (0..pool.len())
            .filter(|&i| alive[i])
            .max_by(|&a, &b| {
                pool[a]
                    .weight
                    .total_cmp(&pool[b].weight)
                    .then_with(|| b.cmp(&a))
            })
            .unwrap();
        let mut cluster = Vec::new();
        for i in 0..pool.len() {
            if !alive[i] {
                continue;
            }
            let chol = cholesky(&pool[i].covariance, "mixture merge")?;
            let d = &pool[i].mean - &pool[pivot].mean;
            let solved = chol
                .l()
                .solve_lower_triangular(&d)
                .expect("triangular solve");
            if solved.norm_squared() <= merge_distance {
                cluster.push(i);
                alive[i] = false;
                remaining -= 1;
            }
        }
        let w: f64 = cluster.iter().map(|&i| pool[i].weight).sum();
        let mut mean = DVector::zeros(p.dim());
        for &i in &cluster {
            mean += pool[i].weight * &pool[i].mean;
        }
        mean /= w;
        let mut cov = DMatrix::zeros(p.dim(), p.dim());
        for &i in &cluster {
            let d = &pool[i].mean - &mean;
            cov += pool[i].weight * (&pool[i].covariance + &d * d.transpose());
        }
        cov /= w;
        merged.push(GaussianComponent::new(w, mean, cov));
    }

    merged.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    merged.truncate(max_components.max(1));
    GaussianMixture::new(merged)
}
