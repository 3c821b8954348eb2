//! Linear-Gaussian multi-target model: motion, measurement, clutter and birth.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{GlmbError, Result};
use crate::gaussian::GaussianMixture;
use crate::label::Label;

/// Evaluable clutter intensity function.
pub type IntensityFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// Evaluable clutter intensity kappa(z). The reference scenario uses a
/// constant level over the observation region, but non-uniform intensities
/// are representable.
#[derive(Clone)]
pub enum ClutterIntensity {
    /// Constant intensity (per unit area of measurement space).
    Uniform { density: f64 },
    /// Arbitrary evaluable intensity.
    Custom(IntensityFn),
}

impl ClutterIntensity {
    pub fn eval(&self, z: &DVector<f64>) -> f64 {
        match self {
            ClutterIntensity::Uniform { density } => *density,
            ClutterIntensity::Custom(f) => f(z),
        }
    }
}

impl fmt::Debug for ClutterIntensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClutterIntensity::Uniform { density } => {
                f.debug_struct("Uniform").field("density", density).finish()
            }
            ClutterIntensity::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// One labeled multi-Bernoulli birth component.
#[derive(Debug, Clone)]
pub struct BirthComponent {
    /// Birth existence probability r_B, strictly inside (0,1).
    pub existence: f64,
    /// Birth kinematic density p_B.
    pub density: GaussianMixture,
    /// Per-step label index (1-based); a track born at step k from this
    /// component carries label (k, index).
    pub index: u32,
}

/// Per-label parameter overrides; anything unset falls back to the globals.
#[derive(Debug, Clone, Default)]
pub struct LabelOverrides {
    pub detection_prob: Option<f64>,
    pub survival_prob: Option<f64>,
    /// (H, R) override.
    pub observation: Option<(DMatrix<f64>, DMatrix<f64>)>,
    /// (F, Q) override.
    pub motion: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

/// All model constants of the linear-Gaussian multi-target problem.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    /// State transition matrix F.
    pub transition: DMatrix<f64>,
    /// Process noise covariance Q.
    pub process_noise: DMatrix<f64>,
    /// Survival probability p_S in (0,1).
    pub survival_prob: f64,
    /// Observation matrix H.
    pub observation: DMatrix<f64>,
    /// Observation noise covariance R.
    pub observation_noise: DMatrix<f64>,
    /// Detection probability p_D in (0,1).
    pub detection_prob: f64,
    /// Clutter intensity kappa(z).
    pub clutter: ClutterIntensity,
    /// Birth components.
    pub births: Vec<BirthComponent>,
    /// Per-label parameter overrides.
    pub overrides: BTreeMap<Label, LabelOverrides>,
}

impl LinearGaussianModel {
    /// Checks probability ranges and matrix shapes. Probabilities at 0 or 1
    /// are rejected because they yield infinite log-odds costs downstream.
    pub fn validate(&self) -> Result<()> {
        let x_dim = self.transition.nrows();
        if self.transition.ncols() != x_dim {
            return Err(GlmbError::InvalidInput("F must be square".into()));
        }
        if self.process_noise.shape() != (x_dim, x_dim) {
            return Err(GlmbError::InvalidInput(
                "Q must match the state dimension".into(),
            ));
        }
        let z_dim = self.observation.nrows();
        if self.observation.ncols() != x_dim {
            return Err(GlmbError::InvalidInput(
                "H columns must match the state dimension".into(),
            ));
        }
        if self.observation_noise.shape() != (z_dim, z_dim) {
            return Err(GlmbError::InvalidInput(
                "R must match the measurement dimension".into(),
            ));
        }
        for (name, p) in [("p_S", self.survival_prob), ("p_D", self.detection_prob)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(GlmbError::InvalidInput(format!(
                    "{name} must lie strictly inside (0,1), got {p}"
                )));
            }
        }
        for b in &self.births {
            if !(b.existence > 0.0 && b.existence < 1.0) {
                return Err(GlmbError::InvalidInput(format!(
                    "birth existence must lie strictly inside (0,1), got {}",
                    b.existence
                )));
            }
            if b.density.dim() != x_dim {
                return Err(GlmbError::InvalidInput(
                    "birth density dimension mismatch".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.transition.nrows()
    }

    pub fn measurement_dim(&self) -> usize {
        self.observation.nrows()
    }

    pub fn detection_prob_for(&self, label: Label) -> f64 {
        self.overrides
            .get(&label)
            .and_then(|o| o.detection_prob)
            .unwrap_or(self.detection_prob)
    }

    pub fn survival_prob_for(&self, label: Label) -> f64 {
        self.overrides
            .get(&label)
            .and_then(|o| o.survival_prob)
            .unwrap_or(self.survival_prob)
    }

    pub fn observation_for(&self, label: Label) -> (DMatrix<f64>, DMatrix<f64>) {
        self.overrides
            .get(&label)
            .and_then(|o| o.observation.clone())
            .unwrap_or_else(|| (self.observation.clone(), self.observation_noise.clone()))
    }

    pub fn motion_for(&self, label: Label) -> (DMatrix<f64>, DMatrix<f64>) {
        self.overrides
            .get(&label)
            .and_then(|o| o.motion.clone())
            .unwrap_or_else(|| (self.transition.clone(), self.process_noise.clone()))
    }

    /// Planar constant-velocity model with state (px, py, vx, vy): block
    /// transition [I dI; 0 I], white-acceleration process noise with standard
    /// deviation `sigma_process`, position-only measurements with isotropic
    /// noise `sigma_meas`.
    pub fn constant_velocity_2d(
        dt: f64,
        sigma_process: f64,
        sigma_meas: f64,
        survival_prob: f64,
        detection_prob: f64,
        clutter: ClutterIntensity,
        births: Vec<BirthComponent>,
    ) -> Self {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let mut f = DMatrix::<f64>::identity(4, 4);
        f.view_mut((0, 2), (2, 2)).copy_from(&(dt * &i2));
        let q2 = sigma_process * sigma_process;
        let mut q = DMatrix::<f64>::zeros(4, 4);
        q.view_mut((0, 0), (2, 2))
            .copy_from(&(q2 * dt.powi(4) / 4.0 * &i2));
        q.view_mut((0, 2), (2, 2))
            .copy_from(&(q2 * dt.powi(3) / 2.0 * &i2));
        q.view_mut((2, 0), (2, 2))
            .copy_from(&(q2 * dt.powi(3) / 2.0 * &i2));
        q.view_mut((2, 2), (2, 2))
            .copy_from(&(q2 * dt.powi(2) * &i2));
        let mut h = DMatrix::<f64>::zeros(2, 4);
        h.view_mut((0, 0), (2, 2)).copy_from(&i2);
        let r = sigma_meas * sigma_meas * i2;
        LinearGaussianModel {
            transition: f,
            process_noise: q,
            survival_prob,
            observation: h,
            observation_noise: r,
            detection_prob,
            clutter,
            births,
            overrides: BTreeMap::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cv2d_block_structure() {
        let m = LinearGaussianModel::constant_velocity_2d(
            1.0,
            5.0,
            10.0,
            0.99,
            0.88,
            ClutterIntensity::Uniform { density: 1.65e-5 },
            vec![],
        );
        m.validate().unwrap();
        assert_eq!(m.transition[(0, 2)], 1.0);
        assert_eq!(m.transition[(1, 3)], 1.0);
        assert_eq!(m.process_noise[(2, 2)], 25.0);
        assert_eq!(m.process_noise[(0, 0)], 6.25);
        assert_eq!(m.process_noise[(0, 2)], 12.5);
        assert_eq!(m.observation[(0, 0)], 1.0);
        assert_eq!(m.observation[(0, 2)], 0.0);
        assert_eq!(m.observation_noise[(1, 1)], 100.0);
    }

    #[test]
    fn rejects_probability_endpoints() {
        let mut m = LinearGaussianModel::constant_velocity_2d(
            1.0,
            5.0,
            10.0,
            1.0,
            0.88,
            ClutterIntensity::Uniform { density: 1.0 },
            vec![],
        );
        assert!(m.validate().is_err());
        m.survival_prob = 0.99;
        m.detection_prob = 0.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn overrides_fall_back_to_globals() {
        let mut m = LinearGaussianModel::constant_velocity_2d(
            1.0,
            5.0,
            10.0,
            0.99,
            0.88,
            ClutterIntensity::Uniform { density: 1.0 },
            vec![],
        );
        let l = Label::new(3, 1);
        assert_eq!(m.detection_prob_for(l), 0.88);
        m.overrides.insert(
            l,
            LabelOverrides {
                detection_prob: Some(0.5),
                ..Default::default()
            },
        );
        assert_eq!(m.detection_prob_for(l), 0.5);
        assert_eq!(m.survival_prob_for(l), 0.99);
    }
}
