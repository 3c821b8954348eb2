//! Linear-Gaussian multi-target scenario generation: ground-truth
//! trajectories and noisy measurement scans with misdetection and Poisson
//! clutter.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GlmbError, Result};
use crate::gaussian::GaussianMixture;
use crate::model::{BirthComponent, ClutterIntensity, LinearGaussianModel};

pub const SCENARIO_FORMAT: &str = "glmb-scenario";
pub const SCENARIO_VERSION: u32 = 1;

/// Axis-aligned surveillance rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Region {
    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }
}

/// One ground-truth track: a constant-velocity segment alive on
/// `[birth_step, death_step)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTrack {
    pub birth_step: u32,
    pub death_step: u32,
    /// State (px, py, vx, vy) at the birth step.
    pub initial_state: [f64; 4],
    /// Which birth component (1-based index) this track appears near.
    pub birth_site: u32,
}

/// One birth component of the filter model, in file form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthSpec {
    pub existence: f64,
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

/// Constant-velocity model constants, in file form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Sampling period (s).
    pub dt: f64,
    /// Process noise standard deviation (m/s^2).
    pub process_noise_std: f64,
    /// Measurement noise standard deviation (m).
    pub measurement_noise_std: f64,
    pub survival_prob: f64,
    pub detection_prob: f64,
    /// Expected clutter points per scan, uniform over the region. The
    /// filter's clutter intensity is this divided by the region area.
    pub clutter_mean_per_scan: f64,
    pub births: Vec<BirthSpec>,
}

/// Complete scenario description: model constants, region, truth table, seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub format: String,
    pub version: u32,
    /// Number of scans K; steps run 0..K.
    pub duration: u32,
    pub region: Region,
    pub seed: u64,
    /// Straight-line truth when false (the reference setting); sampled
    /// process noise when true.
    pub truth_process_noise: bool,
    pub model: ModelSpec,
    pub truth: Vec<TruthTrack>,
}

impl ScenarioSpec {
    /// Schema and range checks; returns every problem found.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.format != SCENARIO_FORMAT {
            errors.push(format!(
                "format must be {SCENARIO_FORMAT:?}, got {:?}",
                self.format
            ));
        }
        if self.version != SCENARIO_VERSION {
            errors.push(format!("unsupported version {}", self.version));
        }
        if self.duration == 0 {
            errors.push("duration must be positive".into());
        }
        if self.region.area() <= 0.0 {
            errors.push("region must have positive area".into());
        }
        if self.model.dt <= 0.0 {
            errors.push("model.dt must be positive".into());
        }
        if self.model.process_noise_std < 0.0 {
            errors.push("model.process_noise_std must be non-negative".into());
        }
        if self.model.measurement_noise_std <= 0.0 {
            errors.push("model.measurement_noise_std must be positive".into());
        }
        for (name, p) in [
            ("model.survival_prob", self.model.survival_prob),
            ("model.detection_prob", self.model.detection_prob),
        ] {
            if !(p > 0.0 && p < 1.0) {
                errors.push(format!("{name} must lie strictly inside (0,1), got {p}"));
            }
        }
        if !self.model.clutter_mean_per_scan.is_finite() || self.model.clutter_mean_per_scan <= 0.0
        {
            errors.push("model.clutter_mean_per_scan must be positive".into());
        }
        if self.model.births.is_empty() {
            errors.push("model.births must list at least one birth component".into());
        }
        for (i, b) in self.model.births.iter().enumerate() {
            if !(b.existence > 0.0 && b.existence < 1.0) {
                errors.push(format!(
                    "model.births[{i}].existence must lie strictly inside (0,1), got {}",
                    b.existence
                ));
            }
            if b.std.iter().any(|&s| s <= 0.0) {
                errors.push(format!("model.births[{i}].std entries must be positive"));
            }
        }
        for (i, t) in self.truth.iter().enumerate() {
            if t.birth_step >= t.death_step {
                errors.push(format!("truth[{i}]: birth step must precede death step"));
            }
            if t.death_step > self.duration {
                errors.push(format!("truth[{i}]: death step exceeds the duration"));
            }
            if !self.region.contains(t.initial_state[0], t.initial_state[1]) {
                errors.push(format!("truth[{i}]: initial position outside the region"));
            }
            if t.birth_site == 0 || t.birth_site as usize > self.model.births.len() {
                errors.push(format!("truth[{i}]: birth_site {} unknown", t.birth_site));
            }
        }
        errors
    }

    /// Builds the filter model from the file constants. The clutter
    /// intensity is the per-scan mean spread uniformly over the region.
    pub fn build_model(&self) -> Result<LinearGaussianModel> {
        let births = self
            .model
            .births
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let mean = DVector::from_row_slice(&b.mean);
                let cov = nalgebra::DMatrix::from_diagonal(&DVector::from_iterator(
                    4,
                    b.std.iter().map(|s| s * s),
                ));
                Ok(BirthComponent {
                    existence: b.existence,
                    density: GaussianMixture::single(mean, cov)?,
                    index: i as u32 + 1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = LinearGaussianModel::constant_velocity_2d(
            self.model.dt,
            self.model.process_noise_std,
            self.model.measurement_noise_std,
            self.model.survival_prob,
            self.model.detection_prob,
            ClutterIntensity::Uniform {
                density: self.model.clutter_mean_per_scan / self.region.area(),
            },
            births,
        );
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(text)
            .map_err(|e| GlmbError::InvalidInput(format!("scenario file: {e}")))?;
        let errors = spec.validate();
        if !errors.is_empty() {
            return Err(GlmbError::InvalidInput(errors.join("; ")));
        }
        Ok(spec)
    }

    /// The reference scenario: 10 straight-line tracks over 100 scans in a
    /// [-1000,1000]^2 region, with a crossing of 3 tracks at the origin at
    /// step 20 and pair crossings at (+/-300, 0) at step 40; three birth
    /// sites with existence 0.04 each; detection 0.88, survival 0.99, and
    /// 66 expected clutter points per scan. Per-track states not pinned by
    /// the stated structure were chosen to satisfy the crossings while
    /// staying near the birth sites.
    pub fn reference() -> Self {
        let track = |birth_step: u32, death_step: u32, site: u32, s: [f64; 4]| TruthTrack {
            birth_step,
            death_step,
            initial_state: s,
            birth_site: site,
        };
        ScenarioSpec {
            format: SCENARIO_FORMAT.into(),
            version: SCENARIO_VERSION,
            duration: 100,
            region: Region {
                min: [-1000.0, -1000.0],
                max: [1000.0, 1000.0],
            },
            seed: 2024,
            truth_process_noise: false,
            model: ModelSpec {
                dt: 1.0,
                process_noise_std: 5.0,
                measurement_noise_std: 10.0,
                survival_prob: 0.99,
                detection_prob: 0.88,
                clutter_mean_per_scan: 66.0,
                births: vec![
                    BirthSpec {
                        existence: 0.04,
                        mean: [0.0, 0.0, 100.0, 0.0],
                        std: [10.0, 10.0, 10.0, 10.0],
                    },
                    BirthSpec {
                        existence: 0.04,
                        mean: [-100.0, 0.0, -100.0, 0.0],
                        std: [10.0, 10.0, 10.0, 10.0],
                    },
                    BirthSpec {
                        existence: 0.04,
                        mean: [100.0, 0.0, -100.0, 0.0],
                        std: [10.0, 10.0, 10.0, 10.0],
                    },
                ],
            },
            truth: vec![
                track(0, 11, 1, [0.0, 0.0, 90.0, 10.0]),
                track(5, 15, 2, [-100.0, 10.0, -95.0, 5.0]),
                track(18, 36, 3, [120.0, -12.0, -60.0, 6.0]),
                track(19, 28, 3, [100.0, 5.0, -100.0, -5.0]),
                track(20, 30, 1, [0.0, 0.0, 100.0, 20.0]),
                track(36, 50, 1, [0.0, -16.0, 75.0, 4.0]),
                track(37, 46, 1, [0.0, 12.0, 100.0, -4.0]),
                track(38, 48, 2, [-108.0, 8.0, -96.0, -4.0]),
                track(35, 44, 3, [100.0, -10.0, -80.0, 2.0]),
                track(55, 65, 2, [-105.0, -5.0, -90.0, -10.0]),
            ],
        }
    }
}

/// Labeled truth states per step: `truth[k]` lists `(track index, state)` for
/// every track alive at step `k`. Deterministic given the scenario seed.
pub fn generate_truth(spec: &ScenarioSpec) -> Vec<Vec<(u32, DVector<f64>)>> {
    let dt = spec.model.dt;
    let sigma = spec.model.process_noise_std;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    rng.set_stream(0xA11CE); // truth stream, distinct from measurement streams

    let mut per_step: Vec<Vec<(u32, DVector<f64>)>> = vec![Vec::new(); spec.duration as usize];
    for (id, t) in spec.truth.iter().enumerate() {
        let mut state = DVector::from_row_slice(&t.initial_state);
        for k in t.birth_step..t.death_step.min(spec.duration) {
            per_step[k as usize].push((id as u32, state.clone()));
            // Constant-velocity step; optional white-acceleration noise.
            let mut next = state.clone();
            next[0] += dt * state[2];
            next[1] += dt * state[3];
            if spec.truth_process_noise && sigma > 0.0 {
                let ax: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
                let ay: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
                next[0] += 0.5 * dt * dt * ax;
                next[1] += 0.5 * dt * dt * ay;
                next[2] += dt * ax;
                next[3] += dt * ay;
            }
            state = next;
        }
    }
    per_step
}

/// True cardinality per step.
pub fn truth_cardinality(spec: &ScenarioSpec) -> Vec<usize> {
    generate_truth(spec).iter().map(|s| s.len()).collect()
}

/// Noisy measurement scans: each alive target is detected independently with
/// probability p_D and measured as Hx plus Gaussian noise; clutter is
/// Poisson over the region with the model mean, uniform in position.
/// Bit-reproducible for a fixed seed.
pub fn generate_measurements(
    truth: &[Vec<(u32, DVector<f64>)>],
    spec: &ScenarioSpec,
    seed: u64,
) -> Vec<Vec<DVector<f64>>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let pd = spec.model.detection_prob;
    let sigma = spec.model.measurement_noise_std;
    let poisson = Poisson::new(spec.model.clutter_mean_per_scan).expect("positive clutter mean");

    truth
        .iter()
        .map(|states| {
            let mut scan = Vec::new();
            for (_, x) in states {
                if rng.random::<f64>() < pd {
                    let nx: f64 = rng.sample(StandardNormal);
                    let ny: f64 = rng.sample(StandardNormal);
                    scan.push(DVector::from_vec(vec![
                        x[0] + sigma * nx,
                        x[1] + sigma * ny,
                    ]));
                }
            }
            let clutter_count = poisson.sample(&mut rng) as usize;
            for _ in 0..clutter_count {
                let x = rng.random_range(spec.region.min[0]..spec.region.max[0]);
                let y = rng.random_range(spec.region.min[1]..spec.region.max[1]);
                scan.push(DVector::from_vec(vec![x, y]));
            }
            scan
        })
        .collect()
}
