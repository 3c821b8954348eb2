//! Brute-force oracle checks runnable from the command line, for CI and
//! spot verification. Sizes are capped to what exhaustive enumeration can
//! handle; anything larger is refused.

use anyhow::{bail, Result};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use glmb::assignment::{ranked_assignments, CostMatrix};
use glmb::density::{GlmbDensity, Hypothesis};
use glmb::filter::{update_step_with_requests, FilterConfig};
use glmb::gaussian::{GaussianComponent, GaussianMixture};
use glmb::kshortest::k_shortest_subsets;
use glmb::label::Label;
use glmb::model::{ClutterIntensity, LinearGaussianModel};
use glmb::oracle;

const MAX_ASSIGN_ROWS: usize = 5;
const MAX_ASSIGN_COLS: usize = 6;
const MAX_KSP_NODES: usize = 16;
const MAX_UPDATE_TRACKS: usize = 3;
const MAX_UPDATE_MEAS: usize = 3;

/// Ranked assignment against exhaustive enumeration.
pub fn cmd_assign(rows: usize, cols: usize, seeds: u64) -> Result<i32> {
    if rows > MAX_ASSIGN_ROWS || cols > MAX_ASSIGN_COLS {
        bail!(
            "refusing: enumeration is exhaustive, sizes are capped at {MAX_ASSIGN_ROWS}x{MAX_ASSIGN_COLS}"
        );
    }
    let mut max_dev = 0.0_f64;
    for seed in 0..seeds {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| rng.random_range(-5.0..5.0))
            .collect();
        let cost = CostMatrix::new(rows, cols, data)?;
        let expected = oracle::ranked_assignments_brute(&cost);
        let got = ranked_assignments(&cost, expected.len().max(1))?;
        if got.len() != expected.len() {
            println!(
                "FAIL assign seed {seed}: {} maps vs {}",
                got.len(),
                expected.len()
            );
            return Ok(2);
        }
        for (g, (map, c)) in got.iter().zip(&expected) {
            if g.map.assignment() != map.as_slice() {
                println!("FAIL assign seed {seed}: order mismatch");
                return Ok(2);
            }
            max_dev = max_dev.max((g.cost - c).abs());
        }
    }
    println!("PASS assign {rows}x{cols}, {seeds} seeds, max cost deviation {max_dev:.3e}");
    Ok(0)
}

/// K-shortest subsets against exhaustive subset sort.
pub fn cmd_ksp(size: usize, seeds: u64) -> Result<i32> {
    if size > MAX_KSP_NODES {
        bail!("refusing: enumeration is exhaustive, size is capped at {MAX_KSP_NODES} nodes");
    }
    let mut max_dev = 0.0_f64;
    for seed in 0..seeds {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let costs: Vec<f64> = (0..size).map(|_| rng.random_range(-4.0..4.0)).collect();
        let expected = oracle::ranked_subsets_brute(&costs);
        let got = k_shortest_subsets(&costs, 1 << size)?;
        if got.len() != expected.len() {
            println!(
                "FAIL ksp seed {seed}: {} subsets vs {}",
                got.len(),
                expected.len()
            );
            return Ok(2);
        }
        for (g, (members, c)) in got.iter().zip(&expected) {
            if &g.members != members {
                println!("FAIL ksp seed {seed}: order mismatch");
                return Ok(2);
            }
            max_dev = max_dev.max((g.total_cost - c).abs());
        }
    }
    println!("PASS ksp n={size}, {seeds} seeds, max cost deviation {max_dev:.3e}");
    Ok(0)
}

/// Exhaustive-T Bayes update against the direct evaluation.
pub fn cmd_update(tracks: usize, meas: usize, seeds: u64) -> Result<i32> {
    if tracks > MAX_UPDATE_TRACKS || meas > MAX_UPDATE_MEAS {
        bail!(
            "refusing: enumeration is exhaustive, sizes are capped at {MAX_UPDATE_TRACKS} tracks and {MAX_UPDATE_MEAS} measurements"
        );
    }
    let model = LinearGaussianModel::constant_velocity_2d(
        1.0,
        5.0,
        10.0,
        0.99,
        0.88,
        ClutterIntensity::Uniform { density: 1.65e-5 },
        vec![],
    );
    let config = FilterConfig {
        j_max: 1_000_000,
        lookahead_enabled: false,
        weight_floor: 0.0,
        ..FilterConfig::default()
    };
    let mut max_dev = 0.0_f64;
    for seed in 0..seeds {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let hyp_tracks: std::collections::BTreeMap<Label, GaussianMixture> = (0..tracks)
            .map(|i| {
                let mean = DVector::from_fn(4, |_, _| rng.random_range(-60.0..60.0));
                let cov = DMatrix::identity(4, 4) * rng.random_range(4.0..30.0);
                (
                    Label::new(0, i as u32 + 1),
                    GaussianMixture::new(vec![GaussianComponent::new(1.0, mean, cov)]).unwrap(),
                )
            })
            .collect();
        let prior = GlmbDensity {
            hypotheses: vec![Hypothesis::new(0.0, hyp_tracks)],
            time_index: 0,
        };
        let measurements: Vec<DVector<f64>> = (0..meas)
            .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-80.0..80.0)))
            .collect();
        let requests = vec![1_000_000; 1];
        let (got, _) =
            update_step_with_requests(&prior, &measurements, &model, &config, &requests)?;
        let expected = oracle::update_direct(&prior, &measurements, &model);
        if got.len() != expected.len() {
            println!(
                "FAIL update seed {seed}: {} children vs {}",
                got.len(),
                expected.len()
            );
            return Ok(2);
        }
        for g in &got.hypotheses {
            let e = expected
                .hypotheses
                .iter()
                .find(|e| e.provenance == g.provenance)
                .expect("oracle enumerates every association map");
            let scale = g.weight().abs().max(e.weight().abs()).max(1e-300);
            max_dev = max_dev.max((g.weight() - e.weight()).abs() / scale);
        }
    }
    if max_dev <= 1e-9 {
        println!("PASS update |I|={tracks} |Z|={meas}, {seeds} seeds, max relative deviation {max_dev:.3e}");
        Ok(0)
    } else {
        println!("FAIL update: max relative deviation {max_dev:.3e} exceeds 1e-9");
        Ok(2)
    }
}
