//! OSPA multi-object miss distance with its localization and cardinality
//! decomposition.
//!
//! For point sets X, Y with n = |X| <= m = |Y|, cutoff c and order p:
//!
//!   total        = [ (1/m) ( min over injections pi of sum_i d_c(x_i, y_pi(i))^p
//!                            + c^p (m - n) ) ]^(1/p)
//!   localization = [ (1/m) min_pi sum_i d_c(x_i, y_pi(i))^p ]^(1/p)
//!   cardinality  = [ c^p (m - n) / m ]^(1/p)
//!
//! where d_c = min(c, euclidean distance). Both sets empty gives 0. For
//! p = 1 the components add up to the total; in general the p-th powers do.
//! The optimal matching is found with the assignment solver on the
//! cutoff-distance matrix (shifted by -c^p so that a complete matching of
//! the smaller set is always optimal despite the solver's free-misdetection
//! convention).

use nalgebra::DVector;

use crate::assignment::{assignment_cost, solve_optimal_assignment, CostMatrix};
use crate::error::{GlmbError, Result};

/// OSPA distance and its decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OspaDistance {
    pub total: f64,
    pub localization: f64,
    pub cardinality: f64,
}

/// Euclidean distance on the planar position sub-vector (leading two
/// components) of each state.
fn position_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// OSPA between two state sets. States may carry velocity components; only
/// the leading planar position enters the distance.
pub fn ospa(
    xs: &[DVector<f64>],
    ys: &[DVector<f64>],
    cutoff: f64,
    order: f64,
) -> Result<OspaDistance> {
    if !cutoff.is_finite() || cutoff <= 0.0 {
        return Err(GlmbError::InvalidInput(
            "OSPA cutoff must be positive".into(),
        ));
    }
    if !order.is_finite() || order < 1.0 {
        return Err(GlmbError::InvalidInput(
            "OSPA order must be at least 1".into(),
        ));
    }
    if xs.is_empty() && ys.is_empty() {
        return Ok(OspaDistance {
            total: 0.0,
            localization: 0.0,
            cardinality: 0.0,
        });
    }
    let (small, large) = if xs.len() <= ys.len() {
        (xs, ys)
    } else {
        (ys, xs)
    };
    let (n, m) = (small.len(), large.len());
    let cp = cutoff.powf(order);

    let matched_power_sum = if n == 0 {
        0.0
    } else {
        // Entries d_c^p - c^p are non-positive, so the optimal assignment
        // matches every row of the smaller set (misdetection never helps).
        let data: Vec<f64> = small
            .iter()
            .flat_map(|x| {
                large
                    .iter()
                    .map(move |y| position_distance(x, y).min(cutoff).powf(order) - cp)
            })
            .collect();
        let cost = CostMatrix::new(n, m, data)?;
        let map = solve_optimal_assignment(&cost)?;
        assignment_cost(&cost, &map) + n as f64 * cp
    };

    let localization = (matched_power_sum / m as f64).powf(1.0 / order);
    let cardinality = (cp * (m - n) as f64 / m as f64).powf(1.0 / order);
    let total = ((matched_power_sum + cp * (m - n) as f64) / m as f64).powf(1.0 / order);
    Ok(OspaDistance {
        total,
        localization,
        cardinality,
    })
}
