//! Statistics on walk distributions.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{OqrwError, Result};
use crate::walk::WalkDistribution;

/// Normal tails beyond this many standard deviations are treated as one lump.
const TAIL_SIGMAS: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub total_mass: f64,
}

/// `mean = Σ i p_i`, `variance = Σ i² p_i − mean²` (clamped at zero).
pub fn moments(d: &WalkDistribution) -> MomentSummary {
    let mut mean = 0.0;
    let mut total_mass = 0.0;
    for (v, p) in d.iter() {
        mean += v as f64 * p;
        total_mass += p;
    }
    // centre before squaring to keep far-from-origin supports accurate
    let variance = d
        .iter()
        .map(|(v, p)| {
            let dx = v as f64 - mean;
            dx * dx * p
        })
        .sum::<f64>()
        + mean * mean * (1.0 - total_mass);
    MomentSummary {
        mean,
        variance: variance.max(0.0),
        total_mass,
    }
}

/// `(1/2) Σ |a_i − b_i|` over the union of supports.
pub fn total_variation(a: &WalkDistribution, b: &WalkDistribution) -> f64 {
    // one pass over the sorted union so that swapping arguments is bit-exact
    let keys: BTreeSet<i64> = a.probs().keys().chain(b.probs().keys()).copied().collect();
    0.5 * keys.into_iter().map(|v| (a.get(v) - b.get(v)).abs()).sum::<f64>()
}

/// Total variation between `d` and the normal law with the same mean and
/// variance, integrated over lattice cells. When the support sits on a single
/// parity class the cells have width 2 and are centred on that class.
pub fn gaussian_discrepancy(d: &WalkDistribution) -> Result<f64> {
    let m = moments(d);
    if m.variance <= 1e-12 {
        return Err(OqrwError::Degenerate(format!("variance {} is zero", m.variance)));
    }
    let support: Vec<i64> = d.iter().filter(|(_, p)| *p > 0.0).map(|(v, _)| v).collect();
    let anchor = support[0];
    let width: i64 = if support.iter().all(|v| (v - anchor).rem_euclid(2) == 0) { 2 } else { 1 };
    let sigma = m.variance.sqrt();
    let normal = Normal::new(m.mean, sigma).map_err(|e| OqrwError::Degenerate(e.to_string()))?;

    let reach = TAIL_SIGMAS * sigma + width as f64;
    let lo = (m.mean - reach).floor() as i64;
    let hi = (m.mean + reach).ceil() as i64;
    let lo = lo.min(support[0]);
    let hi = hi.max(*support.last().expect("non-empty support"));
    // first grid point ≥ lo on the anchor's class
    let first = lo + (anchor - lo).rem_euclid(width);

    let half = width as f64 / 2.0;
    let mut sum = 0.0;
    let mut covered = 0.0;
    let mut x = first;
    while x <= hi {
        let mass = normal.cdf(x as f64 + half) - normal.cdf(x as f64 - half);
        covered += mass;
        sum += (d.get(x) - mass).abs();
        x += width;
    }
    sum += (1.0 - covered).max(0.0);
    Ok(0.5 * sum)
}

/// `√(1−a²)(1−λx) / (π(1−x²)√(a²−x²))` on `|x| < a`.
pub fn konno_density(a: f64, lambda: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(OqrwError::Parameter(format!("a = {a} must lie in (0, 1)")));
    }
    if x.is_nan() || x.abs() >= a {
        return Err(OqrwError::OutsideSupport(format!("|x| = {} is not below a = {a}", x.abs())));
    }
    Ok((1.0 - a * a).sqrt() * (1.0 - lambda * x) / (PI * (1.0 - x * x) * (a * a - x * x).sqrt()))
}
