use serde::Serialize;

use crate::error::Result;
use crate::linalg::C64;
use crate::ncalg::MatrixTuple;
use crate::ncdomain::Domain;
use crate::par::trial_rng;

/// A domain member at which the tested inequality fails.
#[derive(Debug, Clone, Serialize)]
pub struct PointWitness {
    pub x: MatrixTuple,
    pub domain_margin: f64,
    /// Smallest eigenvalue of the tested Hermitian matrix (negative).
    pub value: f64,
}

const FRACTIONS: usize = 20;
const RANDOM_RAYS: usize = 24;
const RAY_CAP: f64 = 1e3;

/// Scans rays from the origin (coordinate rays, then random rays of sizes
/// 1 to 3) at fractions `k/20` and `0.999` of the exit distance, keeping
/// the point maximizing `min(domain margin, −value)`.
pub fn search_witness(
    domain: &Domain,
    value: impl Fn(&MatrixTuple) -> Result<f64>,
    seed: u64,
) -> Result<Option<PointWitness>> {
    let g = domain.g();
    let mut rays: Vec<MatrixTuple> = Vec::new();
    let mut units = vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];
    if !domain.hermitian_variables() {
        units.extend([C64::new(0.0, 1.0), C64::new(0.0, -1.0)]);
    }
    for j in 0..g {
        for u in &units {
            let mut xs = vec![C64::new(0.0, 0.0); g];
            xs[j] = *u;
            rays.push(MatrixTuple::scalars(&xs));
        }
    }
    let mut rng = trial_rng(seed, 0);
    for k in 0..RANDOM_RAYS {
        rays.push(domain.random_direction(&mut rng, 1 + k % 3));
    }
    let mut best: Option<(f64, PointWitness)> = None;
    for d in rays {
        let zero = MatrixTuple::zeros(g, d.n());
        let end = domain.chord_end(&zero, &d, RAY_CAP)?;
        let ts = (1..FRACTIONS).map(|k| k as f64 / FRACTIONS as f64).chain([0.999]);
        for frac in ts {
            let x = d.scale(C64::new(frac * end, 0.0));
            let margin = domain.margin(&x)?;
            if margin <= 0.0 {
                continue;
            }
            let v = value(&x)?;
            if v >= -1e-9 {
                continue;
            }
            let robust = margin.min(-v);
            if best.as_ref().is_none_or(|(r, _)| robust > *r) {
                best = Some((robust, PointWitness { x, domain_margin: margin, value: v }));
            }
        }
    }
    Ok(best.map(|(_, w)| w))
}
