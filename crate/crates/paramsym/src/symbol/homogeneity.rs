//! Numerical homogeneity checks along rays `t -> (x, t xi; t mu)`.

use serde::Serialize;

use super::eval::{Compiled, Point, CANCELLATION};
use super::expr::{Expr, C64};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HomogeneityMode {
    /// All `t > 0`, rays through the unit sphere of `(xi, mu)`.
    Joint,
    /// Only `|xi| >= 2` and `t >= 1`.
    LargeXi,
    /// Only `|(xi, mu)| >= 2` and `t >= 1`.
    LargeJoint,
}

#[derive(Clone, Debug, Serialize)]
pub struct HomogeneityReport {
    pub passed: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub samples: usize,
}

pub const HOMOGENEITY_TOL: f64 = 1e-10;

/// Unit vectors of `(xi, mu)` with `xi != 0`, deterministic.
pub fn sphere_directions(dim: usize) -> Vec<(Vec<f64>, f64)> {
    let angles = [0.0, 0.3, 0.7, 1.1, 1.4];
    let xi_dirs: Vec<Vec<f64>> = match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => vec![vec![1.0, 0.0], vec![0.6, -0.8], vec![-0.28, 0.96]],
        _ => vec![vec![1.0, 0.0, 0.0], vec![0.48, 0.6, 0.64], vec![0.0, -0.6, 0.8]],
    };
    let mut out = Vec::new();
    for d in &xi_dirs {
        for &a in &angles {
            let (s, c) = f64::sin_cos(a);
            out.push((d.iter().map(|v| v * c).collect(), s));
        }
    }
    out
}

pub fn sample_x(dim: usize, depends: bool) -> Vec<Vec<f64>> {
    if !depends {
        return vec![vec![0.0; dim]];
    }
    [0.0, 0.9, 2.3, 4.1].iter().map(|&v| (0..dim).map(|i| v + 0.37 * i as f64).collect()).collect()
}

/// Value with rounding-level cancellations set to zero.
fn denoised(c: &Compiled, p: &Point) -> Result<C64> {
    let (v, mass) = c.eval_with_mass(p)?;
    Ok(if v.norm() <= CANCELLATION * mass { C64::new(0.0, 0.0) } else { v })
}

pub fn check_homogeneity(a: &Expr, dim: usize, degree: f64, mode: HomogeneityMode) -> Result<HomogeneityReport> {
    let c = Compiled::new(a);
    let ts: Vec<f64> = match mode {
        HomogeneityMode::Joint => (-8..=8).map(|k| 10f64.powf(k as f64 / 4.0)).collect(),
        _ => (0..=8).map(|k| 10f64.powf(k as f64 / 4.0)).collect(),
    };
    let mut pairs = Vec::new();
    let mut scale: f64 = 0.0;
    for x in sample_x(dim, a.depends_on_x()) {
        for (xi, mu) in sphere_directions(dim) {
            let abs: f64 = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s = match mode {
                HomogeneityMode::Joint => 1.0,
                HomogeneityMode::LargeXi => 2.0 / abs,
                HomogeneityMode::LargeJoint => 2.0,
            };
            let xi: Vec<f64> = xi.iter().map(|v| v * s).collect();
            let mu = mu * s;
            let base = denoised(&c, &Point::symbol(&x, &xi, mu))?;
            scale = scale.max(base.norm());
            pairs.push((x.clone(), xi, mu, base));
        }
    }
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut dev: f64 = 0.0;
    let mut samples = 0;
    for (x, xi, mu, base) in &pairs {
        for &t in &ts {
            let txi: Vec<f64> = xi.iter().map(|v| v * t).collect();
            let v = denoised(&c, &Point::symbol(x, &txi, mu * t))?;
            let td = t.powf(degree);
            dev = dev.max((v - base * td).norm() / (td * scale));
            samples += 1;
        }
    }
    Ok(HomogeneityReport { passed: dev <= HOMOGENEITY_TOL, max_deviation: dev, tolerance: HOMOGENEITY_TOL, samples })
}
