//! Uncentered maximal operators over cube families.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::family::{cover_max, window_sums_1d, CubeFamily};
use crate::grid::{lp_norm, same_grid, weak_sup, GridFunction, WeightedMeasure};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MaximalResult {
    pub values: GridFunction,
    pub family: CubeFamily,
}

/// `Mf(x) = sup_{Q ∋ x} |Q|^{-1} ∫_Q |f|`.
pub fn hl_maximal(f: &GridFunction, family: CubeFamily) -> MaximalResult {
    let grid = *f.grid();
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let vals = cover_max(&grid, family, &abs, None);
    MaximalResult {
        values: GridFunction::new(grid, vals).expect("averages of finite values"),
        family,
    }
}

/// `M_w f(x) = sup_{Q ∋ x} w(Q)^{-1} ∫_Q |f| w`.
pub fn weighted_maximal(f: &GridFunction, w: &WeightedMeasure, family: CubeFamily) -> Result<MaximalResult> {
    same_grid(f.grid(), w.grid())?;
    let grid = *f.grid();
    let dens = w.density().values();
    let num: Vec<f64> = f
        .values()
        .iter()
        .zip(dens)
        .map(|(v, d)| v.abs() * d)
        .collect();
    let vals = cover_max(&grid, family, &num, Some(dens));
    Ok(MaximalResult {
        values: GridFunction::new(grid, vals)?,
        family,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakRatio {
    /// `sup_t t w({M_w f > t}) / ‖f‖_{L^1(w)}`.
    pub ratio: f64,
    pub weak_sup: f64,
    pub l1_norm: f64,
    /// Level attaining the sup.
    pub argmax: f64,
}

/// Empirical weak (1,1) ratio of `M_w`, exact over the finitely many levels
/// of the discrete maximal function.
pub fn weak11_ratio(f: &GridFunction, w: &WeightedMeasure, family: CubeFamily) -> Result<WeakRatio> {
    if f.is_zero() {
        return Err(Error::InvalidArgument("weak (1,1) ratio of the zero function".into()));
    }
    let mf = weighted_maximal(f, w, family)?;
    let ws = weak_sup(&mf.values, w, 1.0)?;
    let l1 = lp_norm(f, w, 1.0)?;
    Ok(WeakRatio {
        ratio: ws.sup / l1,
        weak_sup: ws.sup,
        l1_norm: l1,
        argmax: ws.argmax,
    })
}

/// Radial kernel profile `K(x) = k(|x|)` on the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadialProfile {
    /// Indicator of `|x| ≤ radius`, normalized by the number of cells it
    /// covers so that the discrete kernel has unit mass.
    Indicator { radius: f64 },
    /// `scale^δ / |x|^{1+δ}` on `|x| > scale/2`, zero inside.
    TruncatedPower { scale: f64, delta: f64 },
    /// Values at cell offsets `0, 1, 2, ...` (in units of `h`); missing
    /// offsets are zero.
    Tabulated { values: Vec<f64> },
}

impl RadialProfile {
    /// Discrete kernel at offsets `0..len`, per unit length.
    fn discrete(&self, h: f64, len: usize) -> Result<Vec<f64>> {
        let k: Vec<f64> = match self {
            RadialProfile::Indicator { radius } => {
                if !(*radius >= 0.0) {
                    return Err(Error::InvalidArgument(format!("indicator radius {radius}")));
                }
                let reach = (0..len).take_while(|&d| d as f64 * h <= radius + 1e-12 * h).count();
                let count = (2 * reach - 1) as f64;
                (0..len)
                    .map(|d| if d < reach { 1.0 / (count * h) } else { 0.0 })
                    .collect()
            }
            RadialProfile::TruncatedPower { scale, delta } => {
                if !(*scale > 0.0 && *delta > 0.0 && *delta <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "truncated power needs scale > 0 and delta in (0, 1], got {scale}, {delta}"
                    )));
                }
                (0..len)
                    .map(|d| {
                        let r = d as f64 * h;
                        if r > scale / 2.0 {
                            scale.powf(*delta) / r.powf(1.0 + delta)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            RadialProfile::Tabulated { values } => (0..len)
                .map(|d| values.get(d).copied().unwrap_or(0.0))
                .collect(),
        };
        if k.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("profile must be finite and nonnegative".into()));
        }
        // nonincreasing once it becomes positive
        let start = k.iter().position(|&v| v > 0.0).unwrap_or(len);
        if k[start..].windows(2).any(|p| p[1] > p[0]) {
            return Err(Error::InvalidArgument(
                "profile must be nonincreasing past its inner cutoff".into(),
            ));
        }
        Ok(k)
    }

    /// `‖K‖_{L^1(R)}` in the continuum, when known in closed form.
    fn continuum_norm(&self) -> Option<f64> {
        match self {
            RadialProfile::Indicator { .. } => Some(1.0),
            RadialProfile::TruncatedPower { delta, .. } => Some(2.0f64.powf(1.0 + delta) / delta),
            RadialProfile::Tabulated { .. } => None,
        }
    }

    /// `‖K̃‖_{L^1(R)}` for the least nonincreasing majorant `K̃`.
    fn continuum_majorant_norm(&self) -> Option<f64> {
        match self {
            RadialProfile::TruncatedPower { delta, .. } => {
                // the gap |x| ≤ scale/2 is filled with the value 2^{1+δ}/scale
                Some(2.0f64.powf(1.0 + delta) / delta + 2.0f64.powf(1.0 + delta))
            }
            other => other.continuum_norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialCheck {
    /// `max_x (|f| * K)(x) - ‖K̃‖_1 Mf(x)`.
    pub max_violation: f64,
    pub epsilon_h: f64,
    /// `‖K‖_1` of the profile itself.
    pub profile_norm: f64,
    /// `‖K̃‖_1` of its least nonincreasing majorant, the constant in the bound.
    pub majorant_norm: f64,
    /// Discrete counterpart of `majorant_norm`.
    pub discrete_norm: f64,
}

impl RadialCheck {
    pub fn passed(&self) -> bool {
        self.max_violation <= self.epsilon_h.max(1e-12 * self.discrete_norm.max(1.0))
    }
}

/// Averages of `v` over the windows `[x - r, x + r]`, zero outside. Each
/// value is formed from the same window sums as the maximal function, so
/// it never exceeds `Mf(x)` even in floating point.
fn centered_averages(v: &[f64], r: usize) -> Vec<f64> {
    let n = v.len();
    let s = 2 * r + 1;
    let mut sums: HashMap<usize, Vec<f64>> = HashMap::new();
    (0..n)
        .map(|x| {
            let lo = x.saturating_sub(r);
            let len = (x + r + 1).min(n) - lo;
            let w = sums.entry(len).or_insert_with(|| window_sums_1d(v, len));
            w[lo] / s as f64
        })
        .collect()
}

/// Compares `|f| * K` with `‖K̃‖_1 Mf` on a one-dimensional grid, `M` over
/// all intervals.
///
/// Layer-cake over the discrete majorant gives `|f| * K ≤ ‖K̃‖_disc Mf`
/// exactly, so the only slack is the gap between the discrete and continuum
/// norms plus one cell of variation of `Mf`:
/// `ε_h = max Mf · |‖K̃‖_disc - ‖K̃‖_1| + ‖K̃‖_1 · max_x |Mf(x+h) - Mf(x)|`.
pub fn radial_majorant_check(f: &GridFunction, profile: &RadialProfile) -> Result<RadialCheck> {
    let grid = *f.grid();
    if grid.dim() != 1 {
        return Err(Error::Precondition("radial majorant check is one-dimensional".into()));
    }
    let n = grid.cells_per_axis();
    let h = grid.cell_width();
    let k = profile.discrete(h, n)?;
    let mut k_major = k.clone();
    if let Some(start) = k.iter().position(|&v| v > 0.0) {
        for v in &mut k_major[..start] {
            *v = k[start];
        }
    }
    let mass = |ker: &[f64]| (ker[0] + 2.0 * ker[1..].iter().sum::<f64>()) * h;
    let profile_disc = mass(&k);
    let discrete_norm = mass(&k_major);
    let profile_norm = profile.continuum_norm().unwrap_or(profile_disc);
    let majorant_norm = profile.continuum_majorant_norm().unwrap_or(discrete_norm);

    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let mf = hl_maximal(f, CubeFamily::Exhaustive).values.into_values();
    let conv = match profile {
        RadialProfile::Indicator { .. } => {
            let reach = k.iter().take_while(|&&v| v > 0.0).count();
            centered_averages(&abs, reach - 1)
        }
        _ => par::map_collect(n, |x| {
            (0..n)
                .map(|y| k[x.abs_diff(y)] * abs[y])
                .sum::<f64>()
                * h
        }),
    };
    let max_violation = conv
        .iter()
        .zip(&mf)
        .map(|(c, m)| c - majorant_norm * m)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_mf = mf.iter().cloned().fold(0.0, f64::max);
    let omega = mf
        .windows(2)
        .map(|p| (p[1] - p[0]).abs())
        .fold(0.0, f64::max);
    let epsilon_h = match profile {
        // the discrete kernel is an average: the comparison is exact
        RadialProfile::Indicator { .. } => 0.0,
        _ => max_mf * (discrete_norm - majorant_norm).abs() + majorant_norm * omega,
    };
    Ok(RadialCheck {
        max_violation,
        epsilon_h,
        profile_norm,
        majorant_norm,
        discrete_norm,
    })
}
