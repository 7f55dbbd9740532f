//! Haar wavelets and hierarchical (hat) bases on `[0,1]`, the Haar `L²`
//! projection, and edge bases sampled on fine edge resolutions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletKind {
    Haar,
    Hierarchical,
}

impl FromStr for WaveletKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(Self::Haar),
            "hierarchical" => Ok(Self::Hierarchical),
            _ => Err(Error::Config(format!("unknown wavelet kind {s:?}"))),
        }
    }
}

impl fmt::Display for WaveletKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Haar => "haar",
            Self::Hierarchical => "hierarchical",
        })
    }
}

/// A wavelet family truncated at `level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WaveletSpec {
    pub kind: WaveletKind,
    pub level: u32,
}

impl WaveletSpec {
    pub fn haar(level: u32) -> Self {
        Self {
            kind: WaveletKind::Haar,
            level,
        }
    }

    pub fn hierarchical(level: u32) -> Self {
        Self {
            kind: WaveletKind::Hierarchical,
            level,
        }
    }

    /// `dim V_ℓ`: `2^ℓ` for Haar, `2^ℓ + 1` for the hierarchical basis.
    pub fn dim(&self) -> usize {
        match self.kind {
            WaveletKind::Haar => 1 << self.level,
            WaveletKind::Hierarchical => (1 << self.level) + 1,
        }
    }

    /// `(level, j)` of every function in `V_ℓ`, coarse to fine.
    pub fn indices(&self) -> Vec<(u32, usize)> {
        let mut out = Vec::with_capacity(self.dim());
        match self.kind {
            WaveletKind::Haar => {
                out.push((0, 0));
                for m in 1..=self.level {
                    out.extend((0..1usize << (m - 1)).map(|j| (m, j)));
                }
            }
            WaveletKind::Hierarchical => {
                out.extend([(0, 0), (0, 1)]);
                for m in 1..=self.level {
                    out.extend((1..1usize << m).step_by(2).map(|j| (m, j)));
                }
            }
        }
        out
    }
}

/// Mother wavelet with the half-open convention: `+1` on `[0, ½)`, `−1` on
/// `[½, 1)`.
fn mother(t: f64) -> f64 {
    if (0.0..0.5).contains(&t) {
        1.0
    } else if (0.5..1.0).contains(&t) {
        -1.0
    } else {
        0.0
    }
}

/// `ψ_{ℓ,j}(x) = 2^{(ℓ-1)/2} ψ(2^{ℓ-1}x − j)` for `ℓ ≥ 1`; the scaling
/// function `φ = 1` on `[0,1]` for `ℓ = 0`. The point `x = 1` belongs to the
/// last subinterval.
pub fn haar_function(level: u32, j: usize, x: f64) -> Result<f64> {
    if level == 0 {
        if j != 0 {
            return Err(Error::Wavelet(format!("level 0 has only j = 0, got {j}")));
        }
        return Ok(if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 });
    }
    let count = 1usize << (level - 1);
    if j >= count {
        return Err(Error::Wavelet(format!("Haar level {level} needs j < {count}, got {j}")));
    }
    let scale = count as f64;
    let mut t = scale * x - j as f64;
    if x == 1.0 && j == count - 1 {
        t = 1.0 - f64::EPSILON;
    }
    Ok(scale.sqrt() * mother(t))
}

fn in_hierarchical_set(level: u32, j: usize) -> bool {
    if level == 0 {
        j <= 1
    } else {
        j % 2 == 1 && j < (1usize << level)
    }
}

/// Hat `1 − |x/h_ℓ − j|` on `[(j−1)h_ℓ, (j+1)h_ℓ] ∩ [0,1]`, `h_ℓ = 2^{−ℓ}`.
pub fn hierarchical_function(level: u32, j: usize, x: f64) -> Result<f64> {
    if !in_hierarchical_set(level, j) {
        return Err(Error::Wavelet(format!("index {j} is not in the level-{level} hierarchical set")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Ok(0.0);
    }
    let t = x * (1u64 << level) as f64 - j as f64;
    Ok((1.0 - t.abs()).max(0.0))
}

/// Checks that `samples` are nodal values on a dyadic grid fine enough for
/// `level`; returns the number of intervals.
fn dyadic_intervals(samples: &[f64], level: u32) -> Result<usize> {
    let m = samples.len().saturating_sub(1);
    if m == 0 || !m.is_power_of_two() {
        return Err(Error::Wavelet(format!(
            "need nodal samples on a dyadic grid, got {} values",
            samples.len()
        )));
    }
    if level >= usize::BITS || (1usize << level) > m {
        return Err(Error::Wavelet(format!(
            "resolution of {m} intervals is too coarse for level {level}"
        )));
    }
    Ok(m)
}

/// Haar coefficients `(v, ψ)` of a function, ordered as [`WaveletSpec::indices`].
#[derive(Clone, Debug, PartialEq)]
pub struct HaarCoefficients {
    pub level: u32,
    pub coefficients: Vec<f64>,
}

impl HaarCoefficients {
    /// Values of `P_ℓ v` on the `2^ℓ` intervals of level `ℓ`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let cells = 1usize << self.level;
        let spec = WaveletSpec::haar(self.level);
        (0..cells)
            .map(|k| {
                let x = (k as f64 + 0.5) / cells as f64;
                spec.indices()
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(&(m, j), c)| c * haar_function(m, j, x).unwrap())
                    .sum()
            })
            .collect()
    }
}

/// Exact `∫_a^b v` for the piecewise-linear interpolant of `samples` over
/// whole fine intervals `[k0, k1)`.
fn integral(samples: &[f64], h: f64, k0: usize, k1: usize) -> f64 {
    (k0..k1).map(|k| 0.5 * h * (samples[k] + samples[k + 1])).sum()
}

/// `L²` projection onto the Haar space `V_ℓ` of the piecewise-linear
/// function with nodal `samples` on `[0,1]`.
pub fn project_l2(samples: &[f64], level: u32) -> Result<HaarCoefficients> {
    let m = dyadic_intervals(samples, level)?;
    let h = 1.0 / m as f64;
    let spec = WaveletSpec::haar(level);
    let coefficients = spec
        .indices()
        .into_iter()
        .map(|(lev, j)| {
            if lev == 0 {
                return integral(samples, h, 0, m);
            }
            let count = 1usize << (lev - 1);
            let span = m / count;
            let k0 = j * span;
            let half = span / 2;
            (count as f64).sqrt() * (integral(samples, h, k0, k0 + half) - integral(samples, h, k0 + half, k0 + span))
        })
        .collect();
    Ok(HaarCoefficients { level, coefficients })
}

/// Interval means of `v` at scale `2^{−ℓ}`.
pub fn interval_means(samples: &[f64], level: u32) -> Result<Vec<f64>> {
    let m = dyadic_intervals(samples, level)?;
    let h = 1.0 / m as f64;
    let cells = 1usize << level;
    let span = m / cells;
    Ok((0..cells)
        .map(|c| integral(samples, h, c * span, (c + 1) * span) * cells as f64)
        .collect())
}

/// `‖v − P_ℓ v‖_{L²(0,1)}`, computed exactly for the piecewise-linear `v`.
pub fn projection_error(samples: &[f64], level: u32) -> Result<f64> {
    let m = dyadic_intervals(samples, level)?;
    let h = 1.0 / m as f64;
    let means = project_l2(samples, level)?.reconstruct();
    let span = m >> level;
    let mut e2 = 0.0;
    for k in 0..m {
        let c = means[k / span];
        let (a, b) = (samples[k] - c, samples[k + 1] - c);
        e2 += h * (a * a + a * b + b * b) / 3.0;
    }
    Ok(e2.sqrt())
}

/// Hierarchical-surplus coefficients of the nodal interpolant at level `ℓ`,
/// ordered as [`WaveletSpec::indices`].
pub fn hierarchical_surplus(samples: &[f64], level: u32) -> Result<Vec<f64>> {
    let m = dyadic_intervals(samples, level)?;
    let spec = WaveletSpec::hierarchical(level);
    Ok(spec
        .indices()
        .into_iter()
        .map(|(lev, j)| {
            if lev == 0 {
                return samples[j * m];
            }
            let step = m >> lev;
            samples[j * step] - 0.5 * (samples[(j - 1) * step] + samples[(j + 1) * step])
        })
        .collect())
}

/// One basis function restricted to a coarse edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFunction {
    pub level: u32,
    pub index: usize,
    /// Haar: one value per fine interval (P0); hierarchical: one per fine node.
    pub values: Vec<f64>,
}

/// All functions of `V_ℓ` sampled on an edge of `intervals` fine intervals,
/// the edge mapped affinely onto `[0,1]` in its canonical orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeBasisSet {
    pub spec: WaveletSpec,
    pub intervals: usize,
    pub functions: Vec<EdgeFunction>,
}

pub fn edge_basis(intervals: usize, spec: WaveletSpec) -> Result<EdgeBasisSet> {
    if spec.level >= usize::BITS || (1usize << spec.level) > intervals || intervals % (1usize << spec.level) != 0 {
        return Err(Error::Wavelet(format!(
            "edge with {intervals} fine intervals cannot resolve level {}",
            spec.level
        )));
    }
    let h = 1.0 / intervals as f64;
    let functions = spec
        .indices()
        .into_iter()
        .map(|(level, index)| {
            let values = match spec.kind {
                WaveletKind::Haar => (0..intervals)
                    .map(|k| haar_function(level, index, (k as f64 + 0.5) * h).unwrap())
                    .collect(),
                WaveletKind::Hierarchical => (0..=intervals)
                    .map(|k| hierarchical_function(level, index, k as f64 * h).unwrap())
                    .collect(),
            };
            EdgeFunction { level, index, values }
        })
        .collect();
    Ok(EdgeBasisSet {
        spec,
        intervals,
        functions,
    })
}
