//! Permeability fields, piecewise constant per fine cell.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::triangle_gradient;
use crate::local::PouBasis;
use crate::mesh::{FineGrid, GridPair, CELL_TRIANGLES};

/// `κ` with one positive value per fine cell (row-major, row 0 at the bottom).
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    nx: usize,
    values: Vec<f64>,
    min: f64,
    max: f64,
}

impl CoefficientField {
    pub fn from_values(grid: &FineGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::Mismatch(format!(
                "{} coefficient values for {} fine cells",
                values.len(),
                grid.num_cells()
            )));
        }
        if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidField(format!("value {v} in cell {k} is not positive")));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            nx: grid.nx(),
            values,
            min,
            max,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value on fine cell `(cx, cy)`.
    pub fn at(&self, cx: usize, cy: usize) -> f64 {
        self.values[cy * self.nx + cx]
    }

    /// Lower bound `α`.
    pub fn min(&self) -> f64 {
        self.min
    }

    /// Upper bound `β`.
    pub fn max(&self) -> f64 {
        self.max
    }

    /// Contrast `β / α`.
    pub fn contrast(&self) -> f64 {
        self.max / self.min
    }

    /// The field multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let grid = FineGrid::new(self.nx)?;
        Self::from_values(&grid, self.values.iter().map(|v| v * c).collect())
    }

    pub fn check_grid(&self, grid: &FineGrid) -> Result<()> {
        if self.nx != grid.nx() {
            return Err(Error::Mismatch(format!(
                "field has {} cells per axis, grid has {}",
                self.nx,
                grid.nx()
            )));
        }
        Ok(())
    }

    /// Writes the field in the raster format read by [`load_raster`].
    pub fn write_raster(&self, path: &Path) -> Result<()> {
        use std::fmt::Write as _;
        let mut s = format!("{} {}\n", self.nx, self.nx);
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        std::fs::write(path, s).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

pub fn constant_field(grid: &FineGrid, value: f64) -> Result<CoefficientField> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidField(format!("constant value must be positive, got {value}")));
    }
    CoefficientField::from_values(grid, vec![value; grid.num_cells()])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    /// Long thin axis-aligned streaks.
    Channels,
    /// Small rectangular blocks.
    Inclusions,
    Mixed,
}

impl FromStr for SyntheticKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "channels" => Ok(Self::Channels),
            "inclusions" => Ok(Self::Inclusions),
            "mixed" => Ok(Self::Mixed),
            _ => Err(Error::Config(format!("unknown synthetic field kind {s:?}"))),
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Channels => "channels",
            Self::Inclusions => "inclusions",
            Self::Mixed => "mixed",
        })
    }
}

/// Features are placed on this lattice of `[0,1]²`, so they align with fine
/// cells whenever the fine resolution is a multiple of it.
const FEATURE_LATTICE: usize = 64;

/// Axis-aligned rectangle in lattice units, half-open.
#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

fn inclusions(rng: &mut ChaCha8Rng, count: usize, out: &mut Vec<Rect>) {
    for _ in 0..count {
        let w = rng.random_range(2..=5);
        let h = rng.random_range(2..=5);
        let x0 = rng.random_range(1..FEATURE_LATTICE - w);
        let y0 = rng.random_range(1..FEATURE_LATTICE - h);
        out.push(Rect {
            x0,
            y0,
            x1: x0 + w,
            y1: y0 + h,
        });
    }
}

fn channels(rng: &mut ChaCha8Rng, count: usize, out: &mut Vec<Rect>) {
    for _ in 0..count {
        let len = rng.random_range(24..=56);
        let along = rng.random_range(2..FEATURE_LATTICE - len - 1);
        let across = rng.random_range(2..FEATURE_LATTICE - 2);
        if rng.random_bool(0.5) {
            out.push(Rect {
                x0: along,
                y0: across,
                x1: along + len,
                y1: across + 1,
            });
        } else {
            out.push(Rect {
                x0: across,
                y0: along,
                x1: across + 1,
                y1: along + len,
            });
        }
    }
}

/// Binary high-contrast field: background 1, features `contrast`.
/// The geometry depends only on `kind` and `seed`, not on the contrast or the
/// fine resolution.
pub fn synthetic_field(grid: &FineGrid, kind: SyntheticKind, contrast: f64, seed: u64) -> Result<CoefficientField> {
    if !(contrast >= 1.0) || !contrast.is_finite() {
        return Err(Error::InvalidField(format!("contrast must be ≥ 1, got {contrast}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rects = Vec::new();
    match kind {
        SyntheticKind::Channels => channels(&mut rng, 8, &mut rects),
        SyntheticKind::Inclusions => inclusions(&mut rng, 28, &mut rects),
        SyntheticKind::Mixed => {
            inclusions(&mut rng, 18, &mut rects);
            channels(&mut rng, 6, &mut rects);
        }
    }
    let nx = grid.nx();
    let mut values = vec![1.0; grid.num_cells()];
    for cy in 0..nx {
        // cell centre in lattice units: (c + 1/2)·L/nx
        let yc = (2 * cy + 1) * FEATURE_LATTICE;
        for cx in 0..nx {
            let xc = (2 * cx + 1) * FEATURE_LATTICE;
            let inside = rects.iter().any(|r| {
                xc >= 2 * r.x0 * nx && xc < 2 * r.x1 * nx && yc >= 2 * r.y0 * nx && yc < 2 * r.y1 * nx
            });
            if inside {
                values[cy * nx + cx] = contrast;
            }
        }
    }
    CoefficientField::from_values(grid, values)
}

/// Named synthetic fields used by the studies and examples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub kind: SyntheticKind,
    pub contrast: f64,
    pub seed: u64,
}

pub const PRESETS: [Preset; 3] = [
    Preset {
        name: "model1-analogue",
        kind: SyntheticKind::Mixed,
        contrast: 1e4,
        seed: 1,
    },
    Preset {
        name: "model3-analogue",
        kind: SyntheticKind::Channels,
        contrast: 1e4,
        seed: 3,
    },
    Preset {
        name: "inclusions",
        kind: SyntheticKind::Inclusions,
        contrast: 1e4,
        seed: 7,
    },
];

pub fn preset(name: &str) -> Result<Preset> {
    PRESETS
        .iter()
        .copied()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::Config(format!("unknown field preset {name:?}")))
}

pub fn preset_field(grid: &FineGrid, name: &str) -> Result<CoefficientField> {
    let p = preset(name)?;
    synthetic_field(grid, p.kind, p.contrast, p.seed)
}

/// Reads a raster (`nx ny` header, then `nx·ny` positive values row-major
/// with row 0 at the bottom) and resamples it onto `grid` by nearest cell.
pub fn load_raster(path: &Path, grid: &FineGrid) -> Result<CoefficientField> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_raster(&text, grid).map_err(|(line, msg)| Error::Raster {
        path: path.to_path_buf(),
        line,
        msg,
    })
}

fn parse_raster(text: &str, grid: &FineGrid) -> std::result::Result<CoefficientField, (usize, String)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or((1, "empty file".to_string()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |s: &str| s.parse::<usize>().ok().filter(|&d| d > 0);
    let (rnx, rny) = match dims.as_slice() {
        [a, b] => match (parse_dim(a), parse_dim(b)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err((hline + 1, format!("malformed header {header:?}: expected two positive integers"))),
        },
        _ => return Err((hline + 1, format!("malformed header {header:?}: expected \"nx ny\""))),
    };
    let mut raster = Vec::with_capacity(rnx * rny);
    let mut last_line = hline + 1;
    for (lno, line) in lines {
        last_line = lno + 1;
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| (lno + 1, format!("not a number: {tok:?}")))?;
            if !(v > 0.0) || !v.is_finite() {
                return Err((lno + 1, format!("permeability must be positive, got {tok}")));
            }
            raster.push(v);
        }
    }
    if raster.len() != rnx * rny {
        return Err((
            last_line,
            format!("expected {} values for a {rnx}×{rny} raster, found {}", rnx * rny, raster.len()),
        ));
    }
    let nx = grid.nx();
    let mut values = Vec::with_capacity(grid.num_cells());
    for cy in 0..nx {
        let ry = ((2 * cy + 1) * rny) / (2 * nx);
        for cx in 0..nx {
            let rx = ((2 * cx + 1) * rnx) / (2 * nx);
            values.push(raster[ry * rnx + rx]);
        }
    }
    CoefficientField::from_values(grid, values).map_err(|e| (0, e.to_string()))
}

/// `κ̃ = H² κ Σ_i |∇χ_i|²` per fine cell (mean of its two triangles) and the
/// inverse with the convention `κ̃⁻¹ = 1` where `κ̃ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedCoefficient {
    pub values: Vec<f64>,
    pub inverse: Vec<f64>,
}

pub fn weighted_coefficient(grids: &GridPair, field: &CoefficientField, pou: &PouBasis) -> Result<WeightedCoefficient> {
    field.check_grid(&grids.fine)?;
    pou.check_grids(grids)?;
    let fine = &grids.fine;
    let h = fine.h();
    let hc2 = grids.coarse_h().powi(2);
    let mut values = vec![0.0; fine.num_cells()];
    for k in 0..grids.coarse.num_cells() {
        let patch = grids.coarse.cell_patch(k);
        let chis = pou.cell_functions(k);
        for (cx, cy) in patch.cells() {
            let loc = patch.cell_local_nodes(cx, cy);
            let mut sum = 0.0;
            for chi in chis {
                let vals = [chi[loc[0]], chi[loc[1]], chi[loc[2]], chi[loc[3]]];
                for t in 0..2 {
                    let g = triangle_gradient(t, &vals, h);
                    sum += g[0] * g[0] + g[1] * g[1];
                }
            }
            values[fine.cell(cx, cy)] = hc2 * field.at(cx, cy) * sum / CELL_TRIANGLES.len() as f64;
        }
    }
    let inverse = values.iter().map(|&v| if v != 0.0 { 1.0 / v } else { 1.0 }).collect();
    Ok(WeightedCoefficient { values, inverse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn grid(nx: usize) -> FineGrid {
        FineGrid::new(nx).unwrap()
    }

    #[test]
    fn constant_fields() {
        let one = constant_field(&grid(4), 1.0).unwrap();
        assert_eq!((one.min(), one.max(), one.contrast()), (1.0, 1.0, 1.0));
        assert_eq!(constant_field(&grid(4), 1e4).unwrap().contrast(), 1.0);
        assert_eq!(constant_field(&grid(4), 3.0).unwrap(), constant_field(&grid(4), 3.0).unwrap());
        assert!(matches!(constant_field(&grid(4), 0.0), Err(Error::InvalidField(_))));
        assert!(constant_field(&grid(4), -1.0).is_err());
    }

    #[test]
    fn synthetic_contrast_and_determinism() {
        let g = grid(64);
        let f = synthetic_field(&g, SyntheticKind::Inclusions, 1e4, 7).unwrap();
        assert_eq!(f.contrast(), 1e4);
        assert_eq!(f.min(), 1.0);
        let a = synthetic_field(&g, SyntheticKind::Inclusions, 1e2, 7).unwrap();
        let b = synthetic_field(&g, SyntheticKind::Inclusions, 1e2, 7).unwrap();
        assert_eq!(a, b);
        let flat = synthetic_field(&g, SyntheticKind::Channels, 1.0, 42).unwrap();
        assert_eq!(flat, constant_field(&g, 1.0).unwrap());
        assert!(matches!(
            synthetic_field(&g, SyntheticKind::Mixed, 0.5, 1),
            Err(Error::InvalidField(_))
        ));
    }

    #[test]
    fn synthetic_geometry_is_resolution_independent() {
        let coarse = synthetic_field(&grid(64), SyntheticKind::Mixed, 10.0, 1).unwrap();
        let fine = synthetic_field(&grid(128), SyntheticKind::Mixed, 10.0, 1).unwrap();
        for cy in 0..128 {
            for cx in 0..128 {
                assert_eq!(fine.at(cx, cy), coarse.at(cx / 2, cy / 2));
            }
        }
    }

    #[test]
    fn cached_bounds_match_scan() {
        for p in PRESETS {
            let f = preset_field(&grid(128), p.name).unwrap();
            let lo = f.values().iter().copied().fold(f64::MAX, f64::min);
            let hi = f.values().iter().copied().fold(f64::MIN, f64::max);
            assert_eq!((f.min(), f.max()), (lo, hi));
            assert_eq!(f.contrast(), p.contrast);
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn raster_nearest_cell_replication() {
        let f = parse_raster("2 2\n1 10\n100 1000\n", &grid(4)).unwrap();
        let expect = |cx: usize, cy: usize| match (cx / 2, cy / 2) {
            (0, 0) => 1.0,
            (1, 0) => 10.0,
            (0, 1) => 100.0,
            _ => 1000.0,
        };
        for cy in 0..4 {
            for cx in 0..4 {
                assert_eq!(f.at(cx, cy), expect(cx, cy));
            }
        }
    }

    #[test]
    fn raster_constant_and_errors() {
        let g = grid(6);
        let c = parse_raster("3 2\n2.5 2.5 2.5\n2.5e0 2.5 2.5\n", &g).unwrap();
        assert_eq!(c, constant_field(&g, 2.5).unwrap());
        let (line, msg) = parse_raster("2 2\n1 0\n1 1\n", &g).unwrap_err();
        assert_eq!(line, 2);
        assert!(msg.contains("positive"));
        assert!(parse_raster("2\n1 1\n", &g).unwrap_err().1.contains("header"));
        assert!(parse_raster("2 2\n1 1 1\n", &g).unwrap_err().1.contains("expected 4 values"));
        assert!(parse_raster("2 x\n", &g).is_err());
        assert!(parse_raster("", &g).is_err());
    }

    #[test]
    fn raster_file_roundtrip() {
        let g = grid(8);
        let f = synthetic_field(&g, SyntheticKind::Mixed, 1e3, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.txt");
        f.write_raster(&path).unwrap();
        assert_eq!(load_raster(&path, &g).unwrap(), f);
        let bad = dir.path().join("bad.txt");
        std::fs::File::create(&bad).unwrap().write_all(b"1 1\n-3\n").unwrap();
        let err = load_raster(&bad, &g).unwrap_err();
        assert!(matches!(err, Error::Raster { line: 2, .. }), "{err}");
    }
}
