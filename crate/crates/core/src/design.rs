//! Experimental designs: Latin hypercube sampling and rescaling of raw
//! inputs to the unit cube.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// `n` experiment inputs in the unit cube, one point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    points: DMatrix<f64>,
}

impl DesignMatrix {
    /// Wraps an `n x d` matrix, checking every coordinate lies in [0, 1].
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::EmptyInput("design matrix".into()));
        }
        for i in 0..points.nrows() {
            for k in 0..points.ncols() {
                let v = points[(i, k)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::OutOfRange {
                        value: v,
                        lo: 0.0,
                        hi: 1.0,
                        dim: k,
                        row: i,
                    });
                }
            }
        }
        Ok(DesignMatrix { points })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    #[inline]
    pub fn coord(&self, i: usize, k: usize) -> f64 {
        self.points[(i, k)]
    }

    /// Row `i` as an owned vector.
    pub fn point(&self, i: usize) -> Vec<f64> {
        (0..self.d()).map(|k| self.coord(i, k)).collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// Stacks two designs with the same dimension.
    pub fn vstack(&self, other: &DesignMatrix) -> Result<DesignMatrix> {
        if self.d() != other.d() {
            return Err(Error::DimensionMismatch(format!(
                "stacking designs of dim {} and {}",
                self.d(),
                other.d()
            )));
        }
        let mut m = DMatrix::zeros(self.n() + other.n(), self.d());
        m.rows_mut(0, self.n()).copy_from(&self.points);
        m.rows_mut(self.n(), other.n()).copy_from(&other.points);
        Ok(DesignMatrix { points: m })
    }

    /// Rows `range` as a new design.
    pub fn rows(&self, start: usize, len: usize) -> DesignMatrix {
        DesignMatrix {
            points: self.points.rows(start, len).into_owned(),
        }
    }

    /// Writes the design as CSV with header `x1,...,xd`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record((1..=self.d()).map(|k| format!("x{k}")))?;
        for i in 0..self.n() {
            wtr.write_record((0..self.d()).map(|k| self.coord(i, k).to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads a design written by [`DesignMatrix::write_csv`].
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let (m, _) = read_matrix_csv(r, "x")?;
        DesignMatrix::new(m)
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Reads a headered CSV of numeric columns named `{prefix}1..{prefix}d`,
/// tolerating a trailing `y` column which is returned separately when
/// present. Lines starting with `#` are skipped.
pub(crate) fn read_matrix_csv<R: std::io::Read>(
    r: R,
    prefix: &str,
) -> Result<(DMatrix<f64>, Option<Vec<f64>>)> {
    let reader = BufReader::new(r);
    let mut lines = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim_start().starts_with('#') || line.trim().is_empty() {
            continue;
        }
        lines.push(line);
    }
    if lines.is_empty() {
        return Err(Error::Schema("empty csv".into()));
    }
    let header: Vec<String> = lines[0].split(',').map(|s| s.trim().to_string()).collect();
    let mut y_col = None;
    let mut d = 0usize;
    for (j, name) in header.iter().enumerate() {
        if name == "y" {
            y_col = Some(j);
        } else if name.strip_prefix(prefix).is_some_and(|s| s.parse::<usize>().is_ok()) {
            d += 1;
        } else {
            return Err(Error::Schema(format!(
                "unexpected column `{name}`; expected {prefix}1..{prefix}d and optional y"
            )));
        }
    }
    if d == 0 {
        return Err(Error::Schema(format!("no {prefix}* columns found")));
    }
    let n = lines.len() - 1;
    if n == 0 {
        return Err(Error::Schema("csv has a header but no rows".into()));
    }
    let mut m = DMatrix::zeros(n, d);
    let mut y = y_col.map(|_| Vec::with_capacity(n));
    for (i, line) in lines[1..].iter().enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            return Err(Error::Schema(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                fields.len(),
                header.len()
            )));
        }
        let mut xk = 0usize;
        for (j, field) in fields.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Schema(format!("row {}: cannot parse `{field}` as a number", i + 1))
            })?;
            if Some(j) == y_col {
                y.as_mut().unwrap().push(v);
            } else {
                m[(i, xk)] = v;
                xk += 1;
            }
        }
    }
    Ok((m, y))
}

/// Per-dimension `(min, max)` pairs describing the raw input units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSpec {
    bounds: Vec<(f64, f64)>,
}

impl ScalingSpec {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            if !(hi > lo) {
                return Err(Error::DegenerateScale {
                    dim: k,
                    min: lo,
                    max: hi,
                });
            }
        }
        Ok(ScalingSpec { bounds })
    }

    /// Column-wise min/max of the raw data.
    pub fn from_data(raw: &DMatrix<f64>) -> Result<Self> {
        let bounds = (0..raw.ncols())
            .map(|k| {
                let col = raw.column(k);
                (col.min(), col.max())
            })
            .collect();
        Self::new(bounds)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Maps a raw coordinate into the unit interval (no clamping).
    #[inline]
    pub fn forward(&self, k: usize, v: f64) -> f64 {
        let (lo, hi) = self.bounds[k];
        (v - lo) / (hi - lo)
    }

    /// Maps a unit-cube coordinate back to raw units.
    #[inline]
    pub fn inverse(&self, k: usize, u: f64) -> f64 {
        let (lo, hi) = self.bounds[k];
        lo + u * (hi - lo)
    }

    /// Applies the inverse map to every coordinate of a design.
    pub fn unscale(&self, x: &DesignMatrix) -> DMatrix<f64> {
        DMatrix::from_fn(x.n(), x.d(), |i, k| self.inverse(k, x.coord(i, k)))
    }
}

/// Rescales raw inputs to the unit cube.
///
/// Values outside a dimension's `(min, max)` are an error unless `clamp` is
/// set, in which case they are clamped to the boundary.
pub fn rescale_inputs(raw: &DMatrix<f64>, spec: &ScalingSpec, clamp: bool) -> Result<DesignMatrix> {
    if raw.ncols() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "raw data has {} columns, scaling spec has {}",
            raw.ncols(),
            spec.dim()
        )));
    }
    let mut m = DMatrix::zeros(raw.nrows(), raw.ncols());
    for i in 0..raw.nrows() {
        for k in 0..raw.ncols() {
            let u = spec.forward(k, raw[(i, k)]);
            m[(i, k)] = if clamp {
                u.clamp(0.0, 1.0)
            } else if (0.0..=1.0).contains(&u) {
                u
            } else {
                return Err(Error::OutOfRange {
                    value: raw[(i, k)],
                    lo: spec.bounds[k].0,
                    hi: spec.bounds[k].1,
                    dim: k,
                    row: i,
                });
            };
        }
    }
    DesignMatrix::new(m)
}

/// Within-stratum placement for Latin hypercube points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StratumPlacement {
    /// Uniform draw inside each stratum (the default).
    Jittered,
    /// Deterministic stratum centers; only the stratum assignment is random.
    Midpoint,
}

/// Random Latin hypercube sample on the unit cube: in each dimension
/// exactly one point falls in each stratum `[i/n, (i+1)/n)`.
pub fn latin_hypercube(n: usize, d: usize, seed: u64) -> DesignMatrix {
    latin_hypercube_with(n, d, seed, StratumPlacement::Jittered)
}

/// Latin hypercube with explicit stratum placement; one seeded generator
/// per call, no global state.
pub fn latin_hypercube_with(
    n: usize,
    d: usize,
    seed: u64,
    placement: StratumPlacement,
) -> DesignMatrix {
    assert!(n >= 1 && d >= 1, "latin_hypercube requires n >= 1, d >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::zeros(n, d);
    let mut strata: Vec<usize> = (0..n).collect();
    for k in 0..d {
        strata.shuffle(&mut rng);
        for i in 0..n {
            let offset = match placement {
                StratumPlacement::Jittered => rng.random::<f64>(),
                StratumPlacement::Midpoint => 0.5,
            };
            m[(i, k)] = (strata[i] as f64 + offset) / n as f64;
        }
    }
    DesignMatrix { points: m }
}
