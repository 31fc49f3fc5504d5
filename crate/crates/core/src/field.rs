//! Complex-valued nodal fields and their CSV form.
//!
//! The CSV layout is shared by every tool in the workspace: one header
//! line `nx,ny,lx,ly,kind` followed by one line per node in storage
//! order, `i,j,re,im` for scalars and `i,j,re1,im1,re2,im2` for vectors.
//! Floats are written in shortest round-trip form, so a write/read
//! cycle reproduces the field bit for bit.

use crate::grid::{Grid, NodeMask};
use num_complex::Complex64;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("field has {got} values but grid has {want} nodes")]
    LengthMismatch { got: usize, want: usize },
    #[error("non-finite value at node {idx}")]
    NonFinite { idx: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn check_finite(values: &[Complex64]) -> Result<(), FieldError> {
    for (idx, v) in values.iter().enumerate() {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(FieldError::NonFinite { idx });
        }
    }
    Ok(())
}

/// One complex value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    values: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField { grid, values: vec![Complex64::default(); grid.len()] }
    }

    pub fn constant(grid: Grid, v: Complex64) -> Self {
        ScalarField { grid, values: vec![v; grid.len()] }
    }

    pub fn from_fn<F: Fn(f64, f64) -> Complex64>(grid: Grid, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.coords(i, j);
                values.push(f(x, y));
            }
        }
        ScalarField { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch { got: values.len(), want: grid.len() });
        }
        check_finite(&values)?;
        Ok(ScalarField { grid, values })
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self, FieldError> {
        Self::from_values(grid, values.iter().map(|v| Complex64::new(*v, 0.0)).collect())
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let idx = self.grid.idx(i, j);
        self.values[idx] = v;
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Self {
        ScalarField { grid: self.grid, values: self.values.iter().map(|v| f(*v)).collect() }
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn l2(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max-norm distance to `other` on `mask` nodes.
    pub fn linf_diff_on(&self, other: &ScalarField, mask: &NodeMask) -> f64 {
        mask.indices()
            .map(|k| (self.values[k] - other.values[k]).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let g = &self.grid;
        let _ = writeln!(out, "{},{},{},{},scalar", g.nx, g.ny, g.lx, g.ly);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let v = self.values[g.idx(i, j)];
                let _ = writeln!(out, "{},{},{},{}", i, j, v.re, v.im);
            }
        }
        out
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<(), FieldError> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn from_csv_string(text: &str) -> Result<Self, FieldError> {
        let (grid, kind, rows) = parse_csv(text)?;
        if kind != "scalar" {
            return Err(FieldError::Csv { line: 1, msg: format!("expected kind scalar, got {kind}") });
        }
        let mut values = vec![Complex64::default(); grid.len()];
        for (line, (i, j, nums)) in rows.into_iter().enumerate() {
            if nums.len() != 2 {
                return Err(FieldError::Csv { line: line + 2, msg: "expected i,j,re,im".into() });
            }
            values[grid.idx(i, j)] = Complex64::new(nums[0], nums[1]);
        }
        ScalarField::from_values(grid, values)
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self, FieldError> {
        Self::from_csv_string(&std::fs::read_to_string(path)?)
    }
}

/// Two complex components per grid node, stored per component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    comps: [Vec<Complex64>; 2],
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        VectorField { grid, comps: [vec![Complex64::default(); n], vec![Complex64::default(); n]] }
    }

    pub fn from_fn<F: Fn(f64, f64) -> [Complex64; 2]>(grid: Grid, f: F) -> Self {
        let mut c0 = Vec::with_capacity(grid.len());
        let mut c1 = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.coords(i, j);
                let v = f(x, y);
                c0.push(v[0]);
                c1.push(v[1]);
            }
        }
        VectorField { grid, comps: [c0, c1] }
    }

    pub fn from_components(c0: ScalarField, c1: ScalarField) -> Result<Self, FieldError> {
        if c0.grid != c1.grid {
            return Err(FieldError::GridMismatch);
        }
        Ok(VectorField { grid: c0.grid, comps: [c0.values, c1.values] })
    }

    pub fn component(&self, k: usize) -> ScalarField {
        ScalarField { grid: self.grid, values: self.comps[k].clone() }
    }

    #[inline]
    pub fn comp(&self, k: usize) -> &[Complex64] {
        &self.comps[k]
    }

    #[inline]
    pub fn comp_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.comps[k]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> [Complex64; 2] {
        let idx = self.grid.idx(i, j);
        [self.comps[0][idx], self.comps[1][idx]]
    }

    pub fn set(&mut self, i: usize, j: usize, v: [Complex64; 2]) {
        let idx = self.grid.idx(i, j);
        self.comps[0][idx] = v[0];
        self.comps[1][idx] = v[1];
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        check_finite(&self.comps[0])?;
        check_finite(&self.comps[1])
    }

    /// Pointwise projection onto a fixed real direction `a`.
    pub fn dot_direction(&self, a: [f64; 2]) -> ScalarField {
        let values = self.comps[0]
            .iter()
            .zip(&self.comps[1])
            .map(|(u, v)| u * a[0] + v * a[1])
            .collect();
        ScalarField { grid: self.grid, values }
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let mut out = self.clone();
        for k in 0..2 {
            for (a, b) in out.comps[k].iter_mut().zip(&other.comps[k]) {
                *a -= b;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: Complex64) -> VectorField {
        let mut out = self.clone();
        for k in 0..2 {
            for a in out.comps[k].iter_mut() {
                *a *= s;
            }
        }
        out
    }

    pub fn linf(&self) -> f64 {
        (0..self.grid.len())
            .map(|k| (self.comps[0][k].norm_sqr() + self.comps[1][k].norm_sqr()).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn l2(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let g = &self.grid;
        let _ = writeln!(out, "{},{},{},{},vector", g.nx, g.ny, g.lx, g.ly);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let idx = g.idx(i, j);
                let (a, b) = (self.comps[0][idx], self.comps[1][idx]);
                let _ = writeln!(out, "{},{},{},{},{},{}", i, j, a.re, a.im, b.re, b.im);
            }
        }
        out
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<(), FieldError> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn from_csv_string(text: &str) -> Result<Self, FieldError> {
        let (grid, kind, rows) = parse_csv(text)?;
        if kind != "vector" {
            return Err(FieldError::Csv { line: 1, msg: format!("expected kind vector, got {kind}") });
        }
        let n = grid.len();
        let mut c0 = vec![Complex64::default(); n];
        let mut c1 = vec![Complex64::default(); n];
        for (line, (i, j, nums)) in rows.into_iter().enumerate() {
            if nums.len() != 4 {
                return Err(FieldError::Csv { line: line + 2, msg: "expected i,j,re1,im1,re2,im2".into() });
            }
            let idx = grid.idx(i, j);
            c0[idx] = Complex64::new(nums[0], nums[1]);
            c1[idx] = Complex64::new(nums[2], nums[3]);
        }
        check_finite(&c0)?;
        check_finite(&c1)?;
        Ok(VectorField { grid, comps: [c0, c1] })
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self, FieldError> {
        Self::from_csv_string(&std::fs::read_to_string(path)?)
    }
}

/// Symmetric 2x2 complex tensor per node; the off-diagonal entry is
/// stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub grid: Grid,
    pub xx: Vec<Complex64>,
    pub yy: Vec<Complex64>,
    pub xy: Vec<Complex64>,
}

impl TensorField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        TensorField {
            grid,
            xx: vec![Complex64::default(); n],
            yy: vec![Complex64::default(); n],
            xy: vec![Complex64::default(); n],
        }
    }

    pub fn conj(&self) -> Self {
        TensorField {
            grid: self.grid,
            xx: self.xx.iter().map(|v| v.conj()).collect(),
            yy: self.yy.iter().map(|v| v.conj()).collect(),
            xy: self.xy.iter().map(|v| v.conj()).collect(),
        }
    }

    /// Pointwise scaling by a scalar field.
    pub fn scale_by(&self, s: &ScalarField) -> TensorField {
        let sv = s.values();
        TensorField {
            grid: self.grid,
            xx: self.xx.iter().zip(sv).map(|(a, b)| a * b).collect(),
            yy: self.yy.iter().zip(sv).map(|(a, b)| a * b).collect(),
            xy: self.xy.iter().zip(sv).map(|(a, b)| a * b).collect(),
        }
    }

    /// Column `k` of the tensor as a vector field.
    pub fn column(&self, k: usize) -> VectorField {
        let (c0, c1) = match k {
            0 => (self.xx.clone(), self.xy.clone()),
            1 => (self.xy.clone(), self.yy.clone()),
            _ => panic!("2d tensor has columns 0 and 1"),
        };
        VectorField { grid: self.grid, comps: [c0, c1] }
    }

    pub fn trace(&self) -> ScalarField {
        let values = self.xx.iter().zip(&self.yy).map(|(a, b)| a + b).collect();
        ScalarField { grid: self.grid, values }
    }
}

fn parse_csv(text: &str) -> Result<(Grid, String, Vec<(usize, usize, Vec<f64>)>), FieldError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| FieldError::Csv { line: 1, msg: "empty file".into() })?;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 5 {
        return Err(FieldError::Csv { line: 1, msg: "header must be nx,ny,lx,ly,kind".into() });
    }
    let bad = |line: usize, msg: &str| FieldError::Csv { line, msg: msg.into() };
    let nx: usize = parts[0].parse().map_err(|_| bad(1, "bad nx"))?;
    let ny: usize = parts[1].parse().map_err(|_| bad(1, "bad ny"))?;
    let lx: f64 = parts[2].parse().map_err(|_| bad(1, "bad lx"))?;
    let ly: f64 = parts[3].parse().map_err(|_| bad(1, "bad ly"))?;
    let grid = Grid::new(nx, ny, lx, ly)
        .map_err(|e| FieldError::Csv { line: 1, msg: e.to_string() })?;
    let kind = parts[4].trim().to_string();

    let mut rows = Vec::with_capacity(grid.len());
    let mut seen = vec![false; grid.len()];
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 4 {
            return Err(bad(lineno + 1, "too few columns"));
        }
        let i: usize = cells[0].parse().map_err(|_| bad(lineno + 1, "bad i"))?;
        let j: usize = cells[1].parse().map_err(|_| bad(lineno + 1, "bad j"))?;
        if i >= nx || j >= ny {
            return Err(bad(lineno + 1, "node index out of range"));
        }
        if std::mem::replace(&mut seen[grid.idx(i, j)], true) {
            return Err(bad(lineno + 1, "duplicate node"));
        }
        let nums = cells[2..]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| bad(lineno + 1, "bad float")))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push((i, j, nums));
    }
    if rows.len() != grid.len() {
        return Err(FieldError::Csv {
            line: 0,
            msg: format!("expected {} node rows, got {}", grid.len(), rows.len()),
        });
    }
    Ok((grid, kind, rows))
}
