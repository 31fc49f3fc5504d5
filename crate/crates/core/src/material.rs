//! Shear modulus and viscosity maps with box bounds and a support mask.
//!
//! A `MaterialMap` stores the real parameter pair `(mu, eta_mu)` at the
//! grid nodes together with the admissible box `[c1, c2]`, the interior
//! support mask, and the background values used outside that support.
//! Two invariants hold for every map produced here: node values inside
//! the support stay within the box, and nodes outside the support carry
//! exactly the background values. Constructors and update helpers
//! enforce both, so downstream code can rely on them without checking.

use crate::field::ScalarField;
use crate::grid::{Grid, NodeMask};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("mask or field shape does not match the grid")]
    ShapeMismatch,
    #[error("bounds must satisfy 0 < c1 < c2, got [{0}, {1}]")]
    BadBounds(f64, f64),
    #[error("background ({0}) must be positive and finite")]
    BadBackground(f64),
    #[error("omega must be positive and finite")]
    BadOmega,
}

#[derive(Debug, Clone)]
pub struct MaterialMap {
    pub grid: Grid,
    mu: Vec<f64>,
    eta: Vec<f64>,
    /// Background shear modulus, held exactly outside the support.
    pub mu0: f64,
    /// Background viscosity, held exactly outside the support.
    pub eta0: f64,
    /// Lower box bound.
    pub c1: f64,
    /// Upper box bound.
    pub c2: f64,
    /// Nodes where the parameters may differ from the background.
    pub support: NodeMask,
}

/// Default box for a given background and initial field magnitudes:
/// generous enough that a physically reasonable iterate never touches
/// the walls, tight enough to stop runaway steps.
pub fn default_bounds(mu0: f64, eta0: f64, init_max: f64) -> (f64, f64) {
    let c1 = 0.05 * mu0.min(eta0);
    let c2 = 20.0 * mu0.max(eta0).max(init_max);
    (c1, c2)
}

fn check_bounds(c1: f64, c2: f64) -> Result<(), MaterialError> {
    if !(c1.is_finite() && c2.is_finite() && c1 > 0.0 && c2 > c1) {
        return Err(MaterialError::BadBounds(c1, c2));
    }
    Ok(())
}

fn check_background(v: f64) -> Result<(), MaterialError> {
    if !(v.is_finite() && v > 0.0) {
        return Err(MaterialError::BadBackground(v));
    }
    Ok(())
}

impl MaterialMap {
    pub fn homogeneous(
        grid: Grid,
        mu0: f64,
        eta0: f64,
        support: NodeMask,
    ) -> Result<Self, MaterialError> {
        check_background(mu0)?;
        check_background(eta0)?;
        if support.len() != grid.len() {
            return Err(MaterialError::ShapeMismatch);
        }
        let (c1, c2) = default_bounds(mu0, eta0, 0.0);
        Ok(MaterialMap {
            grid,
            mu: vec![mu0; grid.len()],
            eta: vec![eta0; grid.len()],
            mu0,
            eta0,
            c1,
            c2,
            support,
        })
    }

    /// Builds a map from raw nodal values, clamping into the box on the
    /// support and overwriting with the background outside it. Bounds
    /// default from the background and the clamped input magnitudes.
    pub fn from_values(
        grid: Grid,
        mu: Vec<f64>,
        eta: Vec<f64>,
        mu0: f64,
        eta0: f64,
        support: NodeMask,
        bounds: Option<(f64, f64)>,
    ) -> Result<Self, MaterialError> {
        check_background(mu0)?;
        check_background(eta0)?;
        if mu.len() != grid.len() || eta.len() != grid.len() || support.len() != grid.len() {
            return Err(MaterialError::ShapeMismatch);
        }
        let (c1, c2) = match bounds {
            Some(b) => b,
            None => {
                let finite_max = mu
                    .iter()
                    .chain(eta.iter())
                    .copied()
                    .filter(|v| v.is_finite())
                    .fold(0.0f64, f64::max);
                default_bounds(mu0, eta0, finite_max)
            }
        };
        check_bounds(c1, c2)?;
        let mut map = MaterialMap { grid, mu, eta, mu0, eta0, c1, c2, support };
        map.enforce();
        Ok(map)
    }

    /// Splits a complex modulus `mu + i omega eta` into the parameter
    /// pair. Non-finite input nodes fall back to the background.
    pub fn from_complex_modulus(
        modulus: &ScalarField,
        omega: f64,
        mu0: f64,
        eta0: f64,
        support: NodeMask,
        bounds: Option<(f64, f64)>,
    ) -> Result<Self, MaterialError> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(MaterialError::BadOmega);
        }
        let mut mu = Vec::with_capacity(modulus.values().len());
        let mut eta = Vec::with_capacity(modulus.values().len());
        for v in modulus.values() {
            let (m, e) = if v.re.is_finite() && v.im.is_finite() {
                (v.re, v.im / omega)
            } else {
                (mu0, eta0)
            };
            mu.push(m);
            eta.push(e);
        }
        MaterialMap::from_values(modulus.grid, mu, eta, mu0, eta0, support, bounds)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn mu_field(&self) -> ScalarField {
        ScalarField::from_real(self.grid, &self.mu).expect("length matches grid")
    }

    pub fn eta_field(&self) -> ScalarField {
        ScalarField::from_real(self.grid, &self.eta).expect("length matches grid")
    }

    /// Complex shear modulus `mu + i omega eta` at the nodes.
    pub fn complex_modulus(&self, omega: f64) -> ScalarField {
        let values = self
            .mu
            .iter()
            .zip(&self.eta)
            .map(|(&m, &e)| Complex64::new(m, omega * e))
            .collect();
        ScalarField::from_values(self.grid, values).expect("length matches grid")
    }

    /// Descent step `p - delta * d` for both parameters, projected onto
    /// the box on the support and reset to the background outside it.
    pub fn stepped(&self, d_mu: &[f64], d_eta: &[f64], delta: f64) -> MaterialMap {
        assert_eq!(d_mu.len(), self.mu.len(), "direction length mismatch");
        assert_eq!(d_eta.len(), self.eta.len(), "direction length mismatch");
        let mut out = self.clone();
        for k in 0..out.mu.len() {
            out.mu[k] -= delta * d_mu[k];
            out.eta[k] -= delta * d_eta[k];
        }
        out.enforce();
        out
    }

    /// Copy with the given nodes overwritten by `(mu, eta)` pairs,
    /// invariants reasserted afterwards.
    pub fn patched<I: IntoIterator<Item = (usize, f64, f64)>>(&self, updates: I) -> MaterialMap {
        let mut out = self.clone();
        for (k, m, e) in updates {
            out.mu[k] = m;
            out.eta[k] = e;
        }
        out.enforce();
        out
    }

    /// Reasserts both invariants in place.
    pub fn enforce(&mut self) {
        for k in 0..self.mu.len() {
            if self.support.contains(k) {
                self.mu[k] = self.mu[k].clamp(self.c1, self.c2);
                self.eta[k] = self.eta[k].clamp(self.c1, self.c2);
            } else {
                self.mu[k] = self.mu0;
                self.eta[k] = self.eta0;
            }
        }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        check_background(self.mu0)?;
        check_background(self.eta0)?;
        check_bounds(self.c1, self.c2)?;
        if self.mu.len() != self.grid.len()
            || self.eta.len() != self.grid.len()
            || self.support.len() != self.grid.len()
        {
            return Err(MaterialError::ShapeMismatch);
        }
        for k in 0..self.mu.len() {
            let ok = if self.support.contains(k) {
                self.mu[k] >= self.c1
                    && self.mu[k] <= self.c2
                    && self.eta[k] >= self.c1
                    && self.eta[k] <= self.c2
            } else {
                self.mu[k] == self.mu0 && self.eta[k] == self.eta0
            };
            if !ok {
                return Err(MaterialError::ShapeMismatch);
            }
        }
        Ok(())
    }
}
