use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::math;

/// Grid samples of `u(., t)` or `psi` on a [`Domain`].
///
/// Values are stored for every grid node and are zero outside the interior
/// mask. Static fields carry `time = -1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    domain: Arc<Domain>,
    values: Vec<f64>,
    time: f64,
}

impl ScalarField {
    pub fn zeros(domain: &Arc<Domain>) -> Self {
        Self {
            domain: Arc::clone(domain),
            values: vec![0.0; domain.grid_len()],
            time: -1.0,
        }
    }

    /// Samples `f` at interior nodes.
    pub fn from_fn(domain: &Arc<Domain>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut field = Self::zeros(domain);
        for n in domain.nodes() {
            field.values[n.grid as usize] = f(n.x, n.y);
        }
        field
    }

    /// Takes grid-indexed values; exterior entries are reset to zero.
    pub fn from_values(domain: &Arc<Domain>, mut values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != domain.grid_len() {
            return Err(Error::DomainMismatch);
        }
        for (g, v) in values.iter_mut().enumerate() {
            if !domain.is_interior(g) {
                *v = 0.0;
            }
        }
        Ok(Self {
            domain: Arc::clone(domain),
            values,
            time,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    pub fn get(&self, i: i32, j: i32) -> Option<f64> {
        self.domain.grid_index(i, j).map(|g| self.values[g])
    }

    pub fn same_domain(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain
    }

    /// Replace slaved near-boundary values by their interpolants.
    pub fn enforce_slaves(&mut self) {
        let domain = Arc::clone(&self.domain);
        domain.apply_slaves(&mut self.values);
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &ScalarField) -> Result<Self> {
        if !self.same_domain(other) {
            return Err(Error::DomainMismatch);
        }
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v += c * w;
        }
        Ok(out)
    }

    pub fn sup_abs(&self) -> f64 {
        self.interior_values().fold(0.0, |m, v| m.max(math::abs(v)))
    }

    pub fn max_interior(&self) -> f64 {
        self.interior_values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn interior_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.domain
            .nodes()
            .iter()
            .map(|n| self.values[n.grid as usize])
    }

    /// Sup-norm distance over interior nodes.
    pub fn distance_sup(&self, other: &ScalarField) -> Result<f64> {
        if !self.same_domain(other) {
            return Err(Error::DomainMismatch);
        }
        Ok(self
            .domain
            .nodes()
            .iter()
            .map(|n| math::abs(self.values[n.grid as usize] - other.values[n.grid as usize]))
            .fold(0.0, f64::max))
    }
}
