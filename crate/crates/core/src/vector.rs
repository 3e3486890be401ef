use std::fmt;
use std::ops::Index;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Dense square matrix used for Hessians and quadratic forms.
pub type Matrix = nalgebra::DMatrix<f64>;

/// A point in R^n whose components are all finite.
#[derive(Clone, PartialEq)]
pub struct RealVector(DVector<f64>);

impl RealVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(components))
    }

    pub fn from_slice(components: &[f64]) -> Result<Self> {
        Self::from_dvector(DVector::from_column_slice(components))
    }

    pub fn from_dvector(v: DVector<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidInput(
                "vector must have at least one component".into(),
            ));
        }
        if let Some(i) = v.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "component {i} is not finite ({})",
                v[i]
            )));
        }
        Ok(RealVector(v))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        RealVector(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_dvector(self) -> DVector<f64> {
        self.0
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn dot(&self, other: &RealVector) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    pub(crate) fn expect_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                actual: self.dim(),
            })
        }
    }
}

impl Index<usize> for RealVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for RealVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl fmt::Display for RealVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        RealVector::new(v)
    }
}

impl<const N: usize> TryFrom<[f64; N]> for RealVector {
    type Error = Error;

    fn try_from(v: [f64; N]) -> Result<Self> {
        RealVector::from_slice(&v)
    }
}
