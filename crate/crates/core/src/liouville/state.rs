use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermiticity_defect, trace_re, CMat};

const HERMITIAN_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-8;
const TRACE_TOL: f64 = 1e-8;

/// Reduced density matrix of the single-excitation manifold in the site
/// basis. The trace may fall below one as sinks drain probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix(CMat);

impl DensityMatrix {
    /// Validates Hermiticity, positivity and `0 ≤ tr ρ ≤ 1`.
    pub fn new(matrix: CMat) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::config("density matrix must be square"));
        }
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(Error::config(format!(
                "density matrix is not Hermitian (max |ρ - ρ†| = {defect:.3e})"
            )));
        }
        let lowest = hermitian_eigenvalues(&matrix).first().copied().unwrap_or(0.0);
        if lowest < -POSITIVITY_TOL {
            return Err(Error::config(format!(
                "density matrix is not positive semidefinite (lowest eigenvalue {lowest:.3e})"
            )));
        }
        let tr = trace_re(&matrix);
        if !(-TRACE_TOL..=1.0 + TRACE_TOL).contains(&tr) {
            return Err(Error::config(format!("density matrix trace {tr} outside [0, 1]")));
        }
        Ok(DensityMatrix(matrix))
    }

    /// Like [`DensityMatrix::new`] but additionally requires unit trace.
    pub fn normalized(matrix: CMat) -> Result<Self> {
        let rho = Self::new(matrix)?;
        let tr = rho.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::config(format!("initial state must have unit trace, got {tr}")));
        }
        Ok(rho)
    }

    /// Wraps a matrix produced by propagation without re-checking it.
    pub(crate) fn from_raw(matrix: CMat) -> Self {
        DensityMatrix(matrix)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.0)
    }

    pub fn population(&self, site: usize) -> f64 {
        self.0[(site, site)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|m| self.population(m)).collect()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }
}
