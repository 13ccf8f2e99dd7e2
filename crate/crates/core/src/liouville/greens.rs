use serde::Serialize;

use super::{require_sink, DensityMatrix, Liouvillian};
use crate::error::{Error, Result};
use crate::linalg::{vectorize, CVec};

/// Efficiency from one linear solve with the generator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EteGreens {
    pub eta: f64,
    pub eta_bar: f64,
    /// `x = L⁻¹ vec(ρ0)`, i.e. `-∫₀^∞ ρ(t) dt` vectorized.
    #[serde(skip)]
    pub solution: CVec,
}

/// `η = -(2/ħ) Tr{H_trap L⁻¹ ρ0}` and `η̄` likewise with `H_recomb`.
pub fn ete_greens(l: &Liouvillian, rho0: &DensityMatrix) -> Result<EteGreens> {
    require_sink(l)?;
    if rho0.dim() != l.n_sites() {
        return Err(Error::config("initial state dimension does not match the model"));
    }
    let x = resolvent_solve(l, &vectorize(rho0.matrix()))?;
    let n = l.n_sites();
    let mut eta = 0.0;
    let mut eta_bar = 0.0;
    for m in 0..n {
        let xm = x[m + m * n].re;
        eta -= 2.0 * l.trap_rates()[m] * xm;
        eta_bar -= 2.0 * l.recombination_rate() * xm;
    }
    Ok(EteGreens { eta, eta_bar, solution: x })
}

/// Solves `L x = b` by LU with partial pivoting, checking the residual so a
/// numerically singular generator is reported instead of returning noise.
pub(crate) fn resolvent_solve(l: &Liouvillian, b: &CVec) -> Result<CVec> {
    let lu = l.full().clone().lu();
    let x = lu
        .solve(b)
        .ok_or_else(|| Error::numerical("generator is singular; some population never reaches a sink"))?;
    let residual = (l.full() * &x - b).norm();
    if !residual.is_finite() || residual > 1e-8 * (1.0 + b.norm()) {
        return Err(Error::numerical(format!(
            "generator is numerically singular (solve residual {residual:.3e}); some population never reaches a sink"
        )));
    }
    Ok(x)
}
