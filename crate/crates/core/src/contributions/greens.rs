use super::report::{Contribution, ContributionReport, Diagnostics, Measure, PathwayMatrix};
use super::scheme::{PartitionScheme, Target};
use crate::error::{Error, Result};
use crate::liouville::{ete_greens, DensityMatrix, Liouvillian};

/// Resolvent measure: with `x = L⁻¹ vec(ρ0)` and sink weights
/// `w_m = Γ / (κ_m + Γ)`, each mask contributes `η_k = Σ_m w_m [M_k x]_mm`.
///
/// The contributions sum to `η - reference`, where
/// `reference = 1 - Σ_m w_m ρ0_mm` vanishes whenever the initial state has no
/// weight on trap sites.
pub fn greens_contributions(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    scheme: &PartitionScheme,
) -> Result<ContributionReport> {
    if scheme.target != Target::NonSink {
        return Err(Error::config(
            "the resolvent measure needs a scheme over the non-sink generator (no sink processes)",
        ));
    }
    scheme.validate(l)?;
    let g = ete_greens(l, rho0)?;
    let n = l.n_sites();
    let gamma = l.recombination_rate();
    if let Some(m) = l.trap_rates().iter().position(|&k| k + gamma <= 0.0) {
        return Err(Error::precondition(format!(
            "site {} has neither trapping nor recombination; the resolvent measure needs a sink on every site",
            m + 1
        )));
    }
    let weights: Vec<f64> = l.trap_rates().iter().map(|&k| gamma / (k + gamma)).collect();
    let reference = 1.0 - (0..n).map(|m| weights[m] * rho0.population(m)).sum::<f64>();

    let x: Vec<_> = g.solution.iter().copied().collect();
    let mut contributions = Vec::with_capacity(scheme.masks.len());
    for mask in &scheme.masks {
        let sparse = mask.sparse(l);
        let mut y = vec![Default::default(); x.len()];
        sparse.apply_add(&x, &mut y);
        let raw: f64 = (0..n).map(|m| weights[m] * y[m + m * n].re).sum();
        contributions.push(Contribution::new(mask, raw));
    }
    let total: f64 = contributions.iter().map(|c| c.raw).sum();
    let diagnostics = Diagnostics {
        partition_defect: (total + reference - g.eta).abs(),
        ..Diagnostics::default()
    };
    let mut report = ContributionReport {
        measure: Measure::Greens,
        eta: g.eta,
        eta_bar: g.eta_bar,
        reference,
        horizon: None,
        rel_tol: None,
        abs_tol: None,
        contributions,
        pathways: None,
        diagnostics,
        model_hash: l.model_hash().to_owned(),
    };
    report.pathways = PathwayMatrix::from_report(&report, l);
    Ok(report)
}
