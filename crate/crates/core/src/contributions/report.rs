use std::io::Write;

use serde::{Deserialize, Serialize};

use super::scheme::{Mask, ProcessKind};
use crate::error::Result;
use crate::linalg::liouville_index;
use crate::liouville::{Liouvillian, Part};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Greens,
    Susceptibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub name: String,
    pub kind: ProcessKind,
    pub raw: f64,
    /// Signed fraction, filled in by [`ContributionReport::normalize`].
    pub normalized: Option<f64>,
    /// Long-time rate of change of the raw value (susceptibility only). A
    /// nonzero slope means the contribution keeps drifting with the horizon.
    pub slope: Option<f64>,
}

impl Contribution {
    pub(crate) fn new(mask: &Mask, raw: f64) -> Self {
        Contribution { name: mask.name.clone(), kind: mask.kind, raw, normalized: None, slope: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `|Σ_k η_k + reference - η|`.
    pub partition_defect: f64,
    /// Whether the state had decayed before the horizon (time-domain only).
    pub converged: Option<bool>,
    pub end_time: Option<f64>,
    pub residual_trace: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionReport {
    pub measure: Measure,
    pub eta: f64,
    pub eta_bar: f64,
    /// Part of η not attributed to any mask; zero for the resolvent measure
    /// when the initial state avoids trap sites, and always zero for the
    /// susceptibility measure.
    pub reference: f64,
    pub horizon: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub contributions: Vec<Contribution>,
    /// Present when the scheme splits relaxation into site pathways.
    pub pathways: Option<PathwayMatrix>,
    pub diagnostics: Diagnostics,
    pub model_hash: String,
}

/// Signed normalization: positive values are divided by the sum of the
/// positive values and negative values by the magnitude of the sum of the
/// negative ones, so each sign group sums to ±1.
pub fn normalize(raw: &[f64]) -> Vec<f64> {
    let pos: f64 = raw.iter().filter(|v| **v > 0.0).sum();
    let neg: f64 = raw.iter().filter(|v| **v < 0.0).sum();
    raw.iter()
        .map(|&v| {
            if v > 0.0 {
                v / pos
            } else if v < 0.0 {
                v / neg.abs()
            } else {
                0.0
            }
        })
        .collect()
}

impl ContributionReport {
    pub fn get(&self, name: &str) -> Option<&Contribution> {
        self.contributions.iter().find(|c| c.name == name)
    }

    pub fn raw(&self, name: &str) -> Option<f64> {
        self.get(name).map(|c| c.raw)
    }

    pub fn normalized(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(|c| c.normalized)
    }

    pub fn sum(&self) -> f64 {
        self.contributions.iter().map(|c| c.raw).sum()
    }

    /// Fills `normalized` for every contribution using [`normalize`].
    pub fn normalize(&mut self) -> Result<()> {
        let raw: Vec<f64> = self.contributions.iter().map(|c| c.raw).collect();
        if raw.iter().all(|v| *v == 0.0) {
            return Err(crate::Error::numerical("cannot normalize: every contribution is zero"));
        }
        for (c, v) in self.contributions.iter_mut().zip(normalize(&raw)) {
            c.normalized = Some(v);
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| crate::Error::numerical(e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# model_hash: {}", self.model_hash)?;
        writeln!(out, "# eta: {:.12e}", self.eta)?;
        writeln!(out, "# eta_bar: {:.12e}", self.eta_bar)?;
        writeln!(out, "# reference: {:.12e}", self.reference)?;
        writeln!(out, "name,raw,normalized,slope")?;
        for c in &self.contributions {
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
            writeln!(out, "{},{:.12e},{},{}", c.name, c.raw, fmt(c.normalized), fmt(c.slope))?;
        }
        Ok(())
    }
}

/// Relaxation pathway contributions arranged by site.
///
/// The element view keeps jumps (gain of population `to` from population
/// `from`) and damping (loss of a population) apart, exactly as the scheme
/// selects them. The transfer view adds to each jump `from → to` its share of
/// the damping of `from`, in proportion to the jump rate; since relaxation
/// conserves trace the shares of each site add up to its whole damping term.
/// Both views are linear recombinations of the same raw contributions.
///
/// Normalized values use the signed rule over the relaxation pieces only, so
/// they describe shares of the relaxation contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayMatrix {
    pub n_sites: usize,
    /// `jumps[to][from]`, zero on the diagonal.
    pub jumps: Vec<Vec<f64>>,
    pub damping: Vec<f64>,
    pub residual: f64,
    pub jumps_normalized: Vec<Vec<f64>>,
    pub damping_normalized: Vec<f64>,
    pub residual_normalized: f64,
    /// `transfers[to][from]`: jump plus its share of the source damping.
    pub transfers: Vec<Vec<f64>>,
    /// Normalized over the transfers and the residual.
    pub transfers_normalized: Vec<Vec<f64>>,
}

impl PathwayMatrix {
    /// `None` unless the report comes from a pathway scheme on `l`'s model.
    pub fn from_report(report: &ContributionReport, l: &Liouvillian) -> Option<Self> {
        let pieces: Vec<&Contribution> =
            report.contributions.iter().filter(|c| c.kind != ProcessKind::Process).collect();
        let n = l.n_sites();
        let sites = pieces.iter().filter(|c| matches!(c.kind, ProcessKind::Damping { .. })).count();
        if sites != n {
            return None;
        }
        let norm = normalize(&pieces.iter().map(|c| c.raw).collect::<Vec<_>>());
        let mut pm = PathwayMatrix {
            n_sites: n,
            jumps: vec![vec![0.0; n]; n],
            damping: vec![0.0; n],
            residual: 0.0,
            jumps_normalized: vec![vec![0.0; n]; n],
            damping_normalized: vec![0.0; n],
            residual_normalized: 0.0,
            transfers: vec![vec![0.0; n]; n],
            transfers_normalized: vec![vec![0.0; n]; n],
        };
        for (c, v) in pieces.iter().zip(norm) {
            match c.kind {
                ProcessKind::Jump { from, to } => {
                    pm.jumps[to][from] = c.raw;
                    pm.jumps_normalized[to][from] = v;
                }
                ProcessKind::Damping { site } => {
                    pm.damping[site] = c.raw;
                    pm.damping_normalized[site] = v;
                }
                ProcessKind::Residual => {
                    pm.residual = c.raw;
                    pm.residual_normalized = v;
                }
                ProcessKind::Process => {}
            }
        }
        let relax = l.part(Part::Relax);
        let pop = |m: usize| liouville_index(m, m, n);
        let mut flat = Vec::with_capacity(n * n);
        for from in 0..n {
            let loss = -relax[(pop(from), pop(from))].re;
            for to in 0..n {
                if to == from {
                    continue;
                }
                let share = if loss > 0.0 { relax[(pop(to), pop(from))].re / loss } else { 0.0 };
                pm.transfers[to][from] = pm.jumps[to][from] + share * pm.damping[from];
            }
        }
        for to in 0..n {
            for from in 0..n {
                if to != from {
                    flat.push(pm.transfers[to][from]);
                }
            }
        }
        flat.push(pm.residual);
        let norm = normalize(&flat);
        let mut it = norm.into_iter();
        for to in 0..n {
            for from in 0..n {
                if to != from {
                    pm.transfers_normalized[to][from] = it.next().unwrap_or(0.0);
                }
            }
        }
        Some(pm)
    }

    /// Normalized net transfer `from → to` (zero-based).
    pub fn transfer(&self, from: usize, to: usize) -> f64 {
        self.transfers_normalized[to][from]
    }

    /// Sum of normalized net transfers into `site`.
    pub fn inbound(&self, site: usize) -> f64 {
        (0..self.n_sites).filter(|&m| m != site).map(|m| self.transfer(m, site)).sum()
    }

    /// Sum of normalized net transfers out of `site`.
    pub fn outbound(&self, site: usize) -> f64 {
        (0..self.n_sites).filter(|&m| m != site).map(|m| self.transfer(site, m)).sum()
    }

    /// Sum of the raw element-view pieces; equals the raw relaxation
    /// contribution of the coarse scheme.
    pub fn total(&self) -> f64 {
        self.jumps.iter().flatten().sum::<f64>() + self.damping.iter().sum::<f64>() + self.residual
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_normalization() {
        let v = normalize(&[3.0, 1.0, -0.5, -1.5, 0.0]);
        assert_eq!(v, vec![0.75, 0.25, -0.25, -0.75, 0.0]);
        assert_eq!(normalize(&[2.0, 2.0]), vec![0.5, 0.5]);
    }
}
