//! The master-equation generator on Liouville space, propagation, and the
//! energy transfer efficiency (time domain and resolvent).
//!
//! ```text
//! dρ/dt = -(i/ħ)[H_S + H_LS, ρ] + 𝓛ρ - (1/ħ){H_recomb, ρ} - (1/ħ){H_trap, ρ}
//! 𝓛ρ   = Σ_ω Σ_mn C_mn γ(ω) [A_m(ω) ρ A_n†(ω) - ½{A_n†(ω) A_m(ω), ρ}]
//! ```
//!
//! with `H_trap = ħ Σ κ_m |m⟩⟨m|` and `H_recomb = ħ Γ 𝟙`. Vectorization is
//! column stacking, see [`crate::linalg`].

mod greens;
mod ode;
mod propagate;
mod state;

pub use greens::{ete_greens, EteGreens};
pub use ode::{OdeOptions, OdeStats};
pub(crate) use ode::integrate;

pub use propagate::{
    default_horizon, ete_time_domain, propagate, transfer_time, EteTimeDomain, Trajectory,
};
pub use state::DensityMatrix;

use serde::{Deserialize, Serialize};

use crate::bath::{
    dephasing_rate, lamb_shift_correlated, secular_transitions, transition_rate, BathSpectrum,
    TransitionTable, DEFAULT_GROUPING_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{anticommutator, commutator, left_mul, right_mul, sandwich, CMat, C64, I};
use crate::model::{
    build_site_hamiltonian, correlation_matrix, diagonalize, ExcitonBasis, SystemModel,
    DEGENERACY_TOL,
};
use crate::quantities::HBAR;

/// Physical pieces of the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    /// `-(i/ħ)[H_S, ·]`
    Coherent,
    /// `-(i/ħ)[H_LS, ·]`
    Lamb,
    /// Lindblad terms with ω ≠ 0.
    Relax,
    /// Lindblad terms with ω = 0.
    Dephase,
    /// `-(1/ħ){H_trap, ·}`
    Trap,
    /// `-(1/ħ){H_recomb, ·}`
    Recomb,
}

impl Part {
    pub const ALL: [Part; 6] = [Part::Coherent, Part::Lamb, Part::Relax, Part::Dephase, Part::Trap, Part::Recomb];

    /// Everything except the sinks, i.e. the part that is partitioned by the
    /// resolvent measure.
    pub const NON_SINK: [Part; 4] = [Part::Coherent, Part::Lamb, Part::Relax, Part::Dephase];

    pub fn name(self) -> &'static str {
        match self {
            Part::Coherent => "coherent",
            Part::Lamb => "lamb",
            Part::Relax => "relax",
            Part::Dephase => "dephase",
            Part::Trap => "trap",
            Part::Recomb => "recomb",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// The `N² × N²` generator together with its labeled parts.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    n: usize,
    parts: Vec<CMat>,
    full: CMat,
    trap_rates: Vec<f64>,
    recombination_rate: f64,
    basis: ExcitonBasis,
    degenerate: bool,
    model_hash: String,
}

impl Liouvillian {
    /// Number of sites.
    pub fn n_sites(&self) -> usize {
        self.n
    }

    /// Liouville-space dimension `N²`.
    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn full(&self) -> &CMat {
        &self.full
    }

    pub fn part(&self, part: Part) -> &CMat {
        &self.parts[part.index()]
    }

    /// Sum of the selected parts.
    pub fn sum_of(&self, parts: &[Part]) -> CMat {
        let d = self.dim();
        parts.iter().fold(CMat::zeros(d, d), |acc, p| acc + self.part(*p))
    }

    /// A copy in which every part not listed is zeroed. Sink rates are kept
    /// for bookkeeping only if their parts survive.
    pub fn restricted(&self, keep: &[Part]) -> Liouvillian {
        let d = self.dim();
        let parts: Vec<CMat> = Part::ALL
            .iter()
            .map(|p| if keep.contains(p) { self.part(*p).clone() } else { CMat::zeros(d, d) })
            .collect();
        let full = parts.iter().fold(CMat::zeros(d, d), |acc, p| acc + p);
        let trap_rates = if keep.contains(&Part::Trap) { self.trap_rates.clone() } else { vec![0.0; self.n] };
        let recombination_rate = if keep.contains(&Part::Recomb) { self.recombination_rate } else { 0.0 };
        Liouvillian {
            n: self.n,
            parts,
            full,
            trap_rates,
            recombination_rate,
            basis: self.basis.clone(),
            degenerate: self.degenerate,
            model_hash: self.model_hash.clone(),
        }
    }

    /// κ_m in ps⁻¹.
    pub fn trap_rates(&self) -> &[f64] {
        &self.trap_rates
    }

    /// Γ in ps⁻¹.
    pub fn recombination_rate(&self) -> f64 {
        self.recombination_rate
    }

    pub fn basis(&self) -> &ExcitonBasis {
        &self.basis
    }

    /// Whether the exciton spectrum had (near-)degenerate levels.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    pub fn has_sink(&self) -> bool {
        self.recombination_rate > 0.0 || self.trap_rates.iter().any(|&k| k > 0.0)
    }

    /// Trapping probability density `(2/ħ) Tr{H_trap ρ}` in ps⁻¹.
    pub fn trapping_density(&self, rho: &CMat) -> f64 {
        2.0 * self.trap_rates.iter().enumerate().map(|(m, k)| k * rho[(m, m)].re).sum::<f64>()
    }

    /// Recombination probability density `(2/ħ) Tr{H_recomb ρ}` in ps⁻¹.
    pub fn recombination_density(&self, rho: &CMat) -> f64 {
        2.0 * self.recombination_rate * (0..self.n).map(|m| rho[(m, m)].re).sum::<f64>()
    }
}

/// Builds the generator with the default secular grouping tolerance.
pub fn assemble(model: &SystemModel) -> Result<Liouvillian> {
    assemble_with(model, DEFAULT_GROUPING_TOL)
}

pub fn assemble_with(model: &SystemModel, grouping_tol: f64) -> Result<Liouvillian> {
    model.validate()?;
    let n = model.n_sites();
    let d = n * n;
    let spectrum = BathSpectrum::of(model)?;
    let corr = correlation_matrix(model)?;
    let h_s = build_site_hamiltonian(model);
    let basis = diagonalize(&h_s);
    let table = secular_transitions(&basis, grouping_tol)?;

    let minus_i_over_hbar = -I / HBAR;
    let coherent = commutator(&h_s) * minus_i_over_hbar;
    let h_ls = lamb_shift_correlated(&basis, model.reorganization_energy, &corr);
    let lamb = commutator(&h_ls) * minus_i_over_hbar;

    let (relax, dephase) = if model.reorganization_energy == 0.0 {
        (CMat::zeros(d, d), CMat::zeros(d, d))
    } else {
        lindblad_parts(&basis, &table, &corr, model.temperature, &spectrum)?
    };

    // -(1/ħ){ħ K, ·} = -{K, ·}
    let kappa = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        model.trap_rates.iter().map(|&k| C64::new(k, 0.0)),
    ));
    let trap = -anticommutator(&kappa);
    let recomb = -anticommutator(&(CMat::identity(n, n) * C64::new(model.recombination_rate, 0.0)));

    let parts = vec![coherent, lamb, relax, dephase, trap, recomb];
    let full = parts.iter().fold(CMat::zeros(d, d), |acc, p| acc + p);
    Ok(Liouvillian {
        n,
        parts,
        full,
        trap_rates: model.trap_rates.clone(),
        recombination_rate: model.recombination_rate,
        degenerate: !basis.degeneracies(DEGENERACY_TOL).is_empty(),
        basis,
        model_hash: model.hash(),
    })
}

fn lindblad_parts(
    basis: &ExcitonBasis,
    table: &TransitionTable,
    corr: &crate::model::CorrelationMatrix,
    temperature: f64,
    spectrum: &BathSpectrum,
) -> Result<(CMat, CMat)> {
    let n = basis.dim();
    let d = n * n;
    let mut relax = CMat::zeros(d, d);
    let mut dephase = CMat::zeros(d, d);
    let gamma_phi = dephasing_rate(temperature, spectrum)?;
    for group in &table.groups {
        let rate = if group.is_dephasing() { gamma_phi } else { transition_rate(group.omega, temperature, spectrum)? };
        if rate == 0.0 {
            continue;
        }
        let gens: Vec<CMat> = (0..n).map(|m| group.generator(m, basis)).collect();
        let target = if group.is_dephasing() { &mut dephase } else { &mut relax };
        for m in 0..n {
            for k in 0..n {
                let c = corr.get(m, k);
                if c == 0.0 {
                    continue;
                }
                let w = C64::new(rate * c, 0.0);
                let a_m = &gens[m];
                let a_k_dag = gens[k].adjoint();
                let product = &a_k_dag * a_m;
                let term = sandwich(a_m, &a_k_dag) - (left_mul(&product) + right_mul(&product)) * C64::new(0.5, 0.0);
                *target += term * w;
            }
        }
    }
    Ok((relax, dephase))
}

/// Error for operations that need a sink to make the generator invertible.
pub(crate) fn require_sink(l: &Liouvillian) -> Result<()> {
    if l.has_sink() {
        Ok(())
    } else {
        Err(Error::precondition(
            "no sink: every trap rate is zero and the recombination rate is zero, so the generator is singular",
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, unvectorize, vectorize};
    use crate::model::InitialStateSpec;
    use nalgebra::DMatrix;

    fn toy(er: f64) -> SystemModel {
        SystemModel {
            site_energies: vec![100.0, 0.0, 60.0],
            couplings: DMatrix::from_row_slice(3, 3, &[0.0, 40.0, 10.0, 40.0, 0.0, 25.0, 10.0, 25.0, 0.0]),
            distances: Some(DMatrix::from_row_slice(3, 3, &[0.0, 10.0, 14.0, 10.0, 0.0, 11.0, 14.0, 11.0, 0.0])),
            trap_rates: vec![0.0, 1.0, 0.0],
            recombination_rate: 1e-3,
            temperature: 295.0,
            reorganization_energy: er,
            cutoff: 150.0,
            correlation_radius: 0.0,
            disorder_fwhm: vec![0.0; 3],
            initial_state: InitialStateSpec::Site(0),
        }
    }

    #[test]
    fn parts_sum_to_full() {
        let l = assemble(&toy(35.0)).unwrap();
        let sum = l.sum_of(&Part::ALL);
        assert!(max_abs(&(sum - l.full())) < 1e-12);
    }

    #[test]
    fn sinks_are_diagonal() {
        let l = assemble(&toy(35.0)).unwrap();
        for p in [Part::Trap, Part::Recomb] {
            let m = l.part(p);
            let off = max_abs(&(m - CMat::from_diagonal(&m.diagonal())));
            assert_eq!(off, 0.0);
        }
    }

    #[test]
    fn lindblad_annihilates_trace() {
        let mut model = toy(35.0);
        model.correlation_radius = 12.0;
        let l = assemble(&model).unwrap();
        let n = 3;
        let lind = l.sum_of(&[Part::Relax, Part::Dephase]);
        for col in 0..n * n {
            let tr: C64 = (0..n).map(|m| lind[(m + m * n, col)]).sum();
            assert!(tr.norm() < 1e-10);
        }
    }

    #[test]
    fn zero_coupling_zeroes_bath_parts() {
        let l = assemble(&toy(0.0)).unwrap();
        for p in [Part::Relax, Part::Dephase, Part::Lamb] {
            assert_eq!(max_abs(l.part(p)), 0.0);
        }
    }

    #[test]
    fn coherent_action() {
        let model = toy(0.0);
        let l = assemble(&model).unwrap();
        let h = build_site_hamiltonian(&model);
        let mut rho = CMat::zeros(3, 3);
        rho[(0, 0)] = C64::new(0.7, 0.0);
        rho[(1, 1)] = C64::new(0.3, 0.0);
        rho[(0, 1)] = C64::new(0.1, 0.2);
        rho[(1, 0)] = C64::new(0.1, -0.2);
        let direct = (&h * &rho - &rho * &h) * (-I / HBAR);
        let via = unvectorize(&(l.part(Part::Coherent) * vectorize(&rho)), 3);
        assert!(max_abs(&(direct - via)) < 1e-12);
    }

    #[test]
    fn restriction_keeps_only_listed_parts() {
        let l = assemble(&toy(35.0)).unwrap();
        let r = l.restricted(&[Part::Coherent, Part::Dephase]);
        assert!(max_abs(&(r.full() - l.sum_of(&[Part::Coherent, Part::Dephase]))) < 1e-14);
        assert!(!r.has_sink());
        let none = l.restricted(&[]);
        assert_eq!(max_abs(none.full()), 0.0);
    }
}
