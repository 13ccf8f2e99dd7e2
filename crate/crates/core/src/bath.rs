//! Phonon bath: Ohmic spectral density, thermal transition rates, the pure
//! dephasing limit, the Lamb shift, and the secular grouping of exciton
//! transitions by frequency.
//!
//! The spatial correlation factor `C_mn` is deliberately absent here; every
//! rate below is the site-independent factor and the correlation matrix is
//! applied when the Liouvillian is assembled.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::model::{CorrelationMatrix, ExcitonBasis, SystemModel};
use crate::quantities::{energy_to_angular_frequency, thermal_energy, HBAR};

/// Default tolerance (rad/ps) for grouping exciton transitions into one
/// secular frequency.
pub const DEFAULT_GROUPING_TOL: f64 = 1e-6;

/// Ohmic spectral density with exponential cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpectrum {
    /// E_R in cm⁻¹.
    pub reorganization_energy: f64,
    /// ω_c in cm⁻¹.
    pub cutoff: f64,
}

impl BathSpectrum {
    pub fn new(reorganization_energy: f64, cutoff: f64) -> Result<Self> {
        if !(reorganization_energy >= 0.0 && reorganization_energy.is_finite()) {
            return Err(Error::config("reorganization energy must be finite and >= 0"));
        }
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::config("cutoff must be finite and > 0"));
        }
        Ok(BathSpectrum { reorganization_energy, cutoff })
    }

    pub fn of(model: &SystemModel) -> Result<Self> {
        Self::new(model.reorganization_energy, model.cutoff)
    }

    /// Dimensionless coupling `E_R / ħω_c`.
    fn strength(&self) -> f64 {
        self.reorganization_energy / self.cutoff
    }
}

/// `J(ω)` in ps⁻¹ for ω in rad/ps; zero for negative frequencies.
pub fn spectral_density(omega: f64, spectrum: &BathSpectrum) -> f64 {
    if omega <= 0.0 {
        return 0.0;
    }
    let wc = energy_to_angular_frequency(spectrum.cutoff);
    spectrum.strength() * omega * (-omega / wc).exp()
}

/// Bose-Einstein occupation `1 / (exp(ħω/kT) - 1)`.
///
/// Defined for negative ω as well, where it equals `-(1 + n(|ω|))`.
pub fn bose_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if omega == 0.0 {
        return Err(Error::precondition(
            "bose occupation diverges at zero frequency; use dephasing_rate",
        ));
    }
    let kt = thermal_energy(temperature)?;
    if kt == 0.0 {
        return Ok(if omega > 0.0 { 0.0 } else { -1.0 });
    }
    let x = HBAR * omega / kt;
    Ok(1.0 / x.exp_m1())
}

/// Site-independent transition rate
/// `γ(ω) = 2π [J(ω)(1 + n(ω)) + J(-ω) n(-ω)]` in ps⁻¹.
///
/// Positive ω is emission (the system loses energy ħω).
pub fn transition_rate(omega: f64, temperature: f64, spectrum: &BathSpectrum) -> Result<f64> {
    if omega == 0.0 {
        return Err(Error::precondition(
            "transition rate at zero frequency is the dephasing rate",
        ));
    }
    let rate = if omega > 0.0 {
        spectral_density(omega, spectrum) * (1.0 + bose_occupation(omega, temperature)?)
    } else {
        spectral_density(-omega, spectrum) * bose_occupation(-omega, temperature)?
    };
    Ok(2.0 * PI * rate)
}

/// Site-independent pure-dephasing rate `2π (E_R / ħω_c) kT/ħ` in ps⁻¹,
/// the ω → 0⁺ limit of [`transition_rate`].
pub fn dephasing_rate(temperature: f64, spectrum: &BathSpectrum) -> Result<f64> {
    let kt = thermal_energy(temperature)?;
    Ok(2.0 * PI * spectrum.strength() * energy_to_angular_frequency(kt))
}

/// Diagonal Lamb shift `E_R Σ_m |c_m(M)|⁴ |M⟩⟨M|`, returned in the site basis.
pub fn lamb_shift(basis: &ExcitonBasis, reorganization_energy: f64) -> CMat {
    lamb_shift_correlated(basis, reorganization_energy, &CorrelationMatrix::identity(basis.dim()))
}

/// Lamb shift for spatially correlated fluctuations,
/// `E_R Σ_mn C_mn |c_m(M)|² |c_n(M)|² |M⟩⟨M|`.
///
/// Reduces to [`lamb_shift`] for `C = 1` and to a global (irrelevant) energy
/// offset `E_R` for fully correlated fluctuations.
pub fn lamb_shift_correlated(
    basis: &ExcitonBasis,
    reorganization_energy: f64,
    correlation: &CorrelationMatrix,
) -> CMat {
    let n = basis.dim();
    let mut h = CMat::zeros(n, n);
    if reorganization_energy == 0.0 {
        return h;
    }
    for big_m in 0..n {
        let mut shift = 0.0;
        for m in 0..n {
            for k in 0..n {
                let c = correlation.get(m, k);
                if c != 0.0 {
                    shift += c * basis.weight(m, big_m) * basis.weight(k, big_m);
                }
            }
        }
        h += basis.transition_operator(big_m, big_m) * C64::new(reorganization_energy * shift, 0.0);
    }
    h
}

/// One secular frequency and the exciton pairs `(M, N)` (operator `|M⟩⟨N|`)
/// whose transition `ε_N - ε_M = ħω` falls on it.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGroup {
    /// rad/ps; exactly zero for the group holding the diagonal pairs.
    pub omega: f64,
    pub pairs: Vec<(usize, usize)>,
}

impl TransitionGroup {
    pub fn is_dephasing(&self) -> bool {
        self.omega == 0.0
    }

    /// Lindblad generator `A_m(ω) = Σ c_m*(M) c_m(N) |M⟩⟨N|` in the site basis.
    pub fn generator(&self, site: usize, basis: &ExcitonBasis) -> CMat {
        let n = basis.dim();
        let mut a = CMat::zeros(n, n);
        for &(to, from) in &self.pairs {
            let w = basis.coefficient(site, to).conj() * basis.coefficient(site, from);
            if w != C64::new(0.0, 0.0) {
                a += basis.transition_operator(to, from) * w;
            }
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    pub groups: Vec<TransitionGroup>,
    pub tolerance: f64,
}

impl TransitionTable {
    pub fn dephasing_group(&self) -> &TransitionGroup {
        self.groups.iter().find(|g| g.is_dephasing()).expect("zero-frequency group always exists")
    }
}

/// Groups all ordered exciton pairs by transition frequency.
///
/// Frequencies are sorted and chained: a pair joins the current group when it
/// lies within `tolerance` of the previous one. The group containing the
/// diagonal pairs is pinned to ω = 0.
pub fn secular_transitions(basis: &ExcitonBasis, tolerance: f64) -> Result<TransitionTable> {
    if !(tolerance > 0.0) {
        return Err(Error::config("grouping tolerance must be > 0"));
    }
    let n = basis.dim();
    let mut pairs: Vec<(f64, (usize, usize))> = Vec::with_capacity(n * n);
    for to in 0..n {
        for from in 0..n {
            let omega = if to == from {
                0.0
            } else {
                energy_to_angular_frequency(basis.energies[from] - basis.energies[to])
            };
            pairs.push((omega, (to, from)));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut groups: Vec<(Vec<f64>, Vec<(usize, usize)>)> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (omega, pair) in pairs {
        match groups.last_mut() {
            Some((ws, ps)) if omega - last <= tolerance => {
                ws.push(omega);
                ps.push(pair);
            }
            _ => groups.push((vec![omega], vec![pair])),
        }
        last = omega;
    }
    let groups = groups
        .into_iter()
        .map(|(ws, mut ps)| {
            let diagonal = ps.iter().any(|(a, b)| a == b);
            let omega = if diagonal { 0.0 } else { ws.iter().sum::<f64>() / ws.len() as f64 };
            ps.sort();
            TransitionGroup { omega, pairs: ps }
        })
        .collect();
    Ok(TransitionTable { groups, tolerance })
}
