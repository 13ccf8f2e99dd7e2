//! Reading model files.
//!
//! A model file is a single TOML document. Energies are in cm⁻¹, rates in
//! ps⁻¹, distances in Å; there are no unit annotations. Site labels are
//! one-based.
//!
//! ```toml
//! temperature = 295.0
//! reorganization_energy = 35.0
//! cutoff = 150.0
//! gamma_recomb = 0.001
//! correlation_radius = 0.0        # or inf
//! couplings = [[0, -104.1], [-104.1, 0]]   # full matrix, upper triangle rows,
//!                                          # or [[couplings]] i/j/value tables
//! distances = [[0, 12], [12, 0]]  # optional, else derived from positions
//!
//! [initial_state]
//! kind = "mixture"                # "site" (site = 1), "mixture" (exclude = [..]),
//! exclude = [2]                   # or "matrix" (real = [[..]], imag = [[..]])
//!
//! [[sites]]
//! energy = 215.0
//! trap_rate = 0.0
//! fwhm = 60.0
//! position = [0.0, 0.0, 0.0]      # optional
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use super::{InitialStateSpec, SystemModel};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// The bundled FMO model.
pub const BUNDLED_FMO: &str = include_str!("../../data/fmo.model");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    sites: Vec<SiteEntry>,
    couplings: Couplings,
    distances: Option<Vec<Vec<f64>>>,
    gamma_recomb: f64,
    temperature: f64,
    reorganization_energy: f64,
    cutoff: f64,
    #[serde(default)]
    correlation_radius: f64,
    initial_state: InitialStateEntry,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteEntry {
    energy: f64,
    #[serde(default)]
    trap_rate: f64,
    #[serde(default)]
    fwhm: f64,
    position: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Couplings {
    Rows(Vec<Vec<f64>>),
    Entries(Vec<CouplingEntry>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingEntry {
    i: usize,
    j: usize,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum InitialStateEntry {
    Site { site: usize },
    Mixture {
        #[serde(default)]
        exclude: Vec<usize>,
    },
    Matrix {
        real: Vec<Vec<f64>>,
        imag: Option<Vec<Vec<f64>>>,
    },
}

/// Reads and validates a model file.
pub fn load_model(path: &Path) -> Result<SystemModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<SystemModel> {
    let raw: ModelFile = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
    let n = raw.sites.len();
    if n < 2 {
        return Err(Error::config(format!("sites: need at least 2 sites, got {n}")));
    }
    let couplings = coupling_matrix(&raw.couplings, n)?;
    let distances = match (&raw.distances, positions(&raw.sites)?) {
        (Some(rows), _) => Some(square_matrix("distances", rows, n)?),
        (None, Some(pos)) => Some(DMatrix::from_fn(n, n, |i, j| {
            let d: f64 = (0..3).map(|k| (pos[i][k] - pos[j][k]).powi(2)).sum();
            d.sqrt()
        })),
        (None, None) => None,
    };
    let one_based = |key: &str, site: usize| -> Result<usize> {
        if site == 0 || site > n {
            Err(Error::config(format!("{key}: site {site} out of range 1..={n}")))
        } else {
            Ok(site - 1)
        }
    };
    let initial_state = match &raw.initial_state {
        InitialStateEntry::Site { site } => InitialStateSpec::Site(one_based("initial_state.site", *site)?),
        InitialStateEntry::Mixture { exclude } => InitialStateSpec::MixtureExcluding(
            exclude
                .iter()
                .map(|&s| one_based("initial_state.exclude", s))
                .collect::<Result<_>>()?,
        ),
        InitialStateEntry::Matrix { real, imag } => {
            let re = square_matrix("initial_state.real", real, n)?;
            let im = match imag {
                Some(rows) => square_matrix("initial_state.imag", rows, n)?,
                None => DMatrix::zeros(n, n),
            };
            InitialStateSpec::Matrix(CMat::from_fn(n, n, |i, j| C64::new(re[(i, j)], im[(i, j)])))
        }
    };
    let model = SystemModel {
        site_energies: raw.sites.iter().map(|s| s.energy).collect(),
        couplings,
        distances,
        trap_rates: raw.sites.iter().map(|s| s.trap_rate).collect(),
        recombination_rate: raw.gamma_recomb,
        temperature: raw.temperature,
        reorganization_energy: raw.reorganization_energy,
        cutoff: raw.cutoff,
        correlation_radius: raw.correlation_radius,
        disorder_fwhm: raw.sites.iter().map(|s| s.fwhm).collect(),
        initial_state,
    };
    model.validate()?;
    Ok(model)
}

fn positions(sites: &[SiteEntry]) -> Result<Option<Vec<[f64; 3]>>> {
    let given = sites.iter().filter(|s| s.position.is_some()).count();
    match given {
        0 => Ok(None),
        g if g == sites.len() => Ok(Some(sites.iter().map(|s| s.position.unwrap()).collect())),
        _ => Err(Error::config("sites.position: either every site or no site must have a position")),
    }
}

fn square_matrix(key: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(Error::config(format!("{key}: expected {n} rows, got {}", rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::config(format!(
                "{key}: row {} has {} entries, expected {n}",
                i + 1,
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn coupling_matrix(c: &Couplings, n: usize) -> Result<DMatrix<f64>> {
    match c {
        Couplings::Rows(rows) if rows.len() == n && rows.iter().all(|r| r.len() == n) => {
            square_matrix("couplings", rows, n)
        }
        Couplings::Rows(rows) => {
            // Upper triangle without the diagonal: row i holds V_{i,i+1..n}.
            let ragged = rows.len() == n - 1 && rows.iter().enumerate().all(|(i, r)| r.len() == n - 1 - i);
            if !ragged {
                return Err(Error::config(format!(
                    "couplings: expected a full {n}x{n} matrix or {} upper-triangle rows",
                    n - 1
                )));
            }
            let mut m = DMatrix::zeros(n, n);
            for (i, row) in rows.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    let j = i + 1 + k;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            Ok(m)
        }
        Couplings::Entries(entries) => {
            let mut m = DMatrix::zeros(n, n);
            for (k, e) in entries.iter().enumerate() {
                if e.i == 0 || e.j == 0 || e.i > n || e.j > n || e.i == e.j {
                    return Err(Error::config(format!(
                        "couplings[{k}]: invalid site pair ({}, {})",
                        e.i, e.j
                    )));
                }
                m[(e.i - 1, e.j - 1)] = e.value;
                m[(e.j - 1, e.i - 1)] = e.value;
            }
            Ok(m)
        }
    }
}
