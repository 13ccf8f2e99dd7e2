//! The chromophoric network: site Hamiltonian, sinks, geometry, bath
//! parameters and static disorder.
//!
//! Site indices are zero-based throughout the library. Model files and
//! command-line output use one-based site labels.

mod file;

pub use file::{load_model, parse_model, BUNDLED_FMO};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::liouville::DensityMatrix;

/// Conversion from a Gaussian full width at half maximum to its standard
/// deviation, `2√(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

/// Relative tolerance for eigenvalue degeneracy flags (cm⁻¹).
pub const DEGENERACY_TOL: f64 = 1e-6;

/// How the initial density matrix is prepared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialStateSpec {
    /// Excitation localized on one site.
    Site(usize),
    /// Equal-weight incoherent mixture of every site not listed.
    MixtureExcluding(Vec<usize>),
    /// An explicit density matrix.
    Matrix(CMat),
}

/// Full physical specification of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    /// ε_m in cm⁻¹.
    pub site_energies: Vec<f64>,
    /// V_mn in cm⁻¹; symmetric with zero diagonal.
    pub couplings: DMatrix<f64>,
    /// R_mn in Å; required only for a finite positive correlation radius.
    pub distances: Option<DMatrix<f64>>,
    /// κ_m in ps⁻¹.
    pub trap_rates: Vec<f64>,
    /// Γ in ps⁻¹.
    pub recombination_rate: f64,
    /// T in K.
    pub temperature: f64,
    /// E_R in cm⁻¹.
    pub reorganization_energy: f64,
    /// ω_c in cm⁻¹.
    pub cutoff: f64,
    /// R_c in Å. Zero means uncorrelated, `+inf` perfectly correlated.
    pub correlation_radius: f64,
    /// Static-disorder FWHM per site in cm⁻¹.
    pub disorder_fwhm: Vec<f64>,
    pub initial_state: InitialStateSpec,
}

/// Eigen-decomposition of the system Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitonBasis {
    /// ε_M in cm⁻¹, ascending.
    pub energies: DVector<f64>,
    /// Column `M` holds `c_m(M)`.
    pub coefficients: CMat,
}

/// Spatial correlation of bath fluctuations, `C_mn`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(DMatrix<f64>);

impl SystemModel {
    pub fn n_sites(&self) -> usize {
        self.site_energies.len()
    }

    /// Checks the model invariants, naming offending indices (one-based).
    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites();
        if n < 2 {
            return Err(Error::config(format!("a network needs at least 2 sites, got {n}")));
        }
        let per_site = [
            ("trap_rates", self.trap_rates.len()),
            ("disorder_fwhm", self.disorder_fwhm.len()),
        ];
        for (name, len) in per_site {
            if len != n {
                return Err(Error::config(format!("{name} has {len} entries for {n} sites")));
            }
        }
        if self.couplings.shape() != (n, n) {
            return Err(Error::config(format!(
                "couplings must be {n}x{n}, got {:?}",
                self.couplings.shape()
            )));
        }
        check_symmetric_zero_diagonal("couplings", &self.couplings)?;
        if let Some(r) = &self.distances {
            if r.shape() != (n, n) {
                return Err(Error::config(format!("distances must be {n}x{n}, got {:?}", r.shape())));
            }
            check_symmetric_zero_diagonal("distances", r)?;
            for ((i, j), v) in r.iter().enumerate().map(|(k, v)| ((k % n, k / n), v)) {
                if *v < 0.0 {
                    return Err(Error::config(format!(
                        "negative distance between sites {} and {}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        for (m, e) in self.site_energies.iter().enumerate() {
            if !e.is_finite() {
                return Err(Error::config(format!("site {} energy is not finite", m + 1)));
            }
        }
        for (m, k) in self.trap_rates.iter().enumerate() {
            if !(k.is_finite() && *k >= 0.0) {
                return Err(Error::config(format!("site {} trap rate must be finite and >= 0", m + 1)));
            }
        }
        for (m, s) in self.disorder_fwhm.iter().enumerate() {
            if !(s.is_finite() && *s >= 0.0) {
                return Err(Error::config(format!("site {} disorder FWHM must be finite and >= 0", m + 1)));
            }
        }
        let scalar = |name: &str, v: f64, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("{name} = {v} is out of range")))
            }
        };
        let g = self.recombination_rate;
        scalar("gamma_recomb", g, g.is_finite() && g >= 0.0)?;
        let t = self.temperature;
        scalar("temperature", t, t.is_finite() && t >= 0.0)?;
        let er = self.reorganization_energy;
        scalar("reorganization_energy", er, er.is_finite() && er >= 0.0)?;
        let wc = self.cutoff;
        scalar("cutoff", wc, wc.is_finite() && wc > 0.0)?;
        let rc = self.correlation_radius;
        scalar("correlation_radius", rc, rc >= 0.0)?;
        if rc > 0.0 && rc.is_finite() && self.distances.is_none() {
            return Err(Error::config(
                "correlation_radius > 0 requires distances or site positions",
            ));
        }
        if let InitialStateSpec::Matrix(m) = &self.initial_state {
            if m.shape() != (n, n) {
                return Err(Error::config(format!("initial_state matrix must be {n}x{n}")));
            }
        }
        initial_state(self, &self.initial_state)?;
        Ok(())
    }

    /// Whether any probability sink is active.
    pub fn has_sink(&self) -> bool {
        self.recombination_rate > 0.0 || self.trap_rates.iter().any(|&k| k > 0.0)
    }

    /// Short content hash used to tie output files to the model they came from.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn check_symmetric_zero_diagonal(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        if m[(i, i)] != 0.0 {
            return Err(Error::config(format!("{name} has nonzero diagonal at site {}", i + 1)));
        }
        for j in 0..n {
            if !m[(i, j)].is_finite() {
                return Err(Error::config(format!("{name}[{}][{}] is not finite", i + 1, j + 1)));
            }
            if j > i && (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()) {
                return Err(Error::config(format!(
                    "{name} is not symmetric: [{}][{}] = {} but [{}][{}] = {}",
                    i + 1,
                    j + 1,
                    m[(i, j)],
                    j + 1,
                    i + 1,
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// `H_S` in the site basis (cm⁻¹).
pub fn build_site_hamiltonian(model: &SystemModel) -> CMat {
    let n = model.n_sites();
    CMat::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(model.site_energies[i], 0.0)
        } else {
            C64::new(model.couplings[(i, j)], 0.0)
        }
    })
}

/// Diagonalizes a Hermitian matrix. Eigenvalues come out ascending and each
/// eigenvector is phased so its largest component is real and positive.
pub fn diagonalize(h: &CMat) -> ExcitonBasis {
    let n = h.nrows();
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut coefficients = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let phase = if v[pivot].norm() > 0.0 { v[pivot].conj() / v[pivot].norm() } else { C64::new(1.0, 0.0) };
        let norm = v.norm();
        coefficients.set_column(col, &(v * (phase / norm)));
    }
    ExcitonBasis { energies, coefficients }
}

impl ExcitonBasis {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `c_m(M)`.
    #[inline]
    pub fn coefficient(&self, site: usize, exciton: usize) -> C64 {
        self.coefficients[(site, exciton)]
    }

    /// `|c_m(M)|²`.
    #[inline]
    pub fn weight(&self, site: usize, exciton: usize) -> f64 {
        self.coefficients[(site, exciton)].norm_sqr()
    }

    /// `|M⟩⟨N|` expressed in the site basis.
    pub fn transition_operator(&self, to: usize, from: usize) -> CMat {
        self.coefficients.column(to) * self.coefficients.column(from).adjoint()
    }

    /// Pairs of exciton indices whose energies coincide within `tol` cm⁻¹.
    pub fn degeneracies(&self, tol: f64) -> Vec<(usize, usize)> {
        let e = &self.energies;
        (0..e.len())
            .flat_map(|a| ((a + 1)..e.len()).map(move |b| (a, b)))
            .filter(|&(a, b)| (e[a] - e[b]).abs() <= tol)
            .collect()
    }

    /// Σ_M ε_M |M⟩⟨M| in the site basis.
    pub fn reconstruct(&self) -> CMat {
        let c = &self.coefficients;
        let d = CMat::from_diagonal(&self.energies.map(|x| C64::new(x, 0.0)));
        c * d * c.adjoint()
    }
}

impl CorrelationMatrix {
    pub fn identity(n: usize) -> Self {
        CorrelationMatrix(DMatrix::identity(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.0[(m, n)]
    }

    pub fn is_identity(&self) -> bool {
        let n = self.0.nrows();
        (0..n).all(|i| (0..n).all(|j| self.0[(i, j)] == if i == j { 1.0 } else { 0.0 }))
    }
}

/// `C_mn = exp(-R_mn / R_c)`, the identity for `R_c = 0` and all ones for
/// `R_c = ∞`.
pub fn correlation_matrix(model: &SystemModel) -> Result<CorrelationMatrix> {
    let n = model.n_sites();
    let rc = model.correlation_radius;
    if rc == 0.0 {
        return Ok(CorrelationMatrix::identity(n));
    }
    if rc.is_infinite() {
        return Ok(CorrelationMatrix(DMatrix::from_element(n, n, 1.0)));
    }
    let r = model
        .distances
        .as_ref()
        .ok_or_else(|| Error::config("correlation_radius > 0 requires distances"))?;
    Ok(CorrelationMatrix(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            (-r[(i, j)] / rc).exp()
        }
    })))
}

/// Draws one static-disorder realization: every site energy is shifted by a
/// normal deviate with standard deviation `fwhm / 2√(2 ln 2)`.
///
/// One standard normal is drawn per site regardless of its width, so the
/// random stream consumed does not depend on which widths are zero.
pub fn sample_disorder(model: &SystemModel, seed: u64) -> SystemModel {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = model.clone();
    for (e, fwhm) in out.site_energies.iter_mut().zip(&model.disorder_fwhm) {
        let z: f64 = StandardNormal.sample(&mut rng);
        if *fwhm > 0.0 {
            *e += z * fwhm / FWHM_PER_SIGMA;
        }
    }
    out
}

/// Builds the initial density matrix described by `spec`.
pub fn initial_state(model: &SystemModel, spec: &InitialStateSpec) -> Result<DensityMatrix> {
    let n = model.n_sites();
    match spec {
        InitialStateSpec::Site(m) => {
            if *m >= n {
                return Err(Error::config(format!("initial site {} out of range 1..={n}", m + 1)));
            }
            let mut rho = CMat::zeros(n, n);
            rho[(*m, *m)] = C64::new(1.0, 0.0);
            Ok(DensityMatrix::from_raw(rho))
        }
        InitialStateSpec::MixtureExcluding(excluded) => {
            if let Some(bad) = excluded.iter().find(|&&m| m >= n) {
                return Err(Error::config(format!("excluded site {} out of range 1..={n}", bad + 1)));
            }
            let kept: Vec<usize> = (0..n).filter(|m| !excluded.contains(m)).collect();
            if kept.is_empty() {
                return Err(Error::config("initial mixture excludes every site"));
            }
            let w = 1.0 / kept.len() as f64;
            let mut rho = CMat::zeros(n, n);
            for m in kept {
                rho[(m, m)] = C64::new(w, 0.0);
            }
            Ok(DensityMatrix::from_raw(rho))
        }
        InitialStateSpec::Matrix(m) => {
            if m.shape() != (n, n) {
                return Err(Error::config(format!("initial_state matrix must be {n}x{n}")));
            }
            DensityMatrix::normalized(m.clone())
        }
    }
}
