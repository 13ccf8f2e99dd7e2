use nalgebra::{DMatrixView, DMatrixViewMut};

use super::report::{Contribution, ContributionReport, Diagnostics, Measure, PathwayMatrix};
use super::scheme::{PartitionScheme, SparseMask, Target};
use crate::error::{Error, Result};
use crate::linalg::{unvectorize, vectorize, CMat, CVec, C64};
use crate::liouville::{default_horizon, DensityMatrix, Liouvillian, OdeOptions, OdeStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SusceptibilityOptions {
    /// Outer integration limit, ps. Defaults to `5/Γ`.
    pub horizon: Option<f64>,
    pub ode: OdeOptions,
    /// Integration stops once every entry of ρ has fallen below
    /// `tol = max(decay_tol, 100 abs_tol)` and every entry of each σ_k below
    /// `tol · t` (σ_k carries a factor of t); the remaining outer integral is
    /// extended analytically. Entries cannot settle much below the absolute
    /// tolerance of the integrator.
    pub decay_tol: f64,
}

impl Default for SusceptibilityOptions {
    fn default() -> Self {
        SusceptibilityOptions { horizon: None, ode: OdeOptions::default(), decay_tol: 1e-8 }
    }
}

/// Sensitivities `σ_k(t) = ∂ρ(t)/∂λ_k` sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMat>,
    /// `sensitivities[i][k]` is σ_k at `times[i]`.
    pub sensitivities: Vec<Vec<CMat>>,
    pub stats: OdeStats,
}

/// Layout of the joint state: the columns of a `d × (K+1)` block hold ρ and
/// σ_1..σ_K, followed by the inner integrals g_k, the outer integrals η_k and
/// the trapped and recombined yields.
struct Layout {
    n: usize,
    d: usize,
    k: usize,
}

impl Layout {
    fn block(&self) -> usize {
        self.d * (self.k + 1)
    }
    fn g(&self, k: usize) -> usize {
        self.block() + k
    }
    fn e(&self, k: usize) -> usize {
        self.block() + self.k + k
    }
    fn trapped(&self) -> usize {
        self.block() + 2 * self.k
    }
    fn len(&self) -> usize {
        self.trapped() + 2
    }
}

fn trap_density(rates: &[f64], v: &[C64], n: usize) -> f64 {
    2.0 * (0..n).map(|m| rates[m] * v[m + m * n].re).sum::<f64>()
}

/// Integrates ρ and all σ_k jointly. `extras` enables the g/η accumulators.
fn run(
    l: &Liouvillian,
    masks: &[SparseMask],
    rho0: &DensityMatrix,
    horizon: f64,
    grid: &[f64],
    opts: &OdeOptions,
    decay_tol: Option<f64>,
    mut on_grid: impl FnMut(f64, &CVec, &Layout),
) -> Result<(f64, CVec, OdeStats)> {
    let n = l.n_sites();
    let lay = Layout { n, d: n * n, k: masks.len() };
    let mut y0 = CVec::zeros(lay.len());
    y0.rows_mut(0, lay.d).copy_from(&vectorize(rho0.matrix()));
    let full = l.full();
    let rates = l.trap_rates().to_vec();
    let gamma = l.recombination_rate();
    let (d, kk) = (lay.d, lay.k);
    let mut scratch = vec![C64::new(0.0, 0.0); d];
    let rhs = |t: f64, y: &CVec, dy: &mut CVec| {
        let ys = y.as_slice();
        let dys = dy.as_mut_slice();
        {
            let block = DMatrixView::from_slice(&ys[..d * (kk + 1)], d, kk + 1);
            let mut out = DMatrixViewMut::from_slice(&mut dys[..d * (kk + 1)], d, kk + 1);
            out.gemm(C64::new(1.0, 0.0), full, &block, C64::new(0.0, 0.0));
        }
        let rho = &ys[..d];
        for (k, mask) in masks.iter().enumerate() {
            let col = &mut dys[(k + 1) * d..(k + 2) * d];
            mask.apply_add(rho, col);
        }
        for k in 0..kk {
            // s_k / t with its limit at t = 0, where σ_k = 0 and σ_k' = M_k ρ0.
            let s = if t > 0.0 {
                trap_density(&rates, &ys[(k + 1) * d..(k + 2) * d], n) / t
            } else {
                for v in scratch.iter_mut() {
                    *v = C64::new(0.0, 0.0);
                }
                masks[k].apply_add(rho, &mut scratch);
                trap_density(&rates, &scratch, n)
            };
            dys[lay.g(k)] = C64::new(s, 0.0);
            dys[lay.e(k)] = C64::new(ys[lay.g(k)].re, 0.0);
        }
        let pop: f64 = (0..n).map(|m| rho[m + m * n].re).sum();
        dys[lay.trapped()] = C64::new(trap_density(&rates, rho, n), 0.0);
        dys[lay.trapped() + 1] = C64::new(2.0 * gamma * pop, 0.0);
    };
    let block_len = lay.block();
    let end = crate::liouville::integrate(
        rhs,
        y0,
        horizon,
        grid,
        opts,
        |t, y| on_grid(t, y, &lay),
        |t, y| match decay_tol {
            Some(tol) => {
                let ys = y.as_slice();
                ys[..d].iter().all(|v| v.norm() < tol)
                    && ys[d..block_len].iter().all(|v| v.norm() < tol * t.max(1.0))
            }
            None => false,
        },
    )?;
    Ok((end.t, end.y, end.stats))
}

fn check(l: &Liouvillian, rho0: &DensityMatrix) -> Result<()> {
    if rho0.dim() != l.n_sites() {
        return Err(Error::config("initial state dimension does not match the model"));
    }
    Ok(())
}

/// Integrates `dσ_k/dt = L σ_k + M_k ρ(t)`, `σ_k(0) = 0`, jointly with ρ and
/// samples every σ_k on `grid`.
pub fn sensitivity_trajectory(
    l: &Liouvillian,
    masks: &[CMat],
    rho0: &DensityMatrix,
    horizon: f64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<SensitivityTrajectory> {
    check(l, rho0)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config("horizon must be positive and finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|&t| t < 0.0 || t > horizon) {
        return Err(Error::config("output grid must be strictly ascending within [0, horizon]"));
    }
    let d = l.dim();
    if masks.iter().any(|m| m.nrows() != d || m.ncols() != d) {
        return Err(Error::config(format!("masks must be {d}x{d} Liouville-space matrices")));
    }
    let sparse: Vec<SparseMask> = masks.iter().map(SparseMask::from_dense).collect();
    let n = l.n_sites();
    let mut out = SensitivityTrajectory {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        sensitivities: Vec::with_capacity(grid.len()),
        stats: OdeStats::default(),
    };
    let (_, _, stats) = run(l, &sparse, rho0, horizon, grid, opts, None, |t, y, lay| {
        let col = |c: usize| unvectorize(&y.rows(c * lay.d, lay.d).into_owned(), n);
        out.times.push(t);
        out.states.push(col(0));
        out.sensitivities.push((1..=lay.k).map(col).collect());
    })?;
    out.stats = stats;
    Ok(out)
}

/// Susceptibility measure: `η_k = ∫₀^H g_k(t) dt` with
/// `g_k(t) = ∫₀^t (2/ħ) Tr{H_trap σ_k(t')} / t' dt'`.
///
/// Once ρ and every σ_k have decayed (at time T) the inner integrals are
/// constant, so the outer integral is completed as `g_k(T) (H - T)`. The
/// individual g_k(T) need not vanish even though their sum does; they are
/// reported as slopes, and a warning is attached when they are not
/// negligible.
pub fn susceptibility_contributions(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    scheme: &PartitionScheme,
    opts: &SusceptibilityOptions,
) -> Result<ContributionReport> {
    check(l, rho0)?;
    crate::liouville::require_sink(l)?;
    if scheme.target != Target::Full {
        return Err(Error::config(
            "the susceptibility measure needs a scheme over the full generator (add the sink processes)",
        ));
    }
    for (m, &k) in l.trap_rates().iter().enumerate() {
        if k > 0.0 && rho0.population(m).abs() > 1e-12 {
            return Err(Error::precondition(format!(
                "initial state overlaps trap site {} (population {:.3e}); the susceptibility measure \
                 requires a trap-free initial state",
                m + 1,
                rho0.population(m)
            )));
        }
    }
    scheme.validate(l)?;
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(l));
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config("horizon must be positive and finite"));
    }
    let sparse: Vec<SparseMask> = scheme.masks.iter().map(|m| m.sparse(l)).collect();
    let (t_end, y, _) = run(l, &sparse, rho0, horizon, &[], &opts.ode, Some(opts.decay_tol.max(100.0 * opts.ode.abs_tol)), |_, _, _| {})?;
    let lay = Layout { n: l.n_sites(), d: l.dim(), k: sparse.len() };
    let remaining = horizon - t_end;
    let converged = t_end < horizon;
    let trapped = y[lay.trapped()].re;
    let recombined = y[lay.trapped() + 1].re;

    let mut contributions = Vec::with_capacity(sparse.len());
    for (k, mask) in scheme.masks.iter().enumerate() {
        let slope = y[lay.g(k)].re;
        let mut c = Contribution::new(mask, y[lay.e(k)].re + slope * remaining);
        c.slope = Some(slope);
        contributions.push(c);
    }
    let total: f64 = contributions.iter().map(|c| c.raw).sum();
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!(
            "state had not decayed by the horizon {horizon} ps; contributions are truncated there"
        ));
    }
    let max_slope = contributions.iter().filter_map(|c| c.slope).fold(0.0f64, |a, s| a.max(s.abs()));
    if max_slope * horizon > 1e-6 {
        warnings.push(format!(
            "individual contributions still grow linearly after t = {t_end:.3} ps (largest slope \
             {max_slope:.3e} per ps); raw values scale with the horizon while their sum does not"
        ));
    }
    let mut report = ContributionReport {
        measure: Measure::Susceptibility,
        eta: trapped,
        eta_bar: recombined,
        reference: 0.0,
        horizon: Some(horizon),
        rel_tol: Some(opts.ode.rel_tol),
        abs_tol: Some(opts.ode.abs_tol),
        contributions,
        pathways: None,
        diagnostics: Diagnostics {
            partition_defect: (total - trapped).abs(),
            converged: Some(converged),
            end_time: Some(t_end),
            residual_trace: Some((0..lay.n).map(|m| y[m + m * lay.n].re).sum()),
            warnings,
        },
        model_hash: l.model_hash().to_owned(),
    };
    report.normalize()?;
    report.pathways = PathwayMatrix::from_report(&report, l);
    Ok(report)
}
