use std::io::Write;

use serde::Serialize;

use super::ode::{integrate, OdeOptions, OdeStats};
use super::{require_sink, DensityMatrix, Liouvillian};
use crate::error::{Error, Result};
use crate::linalg::{unvectorize, vectorize, CVec, C64};

/// Trace residual below which a trajectory counts as fully decayed for
/// [`transfer_time`].
const TRANSFER_TIME_RESIDUAL: f64 = 1e-3;

/// Sampled solution of the master equation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// ps, ascending.
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// `(2/ħ) Tr{H_trap ρ(t)}`, ps⁻¹.
    pub p_trap: Vec<f64>,
    /// `(2/ħ) Tr{H_recomb ρ(t)}`, ps⁻¹.
    pub p_recomb: Vec<f64>,
    /// `∫₀ᵗ p_trap`.
    pub trapped: Vec<f64>,
    /// `∫₀ᵗ p_recomb`.
    pub recombined: Vec<f64>,
    /// `∫₀ᵗ t' p_trap(t') dt'`, used for the mean trapping time.
    pub trap_moment: Vec<f64>,
    pub model_hash: String,
    pub stats: OdeStats,
}

impl Trajectory {
    /// Builds a trajectory from sampled states; cumulative integrals use the
    /// trapezoidal rule on the given grid.
    pub fn from_samples(l: &Liouvillian, times: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        if times.len() != states.len() || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config("trajectory samples must be ascending and match the states"));
        }
        let p_trap: Vec<f64> = states.iter().map(|s| l.trapping_density(s.matrix())).collect();
        let p_recomb: Vec<f64> = states.iter().map(|s| l.recombination_density(s.matrix())).collect();
        let moment: Vec<f64> = times.iter().zip(&p_trap).map(|(t, p)| t * p).collect();
        Ok(Trajectory {
            trapped: cumulative_trapezoid(&times, &p_trap),
            recombined: cumulative_trapezoid(&times, &p_recomb),
            trap_moment: cumulative_trapezoid(&times, &moment),
            times,
            states,
            p_trap,
            p_recomb,
            model_hash: l.model_hash().to_owned(),
            stats: OdeStats::default(),
        })
    }

    pub fn traces(&self) -> Vec<f64> {
        self.states.iter().map(DensityMatrix::trace).collect()
    }

    /// Writes the trajectory as CSV: a `# model_hash` line, then columns
    /// `t, trace, p_trap, p_recomb, rho_mm...` and optionally `|rho_mn|` for
    /// `m < n`. Site labels are one-based.
    pub fn write_csv<W: Write>(&self, mut out: W, coherences: bool) -> std::io::Result<()> {
        let n = self.states.first().map(DensityMatrix::dim).unwrap_or(0);
        writeln!(out, "# model_hash: {}", self.model_hash)?;
        let mut header = vec!["t".to_string(), "trace".into(), "p_trap".into(), "p_recomb".into()];
        header.extend((1..=n).map(|m| format!("rho_{m}{m}")));
        if coherences {
            for m in 0..n {
                for k in (m + 1)..n {
                    header.push(format!("abs_rho_{}_{}", m + 1, k + 1));
                }
            }
        }
        writeln!(out, "{}", header.join(","))?;
        for (i, state) in self.states.iter().enumerate() {
            let mut row = vec![self.times[i], state.trace(), self.p_trap[i], self.p_recomb[i]];
            row.extend(state.populations());
            if coherences {
                for m in 0..n {
                    for k in (m + 1)..n {
                        row.push(state.matrix()[(m, k)].norm());
                    }
                }
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn cumulative_trapezoid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for i in 0..t.len() {
        if i > 0 {
            acc += 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Default integration horizon: five exciton lifetimes `5/Γ`, or 10 ns when
/// there is no recombination.
pub fn default_horizon(l: &Liouvillian) -> f64 {
    if l.recombination_rate() > 0.0 {
        5.0 / l.recombination_rate()
    } else {
        1e4
    }
}

fn check_state(l: &Liouvillian, rho0: &DensityMatrix) -> Result<()> {
    if rho0.dim() != l.n_sites() {
        return Err(Error::config(format!(
            "initial state is {}x{} but the model has {} sites",
            rho0.dim(),
            rho0.dim(),
            l.n_sites()
        )));
    }
    Ok(())
}

/// Augmented right-hand side: ρ followed by ∫p_trap, ∫p_recomb, ∫t·p_trap.
fn augmented_rhs(l: &Liouvillian) -> impl FnMut(f64, &CVec, &mut CVec) + '_ {
    let n = l.n_sites();
    let d = n * n;
    let full = l.full();
    move |t, y, dy| {
        let rho = y.rows(0, d);
        dy.rows_mut(0, d).gemv(C64::new(1.0, 0.0), full, &rho, C64::new(0.0, 0.0));
        let mut trap = 0.0;
        let mut pop = 0.0;
        for m in 0..n {
            let p = y[m + m * n].re;
            trap += l.trap_rates()[m] * p;
            pop += p;
        }
        let p_trap = 2.0 * trap;
        dy[d] = C64::new(p_trap, 0.0);
        dy[d + 1] = C64::new(2.0 * l.recombination_rate() * pop, 0.0);
        dy[d + 2] = C64::new(t * p_trap, 0.0);
    }
}

fn augmented_start(rho0: &DensityMatrix) -> CVec {
    let v = vectorize(rho0.matrix());
    let d = v.len();
    let mut y = CVec::zeros(d + 3);
    y.rows_mut(0, d).copy_from(&v);
    y
}

/// Propagates `ρ(t) = e^{Lt} ρ0` and samples it on `grid`.
pub fn propagate(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    horizon: f64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    check_state(l, rho0)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config("horizon must be positive and finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|&t| t < 0.0 || t > horizon) {
        return Err(Error::config("output grid must be strictly ascending within [0, horizon]"));
    }
    let n = l.n_sites();
    let d = n * n;
    let mut traj = Trajectory {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        p_trap: Vec::with_capacity(grid.len()),
        p_recomb: Vec::with_capacity(grid.len()),
        trapped: Vec::with_capacity(grid.len()),
        recombined: Vec::with_capacity(grid.len()),
        trap_moment: Vec::with_capacity(grid.len()),
        model_hash: l.model_hash().to_owned(),
        stats: OdeStats::default(),
    };
    let end = integrate(
        augmented_rhs(l),
        augmented_start(rho0),
        horizon,
        grid,
        opts,
        |t, y| {
            let rho = unvectorize(&y.rows(0, d).into_owned(), n);
            traj.times.push(t);
            traj.p_trap.push(l.trapping_density(&rho));
            traj.p_recomb.push(l.recombination_density(&rho));
            traj.trapped.push(y[d].re);
            traj.recombined.push(y[d + 1].re);
            traj.trap_moment.push(y[d + 2].re);
            traj.states.push(DensityMatrix::from_raw(rho));
        },
        |_, _| false,
    )?;
    traj.stats = end.stats;
    Ok(traj)
}

/// Efficiency from time integration of the trapping and recombination
/// densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EteTimeDomain {
    /// `(2/ħ) ∫ Tr{H_trap ρ}` up to `end_time`.
    pub eta: f64,
    /// `(2/ħ) ∫ Tr{H_recomb ρ}` up to `end_time`.
    pub eta_bar: f64,
    /// `tr ρ(end_time) = 1 - η - η̄` up to integration error.
    pub residual: f64,
    /// The time integration actually stopped at (≤ horizon).
    pub end_time: f64,
    pub horizon: f64,
    pub converged: bool,
    /// η with the residual split between the sinks in proportion to their
    /// densities at `end_time`.
    pub eta_tail_corrected: f64,
}

/// Integrates until the horizon or until the remaining trace drops below
/// `tol / 100`. Convergence is `residual < tol`.
pub fn ete_time_domain(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    horizon: Option<f64>,
    tol: f64,
    opts: &OdeOptions,
) -> Result<EteTimeDomain> {
    check_state(l, rho0)?;
    require_sink(l)?;
    let horizon = horizon.unwrap_or_else(|| default_horizon(l));
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config("horizon must be positive and finite"));
    }
    let n = l.n_sites();
    let d = n * n;
    let trace = |y: &CVec| (0..n).map(|m| y[m + m * n].re).sum::<f64>();
    let end = integrate(augmented_rhs(l), augmented_start(rho0), horizon, &[], opts, |_, _| {}, |_, y| {
        trace(y) < 1e-2 * tol
    })?;
    let residual = trace(&end.y);
    let rho = unvectorize(&end.y.rows(0, d).into_owned(), n);
    let (pt, pr) = (l.trapping_density(&rho), l.recombination_density(&rho));
    let eta = end.y[d].re;
    let split = if pt + pr > 0.0 { pt / (pt + pr) } else { 0.0 };
    Ok(EteTimeDomain {
        eta,
        eta_bar: end.y[d + 1].re,
        residual,
        end_time: end.t,
        horizon,
        converged: residual.abs() < tol,
        eta_tail_corrected: eta + residual.max(0.0) * split,
    })
}

/// Mean trapping time conditioned on trapping,
/// `∫ t p_trap dt / ∫ p_trap dt`, in ps. `None` when nothing is trapped.
pub fn transfer_time(trajectory: &Trajectory) -> Result<Option<f64>> {
    let last = trajectory
        .states
        .last()
        .ok_or_else(|| Error::precondition("empty trajectory"))?;
    let residual = last.trace();
    if residual >= TRANSFER_TIME_RESIDUAL {
        return Err(Error::precondition(format!(
            "trajectory has not decayed (remaining trace {residual:.3e} >= {TRANSFER_TIME_RESIDUAL:e}); extend the horizon"
        )));
    }
    let trapped = *trajectory.trapped.last().unwrap();
    if trapped <= 0.0 {
        return Ok(None);
    }
    Ok(Some(trajectory.trap_moment.last().unwrap() / trapped))
}
