//! Property checks shared by the property suite and the acceptance gate.
//! Each returns the measured defect or a description of the violation.

use std::f64::consts::PI;

use excitrans::contributions::{
    default_scheme, greens_contributions, pathway_scheme, sensitivity_trajectory, susceptibility_contributions,
    ProcessKind, SusceptibilityOptions,
};
use excitrans::linalg::{CMat, C64};
use excitrans::liouville::{assemble, propagate, DensityMatrix, OdeOptions, Part};
use excitrans::model::initial_state;

use super::{direct_rhs, max_abs, random_density, random_hermitian, random_model, unvec, vec_of, RandomModel, HBAR, KB};

pub type Check = Result<f64, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Vectorized generator against the master equation evaluated directly.
pub fn generator_matches_direct(seed: u64) -> Check {
    let n = 2 + (seed % 4) as usize;
    let opts = RandomModel { correlated: seed % 2 == 1, ..Default::default() };
    let model = random_model(seed, n, &opts);
    let l = assemble(&model).map_err(|e| e.to_string())?;
    let energies: Vec<f64> = l.basis().energies.iter().copied().collect();
    let c = l.basis().coefficients.clone();
    let rho = random_hermitian(seed ^ 0xABCD, n);
    let via_l = unvec(&(l.full() * vec_of(&rho)), n);
    let direct = direct_rhs(&model, &c, &energies, &rho);
    let scale = max_abs(&direct).max(1.0);
    let err = max_abs(&(via_l - direct)) / scale;
    ensure(err < 1e-10, || format!("seed {seed}: relative defect {err:.3e}"))?;
    Ok(err)
}

/// Without sinks the dynamics keeps ρ a unit-trace positive Hermitian matrix.
pub fn trace_hermiticity_positivity(seed: u64) -> Check {
    let n = 2 + (seed % 4) as usize;
    let opts = RandomModel { sinks: false, correlated: seed % 3 == 0, ..Default::default() };
    let model = random_model(seed, n, &opts);
    let l = assemble(&model).map_err(|e| e.to_string())?;
    let rho0 = DensityMatrix::normalized(random_density(seed ^ 0x77, n)).map_err(|e| e.to_string())?;
    let grid = [0.0, 0.1, 0.5, 2.0, 10.0, 40.0];
    // Tight tolerances so the bounds probe the generator, not the integrator.
    let ode = OdeOptions { rel_tol: 1e-10, abs_tol: 1e-12, ..Default::default() };
    let traj = propagate(&l, &rho0, 40.0, &grid, &ode).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let m = s.matrix();
        let tr = (m.trace().re - 1.0).abs();
        let herm = max_abs(&(m - m.adjoint()));
        let lowest = m.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        ensure(tr < 1e-7, || format!("seed {seed}: trace off by {tr:.3e} at t = {t}"))?;
        ensure(herm < 1e-8, || format!("seed {seed}: hermiticity defect {herm:.3e} at t = {t}"))?;
        ensure(lowest > -1e-8, || format!("seed {seed}: eigenvalue {lowest:.3e} at t = {t}"))?;
        worst = worst.max(tr).max(herm).max((-lowest).max(0.0));
    }
    Ok(worst)
}

/// γ(-ω) / γ(ω) = exp(-ħω / kT) for the assembled downhill/uphill pair rates.
pub fn detailed_balance(seed: u64) -> Check {
    let model = random_model(seed, 2, &RandomModel { sinks: false, max_er: 60.0, ..Default::default() });
    if model.temperature < 1.0 || model.reorganization_energy == 0.0 {
        return Ok(0.0);
    }
    let l = assemble(&model).map_err(|e| e.to_string())?;
    let relax = l.part(Part::Relax);
    let b = l.basis();
    // rate of |N⟩⟨N| → |M⟩⟨M| is ⟨M|D(|N⟩⟨N|)|M⟩
    let rate = |to: usize, from: usize| {
        let pn = b.transition_operator(from, from);
        let out = unvec(&(relax * vec_of(&pn)), 2);
        (b.coefficients.column(to).adjoint() * out * b.coefficients.column(to))[(0, 0)].re
    };
    let down = rate(0, 1);
    let up = rate(1, 0);
    let gap = b.energies[1] - b.energies[0];
    let expected = (-gap / (KB * model.temperature)).exp();
    // relative to the downhill rate, so tiny uphill rates are not compared
    // below rounding
    let err = (up - expected * down).abs() / down;
    ensure(err < 1e-10 && (expected < 1e-6 || (up / down / expected - 1.0).abs() < 1e-8), || format!("seed {seed}: up/down = {:.6e}, expected {expected:.6e}", up / down))?;
    Ok(err)
}

/// Forward sensitivities against central differences of the exact
/// propagator.
pub fn sensitivity_vs_finite_difference(seed: u64) -> Check {
    let n = 2 + (seed % 2) as usize;
    let model = random_model(seed, n, &RandomModel::default());
    let l = assemble(&model).map_err(|e| e.to_string())?;
    let rho0 = initial_state(&model, &model.initial_state).map_err(|e| e.to_string())?;
    let scheme = default_scheme().with_sink_processes();
    let masks: Vec<CMat> = scheme.masks.iter().map(|m| m.matrix(&l)).collect();
    let times = [0.3, 1.0, 3.0];
    let opts = OdeOptions { rel_tol: 1e-11, abs_tol: 1e-13, ..Default::default() };
    let traj = sensitivity_trajectory(&l, &masks, &rho0, 3.0, &times, &opts).map_err(|e| e.to_string())?;
    let delta = 1e-6;
    let v0 = vec_of(rho0.matrix());
    let mut worst: f64 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        for (k, mk) in masks.iter().enumerate() {
            let plus = ((l.full() + mk * C64::new(delta, 0.0)) * C64::new(t, 0.0)).exp() * &v0;
            let minus = ((l.full() - mk * C64::new(delta, 0.0)) * C64::new(t, 0.0)).exp() * &v0;
            let fd = unvec(&((plus - minus) / C64::new(2.0 * delta, 0.0)), n);
            let err = max_abs(&(&traj.sensitivities[i][k] - fd));
            ensure(err < 1e-5, || format!("seed {seed}: mask {} at t = {t}: {err:.3e}", scheme.masks[k].name))?;
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

/// With the whole generator as the mask, σ(t) = t L e^{Lt} ρ0.
pub fn sensitivity_full_mask(seed: u64) -> Check {
    let model = random_model(seed, 2, &RandomModel::default());
    let l = assemble(&model).map_err(|e| e.to_string())?;
    let rho0 = DensityMatrix::normalized(random_density(seed, 2)).map_err(|e| e.to_string())?;
    let times = [0.5, 2.0];
    let opts = OdeOptions { rel_tol: 1e-11, abs_tol: 1e-13, ..Default::default() };
    let traj = sensitivity_trajectory(&l, &[l.full().clone()], &rho0, 2.0, &times, &opts).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let exact = l.full() * (l.full() * C64::new(t, 0.0)).exp() * vec_of(rho0.matrix()) * C64::new(t, 0.0);
        let err = max_abs(&(&traj.sensitivities[i][0] - unvec(&exact, 2)));
        ensure(err < 1e-7, || format!("seed {seed}: full-mask sensitivity off by {err:.3e} at t = {t}"))?;
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Coherent evolution plus dephasing drives |1⟩⟨1| to Σ_M |c_1(M)|² |M⟩⟨M|.
pub fn dephasing_fixed_point(seed: u64) -> Check {
    let n = 2 + (seed % 4) as usize;
    let mut model = random_model(seed, n, &RandomModel { sinks: false, ..Default::default() });
    model.reorganization_energy = 35.0;
    model.temperature = 295.0;
    let l = assemble(&model).map_err(|e| e.to_string())?.restricted(&[Part::Coherent, Part::Dephase]);
    let b = l.basis();
    let target = (0..n).fold(CMat::zeros(n, n), |acc, big| {
        acc + b.transition_operator(big, big) * C64::new(b.weight(0, big), 0.0)
    });
    let stationary = max_abs(&unvec(&(l.full() * vec_of(&target)), n));
    ensure(stationary < 1e-10, || format!("seed {seed}: target not stationary ({stationary:.3e})"))?;
    let mut rho0 = CMat::zeros(n, n);
    rho0[(0, 0)] = C64::new(1.0, 0.0);
    // slowest coherence decay sets how long to wait
    let slowest = (0..n)
        .flat_map(|a| (a + 1..n).map(move |c| (a, c)))
        .map(|(a, c)| {
            let g_phi = 2.0 * PI * (35.0 / model.cutoff) * (KB * 295.0 / HBAR);
            0.5 * g_phi * (0..n).map(|m| (b.weight(m, a) - b.weight(m, c)).powi(2)).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    if slowest < 1e-2 {
        return Ok(0.0);
    }
    let t = 30.0 / slowest;
    let end = unvec(&((l.full() * C64::new(t, 0.0)).exp() * vec_of(&rho0)), n);
    let err = max_abs(&(end - target));
    ensure(err < 1e-6, || format!("seed {seed}: long-time state differs by {err:.3e}"))?;
    Ok(err)
}

/// Splitting relaxation into pathway masks leaves its total unchanged under
/// both measures.
pub fn scheme_refinement(seed: u64) -> Check {
    let n = 3 + (seed % 2) as usize;
    let model = random_model(seed, n, &RandomModel { min_gamma: 0.01, ..Default::default() });
    let l = assemble(&model).map_err(|e| e.to_string())?;
    let rho0 = initial_state(&model, &model.initial_state).map_err(|e| e.to_string())?;
    let relax_of = |r: &excitrans::contributions::ContributionReport| -> (f64, f64) {
        let coarse = r.raw("relaxation");
        let fine: f64 = r.contributions.iter().filter(|c| c.kind != ProcessKind::Process).map(|c| c.raw).sum();
        (coarse.unwrap_or(fine), fine)
    };
    let g_coarse = greens_contributions(&l, &rho0, &default_scheme()).map_err(|e| e.to_string())?;
    let g_fine = greens_contributions(&l, &rho0, &pathway_scheme(n)).map_err(|e| e.to_string())?;
    let g_err = (relax_of(&g_coarse).0 - relax_of(&g_fine).1).abs();
    ensure(g_err < 1e-10, || format!("seed {seed}: resolvent refinement defect {g_err:.3e}"))?;
    let opts = SusceptibilityOptions {
        horizon: Some(200.0),
        ode: OdeOptions { rel_tol: 1e-10, abs_tol: 1e-12, ..Default::default() },
        ..Default::default()
    };
    let s_coarse = susceptibility_contributions(&l, &rho0, &default_scheme().with_sink_processes(), &opts)
        .map_err(|e| e.to_string())?;
    let s_fine = susceptibility_contributions(&l, &rho0, &pathway_scheme(n).with_sink_processes(), &opts)
        .map_err(|e| e.to_string())?;
    let (a, b) = (relax_of(&s_coarse).0, relax_of(&s_fine).1);
    let s_err = (a - b).abs() / a.abs().max(1.0);
    ensure(s_err < 1e-5, || format!("seed {seed}: susceptibility refinement {a} vs {b}"))?;
    Ok(g_err.max(s_err))
}
