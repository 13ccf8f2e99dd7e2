#![allow(dead_code)]

pub mod props;

use std::f64::consts::PI;

use excitrans::linalg::{CMat, C64};
use excitrans::model::{correlation_matrix, InitialStateSpec, SystemModel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// ħ in cm⁻¹·ps and k_B in cm⁻¹/K, spelled out independently of the crate.
pub const HBAR: f64 = 1.0 / (2.0 * PI * 2.997_924_58e-2);
pub const KB: f64 = 0.695_034_800_486_127_4;

pub fn fmo() -> SystemModel {
    excitrans::model::parse_model(excitrans::model::BUNDLED_FMO).unwrap()
}

pub struct RandomModel {
    pub sinks: bool,
    pub max_er: f64,
    pub correlated: bool,
    pub min_gamma: f64,
}

impl Default for RandomModel {
    fn default() -> Self {
        RandomModel { sinks: true, max_er: 60.0, correlated: false, min_gamma: 0.001 }
    }
}

/// A random N-site network; with sinks, one random site traps and the
/// initial state is a mixture of the others.
pub fn random_model(seed: u64, n: usize, opts: &RandomModel) -> SystemModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let site_energies: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..400.0)).collect();
    let mut couplings = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random_range(-100.0..100.0);
            couplings[(i, j)] = v;
            couplings[(j, i)] = v;
        }
    }
    let positions: Vec<[f64; 3]> =
        (0..n).map(|_| [rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0)]).collect();
    let distances = DMatrix::from_fn(n, n, |i, j| {
        (0..3).map(|k| (positions[i][k] - positions[j][k]).powi(2)).sum::<f64>().sqrt()
    });
    let trap = rng.random_range(0..n);
    let mut trap_rates = vec![0.0; n];
    let (recombination_rate, initial_state) = if opts.sinks {
        trap_rates[trap] = rng.random_range(0.2..2.0);
        (rng.random_range(opts.min_gamma..0.05), InitialStateSpec::MixtureExcluding(vec![trap]))
    } else {
        (0.0, InitialStateSpec::Site(trap))
    };
    SystemModel {
        site_energies,
        couplings,
        distances: Some(distances),
        trap_rates,
        recombination_rate,
        temperature: rng.random_range(0.0..350.0),
        reorganization_energy: rng.random_range(0.0..opts.max_er),
        cutoff: rng.random_range(50.0..250.0),
        correlation_radius: if opts.correlated { rng.random_range(1.0..30.0) } else { 0.0 },
        disorder_fwhm: vec![0.0; n],
        initial_state,
    }
}

/// A random density matrix (trace one, positive).
pub fn random_density(seed: u64, n: usize) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    rho / tr
}

pub fn random_hermitian(seed: u64, n: usize) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

pub fn vec_of(m: &CMat) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &nalgebra::DVector<C64>, n: usize) -> CMat {
    CMat::from_column_slice(n, n, v.as_slice())
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn rate(omega: f64, model: &SystemModel) -> f64 {
    // signed ω in rad/ps; positive means downhill
    let wc = model.cutoff / HBAR;
    let strength = model.reorganization_energy / model.cutoff;
    let j = |w: f64| strength * w * (-w / wc).exp();
    let kt = KB * model.temperature;
    let n = |w: f64| if kt == 0.0 { 0.0 } else { 1.0 / ((HBAR * w / kt).exp() - 1.0) };
    if omega > 0.0 {
        2.0 * PI * j(omega) * (1.0 + n(omega))
    } else {
        2.0 * PI * j(-omega) * n(-omega)
    }
}

/// The right-hand side of the master equation evaluated directly on a
/// density matrix, for a spectrum without repeated gaps. `c[(m, M)]` is the
/// amplitude of site m in exciton M and `energies` the exciton energies.
pub fn direct_rhs(model: &SystemModel, c: &CMat, energies: &[f64], rho: &CMat) -> CMat {
    let n = model.site_energies.len();
    let i = C64::new(0.0, 1.0);
    let h = CMat::from_fn(n, n, |a, b| {
        if a == b {
            C64::new(model.site_energies[a], 0.0)
        } else {
            C64::new(model.couplings[(a, b)], 0.0)
        }
    });
    let corr = correlation_matrix(model).unwrap();
    let cmn = |a: usize, b: usize| corr.get(a, b);
    let ket = |big: usize| c.column(big).into_owned();
    let proj = |to: usize, from: usize| ket(to) * ket(from).adjoint();
    let w = |m: usize, big: usize| c[(m, big)].norm_sqr();

    let mut h_ls = CMat::zeros(n, n);
    for big in 0..n {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += cmn(a, b) * w(a, big) * w(b, big);
            }
        }
        h_ls += proj(big, big) * C64::new(model.reorganization_energy * s, 0.0);
    }
    let comm = |x: &CMat| x * rho - rho * x;
    let anti = |x: &CMat| x * rho + rho * x;
    let mut out = comm(&(h + h_ls)) * (-(i / C64::new(HBAR, 0.0)));

    if model.reorganization_energy > 0.0 {
        // relaxation: one operator per ordered exciton pair
        for to in 0..n {
            for from in 0..n {
                if to == from {
                    continue;
                }
                let omega = (energies[from] - energies[to]) / HBAR;
                let g = rate(omega, model);
                for m in 0..n {
                    for k in 0..n {
                        let cc = cmn(m, k);
                        if cc == 0.0 {
                            continue;
                        }
                        let am = proj(to, from) * (c[(m, to)].conj() * c[(m, from)]);
                        let ak = proj(to, from) * (c[(k, to)].conj() * c[(k, from)]);
                        let akd = ak.adjoint();
                        out += (&am * rho * &akd - (&akd * &am * rho + rho * &akd * &am) * C64::new(0.5, 0.0))
                            * C64::new(g * cc, 0.0);
                    }
                }
            }
        }
        // dephasing
        let g_phi = 2.0 * PI * (model.reorganization_energy / model.cutoff) * (KB * model.temperature / HBAR);
        for m in 0..n {
            for k in 0..n {
                let cc = cmn(m, k);
                if cc == 0.0 || g_phi == 0.0 {
                    continue;
                }
                let a = |s: usize| (0..n).fold(CMat::zeros(n, n), |acc, big| acc + proj(big, big) * C64::new(w(s, big), 0.0));
                let am = a(m);
                let ak = a(k);
                out += (&am * rho * &ak - (&ak * &am * rho + rho * &ak * &am) * C64::new(0.5, 0.0))
                    * C64::new(g_phi * cc, 0.0);
            }
        }
    }
    let sink = CMat::from_fn(n, n, |a, b| {
        if a == b {
            C64::new(model.trap_rates[a] + model.recombination_rate, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    out - anti(&sink)
}
