//! Parameter sweeps and static-disorder ensembles.
//!
//! A sweep overrides one model parameter at each grid value and evaluates the
//! requested measures. With disorder enabled every grid point is additionally
//! evaluated on `samples` disordered copies of the model. Sample `i` uses the
//! seed [`sample_seed`]`(seed, i)` at every grid point, so the same disorder
//! realizations are compared across the grid.
//!
//! All (grid point × sample) units run in parallel on the current rayon pool
//! and are gathered in a fixed order, so results do not depend on the number
//! of threads.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contributions::{
    default_scheme, greens_contributions, pathway_scheme, susceptibility_contributions, SusceptibilityOptions,
};
use crate::error::{Error, Result};
use crate::liouville::{
    assemble, default_horizon, ete_greens, propagate, transfer_time, OdeOptions,
};
use crate::model::{initial_state, sample_disorder, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SweepParameter {
    ReorganizationEnergy,
    /// Trapping rate of one site; `site` is a one-based label.
    TrapRate { site: usize },
    Temperature,
    CorrelationRadius,
}

impl SweepParameter {
    pub fn label(&self) -> String {
        match self {
            SweepParameter::ReorganizationEnergy => "reorganization_energy".into(),
            SweepParameter::TrapRate { site } => format!("trap_rate_{site}"),
            SweepParameter::Temperature => "temperature".into(),
            SweepParameter::CorrelationRadius => "correlation_radius".into(),
        }
    }

    /// Returns a copy of `model` with the parameter set to `value`.
    pub fn apply(&self, model: &SystemModel, value: f64) -> Result<SystemModel> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::config(format!("{} must be non-negative, got {value}", self.label())));
        }
        let mut m = model.clone();
        match *self {
            SweepParameter::ReorganizationEnergy => m.reorganization_energy = value,
            SweepParameter::TrapRate { site } => {
                if site == 0 || site > m.n_sites() {
                    return Err(Error::config(format!(
                        "trap_rate site {site} is outside 1..={}",
                        m.n_sites()
                    )));
                }
                m.trap_rates[site - 1] = value;
            }
            SweepParameter::Temperature => m.temperature = value,
            SweepParameter::CorrelationRadius => m.correlation_radius = value,
        }
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    /// `eta` and `eta_bar` from the resolvent.
    Ete,
    /// `greens:<process>` raw contributions of the default scheme.
    GreensContributions,
    /// `susceptibility:<process>` normalized contributions of the default
    /// scheme with sink processes.
    SusceptibilityContributions,
    /// `transfer_time` in ps.
    TransferTime,
    /// `pathway:<from>-><to>` normalized net transfers of the susceptibility
    /// pathway scheme.
    Pathways,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSpec {
    #[serde(default)]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub measures: Vec<MeasureKind>,
    #[serde(default)]
    pub disorder: DisorderSpec,
    /// Integration horizon in ps for time-domain measures; `5/Γ` if absent.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub abs_tol: Option<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::config("sweep grid is empty"));
        }
        if let Some(v) = self.grid.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::config(format!("{} grid value {v} is negative", self.parameter.label())));
        }
        if self.measures.is_empty() {
            return Err(Error::config("sweep requests no measures"));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::config("horizon must be positive and finite"));
            }
        }
        Ok(())
    }

    fn ode(&self) -> OdeOptions {
        let mut o = OdeOptions::default();
        if let Some(r) = self.rel_tol {
            o.rel_tol = r;
        }
        if let Some(a) = self.abs_tol {
            o.abs_tol = a;
        }
        o
    }
}

/// Named scalar results of one evaluation, in a fixed order.
pub type Quantities = Vec<(String, f64)>;

/// Evaluates `measures` on one model.
pub fn evaluate(
    model: &SystemModel,
    measures: &[MeasureKind],
    horizon: Option<f64>,
    ode: &OdeOptions,
) -> Result<Quantities> {
    let l = assemble(model)?;
    let rho0 = initial_state(model, &model.initial_state)?;
    let mut out = Vec::new();
    for m in measures {
        match m {
            MeasureKind::Ete => {
                let g = ete_greens(&l, &rho0)?;
                out.push(("eta".into(), g.eta));
                out.push(("eta_bar".into(), g.eta_bar));
            }
            MeasureKind::GreensContributions => {
                let r = greens_contributions(&l, &rho0, &default_scheme())?;
                out.extend(r.contributions.iter().map(|c| (format!("greens:{}", c.name), c.raw)));
            }
            MeasureKind::SusceptibilityContributions => {
                let opts = SusceptibilityOptions { horizon, ode: *ode, ..Default::default() };
                let r = susceptibility_contributions(&l, &rho0, &default_scheme().with_sink_processes(), &opts)?;
                out.extend(
                    r.contributions
                        .iter()
                        .map(|c| (format!("susceptibility:{}", c.name), c.normalized.unwrap_or(f64::NAN))),
                );
            }
            MeasureKind::TransferTime => {
                let h = horizon.unwrap_or_else(|| default_horizon(&l));
                let traj = propagate(&l, &rho0, h, &[0.0, h], ode)?;
                out.push(("transfer_time".into(), transfer_time(&traj)?.unwrap_or(f64::NAN)));
            }
            MeasureKind::Pathways => {
                let opts = SusceptibilityOptions { horizon, ode: *ode, ..Default::default() };
                let scheme = pathway_scheme(model.n_sites()).with_sink_processes();
                let r = susceptibility_contributions(&l, &rho0, &scheme, &opts)?;
                let pm = r
                    .pathways
                    .ok_or_else(|| Error::numerical("pathway report has no pathway matrix"))?;
                for from in 0..pm.n_sites {
                    for to in 0..pm.n_sites {
                        if from != to {
                            out.push((format!("pathway:{}->{}", from + 1, to + 1), pm.transfer(from, to)));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Seed of disorder sample `index`: the splitmix64 output for the counter
/// `master + (index + 1) · 0x9E3779B97F4A7C15`.
pub fn sample_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample standard deviation; zero for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn disorder_statistics(values: &[f64]) -> Result<Statistics> {
    if values.is_empty() {
        return Err(Error::precondition("statistics of an empty sample"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Statistics { count: n, mean, std, min, max })
}

/// Pearson correlation coefficient of two equally long samples.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::precondition("correlation needs two samples of equal length ≥ 2"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::numerical("correlation of a constant sample"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityResult {
    pub name: String,
    /// Value on the model without disorder; `None` if that run failed.
    pub central: Option<f64>,
    /// Ensemble statistics over the successful samples.
    pub ensemble: Option<Statistics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub quantities: Vec<QuantityResult>,
    /// Error of the undisordered run, if it failed.
    pub error: Option<String>,
    /// `samples[i][q]` is quantity `q` of the i-th successful sample.
    pub samples: Vec<Vec<f64>>,
    pub sample_indices: Vec<usize>,
    pub sample_failures: Vec<(usize, String)>,
}

impl SweepPoint {
    /// Values of one quantity over the successful disorder samples.
    pub fn sample_values(&self, name: &str) -> Option<Vec<f64>> {
        let q = self.quantities.iter().position(|q| q.name == name)?;
        Some(self.samples.iter().map(|s| s[q]).collect())
    }

    pub fn quantity(&self, name: &str) -> Option<&QuantityResult> {
        self.quantities.iter().find(|q| q.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub model_hash: String,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

pub fn run_sweep(model: &SystemModel, spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    model.validate()?;
    let ode = spec.ode();
    let samples = spec.disorder.samples;
    let units: Vec<(usize, Option<usize>)> = (0..spec.grid.len())
        .flat_map(|p| std::iter::once((p, None)).chain((0..samples).map(move |s| (p, Some(s)))))
        .collect();
    let results: Vec<Result<Quantities>> = units
        .par_iter()
        .map(|&(p, s)| {
            let base = spec.parameter.apply(model, spec.grid[p])?;
            let m = match s {
                Some(i) => sample_disorder(&base, sample_seed(spec.disorder.seed, i)),
                None => base,
            };
            evaluate(&m, &spec.measures, spec.horizon, &ode)
        })
        .collect();

    let mut points = Vec::with_capacity(spec.grid.len());
    let mut it = results.into_iter();
    for &value in &spec.grid {
        let central = it.next().expect("one central unit per grid point");
        let mut point = SweepPoint {
            value,
            quantities: Vec::new(),
            error: None,
            samples: Vec::new(),
            sample_indices: Vec::new(),
            sample_failures: Vec::new(),
        };
        let mut names: Option<Vec<String>> = None;
        let central_values = match central {
            Ok(q) => {
                names = Some(q.iter().map(|(n, _)| n.clone()).collect());
                Some(q.into_iter().map(|(_, v)| v).collect::<Vec<_>>())
            }
            Err(e) => {
                point.error = Some(e.to_string());
                None
            }
        };
        for i in 0..samples {
            match it.next().expect("one unit per sample") {
                Ok(q) => {
                    if names.is_none() {
                        names = Some(q.iter().map(|(n, _)| n.clone()).collect());
                    }
                    point.sample_indices.push(i);
                    point.samples.push(q.into_iter().map(|(_, v)| v).collect());
                }
                Err(e) => point.sample_failures.push((i, e.to_string())),
            }
        }
        for (k, name) in names.unwrap_or_default().into_iter().enumerate() {
            let vals: Vec<f64> = point.samples.iter().map(|s| s[k]).collect();
            point.quantities.push(QuantityResult {
                name,
                central: central_values.as_ref().map(|c| c[k]),
                ensemble: if vals.is_empty() { None } else { Some(disorder_statistics(&vals)?) },
            });
        }
        points.push(point);
    }
    Ok(SweepResult { spec: spec.clone(), model_hash: model.hash(), seed: spec.disorder.seed, points })
}

impl SweepResult {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::numerical(e.to_string()))
    }

    /// Long form: one row per grid point, quantity and statistic. A failed
    /// central run or sample is reported as a row with quantity `error`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# model_hash: {}", self.model_hash)?;
        writeln!(out, "# seed: {}", self.seed)?;
        writeln!(out, "# disorder_samples: {}", self.spec.disorder.samples)?;
        let param = self.spec.parameter.label();
        writeln!(out, "parameter,value,quantity,statistic,result,note")?;
        for p in &self.points {
            if let Some(e) = &p.error {
                writeln!(out, "{param},{},error,central,,{}", p.value, csv_quote(e))?;
            }
            for (i, e) in &p.sample_failures {
                writeln!(out, "{param},{},error,sample_{i},,{}", p.value, csv_quote(e))?;
            }
            for q in &p.quantities {
                if let Some(c) = q.central {
                    writeln!(out, "{param},{},{},central,{c:.12e},", p.value, q.name)?;
                }
                if let Some(s) = &q.ensemble {
                    for (stat, v) in [
                        ("count", s.count as f64),
                        ("mean", s.mean),
                        ("std", s.std),
                        ("min", s.min),
                        ("max", s.max),
                    ] {
                        writeln!(out, "{param},{},{},{stat},{v:.12e},", p.value, q.name)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}
