use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{liouville_index, max_abs, CMat, C64};
use crate::liouville::{Liouvillian, Part};

/// Which part of the generator a mask draws its entries from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Selector {
    /// The whole part.
    Part(Part),
    /// Individual Liouville-space entries `(row, col)` of a part.
    Elements { part: Part, entries: Vec<(usize, usize)> },
    /// A part minus the listed entries.
    Remainder { part: Part, excluded: Vec<(usize, usize)> },
}

/// What a process represents, used to lay out pathway matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ProcessKind {
    Process,
    /// Population transfer `from → to` (zero-based sites).
    Jump { from: usize, to: usize },
    /// Population loss of a site into the rest of the relaxation dynamics.
    Damping { site: usize },
    /// Relaxation entries that are neither jumps nor damping.
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    pub name: String,
    pub kind: ProcessKind,
    pub selectors: Vec<Selector>,
}

/// What the masks of a scheme must add up to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// Everything but the sinks; used by the resolvent measure.
    NonSink,
    /// The complete generator; used by the susceptibility measure.
    Full,
}

impl Target {
    fn parts(self) -> &'static [Part] {
        match self {
            Target::NonSink => &Part::NON_SINK,
            Target::Full => &Part::ALL,
        }
    }
}

/// Coordinate-list form of a mask matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMask {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionScheme {
    pub masks: Vec<Mask>,
    pub target: Target,
}

impl Mask {
    pub fn process(name: &str, part: Part) -> Self {
        Mask { name: name.to_owned(), kind: ProcessKind::Process, selectors: vec![Selector::Part(part)] }
    }

    /// Materializes the mask as a Liouville-space matrix.
    pub fn matrix(&self, l: &Liouvillian) -> CMat {
        let d = l.dim();
        let mut out = CMat::zeros(d, d);
        for sel in &self.selectors {
            match sel {
                Selector::Part(p) => out += l.part(*p),
                Selector::Elements { part, entries } => {
                    let src = l.part(*part);
                    for &(r, c) in entries {
                        out[(r, c)] += src[(r, c)];
                    }
                }
                Selector::Remainder { part, excluded } => {
                    out += l.part(*part);
                    let src = l.part(*part);
                    for &(r, c) in excluded {
                        out[(r, c)] -= src[(r, c)];
                    }
                }
            }
        }
        out
    }

    /// Nonzero entries of [`Mask::matrix`], for cheap repeated application.
    pub fn sparse(&self, l: &Liouvillian) -> SparseMask {
        SparseMask::from_dense(&self.matrix(l))
    }
}

impl SparseMask {
    pub fn from_dense(m: &CMat) -> Self {
        let mut entries = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    entries.push((r, c, v));
                }
            }
        }
        SparseMask { dim: m.nrows(), entries }
    }

    /// `out += M x`.
    pub fn apply_add(&self, x: &[C64], out: &mut [C64]) {
        for &(r, c, v) in &self.entries {
            out[r] += v * x[c];
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

impl PartitionScheme {
    pub fn names(&self) -> Vec<&str> {
        self.masks.iter().map(|m| m.name.as_str()).collect()
    }

    /// Adds `trapping` and `recombination` processes so the scheme covers the
    /// full generator, as the susceptibility measure requires.
    pub fn with_sink_processes(mut self) -> Self {
        if self.target == Target::Full {
            return self;
        }
        self.masks.push(Mask::process("trapping", Part::Trap));
        self.masks.push(Mask::process("recombination", Part::Recomb));
        self.target = Target::Full;
        self
    }

    /// Checks that the masks are pairwise disjoint at the level of
    /// (part, entry) and that their sum equals the target to 1e-12.
    pub fn validate(&self, l: &Liouvillian) -> Result<()> {
        let d = l.dim();
        let mut used = vec![vec![0u8; d * d]; Part::ALL.len()];
        for mask in &self.masks {
            for sel in &mask.selectors {
                let (part, cells): (Part, Vec<usize>) = match sel {
                    Selector::Part(p) => (*p, (0..d * d).collect()),
                    Selector::Elements { part, entries } => {
                        (*part, entries.iter().map(|&(r, c)| r + c * d).collect())
                    }
                    Selector::Remainder { part, excluded } => {
                        let skip: std::collections::HashSet<usize> =
                            excluded.iter().map(|&(r, c)| r + c * d).collect();
                        (*part, (0..d * d).filter(|i| !skip.contains(i)).collect())
                    }
                };
                let slot = &mut used[Part::ALL.iter().position(|p| *p == part).unwrap()];
                for i in cells {
                    if i >= d * d {
                        return Err(Error::config(format!("mask '{}' selects an entry outside the generator", mask.name)));
                    }
                    slot[i] += 1;
                    if slot[i] > 1 {
                        return Err(Error::config(format!(
                            "mask '{}' overlaps another mask in the {} part at entry ({}, {})",
                            mask.name,
                            part.name(),
                            i % d,
                            i / d
                        )));
                    }
                }
            }
        }
        let sum = self.masks.iter().fold(CMat::zeros(d, d), |acc, m| acc + m.matrix(l));
        let target = l.sum_of(self.target.parts());
        let scale = max_abs(&target).max(1.0);
        let defect = max_abs(&(sum - target));
        if defect > 1e-12 * scale {
            return Err(Error::config(format!(
                "scheme is incomplete: masks differ from the {:?} target by {defect:.3e}",
                self.target
            )));
        }
        Ok(())
    }
}

/// Hamiltonian, Lamb shift, relaxation and dephasing; complete with respect
/// to the non-sink part of the generator.
pub fn default_scheme() -> PartitionScheme {
    PartitionScheme {
        masks: vec![
            Mask::process("hamiltonian", Part::Coherent),
            Mask::process("lamb", Part::Lamb),
            Mask::process("relaxation", Part::Relax),
            Mask::process("dephasing", Part::Dephase),
        ],
        target: Target::NonSink,
    }
}

/// Splits relaxation into site-to-site population jumps, diagonal population
/// damping, and a residual holding every coherence-coupled entry. The other
/// processes are kept whole, so the scheme stays complete with respect to the
/// non-sink generator.
///
/// Jump masks are named `jump:<from>-><to>` and damping masks `damping:<site>`
/// with one-based site labels.
pub fn pathway_scheme(n_sites: usize) -> PartitionScheme {
    let n = n_sites;
    let pop = |m: usize| liouville_index(m, m, n);
    let mut masks = vec![
        Mask::process("hamiltonian", Part::Coherent),
        Mask::process("lamb", Part::Lamb),
        Mask::process("dephasing", Part::Dephase),
    ];
    let mut population_entries = Vec::with_capacity(n * n);
    for to in 0..n {
        for from in 0..n {
            if to == from {
                continue;
            }
            let entry = (pop(to), pop(from));
            population_entries.push(entry);
            masks.push(Mask {
                name: format!("jump:{}->{}", from + 1, to + 1),
                kind: ProcessKind::Jump { from, to },
                selectors: vec![Selector::Elements { part: Part::Relax, entries: vec![entry] }],
            });
        }
    }
    for site in 0..n {
        let entry = (pop(site), pop(site));
        population_entries.push(entry);
        masks.push(Mask {
            name: format!("damping:{}", site + 1),
            kind: ProcessKind::Damping { site },
            selectors: vec![Selector::Elements { part: Part::Relax, entries: vec![entry] }],
        });
    }
    masks.push(Mask {
        name: "relaxation_residual".into(),
        kind: ProcessKind::Residual,
        selectors: vec![Selector::Remainder { part: Part::Relax, excluded: population_entries }],
    });
    PartitionScheme { masks, target: Target::NonSink }
}
