//! Exact partition of the transfer efficiency into process contributions.
//!
//! A [`PartitionScheme`] splits the generator into disjoint masks. The
//! resolvent measure ([`greens_contributions`]) distributes η over the
//! non-sink masks through one linear solve. The susceptibility measure
//! ([`susceptibility_contributions`]) integrates forward sensitivities of the
//! trapping density with respect to a scaling of each mask.

mod greens;
mod report;
mod scheme;
mod susceptibility;

pub use greens::greens_contributions;
pub use report::{normalize, Contribution, ContributionReport, Diagnostics, Measure, PathwayMatrix};
pub use scheme::{
    default_scheme, pathway_scheme, Mask, PartitionScheme, ProcessKind, Selector, SparseMask, Target,
};
pub use susceptibility::{
    sensitivity_trajectory, susceptibility_contributions, SensitivityTrajectory, SusceptibilityOptions,
};
