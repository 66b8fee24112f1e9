//! Branching Lévy processes with finite atomic reproduction measure: exact
//! criteria for Biggins' martingale, population and spine simulators.

mod chars;
mod criteria;
mod population;
mod spine;

pub use chars::{validate_branching, BranchingChars, OffspringAtom};
pub use criteria::{a_spine, check_lp_criterion, check_ui_criterion, hat_a, spine_measures, BOUNDARY_TOLERANCE};
pub use population::{
    additive_functionals, biggins_w, format_label, sample_martingale, simulate_population, simulate_population_at,
    verify_many_to_one, AdditiveSample, Label, ManyToOneCheck, MartingaleBatch, Particle, PopulationTree,
    DEFAULT_MAX_PARTICLES,
};
pub use spine::{check_spine_identity, sample_spines, simulate_spine, SpineEvent, SpineIdentityCheck, SpineRealization};
