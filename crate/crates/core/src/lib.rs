//! Structural equation models, perfect interventions and exact
//! transformations between models.

pub mod energy;
pub mod error;
pub mod expr;
pub mod intervention;
pub mod law;
pub mod linalg;
pub mod noise;
pub mod random;
pub mod samples;
pub mod scenarios;
pub mod sem;
pub mod transform;
pub mod constructors;

pub use error::{Error, Result};
pub use expr::{Expr, Symbol, SymbolKind};
pub use intervention::{
    probe_catalog, Intervention, InterventionCatalog, InterventionFamily, Probe, ProbeSet, ValueDomain,
};
pub use noise::{BaseNoise, Distribution, ExogenousDef, NoiseModel};
pub use samples::SampleMatrix;
pub use sem::{Domain, LinearSemView, Sem, SemBuilder, SolverConfig, StructureReport, Variable};
pub use law::{closed_form_law, compare_laws, empirical_law, pushforward, CompareConfig, EmpiricalLaw, EqualityVerdict, GaussianLaw, Law, Method};
pub use transform::{
    check_diagram, check_exact, check_exact_on, check_omega, compose_transformations, permutation_transformation,
    Certification, CheckConfig, ExactnessReport, InterventionMap, LawSource, OmegaRule, TauKind, Transformation,
};
pub use constructors::{
    aggregate_micro_macro, equilibrate, equilibrium_model, marginalize_childless, marginalize_nonintervened,
    micro_macro_model, simulate_dynamics, two_layer_model, CertifiedTriple, DynamicalSpec, MicroMacroShape,
    Trajectory,
};
