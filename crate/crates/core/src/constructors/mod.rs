//! Constructors for exact transformations. Each returns the target model,
//! `τ` and `ω` only after the checker has accepted them.

mod dynamics;
mod marginal;
mod micro_macro;

pub use dynamics::{equilibrate, equilibrium_model, simulate_dynamics, DynamicalSpec, Trajectory};
pub use marginal::{marginalize_childless, marginalize_nonintervened};
pub use micro_macro::{aggregate_micro_macro, micro_macro_model, two_layer_model, MicroMacroShape};

use crate::error::{Error, Result};
use crate::sem::Sem;
use crate::transform::{check_exact, CheckConfig, ExactnessReport, InterventionMap, LawSource, Transformation};

#[derive(Debug, Clone)]
pub struct CertifiedTriple {
    pub model: Sem,
    pub tau: Transformation,
    pub omega: InterventionMap,
    /// Which construction produced the triple, with its inputs.
    pub provenance: String,
    /// The internal check that admitted it.
    pub report: ExactnessReport,
}

pub(crate) fn certify<X: LawSource + ?Sized>(
    source: &X,
    model: Sem,
    tau: Transformation,
    omega: InterventionMap,
    provenance: String,
    cfg: &CheckConfig,
) -> Result<CertifiedTriple> {
    let report = check_exact(source, &model, &tau, &omega, cfg)?;
    if !report.exact {
        let failed = report.probes.iter().filter(|p| !p.verdict.equal).count();
        return Err(Error::Certification(format!(
            "{provenance}: {failed} probe(s) unequal, surjective = {}, order-preserving = {}",
            report.surjectivity.passed, report.order.passed
        )));
    }
    Ok(CertifiedTriple {
        model,
        tau,
        omega,
        provenance,
        report,
    })
}
