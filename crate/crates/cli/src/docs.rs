//! JSON documents for models, transformations, dynamical specs and reports.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use exactsem::constructors::DynamicalSpec;
use exactsem::transform::{Certification, TauKind};
use exactsem::{
    BaseNoise, Distribution, Domain, ExactnessReport, ExogenousDef, Expr, Intervention, InterventionCatalog,
    InterventionFamily, InterventionMap, Method, NoiseModel, OmegaRule, Sem, SolverConfig, SymbolKind, Transformation,
    ValueDomain, Variable,
};
use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const FORMAT: u32 = 1;

fn format_version() -> u32 {
    FORMAT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum DistDoc {
    Bernoulli { p: f64 },
    Normal { mean: f64, var: f64 },
    Uniform { low: f64, high: f64 },
    PointMass { value: f64 },
}

impl From<Distribution> for DistDoc {
    fn from(d: Distribution) -> Self {
        match d {
            Distribution::Bernoulli { p } => DistDoc::Bernoulli { p },
            Distribution::Normal { mean, var } => DistDoc::Normal { mean, var },
            Distribution::Uniform { low, high } => DistDoc::Uniform { low, high },
            Distribution::PointMass { value } => DistDoc::PointMass { value },
        }
    }
}

impl From<&DistDoc> for Distribution {
    fn from(d: &DistDoc) -> Self {
        match *d {
            DistDoc::Bernoulli { p } => Distribution::Bernoulli { p },
            DistDoc::Normal { mean, var } => Distribution::Normal { mean, var },
            DistDoc::Uniform { low, high } => Distribution::Uniform { low, high },
            DistDoc::PointMass { value } => Distribution::PointMass { value },
        }
    }
}

/// A base noise: `{"name": "u1", "dist": "normal", "mean": 0, "var": 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDoc {
    pub name: String,
    #[serde(flatten)]
    pub dist: DistDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExoDoc {
    pub name: String,
    pub expr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainDoc {
    #[default]
    Real,
    Binary,
}

fn is_real(d: &DomainDoc) -> bool {
    *d == DomainDoc::Real
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "is_real")]
    pub domain: DomainDoc,
    pub equation: String,
}

/// One coordinate's values: a number, `{"values": [...]}`, or an interval
/// `{"low": a, "high": b}` with either bound optional (`{}` is the reals).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueDoc {
    Value(f64),
    Set {
        values: Vec<f64>,
    },
    Interval {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        low: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        high: Option<f64>,
    },
}

impl From<&ValueDomain> for ValueDoc {
    fn from(d: &ValueDomain) -> Self {
        match d {
            ValueDomain::Finite(v) if v.len() == 1 => ValueDoc::Value(v[0]),
            ValueDomain::Finite(v) => ValueDoc::Set { values: v.clone() },
            ValueDomain::Interval { low, high } => ValueDoc::Interval { low: *low, high: *high },
        }
    }
}

impl From<&ValueDoc> for ValueDomain {
    fn from(d: &ValueDoc) -> Self {
        match d {
            ValueDoc::Value(v) => ValueDomain::single(*v),
            ValueDoc::Set { values } => ValueDomain::Finite(values.clone()),
            ValueDoc::Interval { low, high } => ValueDomain::Interval { low: *low, high: *high },
        }
    }
}

/// A family of interventions. Without a label, singletons are labelled by
/// their member and other families by their targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub targets: IndexMap<String, ValueDoc>,
}

impl FamilyDoc {
    fn from_family(f: &InterventionFamily) -> FamilyDoc {
        FamilyDoc {
            label: Some(f.label.clone()),
            targets: f.targets.iter().cloned().zip(f.domains.iter().map(ValueDoc::from)).collect(),
        }
    }

    fn to_family(&self) -> Result<InterventionFamily> {
        let targets: Vec<String> = self.targets.keys().cloned().collect();
        let domains: Vec<ValueDomain> = self.targets.values().map(ValueDomain::from).collect();
        let label = match &self.label {
            Some(l) => l.clone(),
            None if targets.is_empty() => "∅".into(),
            None if domains.iter().all(|d| matches!(d, ValueDomain::Finite(v) if v.len() == 1)) => {
                InterventionFamily {
                    label: String::new(),
                    targets: targets.clone(),
                    domains: domains.clone(),
                }
                .member(&domains.iter().map(first).collect::<Vec<_>>())
                .to_string()
            }
            None => format!("do({})", targets.join(", ")),
        };
        Ok(InterventionFamily::new(label, targets, domains)?)
    }
}

fn first(d: &ValueDomain) -> f64 {
    match d {
        ValueDomain::Finite(v) => v[0],
        _ => unreachable!(),
    }
}

fn catalog_from_docs(docs: &[FamilyDoc]) -> Result<InterventionCatalog> {
    let mut families = Vec::new();
    for (k, d) in docs.iter().enumerate() {
        families.push(d.to_family().with_context(|| format!("interventions[{k}]"))?);
    }
    if !families.iter().any(InterventionFamily::is_null) {
        families.insert(0, InterventionFamily::null("∅"));
    }
    InterventionCatalog::new(families).context("interventions")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDoc {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    #[serde(default = "format_version")]
    pub format: u32,
    #[serde(default)]
    pub noise: Vec<NoiseDoc>,
    #[serde(default)]
    pub exogenous: Vec<ExoDoc>,
    pub variables: Vec<VariableDoc>,
    #[serde(default)]
    pub interventions: Vec<FamilyDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDoc>,
}

fn noise_from_docs(noise: &[NoiseDoc], exogenous: &[ExoDoc]) -> Result<NoiseModel> {
    let base: Vec<BaseNoise> = noise
        .iter()
        .map(|n| BaseNoise {
            name: n.name.clone(),
            dist: Distribution::from(&n.dist),
        })
        .collect();
    let names: BTreeSet<&str> = noise.iter().map(|n| n.name.as_str()).collect();
    let mut defs = Vec::new();
    for (k, e) in exogenous.iter().enumerate() {
        let expr = Expr::parse(&e.expr, |s| names.contains(s).then_some(SymbolKind::Noise))
            .with_context(|| format!("exogenous[{k}] (`{}`).expr", e.name))?;
        defs.push(ExogenousDef {
            name: e.name.clone(),
            expr,
        });
    }
    NoiseModel::new(base, defs).context("noise")
}

fn noise_to_docs(noise: &NoiseModel) -> (Vec<NoiseDoc>, Vec<ExoDoc>) {
    (
        noise
            .base()
            .iter()
            .map(|b| NoiseDoc {
                name: b.name.clone(),
                dist: b.dist.into(),
            })
            .collect(),
        noise
            .exogenous()
            .iter()
            .map(|e| ExoDoc {
                name: e.name.clone(),
                expr: e.expr.to_string(),
            })
            .collect(),
    )
}

impl ModelDoc {
    pub fn to_sem(&self) -> Result<Sem> {
        check_format(self.format)?;
        let noise = noise_from_docs(&self.noise, &self.exogenous)?;
        let vars: BTreeSet<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        let resolve = |s: &str| {
            if vars.contains(s) {
                Some(SymbolKind::Var)
            } else if noise.exo_index(s).is_some() {
                Some(SymbolKind::Exo)
            } else if noise.is_base(s) {
                Some(SymbolKind::Noise)
            } else {
                None
            }
        };
        let mut equations = Vec::new();
        for (k, v) in self.variables.iter().enumerate() {
            equations.push(
                Expr::parse(&v.equation, resolve).with_context(|| format!("variables[{k}] (`{}`).equation", v.name))?,
            );
        }
        let variables = self
            .variables
            .iter()
            .map(|v| Variable {
                name: v.name.clone(),
                domain: match v.domain {
                    DomainDoc::Real => Domain::Real,
                    DomainDoc::Binary => Domain::Binary,
                },
            })
            .collect();
        let solver = self.solver.map_or_else(SolverConfig::default, |s| SolverConfig {
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            damping: s.damping,
        });
        let catalog = catalog_from_docs(&self.interventions)?;
        Ok(Sem::new(variables, equations, noise, catalog, solver)?)
    }

    pub fn from_sem(sem: &Sem) -> ModelDoc {
        let (noise, exogenous) = noise_to_docs(sem.noise());
        let solver = (*sem.solver() != SolverConfig::default()).then(|| SolverDoc {
            tolerance: sem.solver().tolerance,
            max_iterations: sem.solver().max_iterations,
            damping: sem.solver().damping,
        });
        ModelDoc {
            format: FORMAT,
            noise,
            exogenous,
            variables: sem
                .variables()
                .iter()
                .zip(sem.equations())
                .map(|(v, eq)| VariableDoc {
                    name: v.name.clone(),
                    domain: match v.domain {
                        Domain::Real => DomainDoc::Real,
                        Domain::Binary => DomainDoc::Binary,
                    },
                    equation: eq.to_string(),
                })
                .collect(),
            interventions: sem.catalog().families().iter().map(FamilyDoc::from_family).collect(),
            solver,
        }
    }
}

fn check_format(v: u32) -> Result<()> {
    if v != FORMAT {
        bail!("unsupported document format {v} (expected {FORMAT})");
    }
    Ok(())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        bail!("expected a {nrows}×{ncols} matrix");
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauKindDoc {
    /// Target coordinate `k` is source coordinate `indices[k]`.
    Projection { indices: Vec<usize> },
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    Expressions { expressions: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauDoc {
    #[serde(default = "format_version")]
    pub format: u32,
    pub source: Vec<String>,
    pub target: Vec<String>,
    #[serde(flatten)]
    pub kind: TauKindDoc,
}

impl TauDoc {
    pub fn from_tau(t: &Transformation) -> TauDoc {
        let kind = match t.kind() {
            TauKind::Projection(ix) => TauKindDoc::Projection { indices: ix.clone() },
            TauKind::Affine { matrix, offset } => TauKindDoc::Affine {
                matrix: rows(matrix),
                offset: offset.iter().copied().collect(),
            },
            TauKind::Expressions(e) => TauKindDoc::Expressions {
                expressions: e.iter().map(Expr::to_string).collect(),
            },
        };
        TauDoc {
            format: FORMAT,
            source: t.source().to_vec(),
            target: t.target().to_vec(),
            kind,
        }
    }

    pub fn to_tau(&self) -> Result<Transformation> {
        check_format(self.format)?;
        let (s, t) = (self.source.clone(), self.target.clone());
        Ok(match &self.kind {
            TauKindDoc::Projection { indices } => Transformation::select(s, t, indices.clone())?,
            TauKindDoc::Affine { matrix: m, offset } => {
                let m = matrix(m, t.len(), s.len()).context("matrix")?;
                Transformation::affine(s, t, m, DVector::from_column_slice(offset))?
            }
            TauKindDoc::Expressions { expressions } => {
                let texts: Vec<&str> = expressions.iter().map(String::as_str).collect();
                Transformation::parse(s, t, &texts).context("expressions")?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDoc {
    /// Family label in the source catalog.
    pub source: String,
    /// Family label in the target catalog.
    pub target: String,
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDoc {
    pub from: BTreeMap<String, f64>,
    pub to: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaDoc {
    #[serde(default = "format_version")]
    pub format: u32,
    #[serde(default)]
    pub rules: Vec<RuleDoc>,
    #[serde(default)]
    pub pairs: Vec<PairDoc>,
}

fn targets(i: &Intervention) -> BTreeMap<String, f64> {
    i.targets().clone()
}

impl OmegaDoc {
    pub fn from_omega(w: &InterventionMap) -> OmegaDoc {
        OmegaDoc {
            format: FORMAT,
            rules: w
                .rules()
                .iter()
                .map(|r| RuleDoc {
                    source: r.source.label.clone(),
                    target: r.target.label.clone(),
                    matrix: rows(&r.matrix),
                    offset: r.offset.iter().copied().collect(),
                })
                .collect(),
            pairs: w
                .pairs()
                .iter()
                .map(|(a, b)| PairDoc {
                    from: targets(a),
                    to: targets(b),
                })
                .collect(),
        }
    }

    /// Rules name families by label; they are looked up in the two catalogs.
    pub fn to_omega(&self, x: &InterventionCatalog, y: &InterventionCatalog) -> Result<InterventionMap> {
        check_format(self.format)?;
        let mut rules = Vec::new();
        for (k, r) in self.rules.iter().enumerate() {
            let ctx = || format!("rules[{k}]");
            let src = x
                .family(&r.source)
                .ok_or_else(|| anyhow!("no family labelled `{}` in the source catalog", r.source))
                .with_context(ctx)?;
            let dst = y
                .family(&r.target)
                .ok_or_else(|| anyhow!("no family labelled `{}` in the target catalog", r.target))
                .with_context(ctx)?;
            let m = matrix(&r.matrix, dst.targets.len(), src.targets.len()).with_context(ctx)?;
            let rule = OmegaRule::new(src.clone(), dst.clone(), m, DVector::from_column_slice(&r.offset)).with_context(ctx)?;
            rules.push(rule);
        }
        let pairs = self
            .pairs
            .iter()
            .map(|p| (Intervention::new(p.from.clone()), Intervention::new(p.to.clone())))
            .collect();
        Ok(InterventionMap::new(rules, pairs))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsDoc {
    #[serde(default = "format_version")]
    pub format: u32,
    pub variables: Vec<String>,
    /// Row-major coupling matrix.
    pub a: Vec<Vec<f64>>,
    pub noise: Vec<NoiseDoc>,
    /// One exogenous id per variable, in variable order.
    pub exogenous: Vec<ExoDoc>,
    /// Clamp families; every clamp set over the reals when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interventions: Option<Vec<FamilyDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl DynamicsDoc {
    pub fn to_spec(&self) -> Result<DynamicalSpec> {
        check_format(self.format)?;
        let n = self.variables.len();
        let a = matrix(&self.a, n, n).context("a")?;
        let noise = noise_from_docs(&self.noise, &self.exogenous)?;
        let catalog = match &self.interventions {
            Some(f) => catalog_from_docs(f)?,
            None => DynamicalSpec::all_clamps(&self.variables)?,
        };
        let mut spec = DynamicalSpec::new(self.variables.clone(), a, noise, catalog)?;
        if let Some(h) = self.horizon {
            spec.horizon = h;
        }
        if let Some(t) = self.tolerance {
            spec.tolerance = t;
        }
        Ok(spec)
    }

    pub fn from_spec(spec: &DynamicalSpec) -> DynamicsDoc {
        let (noise, exogenous) = noise_to_docs(&spec.noise);
        DynamicsDoc {
            format: FORMAT,
            variables: spec.variables.clone(),
            a: rows(&spec.a),
            noise,
            exogenous,
            interventions: Some(spec.catalog.families().iter().map(FamilyDoc::from_family).collect()),
            horizon: Some(spec.horizon),
            tolerance: Some(spec.tolerance),
        }
    }
}

/// A source document is either a model or a dynamical spec (which has `a`).
pub enum SourceDoc {
    Model(Sem),
    Dynamics(DynamicalSpec),
}

pub fn read_source(path: &Path) -> Result<SourceDoc> {
    let value: serde_json::Value = read_json(path)?;
    let ctx = || path.display().to_string();
    if value.get("a").is_some() {
        let doc: DynamicsDoc = serde_json::from_value(value).with_context(ctx)?;
        Ok(SourceDoc::Dynamics(doc.to_spec().with_context(ctx)?))
    } else {
        let doc: ModelDoc = serde_json::from_value(value).with_context(ctx)?;
        Ok(SourceDoc::Model(doc.to_sem().with_context(ctx)?))
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| path.display().to_string())
}

pub fn read_model(path: &Path) -> Result<Sem> {
    let doc: ModelDoc = read_json(path)?;
    doc.to_sem().with_context(|| path.display().to_string())
}

/// Pretty JSON with a trailing newline.
pub fn to_text<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialise");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    std::fs::write(path, to_text(doc)).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigDoc {
    pub grid: usize,
    pub random: usize,
    pub samples: usize,
    pub alpha: f64,
    pub tol: f64,
    pub permutations: usize,
    pub force_sampling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDoc {
    pub intervention: String,
    pub family: String,
    pub image: String,
    pub method: String,
    pub equal: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurjectivityDoc {
    pub passed: bool,
    pub uncovered: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderDoc {
    pub passed: bool,
    pub counterexample: Option<[String; 2]>,
    pub images: Option<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapsedDoc {
    pub image: String,
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    pub config: ConfigDoc,
    pub exact: bool,
    pub laws_equal: bool,
    pub certification: String,
    pub surjectivity: SurjectivityDoc,
    pub order: OrderDoc,
    pub null_image: String,
    pub collapsed: Vec<CollapsedDoc>,
    pub probe_alpha: f64,
    pub probe_permutations: usize,
    pub probes: Vec<ProbeDoc>,
}

fn pair(p: &Option<(Intervention, Intervention)>) -> Option<[String; 2]> {
    p.as_ref().map(|(a, b)| [a.to_string(), b.to_string()])
}

impl ReportDoc {
    pub fn from_report(r: &ExactnessReport, provenance: Option<&str>) -> ReportDoc {
        let c = &r.config;
        ReportDoc {
            tool: "exactsem".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: c.seed,
            provenance: provenance.map(str::to_string),
            config: ConfigDoc {
                grid: c.grid,
                random: c.random,
                samples: c.samples,
                alpha: c.alpha,
                tol: c.tol,
                permutations: c.permutations,
                force_sampling: c.force_sampling,
            },
            exact: r.exact,
            laws_equal: r.laws_equal(),
            certification: match r.certification {
                Certification::Exhaustive => "exhaustive",
                Certification::ProbeBased => "probe-certified",
            }
            .into(),
            surjectivity: SurjectivityDoc {
                passed: r.surjectivity.passed,
                uncovered: r.surjectivity.uncovered.clone(),
            },
            order: OrderDoc {
                passed: r.order.passed,
                counterexample: pair(&r.order.counterexample),
                images: pair(&r.order.images),
            },
            null_image: r.null_image.to_string(),
            collapsed: r
                .collapsed
                .iter()
                .map(|c| CollapsedDoc {
                    image: c.image.to_string(),
                    sources: c.sources.iter().map(Intervention::to_string).collect(),
                })
                .collect(),
            probe_alpha: r.probe_alpha,
            probe_permutations: r.probe_permutations,
            probes: r
                .probes
                .iter()
                .map(|p| ProbeDoc {
                    intervention: p.intervention.to_string(),
                    family: p.family.clone(),
                    image: p.image.to_string(),
                    method: match p.verdict.method {
                        Method::ClosedForm => "closed_form",
                        Method::EnergyTest => "energy_test",
                    }
                    .into(),
                    equal: p.verdict.equal,
                    statistic: p.verdict.statistic,
                    threshold: p.verdict.threshold,
                    detail: p.verdict.detail.clone(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_round_trips() {
        for sem in [
            exactsem::scenarios::lightbulbs(),
            exactsem::scenarios::wrong1().source,
            exactsem::scenarios::micro_macro(),
        ] {
            let doc = ModelDoc::from_sem(&sem);
            let text = to_text(&doc);
            let back: ModelDoc = serde_json::from_str(&text).unwrap();
            assert_eq!(back, doc);
            assert_eq!(back.to_sem().unwrap(), sem);
        }
    }

    #[test]
    fn unlabelled_families_get_display_labels() {
        let doc: ModelDoc = serde_json::from_str(
            r#"{"noise": [{"name": "u", "dist": "normal", "mean": 0, "var": 1}],
                "exogenous": [{"name": "E", "expr": "u"}],
                "variables": [{"name": "X", "equation": "E"}],
                "interventions": [{"targets": {"X": 1}}, {"targets": {"X": {"low": 0}}}]}"#,
        )
        .unwrap();
        let sem = doc.to_sem().unwrap();
        let labels: Vec<&str> = sem.catalog().families().iter().map(|f| f.label.as_str()).collect();
        assert_eq!(labels, ["∅", "do(X=1)", "do(X)"]);
    }

    #[test]
    fn parse_errors_name_their_location() {
        let doc: ModelDoc = serde_json::from_str(
            r#"{"variables": [{"name": "X", "equation": "1"}, {"name": "Y", "equation": "X + Q"}]}"#,
        )
        .unwrap();
        let msg = format!("{:#}", doc.to_sem().unwrap_err());
        assert!(msg.contains("variables[1]") && msg.contains("Q"), "{msg}");
    }

    #[test]
    fn tau_and_omega_round_trip() {
        let c = exactsem::scenarios::wrong2();
        let t = TauDoc::from_tau(&c.tau);
        assert_eq!(t.to_tau().unwrap(), c.tau);
        let w = OmegaDoc::from_omega(&c.omega);
        assert_eq!(w.to_omega(c.source.catalog(), c.target.catalog()).unwrap(), c.omega);
        let spec = exactsem::scenarios::dynamics();
        assert_eq!(DynamicsDoc::from_spec(&spec).to_spec().unwrap(), spec);
    }
}
