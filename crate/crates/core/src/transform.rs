//! Transformations `τ`, intervention maps `ω`, and the exactness checker.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{compile, Expr, Symbol, SymbolKind};
use crate::intervention::{
    probe_catalog, Intervention, InterventionCatalog, InterventionFamily, ProbeSet, ValueDomain, EXHAUSTIVE_LIMIT,
};
use crate::law::{compare_laws, energy_verdict, pushforward, CompareConfig, EqualityVerdict, GaussianLaw, Law};
use crate::linalg;
use crate::samples::SampleMatrix;
use crate::sem::Sem;

#[derive(Debug, Clone, PartialEq)]
pub enum TauKind {
    /// `y_k = x_{indices[k]}`.
    Projection(Vec<usize>),
    Affine { matrix: DMatrix<f64>, offset: DVector<f64> },
    /// One expression per output over source coordinates.
    Expressions(Vec<Expr>),
}

/// `τ: X → Y` with labelled coordinates on both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformation {
    source: Vec<String>,
    target: Vec<String>,
    kind: TauKind,
}

impl Transformation {
    pub fn identity(source: Vec<String>) -> Transformation {
        Transformation {
            target: source.clone(),
            kind: TauKind::Projection((0..source.len()).collect()),
            source,
        }
    }

    /// Keeps the named coordinates, in the given order.
    pub fn projection(source: Vec<String>, keep: &[&str]) -> Result<Transformation> {
        let indices = keep
            .iter()
            .map(|k| {
                source
                    .iter()
                    .position(|s| s == k)
                    .ok_or_else(|| Error::UnresolvedReference(k.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let target = keep.iter().map(|k| k.to_string()).collect();
        Transformation::select(source, target, indices)
    }

    /// `y_k = x_{indices[k]}` under new labels.
    pub fn select(source: Vec<String>, target: Vec<String>, indices: Vec<usize>) -> Result<Transformation> {
        if target.len() != indices.len() || indices.iter().any(|&i| i >= source.len()) {
            return Err(Error::DimensionMismatch(format!(
                "selection {indices:?} from {} coordinates into {} labels",
                source.len(),
                target.len()
            )));
        }
        Ok(Transformation {
            source,
            target,
            kind: TauKind::Projection(indices),
        })
    }

    pub fn affine(
        source: Vec<String>,
        target: Vec<String>,
        matrix: DMatrix<f64>,
        offset: DVector<f64>,
    ) -> Result<Transformation> {
        if matrix.shape() != (target.len(), source.len()) || offset.len() != target.len() {
            return Err(Error::DimensionMismatch(format!(
                "affine map {:?} + {} between {} and {} coordinates",
                matrix.shape(),
                offset.len(),
                source.len(),
                target.len()
            )));
        }
        Ok(Transformation {
            source,
            target,
            kind: TauKind::Affine { matrix, offset },
        })
    }

    pub fn expressions(source: Vec<String>, target: Vec<String>, exprs: Vec<Expr>) -> Result<Transformation> {
        if exprs.len() != target.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} expressions for {} target coordinates",
                exprs.len(),
                target.len()
            )));
        }
        for s in exprs.iter().flat_map(Expr::symbols) {
            match &s {
                Symbol::Var(n) if source.contains(n) => {}
                other => {
                    return Err(Error::Validation(format!(
                        "τ may only reference source coordinates, found `{}`",
                        other.name()
                    )))
                }
            }
        }
        Ok(Transformation {
            source,
            target,
            kind: TauKind::Expressions(exprs),
        })
    }

    pub fn parse(source: Vec<String>, target: Vec<String>, texts: &[&str]) -> Result<Transformation> {
        let exprs = texts
            .iter()
            .map(|t| Expr::parse(t, |n| source.iter().any(|s| s == n).then_some(SymbolKind::Var)))
            .collect::<Result<Vec<_>>>()?;
        Transformation::expressions(source, target, exprs)
    }

    pub fn source(&self) -> &[String] {
        &self.source
    }

    pub fn target(&self) -> &[String] {
        &self.target
    }

    pub fn kind(&self) -> &TauKind {
        &self.kind
    }

    /// `(T, c)` with `τ(x) = T x + c`, if `τ` is affine.
    pub fn as_affine(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let (p, q) = (self.target.len(), self.source.len());
        match &self.kind {
            TauKind::Projection(idx) => {
                let mut t = DMatrix::zeros(p, q);
                for (k, &i) in idx.iter().enumerate() {
                    t[(k, i)] = 1.0;
                }
                Some((t, DVector::zeros(p)))
            }
            TauKind::Affine { matrix, offset } => Some((matrix.clone(), offset.clone())),
            TauKind::Expressions(exprs) => {
                let mut t = DMatrix::zeros(p, q);
                let mut c = DVector::zeros(p);
                for (k, e) in exprs.iter().enumerate() {
                    let a = e.affine()?;
                    c[k] = a.offset;
                    for (s, coef) in &a.coefficients {
                        let j = self.source.iter().position(|n| n == s.name())?;
                        t[(k, j)] += coef;
                    }
                }
                Some((t, c))
            }
        }
    }

    pub fn to_exprs(&self) -> Vec<Expr> {
        match &self.kind {
            TauKind::Projection(idx) => idx.iter().map(|&i| Expr::var(self.source[i].clone())).collect(),
            TauKind::Affine { matrix, offset } => (0..self.target.len())
                .map(|k| {
                    Expr::linear_combination(
                        self.source
                            .iter()
                            .enumerate()
                            .map(|(j, s)| (matrix[(k, j)], Expr::var(s.clone()))),
                        offset[k],
                    )
                })
                .collect(),
            TauKind::Expressions(e) => e.clone(),
        }
    }

    /// Row-wise application.
    pub fn apply_samples(&self, s: &SampleMatrix) -> Result<SampleMatrix> {
        if s.labels() != self.source.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "samples over {:?} but τ expects {:?}",
                s.labels(),
                self.source
            )));
        }
        let p = self.target.len();
        let mut data = Vec::with_capacity(s.rows() * p);
        match &self.kind {
            TauKind::Projection(idx) => {
                for row in s.iter_rows() {
                    data.extend(idx.iter().map(|&i| row[i]));
                }
            }
            TauKind::Affine { matrix, offset } => {
                for row in s.iter_rows() {
                    for k in 0..p {
                        data.push(offset[k] + (0..row.len()).map(|j| matrix[(k, j)] * row[j]).sum::<f64>());
                    }
                }
            }
            TauKind::Expressions(exprs) => {
                let compiled = exprs
                    .iter()
                    .map(|e| {
                        compile(e, &|sym| {
                            self.source
                                .iter()
                                .position(|n| n == sym.name())
                                .ok_or_else(|| Error::UnresolvedReference(sym.name().to_string()))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                for (r, row) in s.iter_rows().enumerate() {
                    for c in &compiled {
                        data.push(c.eval(row, &[], &[]).map_err(|e| Error::Draw {
                            index: r,
                            source: Box::new(e),
                        })?);
                    }
                }
            }
        }
        SampleMatrix::new(self.target.clone(), data).map(|m| {
            if p == 0 {
                SampleMatrix::with_rows(self.target.clone(), s.rows(), vec![])
            } else {
                m
            }
        })
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &Transformation) -> Result<Transformation> {
        if next.source != self.target {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose: {:?} feeds a map expecting {:?}",
                self.target, next.source
            )));
        }
        if let (TauKind::Projection(a), TauKind::Projection(b)) = (&self.kind, &next.kind) {
            return Transformation::select(
                self.source.clone(),
                next.target.clone(),
                b.iter().map(|&k| a[k]).collect(),
            );
        }
        if let (Some((t1, c1)), Some((t2, c2))) = (self.as_affine(), next.as_affine()) {
            let offset = &t2 * c1 + c2;
            return Transformation::affine(self.source.clone(), next.target.clone(), t2 * t1, offset);
        }
        let inner: BTreeMap<&str, Expr> = self.target.iter().map(String::as_str).zip(self.to_exprs()).collect();
        let exprs = next
            .to_exprs()
            .iter()
            .map(|e| {
                e.substitute(&|s| match s {
                    Symbol::Var(n) => inner.get(n.as_str()).cloned(),
                    _ => None,
                })
            })
            .collect();
        Transformation::expressions(self.source.clone(), next.target.clone(), exprs)
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a.is_finite() && b.is_finite() && (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0))
}

pub(crate) fn same_family(a: &InterventionFamily, b: &InterventionFamily) -> bool {
    a.targets == b.targets && a.domains == b.domains
}

/// Maps members of one X-family into one Y-family by `v ↦ M v + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaRule {
    pub source: InterventionFamily,
    pub target: InterventionFamily,
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl OmegaRule {
    pub fn new(
        source: InterventionFamily,
        target: InterventionFamily,
        matrix: DMatrix<f64>,
        offset: DVector<f64>,
    ) -> Result<OmegaRule> {
        if matrix.shape() != (target.targets.len(), source.targets.len()) || offset.len() != target.targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "rule `{}` → `{}` has matrix {:?} and offset {}",
                source.label,
                target.label,
                matrix.shape(),
                offset.len()
            )));
        }
        Ok(OmegaRule {
            source,
            target,
            matrix,
            offset,
        })
    }

    /// Values carried over coordinate by coordinate.
    pub fn identity(source: InterventionFamily, target: InterventionFamily) -> Result<OmegaRule> {
        let (p, q) = (target.targets.len(), source.targets.len());
        OmegaRule::new(source, target, DMatrix::identity(p, q), DVector::zeros(p))
    }

    /// Every member maps to the same target values.
    pub fn constant(source: InterventionFamily, target: InterventionFamily, values: &[f64]) -> Result<OmegaRule> {
        let (p, q) = (target.targets.len(), source.targets.len());
        OmegaRule::new(source, target, DMatrix::zeros(p, q), DVector::from_column_slice(values))
    }

    pub fn apply(&self, i: &Intervention) -> Result<Intervention> {
        let v = self
            .source
            .values_of(i)
            .filter(|_| self.source.contains(i))
            .ok_or_else(|| Error::Structural(format!("{i} is not in family `{}`", self.source.label)))?;
        let mut y = &self.matrix * DVector::from_vec(v) + &self.offset;
        for ((t, d), val) in self.target.targets.iter().zip(&self.target.domains).zip(y.iter_mut()) {
            // finite targets absorb rounding from the rule's arithmetic
            if let ValueDomain::Finite(vals) = d {
                if let Some(m) = vals.iter().find(|m| close(**m, *val)) {
                    *val = *m;
                }
            }
            if !d.contains(*val) {
                return Err(Error::Structural(format!(
                    "ω maps {i} to {t}={val}, outside the domain of family `{}`",
                    self.target.label
                )));
            }
        }
        Ok(self.target.member(y.as_slice()))
    }

    /// Whether the image of the source family covers the target family.
    /// Decided exactly when the source axes used are all of ℝ (rank test),
    /// when each used source axis feeds a single output (row by row), or
    /// when both families are small and finite (enumeration).
    fn onto(&self) -> bool {
        let (p, q) = self.matrix.shape();
        let used: Vec<usize> = (0..q).filter(|&j| self.matrix.column(j).iter().any(|x| *x != 0.0)).collect();
        let unbounded = used.iter().all(|&j| self.source.domains[j] == ValueDomain::reals());
        if unbounded && linalg::rank(&self.matrix) == p {
            return true;
        }
        let disjoint = used
            .iter()
            .all(|&j| self.matrix.column(j).iter().filter(|x| **x != 0.0).count() == 1);
        if disjoint {
            return (0..p).all(|r| self.row_onto(r));
        }
        self.target.is_finite() && self.finite_onto()
    }

    /// Row `r` as a map of its own columns: its image is a finite sumset
    /// plus an interval, i.e. a union of intervals.
    fn row_onto(&self, r: usize) -> bool {
        let mut points = vec![self.offset[r]];
        let (mut lo, mut hi) = (0.0, 0.0);
        for j in 0..self.matrix.ncols() {
            let a = self.matrix[(r, j)];
            if a == 0.0 {
                continue;
            }
            match &self.source.domains[j] {
                ValueDomain::Finite(vals) => {
                    points = points.iter().flat_map(|p| vals.iter().map(move |v| p + a * v)).collect();
                    points.sort_by(f64::total_cmp);
                    points.dedup();
                    if points.len() > EXHAUSTIVE_LIMIT {
                        return false;
                    }
                }
                ValueDomain::Interval { low, high } => {
                    let (x, y) = (
                        a * low.unwrap_or(f64::NEG_INFINITY),
                        a * high.unwrap_or(f64::INFINITY),
                    );
                    lo += x.min(y);
                    hi += x.max(y);
                }
            }
        }
        let mut pieces: Vec<(f64, f64)> = Vec::new();
        for p in points {
            match pieces.last_mut() {
                Some(last) if p + lo <= last.1 || close(p + lo, last.1) => last.1 = last.1.max(p + hi),
                _ => pieces.push((p + lo, p + hi)),
            }
        }
        let covered = |l: f64, h: f64| pieces.iter().any(|&(a, b)| (a <= l || close(a, l)) && (h <= b || close(h, b)));
        match &self.target.domains[r] {
            ValueDomain::Finite(vals) => vals.iter().all(|v| covered(*v, *v)),
            ValueDomain::Interval { low, high } => {
                covered(low.unwrap_or(f64::NEG_INFINITY), high.unwrap_or(f64::INFINITY))
            }
        }
    }

    fn finite_onto(&self) -> bool {
        let (Some(src), Some(dst)) = (
            self.source.enumerate(EXHAUSTIVE_LIMIT),
            self.target.enumerate(EXHAUSTIVE_LIMIT),
        ) else {
            return false;
        };
        let images: Vec<Intervention> = src.iter().filter_map(|i| self.apply(i).ok()).collect();
        dst.iter().all(|j| images.contains(j))
    }
}

/// `ω: I_X → I_Y` as family rules plus explicit pairs (checked first).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InterventionMap {
    rules: Vec<OmegaRule>,
    pairs: Vec<(Intervention, Intervention)>,
}

impl InterventionMap {
    pub fn new(rules: Vec<OmegaRule>, pairs: Vec<(Intervention, Intervention)>) -> InterventionMap {
        InterventionMap { rules, pairs }
    }

    pub fn explicit(pairs: impl IntoIterator<Item = (Intervention, Intervention)>) -> InterventionMap {
        InterventionMap {
            rules: vec![],
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn rules(&self) -> &[OmegaRule] {
        &self.rules
    }

    pub fn pairs(&self) -> &[(Intervention, Intervention)] {
        &self.pairs
    }

    pub fn apply(&self, i: &Intervention) -> Result<Intervention> {
        if let Some((_, j)) = self.pairs.iter().find(|(a, _)| a == i) {
            return Ok(j.clone());
        }
        match self.rules.iter().find(|r| r.source.contains(i)) {
            Some(r) => r.apply(i),
            None => Err(Error::Structural(format!("ω has no rule for {i}"))),
        }
    }

    /// `next ∘ self`. Rules compose by matrix product; finite families whose
    /// images are not covered by a single rule of `next` are enumerated.
    pub fn then(&self, next: &InterventionMap) -> Result<InterventionMap> {
        let mut rules = Vec::new();
        let mut pairs = Vec::new();
        for (a, b) in &self.pairs {
            pairs.push((a.clone(), next.apply(b)?));
        }
        for r in &self.rules {
            if let Some(s) = next.rules.iter().find(|s| same_family(&s.source, &r.target)) {
                if !next.pairs.iter().any(|(a, _)| r.target.contains(a)) {
                    rules.push(OmegaRule::new(
                        r.source.clone(),
                        s.target.clone(),
                        &s.matrix * &r.matrix,
                        &s.matrix * &r.offset + &s.offset,
                    )?);
                    continue;
                }
            }
            let members = r.source.enumerate(EXHAUSTIVE_LIMIT).ok_or_else(|| {
                Error::Structural(format!(
                    "cannot compose ω on continuous family `{}`: no matching rule for `{}`",
                    r.source.label, r.target.label
                ))
            })?;
            for i in members {
                if !pairs.iter().any(|(a, _)| *a == i) {
                    let j = next.apply(&r.apply(&i)?)?;
                    pairs.push((i, j));
                }
            }
        }
        Ok(InterventionMap { rules, pairs })
    }

    /// Every X-family must be handled by a rule or by explicit pairs.
    fn check_coverage(&self, x: &InterventionCatalog) -> Result<()> {
        for f in x.families() {
            if self.rules.iter().any(|r| same_family(&r.source, f)) {
                continue;
            }
            let covered = f
                .enumerate(EXHAUSTIVE_LIMIT)
                .is_some_and(|m| m.iter().all(|i| self.pairs.iter().any(|(a, _)| a == i)));
            if !covered {
                return Err(Error::Structural(format!("ω has no rule for family `{}`", f.label)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certification {
    /// Every intervention of `I_X` was checked.
    Exhaustive,
    /// Only the probe set was checked; a pass means no counterexample found.
    ProbeBased,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurjectivityVerdict {
    pub passed: bool,
    /// Label of the first Y-family not covered.
    pub uncovered: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderVerdict {
    pub passed: bool,
    /// First comparable pair `i ≤ j` with `ω(i) ≰ ω(j)`.
    pub counterexample: Option<(Intervention, Intervention)>,
    /// Their images.
    pub images: Option<(Intervention, Intervention)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaCheck {
    pub surjectivity: SurjectivityVerdict,
    pub order: OrderVerdict,
    /// `ω` of each probe, in probe order.
    pub images: Vec<Intervention>,
    pub certification: Certification,
}

pub fn check_omega(
    omega: &InterventionMap,
    x: &InterventionCatalog,
    y: &InterventionCatalog,
    probes: &ProbeSet,
) -> Result<OmegaCheck> {
    omega.check_coverage(x)?;
    for r in &omega.rules {
        if !y.families().iter().any(|g| same_family(g, &r.target)) {
            return Err(Error::Structural(format!(
                "ω rule targets family `{}`, which is not in I_Y",
                r.target.label
            )));
        }
    }
    let images = probes
        .interventions()
        .map(|i| {
            let j = omega.apply(i)?;
            if !y.contains(&j) {
                return Err(Error::Structural(format!("ω maps {i} to {j}, which is not in I_Y")));
            }
            Ok(j)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut order = OrderVerdict {
        passed: true,
        counterexample: None,
        images: None,
    };
    if let Some(&(a, b)) = probes.pairs.iter().find(|&&(a, b)| !images[a].leq(&images[b])) {
        order = OrderVerdict {
            passed: false,
            counterexample: Some((probes.probes[a].intervention.clone(), probes.probes[b].intervention.clone())),
            images: Some((images[a].clone(), images[b].clone())),
        };
    }

    let mut finite_images: Vec<Intervention> = omega.pairs.iter().map(|(_, j)| j.clone()).collect();
    for r in &omega.rules {
        if let Some(members) = r.source.enumerate(EXHAUSTIVE_LIMIT) {
            for i in members {
                finite_images.push(r.apply(&i)?);
            }
        }
    }
    let uncovered = y.families().iter().find(|g| {
        let by_members = g
            .enumerate(EXHAUSTIVE_LIMIT)
            .is_some_and(|m| m.iter().all(|j| finite_images.contains(j)));
        let by_rule = omega.rules.iter().any(|r| same_family(&r.target, g) && r.onto());
        !(by_members || by_rule)
    });

    Ok(OmegaCheck {
        surjectivity: SurjectivityVerdict {
            passed: uncovered.is_none(),
            uncovered: uncovered.map(|g| g.label.clone()),
        },
        order,
        images,
        certification: if probes.exhaustive {
            Certification::Exhaustive
        } else {
            Certification::ProbeBased
        },
    })
}

/// Anything that yields interventional laws over labelled coordinates.
pub trait LawSource {
    fn labels(&self) -> Vec<String>;
    fn catalog(&self) -> &InterventionCatalog;
    /// `Ok(None)` when no closed form is available.
    fn closed_form(&self, i: &Intervention) -> Result<Option<GaussianLaw>>;
    fn draw(&self, i: &Intervention, n: usize, seed: u64) -> Result<SampleMatrix>;
}

impl LawSource for Sem {
    fn labels(&self) -> Vec<String> {
        self.names()
    }

    fn catalog(&self) -> &InterventionCatalog {
        Sem::catalog(self)
    }

    fn closed_form(&self, i: &Intervention) -> Result<Option<GaussianLaw>> {
        if !self.is_acyclic() {
            // the law is only meaningful if the system is solvable
            self.prepare(i)?;
        }
        match crate::law::closed_form_law(self, i) {
            Ok(g) => Ok(Some(g)),
            Err(Error::NotApplicable(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn draw(&self, i: &Intervention, n: usize, seed: u64) -> Result<SampleMatrix> {
        self.sample(i, n, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckConfig {
    pub grid: usize,
    pub random: usize,
    /// Monte Carlo sample count per side.
    pub samples: usize,
    /// Family-wise level; split evenly over the Monte Carlo comparisons.
    pub alpha: f64,
    pub tol: f64,
    pub permutations: usize,
    pub seed: u64,
    /// Sample even where closed forms exist.
    pub force_sampling: bool,
}

impl CheckConfig {
    pub fn new(seed: u64) -> CheckConfig {
        CheckConfig {
            grid: 3,
            random: 5,
            samples: 50_000,
            alpha: 0.01,
            tol: 1e-9,
            permutations: 200,
            seed,
            force_sampling: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeVerdict {
    pub intervention: Intervention,
    pub family: String,
    pub image: Intervention,
    pub verdict: EqualityVerdict,
}

/// Distinct X-probes that `ω` sends to the same Y-intervention.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedImage {
    pub image: Intervention,
    pub sources: Vec<Intervention>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessReport {
    pub probes: Vec<ProbeVerdict>,
    pub surjectivity: SurjectivityVerdict,
    pub order: OrderVerdict,
    /// `ω(∅)`, recorded for diagnostics only.
    pub null_image: Intervention,
    pub collapsed: Vec<CollapsedImage>,
    pub certification: Certification,
    /// Per-comparison level actually used by Monte Carlo probes.
    pub probe_alpha: f64,
    pub probe_permutations: usize,
    pub config: CheckConfig,
    pub exact: bool,
}

impl ExactnessReport {
    pub fn laws_equal(&self) -> bool {
        self.probes.iter().all(|p| p.verdict.equal)
    }
}

pub(crate) fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    // splitmix64 over the parts
    let mut z = seed;
    for p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

enum Side {
    Closed(Law),
    Sampled,
}

struct Comparison<'a, X: LawSource + ?Sized> {
    x: &'a X,
    y: &'a Sem,
    tau: &'a Transformation,
    cfg: &'a CheckConfig,
}

impl<X: LawSource + ?Sized> Comparison<'_, X> {
    fn closed(&self, i: &Intervention, j: &Intervention) -> Result<(Side, Side)> {
        if self.cfg.force_sampling {
            return Ok((Side::Sampled, Side::Sampled));
        }
        let xs = match (self.x.closed_form(i).map_err(|e| e.at(i))?, self.tau.as_affine()) {
            (Some(g), Some(_)) => Side::Closed(pushforward(&Law::Gaussian(g), self.tau)?),
            _ => Side::Sampled,
        };
        let ys = match self.y.closed_form(j).map_err(|e| e.at(j))? {
            Some(g) => Side::Closed(Law::Gaussian(g)),
            None => Side::Sampled,
        };
        Ok((xs, ys))
    }

    fn compare(&self, i: &Intervention, j: &Intervention, sides: (Side, Side), key: u64, cmp: &CompareConfig) -> Result<EqualityVerdict> {
        if let (Side::Closed(a), Side::Closed(b)) = &sides {
            return compare_laws(a, b, cmp);
        }
        let n = self.cfg.samples;
        let xs = self
            .x
            .draw(i, n, derive_seed(self.cfg.seed, &[key, 0]))
            .and_then(|s| self.tau.apply_samples(&s))
            .map_err(|e| e.at(i))?;
        let ys = self.y.draw(j, n, derive_seed(self.cfg.seed, &[key, 1])).map_err(|e| e.at(j))?;
        energy_verdict(
            &xs,
            &ys,
            &CompareConfig {
                seed: derive_seed(self.cfg.seed, &[key, 2]),
                ..*cmp
            },
        )
    }
}

/// Bonferroni level and a permutation count able to reach it.
fn split_alpha(cfg: &CheckConfig, comparisons: usize) -> (f64, usize) {
    let a = cfg.alpha / comparisons.max(1) as f64;
    let perms = cfg.permutations.max((2.0 / a).ceil() as usize - 1);
    (a, perms)
}

fn validate_shapes(x_labels: &[String], y: &Sem, tau: &Transformation) -> Result<()> {
    if tau.source() != x_labels {
        return Err(Error::DimensionMismatch(format!(
            "τ source {:?} does not match source coordinates {x_labels:?}",
            tau.source()
        )));
    }
    if tau.target() != y.names().as_slice() {
        return Err(Error::DimensionMismatch(format!(
            "τ target {:?} does not match target variables {:?}",
            tau.target(),
            y.names()
        )));
    }
    Ok(())
}

/// Checks the exactness definition on a generated probe set.
pub fn check_exact<X: LawSource + ?Sized>(
    x: &X,
    y: &Sem,
    tau: &Transformation,
    omega: &InterventionMap,
    cfg: &CheckConfig,
) -> Result<ExactnessReport> {
    let probes = probe_catalog(x.catalog(), cfg.grid, cfg.random, cfg.seed)?;
    check_exact_on(x, y, tau, omega, &probes, cfg)
}

pub fn check_exact_on<X: LawSource + ?Sized>(
    x: &X,
    y: &Sem,
    tau: &Transformation,
    omega: &InterventionMap,
    probes: &ProbeSet,
    cfg: &CheckConfig,
) -> Result<ExactnessReport> {
    validate_shapes(&x.labels(), y, tau)?;
    let om = check_omega(omega, x.catalog(), y.catalog(), probes)?;
    let cmp = Comparison { x, y, tau, cfg };
    let sides = probes
        .interventions()
        .zip(&om.images)
        .map(|(i, j)| cmp.closed(i, j))
        .collect::<Result<Vec<_>>>()?;
    let sampled = sides
        .iter()
        .filter(|s| !matches!(s, (Side::Closed(_), Side::Closed(_))))
        .count();
    let (probe_alpha, perms) = split_alpha(cfg, sampled);
    let compare_cfg = CompareConfig {
        tol: cfg.tol,
        alpha: probe_alpha,
        permutations: perms,
        seed: cfg.seed,
    };
    let mut verdicts = Vec::with_capacity(sides.len());
    for (k, ((probe, image), side)) in probes.probes.iter().zip(&om.images).zip(sides).enumerate() {
        let v = cmp.compare(&probe.intervention, image, side, k as u64, &compare_cfg)?;
        verdicts.push(ProbeVerdict {
            intervention: probe.intervention.clone(),
            family: probe.family.clone(),
            image: image.clone(),
            verdict: v,
        });
    }
    let mut collapsed: Vec<CollapsedImage> = Vec::new();
    for v in &verdicts {
        match collapsed.iter_mut().find(|c| c.image == v.image) {
            Some(c) => c.sources.push(v.intervention.clone()),
            None => collapsed.push(CollapsedImage {
                image: v.image.clone(),
                sources: vec![v.intervention.clone()],
            }),
        }
    }
    collapsed.retain(|c| c.sources.len() > 1);
    let null_image = omega.apply(&Intervention::null())?;
    let exact = om.surjectivity.passed && om.order.passed && verdicts.iter().all(|v| v.verdict.equal);
    Ok(ExactnessReport {
        probes: verdicts,
        surjectivity: om.surjectivity,
        order: om.order,
        null_image,
        collapsed,
        certification: om.certification,
        probe_alpha,
        probe_permutations: perms,
        config: cfg.clone(),
        exact,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramVerdict {
    pub i: Intervention,
    pub j: Intervention,
    pub omega_i: Intervention,
    pub omega_j: Intervention,
    /// `ω(i) ≤ ω(j)`: the arrow on the Y side exists.
    pub images_ordered: bool,
    /// `P_τ(X)^i = P_Y^do(ω(i))`.
    pub left: EqualityVerdict,
    /// `P_τ(X)^j = P_Y^do(ω(j))`.
    pub right: EqualityVerdict,
    pub commutes: bool,
}

/// The commuting square for one comparable pair `i ≤ j`.
pub fn check_diagram<X: LawSource + ?Sized>(
    x: &X,
    y: &Sem,
    tau: &Transformation,
    omega: &InterventionMap,
    i: &Intervention,
    j: &Intervention,
    cfg: &CheckConfig,
) -> Result<DiagramVerdict> {
    if !i.leq(j) {
        return Err(Error::Precondition(format!("{i} ≤ {j} does not hold")));
    }
    validate_shapes(&x.labels(), y, tau)?;
    let (oi, oj) = (omega.apply(i)?, omega.apply(j)?);
    let cmp = Comparison { x, y, tau, cfg };
    let (si, sj) = (cmp.closed(i, &oi)?, cmp.closed(j, &oj)?);
    let sampled = [&si, &sj]
        .iter()
        .filter(|s| !matches!(s, (Side::Closed(_), Side::Closed(_))))
        .count();
    let (alpha, perms) = split_alpha(cfg, sampled);
    let c = CompareConfig {
        tol: cfg.tol,
        alpha,
        permutations: perms,
        seed: cfg.seed,
    };
    let left = cmp.compare(i, &oi, si, 0, &c)?;
    let right = cmp.compare(j, &oj, sj, 1, &c)?;
    let images_ordered = oi.leq(&oj);
    Ok(DiagramVerdict {
        commutes: images_ordered && left.equal && right.equal,
        i: i.clone(),
        j: j.clone(),
        omega_i: oi,
        omega_j: oj,
        images_ordered,
        left,
        right,
    })
}

/// `(τ_ZY ∘ τ_YX, ω_ZY ∘ ω_YX)`.
pub fn compose_transformations(
    first: (&Transformation, &InterventionMap),
    second: (&Transformation, &InterventionMap),
) -> Result<(Transformation, InterventionMap)> {
    Ok((first.0.then(second.0)?, first.1.then(second.1)?))
}

/// Relabels variables by the bijection `pi` (old name → new name).
///
/// The target model lists variables in the source's positional order of
/// names, so `pi = id` gives back the same model and `τ = id`.
pub fn permutation_transformation(
    sem: &Sem,
    pi: &BTreeMap<String, String>,
) -> Result<(Sem, Transformation, InterventionMap)> {
    let names = sem.names();
    let mut images: Vec<&String> = pi.values().collect();
    images.sort();
    let mut sorted = names.clone();
    sorted.sort();
    let keys: Vec<&String> = pi.keys().collect();
    if keys != sorted.iter().collect::<Vec<_>>() || images != sorted.iter().collect::<Vec<_>>() {
        return Err(Error::Validation("relabelling is not a bijection on the variables".into()));
    }
    let inverse: BTreeMap<&str, &str> = pi.iter().map(|(a, b)| (b.as_str(), a.as_str())).collect();
    let mut variables = Vec::with_capacity(names.len());
    let mut equations = Vec::with_capacity(names.len());
    let mut indices = Vec::with_capacity(names.len());
    for name in &names {
        let old = inverse[name.as_str()];
        let k = sem.index_of(old).expect("bijection checked");
        let mut v = sem.variables()[k].clone();
        v.name = name.clone();
        variables.push(v);
        equations.push(sem.equations()[k].rename_vars(pi));
        indices.push(k);
    }
    let catalog = sem.catalog().rename(pi);
    let y = Sem::new(variables, equations, sem.noise().clone(), catalog.clone(), *sem.solver())?;
    let tau = Transformation::select(names.clone(), names, indices)?;
    let rules = sem
        .catalog()
        .families()
        .iter()
        .zip(catalog.families())
        .map(|(f, g)| OmegaRule::identity(f.clone(), g.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok((y, tau, InterventionMap::new(rules, vec![])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn affine_composition() {
        let a = Transformation::affine(
            names(&["a", "b"]),
            names(&["u"]),
            DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            DVector::from_vec(vec![3.0]),
        )
        .unwrap();
        let b = Transformation::affine(
            names(&["u"]),
            names(&["v", "w"]),
            DMatrix::from_row_slice(2, 1, &[2.0, -1.0]),
            DVector::from_vec(vec![1.0, 0.0]),
        )
        .unwrap();
        let (t, c) = a.then(&b).unwrap().as_affine().unwrap();
        assert_eq!(t, DMatrix::from_row_slice(2, 2, &[2.0, 4.0, -1.0, -2.0]));
        assert_eq!(c.as_slice(), &[7.0, -3.0]);
        let id = Transformation::identity(names(&["a", "b"]));
        assert_eq!(id.then(&a).unwrap().as_affine(), a.as_affine());
        assert!(b.then(&a).is_err());
    }

    #[test]
    fn expression_composition_substitutes() {
        let a = Transformation::parse(names(&["x", "y"]), names(&["p"]), &["x * y"]).unwrap();
        let b = Transformation::parse(names(&["p"]), names(&["q"]), &["p + 1"]).unwrap();
        let c = a.then(&b).unwrap();
        let s = SampleMatrix::new(names(&["x", "y"]), vec![2.0, 3.0]).unwrap();
        assert_eq!(c.apply_samples(&s).unwrap().data(), &[7.0]);
    }

    #[test]
    fn tau_may_not_reference_unknowns() {
        assert!(Transformation::parse(names(&["x"]), names(&["p"]), &["x + z"]).is_err());
        assert!(Transformation::projection(names(&["x"]), &["z"]).is_err());
    }

    #[test]
    fn rule_application_and_domain() {
        let f = InterventionFamily::new("w", names(&["W1", "W2"]), vec![ValueDomain::reals(); 2]).unwrap();
        let g = InterventionFamily::new("wh", names(&["Wh"]), vec![ValueDomain::interval(-1.0, 1.0)]).unwrap();
        let r = OmegaRule::new(f.clone(), g, DMatrix::from_row_slice(1, 2, &[0.5, 0.5]), DVector::zeros(1)).unwrap();
        let y = r.apply(&Intervention::new([("W1", 1.0), ("W2", 0.0)])).unwrap();
        assert_eq!(y, Intervention::new([("Wh", 0.5)]));
        assert!(matches!(
            r.apply(&Intervention::new([("W1", 1.0), ("W2", 3.0)])),
            Err(Error::Structural(_))
        ));
        assert!(r.onto());
        let g2 = InterventionFamily::new("wh", names(&["Wh"]), vec![ValueDomain::reals()]).unwrap();
        let r2 = OmegaRule::new(f, g2, DMatrix::zeros(1, 2), DVector::zeros(1)).unwrap();
        assert!(!r2.onto());
        let mixed = InterventionFamily::new(
            "m",
            names(&["A", "B"]),
            vec![ValueDomain::Finite(vec![0.0, 2.0]), ValueDomain::interval(-1.0, 1.0)],
        )
        .unwrap();
        let id = OmegaRule::new(mixed.clone(), mixed.clone(), DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        assert!(id.onto());
        let half = InterventionFamily::new("h", names(&["A"]), vec![ValueDomain::interval(0.0, 3.0)]).unwrap();
        let gap = OmegaRule::new(mixed.clone(), half.clone(), DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::zeros(1));
        // image of A + B is [-1, 1] ∪ [1, 3]
        assert!(gap.unwrap().onto());
        let sparse = OmegaRule::new(mixed, half, DMatrix::from_row_slice(1, 2, &[2.0, 0.5]), DVector::zeros(1)).unwrap();
        assert!(!sparse.onto());
    }

    fn wrong_pair(second: bool) -> (Sem, Sem, Transformation, InterventionMap) {
        let c = if second { crate::scenarios::wrong2() } else { crate::scenarios::wrong1() };
        (c.source, c.target, c.tau, c.omega)
    }

    #[test]
    fn wrong1_fails_only_on_order() {
        let (x, y, tau, omega) = wrong_pair(false);
        let r = check_exact(&x, &y, &tau, &omega, &CheckConfig::new(1)).unwrap();
        assert!(r.laws_equal(), "{:#?}", r.probes);
        assert!(r.surjectivity.passed);
        assert!(!r.order.passed && !r.exact);
        assert_eq!(
            r.order.counterexample,
            Some((Intervention::null(), Intervention::new([("X2", 0.0)])))
        );
        assert_eq!(r.null_image, Intervention::new([("Y1", 0.0)]));
        assert_eq!(r.certification, Certification::Exhaustive);
        assert_eq!(r.collapsed.len(), 1);
    }

    #[test]
    fn wrong2_fails_only_on_order() {
        let (x, y, tau, omega) = wrong_pair(true);
        let r = check_exact(&x, &y, &tau, &omega, &CheckConfig::new(1)).unwrap();
        assert!(r.laws_equal());
        assert!(r.surjectivity.passed);
        assert_eq!(
            r.order.counterexample,
            Some((
                Intervention::new([("X2", 0.0)]),
                Intervention::new([("X1", 0.0), ("X2", 0.0)])
            ))
        );
        assert!(r.null_image.is_null());
        let d = check_diagram(
            &x,
            &y,
            &tau,
            &omega,
            &Intervention::new([("X2", 0.0)]),
            &Intervention::new([("X1", 0.0), ("X2", 0.0)]),
            &CheckConfig::new(1),
        )
        .unwrap();
        assert!(d.left.equal && d.right.equal && !d.images_ordered && !d.commutes);
        assert!(check_diagram(
            &x,
            &y,
            &tau,
            &omega,
            &Intervention::new([("X1", 0.0), ("X2", 0.0)]),
            &Intervention::new([("X2", 0.0)]),
            &CheckConfig::new(1)
        )
        .is_err());
    }

    #[test]
    fn missing_rule_is_structural() {
        let (x, y, tau, _) = wrong_pair(false);
        let omega = InterventionMap::explicit([(Intervention::null(), Intervention::null())]);
        assert!(matches!(
            check_exact(&x, &y, &tau, &omega, &CheckConfig::new(1)),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn uncovered_target_family() {
        let (x, y, tau, _) = wrong_pair(false);
        let d0 = Intervention::null();
        let omega = InterventionMap::explicit([
            (d0.clone(), d0.clone()),
            (Intervention::new([("X2", 0.0)]), d0.clone()),
            (Intervention::new([("X1", 0.0), ("X2", 0.0)]), d0),
        ]);
        let r = check_exact(&x, &y, &tau, &omega, &CheckConfig::new(1)).unwrap();
        assert!(!r.surjectivity.passed && r.order.passed && !r.exact);
        assert_eq!(r.surjectivity.uncovered.as_deref(), Some("do(Y1=0)"));
    }

    #[test]
    fn lightbulb_relabelling_is_exact() {
        let m = crate::sem::lightbulbs();
        let pi: BTreeMap<String, String> = [("B1", "B2"), ("B2", "B1"), ("L", "L")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let (y, tau, omega) = permutation_transformation(&m, &pi).unwrap();
        assert_eq!(y.equation("B1").unwrap().to_string(), "E2");
        let cfg = CheckConfig {
            samples: 20_000,
            ..CheckConfig::new(3)
        };
        let r = check_exact(&m, &y, &tau, &omega, &cfg).unwrap();
        assert!(r.exact, "{:#?}", r.probes);

        let id: BTreeMap<String, String> = m.names().into_iter().map(|n| (n.clone(), n)).collect();
        let (same, t, _) = permutation_transformation(&m, &id).unwrap();
        assert_eq!(same, m);
        assert_eq!(t, Transformation::identity(m.names()));

        let (_, back, _) = permutation_transformation(&y, &pi).unwrap();
        assert_eq!(tau.then(&back).unwrap(), Transformation::identity(m.names()));

        let bad: BTreeMap<String, String> = [("B1", "B2"), ("B2", "B2"), ("L", "L")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert!(permutation_transformation(&m, &bad).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, &[0, 0]), derive_seed(1, &[0, 1]));
        assert_ne!(derive_seed(1, &[0]), derive_seed(2, &[0]));
        assert_eq!(derive_seed(5, &[3, 4]), derive_seed(5, &[3, 4]));
    }
}
