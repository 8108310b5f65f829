//! Structural equation models: representation, structure analysis,
//! perfect interventions, solving and sampling.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{compile, Compiled, Expr, Symbol, SymbolKind};
use crate::intervention::{Intervention, InterventionCatalog, InterventionFamily, ValueDomain};
use crate::linalg;
use crate::noise::{BaseNoise, Distribution, ExogenousDef, NoiseModel};
use crate::samples::SampleMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Domain {
    #[default]
    Real,
    /// {0,1}-valued; intervention values and solutions are checked.
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub domain: Domain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once `sup |f(x) - x| < tolerance`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Weight kept on the previous iterate: `x ← d·x + (1-d)·f(x)`.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-10,
            max_iterations: 10_000,
            damping: 0.0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 || !(0.0..1.0).contains(&self.damping) {
            return Err(Error::Validation(format!("invalid solver configuration {self:?}")));
        }
        Ok(())
    }
}

/// `M_X = (S_X, I_X, P_E)` plus solver settings for cyclic models.
#[derive(Debug, Clone, PartialEq)]
pub struct Sem {
    variables: Vec<Variable>,
    equations: Vec<Expr>,
    noise: NoiseModel,
    catalog: InterventionCatalog,
    solver: SolverConfig,
}

/// Affine equations `x = A x + b + C e`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSemView {
    pub variables: Vec<String>,
    pub exogenous: Vec<String>,
    /// `A[(i, j)]` is the coefficient of variable `j` in the equation of `i`.
    pub coefficients: DMatrix<f64>,
    pub offset: DVector<f64>,
    /// `C[(i, k)]` is the coefficient of exogenous `k` in the equation of `i`.
    pub loading: DMatrix<f64>,
}

impl LinearSemView {
    /// Rows of clamped coordinates zeroed, offsets set to the targets.
    pub fn intervene(&self, i: &Intervention) -> LinearSemView {
        let mut out = self.clone();
        for (k, name) in self.variables.iter().enumerate() {
            if let Some(v) = i.get(name) {
                out.coefficients.row_mut(k).fill(0.0);
                out.loading.row_mut(k).fill(0.0);
                out.offset[k] = v;
            }
        }
        out
    }

    pub fn equations(&self) -> Vec<Expr> {
        (0..self.variables.len())
            .map(|i| {
                let vars = self
                    .variables
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (self.coefficients[(i, j)], Expr::var(v.clone())));
                let exos = self
                    .exogenous
                    .iter()
                    .enumerate()
                    .map(|(k, e)| (self.loading[(i, k)], Expr::exo(e.clone())));
                Expr::linear_combination(vars.chain(exos), self.offset[i])
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct StructureReport {
    /// `(parent, child)` pairs.
    pub edges: Vec<(String, String)>,
    pub acyclic: bool,
    pub topological_order: Option<Vec<String>>,
    pub linear: Option<LinearSemView>,
}

impl Sem {
    pub fn new(
        variables: Vec<Variable>,
        equations: Vec<Expr>,
        noise: NoiseModel,
        catalog: InterventionCatalog,
        solver: SolverConfig,
    ) -> Result<Sem> {
        if !catalog.contains(&Intervention::null()) {
            return Err(Error::Validation("intervention catalog must contain the null intervention".into()));
        }
        Sem::from_parts(variables, equations, noise, catalog, solver)
    }

    /// Like [`Sem::new`] but without requiring ∅ in the catalog; used for
    /// intervened models whose catalog is an upper set.
    pub(crate) fn from_parts(
        variables: Vec<Variable>,
        equations: Vec<Expr>,
        noise: NoiseModel,
        catalog: InterventionCatalog,
        solver: SolverConfig,
    ) -> Result<Sem> {
        let sem = Sem {
            variables,
            equations,
            noise,
            catalog,
            solver,
        };
        sem.validate()?;
        Ok(sem)
    }

    pub fn builder() -> SemBuilder {
        SemBuilder::default()
    }

    fn validate(&self) -> Result<()> {
        if self.variables.len() != self.equations.len() {
            return Err(Error::Validation(format!(
                "{} variables but {} equations",
                self.variables.len(),
                self.equations.len()
            )));
        }
        let mut names = BTreeSet::new();
        for v in &self.variables {
            if v.name.is_empty() || !names.insert(v.name.as_str()) {
                return Err(Error::Validation(format!("duplicate or empty variable name `{}`", v.name)));
            }
            if self.noise.exo_index(&v.name).is_some() || self.noise.is_base(&v.name) {
                return Err(Error::Validation(format!(
                    "variable name `{}` collides with a noise name",
                    v.name
                )));
            }
        }
        for (v, eq) in self.variables.iter().zip(&self.equations) {
            for s in eq.symbols() {
                match &s {
                    Symbol::Var(n) if !names.contains(n.as_str()) => {
                        return Err(Error::UnresolvedReference(n.clone()))
                    }
                    Symbol::Exo(n) if self.noise.exo_index(n).is_none() => {
                        return Err(Error::UnresolvedReference(n.clone()))
                    }
                    Symbol::Noise(n) => {
                        return Err(Error::Validation(format!(
                            "equation of `{}` references base noise `{n}` directly; use an exogenous id",
                            v.name
                        )))
                    }
                    _ => {}
                }
            }
        }
        for fam in self.catalog.families() {
            for (t, d) in fam.targets.iter().zip(&fam.domains) {
                let Some(var) = self.variables.iter().find(|v| &v.name == t) else {
                    return Err(Error::UnresolvedReference(t.clone()));
                };
                if var.domain == Domain::Binary {
                    let ok = matches!(d, ValueDomain::Finite(vals) if vals.iter().all(|x| *x == 0.0 || *x == 1.0));
                    if !ok {
                        return Err(Error::Validation(format!(
                            "family `{}` sets binary variable `{t}` outside {{0,1}}",
                            fam.label
                        )));
                    }
                }
            }
        }
        self.solver.validate()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn equations(&self) -> &[Expr] {
        &self.equations
    }

    pub fn equation(&self, name: &str) -> Option<&Expr> {
        self.index_of(name).map(|i| &self.equations[i])
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn catalog(&self) -> &InterventionCatalog {
        &self.catalog
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn with_catalog(&self, catalog: InterventionCatalog) -> Result<Sem> {
        Sem::new(
            self.variables.clone(),
            self.equations.clone(),
            self.noise.clone(),
            catalog,
            self.solver,
        )
    }

    pub fn with_solver(&self, solver: SolverConfig) -> Result<Sem> {
        Sem::from_parts(
            self.variables.clone(),
            self.equations.clone(),
            self.noise.clone(),
            self.catalog.clone(),
            solver,
        )
    }

    /// Resolver for parsing expressions in this model's namespace.
    pub fn scope(&self) -> impl Fn(&str) -> Option<SymbolKind> + '_ {
        move |name| {
            if self.index_of(name).is_some() {
                Some(SymbolKind::Var)
            } else if self.noise.exo_index(name).is_some() {
                Some(SymbolKind::Exo)
            } else if self.noise.is_base(name) {
                Some(SymbolKind::Noise)
            } else {
                None
            }
        }
    }

    /// Indices of the variables occurring in the equation of variable `i`.
    pub fn parents(&self, i: usize) -> BTreeSet<usize> {
        self.equations[i]
            .variables()
            .iter()
            .filter_map(|n| self.index_of(n))
            .collect()
    }

    /// Variables (by index) whose equations mention `i`.
    pub fn children(&self, i: usize) -> BTreeSet<usize> {
        (0..self.variables.len()).filter(|&c| self.parents(c).contains(&i)).collect()
    }

    fn topological_order(&self, parents: &[BTreeSet<usize>]) -> Option<Vec<usize>> {
        let n = parents.len();
        let mut indegree: Vec<usize> = parents.iter().map(BTreeSet::len).collect();
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for c in (0..n).rev() {
                if parents[c].contains(&i) {
                    indegree[c] -= 1;
                    if indegree[c] == 0 {
                        ready.push(c);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        let parents: Vec<_> = (0..self.variables.len()).map(|i| self.parents(i)).collect();
        self.topological_order(&parents).is_some()
    }

    pub fn analyze_structure(&self) -> StructureReport {
        let parents: Vec<_> = (0..self.variables.len()).map(|i| self.parents(i)).collect();
        let mut edges = Vec::new();
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                edges.push((self.variables[p].name.clone(), self.variables[child].name.clone()));
            }
        }
        let order = self.topological_order(&parents);
        StructureReport {
            edges,
            acyclic: order.is_some(),
            topological_order: order.map(|o| o.into_iter().map(|i| self.variables[i].name.clone()).collect()),
            linear: self.linear_view(),
        }
    }

    /// Affine view of the equations, if every equation is affine in
    /// variables and exogenous ids.
    pub fn linear_view(&self) -> Option<LinearSemView> {
        let n = self.variables.len();
        let exo: Vec<String> = self.noise.exo_names().map(String::from).collect();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        let mut c = DMatrix::zeros(n, exo.len());
        for (i, eq) in self.equations.iter().enumerate() {
            let aff = eq.affine()?;
            b[i] = aff.offset;
            for (s, coef) in &aff.coefficients {
                match s {
                    Symbol::Var(name) => a[(i, self.index_of(name)?)] += coef,
                    Symbol::Exo(name) => c[(i, self.noise.exo_index(name)?)] += coef,
                    Symbol::Noise(_) => return None,
                }
            }
        }
        Some(LinearSemView {
            variables: self.names(),
            exogenous: exo,
            coefficients: a,
            offset: b,
            loading: c,
        })
    }

    pub fn check_intervention(&self, i: &Intervention) -> Result<()> {
        for (t, v) in i.targets() {
            let Some(var) = self.variables.iter().find(|x| &x.name == t) else {
                return Err(Error::UnresolvedReference(t.clone()));
            };
            if !v.is_finite() || (var.domain == Domain::Binary && *v != 0.0 && *v != 1.0) {
                return Err(Error::Validation(format!(
                    "value {v} is outside the domain of `{t}`"
                )));
            }
        }
        Ok(())
    }

    /// Replaces the equations of `i`'s targets by constants. The catalog of
    /// the result is the upper set `{ j : i ≤ j }`.
    pub fn apply_intervention(&self, i: &Intervention) -> Result<Sem> {
        self.check_intervention(i)?;
        let equations = self
            .variables
            .iter()
            .zip(&self.equations)
            .map(|(v, eq)| match i.get(&v.name) {
                Some(x) => Expr::Const(x),
                None => eq.clone(),
            })
            .collect();
        Sem::from_parts(
            self.variables.clone(),
            equations,
            self.noise.clone(),
            self.catalog.above(i),
            self.solver,
        )
    }

    /// Compiles the intervened system and certifies it is solvable.
    pub fn prepare(&self, i: &Intervention) -> Result<PreparedSolve<'_>> {
        self.check_intervention(i)?;
        let n = self.variables.len();
        let clamp: Vec<Option<f64>> = self.variables.iter().map(|v| i.get(&v.name)).collect();
        let compiled = self
            .equations
            .iter()
            .map(|eq| {
                compile(eq, &|s| match s {
                    Symbol::Var(name) => self.index_of(name).ok_or_else(|| Error::UnresolvedReference(name.clone())),
                    Symbol::Exo(name) => self
                        .noise
                        .exo_index(name)
                        .ok_or_else(|| Error::UnresolvedReference(name.clone())),
                    Symbol::Noise(name) => Err(Error::UnresolvedReference(name.clone())),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let parents: Vec<BTreeSet<usize>> = (0..n)
            .map(|k| if clamp[k].is_some() { BTreeSet::new() } else { self.parents(k) })
            .collect();
        let plan = match self.topological_order(&parents) {
            Some(order) => Plan::Ordered(order.into_iter().filter(|&k| clamp[k].is_none()).collect()),
            None => {
                let free: Vec<usize> = (0..n).filter(|&k| clamp[k].is_none()).collect();
                if let Some(view) = self.linear_view() {
                    let rho = iteration_radius(&view.coefficients, &free, self.solver.damping);
                    if rho >= 1.0 {
                        return Err(Error::Precondition(format!(
                            "cyclic system under {i} is not a contraction: iteration map has spectral radius {rho:.6}"
                        )));
                    }
                }
                Plan::Iterate(free)
            }
        };
        Ok(PreparedSolve {
            sem: self,
            clamp,
            compiled,
            plan,
        })
    }

    /// Solves the intervened equations for one exogenous realisation,
    /// ordered as `noise().exogenous()`.
    pub fn solve_given_noise(&self, i: &Intervention, exogenous: &[f64]) -> Result<Vec<f64>> {
        self.prepare(i)?.solve(exogenous)
    }

    /// `n` i.i.d. draws from `P_X^{do(i)}`. Identical `(i, n, seed)` give
    /// bit-identical output.
    pub fn sample(&self, i: &Intervention, n: usize, seed: u64) -> Result<SampleMatrix> {
        let prepared = self.prepare(i).map_err(|e| e.at(i))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(n * self.variables.len());
        let mut z = Vec::new();
        let mut e = Vec::new();
        for index in 0..n {
            self.noise.draw_base(&mut rng, &mut z);
            let x = self
                .noise
                .map_exogenous(&z, &mut e)
                .and_then(|_| prepared.solve(&e))
                .map_err(|source| Error::Draw {
                    index,
                    source: Box::new(source),
                })?;
            data.extend_from_slice(&x);
        }
        Ok(SampleMatrix::with_rows(self.names(), n, data))
    }
}

/// Spectral radius of `d·I + (1-d)·A_ff` restricted to the free block.
pub(crate) fn iteration_radius(a: &DMatrix<f64>, free: &[usize], damping: f64) -> f64 {
    let k = free.len();
    let m = DMatrix::from_fn(k, k, |r, c| {
        let base = (1.0 - damping) * a[(free[r], free[c])];
        if r == c {
            base + damping
        } else {
            base
        }
    });
    linalg::spectral_radius(&m)
}

#[derive(Debug, Clone)]
enum Plan {
    /// Evaluate free variables in topological order.
    Ordered(Vec<usize>),
    /// Fixed-point iteration over the free variables.
    Iterate(Vec<usize>),
}

/// An intervened system ready for repeated solves.
#[derive(Debug, Clone)]
pub struct PreparedSolve<'a> {
    sem: &'a Sem,
    clamp: Vec<Option<f64>>,
    compiled: Vec<Compiled>,
    plan: Plan,
}

impl PreparedSolve<'_> {
    pub fn is_iterative(&self) -> bool {
        matches!(self.plan, Plan::Iterate(_))
    }

    pub fn solve(&self, exo: &[f64]) -> Result<Vec<f64>> {
        let n = self.clamp.len();
        if exo.len() != self.sem.noise.exogenous().len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} exogenous values, got {}",
                self.sem.noise.exogenous().len(),
                exo.len()
            )));
        }
        let mut x: Vec<f64> = self.clamp.iter().map(|c| c.unwrap_or(0.0)).collect();
        match &self.plan {
            Plan::Ordered(order) => {
                for &k in order {
                    x[k] = self.compiled[k].eval(&x, exo, &[])?;
                }
            }
            Plan::Iterate(free) => {
                let cfg = self.sem.solver;
                let mut fx = vec![0.0; n];
                let mut converged = false;
                let mut residual = f64::INFINITY;
                for _ in 0..cfg.max_iterations {
                    residual = 0.0;
                    for &k in free {
                        fx[k] = self.compiled[k].eval(&x, exo, &[])?;
                        residual = f64::max(residual, (fx[k] - x[k]).abs());
                    }
                    if !residual.is_finite() {
                        break;
                    }
                    if residual < cfg.tolerance {
                        converged = true;
                        break;
                    }
                    for &k in free {
                        x[k] = cfg.damping * x[k] + (1.0 - cfg.damping) * fx[k];
                    }
                }
                if !converged {
                    return Err(Error::NonConvergence {
                        iterations: cfg.max_iterations,
                        residual,
                    });
                }
            }
        }
        for (v, val) in self.sem.variables.iter().zip(&x) {
            if v.domain == Domain::Binary && *val != 0.0 && *val != 1.0 {
                return Err(Error::Eval(format!("binary variable `{}` took value {val}", v.name)));
            }
        }
        Ok(x)
    }
}

/// Convenience builder parsing equation text.
#[derive(Debug, Default)]
pub struct SemBuilder {
    vars: Vec<(String, Domain, String)>,
    base: Vec<BaseNoise>,
    exo: Vec<(String, String)>,
    families: Vec<InterventionFamily>,
    solver: SolverConfig,
}

impl SemBuilder {
    pub fn noise(mut self, name: &str, dist: Distribution) -> Self {
        self.base.push(BaseNoise {
            name: name.into(),
            dist,
        });
        self
    }

    /// Exogenous id defined by an expression over base noises.
    pub fn exo(mut self, name: &str, expr: &str) -> Self {
        self.exo.push((name.into(), expr.into()));
        self
    }

    /// Exogenous id backed by its own base noise `u_<name>`.
    pub fn exo_dist(self, name: &str, dist: Distribution) -> Self {
        let base = format!("u_{name}");
        self.noise(&base, dist).exo(name, &base)
    }

    pub fn var(mut self, name: &str, equation: &str) -> Self {
        self.vars.push((name.into(), Domain::Real, equation.into()));
        self
    }

    pub fn binary(mut self, name: &str, equation: &str) -> Self {
        self.vars.push((name.into(), Domain::Binary, equation.into()));
        self
    }

    pub fn intervention(mut self, i: Intervention) -> Self {
        let label = i.to_string();
        self.families.push(InterventionFamily::single(label, &i));
        self
    }

    pub fn family(mut self, f: InterventionFamily) -> Self {
        self.families.push(f);
        self
    }

    pub fn solver(mut self, s: SolverConfig) -> Self {
        self.solver = s;
        self
    }

    /// Parses everything; ∅ is added to the catalog if no family contains it.
    pub fn build(self) -> Result<Sem> {
        let var_names: BTreeSet<String> = self.vars.iter().map(|v| v.0.clone()).collect();
        let exo_names: BTreeSet<String> = self.exo.iter().map(|e| e.0.clone()).collect();
        let base_names: BTreeSet<String> = self.base.iter().map(|b| b.name.clone()).collect();
        let resolve = |n: &str| {
            if var_names.contains(n) {
                Some(SymbolKind::Var)
            } else if exo_names.contains(n) {
                Some(SymbolKind::Exo)
            } else if base_names.contains(n) {
                Some(SymbolKind::Noise)
            } else {
                None
            }
        };
        let exogenous = self
            .exo
            .iter()
            .map(|(name, text)| {
                Ok(ExogenousDef {
                    name: name.clone(),
                    expr: Expr::parse(text, resolve)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let noise = NoiseModel::new(self.base, exogenous)?;
        let equations = self
            .vars
            .iter()
            .map(|(_, _, text)| Expr::parse(text, resolve))
            .collect::<Result<Vec<_>>>()?;
        let variables = self
            .vars
            .into_iter()
            .map(|(name, domain, _)| Variable { name, domain })
            .collect();
        let mut families = self.families;
        if !families.iter().any(|f| f.contains(&Intervention::null())) {
            families.insert(0, InterventionFamily::null("∅"));
        }
        let catalog = InterventionCatalog::new(families)?;
        Sem::new(variables, equations, noise, catalog, self.solver)
    }
}

/// Example 1: two light bulbs and a window.
pub fn lightbulbs() -> Sem {
    let half = Distribution::Bernoulli { p: 0.5 };
    Sem::builder()
        .exo_dist("E1", half)
        .exo_dist("E2", half)
        .exo_dist("E3", half)
        .binary("B1", "E1")
        .binary("B2", "E2")
        .binary("L", "or(B1, B2, E3)")
        .intervention(Intervention::new([("B1", 0.0)]))
        .intervention(Intervention::new([("B2", 0.0)]))
        .intervention(Intervention::new([("B1", 0.0), ("B2", 0.0)]))
        .build()
        .expect("lightbulb model is well-formed")
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cyclic() -> Sem {
        Sem::builder()
            .exo_dist("F1", Distribution::Normal { mean: 0.0, var: 1.0 })
            .exo_dist("F2", Distribution::Normal { mean: 0.0, var: 1.0 })
            .var("Y1", "0.5 * Y2 + F1")
            .var("Y2", "0.5 * Y1 + F2")
            .build()
            .unwrap()
    }

    #[test]
    fn lightbulb_structure() {
        let r = lightbulbs().analyze_structure();
        assert_eq!(
            r.edges,
            vec![("B1".to_string(), "L".to_string()), ("B2".to_string(), "L".to_string())]
        );
        assert!(r.acyclic);
        assert!(r.linear.is_none());
        assert_eq!(r.topological_order.unwrap().last().unwrap(), "L");
    }

    #[test]
    fn no_edges_when_no_variable_refs() {
        let s = Sem::builder()
            .exo_dist("E", Distribution::PointMass { value: 1.0 })
            .var("A", "E")
            .var("B", "2")
            .build()
            .unwrap();
        let r = s.analyze_structure();
        assert!(r.edges.is_empty() && r.acyclic);
    }

    #[test]
    fn mutual_reference_is_a_cycle() {
        let r = cyclic().analyze_structure();
        assert!(!r.acyclic);
        assert!(r.topological_order.is_none());
        let lin = r.linear.unwrap();
        assert_eq!(lin.coefficients[(0, 1)], 0.5);
        assert_eq!(lin.loading[(1, 1)], 1.0);
    }

    #[test]
    fn undeclared_reference_is_named() {
        let s = Sem::new(
            vec![Variable {
                name: "A".into(),
                domain: Domain::Real,
            }],
            vec![Expr::var("Q")],
            NoiseModel::new(vec![], vec![]).unwrap(),
            InterventionCatalog::explicit([]).unwrap(),
            SolverConfig::default(),
        );
        assert!(matches!(s, Err(Error::UnresolvedReference(n)) if n == "Q"));
    }

    #[test]
    fn intervening_replaces_equations() {
        let m = lightbulbs();
        let d = m.apply_intervention(&Intervention::new([("B1", 0.0)])).unwrap();
        assert_eq!(d.equation("B1").unwrap(), &Expr::Const(0.0));
        assert_eq!(d.equation("B2").unwrap(), m.equation("B2").unwrap());
        assert_eq!(d.equation("L").unwrap().to_string(), "or(B1, B2, E3)");
        assert_eq!(d.noise(), m.noise());
        assert_eq!(d.catalog().families().len(), 2);
        assert_eq!(m.apply_intervention(&Intervention::null()).unwrap(), m);
        assert!(m.apply_intervention(&Intervention::new([("Q", 0.0)])).is_err());
        assert!(m.apply_intervention(&Intervention::new([("B1", 0.5)])).is_err());
    }

    #[test]
    fn solve_examples() {
        let m = lightbulbs();
        assert_eq!(m.solve_given_noise(&Intervention::null(), &[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 1.0]);
        let c = cyclic();
        let y = c.solve_given_noise(&Intervention::null(), &[1.0, 1.0]).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-9 && (y[1] - 2.0).abs() < 1e-9);
        let y = c.solve_given_noise(&Intervention::new([("Y1", 0.0)]), &[7.0, 1.0]).unwrap();
        assert_eq!(y, vec![0.0, 1.0]);
    }

    #[test]
    fn non_contractive_cycle_is_refused() {
        let s = Sem::builder()
            .exo_dist("F1", Distribution::Normal { mean: 0.0, var: 1.0 })
            .exo_dist("F2", Distribution::Normal { mean: 0.0, var: 1.0 })
            .var("Y1", "2 * Y2 + F1")
            .var("Y2", "Y1 + F2")
            .build()
            .unwrap();
        assert!(matches!(s.prepare(&Intervention::null()), Err(Error::Precondition(_))));
        // clamping one side breaks the cycle
        assert!(s.solve_given_noise(&Intervention::new([("Y2", 1.0)]), &[0.0, 0.0]).is_ok());
    }

    #[test]
    fn nonlinear_divergence_is_reported() {
        let s = Sem::builder()
            .exo_dist("F", Distribution::Normal { mean: 0.0, var: 1.0 })
            .var("Y1", "Y2 * Y2 + F")
            .var("Y2", "Y1 + 1")
            .solver(SolverConfig {
                max_iterations: 50,
                ..SolverConfig::default()
            })
            .build()
            .unwrap();
        let err = s.solve_given_noise(&Intervention::null(), &[1.0]).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 50, .. }));
    }

    #[test]
    fn sampling_is_deterministic_and_tags_draws() {
        let m = lightbulbs();
        let a = m.sample(&Intervention::null(), 200, 9).unwrap();
        let b = m.sample(&Intervention::null(), 200, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, m.sample(&Intervention::null(), 200, 10).unwrap());

        let bad = Sem::builder()
            .exo_dist("E", Distribution::Normal { mean: 0.0, var: 1.0 })
            .var("A", "E")
            .binary("B", "or(A, 0)")
            .build()
            .unwrap();
        match bad.sample(&Intervention::null(), 10, 1) {
            Err(Error::Draw { index: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    fn arb_linear(n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let target = rng.gen_range(0.1..0.9);
        let norm = linalg::operator_norm(&a);
        a *= target / norm;
        let b = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        (a, b)
    }

    fn linear_sem(a: &DMatrix<f64>, b: &DVector<f64>) -> Sem {
        let n = a.nrows();
        let view = LinearSemView {
            variables: (0..n).map(|i| format!("X{i}")).collect(),
            exogenous: (0..n).map(|i| format!("E{i}")).collect(),
            coefficients: a.clone(),
            offset: b.clone(),
            loading: DMatrix::identity(n, n),
        };
        let noise = NoiseModel::independent(
            (0..n).map(|i| (format!("E{i}"), format!("U{i}"), Distribution::Normal { mean: 0.0, var: 1.0 })),
        )
        .unwrap();
        Sem::new(
            view.variables
                .iter()
                .map(|v| Variable {
                    name: v.clone(),
                    domain: Domain::Real,
                })
                .collect(),
            view.equations(),
            noise,
            InterventionCatalog::explicit([]).unwrap(),
            SolverConfig::default(),
        )
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fixed_point_matches_direct_solve(n in 1usize..=6, seed in any::<u64>(), mask in any::<u8>()) {
            let (a, b) = arb_linear(n, seed);
            let sem = linear_sem(&a, &b);
            let i = Intervention::new((0..n).filter(|k| mask & (1 << k) != 0).map(|k| (format!("X{k}"), k as f64 - 1.5)));
            let e: Vec<f64> = (0..n).map(|k| (k as f64 * 0.7).sin()).collect();
            let x = sem.solve_given_noise(&i, &e).unwrap();
            // oracle: (I - A_do) x = b_do + e_do
            let view = sem.linear_view().unwrap().intervene(&i);
            let rhs = &view.offset + &view.loading * DVector::from_vec(e.clone());
            let direct = linalg::solve_vec(&(DMatrix::identity(n, n) - &view.coefficients), &rhs).unwrap();
            prop_assert!(linalg::sup_norm(direct.iter().zip(&x).map(|(p, q)| p - q)) < 1e-9);
            for (name, v) in i.targets() {
                prop_assert_eq!(x[sem.index_of(name).unwrap()], *v);
            }
        }

        #[test]
        fn start_point_independence(n in 2usize..=6, seed in any::<u64>(), s1 in any::<u64>(), s2 in any::<u64>()) {
            use rand::Rng;
            let (a, b) = arb_linear(n, seed);
            let e: Vec<f64> = (0..n).map(|k| (k as f64).cos()).collect();
            let f = |x: &[f64]| -> Vec<f64> {
                (0..n).map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum::<f64>() + b[i] + e[i]).collect()
            };
            let run = |start: u64| {
                let mut rng = ChaCha8Rng::seed_from_u64(start);
                let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
                for _ in 0..10_000 {
                    let fx = f(&x);
                    let r = linalg::sup_norm(fx.iter().zip(&x).map(|(p, q)| p - q));
                    x = fx;
                    // error ≤ r·‖A‖/(1−‖A‖) ≤ 9r
                    if r < 1e-13 { break; }
                }
                x
            };
            let (x1, x2) = (run(s1), run(s2));
            prop_assert!(linalg::sup_norm(x1.iter().zip(&x2).map(|(p, q)| p - q)) < 1e-9);
            let solver = linear_sem(&a, &b).solve_given_noise(&Intervention::null(), &e).unwrap();
            prop_assert!(linalg::sup_norm(x1.iter().zip(&solver).map(|(p, q)| p - q)) < 1e-9);
        }

        #[test]
        fn intervention_idempotent_and_commuting(a in 0usize..3, b in 0usize..3, va in -2.0f64..2.0, vb in -2.0f64..2.0) {
            prop_assume!(a != b);
            let (am, bm) = arb_linear(3, 1);
            let sem = linear_sem(&am, &bm);
            let i = Intervention::new([(format!("X{a}"), va)]);
            let j = Intervention::new([(format!("X{b}"), vb)]);
            let once = sem.apply_intervention(&i).unwrap();
            prop_assert_eq!(&once.apply_intervention(&i).unwrap(), &once);
            let ij = once.apply_intervention(&j).unwrap();
            let ji = sem.apply_intervention(&j).unwrap().apply_intervention(&i).unwrap();
            prop_assert_eq!(ij.equations(), ji.equations());
            prop_assert_eq!(ij.catalog(), ji.catalog());
        }

        #[test]
        fn sampled_rows_satisfy_equations(seed in any::<u64>(), mask in 0u8..8) {
            let (a, b) = arb_linear(3, seed);
            let sem = linear_sem(&a, &b);
            let i = Intervention::new((0..3).filter(|k| mask & (1 << k) != 0).map(|k| (format!("X{k}"), 1.0)));
            let s = sem.sample(&i, 20, seed).unwrap();
            let view = sem.linear_view().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for row in s.iter_rows() {
                let e = sem.noise().draw(&mut rng).unwrap();
                for k in 0..3 {
                    let name = format!("X{k}");
                    if let Some(v) = i.get(&name) {
                        prop_assert_eq!(row[k], v);
                    } else {
                        let rhs: f64 = (0..3).map(|j| view.coefficients[(k, j)] * row[j]).sum::<f64>() + view.offset[k] + e[k];
                        prop_assert!((row[k] - rhs).abs() < 1e-9);
                    }
                }
            }
        }

        #[test]
        fn linear_view_reconstructs_equations(seed in any::<u64>()) {
            let (a, b) = arb_linear(4, seed);
            let sem = linear_sem(&a, &b);
            let view = sem.linear_view().unwrap();
            let rebuilt = linear_sem(&view.coefficients, &view.offset);
            prop_assert_eq!(rebuilt.linear_view().unwrap(), view);
        }
    }
}
