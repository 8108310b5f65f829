use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{certify, CertifiedTriple};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::intervention::{Intervention, InterventionCatalog, InterventionFamily, ValueDomain};
use crate::law::GaussianLaw;
use crate::linalg;
use crate::noise::NoiseModel;
use crate::samples::SampleMatrix;
use crate::sem::{iteration_radius, Domain, Sem, SolverConfig, Variable};
use crate::transform::{CheckConfig, InterventionMap, LawSource, OmegaRule, Transformation};

/// Damping levels tried, in order, for the equilibrium model's solver.
const DAMPING: [f64; 9] = [0.0, 0.5, 0.75, 0.9, 0.95, 0.99, 0.995, 0.999, 0.9999];

/// `X_{t+1} = A X_t + E` with one noise draw `E` held for all `t`, and
/// interventions that clamp coordinates for all time.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalSpec {
    pub variables: Vec<String>,
    pub a: DMatrix<f64>,
    /// Exogenous id `k` drives variable `k`.
    pub noise: NoiseModel,
    pub catalog: InterventionCatalog,
    pub horizon: usize,
    /// Largest accepted `‖x_T − x_{T−1}‖_∞`.
    pub tolerance: f64,
}

impl DynamicalSpec {
    /// The horizon defaults to enough steps for `‖A‖₂^T ≤ 1e-12`, and at
    /// least 200.
    pub fn new(variables: Vec<String>, a: DMatrix<f64>, noise: NoiseModel, catalog: InterventionCatalog) -> Result<Self> {
        let n = variables.len();
        if a.shape() != (n, n) || noise.exogenous().len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} variables, A is {:?}, {} exogenous ids",
                a.shape(),
                noise.exogenous().len()
            )));
        }
        if let Some(t) = catalog.targeted().into_iter().find(|t| !variables.contains(t)) {
            return Err(Error::UnresolvedReference(t));
        }
        let q = linalg::operator_norm(&a);
        let horizon = if q > 0.0 && q < 1.0 {
            ((1e-12f64).ln() / q.ln()).ceil().max(200.0) as usize
        } else {
            200
        };
        Ok(DynamicalSpec {
            variables,
            a,
            noise,
            catalog,
            horizon,
            tolerance: 1e-6,
        })
    }

    /// Every clamp set `J ⊆ {1..n}`, each with values over the reals.
    pub fn all_clamps(variables: &[String]) -> Result<InterventionCatalog> {
        let n = variables.len();
        let mut families = Vec::with_capacity(1 << n);
        for mask in 0u64..(1 << n) {
            let targets: Vec<String> = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| variables[k].clone()).collect();
            let label = if targets.is_empty() {
                "∅".to_string()
            } else {
                format!("do({})", targets.join(", "))
            };
            let k = targets.len();
            families.push(InterventionFamily::new(label, targets, vec![ValueDomain::reals(); k])?);
        }
        InterventionCatalog::new(families)
    }

    pub fn operator_norm(&self) -> f64 {
        linalg::operator_norm(&self.a)
    }

    /// The contraction certificate `‖A‖₂ < 1`, plus `A_ii ≠ 1`.
    pub fn check_contraction(&self) -> Result<f64> {
        let q = self.operator_norm();
        if !(q < 1.0) {
            return Err(Error::Precondition(format!("‖A‖₂ = {q} is not below 1")));
        }
        if let Some(k) = (0..self.variables.len()).find(|&k| self.a[(k, k)] == 1.0) {
            return Err(Error::Precondition(format!("A[{k}][{k}] = 1")));
        }
        Ok(q)
    }

    fn split(&self, i: &Intervention) -> Result<(Vec<usize>, Vec<Option<f64>>)> {
        let mut clamp = vec![None; self.variables.len()];
        for (t, v) in i.targets() {
            let k = self
                .variables
                .iter()
                .position(|n| n == t)
                .ok_or_else(|| Error::UnresolvedReference(t.clone()))?;
            clamp[k] = Some(*v);
        }
        let free = (0..self.variables.len()).filter(|&k| clamp[k].is_none()).collect();
        Ok((free, clamp))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x_0, …, x_T`.
    pub states: Vec<Vec<f64>>,
    pub limit: Vec<f64>,
    /// `‖x_T − x_{T−1}‖_∞`.
    pub residual: f64,
}

fn run(a: &DMatrix<f64>, clamp: &[Option<f64>], e: &[f64], x0: &[f64], steps: usize, keep: bool) -> Trajectory {
    let n = clamp.len();
    let pin = |x: &mut Vec<f64>| {
        for (k, c) in clamp.iter().enumerate() {
            if let Some(v) = c {
                x[k] = *v;
            }
        }
    };
    let mut x = x0.to_vec();
    pin(&mut x);
    let mut states = Vec::new();
    if keep {
        states.push(x.clone());
    }
    let mut residual = f64::INFINITY;
    let mut next = vec![0.0; n];
    for _ in 0..steps {
        for (r, out) in next.iter_mut().enumerate() {
            *out = e[r] + (0..n).map(|c| a[(r, c)] * x[c]).sum::<f64>();
        }
        pin(&mut next);
        residual = linalg::sup_norm(next.iter().zip(&x).map(|(p, q)| p - q));
        std::mem::swap(&mut x, &mut next);
        if keep {
            states.push(x.clone());
        }
    }
    Trajectory {
        states,
        limit: x,
        residual,
    }
}

/// Iterates `x_{t+1} = g(A x_t + e)` for `steps` steps, where `g`
/// overwrites clamped coordinates (in `x_0` too).
pub fn simulate_dynamics(
    spec: &DynamicalSpec,
    i: &Intervention,
    e: &[f64],
    x0: &[f64],
    steps: usize,
) -> Result<Trajectory> {
    spec.check_contraction()?;
    let n = spec.variables.len();
    if e.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} variables, noise of length {}, start of length {}",
            e.len(),
            x0.len()
        )));
    }
    let (_, clamp) = spec.split(i)?;
    let t = run(&spec.a, &clamp, e, x0, steps, true);
    if !(t.residual <= spec.tolerance) {
        return Err(Error::NonConvergence {
            iterations: steps,
            residual: t.residual,
        });
    }
    Ok(t)
}

impl LawSource for DynamicalSpec {
    fn labels(&self) -> Vec<String> {
        self.variables.clone()
    }

    fn catalog(&self) -> &InterventionCatalog {
        &self.catalog
    }

    /// Law of the limit, `x_F = (I − A_FF)⁻¹ (A_FC x_C + e_F)`.
    fn closed_form(&self, i: &Intervention) -> Result<Option<GaussianLaw>> {
        let (mu_e, cov_e) = match self.noise.gaussian_moments() {
            Ok(m) => m,
            Err(Error::NotApplicable(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let (free, clamp) = self.split(i)?;
        let n = self.variables.len();
        let k = free.len();
        let m = DMatrix::from_fn(k, k, |r, c| {
            let id = if r == c { 1.0 } else { 0.0 };
            id - self.a[(free[r], free[c])]
        });
        let g = linalg::solve(&m, &DMatrix::identity(k, k)).ok_or_else(|| Error::Singular {
            intervention: i.clone(),
            detail: "I − A on the free block".into(),
        })?;
        let drive = DVector::from_fn(k, |r, _| {
            mu_e[free[r]]
                + (0..n)
                    .filter_map(|c| clamp[c].map(|v| self.a[(free[r], c)] * v))
                    .sum::<f64>()
        });
        let mean_f = &g * drive;
        let cov_ff = DMatrix::from_fn(k, k, |r, c| cov_e[(free[r], free[c])]);
        let cov_f = &g * cov_ff * g.transpose();
        let mut mean = DVector::zeros(n);
        let mut cov = DMatrix::zeros(n, n);
        for (r, &p) in free.iter().enumerate() {
            mean[p] = mean_f[r];
            for (c, &q) in free.iter().enumerate() {
                cov[(p, q)] = cov_f[(r, c)];
            }
        }
        for (p, v) in clamp.iter().enumerate() {
            if let Some(v) = v {
                mean[p] = *v;
            }
        }
        Ok(Some(GaussianLaw::new(self.variables.clone(), mean, cov)?))
    }

    /// Simulated limits from `x_0 = 0`, one noise draw per row.
    fn draw(&self, i: &Intervention, n: usize, seed: u64) -> Result<SampleMatrix> {
        self.check_contraction()?;
        let (_, clamp) = self.split(i)?;
        let dim = self.variables.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = Vec::new();
        let mut e = Vec::new();
        let x0 = vec![0.0; dim];
        let mut data = Vec::with_capacity(n * dim);
        for index in 0..n {
            self.noise.draw_base(&mut rng, &mut z);
            self.noise.map_exogenous(&z, &mut e).map_err(|source| Error::Draw {
                index,
                source: Box::new(source),
            })?;
            let t = run(&self.a, &clamp, &e, &x0, self.horizon, false);
            if !(t.residual <= self.tolerance) {
                return Err(Error::Draw {
                    index,
                    source: Box::new(Error::NonConvergence {
                        iterations: self.horizon,
                        residual: t.residual,
                    }),
                });
            }
            data.extend_from_slice(&t.limit);
        }
        SampleMatrix::new(self.variables.clone(), data)
    }
}

/// `Y^i = Σ_{j≠i} A_ij/(1−A_ii) Y^j + E_i/(1−A_ii)` with the spec's noise and
/// clamp families. The solver damping is the smallest listed level for
/// which every clamp set's iteration contracts.
pub fn equilibrium_model(spec: &DynamicalSpec) -> Result<Sem> {
    spec.check_contraction()?;
    let n = spec.variables.len();
    let b = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            0.0
        } else {
            spec.a[(r, c)] / (1.0 - spec.a[(r, r)])
        }
    });
    let equations: Vec<Expr> = (0..n)
        .map(|r| {
            let exo = Expr::exo(spec.noise.exogenous()[r].name.clone());
            Expr::linear_combination(
                (0..n)
                    .filter(|&c| b[(r, c)] != 0.0)
                    .map(|c| (b[(r, c)], Expr::var(spec.variables[c].clone())))
                    .chain([(1.0 / (1.0 - spec.a[(r, r)]), exo)]),
                0.0,
            )
        })
        .collect();
    let clamp_sets: BTreeSet<BTreeSet<String>> = spec.catalog.families().iter().map(|f| f.target_set()).collect();
    let frees: Vec<Vec<usize>> = clamp_sets
        .iter()
        .map(|j| (0..n).filter(|k| !j.contains(&spec.variables[*k])).collect())
        .collect();
    let worst = |d: f64| frees.iter().map(|f| iteration_radius(&b, f, d)).fold(0.0, f64::max);
    let (damping, rho) = DAMPING
        .iter()
        .map(|&d| (d, worst(d)))
        .find(|(_, r)| *r < 1.0)
        .ok_or_else(|| Error::Precondition("no damping level makes the equilibrium iteration contract".into()))?;
    let defaults = SolverConfig::default();
    let max_iterations = if rho > 0.0 {
        ((40.0 / -rho.ln()).ceil() as usize).max(defaults.max_iterations)
    } else {
        defaults.max_iterations
    };
    let variables = spec
        .variables
        .iter()
        .map(|v| Variable {
            name: v.clone(),
            domain: Domain::Real,
        })
        .collect();
    Sem::new(
        variables,
        equations,
        spec.noise.clone(),
        spec.catalog.clone(),
        SolverConfig {
            damping,
            max_iterations,
            ..defaults
        },
    )
}

/// The equilibrium model with `τ` the identity on limit coordinates and `ω`
/// the identity on clamp families, certified against simulated limits.
pub fn equilibrate(spec: &DynamicalSpec, cfg: &CheckConfig) -> Result<CertifiedTriple> {
    let q = spec.check_contraction()?;
    let model = equilibrium_model(spec)?;
    let tau = Transformation::identity(spec.variables.clone());
    let rules = spec
        .catalog
        .families()
        .iter()
        .map(|f| OmegaRule::identity(f.clone(), f.clone()))
        .collect::<Result<Vec<_>>>()?;
    certify(
        spec,
        model,
        tau,
        InterventionMap::new(rules, vec![]),
        format!("equilibrate(n = {}, ‖A‖₂ = {q:.6})", spec.variables.len()),
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Symbol;
    use crate::noise::Distribution;

    fn gaussian(n: usize) -> NoiseModel {
        NoiseModel::independent((1..=n).map(|k| (format!("E{k}"), format!("u_E{k}"), Distribution::Normal { mean: 0.5, var: 1.0 })))
            .unwrap()
    }

    fn spec(a: DMatrix<f64>) -> DynamicalSpec {
        let n = a.nrows();
        let vars: Vec<String> = (1..=n).map(|k| format!("Y{k}")).collect();
        let catalog = DynamicalSpec::all_clamps(&vars).unwrap();
        DynamicalSpec::new(vars, a, gaussian(n), catalog).unwrap()
    }

    #[test]
    fn two_variable_coefficients() {
        let s = spec(DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.1, 0.3]));
        let m = equilibrium_model(&s).unwrap();
        let y1 = m.equation("Y1").unwrap().affine().unwrap();
        let y2 = m.equation("Y2").unwrap().affine().unwrap();
        assert!((y1.coefficient(&Symbol::Var("Y2".into())) - 0.4).abs() < 1e-15);
        assert!((y1.coefficient(&Symbol::Exo("E1".into())) - 2.0).abs() < 1e-15);
        assert!((y2.coefficient(&Symbol::Var("Y1".into())) - 1.0 / 7.0).abs() < 1e-15);
        assert!((y2.coefficient(&Symbol::Exo("E2".into())) - 10.0 / 7.0).abs() < 1e-15);
        let t = equilibrate(&s, &CheckConfig::new(0)).unwrap();
        assert!(t.report.exact);
    }

    #[test]
    fn uncoupled_is_acyclic() {
        let m = equilibrium_model(&spec(DMatrix::zeros(3, 3))).unwrap();
        assert!(m.is_acyclic());
        assert_eq!(m.equation("Y2").unwrap(), &Expr::exo("E2"));
    }

    #[test]
    fn expanding_dynamics_rejected() {
        let s = spec(DMatrix::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.1]));
        match equilibrate(&s, &CheckConfig::new(0)) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("1.2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scalar_geometric_series() {
        let s = spec(DMatrix::from_element(1, 1, 0.5));
        let t = simulate_dynamics(&s, &Intervention::null(), &[1.0], &[0.0], 60).unwrap();
        assert!((t.limit[0] - 2.0).abs() < 1e-9);
        assert_eq!(t.states.len(), 61);
    }

    #[test]
    fn clamps_hold_every_step() {
        let s = spec(DMatrix::from_row_slice(2, 2, &[0.3, 0.4, 0.2, 0.1]));
        let i = Intervention::new([("Y2", -3.0)]);
        let t = simulate_dynamics(&s, &i, &[1.0, 5.0], &[7.0, 7.0], 100).unwrap();
        assert!(t.states.iter().all(|x| x[1] == -3.0));
        // Y1 = 0.3 Y1 - 1.2 + 1
        assert!((t.limit[0] + 0.2 / 0.7).abs() < 1e-9);
    }

    #[test]
    fn short_horizon_reports_nonconvergence() {
        let s = spec(DMatrix::from_element(1, 1, 0.9));
        assert!(matches!(
            simulate_dynamics(&s, &Intervention::null(), &[1.0], &[0.0], 5),
            Err(Error::NonConvergence { .. })
        ));
    }
}
