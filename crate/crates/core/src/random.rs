//! Seeded generators of valid random inputs, used by property tests and
//! demos.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::expr::Expr;
use crate::intervention::{Intervention, InterventionCatalog};
use crate::linalg;
use crate::noise::{BaseNoise, Distribution, ExogenousDef, NoiseModel};
use crate::sem::{Domain, Sem, SolverConfig, Variable};

#[derive(Debug, Clone, PartialEq)]
pub struct DagOptions {
    pub variables: usize,
    pub edge_probability: f64,
    /// Non-null interventions in the catalog (fewer if duplicates arise).
    pub interventions: usize,
    /// Probability that an exogenous variable also loads on another
    /// variable's base noise.
    pub mixing: f64,
    /// Variables the catalog never targets.
    pub avoid: BTreeSet<String>,
    /// Force `X1 → X2` and `X1 → X3`.
    pub common_parent: bool,
}

impl Default for DagOptions {
    fn default() -> Self {
        DagOptions {
            variables: 6,
            edge_probability: 0.4,
            interventions: 8,
            mixing: 0.2,
            avoid: BTreeSet::new(),
            common_parent: false,
        }
    }
}

const VALUES: [f64; 5] = [-1.0, 0.0, 0.5, 1.0, 2.0];

fn coefficient(rng: &mut impl Rng) -> f64 {
    let c: f64 = rng.gen_range(0.2..1.5);
    if rng.gen_bool(0.5) {
        c
    } else {
        -c
    }
}

/// Gaussian base noises `u1..un` and exogenous ids `E1..En`, each `E_i`
/// equal to `u_i` plus, with probability `mixing`, a multiple of another
/// base noise.
pub fn gaussian_noise(rng: &mut impl Rng, n: usize, mixing: f64) -> Result<NoiseModel> {
    let base: Vec<BaseNoise> = (1..=n)
        .map(|k| BaseNoise {
            name: format!("u{k}"),
            dist: Distribution::Normal {
                mean: rng.gen_range(-1.0..1.0),
                var: rng.gen_range(0.5..2.0),
            },
        })
        .collect();
    let exogenous = (1..=n)
        .map(|k| {
            let mut terms = vec![(1.0, Expr::noise(format!("u{k}")))];
            if n > 1 && rng.gen_bool(mixing) {
                let mut other = rng.gen_range(1..n);
                if other >= k {
                    other += 1;
                }
                terms.push((coefficient(rng), Expr::noise(format!("u{other}"))));
            }
            ExogenousDef {
                name: format!("E{k}"),
                expr: Expr::linear_combination(terms, 0.0),
            }
        })
        .collect();
    NoiseModel::new(base, exogenous)
}

/// Random distinct non-null interventions on `targetable`, at most three
/// targets each, values from a small grid.
pub fn interventions(rng: &mut impl Rng, targetable: &[String], count: usize) -> Vec<Intervention> {
    let mut out: Vec<Intervention> = Vec::new();
    if targetable.is_empty() {
        return out;
    }
    for _ in 0..count * 4 {
        if out.len() == count {
            break;
        }
        let k = rng.gen_range(1..=targetable.len().min(3));
        let targets: Vec<&String> = targetable.choose_multiple(rng, k).collect();
        let i = Intervention::new(targets.into_iter().map(|t| (t.clone(), *VALUES.choose(rng).expect("nonempty"))));
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// An acyclic linear-Gaussian model over `X1..Xn`, in topological order.
pub fn linear_gaussian_dag(rng: &mut impl Rng, opts: &DagOptions) -> Result<Sem> {
    let n = opts.variables;
    let names: Vec<String> = (1..=n).map(|k| format!("X{k}")).collect();
    let noise = gaussian_noise(rng, n, opts.mixing)?;
    let equations = (0..n)
        .map(|i| {
            let mut terms = Vec::new();
            for j in 0..i {
                let forced = opts.common_parent && j == 0 && (i == 1 || i == 2);
                if forced || rng.gen_bool(opts.edge_probability) {
                    terms.push((coefficient(rng), Expr::var(names[j].clone())));
                }
            }
            terms.push((1.0, Expr::exo(format!("E{}", i + 1))));
            Expr::linear_combination(terms, 0.0)
        })
        .collect();
    let targetable: Vec<String> = names.iter().filter(|v| !opts.avoid.contains(*v)).cloned().collect();
    let catalog = InterventionCatalog::explicit(interventions(rng, &targetable, opts.interventions))?;
    let variables = names
        .into_iter()
        .map(|name| Variable {
            name,
            domain: Domain::Real,
        })
        .collect();
    Sem::new(variables, equations, noise, catalog, SolverConfig::default())
}

/// Up to `max` variables whose children all lie in the returned set.
pub fn childless_set(rng: &mut impl Rng, sem: &Sem, max: usize) -> BTreeSet<String> {
    let names = sem.names();
    let mut z: BTreeSet<usize> = BTreeSet::new();
    let target = rng.gen_range(1..=max.min(names.len().saturating_sub(1)).max(1));
    while z.len() < target {
        let open: Vec<usize> = (0..names.len())
            .filter(|k| !z.contains(k) && sem.children(*k).iter().all(|c| z.contains(c) || c == k))
            .collect();
        match open.choose(rng) {
            Some(&k) => {
                z.insert(k);
            }
            None => break,
        }
    }
    z.into_iter().map(|k| names[k].clone()).collect()
}

/// An `m × n` matrix whose columns all sum to `a`.
pub fn equal_column_sums(rng: &mut impl Rng, m: usize, n: usize, a: f64) -> DMatrix<f64> {
    let mut mat = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-2.0..2.0));
    for j in 0..n {
        let rest: f64 = (0..m - 1).map(|i| mat[(i, j)]).sum();
        mat[(m - 1, j)] = a - rest;
    }
    mat
}

/// A random `n × n` matrix scaled to the given operator 2-norm.
pub fn contraction(rng: &mut impl Rng, n: usize, norm: f64) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = linalg::operator_norm(&a);
        if q > 1e-6 {
            return a * (norm / q);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_models_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let m = linear_gaussian_dag(&mut rng, &DagOptions::default()).unwrap();
            assert!(m.is_acyclic());
            assert!(m.catalog().families().len() <= 9);
            let z = childless_set(&mut rng, &m, 3);
            for k in 0..m.variables().len() {
                if !z.contains(&m.names()[k]) {
                    assert!(m.equations()[k].variables().is_disjoint(&z));
                }
            }
        }
    }

    #[test]
    fn forced_common_parent_and_avoided_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let opts = DagOptions {
            common_parent: true,
            avoid: BTreeSet::from(["X1".to_string()]),
            ..DagOptions::default()
        };
        let m = linear_gaussian_dag(&mut rng, &opts).unwrap();
        assert!(m.equation("X2").unwrap().variables().contains("X1"));
        assert!(m.equation("X3").unwrap().variables().contains("X1"));
        assert!(!m.catalog().targeted().contains("X1"));
    }

    #[test]
    fn matrix_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = equal_column_sums(&mut rng, 4, 3, 1.5);
        for s in a.row_sum().iter() {
            assert!((s - 1.5).abs() < 1e-12);
        }
        let c = contraction(&mut rng, 4, 0.9);
        assert!((linalg::operator_norm(&c) - 0.9).abs() < 1e-12);
    }
}
