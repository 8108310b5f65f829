use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use super::{certify, CertifiedTriple};
use crate::error::{Error, Result};
use crate::expr::{Expr, Symbol};
use crate::intervention::{InterventionCatalog, InterventionFamily};
use crate::noise::{ExogenousDef, NoiseModel};
use crate::sem::Sem;
use crate::transform::{same_family, CheckConfig, InterventionMap, OmegaRule, Transformation};

fn check_declared(sem: &Sem, z: &BTreeSet<String>) -> Result<()> {
    match z.iter().find(|v| sem.index_of(v).is_none()) {
        Some(v) => Err(Error::UnresolvedReference(v.clone())),
        None => Ok(()),
    }
}

fn describe(z: &BTreeSet<String>) -> String {
    z.iter().cloned().collect::<Vec<_>>().join(", ")
}

/// Singletons are labelled by their member, other families by their
/// targets; clashes get a numeric suffix.
pub(crate) fn family_label(f: &InterventionFamily, taken: &[InterventionFamily]) -> String {
    let base = if f.is_null() {
        "∅".to_string()
    } else if f.size() == Some(1) {
        f.enumerate(1).expect("singleton")[0].to_string()
    } else {
        format!("do({})", f.targets.join(", "))
    };
    let mut label = base.clone();
    let mut k = 2;
    while taken.iter().any(|g| g.label == label) {
        label = format!("{base} #{k}");
        k += 1;
    }
    label
}

/// The model restricted to the variables outside `z`, with `equations`
/// replacing the originals.
fn restrict(
    sem: &Sem,
    z: &BTreeSet<String>,
    equations: &[Expr],
    noise: &NoiseModel,
    catalog: InterventionCatalog,
) -> Result<Sem> {
    let mut variables = Vec::new();
    let mut kept = Vec::new();
    for (v, eq) in sem.variables().iter().zip(equations) {
        if !z.contains(&v.name) {
            variables.push(v.clone());
            kept.push(eq.clone());
        }
    }
    let used: BTreeSet<String> = kept
        .iter()
        .flat_map(Expr::symbols)
        .filter_map(|s| match s {
            Symbol::Exo(n) => Some(n),
            _ => None,
        })
        .collect();
    let noise = noise.restrict(&used)?;
    Sem::new(variables, kept, noise, catalog, *sem.solver())
}

fn projection(sem: &Sem, z: &BTreeSet<String>) -> Result<Transformation> {
    let names = sem.names();
    let keep: Vec<&str> = names.iter().filter(|n| !z.contains(*n)).map(String::as_str).collect();
    Transformation::projection(names.clone(), &keep)
}

/// Drops variables that no remaining equation mentions. Dropped variables
/// may feed each other; the order of removal does not matter then.
pub fn marginalize_childless(sem: &Sem, z: &BTreeSet<String>, cfg: &CheckConfig) -> Result<CertifiedTriple> {
    check_declared(sem, z)?;
    for (k, v) in sem.variables().iter().enumerate() {
        if z.contains(&v.name) {
            continue;
        }
        if let Some(p) = sem.equations()[k].variables().into_iter().find(|p| z.contains(p)) {
            return Err(Error::Precondition(format!("`{p}` has child `{}`", v.name)));
        }
    }
    let mut families: Vec<InterventionFamily> = Vec::new();
    let mut rules = Vec::new();
    for f in sem.catalog().families() {
        let keep: Vec<usize> = (0..f.targets.len()).filter(|&k| !z.contains(&f.targets[k])).collect();
        let mut g = InterventionFamily {
            label: f.label.clone(),
            targets: keep.iter().map(|&k| f.targets[k].clone()).collect(),
            domains: keep.iter().map(|&k| f.domains[k].clone()).collect(),
        };
        let g = match families.iter().find(|h| same_family(h, &g)) {
            Some(h) => h.clone(),
            None => {
                if keep.len() < f.targets.len() || families.iter().any(|h| h.label == g.label) {
                    g.label = family_label(&g, &families);
                }
                families.push(g.clone());
                g
            }
        };
        let mut m = DMatrix::zeros(keep.len(), f.targets.len());
        for (r, &k) in keep.iter().enumerate() {
            m[(r, k)] = 1.0;
        }
        rules.push(OmegaRule::new(f.clone(), g, m, DVector::zeros(keep.len()))?);
    }
    let model = restrict(sem, z, sem.equations(), sem.noise(), InterventionCatalog::new(families)?)?;
    let tau = projection(sem, z)?;
    certify(
        sem,
        model,
        tau,
        InterventionMap::new(rules, vec![]),
        format!("marginalize_childless(z = {{{}}})", describe(z)),
        cfg,
    )
}

/// Gives each listed affine equation that mixes several exogenous ids a
/// single new exogenous variable `E_<name>` for that mixture, so that
/// dependence created by substitution shows in the noise model.
fn fold_exogenous(sem: &Sem, rows: &BTreeSet<usize>, equations: &mut [Expr]) -> Result<NoiseModel> {
    let noise = sem.noise();
    let mut taken: BTreeSet<String> = noise.exo_names().map(str::to_string).collect();
    taken.extend(noise.base().iter().map(|b| b.name.clone()));
    taken.extend(sem.names());
    let mut exogenous = noise.exogenous().to_vec();
    for &j in rows {
        let Some(mut aff) = equations[j].affine() else { continue };
        let exo: Vec<(String, f64)> = aff
            .coefficients
            .iter()
            .filter_map(|(s, c)| match s {
                Symbol::Exo(n) if *c != 0.0 => Some((n.clone(), *c)),
                _ => None,
            })
            .collect();
        if exo.len() < 2 {
            continue;
        }
        let expr = Expr::linear_combination(
            exo.iter().map(|(n, c)| (*c, noise.exo_expr(n).expect("declared").clone())),
            0.0,
        )
        .simplified();
        let base = format!("E_{}", sem.names()[j]);
        let mut name = base.clone();
        let mut k = 2;
        while taken.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        taken.insert(name.clone());
        aff.coefficients.retain(|s, _| !matches!(s, Symbol::Exo(_)));
        aff.coefficients.insert(Symbol::Exo(name.clone()), 1.0);
        equations[j] = aff.to_expr();
        exogenous.push(ExogenousDef { name, expr });
    }
    NoiseModel::new(noise.base().to_vec(), exogenous)
}

/// Substitutes never-intervened variables into their children (acyclic
/// models only). A kept affine equation that ends up mixing several
/// exogenous ids gets one new exogenous variable for the mixture.
pub fn marginalize_nonintervened(sem: &Sem, z: &BTreeSet<String>, cfg: &CheckConfig) -> Result<CertifiedTriple> {
    check_declared(sem, z)?;
    let structure = sem.analyze_structure();
    let order = structure
        .topological_order
        .ok_or_else(|| Error::Precondition("marginalising non-intervened variables needs an acyclic model".into()))?;
    let targeted = sem.catalog().targeted();
    if let Some(v) = z.iter().find(|v| targeted.contains(*v)) {
        return Err(Error::Precondition(format!("`{v}` is intervened upon by the catalog")));
    }
    let mut equations = sem.equations().to_vec();
    let mut changed = BTreeSet::new();
    for name in order.iter().rev().filter(|n| z.contains(*n)) {
        let k = sem.index_of(name).expect("declared");
        let replacement = equations[k].clone();
        for (j, eq) in equations.iter_mut().enumerate() {
            if j != k && eq.variables().contains(name) {
                changed.insert(j);
                *eq = eq
                    .substitute(&|s| match s {
                        Symbol::Var(n) if n == name => Some(replacement.clone()),
                        _ => None,
                    })
                    .simplified();
            }
        }
    }
    let kept: BTreeSet<usize> = changed.into_iter().filter(|j| !z.contains(&sem.names()[*j])).collect();
    let noise = fold_exogenous(sem, &kept, &mut equations)?;
    let model = restrict(sem, z, &equations, &noise, sem.catalog().clone())?;
    let rules = sem
        .catalog()
        .families()
        .iter()
        .map(|f| OmegaRule::identity(f.clone(), f.clone()))
        .collect::<Result<Vec<_>>>()?;
    let tau = projection(sem, z)?;
    certify(
        sem,
        model,
        tau,
        InterventionMap::new(rules, vec![]),
        format!("marginalize_nonintervened(z = {{{}}})", describe(z)),
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervention::Intervention;
    use crate::noise::Distribution;
    use crate::transform::check_diagram;

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn chain() -> Sem {
        let n01 = Distribution::Normal { mean: 0.0, var: 1.0 };
        Sem::builder()
            .exo_dist("E1", n01)
            .exo_dist("E2", n01)
            .exo_dist("E3", n01)
            .var("X1", "E1")
            .var("X2", "X1 + E2")
            .var("X3", "X2 + E3")
            .intervention(Intervention::new([("X1", 1.0)]))
            .build()
            .unwrap()
    }

    #[test]
    fn lightbulb_window_marginalised() {
        let m = crate::sem::lightbulbs();
        let t = marginalize_childless(&m, &set(&["L"]), &CheckConfig { samples: 20_000, ..CheckConfig::new(0) }).unwrap();
        assert_eq!(t.model.names(), vec!["B1", "B2"]);
        assert_eq!(t.model.catalog().families().len(), 4);
        assert_eq!(t.model.noise().exogenous().len(), 2);
        let d = check_diagram(
            &m,
            &t.model,
            &t.tau,
            &t.omega,
            &Intervention::null(),
            &Intervention::new([("B1", 0.0)]),
            &CheckConfig { samples: 20_000, ..CheckConfig::new(1) },
        )
        .unwrap();
        assert!(d.commutes);
    }

    #[test]
    fn empty_drop_is_identity() {
        let m = chain();
        let t = marginalize_childless(&m, &BTreeSet::new(), &CheckConfig::new(0)).unwrap();
        assert_eq!(t.model, m);
        assert_eq!(t.tau, Transformation::identity(m.names()));
        let t = marginalize_nonintervened(&m, &BTreeSet::new(), &CheckConfig::new(0)).unwrap();
        assert_eq!(t.model, m);
    }

    #[test]
    fn parent_cannot_be_dropped_as_childless() {
        match marginalize_childless(&chain(), &set(&["X2"]), &CheckConfig::new(0)) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("X3")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chain_middle_absorbed() {
        let t = marginalize_nonintervened(&chain(), &set(&["X2"]), &CheckConfig::new(0)).unwrap();
        assert_eq!(t.model.equation("X3").unwrap().to_string(), "X1 + E_X3");
        let law = crate::law::closed_form_law(&t.model, &Intervention::new([("X1", 1.0)])).unwrap();
        assert_eq!(law.cov()[(1, 1)], 2.0);
        assert!(t.report.probes.iter().all(|p| p.verdict.method == crate::law::Method::ClosedForm));
    }

    #[test]
    fn intervened_or_cyclic_inputs_are_refused() {
        assert!(matches!(
            marginalize_nonintervened(&chain(), &set(&["X1"]), &CheckConfig::new(0)),
            Err(Error::Precondition(_))
        ));
        let n01 = Distribution::Normal { mean: 0.0, var: 1.0 };
        let cyc = Sem::builder()
            .exo_dist("F1", n01)
            .exo_dist("F2", n01)
            .var("Y1", "0.5 * Y2 + F1")
            .var("Y2", "0.5 * Y1 + F2")
            .build()
            .unwrap();
        assert!(matches!(
            marginalize_nonintervened(&cyc, &set(&["Y1"]), &CheckConfig::new(0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn common_parent_leaves_dependent_noise() {
        let n01 = Distribution::Normal { mean: 0.0, var: 1.0 };
        let m = Sem::builder()
            .exo_dist("E0", n01)
            .exo_dist("E1", n01)
            .exo_dist("E2", n01)
            .exo_dist("E3", n01)
            .var("X0", "E0")
            .var("X1", "X0 + E1")
            .var("X2", "2 * X0 + E2")
            .var("X3", "X1 + X2 + E3")
            .intervention(Intervention::new([("X1", 1.0)]))
            .intervention(Intervention::new([("X2", -1.0)]))
            .build()
            .unwrap();
        let t = marginalize_nonintervened(&m, &set(&["X0"]), &CheckConfig::new(0)).unwrap();
        assert!(t.report.exact);
        let law = crate::law::closed_form_law(&t.model, &Intervention::null()).unwrap();
        // X1 and X2 now share E0
        assert_eq!(law.cov()[(0, 1)], 2.0);
        assert_eq!(t.model.equation("X1").unwrap().to_string(), "E_X1");
        let (_, cov) = t.model.noise().gaussian_moments().unwrap();
        let names: Vec<&str> = t.model.noise().exo_names().collect();
        let (a, b) = (
            names.iter().position(|n| *n == "E_X1").unwrap(),
            names.iter().position(|n| *n == "E_X2").unwrap(),
        );
        assert_eq!(cov[(a, b)], 2.0);
    }
}
