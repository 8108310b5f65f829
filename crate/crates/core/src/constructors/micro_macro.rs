use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use super::marginal::family_label;
use super::{certify, CertifiedTriple};
use crate::error::{Error, Result};
use crate::expr::{Expr, Symbol};
use crate::intervention::{InterventionCatalog, InterventionFamily, ValueDomain};
use crate::noise::{Distribution, ExogenousDef, NoiseModel};
use crate::sem::{Domain, Sem, Variable};
use crate::transform::{same_family, CheckConfig, InterventionMap, OmegaRule, Transformation};

pub const W_HAT: &str = "W_hat";
pub const Z_HAT: &str = "Z_hat";
pub const E_HAT: &str = "E_hat";
pub const F_HAT: &str = "F_hat";

/// Column sums may differ by at most this much.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// Largest finite family whose averaged image is enumerated.
const MAX_FINITE_IMAGE: usize = 4096;

/// A two-layer model `W_j = E_j`, `Z_i = Σ_j A_ij W_j + F_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroMacroShape {
    pub w: Vec<String>,
    pub z: Vec<String>,
    /// `m × n`, rows indexed by `z`, columns by `w`.
    pub a: DMatrix<f64>,
    /// `E_j` and `F_i` as expressions over base noises.
    pub e: Vec<Expr>,
    pub f: Vec<Expr>,
}

impl MicroMacroShape {
    pub fn detect(sem: &Sem) -> Result<MicroMacroShape> {
        let names = sem.names();
        let mut w = Vec::new();
        let mut rest = Vec::new();
        for (k, eq) in sem.equations().iter().enumerate() {
            if eq.variables().is_empty() {
                w.push(k);
            } else {
                rest.push(k);
            }
        }
        if w.is_empty() || rest.is_empty() {
            return Err(Error::Structural("need at least one W (noise only) and one Z equation".into()));
        }
        let w_names: Vec<String> = w.iter().map(|&k| names[k].clone()).collect();
        let mut a = DMatrix::zeros(rest.len(), w.len());
        let mut f = Vec::new();
        for (r, &k) in rest.iter().enumerate() {
            let aff = sem.equations()[k]
                .affine()
                .ok_or_else(|| Error::Structural(format!("equation of `{}` is not affine", names[k])))?;
            let mut remainder = aff.clone();
            for (s, c) in &aff.coefficients {
                if let Symbol::Var(v) = s {
                    let col = w_names
                        .iter()
                        .position(|n| n == v)
                        .ok_or_else(|| Error::Structural(format!("`{}` depends on `{v}`, which is not a W", names[k])))?;
                    a[(r, col)] = *c;
                    remainder.coefficients.remove(s);
                }
            }
            f.push(to_base(sem, &remainder.to_expr()));
        }
        let e = w.iter().map(|&k| to_base(sem, &sem.equations()[k])).collect();
        Ok(MicroMacroShape {
            w: w_names,
            z: rest.iter().map(|&k| names[k].clone()).collect(),
            a,
            e,
            f,
        })
    }

    pub fn column_sums(&self) -> DVector<f64> {
        self.a.row_sum().transpose()
    }

    /// `max − min` of the column sums.
    pub fn spread(&self) -> f64 {
        let s = self.column_sums();
        s.max() - s.min()
    }
}

/// Rewrites exogenous references as their base-noise expressions.
fn to_base(sem: &Sem, e: &Expr) -> Expr {
    e.substitute(&|s| match s {
        Symbol::Exo(n) => sem.noise().exo_expr(n).cloned(),
        _ => None,
    })
}

fn mean(exprs: &[Expr]) -> Expr {
    let k = exprs.len() as f64;
    Expr::Sum(exprs.iter().map(|e| Expr::Product(vec![Expr::Const(1.0 / k), e.clone()])).collect()).simplified()
}

/// The domain of `(1/k) Σ v_i` for `v` ranging over the product of `ds`.
fn averaged_domain(ds: &[ValueDomain]) -> Result<ValueDomain> {
    let k = ds.len() as f64;
    if ds.iter().all(ValueDomain::is_finite) {
        let mut acc = vec![0.0];
        for d in ds {
            let ValueDomain::Finite(vals) = d else { unreachable!() };
            acc = acc.iter().flat_map(|s| vals.iter().map(move |v| s + v)).collect();
            acc.sort_by(f64::total_cmp);
            acc.dedup();
            if acc.len() > MAX_FINITE_IMAGE {
                return Err(Error::Precondition(format!(
                    "averaged finite domain exceeds {MAX_FINITE_IMAGE} values"
                )));
            }
        }
        let mut out: Vec<f64> = acc.iter().map(|s| s / k).collect();
        out.dedup();
        return Ok(ValueDomain::Finite(out));
    }
    let mut low = Some(0.0);
    let mut high = Some(0.0);
    for d in ds {
        match d {
            ValueDomain::Interval { low: l, high: h } => {
                low = low.zip(*l).map(|(a, b)| a + b);
                high = high.zip(*h).map(|(a, b)| a + b);
            }
            ValueDomain::Finite(_) => {
                return Err(Error::Precondition("family mixes finite and interval coordinates".into()));
            }
        }
    }
    Ok(ValueDomain::Interval {
        low: low.map(|v| v / k),
        high: high.map(|v| v / k),
    })
}

/// `W_j = E_j`, `Z_i = Σ_j A_ij W_j + F_i` with independent noises and the
/// catalog {∅, do(W=w), do(Z=z), do(W=w, Z=z)} over the reals.
pub fn two_layer_model(a: &DMatrix<f64>, e: &[Distribution], f: &[Distribution]) -> Result<Sem> {
    let (m, n) = a.shape();
    if e.len() != n || f.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "A is {m}×{n} with {} E and {} F noises",
            e.len(),
            f.len()
        )));
    }
    let w: Vec<String> = (1..=n).map(|j| format!("W{j}")).collect();
    let z: Vec<String> = (1..=m).map(|i| format!("Z{i}")).collect();
    let mut b = Sem::builder();
    for (j, d) in e.iter().enumerate() {
        b = b.exo_dist(&format!("E{}", j + 1), *d);
    }
    for (i, d) in f.iter().enumerate() {
        b = b.exo_dist(&format!("F{}", i + 1), *d);
    }
    for (j, name) in w.iter().enumerate() {
        b = b.var(name, &format!("E{}", j + 1));
    }
    for (i, name) in z.iter().enumerate() {
        // zero coefficients are kept so that Z stays distinguishable from W
        let terms = (0..n)
            .map(|j| match a[(i, j)] {
                c if c == 1.0 => Expr::var(w[j].clone()),
                c => Expr::Product(vec![Expr::Const(c), Expr::var(w[j].clone())]),
            })
            .chain([Expr::exo(format!("F{}", i + 1))]);
        b = b.var(name, &Expr::Sum(terms.collect()).to_string());
    }
    let reals = |k: usize| vec![ValueDomain::reals(); k];
    let wz: Vec<String> = w.iter().chain(&z).cloned().collect();
    b.family(InterventionFamily::new("do(W)", w.clone(), reals(n))?)
        .family(InterventionFamily::new("do(Z)", z.clone(), reals(m))?)
        .family(InterventionFamily::new("do(W, Z)", wz, reals(n + m))?)
        .build()
}

/// The macro model for `sem`, using the mean column sum as `a`, without
/// checking the column sums or certifying the result.
pub fn micro_macro_model(sem: &Sem) -> Result<(Sem, Transformation, InterventionMap, MicroMacroShape)> {
    let shape = MicroMacroShape::detect(sem)?;
    let (n, m) = (shape.w.len(), shape.z.len());
    let a = shape.column_sums().mean();

    let exogenous = vec![
        ExogenousDef {
            name: E_HAT.into(),
            expr: mean(&shape.e),
        },
        ExogenousDef {
            name: F_HAT.into(),
            expr: mean(&shape.f),
        },
    ];
    let used: BTreeSet<String> = exogenous
        .iter()
        .flat_map(|e| e.expr.symbols())
        .map(|s| s.name().to_string())
        .collect();
    let base = sem.noise().base().iter().filter(|b| used.contains(&b.name)).cloned().collect();
    let noise = NoiseModel::new(base, exogenous)?;

    let names = sem.names();
    let col = |v: &str| names.iter().position(|n| n == v).expect("declared");
    let mut t = DMatrix::zeros(2, names.len());
    for v in &shape.w {
        t[(0, col(v))] = 1.0 / n as f64;
    }
    for v in &shape.z {
        t[(1, col(v))] = 1.0 / m as f64;
    }
    let tau = Transformation::affine(names.clone(), vec![W_HAT.into(), Z_HAT.into()], t, DVector::zeros(2))?;

    let w_set: BTreeSet<&String> = shape.w.iter().collect();
    let z_set: BTreeSet<&String> = shape.z.iter().collect();
    let mut families: Vec<InterventionFamily> = Vec::new();
    let mut rules = Vec::new();
    for f in sem.catalog().families() {
        let on_w: Vec<usize> = (0..f.targets.len()).filter(|&k| w_set.contains(&f.targets[k])).collect();
        let on_z: Vec<usize> = (0..f.targets.len()).filter(|&k| z_set.contains(&f.targets[k])).collect();
        let full = |idx: &[usize], size: usize| idx.is_empty() || idx.len() == size;
        if !full(&on_w, n) || !full(&on_z, m) {
            return Err(Error::Structural(format!(
                "family `{}` must target none or all of W and none or all of Z",
                f.label
            )));
        }
        let mut targets = Vec::new();
        let mut domains = Vec::new();
        let mut rows = Vec::new();
        for (name, idx) in [(W_HAT, &on_w), (Z_HAT, &on_z)] {
            if idx.is_empty() {
                continue;
            }
            targets.push(name.to_string());
            domains.push(averaged_domain(&idx.iter().map(|&k| f.domains[k].clone()).collect::<Vec<_>>())?);
            let mut row = vec![0.0; f.targets.len()];
            for &k in idx.iter() {
                row[k] = 1.0 / idx.len() as f64;
            }
            rows.push(row);
        }
        let mut g = InterventionFamily::new(String::new(), targets, domains)?;
        let g = match families.iter().find(|h| same_family(h, &g)) {
            Some(h) => h.clone(),
            None => {
                g.label = family_label(&g, &families);
                families.push(g.clone());
                g
            }
        };
        let matrix = DMatrix::from_fn(rows.len(), f.targets.len(), |r, c| rows[r][c]);
        rules.push(OmegaRule::new(f.clone(), g, matrix, DVector::zeros(rows.len()))?);
    }

    let model = Sem::new(
        vec![
            Variable {
                name: W_HAT.into(),
                domain: Domain::Real,
            },
            Variable {
                name: Z_HAT.into(),
                domain: Domain::Real,
            },
        ],
        vec![
            Expr::exo(E_HAT),
            Expr::linear_combination([(a * n as f64 / m as f64, Expr::var(W_HAT)), (1.0, Expr::exo(F_HAT))], 0.0),
        ],
        noise,
        InterventionCatalog::new(families)?,
        *sem.solver(),
    )?;
    Ok((model, tau, InterventionMap::new(rules, vec![]), shape))
}

/// Averages a two-layer linear model whose coefficient columns share one
/// sum `a`. The macro slope is `a·n/m`.
pub fn aggregate_micro_macro(sem: &Sem, cfg: &CheckConfig) -> Result<CertifiedTriple> {
    let (model, tau, omega, shape) = micro_macro_model(sem)?;
    let spread = shape.spread();
    if !(spread <= COLUMN_SUM_TOL) {
        return Err(Error::Precondition(format!(
            "column sums of A differ by up to {spread:e} (sums {:?})",
            shape.column_sums().as_slice()
        )));
    }
    certify(
        sem,
        model,
        tau,
        omega,
        format!("aggregate_micro_macro(n = {}, m = {})", shape.w.len(), shape.z.len()),
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervention::Intervention;
    use crate::law::closed_form_law;

    fn normals(k: usize, var: f64) -> Vec<Distribution> {
        (0..k).map(|i| Distribution::Normal { mean: i as f64, var }).collect()
    }

    #[test]
    fn symmetric_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        let sem = two_layer_model(&a, &normals(2, 1.0), &normals(2, 0.5)).unwrap();
        let t = aggregate_micro_macro(&sem, &CheckConfig::new(0)).unwrap();
        let aff = t.model.equation(Z_HAT).unwrap().affine().unwrap();
        // a·n/m with a = 4, n = m = 2
        assert_eq!(aff.coefficient(&Symbol::Var(W_HAT.into())), 4.0);
        assert!(t.report.exact);
        let w = Intervention::new([("W1", 1.0), ("W2", 3.0)]);
        assert_eq!(t.omega.apply(&w).unwrap(), Intervention::new([(W_HAT, 2.0)]));
    }

    #[test]
    fn zero_coupling_is_independent() {
        let a = DMatrix::zeros(3, 2);
        let sem = two_layer_model(&a, &normals(2, 1.0), &normals(3, 1.0)).unwrap();
        let t = aggregate_micro_macro(&sem, &CheckConfig::new(0)).unwrap();
        let law = closed_form_law(&t.model, &Intervention::null()).unwrap();
        assert_eq!(law.cov()[(0, 1)], 0.0);
        assert_eq!(t.model.equation(Z_HAT).unwrap().variables().len(), 0);
    }

    #[test]
    fn unequal_column_sums_are_refused() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 2.0]);
        let sem = two_layer_model(&a, &normals(2, 1.0), &normals(2, 1.0)).unwrap();
        match aggregate_micro_macro(&sem, &CheckConfig::new(0)) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("1e0"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partial_w_family_is_structural() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let sem = two_layer_model(&a, &normals(2, 1.0), &normals(1, 1.0))
            .unwrap()
            .with_catalog(
                InterventionCatalog::new(vec![
                    InterventionFamily::null("∅"),
                    InterventionFamily::new("do(W1)", vec!["W1".into()], vec![ValueDomain::reals()]).unwrap(),
                ])
                .unwrap(),
            )
            .unwrap();
        assert!(matches!(micro_macro_model(&sem), Err(Error::Structural(_))));
    }

    #[test]
    fn finite_and_bounded_domains_average() {
        let d = averaged_domain(&[ValueDomain::Finite(vec![0.0, 1.0]), ValueDomain::Finite(vec![0.0, 1.0])]).unwrap();
        assert_eq!(d, ValueDomain::Finite(vec![0.0, 0.5, 1.0]));
        let d = averaged_domain(&[ValueDomain::interval(0.0, 2.0), ValueDomain::reals()]).unwrap();
        assert_eq!(d, ValueDomain::reals());
        let d = averaged_domain(&[ValueDomain::interval(0.0, 2.0), ValueDomain::interval(-2.0, 0.0)]).unwrap();
        assert_eq!(d, ValueDomain::interval(-1.0, 1.0));
    }

    #[test]
    fn perturbed_column_fails_on_nonconstant_w() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, 2.0, 1.0, 1.5, 0.0]);
        let mut bad = a.clone();
        bad[(0, 1)] += 1.0;
        let sem = two_layer_model(&bad, &normals(3, 1.0), &normals(2, 1.0)).unwrap();
        let (model, tau, omega, _) = micro_macro_model(&sem).unwrap();
        let r = crate::transform::check_exact(&sem, &model, &tau, &omega, &CheckConfig::new(3)).unwrap();
        assert!(!r.exact);
        assert!(r.probes.iter().any(|p| {
            let v: Vec<f64> = ["W1", "W2", "W3"].iter().filter_map(|w| p.intervention.get(w)).collect();
            !p.verdict.equal && v.len() == 3 && v.iter().any(|x| *x != v[0])
        }));
    }
}
