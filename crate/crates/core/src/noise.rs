//! Exogenous noise: independent base noises plus a deterministic map from
//! base noises to (possibly dependent) exogenous variables.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::expr::{compile, Compiled, Expr, Symbol};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Bernoulli { p: f64 },
    /// Parameterised by mean and variance.
    Normal { mean: f64, var: f64 },
    Uniform { low: f64, high: f64 },
    PointMass { value: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Bernoulli { p } => (0.0..=1.0).contains(&p),
            Distribution::Normal { mean, var } => mean.is_finite() && var.is_finite() && var >= 0.0,
            Distribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Distribution::PointMass { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid distribution parameters {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Bernoulli { p } => p,
            Distribution::Normal { mean, .. } => mean,
            Distribution::Uniform { low, high } => 0.5 * (low + high),
            Distribution::PointMass { value } => value,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Bernoulli { p } => p * (1.0 - p),
            Distribution::Normal { var, .. } => var,
            Distribution::Uniform { low, high } => (high - low).powi(2) / 12.0,
            Distribution::PointMass { .. } => 0.0,
        }
    }

    /// Normal and point-mass laws; affine images of these stay Gaussian.
    pub fn is_gaussian(&self) -> bool {
        matches!(self, Distribution::Normal { .. } | Distribution::PointMass { .. })
    }

    pub fn is_binary(&self) -> bool {
        match *self {
            Distribution::Bernoulli { .. } => true,
            Distribution::PointMass { value } => value == 0.0 || value == 1.0,
            _ => false,
        }
    }

    /// Every distribution consumes exactly one draw from the stream, so the
    /// stream position of a base noise does not depend on the others' kinds.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Distribution::Bernoulli { p } => {
                let u: f64 = rng.gen();
                if u < p {
                    1.0
                } else {
                    0.0
                }
            }
            Distribution::Normal { mean, var } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + var.sqrt() * z
            }
            Distribution::Uniform { low, high } => {
                let u: f64 = rng.gen();
                low + (high - low) * u
            }
            Distribution::PointMass { value } => {
                let _: u64 = rng.gen();
                value
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseNoise {
    pub name: String,
    pub dist: Distribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousDef {
    pub name: String,
    /// Expression over base-noise ids only.
    pub expr: Expr,
}

/// `P_E` realised generatively: draw independent base noises, then map them
/// through one expression per exogenous id.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    base: Vec<BaseNoise>,
    exogenous: Vec<ExogenousDef>,
    compiled: Vec<Compiled>,
}

/// `e = loading * z + offset`, with `z` the independent base noises.
#[derive(Debug, Clone)]
pub struct AffineNoise {
    pub loading: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl PartialEq for NoiseModel {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base && self.exogenous == other.exogenous
    }
}

impl NoiseModel {
    pub fn new(base: Vec<BaseNoise>, exogenous: Vec<ExogenousDef>) -> Result<NoiseModel> {
        let mut seen = std::collections::BTreeSet::new();
        for b in &base {
            b.dist.validate()?;
            if b.name.is_empty() || !seen.insert(b.name.clone()) {
                return Err(Error::Validation(format!("duplicate or empty base noise name `{}`", b.name)));
            }
        }
        for e in &exogenous {
            if e.name.is_empty() || !seen.insert(e.name.clone()) {
                return Err(Error::Validation(format!(
                    "exogenous id `{}` is empty or collides with another noise name",
                    e.name
                )));
            }
        }
        let compiled = exogenous
            .iter()
            .map(|e| {
                compile(&e.expr, &|s| match s {
                    Symbol::Noise(n) => base
                        .iter()
                        .position(|b| &b.name == n)
                        .ok_or_else(|| Error::UnresolvedReference(n.clone())),
                    other => Err(Error::Validation(format!(
                        "exogenous map of `{}` may reference base noises only, found `{}`",
                        e.name,
                        other.name()
                    ))),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NoiseModel {
            base,
            exogenous,
            compiled,
        })
    }

    /// One independent base noise per exogenous id, `E_i = U_i`.
    pub fn independent(items: impl IntoIterator<Item = (String, String, Distribution)>) -> Result<NoiseModel> {
        let mut base = Vec::new();
        let mut exo = Vec::new();
        for (exo_name, base_name, dist) in items {
            exo.push(ExogenousDef {
                name: exo_name,
                expr: Expr::Noise(base_name.clone()),
            });
            base.push(BaseNoise { name: base_name, dist });
        }
        NoiseModel::new(base, exo)
    }

    pub fn base(&self) -> &[BaseNoise] {
        &self.base
    }

    pub fn exogenous(&self) -> &[ExogenousDef] {
        &self.exogenous
    }

    pub fn exo_names(&self) -> impl Iterator<Item = &str> {
        self.exogenous.iter().map(|e| e.name.as_str())
    }

    pub fn exo_index(&self, name: &str) -> Option<usize> {
        self.exogenous.iter().position(|e| e.name == name)
    }

    pub fn exo_expr(&self, name: &str) -> Option<&Expr> {
        self.exogenous.iter().find(|e| e.name == name).map(|e| &e.expr)
    }

    pub fn is_base(&self, name: &str) -> bool {
        self.base.iter().any(|b| b.name == name)
    }

    /// Draws the base noises, in declaration order.
    pub fn draw_base(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.base.iter().map(|b| b.dist.sample(rng)));
    }

    pub fn map_exogenous(&self, base: &[f64], out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        for c in &self.compiled {
            out.push(c.eval(&[], &[], base)?);
        }
        Ok(())
    }

    /// Draws one joint realisation of the exogenous variables.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let mut z = Vec::with_capacity(self.base.len());
        self.draw_base(rng, &mut z);
        let mut e = Vec::with_capacity(self.exogenous.len());
        self.map_exogenous(&z, &mut e)?;
        Ok(e)
    }

    /// Affine form of the exogenous map, if every exogenous id is affine in
    /// the base noises.
    pub fn affine(&self) -> Option<AffineNoise> {
        let k = self.exogenous.len();
        let q = self.base.len();
        let mut loading = DMatrix::zeros(k, q);
        let mut offset = DVector::zeros(k);
        for (i, e) in self.exogenous.iter().enumerate() {
            let a = e.expr.affine()?;
            offset[i] = a.offset;
            for (j, b) in self.base.iter().enumerate() {
                loading[(i, j)] = a.coefficient(&Symbol::Noise(b.name.clone()));
            }
        }
        Some(AffineNoise { loading, offset })
    }

    /// Mean and covariance of the exogenous vector when it is an affine image
    /// of Gaussian (or point-mass) base noises.
    pub fn gaussian_moments(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if let Some(b) = self.base.iter().find(|b| !b.dist.is_gaussian()) {
            return Err(Error::NotApplicable(format!(
                "base noise `{}` is {:?}, not Gaussian",
                b.name, b.dist
            )));
        }
        let aff = self
            .affine()
            .ok_or_else(|| Error::NotApplicable("exogenous map is not affine in the base noises".into()))?;
        let mz = DVector::from_iterator(self.base.len(), self.base.iter().map(|b| b.dist.mean()));
        let vz = DMatrix::from_diagonal(&DVector::from_iterator(
            self.base.len(),
            self.base.iter().map(|b| b.dist.variance()),
        ));
        let mean = &aff.loading * mz + &aff.offset;
        let cov = &aff.loading * vz * aff.loading.transpose();
        Ok((mean, cov))
    }

    /// Keeps only the listed exogenous ids and the base noises they use.
    pub fn restrict(&self, keep: &std::collections::BTreeSet<String>) -> Result<NoiseModel> {
        let exogenous: Vec<ExogenousDef> = self
            .exogenous
            .iter()
            .filter(|e| keep.contains(&e.name))
            .cloned()
            .collect();
        let used: std::collections::BTreeSet<String> = exogenous
            .iter()
            .flat_map(|e| e.expr.symbols())
            .map(|s| s.name().to_string())
            .collect();
        let base = self.base.iter().filter(|b| used.contains(&b.name)).cloned().collect();
        NoiseModel::new(base, exogenous)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn dependent() -> NoiseModel {
        NoiseModel::new(
            vec![
                BaseNoise {
                    name: "U1".into(),
                    dist: Distribution::Normal { mean: 1.0, var: 4.0 },
                },
                BaseNoise {
                    name: "U3".into(),
                    dist: Distribution::Normal { mean: 0.0, var: 1.0 },
                },
            ],
            vec![
                ExogenousDef {
                    name: "E1".into(),
                    expr: Expr::noise("U1"),
                },
                ExogenousDef {
                    name: "E2".into(),
                    expr: Expr::Neg(Box::new(Expr::noise("U1"))),
                },
                ExogenousDef {
                    name: "E3".into(),
                    expr: Expr::noise("U3"),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn dependent_exogenous_share_base_draws() {
        let m = dependent();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let e = m.draw(&mut rng).unwrap();
            assert_eq!(e[0], -e[1]);
        }
    }

    #[test]
    fn gaussian_moments_of_dependent_map() {
        let (mean, cov) = dependent().gaussian_moments().unwrap();
        assert_eq!(mean.as_slice(), &[1.0, -1.0, 0.0]);
        assert_eq!(cov[(0, 0)], 4.0);
        assert_eq!(cov[(0, 1)], -4.0);
        assert_eq!(cov[(2, 2)], 1.0);
        assert_eq!(cov[(0, 2)], 0.0);
    }

    #[test]
    fn rejects_variable_refs_and_bad_params() {
        let bad = NoiseModel::new(
            vec![],
            vec![ExogenousDef {
                name: "E1".into(),
                expr: Expr::var("X1"),
            }],
        );
        assert!(matches!(bad, Err(Error::Validation(_))));
        let p = NoiseModel::independent([("E".into(), "U".into(), Distribution::Bernoulli { p: 1.5 })]);
        assert!(p.is_err());
        let unknown = NoiseModel::new(
            vec![],
            vec![ExogenousDef {
                name: "E1".into(),
                expr: Expr::noise("U9"),
            }],
        );
        assert!(matches!(unknown, Err(Error::UnresolvedReference(n)) if n == "U9"));
    }

    #[test]
    fn non_gaussian_moments_not_applicable() {
        let m = NoiseModel::independent([("E".into(), "U".into(), Distribution::Bernoulli { p: 0.5 })]).unwrap();
        assert!(matches!(m.gaussian_moments(), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn restrict_drops_unused_base_noises() {
        let r = dependent().restrict(&["E3".to_string()].into()).unwrap();
        assert_eq!(r.base().len(), 1);
        assert_eq!(r.exo_names().collect::<Vec<_>>(), vec!["E3"]);
    }
}
