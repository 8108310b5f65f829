//! Interventional distributions: closed-form Gaussian laws, empirical laws,
//! push-forwards and equality decisions.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};

use crate::energy::{energy_test, EnergyConfig, EnergyPath};
use crate::error::{Error, Result};
use crate::intervention::Intervention;
use crate::linalg;
use crate::samples::SampleMatrix;
use crate::sem::Sem;
use crate::transform::Transformation;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLaw {
    labels: Vec<String>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianLaw {
    pub fn new(labels: Vec<String>, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<GaussianLaw> {
        let d = labels.len();
        if mean.len() != d || cov.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "{d} labels, mean of length {}, covariance {:?}",
                mean.len(),
                cov.shape()
            )));
        }
        let scale = cov.amax().max(1.0);
        if (&cov - cov.transpose()).amax() > 1e-9 * scale {
            return Err(Error::Validation("covariance is not symmetric".into()));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        if d > 0 {
            let low = cov.clone().symmetric_eigenvalues().min();
            if low < -1e-12 * scale {
                return Err(Error::Validation(format!(
                    "covariance has negative eigenvalue {low:e}"
                )));
            }
        }
        Ok(GaussianLaw { labels, mean, cov })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Draws via `μ + V·sqrt(max(Λ, 0))·z`; singular directions stay exact.
    pub fn sample(&self, n: usize, seed: u64) -> SampleMatrix {
        let d = self.dim();
        let eig = self.cov.clone().symmetric_eigen();
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let x = &self.mean + &root * z;
            data.extend(x.iter());
        }
        SampleMatrix::with_rows(self.labels.clone(), n, data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    pub samples: SampleMatrix,
    pub seed: u64,
    pub intervention: Intervention,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Gaussian(GaussianLaw),
    Empirical(EmpiricalLaw),
}

impl Law {
    pub fn labels(&self) -> &[String] {
        match self {
            Law::Gaussian(g) => g.labels(),
            Law::Empirical(e) => e.samples.labels(),
        }
    }

    pub fn dim(&self) -> usize {
        self.labels().len()
    }
}

/// `P_X^{do(i)}` in closed form for affine models with Gaussian noise.
pub fn closed_form_law(sem: &Sem, i: &Intervention) -> Result<GaussianLaw> {
    sem.check_intervention(i)?;
    let view = sem
        .linear_view()
        .ok_or_else(|| Error::NotApplicable("some structural equation is not affine".into()))?
        .intervene(i);
    let (me, ce) = sem.noise().gaussian_moments()?;
    let n = view.variables.len();
    let m = DMatrix::identity(n, n) - &view.coefficients;
    let inv = linalg::solve(&m, &DMatrix::identity(n, n)).ok_or_else(|| Error::Singular {
        intervention: i.clone(),
        detail: "I - A_do is singular".into(),
    })?;
    let mean = &inv * (&view.offset + &view.loading * me);
    let g = &inv * &view.loading;
    let cov = &g * ce * g.transpose();
    GaussianLaw::new(view.variables, mean, cov)
}

/// `n` draws of `P_X^{do(i)}` wrapped as a law.
pub fn empirical_law(sem: &Sem, i: &Intervention, n: usize, seed: u64) -> Result<EmpiricalLaw> {
    Ok(EmpiricalLaw {
        samples: sem.sample(i, n, seed)?,
        seed,
        intervention: i.clone(),
    })
}

/// The law of `τ(X)`.
pub fn pushforward(law: &Law, tau: &Transformation) -> Result<Law> {
    if law.labels() != tau.source() {
        return Err(Error::DimensionMismatch(format!(
            "law over {:?} but τ expects {:?}",
            law.labels(),
            tau.source()
        )));
    }
    match law {
        Law::Gaussian(g) => {
            let (t, c) = tau
                .as_affine()
                .ok_or_else(|| Error::NotApplicable("τ is not affine; sample instead".into()))?;
            let mean = &t * g.mean() + c;
            let cov = &t * g.cov() * t.transpose();
            Ok(Law::Gaussian(GaussianLaw::new(tau.target().to_vec(), mean, cov)?))
        }
        Law::Empirical(e) => Ok(Law::Empirical(EmpiricalLaw {
            samples: tau.apply_samples(&e.samples)?,
            seed: e.seed,
            intervention: e.intervention.clone(),
        })),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareConfig {
    /// Sup-norm tolerance on mean and covariance differences.
    pub tol: f64,
    pub alpha: f64,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            tol: 1e-9,
            alpha: 0.01,
            permutations: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    EnergyTest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualityVerdict {
    pub method: Method,
    pub equal: bool,
    /// Closed form: largest moment difference. Energy test: the p-value.
    pub statistic: f64,
    /// Closed form: `tol` (equal iff statistic ≤ tol). Energy test: `alpha`
    /// (equal iff p-value > alpha).
    pub threshold: f64,
    pub detail: String,
}

pub fn compare_laws(a: &Law, b: &Law, cfg: &CompareConfig) -> Result<EqualityVerdict> {
    if a.labels() != b.labels() {
        return Err(Error::DimensionMismatch(format!(
            "laws over {:?} and {:?}",
            a.labels(),
            b.labels()
        )));
    }
    match (a, b) {
        (Law::Gaussian(p), Law::Gaussian(q)) => {
            let dm = linalg::sup_norm((p.mean() - q.mean()).iter().copied());
            let dc = linalg::sup_norm((p.cov() - q.cov()).iter().copied());
            let statistic = dm.max(dc);
            Ok(EqualityVerdict {
                method: Method::ClosedForm,
                equal: statistic <= cfg.tol,
                statistic,
                threshold: cfg.tol,
                detail: format!("mean diff {dm:e}, covariance diff {dc:e}"),
            })
        }
        _ => {
            let rows = |l: &Law, other: &Law, salt: u64| match l {
                Law::Empirical(e) => e.samples.clone(),
                Law::Gaussian(g) => {
                    let n = match other {
                        Law::Empirical(e) => e.samples.rows(),
                        Law::Gaussian(_) => unreachable!(),
                    };
                    g.sample(n, cfg.seed ^ salt)
                }
            };
            let (sa, sb) = (rows(a, b, 0x5eed_a), rows(b, a, 0x5eed_b));
            energy_verdict(&sa, &sb, cfg)
        }
    }
}

/// Energy test on two sample matrices; zero-column laws are trivially equal.
pub fn energy_verdict(a: &SampleMatrix, b: &SampleMatrix, cfg: &CompareConfig) -> Result<EqualityVerdict> {
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!("{} vs {} columns", a.cols(), b.cols())));
    }
    if a.cols() == 0 {
        return Ok(EqualityVerdict {
            method: Method::EnergyTest,
            equal: true,
            statistic: 1.0,
            threshold: cfg.alpha,
            detail: "no coordinates".into(),
        });
    }
    let r = energy_test(
        a.data(),
        b.data(),
        a.cols(),
        &EnergyConfig {
            permutations: cfg.permutations,
            seed: cfg.seed,
            ..EnergyConfig::default()
        },
    )?;
    let path = match r.path {
        EnergyPath::Atoms(k) => format!("{k} atoms"),
        EnergyPath::Univariate => "univariate".to_string(),
        EnergyPath::Pairwise(cap) => format!("pairwise on ≤{cap} rows per side"),
    };
    Ok(EqualityVerdict {
        method: Method::EnergyTest,
        equal: r.p_value > cfg.alpha,
        statistic: r.p_value,
        threshold: cfg.alpha,
        detail: format!(
            "energy statistic {:.6e}, {} permutations, {path}, n = {} / {}",
            r.statistic,
            r.permutations,
            a.rows(),
            b.rows()
        ),
    })
}
