//! Two-sample energy-distance permutation test.
//!
//! The statistic is `nm/(n+m) · (2·E|X-Y| - E|X-X'| - E|Y-Y'|)` with
//! V-statistic means. Three evaluation paths share it:
//!
//! * few distinct rows (discrete data): counts over atoms, exact;
//! * one dimension: `2∫(F_n - G_m)²` over the pooled sorted sample, exact;
//! * otherwise: a seeded subsample of each side with a full distance matrix.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Atom-path cutoff on the number of distinct pooled rows; the path is also
/// skipped unless rows repeat on average.
pub const MAX_ATOMS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConfig {
    pub permutations: usize,
    pub seed: u64,
    /// Per-side cap for the pairwise path.
    pub max_pairwise: usize,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            permutations: 200,
            seed: 0,
            max_pairwise: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyPath {
    Atoms(usize),
    Univariate,
    /// Pairwise on at most this many rows per side.
    Pairwise(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyResult {
    pub statistic: f64,
    /// `(1 + #{perm ≥ observed}) / (1 + permutations)`.
    pub p_value: f64,
    pub permutations: usize,
    pub path: EnergyPath,
}

/// Rows of `x` and `y` are consecutive `dim`-chunks.
pub fn energy_test(x: &[f64], y: &[f64], dim: usize, cfg: &EnergyConfig) -> Result<EnergyResult> {
    if dim == 0 || x.len() % dim != 0 || y.len() % dim != 0 {
        return Err(Error::DimensionMismatch(format!(
            "samples of length {} and {} are not rows of width {dim}",
            x.len(),
            y.len()
        )));
    }
    let (n, m) = (x.len() / dim, y.len() / dim);
    if n == 0 || m == 0 {
        return Err(Error::Validation("energy test needs at least one row per side".into()));
    }
    if cfg.permutations == 0 {
        return Err(Error::Validation("energy test needs at least one permutation".into()));
    }
    if let Some(t) = Atoms::build(x, y, dim) {
        return Ok(t.run(cfg));
    }
    if dim == 1 {
        return Ok(univariate(x, y, cfg));
    }
    Ok(pairwise(x, y, dim, cfg))
}

fn perm_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64 + 1);
    rng
}

fn p_value(observed: f64, perms: impl Iterator<Item = f64>, count: usize) -> f64 {
    let slack = 1e-12 * observed.abs().max(1e-300);
    let hits = perms.filter(|t| *t >= observed - slack).count();
    (1 + hits) as f64 / (1 + count) as f64
}

/// Chooses `n` of `0..total` uniformly; returns a membership mask.
fn random_split(total: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..total).collect();
    let (chosen, _) = idx.partial_shuffle(rng, n);
    let mut mask = vec![false; total];
    for &i in chosen.iter() {
        mask[i] = true;
    }
    mask
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

struct Atoms {
    /// Atom index of every pooled row; `x` rows first.
    pooled: Vec<usize>,
    n: usize,
    d: Vec<f64>,
    k: usize,
}

impl Atoms {
    fn build(x: &[f64], y: &[f64], dim: usize) -> Option<Atoms> {
        let mut atoms: Vec<&[f64]> = Vec::new();
        let mut pooled = Vec::with_capacity((x.len() + y.len()) / dim);
        for row in x.chunks(dim).chain(y.chunks(dim)) {
            let pos = match atoms.iter().position(|a| *a == row) {
                Some(p) => p,
                None => {
                    if atoms.len() == MAX_ATOMS {
                        return None;
                    }
                    atoms.push(row);
                    atoms.len() - 1
                }
            };
            pooled.push(pos);
        }
        let k = atoms.len();
        if 2 * k > pooled.len() {
            return None;
        }
        let mut d = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                d[a * k + b] = dist(atoms[a], atoms[b]);
            }
        }
        Some(Atoms {
            pooled,
            n: x.len() / dim,
            d,
            k,
        })
    }

    fn statistic(&self, cx: &[f64], cy: &[f64]) -> f64 {
        let (n, m) = (cx.iter().sum::<f64>(), cy.iter().sum::<f64>());
        let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
        for a in 0..self.k {
            for b in 0..self.k {
                let d = self.d[a * self.k + b];
                xy += cx[a] * cy[b] * d;
                xx += cx[a] * cx[b] * d;
                yy += cy[a] * cy[b] * d;
            }
        }
        let e = 2.0 * xy / (n * m) - xx / (n * n) - yy / (m * m);
        n * m / (n + m) * e
    }

    fn counts(&self, in_x: impl Fn(usize) -> bool) -> (Vec<f64>, Vec<f64>) {
        let mut cx = vec![0.0; self.k];
        let mut cy = vec![0.0; self.k];
        for (pos, &a) in self.pooled.iter().enumerate() {
            if in_x(pos) {
                cx[a] += 1.0;
            } else {
                cy[a] += 1.0;
            }
        }
        (cx, cy)
    }

    fn run(&self, cfg: &EnergyConfig) -> EnergyResult {
        let (cx, cy) = self.counts(|p| p < self.n);
        let observed = self.statistic(&cx, &cy);
        let total = self.pooled.len();
        let perms = (0..cfg.permutations).map(|k| {
            let mask = random_split(total, self.n, &mut perm_rng(cfg.seed, k));
            let (px, py) = self.counts(|p| mask[p]);
            self.statistic(&px, &py)
        });
        EnergyResult {
            statistic: observed,
            p_value: p_value(observed, perms, cfg.permutations),
            permutations: cfg.permutations,
            path: EnergyPath::Atoms(self.k),
        }
    }
}

fn univariate(x: &[f64], y: &[f64], cfg: &EnergyConfig) -> EnergyResult {
    let (n, m) = (x.len(), y.len());
    let mut pooled: Vec<(f64, usize)> = x.iter().chain(y).copied().zip(0..).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values: Vec<f64> = pooled.iter().map(|p| p.0).collect();
    let origin: Vec<usize> = pooled.iter().map(|p| p.1).collect();
    let stat = |in_x: &dyn Fn(usize) -> bool| {
        let (mut fx, mut fy, mut acc) = (0.0, 0.0, 0.0);
        for k in 0..values.len() - 1 {
            if in_x(origin[k]) {
                fx += 1.0 / n as f64;
            } else {
                fy += 1.0 / m as f64;
            }
            let diff = fx - fy;
            acc += diff * diff * (values[k + 1] - values[k]);
        }
        (n * m) as f64 / (n + m) as f64 * 2.0 * acc
    };
    let observed = stat(&|o| o < n);
    let perms = (0..cfg.permutations).map(|k| {
        let mask = random_split(n + m, n, &mut perm_rng(cfg.seed, k));
        stat(&|o| mask[o])
    });
    EnergyResult {
        statistic: observed,
        p_value: p_value(observed, perms, cfg.permutations),
        permutations: cfg.permutations,
        path: EnergyPath::Univariate,
    }
}

fn subsample<'a>(rows: &'a [f64], dim: usize, cap: usize, rng: &mut ChaCha8Rng) -> Vec<&'a [f64]> {
    let mut all: Vec<&[f64]> = rows.chunks(dim).collect();
    if all.len() > cap {
        let (chosen, _) = all.partial_shuffle(rng, cap);
        chosen.to_vec()
    } else {
        all
    }
}

fn pairwise(x: &[f64], y: &[f64], dim: usize, cfg: &EnergyConfig) -> EnergyResult {
    let cap = cfg.max_pairwise.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let xs = subsample(x, dim, cap, &mut rng);
    let ys = subsample(y, dim, cap, &mut rng);
    let (n, m) = (xs.len(), ys.len());
    let rows: Vec<&[f64]> = xs.into_iter().chain(ys).collect();
    let total = rows.len();
    let mut d = vec![0.0; total * total];
    let mut row_sums = vec![0.0; total];
    for a in 0..total {
        for b in (a + 1)..total {
            let v = dist(rows[a], rows[b]);
            d[a * total + b] = v;
            d[b * total + a] = v;
            row_sums[a] += v;
            row_sums[b] += v;
        }
    }
    let grand: f64 = row_sums.iter().sum();
    // Only the x-x block is summed per split: the x rows' full sums give
    // sxx + sxy, and the y-y block follows from the grand total.
    let stat = |members_x: &[usize]| {
        let mut sxx = 0.0;
        for (k, &a) in members_x.iter().enumerate() {
            let row = &d[a * total..(a + 1) * total];
            sxx += members_x[k + 1..].iter().map(|&b| row[b]).sum::<f64>();
        }
        sxx *= 2.0;
        let rx: f64 = members_x.iter().map(|&a| row_sums[a]).sum();
        let sxy = rx - sxx;
        let syy = grand - sxx - 2.0 * sxy;
        let (nf, mf) = (n as f64, m as f64);
        nf * mf / (nf + mf) * (2.0 * sxy / (nf * mf) - sxx / (nf * nf) - syy / (mf * mf))
    };
    let split = |mask: &[bool]| (0..total).filter(|&i| mask[i]).collect::<Vec<usize>>();
    let observed = stat(&(0..n).collect::<Vec<_>>());
    let perms = (0..cfg.permutations).map(|k| {
        let mask = random_split(total, n, &mut perm_rng(cfg.seed, k));
        stat(&split(&mask))
    });
    EnergyResult {
        statistic: observed,
        p_value: p_value(observed, perms, cfg.permutations),
        permutations: cfg.permutations,
        path: EnergyPath::Pairwise(n.max(m)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Brute-force V-statistic.
    fn oracle(x: &[f64], y: &[f64], dim: usize) -> f64 {
        let xs: Vec<&[f64]> = x.chunks(dim).collect();
        let ys: Vec<&[f64]> = y.chunks(dim).collect();
        let mean = |a: &[&[f64]], b: &[&[f64]]| {
            let mut s = 0.0;
            for p in a {
                for q in b {
                    s += dist(p, q);
                }
            }
            s / (a.len() * b.len()) as f64
        };
        let (n, m) = (xs.len() as f64, ys.len() as f64);
        n * m / (n + m) * (2.0 * mean(&xs, &ys) - mean(&xs, &xs) - mean(&ys, &ys))
    }

    fn normals(n: usize, seed: u64, shift: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn every_path_matches_brute_force() {
        let cfg = EnergyConfig::default();
        let x = normals(40, 1, 0.0);
        let y = normals(30, 2, 0.3);
        let r = energy_test(&x, &y, 1, &cfg).unwrap();
        assert_eq!(r.path, EnergyPath::Univariate);
        assert!((r.statistic - oracle(&x, &y, 1)).abs() < 1e-9);

        let r = energy_test(&x, &y, 2, &cfg).unwrap();
        assert_eq!(r.path, EnergyPath::Pairwise(20));
        assert!((r.statistic - oracle(&x, &y, 2)).abs() < 1e-9);

        let bx: Vec<f64> = x.iter().map(|v| (*v > 0.0) as u8 as f64).collect();
        let by: Vec<f64> = y.iter().map(|v| (*v > 0.5) as u8 as f64).collect();
        let r = energy_test(&bx, &by, 2, &cfg).unwrap();
        assert!(matches!(r.path, EnergyPath::Atoms(k) if k <= 4));
        assert!((r.statistic - oracle(&bx, &by, 2)).abs() < 1e-9);
    }

    #[test]
    fn identical_samples_give_zero() {
        let x = normals(50, 3, 0.0);
        let r = energy_test(&x, &x, 1, &EnergyConfig::default()).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!(r.p_value > 0.5);
    }

    #[test]
    fn shift_is_detected_and_deterministic() {
        let x = normals(500, 4, 0.0);
        let y = normals(500, 5, 1.0);
        let cfg = EnergyConfig::default();
        let a = energy_test(&x, &y, 1, &cfg).unwrap();
        assert_eq!(a.p_value, 1.0 / 201.0);
        assert_eq!(a, energy_test(&x, &y, 1, &cfg).unwrap());
    }

    #[test]
    fn bad_shapes() {
        assert!(energy_test(&[1.0, 2.0, 3.0], &[1.0, 2.0], 2, &EnergyConfig::default()).is_err());
        assert!(energy_test(&[], &[1.0], 1, &EnergyConfig::default()).is_err());
    }
}
