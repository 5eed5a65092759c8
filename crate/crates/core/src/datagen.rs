//! Synthetic regression data with response corruptions and dense noise.
//!
//! The corruption support is drawn before any covariate, so the adversary
//! chooses where to corrupt without seeing the data. The fake-model
//! adversary makes every bad point exactly consistent with a decoy model.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroundTruth};
use crate::error::DataError;
use crate::linalg::{dot, Cholesky, SymMatrix};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CovariateDistribution {
    /// `N(0, I_d)`
    Isotropic,
    /// `N(0, Sigma)` with `Sigma` given row-major, `d x d`.
    NonIsotropic { covariance: Vec<f64> },
    /// `N(mu, I_d)`
    NonCentered { mean: Vec<f64> },
    /// Uniform on the sphere of the given radius.
    Sphere { radius: f64 },
}

impl Default for CovariateDistribution {
    fn default() -> Self {
        CovariateDistribution::Isotropic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CorruptionMode {
    /// `b_j = <x_j, w~ - w*>`, so bad responses follow the fake model.
    FakeModel,
    /// `b_j` standard Cauchy scaled by `|w*|`.
    IidHeavy,
    /// `b_j = offset`
    ConstantOffset { offset: f64 },
}

impl Default for CorruptionMode {
    fn default() -> Self {
        CorruptionMode::FakeModel
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub n: usize,
    pub d: usize,
    pub covariates: CovariateDistribution,
    /// Fraction of corrupted points; `floor(alpha n)` indices are corrupted.
    pub alpha: f64,
    pub corruption: CorruptionMode,
    /// Standard deviation of Gaussian noise added to every response.
    pub dense_noise_sigma: f64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 10,
            covariates: CovariateDistribution::Isotropic,
            alpha: 0.15,
            corruption: CorruptionMode::FakeModel,
            dense_noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn corrupted_count(&self) -> usize {
        (self.alpha * self.n as f64).floor() as usize
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.n == 0 || self.d == 0 {
            return Err(DataError::Empty { n: self.n, d: self.d });
        }
        if !(0.0..0.5).contains(&self.alpha) {
            return Err(DataError::invalid("alpha", format!("must lie in [0, 0.5), got {}", self.alpha)));
        }
        if !(self.dense_noise_sigma >= 0.0) || !self.dense_noise_sigma.is_finite() {
            return Err(DataError::invalid("dense_noise_sigma", "must be finite and >= 0"));
        }
        if let CorruptionMode::ConstantOffset { offset } = self.corruption {
            if !offset.is_finite() {
                return Err(DataError::invalid("offset", "must be finite"));
            }
        }
        CovariateSampler::new(&self.covariates, self.d).map(|_| ())
    }
}

/// Draws covariate vectors from a [`CovariateDistribution`].
#[derive(Debug, Clone)]
pub struct CovariateSampler {
    d: usize,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Isotropic,
    Correlated(Cholesky<f64>),
    Shifted(Vec<f64>),
    Sphere(f64),
}

impl CovariateSampler {
    pub fn new(dist: &CovariateDistribution, d: usize) -> Result<Self, DataError> {
        let kind = match dist {
            CovariateDistribution::Isotropic => SamplerKind::Isotropic,
            CovariateDistribution::NonIsotropic { covariance } => {
                if covariance.len() != d * d {
                    return Err(DataError::DimensionMismatch {
                        expected: d * d,
                        found: covariance.len(),
                    });
                }
                let sigma = SymMatrix::from_row_major(d, covariance);
                let chol = Cholesky::factor(&sigma).map_err(|_| {
                    DataError::invalid("covariance", "must be symmetric positive definite")
                })?;
                SamplerKind::Correlated(chol)
            }
            CovariateDistribution::NonCentered { mean } => {
                if mean.len() != d {
                    return Err(DataError::DimensionMismatch {
                        expected: d,
                        found: mean.len(),
                    });
                }
                SamplerKind::Shifted(mean.clone())
            }
            CovariateDistribution::Sphere { radius } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(DataError::invalid("radius", "must be finite and > 0"));
                }
                SamplerKind::Sphere(*radius)
            }
        };
        Ok(Self { d, kind })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = standard_normal_vec(rng, self.d);
        match &self.kind {
            SamplerKind::Isotropic => z,
            SamplerKind::Correlated(chol) => chol.mul_lower(&z),
            SamplerKind::Shifted(mu) => z.iter().zip(mu).map(|(a, b)| a + b).collect(),
            SamplerKind::Sphere(radius) => {
                let nz = dot(&z, &z).sqrt();
                z.iter().map(|v| radius * v / nz).collect()
            }
        }
    }
}

pub(crate) fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// A uniformly random unit vector (normalized Gaussian draw).
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let z = standard_normal_vec(rng, d);
        let nz = dot(&z, &z).sqrt();
        if nz > 0.0 {
            return z.into_iter().map(|v| v / nz).collect();
        }
    }
}

/// Draws a dataset and its ground truth. Identical specs give bit-identical
/// output.
pub fn generate<T: Real>(spec: &GeneratorSpec) -> Result<(Dataset<T>, GroundTruth<T>), DataError> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sampler = CovariateSampler::new(&spec.covariates, d)?;

    let gold = random_unit_vector(&mut rng, d);
    let fake = random_unit_vector(&mut rng, d);
    let k = spec.corrupted_count();
    let mut support = index::sample(&mut rng, n, k).into_vec();
    support.sort_unstable();
    let mut bad = vec![false; n];
    for &i in &support {
        bad[i] = true;
    }

    let points: Vec<Vec<f64>> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    let noise: Vec<f64> = if spec.dense_noise_sigma > 0.0 {
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                spec.dense_noise_sigma * z
            })
            .collect()
    } else {
        vec![0.0; n]
    };
    let cauchy = Cauchy::new(0.0, 1.0).expect("unit Cauchy");
    let gold_norm = dot(&gold, &gold).sqrt();

    let mut y = Vec::with_capacity(n);
    let mut b = vec![0.0; n];
    for (i, x) in points.iter().enumerate() {
        let clean = dot(x, &gold);
        let yi = if bad[i] {
            match spec.corruption {
                CorruptionMode::FakeModel => {
                    // computed directly so that <x, w~> - y = 0 exactly when noiseless
                    let yi = dot(x, &fake) + noise[i];
                    b[i] = yi - clean - noise[i];
                    yi
                }
                CorruptionMode::IidHeavy => {
                    b[i] = gold_norm * cauchy.sample(&mut rng);
                    clean + b[i] + noise[i]
                }
                CorruptionMode::ConstantOffset { offset } => {
                    b[i] = offset;
                    clean + b[i] + noise[i]
                }
            }
        } else {
            clean + noise[i]
        };
        y.push(yi);
    }

    let cast = |v: &[f64]| v.iter().map(|&a| T::lit(a)).collect::<Vec<T>>();
    let flat: Vec<T> = points.iter().flat_map(|p| p.iter().map(|&a| T::lit(a))).collect();
    let data = Dataset::new(d, flat, cast(&y))?;
    let truth = GroundTruth {
        gold_model: cast(&gold),
        corruption_support: support,
        corruption_values: cast(&b),
        dense_noise: cast(&noise),
        fake_model: matches!(spec.corruption, CorruptionMode::FakeModel).then(|| cast(&fake)),
        alpha: spec.alpha,
        seed: spec.seed,
    };
    Ok((data, truth))
}

/// Pairs point `i` with point `i + n/2`: `x~_i = (x_i - x_{i+n/2}) / sqrt 2`,
/// same for responses. A trailing odd point is dropped.
pub fn pair_and_center<T: Real>(data: &Dataset<T>) -> Result<Dataset<T>, DataError> {
    let n = data.n();
    if n < 2 {
        return Err(DataError::invalid("n", "pairing needs at least two points"));
    }
    let half = n / 2;
    let inv_sqrt2 = T::one() / T::lit(2.0).sqrt();
    let mut cov = Vec::with_capacity(half * data.d());
    let mut resp = Vec::with_capacity(half);
    for i in 0..half {
        let (a, b) = (data.point(i), data.point(i + half));
        cov.extend(a.iter().zip(b).map(|(&p, &q)| (p - q) * inv_sqrt2));
        resp.push((data.responses()[i] - data.responses()[i + half]) * inv_sqrt2);
    }
    Dataset::new(data.d(), cov, resp)
}

/// Indices of paired points touched by a corrupted input; at most twice
/// the input count.
pub fn paired_corruption_support(support: &[usize], n: usize) -> Vec<usize> {
    let half = n / 2;
    let mut out: Vec<usize> = support
        .iter()
        .filter_map(|&i| match i {
            i if i < half => Some(i),
            i if i < 2 * half => Some(i - half),
            _ => None,
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Subtracts the sample mean from every covariate. Responses are left as
/// they are, so a model fitted to the result predicts `y - <mu, w>`
/// rather than `y`.
pub fn center_covariates<T: Real>(data: &Dataset<T>) -> Result<(Dataset<T>, Vec<T>), DataError> {
    let d = data.d();
    let inv_n = T::one() / T::lit(data.n() as f64);
    let mut mean = vec![T::zero(); d];
    for x in data.points() {
        for (m, &v) in mean.iter_mut().zip(x) {
            *m = *m + v;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m * inv_n);
    let cov = data
        .points()
        .flat_map(|x| x.iter().zip(&mean).map(|(&v, &m)| v - m).collect::<Vec<_>>())
        .collect();
    Ok((Dataset::new(d, cov, data.responses().to_vec())?, mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_noiseless_data_is_exact() {
        let spec = GeneratorSpec {
            n: 50,
            d: 3,
            alpha: 0.0,
            seed: 3,
            ..Default::default()
        };
        let (data, truth) = generate::<f64>(&spec).unwrap();
        assert!(truth.corruption_support.is_empty());
        for (x, &y) in data.points().zip(data.responses()) {
            assert_eq!(dot(x, &truth.gold_model), y);
        }
        truth.check_consistency(&data, 1e-14).unwrap();
    }

    #[test]
    fn fake_model_points_fit_fake_model_exactly() {
        let spec = GeneratorSpec {
            n: 200,
            d: 5,
            alpha: 0.2,
            seed: 11,
            ..Default::default()
        };
        let (data, truth) = generate::<f64>(&spec).unwrap();
        assert_eq!(truth.corruption_support.len(), 40);
        let fake = truth.fake_model.as_ref().unwrap();
        for &j in &truth.corruption_support {
            assert_eq!(dot(data.point(j), fake) - data.responses()[j], 0.0);
        }
        truth.check_consistency(&data, 1e-13).unwrap();
    }

    #[test]
    fn other_corruption_modes() {
        for mode in [CorruptionMode::IidHeavy, CorruptionMode::ConstantOffset { offset: 5.0 }] {
            let spec = GeneratorSpec {
                n: 100,
                d: 4,
                alpha: 0.3,
                corruption: mode.clone(),
                dense_noise_sigma: 0.05,
                seed: 2,
                ..Default::default()
            };
            let (data, truth) = generate::<f64>(&spec).unwrap();
            assert_eq!(truth.corruption_support.len(), 30);
            assert!(truth.fake_model.is_none());
            truth.check_consistency(&data, 1e-13).unwrap();
            if let CorruptionMode::ConstantOffset { offset } = mode {
                assert!(truth.corruption_support.iter().all(|&i| truth.corruption_values[i] == offset));
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad_alpha = GeneratorSpec {
            alpha: 0.5,
            ..Default::default()
        };
        assert!(generate::<f64>(&bad_alpha).is_err());
        let bad_cov = GeneratorSpec {
            d: 2,
            covariates: CovariateDistribution::NonIsotropic {
                covariance: vec![1.0, 2.0, 2.0, 1.0],
            },
            ..Default::default()
        };
        assert!(generate::<f64>(&bad_cov).is_err());
        let bad_mean = GeneratorSpec {
            d: 2,
            covariates: CovariateDistribution::NonCentered { mean: vec![1.0] },
            ..Default::default()
        };
        assert!(generate::<f64>(&bad_mean).is_err());
    }

    #[test]
    fn sphere_points_have_radius() {
        let spec = GeneratorSpec {
            n: 20,
            d: 4,
            covariates: CovariateDistribution::Sphere { radius: 3.0 },
            alpha: 0.0,
            ..Default::default()
        };
        let (data, _) = generate::<f64>(&spec).unwrap();
        for x in data.points() {
            assert!((dot(x, x).sqrt() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pairing_examples() {
        let same = Dataset::new(1, vec![1.5, 1.5], vec![2.0, 2.0]).unwrap();
        let p = pair_and_center(&same).unwrap();
        assert_eq!((p.n(), p.point(0)[0], p.responses()[0]), (1, 0.0, 0.0));
        let two = Dataset::new(1, vec![1.0, 3.0], vec![2.0, 4.0]).unwrap();
        let p = pair_and_center(&two).unwrap();
        let s2 = 2f64.sqrt();
        assert!((p.point(0)[0] + s2).abs() < 1e-15 && (p.responses()[0] + s2).abs() < 1e-15);
        let odd = Dataset::new(1, vec![1.0, 3.0, 9.0], vec![2.0, 4.0, 9.0]).unwrap();
        assert_eq!(pair_and_center(&odd).unwrap().n(), 1);
        let single = Dataset::new(1, vec![1.0], vec![2.0]).unwrap();
        assert!(pair_and_center(&single).is_err());
    }

    #[test]
    fn paired_support_at_most_doubles() {
        assert_eq!(paired_corruption_support(&[0, 5, 7, 9], 10), vec![0, 2, 4]);
        assert_eq!(paired_corruption_support(&[10], 11), Vec::<usize>::new());
    }

    #[test]
    fn centering_examples() {
        let two = Dataset::new(1, vec![0.0, 2.0], vec![1.0, 1.0]).unwrap();
        let (c, mu) = center_covariates(&two).unwrap();
        assert_eq!(mu, vec![1.0]);
        assert_eq!(c.covariates(), &[-1.0, 1.0]);
        assert_eq!(c.responses(), two.responses());
        let one = Dataset::new(2, vec![3.0, -4.0], vec![0.0]).unwrap();
        let (c, _) = center_covariates(&one).unwrap();
        assert_eq!(c.point(0), &[0.0, 0.0]);
    }
}
