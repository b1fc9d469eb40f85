//! Synthetic embeddings, label-noise injection and label accuracy.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::labels::{FeatureMatrix, HardLabels};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Symmetric,
    Asymmetric,
}

/// Per-class flip targets for asymmetric noise. `None` leaves a class
/// untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap(Vec<Option<usize>>);

impl ClassMap {
    pub fn new(targets: Vec<Option<usize>>) -> Result<Self> {
        let classes = targets.len();
        for (from, to) in targets.iter().enumerate() {
            match *to {
                Some(t) if t == from => return Err(invalid(alloc::format!("class map sends {from} to itself"))),
                Some(t) if t >= classes => {
                    return Err(Error::LabelOutOfRange {
                        index: from,
                        label: t,
                        classes,
                    })
                }
                _ => {}
            }
        }
        Ok(ClassMap(targets))
    }

    /// Builds a map over `classes` classes from `(from, to)` pairs.
    pub fn from_pairs(classes: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut targets = vec![None; classes];
        for &(from, to) in pairs {
            if from >= classes {
                return Err(Error::LabelOutOfRange {
                    index: from,
                    label: from,
                    classes,
                });
            }
            targets[from] = Some(to);
        }
        Self::new(targets)
    }

    /// The usual CIFAR-10 pairing: truck→automobile, bird→airplane,
    /// deer→horse, cat↔dog.
    pub fn cifar10() -> Self {
        Self::from_pairs(10, &[(9, 1), (2, 0), (4, 7), (3, 5), (5, 3)]).expect("valid map")
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn target(&self, class: usize) -> Option<usize> {
        self.0.get(class).copied().flatten()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().enumerate().filter_map(|(f, t)| t.map(|t| (f, t)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub ratio: f64,
    #[serde(default)]
    pub class_map: Option<ClassMap>,
    pub seed: u64,
    /// Flip exactly `round(ratio · N)` eligible samples instead of flipping
    /// each one independently.
    #[serde(default)]
    pub exact_count: bool,
}

impl NoiseSpec {
    pub fn symmetric(ratio: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Symmetric,
            ratio,
            class_map: None,
            seed,
            exact_count: false,
        }
    }

    pub fn asymmetric(ratio: f64, map: ClassMap, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Asymmetric,
            ratio,
            class_map: Some(map),
            seed,
            exact_count: false,
        }
    }

    pub fn apply(&self, labels: &HardLabels) -> Result<HardLabels> {
        match self.kind {
            NoiseKind::Symmetric => flip(labels, self.ratio, self.seed, self.exact_count, Flip::Uniform),
            NoiseKind::Asymmetric => {
                let map = self
                    .class_map
                    .as_ref()
                    .ok_or_else(|| invalid("asymmetric noise needs a class map"))?;
                check_map(labels, map)?;
                flip(labels, self.ratio, self.seed, self.exact_count, Flip::Mapped(map))
            }
        }
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(invalid(alloc::format!("noise ratio {ratio} is outside [0, 1]")));
    }
    Ok(())
}

fn check_map(labels: &HardLabels, map: &ClassMap) -> Result<()> {
    if map.classes() > labels.classes() {
        return Err(invalid(alloc::format!(
            "class map covers {} classes but labels have {}",
            map.classes(),
            labels.classes()
        )));
    }
    Ok(())
}

enum Flip<'a> {
    Uniform,
    Mapped(&'a ClassMap),
}

fn flip(labels: &HardLabels, ratio: f64, seed: u64, exact_count: bool, how: Flip<'_>) -> Result<HardLabels> {
    check_ratio(ratio)?;
    let c = labels.classes();
    if matches!(how, Flip::Uniform) && c < 2 {
        return Err(invalid("symmetric noise needs at least two classes"));
    }
    let mut rng = rng::stream(seed, rng::STREAM_NOISE);
    let mut out = labels.as_slice().to_vec();
    let eligible: Vec<usize> = match how {
        Flip::Uniform => (0..out.len()).collect(),
        Flip::Mapped(map) => (0..out.len()).filter(|&i| map.target(out[i]).is_some()).collect(),
    };

    let chosen: Vec<usize> = if exact_count {
        let k = libm::round(ratio * eligible.len() as f64) as usize;
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), k)
            .into_iter()
            .map(|j| eligible[j])
            .collect();
        picked.sort_unstable();
        picked
    } else {
        eligible.into_iter().filter(|_| rng.gen::<f64>() < ratio).collect()
    };

    for i in chosen {
        let orig = out[i];
        out[i] = match how {
            Flip::Uniform => {
                let r = rng.gen_range(0..c - 1);
                if r >= orig {
                    r + 1
                } else {
                    r
                }
            }
            Flip::Mapped(map) => map.target(orig).expect("eligible class"),
        };
    }
    HardLabels::new(out, c)
}

/// Flips each label with probability `ratio` to one of the other `c − 1`
/// classes, chosen uniformly.
pub fn inject_symmetric(labels: &HardLabels, ratio: f64, seed: u64) -> Result<HardLabels> {
    NoiseSpec::symmetric(ratio, seed).apply(labels)
}

/// Flips each label whose class is mapped to `map[label]` with probability
/// `ratio`. Unmapped classes are never touched.
pub fn inject_asymmetric(labels: &HardLabels, ratio: f64, map: &ClassMap, seed: u64) -> Result<HardLabels> {
    NoiseSpec::asymmetric(ratio, map.clone(), seed).apply(labels)
}

/// Fraction of positions where `a` and `b` agree.
pub fn label_accuracy(a: &HardLabels, b: &HardLabels) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            op: "label_accuracy",
            expected: (a.len(), 1),
            found: (b.len(), 1),
        });
    }
    if a.is_empty() {
        return Err(invalid("label accuracy of empty sequences is undefined"));
    }
    let hits = a.as_slice().iter().zip(b.as_slice()).filter(|(x, y)| x == y).count();
    Ok(hits as f64 / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    /// Minimum distance between class means, in units of the component
    /// standard deviation.
    pub separation: f64,
    pub seed: u64,
}

impl MixtureSpec {
    fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.n < self.classes {
            return Err(invalid("mixture needs n >= classes >= 2"));
        }
        if self.dim == 0 {
            return Err(invalid("mixture dimension must be positive"));
        }
        if !(self.separation > 0.0) || !self.separation.is_finite() {
            return Err(invalid("mixture separation must be positive and finite"));
        }
        Ok(())
    }
}

/// Isotropic unit-variance Gaussian components around fixed class means.
///
/// The means depend only on `MixtureSpec::seed`; each `draw` index yields an
/// independent sample from the same mixture, so train, validation and test
/// splits can share one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    spec: MixtureSpec,
    means: Matrix,
}

impl GaussianMixture {
    pub fn new(spec: &MixtureSpec) -> Result<Self> {
        spec.validate()?;
        let (c, d, sep) = (spec.classes, spec.dim, spec.separation);
        let mut means = if c <= d {
            // scaled simplex vertices: every pair at distance exactly `sep`
            let r = sep / core::f64::consts::SQRT_2;
            Matrix::from_fn(c, d, |i, j| if i == j { r } else { 0.0 })
        } else {
            let mut rng = rng::stream(spec.seed, rng::STREAM_MEANS);
            let mut m = Matrix::from_fn(c, d, |_, _| StandardNormal.sample(&mut rng));
            let mut tries = 0;
            while min_pairwise_distance(&m) <= 1e-9 {
                tries += 1;
                if tries > 64 {
                    return Err(invalid("could not place distinct class means"));
                }
                m = Matrix::from_fn(c, d, |_, _| StandardNormal.sample(&mut rng));
            }
            m
        };
        let mut min = min_pairwise_distance(&means);
        while min < sep {
            means.scale(sep / min * (1.0 + 4.0 * f64::EPSILON));
            min = min_pairwise_distance(&means);
        }
        Ok(GaussianMixture {
            spec: spec.clone(),
            means,
        })
    }

    pub fn means(&self) -> &Matrix {
        &self.means
    }

    /// Draws `n` samples with labels `i mod c`, so class sizes differ by at
    /// most one.
    pub fn sample(&self, n: usize, draw: u64) -> Result<(FeatureMatrix, HardLabels)> {
        let (c, d) = (self.spec.classes, self.spec.dim);
        let mut rng = rng::stream(self.spec.seed, rng::STREAM_DRAW_BASE + draw);
        let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        let mut data = Vec::with_capacity(n * d);
        for &l in &labels {
            for &mu in self.means.row(l) {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(mu + z);
            }
        }
        let features = FeatureMatrix::new(Matrix::from_vec(n, d, data)?)?;
        Ok((features, HardLabels::new(labels, c)?))
    }
}

fn min_pairwise_distance(m: &Matrix) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..m.rows() {
        for j in (i + 1)..m.rows() {
            let d2: f64 = m.row(i).iter().zip(m.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            min = min.min(libm::sqrt(d2));
        }
    }
    min
}

/// Samples `spec.n` points from the mixture defined by `spec` (draw 0).
pub fn gen_gaussian_mixture(spec: &MixtureSpec) -> Result<(FeatureMatrix, HardLabels)> {
    GaussianMixture::new(spec)?.sample(spec.n, 0)
}
