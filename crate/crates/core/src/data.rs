//! Synthetic 2-D Gaussian mixtures and the labelled/unlabelled split.
//!
//! Samples are clipped to `[-1, 1]²` and rounded to nine significant digits
//! when drawn, so the CSV interchange format (which carries nine digits)
//! reproduces a generated dataset bit for bit.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::rng::RngStream;
use crate::{Error, Matrix, Result};

/// Labelled points: `x` is `n x d`, `classes[i]` is the class of row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub x: Matrix,
    pub classes: Vec<usize>,
}

impl Pool {
    pub fn new(x: Matrix, classes: Vec<usize>) -> Result<Self> {
        if x.rows() != classes.len() {
            return Err(Error::Argument("pool rows and class list differ in length"));
        }
        Ok(Self { x, classes })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_counts(&self, k: usize) -> Vec<usize> {
        let mut c = vec![0; k];
        for &y in &self.classes {
            c[y] += 1;
        }
        c
    }
}

/// Training pool plus held-out test points, before any labels are hidden.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPool {
    pub classes: usize,
    pub train: Pool,
    pub test: Pool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixtureSpec {
    pub centers: Vec<[f64; 2]>,
    pub sigmas: Vec<f64>,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn classes(&self) -> usize {
        self.centers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.len() < 2 {
            return Err(Error::Argument("a mixture needs at least two classes"));
        }
        if self.sigmas.len() != self.centers.len() {
            return Err(Error::Argument("one sigma per class is required"));
        }
        for (c, &s) in self.centers.iter().zip(&self.sigmas) {
            if !(s > 0.0) {
                return Err(Error::Argument("sigmas must be positive"));
            }
            if c.iter().any(|v| v.abs() + 3.0 * s > 1.0 + 1e-12) {
                return Err(Error::Argument("centers need a 3-sigma margin inside [-1, 1]"));
            }
        }
        Ok(())
    }

    /// Draws `n` points; the class of each is its generating component.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Pool {
        let k = self.classes();
        let mut x = Matrix::zeros(n, 2);
        let mut classes = Vec::with_capacity(n);
        for i in 0..n {
            let c = rng.below(k);
            let s = self.sigmas[c];
            for j in 0..2 {
                let v = self.centers[c][j] + s * rng.standard_normal();
                x.set(i, j, round_sig9(v.clamp(-1.0, 1.0)));
            }
            classes.push(c);
        }
        Pool { x, classes }
    }

    /// Accuracy of the maximum-posterior classifier of the (unclipped)
    /// mixture with equal priors. An upper reference for any learner.
    pub fn bayes_accuracy(&self, pool: &Pool) -> f64 {
        if pool.is_empty() {
            return 0.0;
        }
        let hits = pool
            .x
            .iter_rows()
            .zip(&pool.classes)
            .filter(|(x, &y)| {
                let mut best = (f64::NEG_INFINITY, 0);
                for (k, (c, &s)) in self.centers.iter().zip(&self.sigmas).enumerate() {
                    let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
                    let d2 = dx * dx + dy * dy;
                    let ll = -d2 / (2.0 * s * s) - 2.0 * libm::log(s);
                    if ll > best.0 {
                        best = (ll, k);
                    }
                }
                best.1 == y
            })
            .count();
        hits as f64 / pool.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RingParams {
    pub classes: usize,
    pub radius: f64,
    pub sigma: f64,
    pub train_n: usize,
    pub test_n: usize,
}

impl Default for RingParams {
    fn default() -> Self {
        Self {
            classes: 10,
            radius: 0.75,
            sigma: 0.05,
            train_n: 10_000,
            test_n: 1_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlobParams {
    pub classes: usize,
    pub sigma: f64,
    /// Centers are uniform in `[-spread, spread]²`, tightened if needed to
    /// keep a 3-sigma margin inside the unit box.
    pub spread: f64,
    pub train_n: usize,
    pub test_n: usize,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self {
            classes: 8,
            sigma: 0.12,
            spread: 0.8,
            train_n: 10_000,
            test_n: 1_000,
        }
    }
}

/// Seed of the BLOB instance used throughout the experiments: the first
/// seed whose Bayes accuracy under the default parameters is 0.889 ± 0.005.
pub const CANONICAL_BLOB_SEED: u64 = 121;

const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;
const CENTER_STREAM: u64 = 3;
const SPLIT_STREAM: u64 = 4;

fn draw(spec: &MixtureSpec, train_n: usize, test_n: usize) -> DataPool {
    let train = spec.sample(train_n, &mut RngStream::new(spec.seed, TRAIN_STREAM));
    let test = spec.sample(test_n, &mut RngStream::new(spec.seed, TEST_STREAM));
    DataPool {
        classes: spec.classes(),
        train,
        test,
    }
}

/// `classes` equal-variance modes evenly spaced on a circle about the origin.
pub fn make_ring(seed: u64, params: &RingParams) -> Result<(MixtureSpec, DataPool)> {
    let k = params.classes;
    let centers = (0..k)
        .map(|i| {
            let a = 2.0 * core::f64::consts::PI * i as f64 / k as f64;
            [params.radius * libm::cos(a), params.radius * libm::sin(a)]
        })
        .collect();
    let spec = MixtureSpec {
        centers,
        sigmas: vec![params.sigma; k],
        seed,
    };
    spec.validate()?;
    let pool = draw(&spec, params.train_n, params.test_n);
    Ok((spec, pool))
}

/// `classes` modes at uniformly random positions; neighbouring modes may
/// overlap, which caps the attainable accuracy below one.
pub fn make_blob(seed: u64, params: &BlobParams) -> Result<(MixtureSpec, DataPool)> {
    if params.classes < 2 {
        return Err(Error::Argument("a mixture needs at least two classes"));
    }
    let bound = params.spread.min(1.0 - 3.0 * params.sigma);
    if !(bound >= 0.0) {
        return Err(Error::Argument("sigma too wide for the unit box"));
    }
    let mut rng = RngStream::new(seed, CENTER_STREAM);
    let centers = (0..params.classes)
        .map(|_| [rng.uniform(-bound, bound), rng.uniform(-bound, bound)])
        .collect();
    let spec = MixtureSpec {
        centers,
        sigmas: vec![params.sigma; params.classes],
        seed,
    };
    spec.validate()?;
    let pool = draw(&spec, params.train_n, params.test_n);
    Ok((spec, pool))
}

/// A training pool with a few visible labels, plus its test split.
///
/// `labeled` and `unlabeled` are ascending index lists partitioning
/// `train`. Unlabelled rows keep their class in `train.classes` as a hidden
/// oracle view; training code only reads it through `labeled`.
#[derive(Debug, Clone, PartialEq)]
pub struct SslDataset {
    pub classes: usize,
    pub n_s: usize,
    pub train: Pool,
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub test: Pool,
    labeled_x: Matrix,
    labeled_onehot: Matrix,
    unlabeled_x: Matrix,
}

impl SslDataset {
    /// Assembles and validates a split: the index sets must partition the
    /// training pool and hold exactly `n_s` labels per class.
    pub fn from_parts(classes: usize, train: Pool, labeled: Vec<usize>, test: Pool) -> Result<Self> {
        let n = train.len();
        let mut mark = vec![false; n];
        for &i in &labeled {
            if i >= n || mark[i] {
                return Err(Error::Argument("labelled indices must be distinct and in range"));
            }
            mark[i] = true;
        }
        if train.classes.iter().chain(&test.classes).any(|&c| c >= classes) {
            return Err(Error::Argument("class index out of range"));
        }
        if train.x.cols() != test.x.cols() && !test.is_empty() {
            return Err(Error::Argument("train and test dimensions differ"));
        }
        let mut per_class = vec![0usize; classes];
        for &i in &labeled {
            per_class[train.classes[i]] += 1;
        }
        let n_s = per_class[0];
        if n_s == 0 || per_class.iter().any(|&c| c != n_s) {
            return Err(Error::Argument("every class needs the same positive number of labels"));
        }
        let mut labeled = labeled;
        labeled.sort_unstable();
        let unlabeled: Vec<usize> = (0..n).filter(|&i| !mark[i]).collect();
        let labeled_x = train.x.select_rows(&labeled);
        let mut labeled_onehot = Matrix::zeros(labeled.len(), classes);
        for (r, &i) in labeled.iter().enumerate() {
            labeled_onehot.set(r, train.classes[i], 1.0);
        }
        let unlabeled_x = train.x.select_rows(&unlabeled);
        Ok(Self {
            classes,
            n_s,
            train,
            labeled,
            unlabeled,
            test,
            labeled_x,
            labeled_onehot,
            unlabeled_x,
        })
    }

    pub fn dim(&self) -> usize {
        self.train.x.cols()
    }

    pub fn labeled_x(&self) -> &Matrix {
        &self.labeled_x
    }

    pub fn labeled_onehot(&self) -> &Matrix {
        &self.labeled_onehot
    }

    /// Unlabelled samples, in `unlabeled` order.
    pub fn unlabeled_x(&self) -> &Matrix {
        &self.unlabeled_x
    }
}

/// Picks `n_s` labelled samples per class uniformly at random.
pub fn split_ssl(pool: DataPool, n_s: usize, seed: u64) -> Result<SslDataset> {
    if n_s == 0 {
        return Err(Error::Argument("n_s must be at least one"));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); pool.classes];
    for (i, &c) in pool.train.classes.iter().enumerate() {
        if c >= pool.classes {
            return Err(Error::Argument("class index out of range"));
        }
        by_class[c].push(i);
    }
    let mut rng = RngStream::new(seed, SPLIT_STREAM);
    let mut labeled = Vec::with_capacity(n_s * pool.classes);
    for members in &by_class {
        if members.len() < n_s {
            return Err(Error::Argument("a class has fewer samples than n_s"));
        }
        labeled.extend(rng.sample_distinct(members.len(), n_s).into_iter().map(|j| members[j]));
    }
    SslDataset::from_parts(pool.classes, pool.train, labeled, pool.test)
}

/// Shuffled mini-batches over the unlabelled pool, one full pass per epoch;
/// the final batch of an epoch may be short.
#[derive(Debug, Clone)]
pub struct BatchIterator {
    batch_size: usize,
    order: Vec<usize>,
    epoch: usize,
}

impl BatchIterator {
    pub fn new(len: usize, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Argument("batch size must be at least one"));
        }
        Ok(Self {
            batch_size,
            order: (0..len).collect(),
            epoch: 0,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Reshuffles and returns the batches of the next epoch as index lists.
    pub fn next_epoch(&mut self, rng: &mut RngStream) -> core::slice::Chunks<'_, usize> {
        rng.shuffle(&mut self.order);
        self.epoch += 1;
        self.order.chunks(self.batch_size)
    }
}

/// Endless stream of labelled batches: the whole labelled set when it fits in
/// a batch, otherwise successive slices of a reshuffled cycle.
#[derive(Debug, Clone)]
pub struct LabeledCycler {
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
}

impl LabeledCycler {
    pub fn new(len: usize, batch_size: usize) -> Self {
        Self {
            batch_size,
            order: (0..len).collect(),
            cursor: len,
        }
    }

    /// `None` means "use every labelled row".
    pub fn next_batch(&mut self, rng: &mut RngStream) -> Option<Vec<usize>> {
        if self.order.len() <= self.batch_size {
            return None;
        }
        let mut out = Vec::with_capacity(self.batch_size);
        while out.len() < self.batch_size {
            if self.cursor == self.order.len() {
                rng.shuffle(&mut self.order);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        Some(out)
    }
}

struct StackBuf {
    buf: [u8; 48],
    len: usize,
}

impl Write for StackBuf {
    fn write_str(&mut self, s: &str) -> core::fmt::Result {
        let b = s.as_bytes();
        let end = self.len + b.len();
        if end > self.buf.len() {
            return Err(core::fmt::Error);
        }
        self.buf[self.len..end].copy_from_slice(b);
        self.len = end;
        Ok(())
    }
}

/// Rounds to the value that `{:.8e}` formatting would print.
pub fn round_sig9(v: f64) -> f64 {
    let mut b = StackBuf { buf: [0; 48], len: 0 };
    if write!(b, "{v:.8e}").is_err() {
        return v;
    }
    core::str::from_utf8(&b.buf[..b.len])
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(v)
}
