//! Empirical distributions, goodness-of-fit and two-sample tests.

pub mod oracle;
pub mod verify;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Values with optional weights (normalized on construction).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    pub values: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl EmpiricalSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample value {v}")));
        }
        Ok(Self { values, weights: None })
    }

    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::InvalidArgument("values and weights differ in length".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        let mut s = Self::new(values)?;
        s.weights = Some(weights.into_iter().map(|w| w / total).collect());
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Kish effective sample size (the plain size when unweighted).
    pub fn effective_size(&self) -> f64 {
        match &self.weights {
            None => self.values.len() as f64,
            Some(w) => 1.0 / w.iter().map(|x| x * x).sum::<f64>(),
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.weights {
            None => self.values.iter().sum::<f64>() / self.values.len() as f64,
            Some(w) => self.values.iter().zip(w).map(|(v, w)| v * w).sum(),
        }
    }

    /// `(sorted values, cumulative weight after each)`.
    fn sorted_cdf(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.values.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        let mut acc = 0.0;
        let mut xs = Vec::with_capacity(n);
        let mut cs = Vec::with_capacity(n);
        for i in idx {
            acc += match &self.weights {
                None => 1.0 / n as f64,
                Some(w) => w[i],
            };
            xs.push(self.values[i]);
            cs.push(acc);
        }
        (xs, cs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Pass when the p-value exceeds the threshold.
    PValueAbove,
    /// Pass when the statistic stays below the threshold.
    StatisticBelow,
}

/// Outcome of one statistical check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub n1: usize,
    pub n2: usize,
    pub seed: u64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub pass: bool,
    pub metadata: BTreeMap<String, String>,
}

impl TestReport {
    pub fn from_p_value(name: impl Into<String>, statistic: f64, p: f64, n1: usize, n2: usize, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            p_value: Some(p),
            n1,
            n2,
            seed: 0,
            threshold,
            verdict: Verdict::PValueAbove,
            pass: p > threshold,
            metadata: BTreeMap::new(),
        }
    }

    pub fn bound(name: impl Into<String>, statistic: f64, bound: f64, n1: usize, n2: usize) -> Self {
        Self {
            name: name.into(),
            statistic,
            p_value: None,
            n1,
            n2,
            seed: 0,
            threshold: bound,
            verdict: Verdict::StatisticBelow,
            pass: statistic < bound,
            metadata: BTreeMap::new(),
        }
    }

    /// Re-evaluates the verdict against a new threshold.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.pass = match self.verdict {
            Verdict::PValueAbove => self.p_value.is_some_and(|p| p > threshold),
            Verdict::StatisticBelow => self.statistic < threshold,
        };
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }
}

/// A group of reports judged together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestBundle {
    pub name: String,
    pub level: f64,
    pub pass: bool,
    pub reports: Vec<TestReport>,
    pub warnings: Vec<String>,
}

impl TestBundle {
    /// Applies the Bonferroni threshold `level / m` to the p-value tests;
    /// bound-type reports keep their own thresholds.
    pub fn bonferroni(name: impl Into<String>, level: f64, reports: Vec<TestReport>) -> Self {
        let m = reports.iter().filter(|r| r.verdict == Verdict::PValueAbove).count().max(1);
        let reports: Vec<TestReport> = reports
            .into_iter()
            .map(|r| match r.verdict {
                Verdict::PValueAbove => r.with_threshold(level / m as f64),
                Verdict::StatisticBelow => r,
            })
            .collect();
        let pass = reports.iter().all(|r| r.pass);
        Self {
            name: name.into(),
            level,
            pass,
            reports,
            warnings: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        for r in &mut self.reports {
            r.seed = seed;
        }
        self
    }
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            s += (-m * m * c).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn ks_p_value(d: f64, en: f64) -> f64 {
    let s = en.sqrt();
    kolmogorov_survival((s + 0.12 + 0.11 / s) * d)
}

/// Sup distance between two (weighted) empirical CDFs.
pub fn ks_distance(a: &EmpiricalSample, b: &EmpiricalSample) -> f64 {
    let (xa, ca) = a.sorted_cdf();
    let (xb, cb) = b.sorted_cdf();
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut d = 0.0f64;
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => break,
        };
        while i < xa.len() && xa[i] <= x {
            fa = ca[i];
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            fb = cb[j];
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    d
}

/// Two-sample Kolmogorov–Smirnov test (weights allowed) with the asymptotic
/// p-value; weighted samples enter through their effective sizes.
pub fn ks_two_sample(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<TestReport> {
    if a.len() < 50 || b.len() < 50 {
        return Err(Error::InsufficientSample(format!(
            "two-sample KS needs at least 50 values per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d = ks_distance(a, b);
    let (na, nb) = (a.effective_size(), b.effective_size());
    let p = ks_p_value(d, na * nb / (na + nb));
    Ok(TestReport::from_p_value("ks_two_sample", d, p, a.len(), b.len(), 0.01)
        .meta("n1_effective", format!("{na:.1}"))
        .meta("n2_effective", format!("{nb:.1}")))
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample(a: &EmpiricalSample, cdf: impl Fn(f64) -> f64) -> Result<TestReport> {
    if a.len() < 50 {
        return Err(Error::InsufficientSample(format!("one-sample KS needs 50 values, got {}", a.len())));
    }
    let (xs, cs) = a.sorted_cdf();
    let mut d = 0.0f64;
    let mut prev = 0.0;
    for (x, c) in xs.iter().zip(&cs) {
        let f = cdf(*x);
        d = d.max((f - prev).abs()).max((c - f).abs());
        prev = *c;
    }
    let n = a.effective_size();
    let p = ks_p_value(d, n);
    Ok(TestReport::from_p_value("ks_one_sample", d, p, a.len(), 0, 0.01))
}

/// Pearson chi-square goodness of fit; `expected` are probabilities.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<TestReport> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::InvalidArgument("observed and expected bins must match (≥ 2)".into()));
    }
    let n: u64 = observed.iter().sum();
    let total_p: f64 = expected.iter().sum();
    let mut stat = 0.0;
    for (o, p) in observed.iter().zip(expected) {
        let e = n as f64 * p / total_p;
        if !(e > 0.0) {
            return Err(Error::InvalidArgument("expected count must be positive".into()));
        }
        stat += (*o as f64 - e).powi(2) / e;
    }
    let df = (observed.len() - 1) as f64;
    let p = ChiSquared::new(df).expect("positive degrees of freedom").sf(stat);
    Ok(TestReport::from_p_value("chi_square_gof", stat, p, n as usize, 0, 0.01).meta("df", df))
}

/// Pearson chi-square test of independence on a contingency table (empty
/// rows and columns are dropped).
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<TestReport> {
    let rows: Vec<&Vec<u64>> = table.iter().filter(|r| r.iter().sum::<u64>() > 0).collect();
    let width = table.first().map_or(0, |r| r.len());
    let cols: Vec<usize> = (0..width).filter(|&j| rows.iter().map(|r| r[j]).sum::<u64>() > 0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return Err(Error::InsufficientSample("contingency table needs two nonempty rows and columns".into()));
    }
    let n: f64 = rows.iter().map(|r| r.iter().sum::<u64>() as f64).sum();
    let row_tot: Vec<f64> = rows.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_tot: Vec<f64> = cols.iter().map(|&j| rows.iter().map(|r| r[j] as f64).sum()).collect();
    let mut stat = 0.0;
    for (i, r) in rows.iter().enumerate() {
        for (jj, &j) in cols.iter().enumerate() {
            let e = row_tot[i] * col_tot[jj] / n;
            stat += (r[j] as f64 - e).powi(2) / e;
        }
    }
    let df = ((rows.len() - 1) * (cols.len() - 1)) as f64;
    let p = ChiSquared::new(df).expect("positive degrees of freedom").sf(stat);
    Ok(TestReport::from_p_value("chi_square_independence", stat, p, n as usize, 0, 0.01).meta("df", df))
}

/// Energy-distance permutation test for multivariate samples; at most
/// `max_per_side` points of each sample enter (the first ones).
pub fn energy_test(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    permutations: usize,
    max_per_side: usize,
    rng: &mut RngStream,
) -> Result<TestReport> {
    let a = &a[..a.len().min(max_per_side)];
    let b = &b[..b.len().min(max_per_side)];
    if a.len() < 20 || b.len() < 20 {
        return Err(Error::InsufficientSample("energy test needs at least 20 points per side".into()));
    }
    let pts: Vec<&Vec<f64>> = a.iter().chain(b).collect();
    let n = pts.len();
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = pts[i].iter().zip(pts[j].iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let (na, nb) = (a.len(), b.len());
    let stat = |labels: &[bool]| -> f64 {
        let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let row = &dist[i * n..(i + 1) * n];
            for j in (i + 1)..n {
                let d = row[j];
                match (labels[i], labels[j]) {
                    (true, true) => aa += d,
                    (false, false) => bb += d,
                    _ => ab += d,
                }
            }
        }
        let (fa, fb) = (na as f64, nb as f64);
        2.0 * ab / (fa * fb) - 2.0 * aa / (fa * fa) - 2.0 * bb / (fb * fb)
    };
    let mut labels: Vec<bool> = (0..n).map(|i| i < na).collect();
    let observed = stat(&labels);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        labels.shuffle(rng);
        if stat(&labels) >= observed {
            exceed += 1;
        }
    }
    let p = (1 + exceed) as f64 / (1 + permutations) as f64;
    let scaled = observed * (na * nb) as f64 / (na + nb) as f64;
    Ok(TestReport::from_p_value("energy_permutation", scaled, p, na, nb, 0.01).meta("permutations", permutations))
}

/// Percentile bootstrap interval of `statistic` over resamples of `data`.
pub fn bootstrap_interval(
    data: &[f64],
    statistic: impl Fn(&[f64]) -> f64,
    resamples: usize,
    confidence: f64,
    rng: &mut RngStream,
) -> (f64, f64) {
    let n = data.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = data[(rng.open01() * n as f64) as usize % n];
            }
            statistic(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let lo = ((1.0 - confidence) / 2.0 * resamples as f64).floor() as usize;
    let hi = (((1.0 + confidence) / 2.0 * resamples as f64).ceil() as usize).min(resamples) - 1;
    (stats[lo], stats[hi])
}

/// Counts of `values` in `bins` equal-width bins over `[lo, hi)`; values
/// outside go to the end bins.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for &v in values {
        let k = ((v - lo) / (hi - lo) * bins as f64).floor();
        let k = if k < 0.0 { 0 } else { (k as usize).min(bins - 1) };
        counts[k] += 1;
    }
    counts
}

/// Bin edges at empirical quantiles, so each bin holds about the same count.
pub fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (1..bins).map(|k| v[k * v.len() / bins]).collect()
}

/// Index of the bin that `x` falls into given interior `edges`.
pub fn bin_of(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|&e| e <= x)
}
