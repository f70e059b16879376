//! Count statistics: correlation, goodness of fit, spreads.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::error::{Error, Result};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson correlation, `None` when either margin has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of count pairs.
pub fn pearson_counts(pairs: &[(u64, u64)]) -> Option<f64> {
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().map(|(x, y)| (*x as f64, *y as f64)).unzip();
    pearson(&a, &b)
}

/// Square 2D histogram with unit-width bins `0..size`, overflow clamped to
/// the last bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram2d {
    pub size: usize,
    pub counts: Vec<u64>,
}

impl Histogram2d {
    pub fn new(pairs: &[(u64, u64)], size: usize) -> Self {
        let mut counts = vec![0u64; size * size];
        for &(a, b) in pairs {
            let i = (a as usize).min(size - 1);
            let j = (b as usize).min(size - 1);
            counts[i * size + j] += 1;
        }
        Self { size, counts }
    }

    pub fn get(&self, first: usize, second: usize) -> u64 {
        self.counts[first * self.size + second]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Histogram of `values` in unit bins `0..size`, overflow clamped.
pub fn histogram(values: impl IntoIterator<Item = u64>, size: usize) -> Vec<u64> {
    let mut h = vec![0u64; size];
    for v in values {
        h[(v as usize).min(size - 1)] += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMetrics {
    pub pearson_r: Option<f64>,
    pub histogram: Histogram2d,
    /// Second-count histogram for pairs with first count `< threshold`.
    pub below: Vec<u64>,
    /// Second-count histogram for pairs with first count `>= threshold`.
    pub above: Vec<u64>,
}

pub fn correlation_metrics(pairs: &[(u64, u64)], threshold: u64, size: usize) -> Result<CorrelationMetrics> {
    if pairs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "correlation needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    if size == 0 {
        return Err(Error::InvalidInput("histogram size must be > 0".into()));
    }
    Ok(CorrelationMetrics {
        pearson_r: pearson_counts(pairs),
        histogram: Histogram2d::new(pairs, size),
        below: histogram(pairs.iter().filter(|p| p.0 < threshold).map(|p| p.1), size),
        above: histogram(pairs.iter().filter(|p| p.0 >= threshold).map(|p| p.1), size),
    })
}

/// Fraction of pairs off the diagonal by more than four Poisson standard
/// deviations (`|C1 - C2| > 4 sqrt(C1 + C2 + 1)`).
pub fn band_occupancy(pairs: &[(u64, u64)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let off = pairs
        .iter()
        .filter(|(a, b)| {
            let (a, b) = (*a as f64, *b as f64);
            (a - b).abs() > 4.0 * (a + b + 1.0).sqrt()
        })
        .count();
    off as f64 / pairs.len() as f64
}

/// `(std, std / sqrt(2(n - 1)))` with the sample standard deviation.
pub fn center_statistics(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "center statistics need at least 3 values, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite center".into()));
    }
    let n = xs.len() as f64;
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    Ok((sd, sd / (2.0 * (n - 1.0)).sqrt()))
}

/// Variance over mean.
pub fn fano_factor(xs: &[u64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<u64>() as f64 / n;
    if m == 0.0 {
        return None;
    }
    let var = xs.iter().map(|x| (*x as f64 - m).powi(2)).sum::<f64>() / (n - 1.0);
    Some(var / m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Pearson χ² goodness of fit of count samples against Poisson(`mean`);
/// tail bins are pooled until every expected count is at least 5.
pub fn chi_square_poisson(samples: &[u64], mean: f64) -> Result<TestResult> {
    if samples.is_empty() || !(mean > 0.0) {
        return Err(Error::InvalidInput("need samples and a positive mean".into()));
    }
    let n = samples.len() as f64;
    let dist = Poisson::new(mean).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let max = *samples.iter().max().unwrap() as usize;
    let hi = max.max((mean + 10.0 * mean.sqrt() + 10.0) as usize);
    let observed = histogram(samples.iter().copied(), hi + 1);
    let expected: Vec<f64> = (0..=hi).map(|k| n * dist.pmf(k as u64)).collect();
    // pool from both ends toward the mode
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for k in 0..=hi {
        o += observed[k] as f64;
        e += expected[k];
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    // remainder of the upper tail, including mass beyond `hi`
    let tail = n - cells.iter().map(|c| c.1).sum::<f64>() - e;
    e += tail.max(0.0);
    if let Some(last) = cells.last_mut() {
        last.0 += o;
        last.1 += e;
    } else {
        cells.push((o, e));
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1).max(1) as f64;
    let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
    Ok(TestResult {
        statistic: stat,
        dof,
        p_value: p,
    })
}

/// Index-of-dispersion test `Σ(x - x̄)²/x̄ ~ χ²(n - 1)`, two-sided.
pub fn dispersion_test(samples: &[u64]) -> Result<TestResult> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput("dispersion test needs at least 2 samples".into()));
    }
    let n = samples.len() as f64;
    let m = samples.iter().sum::<u64>() as f64 / n;
    if m == 0.0 {
        return Err(Error::InvalidInput("dispersion test needs a positive mean".into()));
    }
    let d = samples.iter().map(|x| (*x as f64 - m).powi(2)).sum::<f64>() / m;
    let dof = n - 1.0;
    let cdf = ChiSquared::new(dof).unwrap().cdf(d);
    Ok(TestResult {
        statistic: d,
        dof,
        p_value: (2.0 * cdf.min(1.0 - cdf)).min(1.0),
    })
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic distribution.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("KS test needs two non-empty samples".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(TestResult {
        statistic: d,
        dof: ne,
        p_value: kolmogorov_q(lambda),
    })
}

/// `Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = sign * (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `P(C >= θ)` for each threshold.
pub fn pass_probability_curve(counts: &[u64], thresholds: &[u64]) -> Vec<(u64, f64)> {
    let n = counts.len().max(1) as f64;
    thresholds
        .iter()
        .map(|&t| (t, counts.iter().filter(|&&c| c >= t).count() as f64 / n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::rng::derive_stream;
    use crate::physics::counting::poisson;
    use proptest::prelude::*;

    #[test]
    fn perfect_correlation() {
        let pairs: Vec<(u64, u64)> = (0..50).map(|k| (k, k)).collect();
        assert_eq!(pearson_counts(&pairs), Some(1.0));
        let flat: Vec<(u64, u64)> = (0..50).map(|k| (3, k)).collect();
        assert_eq!(pearson_counts(&flat), None);
    }

    #[test]
    fn independent_pairs_uncorrelated() {
        let mut rng = derive_stream(1, 0);
        let n = 20_000;
        let pairs: Vec<(u64, u64)> = (0..n).map(|_| (poisson(30.0, &mut rng), poisson(30.0, &mut rng))).collect();
        let r = pearson_counts(&pairs).unwrap();
        assert!(r.abs() < 3.0 / (n as f64).sqrt(), "{r}");
    }

    #[test]
    fn conditional_histograms_partition() {
        let mut rng = derive_stream(2, 0);
        let pairs: Vec<(u64, u64)> = (0..5000).map(|_| (poisson(20.0, &mut rng), poisson(40.0, &mut rng))).collect();
        let m = correlation_metrics(&pairs, 20, 100).unwrap();
        assert_eq!(m.below.iter().sum::<u64>() + m.above.iter().sum::<u64>(), 5000);
        assert_eq!(m.histogram.total(), 5000);
        assert!(correlation_metrics(&pairs[..1], 20, 100).is_err());
    }

    #[test]
    fn center_statistics_cases() {
        assert_eq!(center_statistics(&[4.0, 4.0, 4.0]).unwrap(), (0.0, 0.0));
        assert!(center_statistics(&[1.0, 2.0]).is_err());
        let mut rng = derive_stream(3, 0);
        use rand_distr::{Distribution, Normal};
        let d = Normal::new(0.0, 25.0).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        let (sd, se) = center_statistics(&xs).unwrap();
        assert!((sd / 25.0 - 1.0).abs() < 0.005, "{sd}");
        assert!((se - 25.0 / (2.0 * 99_999.0f64).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn poisson_gof_accepts_poisson_and_rejects_shifted() {
        let mut rng = derive_stream(4, 0);
        let xs: Vec<u64> = (0..100_000).map(|_| poisson(5.0, &mut rng)).collect();
        assert!(chi_square_poisson(&xs, 5.0).unwrap().p_value > 0.01);
        assert!(chi_square_poisson(&xs, 5.2).unwrap().p_value < 1e-6);
        assert!(dispersion_test(&xs).unwrap().p_value > 0.01);
        let wide: Vec<u64> = (0..20_000).map(|i| poisson(if i % 2 == 0 { 3.0 } else { 7.0 }, &mut rng)).collect();
        assert!(dispersion_test(&wide).unwrap().p_value < 1e-6);
    }

    #[test]
    fn ks_same_and_different() {
        let mut rng = derive_stream(5, 0);
        let a: Vec<f64> = (0..5000).map(|_| poisson(30.0, &mut rng) as f64).collect();
        let b: Vec<f64> = (0..5000).map(|_| poisson(30.0, &mut rng) as f64).collect();
        let c: Vec<f64> = (0..5000).map(|_| poisson(32.0, &mut rng) as f64).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
        assert!(ks_two_sample(&a, &c).unwrap().p_value < 1e-4);
    }

    #[test]
    fn band_metric() {
        assert_eq!(band_occupancy(&[(100, 100), (100, 0), (0, 100), (50, 55)]), 0.5);
    }

    proptest! {
        #[test]
        fn pass_curve_non_increasing(counts in prop::collection::vec(0u64..300, 1..200)) {
            let th: Vec<u64> = (0..300).step_by(7).collect();
            let curve = pass_probability_curve(&counts, &th);
            for w in curve.windows(2) {
                prop_assert!(w[1].1 <= w[0].1);
            }
        }

        #[test]
        fn statistics_permutation_invariant(mut xs in prop::collection::vec(-100.0f64..100.0, 3..50), seed in 0u64..1000) {
            let a = center_statistics(&xs).unwrap();
            let ys: Vec<f64> = xs.iter().map(|x| x * 0.5 + 3.0).collect();
            let r0 = pearson(&xs, &ys);
            let mut rng = derive_stream(seed, 0);
            use rand::seq::SliceRandom;
            let mut idx: Vec<usize> = (0..xs.len()).collect();
            idx.shuffle(&mut rng);
            let ys2: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
            xs = idx.iter().map(|&i| xs[i]).collect();
            let b = center_statistics(&xs).unwrap();
            prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
            match (r0, pearson(&xs, &ys2)) {
                (Some(p), Some(q)) => prop_assert!((p - q).abs() < 1e-9),
                (None, None) => {}
                _ => prop_assert!(false),
            }
        }
    }
}
