//! Bootstrap intervals, OLS trends, the two-sample KS test and Pearson
//! correlation.
//!
//! Every randomized routine draws from ChaCha8 streams: resample `i` of a run
//! seeded with `seed` uses `ChaCha8Rng::seed_from_u64(seed)` on stream `i`.
//! Results are therefore bit-reproducible across platforms and independent of
//! how resamples are scheduled over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// The generator for stream `stream` of a seeded run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Mean,
    Variance,
}

impl Statistic {
    pub fn compute(self, values: &[f64]) -> Option<f64> {
        let (mean, var) = mean_variance(values).ok()?;
        match self {
            Statistic::Mean => Some(mean),
            Statistic::Variance => var,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub statistic_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl BootstrapResult {
    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Linear-interpolation quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = q * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// `n_resamples` draws of `stat` over `sample_size` values taken with
/// replacement from `population`. Draws where `stat` is undefined are
/// dropped.
pub fn resample_statistics<F>(
    population: &[f64],
    sample_size: usize,
    n_resamples: usize,
    seed: u64,
    stat: F,
) -> Vec<f64>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    (0..n_resamples)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(sample_size),
            |buf, i| {
                let mut rng = stream_rng(seed, i as u64);
                buf.clear();
                buf.extend((0..sample_size).map(|_| population[rng.random_range(0..population.len())]));
                stat(buf)
            },
        )
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Percentile interval of sorted draws at confidence `level`.
pub fn percentile_interval(mut draws: Vec<f64>, level: f64) -> Result<(f64, f64)> {
    if draws.is_empty() {
        return Err(Error::InsufficientData("no bootstrap draws".into()));
    }
    draws.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&draws, tail), quantile_sorted(&draws, 1.0 - tail)))
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("confidence level must lie in (0,1), got {level}")))
    }
}

/// Percentile bootstrap interval for the mean or variance of `values`.
pub fn bootstrap_ci(
    values: &[f64],
    statistic: Statistic,
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapResult> {
    if values.is_empty() {
        return Err(Error::InsufficientData("bootstrap of an empty sample".into()));
    }
    if n_resamples == 0 {
        return Err(Error::InvalidArgument("n_resamples must be >= 1".into()));
    }
    check_level(level)?;
    let statistic_value = statistic
        .compute(values)
        .ok_or_else(|| Error::InsufficientData("variance needs at least 2 values".into()))?;
    let draws = resample_statistics(values, values.len(), n_resamples, seed, |s| statistic.compute(s));
    let (ci_low, ci_high) = percentile_interval(draws, level)?;
    Ok(BootstrapResult { statistic_value, ci_low, ci_high, n_resamples, level, seed })
}

/// Sample mean and unbiased variance (absent for a single value).
pub fn mean_variance(values: &[f64]) -> Result<(f64, Option<f64>)> {
    if values.is_empty() {
        return Err(Error::InsufficientData("mean of an empty sample".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = (values.len() > 1)
        .then(|| values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0));
    Ok((mean, var))
}

/// Year span `[start, end)`, or `[start, end]` when `closed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Epoch {
    pub start: i32,
    pub end: i32,
    pub closed: bool,
}

impl Epoch {
    pub fn half_open(start: i32, end: i32) -> Self {
        Self { start, end, closed: false }
    }

    pub fn contains(&self, year: i32) -> bool {
        year >= self.start && (year < self.end || (self.closed && year == self.end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
    pub n_points: usize,
    pub epoch: Epoch,
}

/// Ordinary least squares `(slope, intercept)`.
pub fn least_squares(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("OLS needs at least 2 points".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::SingularFit("all x values identical".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapOptions {
    pub n_resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self { n_resamples: 1000, level: 0.95, seed: 0 }
    }
}

/// OLS trend of the points whose year lies in `epoch`; the slope interval
/// comes from a pairs bootstrap (degenerate resamples with a single distinct
/// year are skipped).
pub fn ols_fit(points: &[(i32, f64)], epoch: Epoch, options: &BootstrapOptions) -> Result<TrendFit> {
    check_level(options.level)?;
    let inside: Vec<(f64, f64)> =
        points.iter().filter(|(y, _)| epoch.contains(*y)).map(|&(y, v)| (f64::from(y), v)).collect();
    let (slope, intercept) = least_squares(&inside)?;
    let n = inside.len();
    let draws: Vec<f64> = (0..options.n_resamples)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf, i| {
                let mut rng = stream_rng(options.seed, i as u64);
                buf.clear();
                buf.extend((0..n).map(|_| inside[rng.random_range(0..n)]));
                least_squares(buf).ok().map(|(s, _)| s)
            },
        )
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let slope_ci = if draws.is_empty() { (slope, slope) } else { percentile_interval(draws, options.level)? };
    Ok(TrendFit { slope, intercept, slope_ci, n_points: n, epoch })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let k = f64::from(k);
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS statistic `D = sup |F_a - F_b|` with an asymptotic p-value
/// at effective size `n_a n_b / (n_a + n_b)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("KS test needs two non-empty samples".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = xs[i].min(ys[j]);
        while i < na && xs[i] <= x {
            i += 1;
        }
        while j < nb && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    Ok(KsResult { statistic: d, p_value: kolmogorov_survival(ne.sqrt() * d) })
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument("pearson needs two equal-length samples of size >= 2".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    #[test]
    fn bootstrap_constant_data() {
        let r = bootstrap_ci(&[2.5; 30], Statistic::Mean, 200, 0.95, 7).unwrap();
        assert_eq!((r.ci_low, r.ci_high, r.statistic_value), (2.5, 2.5, 2.5));
        let r = bootstrap_ci(&[2.5; 30], Statistic::Mean, 1, 0.95, 7).unwrap();
        assert_eq!((r.ci_low, r.ci_high), (2.5, 2.5));
        let r = bootstrap_ci(&[2.5; 30], Statistic::Variance, 50, 0.95, 7).unwrap();
        assert_eq!((r.ci_low, r.ci_high), (0.0, 0.0));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let v: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = bootstrap_ci(&v, Statistic::Variance, 300, 0.9, 11).unwrap();
        let b = bootstrap_ci(&v, Statistic::Variance, 300, 0.9, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low <= a.ci_high);
        let c = bootstrap_ci(&v, Statistic::Variance, 300, 0.9, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bootstrap_errors() {
        assert!(bootstrap_ci(&[], Statistic::Mean, 10, 0.95, 0).is_err());
        assert!(bootstrap_ci(&[1.0], Statistic::Variance, 10, 0.95, 0).is_err());
        assert!(bootstrap_ci(&[1.0, 2.0], Statistic::Mean, 0, 0.95, 0).is_err());
        assert!(bootstrap_ci(&[1.0, 2.0], Statistic::Mean, 10, 1.0, 0).is_err());
    }

    #[test]
    fn mean_variance_cases() {
        assert_eq!(mean_variance(&[4.0]).unwrap(), (4.0, None));
        assert_eq!(mean_variance(&[1.0, 3.0]).unwrap(), (2.0, Some(2.0)));
        assert!(mean_variance(&[]).is_err());
    }

    #[test]
    fn ols_exact_lines() {
        let fit = ols_fit(&[(0, 0.0), (1, 1.0), (2, 2.0)], Epoch::half_open(0, 10), &BootstrapOptions::default()).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12 && fit.intercept.abs() < 1e-12);
        let fit = ols_fit(&[(0, 1.0), (1, 3.0), (2, 5.0)], Epoch::half_open(0, 10), &BootstrapOptions::default()).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && (fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.slope_ci.0 - 2.0).abs() < 1e-9 && (fit.slope_ci.1 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn ols_respects_epoch_bounds() {
        let pts = [(1983, 9.0), (1984, 1.0), (1985, 2.0), (1991, -50.0)];
        let fit = ols_fit(&pts, Epoch::half_open(1983, 1991), &BootstrapOptions::default()).unwrap();
        assert_eq!(fit.n_points, 3);
        let closed = Epoch { start: 1984, end: 1991, closed: true };
        assert_eq!(ols_fit(&pts, closed, &BootstrapOptions::default()).unwrap().n_points, 3);
    }

    #[test]
    fn ols_singular() {
        let r = ols_fit(&[(1970, 1.0), (1970, 2.0)], Epoch::half_open(1960, 2000), &BootstrapOptions::default());
        assert!(matches!(r, Err(Error::SingularFit(_))));
    }

    #[test]
    fn ols_recovers_planted_slope() {
        use rand_distr::{Distribution, Normal};
        let mut rng = stream_rng(3, 0);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let pts: Vec<(i32, f64)> = (0..500)
            .map(|i| {
                let year = 1960 + (i % 50);
                (year, 3.0 - 0.01 * f64::from(year - 1960) + noise.sample(&mut rng))
            })
            .collect();
        let fit = ols_fit(&pts, Epoch::half_open(1960, 2010), &BootstrapOptions { seed: 5, ..Default::default() }).unwrap();
        assert!(fit.slope_ci.0 <= -0.01 && -0.01 <= fit.slope_ci.1, "{fit:?}");
        // normal-equations oracle
        let n = pts.len() as f64;
        let (sx, sy, sxx, sxy) = pts.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(x, y)| {
            let x = f64::from(x);
            (acc.0 + x, acc.1 + y, acc.2 + x * x, acc.3 + x * y)
        });
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((slope - fit.slope).abs() < 1e-9);
    }

    #[test]
    fn ks_cases() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap().statistic, 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[10.0, 20.0]).unwrap().statistic, 1.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap().statistic, 0.25);
        assert!(ks_two_sample(&[], &[1.0]).is_err());
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap().p_value, 1.0);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Q(1.36) ≈ 0.0494, Q(1.0) ≈ 0.2700
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_survival(1.0) - 0.27).abs() < 1e-3);
    }

    #[test]
    fn pearson_cases() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn ks_symmetric_and_bounded(a in prop::collection::vec(-5.0f64..5.0, 1..30), b in prop::collection::vec(-5.0f64..5.0, 1..30)) {
            let ab = ks_two_sample(&a, &b).unwrap().statistic;
            let ba = ks_two_sample(&b, &a).unwrap().statistic;
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn pearson_affine(a in prop::collection::vec(-5.0f64..5.0, 3..20), seed in 0u64..1000, scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
            let mut rng = stream_rng(seed, 0);
            let b: Vec<f64> = a.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = pearson(&a, &b).unwrap();
            let pos: Vec<f64> = b.iter().map(|x| scale * x + shift).collect();
            let neg: Vec<f64> = b.iter().map(|x| -scale * x + shift).collect();
            prop_assert!((pearson(&a, &pos).unwrap() - r).abs() < 1e-9);
            prop_assert!((pearson(&a, &neg).unwrap() + r).abs() < 1e-9);
        }

        #[test]
        fn ols_residuals_sum_to_zero(ys in prop::collection::vec(-10.0f64..10.0, 2..30)) {
            let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
            let (s, c) = least_squares(&pts).unwrap();
            let resid: f64 = pts.iter().map(|(x, y)| y - (s * x + c)).sum();
            prop_assert!(resid.abs() < 1e-9);
        }

        #[test]
        fn mean_variance_permutation_invariant(mut v in prop::collection::vec(-10.0f64..10.0, 2..30)) {
            let (m1, v1) = mean_variance(&v).unwrap();
            v.reverse();
            let (m2, v2) = mean_variance(&v).unwrap();
            prop_assert!((m1 - m2).abs() < 1e-12);
            prop_assert!((v1.unwrap() - v2.unwrap()).abs() < 1e-9);
        }
    }
}
