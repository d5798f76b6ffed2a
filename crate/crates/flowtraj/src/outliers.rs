//! Background outlier removal over flow-vector magnitudes.
//!
//! The main technique bounds the magnitude distribution with a shift factor
//! from the nonparametric skew and a scale factor from the log-histogram
//! median/mode ratio (Freedman-Diaconis bin width). Simple std/z-score
//! baselines are included for comparison.

use thiserror::Error;

use crate::pgm::GrayImage;
use crate::sampling::FlowVector;

#[derive(Debug, Error)]
pub enum OutlierError {
    #[error("need at least {min} samples, have {actual}")]
    TooFewSamples { min: usize, actual: usize },
    #[error("magnitudes must be positive for the log transform")]
    NonPositive,
}

/// Bounds of the magnitude acceptance interval plus all intermediate
/// quantities, kept for inspection and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierBounds {
    /// Nonparametric skew (mean - median) / stddev, in [-1, 1].
    pub gamma: f64,
    pub chi_minus: f64,
    pub chi_plus: f64,
    /// Scale factor 1 - median_bin/modal_bin of the log histogram, in [0, 1].
    pub rho: f64,
    pub s_minus: f64,
    pub s_plus: f64,
    pub ell_minus: f64,
    pub ell_plus: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    /// Set when sigma or IQR degenerate; the bounds then pass everything.
    pub degenerate: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64], mu: f64) -> f64 {
    (xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Linear-interpolated quantile on sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Estimates the acceptance interval [lambda-, lambda+] of a magnitude
/// sample. Requires n >= 4 positive values.
pub fn skew_chebyshev_bounds(magnitudes: &[f64]) -> Result<OutlierBounds, OutlierError> {
    if magnitudes.len() < 4 {
        return Err(OutlierError::TooFewSamples {
            min: 4,
            actual: magnitudes.len(),
        });
    }
    if magnitudes.iter().any(|&m| m <= 0.0 || !m.is_finite()) {
        return Err(OutlierError::NonPositive);
    }
    let mut sorted = magnitudes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let mu = mean(magnitudes);
    let sigma = population_std(magnitudes, mu);
    let nu = median_sorted(&sorted);

    let pass_all = |gamma: f64, degenerate: bool| OutlierBounds {
        gamma,
        chi_minus: 0.0,
        chi_plus: 0.0,
        rho: 0.0,
        s_minus: 0.0,
        s_plus: 0.0,
        ell_minus: 0.0,
        ell_plus: 0.0,
        lambda_minus: min,
        lambda_plus: max,
        degenerate,
    };

    if sigma <= 0.0 {
        return Ok(pass_all(0.0, true));
    }
    let gamma = (mu - nu) / sigma;
    let (chi_minus, chi_plus) = if gamma > 0.0 {
        (gamma.abs(), 0.0)
    } else if gamma < 0.0 {
        (0.0, gamma.abs())
    } else {
        (0.0, 0.0)
    };

    // Scale factor from the log-transformed distribution.
    let mut logs: Vec<f64> = sorted.iter().map(|m| m.ln()).collect();
    logs.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&logs, 0.75) - quantile_sorted(&logs, 0.25);
    if iqr <= 0.0 {
        return Ok(pass_all(gamma, true));
    }
    let bin_w = 2.0 * iqr * (logs.len() as f64).powf(-1.0 / 3.0);
    let lo = logs[0];
    let hi = logs[logs.len() - 1];
    let nbins = (((hi - lo) / bin_w).ceil() as usize).max(1);
    let mut counts = vec![0usize; nbins];
    for &l in &logs {
        let b = (((l - lo) / bin_w) as usize).min(nbins - 1);
        counts[b] += 1;
    }
    let log_median = median_sorted(&logs);
    let median_bin = (((log_median - lo) / bin_w) as usize).min(nbins - 1);
    let tilde = counts[median_bin] as f64;
    let hat = *counts.iter().max().unwrap() as f64;
    let rho = 1.0 - tilde / hat;

    let s_minus = rho * chi_minus;
    let s_plus = rho * chi_plus;
    let ell_minus = sigma * s_minus;
    let ell_plus = sigma * s_plus;
    Ok(OutlierBounds {
        gamma,
        chi_minus,
        chi_plus,
        rho,
        s_minus,
        s_plus,
        ell_minus,
        ell_plus,
        lambda_minus: min + ell_minus,
        lambda_plus: max - ell_plus,
        degenerate: false,
    })
}

/// Outlier removal technique selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutlierMethod {
    /// Skew/Chebyshev bounds on raw magnitudes.
    Ours,
    /// Keep |L - mean| <= 3 stddev on raw magnitudes.
    Std3,
    /// Standard z-score on log magnitudes, keep |z| <= k.
    ZScore { k: f64 },
    /// Modified z-score (median/MAD) on log magnitudes, keep |M| <= k.
    MZScore { k: f64 },
}

/// Splits vectors into (kept, removed). The two sets partition the input.
pub fn remove_outliers(
    vectors: Vec<FlowVector>,
    method: OutlierMethod,
) -> Result<(Vec<FlowVector>, Vec<FlowVector>), OutlierError> {
    if vectors.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let mags: Vec<f64> = vectors.iter().map(|f| f.magnitude).collect();
    let keep: Box<dyn Fn(f64) -> bool> = match method {
        OutlierMethod::Ours => {
            let b = skew_chebyshev_bounds(&mags)?;
            Box::new(move |m| m >= b.lambda_minus && m <= b.lambda_plus)
        }
        OutlierMethod::Std3 => {
            let mu = mean(&mags);
            let sigma = population_std(&mags, mu);
            Box::new(move |m| (m - mu).abs() <= 3.0 * sigma)
        }
        OutlierMethod::ZScore { k } => {
            if mags.iter().any(|&m| m <= 0.0) {
                return Err(OutlierError::NonPositive);
            }
            let logs: Vec<f64> = mags.iter().map(|m| m.ln()).collect();
            let mu = mean(&logs);
            let sigma = population_std(&logs, mu);
            Box::new(move |m: f64| {
                if sigma <= 0.0 {
                    true
                } else {
                    ((m.ln() - mu) / sigma).abs() <= k
                }
            })
        }
        OutlierMethod::MZScore { k } => {
            if mags.iter().any(|&m| m <= 0.0) {
                return Err(OutlierError::NonPositive);
            }
            let mut logs: Vec<f64> = mags.iter().map(|m| m.ln()).collect();
            logs.sort_by(f64::total_cmp);
            let med = median_sorted(&logs);
            let mut devs: Vec<f64> = logs.iter().map(|l| (l - med).abs()).collect();
            devs.sort_by(f64::total_cmp);
            let mad = median_sorted(&devs);
            Box::new(move |m: f64| {
                if mad <= 0.0 {
                    true
                } else {
                    (0.6745 * (m.ln() - med) / mad).abs() <= k
                }
            })
        }
    };
    let (kept, removed) = vectors.into_iter().partition(|f| keep(f.magnitude));
    Ok((kept, removed))
}

/// TP/TN/FP/FN rates of a kept/removed split against a foreground mask.
/// A class with no members yields rate 1.0 and is flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationRates {
    pub tp_rate: f64,
    pub tn_rate: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
    /// Mean of TP and TN rates.
    pub tb_rate: f64,
    pub no_positives: bool,
    pub no_negatives: bool,
}

pub fn classify_against_mask(
    kept: &[FlowVector],
    removed: &[FlowVector],
    mask: &GrayImage,
) -> ClassificationRates {
    let inside = |f: &FlowVector| {
        let x = (f.x.round() as usize).min(mask.width - 1);
        let y = (f.y.round() as usize).min(mask.height - 1);
        mask.is_foreground(x, y)
    };
    let tp = kept.iter().filter(|f| inside(f)).count() as f64;
    let fp = kept.len() as f64 - tp;
    let tn = removed.iter().filter(|f| !inside(f)).count() as f64;
    let fn_ = removed.len() as f64 - tn;

    let positives = tp + fn_;
    let negatives = tn + fp;
    let tp_rate = if positives > 0.0 { tp / positives } else { 1.0 };
    let tn_rate = if negatives > 0.0 { tn / negatives } else { 1.0 };
    ClassificationRates {
        tp_rate,
        tn_rate,
        fp_rate: 1.0 - tn_rate,
        fn_rate: 1.0 - tp_rate,
        tb_rate: (tp_rate + tn_rate) / 2.0,
        no_positives: positives == 0.0,
        no_negatives: negatives == 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, LogNormal};

    fn vecs_from_mags(mags: &[f64]) -> Vec<FlowVector> {
        mags.iter()
            .map(|&m| FlowVector::new(0.0, 0.0, m, 0.0, 0))
            .collect()
    }

    #[test]
    fn symmetric_sample_removes_nothing() {
        // mean == median -> gamma = 0 -> lambda = (min, max)
        let mags = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = skew_chebyshev_bounds(&mags).unwrap();
        assert_eq!(b.gamma, 0.0);
        assert_eq!((b.chi_minus, b.chi_plus), (0.0, 0.0));
        assert_eq!((b.lambda_minus, b.lambda_plus), (1.0, 5.0));
        assert!(!b.degenerate);

        let (kept, removed) =
            remove_outliers(vecs_from_mags(&mags), OutlierMethod::Ours).unwrap();
        assert_eq!(kept.len(), 5);
        assert!(removed.is_empty());
    }

    #[test]
    fn equal_values_degenerate() {
        let b = skew_chebyshev_bounds(&[2.0; 6]).unwrap();
        assert!(b.degenerate);
        assert_eq!((b.lambda_minus, b.lambda_plus), (2.0, 2.0));
    }

    #[test]
    fn too_few_or_nonpositive_rejected() {
        assert!(matches!(
            skew_chebyshev_bounds(&[1.0, 2.0, 3.0]),
            Err(OutlierError::TooFewSamples { .. })
        ));
        assert!(matches!(
            skew_chebyshev_bounds(&[1.0, 2.0, 3.0, 0.0]),
            Err(OutlierError::NonPositive)
        ));
    }

    /// Reference arithmetic on a fixed seeded lognormal draw, written before
    /// the implementation and kept independent of it.
    #[test]
    fn lognormal_reference_arithmetic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let dist = LogNormal::new(0.0, 0.5).unwrap();
        let mags: Vec<f64> = (0..1000).map(|_| dist.sample(&mut rng)).collect();

        // Independent oracle: recompute every quantity with direct formulas.
        let n = mags.len() as f64;
        let mu = mags.iter().sum::<f64>() / n;
        let sigma = (mags.iter().map(|m| (m - mu) * (m - mu)).sum::<f64>() / n).sqrt();
        let mut sorted = mags.clone();
        sorted.sort_by(f64::total_cmp);
        let nu = (sorted[499] + sorted[500]) / 2.0;
        let gamma = (mu - nu) / sigma;
        assert!(gamma > 0.0, "lognormal draw should be right-skewed");

        let b = skew_chebyshev_bounds(&mags).unwrap();
        assert!((b.gamma - gamma).abs() < 1e-12);
        assert!(b.lambda_minus > sorted[0], "lower bound must rise above min");
        assert_eq!(b.lambda_plus, sorted[999], "gamma > 0 leaves the top open");
        assert!(b.rho >= 0.0 && b.rho <= 1.0);
        assert!((b.ell_minus - sigma * b.rho * gamma).abs() < 1e-12);
        // bulk never excluded
        assert!(b.lambda_minus <= nu && nu <= b.lambda_plus);
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let dist = LogNormal::new(0.0, 0.4).unwrap();
        let mags: Vec<f64> = (0..300).map(|_| dist.sample(&mut rng)).collect();
        let scaled: Vec<f64> = mags.iter().map(|m| m * 3.5).collect();
        let a = skew_chebyshev_bounds(&mags).unwrap();
        let b = skew_chebyshev_bounds(&scaled).unwrap();
        assert!((a.rho - b.rho).abs() < 1e-9, "rho is log-translation invariant");
        assert!((a.lambda_minus * 3.5 - b.lambda_minus).abs() < 1e-6);
        assert!((a.lambda_plus * 3.5 - b.lambda_plus).abs() < 1e-6);
    }

    #[test]
    fn std3_removes_far_point() {
        // Direct arithmetic oracle. A lone extreme among n samples has
        // z = (n-1)/sqrt(n) at most, so n must exceed 9 for a 3-sigma cut;
        // with twelve 1s the point at 100 sits at z = 11/sqrt(12) > 3.
        let mut mags = vec![1.0; 12];
        mags.push(100.0);
        let mu = mean(&mags);
        let sigma = population_std(&mags, mu);
        assert!((100.0 - mu).abs() > 3.0 * sigma);
        assert!((1.0 - mu).abs() <= 3.0 * sigma);

        let (kept, removed) =
            remove_outliers(vecs_from_mags(&mags), OutlierMethod::Std3).unwrap();
        assert_eq!(removed.len(), 1);
        assert!((removed[0].magnitude - 100.0).abs() < 1e-12);
        assert_eq!(kept.len(), 12);
    }

    #[test]
    fn partition_property() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let dist = LogNormal::new(0.0, 0.6).unwrap();
        let vecs = vecs_from_mags(&(0..200).map(|_| dist.sample(&mut rng)).collect::<Vec<_>>());
        for method in [
            OutlierMethod::Ours,
            OutlierMethod::Std3,
            OutlierMethod::ZScore { k: 3.0 },
            OutlierMethod::MZScore { k: 3.5 },
        ] {
            let (kept, removed) = remove_outliers(vecs.clone(), method).unwrap();
            assert_eq!(kept.len() + removed.len(), vecs.len(), "{method:?}");
        }
    }

    #[test]
    fn mask_rates_direct_counts() {
        let mut mask = GrayImage::new(4, 1);
        mask.set(0, 0, 255);
        mask.set(1, 0, 255);
        let at = |x: f64| FlowVector::new(x, 0.0, 1.0, 0.0, 0);
        // 2 in, 2 out; one of each removed
        let kept = vec![at(0.0), at(2.0)];
        let removed = vec![at(1.0), at(3.0)];
        let r = classify_against_mask(&kept, &removed, &mask);
        assert_eq!((r.tp_rate, r.tn_rate, r.tb_rate), (0.5, 0.5, 0.5));

        // all inside, none removed
        let r = classify_against_mask(&[at(0.0), at(1.0)], &[], &mask);
        assert_eq!(r.tp_rate, 1.0);
        assert_eq!(r.tn_rate, 1.0);
        assert!(r.no_negatives);

        // all outside, all removed
        let r = classify_against_mask(&[], &[at(2.0), at(3.0)], &mask);
        assert_eq!(r.tn_rate, 1.0);
        assert!(r.no_positives);
    }
}
