//! Small statistical toolbox: summaries, least squares, two-sample tests.

use crate::rng::Stream;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() as f64 - 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }
}

/// Ordinary least squares fit y = a x + b.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LinFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let dof = (n - 2.0).max(1.0);
    let slope_se = (ss_res / dof / sxx).sqrt();
    LinFit {
        slope,
        intercept,
        r2,
        slope_se,
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (n, m) = (sa.len(), sb.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = sa[i].min(sb[j]);
        while i < n && sa[i] <= x {
            i += 1;
        }
        while j < m && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at the given level.
pub fn ks_two_sample_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// One-sample KS statistic against a CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Upper quantile of chi-square via the Wilson-Hilferty cube approximation;
/// adequate for the 1%-level screening tests used here.
pub fn chi2_upper_quantile(df: f64, alpha: f64) -> f64 {
    let z = normal_upper_quantile(alpha);
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + z * a.sqrt()).powi(3)
}

/// Upper quantile of the standard normal (Acklam-style rational approx).
pub fn normal_upper_quantile(alpha: f64) -> f64 {
    -normal_quantile(alpha)
}

pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    // Peter Acklam's approximation, |rel err| < 1.2e-9.
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// Chi-square homogeneity statistic for two histograms over the same bins.
/// Returns (statistic, degrees of freedom). Bins empty in both are skipped.
pub fn chi2_homogeneity(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum();
    let nb: f64 = b.iter().sum();
    let mut stat = 0.0;
    let mut used = 0usize;
    for (&ca, &cb) in a.iter().zip(b) {
        let tot = ca + cb;
        if tot == 0.0 {
            continue;
        }
        used += 1;
        let ea = tot * na / (na + nb);
        let eb = tot * nb / (na + nb);
        stat += (ca - ea) * (ca - ea) / ea + (cb - eb) * (cb - eb) / eb;
    }
    (stat, (used.saturating_sub(1)) as f64)
}

/// Energy-distance two-sample statistic for d-dimensional samples stored as
/// flat rows, with a label-permutation p-value.
pub fn energy_distance_perm(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    n_perm: usize,
    rng: &mut Stream,
) -> (f64, f64) {
    let pooled: Vec<&Vec<f64>> = a.iter().chain(b.iter()).collect();
    let n = pooled.len();
    let mut dmat = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = crate::point_process::dist(pooled[i], pooled[j]);
            dmat[i * n + j] = d;
            dmat[j * n + i] = d;
        }
    }
    let stat_for = |labels: &[usize]| -> f64 {
        let na = a.len();
        let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dmat[i * n + j];
                match (labels[i] < na, labels[j] < na) {
                    (true, true) => aa += d,
                    (false, false) => bb += d,
                    _ => ab += d,
                }
            }
        }
        let (na, nb) = (a.len() as f64, b.len() as f64);
        2.0 * ab / (na * nb) - 2.0 * aa / (na * na) - 2.0 * bb / (nb * nb)
    };
    let ident: Vec<usize> = (0..n).collect();
    let observed = stat_for(&ident);
    let mut count = 0usize;
    let mut labels = ident.clone();
    for _ in 0..n_perm {
        labels.shuffle(rng);
        if stat_for(&labels) >= observed {
            count += 1;
        }
    }
    let p = (count + 1) as f64 / (n_perm + 1) as f64;
    (observed, p)
}

/// Lag-1 autocorrelation of a series.
pub fn lag1_autocorr(xs: &[f64]) -> f64 {
    let n = xs.len();
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    let num: f64 = (1..n).map(|i| (xs[i - 1] - m) * (xs[i] - m)).sum();
    num / denom
}

/// Two-sided permutation p-value for the lag-1 autocorrelation.
pub fn perm_test_lag1(xs: &[f64], n_perm: usize, rng: &mut Stream) -> (f64, f64) {
    let observed = lag1_autocorr(xs);
    let mut work = xs.to_vec();
    let mut count = 0usize;
    for _ in 0..n_perm {
        work.shuffle(rng);
        if lag1_autocorr(&work).abs() >= observed.abs() {
            count += 1;
        }
    }
    ((count + 1) as f64 / (n_perm + 1) as f64, observed)
}

/// Empirical survival function evaluated at `t`.
pub fn survival(samples: &[f64], t: f64) -> f64 {
    samples.iter().filter(|&&x| x > t).count() as f64 / samples.len() as f64
}

/// Batch-means confidence half-width at ~95% (2 SE) for replication means.
pub fn two_se(xs: &[f64]) -> f64 {
    2.0 * (variance(xs) / xs.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn linear_fit_recovers_line() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let fit = linear_fit(&xs, &ys);
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept + 2.0).abs() < 1e-10);
        assert!(fit.r2 > 0.999999);
    }

    #[test]
    fn ks_two_sample_same_dist_small() {
        let mut r = stream(1, "ks", 0);
        let a: Vec<f64> = (0..800).map(|_| r.gen::<f64>()).collect();
        let b: Vec<f64> = (0..800).map(|_| r.gen::<f64>()).collect();
        let d = ks_two_sample(&a, &b);
        assert!(d < ks_two_sample_critical(800, 800, 0.01), "d = {d}");
    }

    #[test]
    fn ks_one_sample_uniform() {
        let mut r = stream(2, "ks", 0);
        let a: Vec<f64> = (0..2000).map(|_| r.gen::<f64>()).collect();
        let d = ks_one_sample(&a, |x| x.clamp(0.0, 1.0));
        assert!(d < 1.63 / (2000f64).sqrt(), "d = {d}");
    }

    #[test]
    fn chi2_quantile_sane() {
        // chi2(6) at 1% is 16.81, chi2(1) at 1% is 6.63
        assert!((chi2_upper_quantile(6.0, 0.01) - 16.81).abs() < 0.15);
        assert!((chi2_upper_quantile(1.0, 0.01) - 6.63).abs() < 0.3);
    }

    #[test]
    fn normal_quantile_sane() {
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-4);
        assert!((normal_quantile(0.5)).abs() < 1e-9);
    }

    #[test]
    fn energy_test_calibrated_under_null() {
        let mut r = stream(3, "energy", 0);
        let gen_pts = |r: &mut crate::rng::Stream| -> Vec<Vec<f64>> {
            (0..120)
                .map(|_| vec![r.gen::<f64>(), r.gen::<f64>()])
                .collect()
        };
        let a = gen_pts(&mut r);
        let b = gen_pts(&mut r);
        let (_, p) = energy_distance_perm(&a, &b, 200, &mut r);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn energy_test_detects_shift() {
        let mut r = stream(4, "energy", 0);
        let a: Vec<Vec<f64>> = (0..120)
            .map(|_| vec![r.gen::<f64>(), r.gen::<f64>()])
            .collect();
        let b: Vec<Vec<f64>> = (0..120)
            .map(|_| vec![r.gen::<f64>() + 2.0, r.gen::<f64>()])
            .collect();
        let (_, p) = energy_distance_perm(&a, &b, 200, &mut r);
        assert!(p < 0.01, "p = {p}");
    }

    #[test]
    fn lag1_perm_test_uniform_p_for_iid() {
        let mut r = stream(5, "lag1", 0);
        let xs: Vec<f64> = (0..400).map(|_| r.gen::<f64>()).collect();
        let (p, _) = perm_test_lag1(&xs, 300, &mut r);
        assert!(p > 0.01);
    }
}
