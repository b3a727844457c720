//! Two-sample comparison statistics: Welch's t-test and Cohen's d.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n − 1` denominator.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

fn need_two(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::DegenerateSample(format!("need at least two values per sample, got {} and {}", a.len(), b.len())));
    }
    Ok(())
}

/// Unequal-variance two-sample t-test, two-sided.
///
/// When both samples have zero spread the statistic is undefined; equal
/// means then report `t = 0, p = 1` and different means `t = ±∞, p = 0`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    need_two(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (qa, qb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = qa + qb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb { WelchTest { t: 0.0, df, p: 1.0 } } else { WelchTest { t: f64::INFINITY.copysign(ma - mb), df, p: 0.0 } });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(WelchTest { t, df, p })
}

/// Pooled standard deviation with `n − 1` weighting.
pub fn pooled_sd(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    (((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0)).sqrt()
}

/// `(mean(comparator) − mean(embodied)) / s_pooled`; negative values mean
/// the embodied sample is higher.
pub fn cohens_d(comparator: &[f64], embodied: &[f64]) -> Result<f64> {
    need_two(comparator, embodied)?;
    let s = pooled_sd(comparator, embodied);
    if s == 0.0 || !s.is_finite() {
        return Err(Error::DegenerateSample("pooled standard deviation is zero".into()));
    }
    Ok((mean(comparator) - mean(embodied)) / s)
}
