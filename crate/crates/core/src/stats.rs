//! Seed-level summary statistics and Welch's two-sample t-test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values collected across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    /// Divisor for the standard deviation is `n - ddof`.
    pub ddof: usize,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Self {
        SampleSet { values, ddof: 1 }
    }

    pub fn with_ddof(values: Vec<f64>, ddof: usize) -> Self {
        SampleSet { values, ddof }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> Result<f64> {
        if self.values.is_empty() {
            return Err(Error::Stats("mean of an empty sample".into()));
        }
        Ok(self.values.iter().sum::<f64>() / self.values.len() as f64)
    }

    /// Sample variance with divisor `n - ddof`.
    pub fn variance(&self) -> Result<f64> {
        let n = self.values.len();
        if n <= self.ddof {
            return Err(Error::Stats(format!(
                "variance needs more than ddof={} values, got {n}",
                self.ddof
            )));
        }
        let m = self.mean()?;
        let ss: f64 = self.values.iter().map(|v| (v - m) * (v - m)).sum();
        Ok(ss / (n - self.ddof) as f64)
    }
}

/// `(mean, std)`.
pub fn mean_std(s: &SampleSet) -> Result<(f64, f64)> {
    Ok((s.mean()?, s.variance()?.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub two_sided: bool,
}

/// Welch's unequal-variance t-test, two-sided, `t = (mean_a − mean_b) / se`.
///
/// Both samples use ddof = 1 regardless of their `ddof` field. With zero
/// variance on both sides the result is `t = 0, p = 1` for equal means and
/// `t = ±∞, p = 0` otherwise; `df` is then reported as `n_a + n_b − 2`.
pub fn welch_t(a: &SampleSet, b: &SampleSet) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Stats(format!(
            "t-test needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (a.mean()?, b.mean()?);
    let va = SampleSet::new(a.values.clone()).variance()?;
    let vb = SampleSet::new(b.values.clone()).variance()?;
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let diff = ma - mb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if diff == 0.0 {
            TTestResult {
                t_statistic: 0.0,
                degrees_of_freedom: df,
                p_value: 1.0,
                two_sided: true,
            }
        } else {
            TTestResult {
                t_statistic: f64::INFINITY.copysign(diff),
                degrees_of_freedom: df,
                p_value: 0.0,
                two_sided: true,
            }
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: two_sided_p(t, df),
        two_sided: true,
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    reg_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

/// CDF of Student's t distribution.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    let tail = 0.5 * two_sided_p(t, df);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularised incomplete beta `I_x(a, b)` via Lentz's continued fraction.
pub fn reg_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The fraction converges fast for x < (a+1)/(a+b+2); use symmetry otherwise.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    #[test]
    fn mean_std_examples() {
        assert_eq!(
            mean_std(&SampleSet::new(vec![5.0, 5.0, 5.0])).unwrap(),
            (5.0, 0.0)
        );
        assert_eq!(
            mean_std(&SampleSet::new(vec![1.0, 2.0, 3.0])).unwrap(),
            (2.0, 1.0)
        );
        let (_, pop) = mean_std(&SampleSet::with_ddof(vec![1.0, 2.0, 3.0], 0)).unwrap();
        assert!((pop - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(mean_std(&SampleSet::new(vec![1.0])).is_err());
        assert!(SampleSet::new(vec![]).mean().is_err());
    }

    #[test]
    fn welch_examples() {
        let a = SampleSet::new(vec![1.0, 2.0, 3.0]);
        let same = welch_t(&a, &a).unwrap();
        assert_eq!(same.t_statistic, 0.0);
        assert!((same.p_value - 1.0).abs() < 1e-12);

        let b = SampleSet::new(vec![11.0, 12.0, 13.0]);
        let r = welch_t(&a, &b).unwrap();
        assert!((r.t_statistic - (-10.0 / (2.0f64 / 3.0).sqrt())).abs() < 1e-9);
        assert!((r.t_statistic + 12.247).abs() < 1e-3);
        assert!((r.degrees_of_freedom - 4.0).abs() < 1e-12);
        assert!(r.p_value < 0.01);
        let oracle = 2.0 * StudentsT::new(0.0, 1.0, 4.0).unwrap().cdf(r.t_statistic);
        assert!((r.p_value - oracle).abs() < 1e-10);
    }

    #[test]
    fn welch_zero_variance_cases() {
        let a = SampleSet::new(vec![2.0, 2.0, 2.0]);
        let r = welch_t(&a, &a).unwrap();
        assert_eq!((r.t_statistic, r.p_value), (0.0, 1.0));
        let b = SampleSet::new(vec![3.0, 3.0, 3.0]);
        let r = welch_t(&a, &b).unwrap();
        assert_eq!(r.t_statistic, f64::NEG_INFINITY);
        assert_eq!(r.p_value, 0.0);
        assert!(welch_t(&SampleSet::new(vec![1.0]), &b).is_err());
    }

    #[test]
    fn negative_t_when_second_sample_has_higher_mean() {
        let fnn = SampleSet::new(vec![94.3, 94.5, 94.6]);
        let chn = SampleSet::new(vec![95.5, 95.6, 95.8]);
        assert!(welch_t(&fnn, &chn).unwrap().t_statistic < 0.0);
        assert!(welch_t(&chn, &fnn).unwrap().t_statistic > 0.0);
    }

    #[test]
    fn cdf_examples() {
        for df in [0.5, 1.0, 3.0, 30.0, 1e4] {
            assert!((student_t_cdf(0.0, df) - 0.5).abs() < 1e-15);
        }
        assert!((student_t_cdf(1.0, 1.0) - 0.75).abs() < 1e-12);
        for t in [-5.0, -0.3, 0.7, 2.0, 40.0] {
            let cauchy = 0.5 + f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_cdf(t, 1.0) - cauchy).abs() < 1e-12);
        }
        assert!((student_t_cdf(2.776, 4.0) - 0.975).abs() < 5e-4);
    }

    #[test]
    fn cdf_matches_independent_implementation() {
        for &df in &[1.0, 2.0, 2.5, 4.0, 7.3, 15.0, 60.0, 500.0] {
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            for k in -40..=40 {
                let t = k as f64 * 0.25;
                assert!(
                    (student_t_cdf(t, df) - dist.cdf(t)).abs() < 1e-10,
                    "t={t} df={df}"
                );
            }
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn cdf_symmetric_and_monotone(t in 0.0f64..50.0, dt in 1e-3f64..5.0, df in 0.5f64..200.0) {
            prop_assert!((student_t_cdf(t, df) + student_t_cdf(-t, df) - 1.0).abs() <= 1e-10);
            prop_assert!(student_t_cdf(t + dt, df) >= student_t_cdf(t, df));
        }

        #[test]
        fn welch_antisymmetric_and_translation_invariant(
            a in proptest::collection::vec(-100.0f64..100.0, 2..6),
            b in proptest::collection::vec(-100.0f64..100.0, 2..6),
            shift in -1e3f64..1e3,
            scale in 0.1f64..10.0,
        ) {
            let (sa, sb) = (SampleSet::new(a.clone()), SampleSet::new(b.clone()));
            let ab = welch_t(&sa, &sb).unwrap();
            let ba = welch_t(&sb, &sa).unwrap();
            prop_assert!((ab.t_statistic + ba.t_statistic).abs() <= 1e-9 * ab.t_statistic.abs().max(1.0));
            prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));

            let shifted = welch_t(
                &SampleSet::new(a.iter().map(|v| v + shift).collect()),
                &SampleSet::new(b.iter().map(|v| v + shift).collect()),
            ).unwrap();
            prop_assert!((shifted.p_value - ab.p_value).abs() <= 1e-6);

            // Scaling both samples by c > 0 leaves t unchanged.
            let scaled = welch_t(
                &SampleSet::new(a.iter().map(|v| v * scale).collect()),
                &SampleSet::new(b.iter().map(|v| v * scale).collect()),
            ).unwrap();
            prop_assert!((scaled.t_statistic - ab.t_statistic).abs() <= 1e-8 * ab.t_statistic.abs().max(1.0));
            prop_assert!((scaled.degrees_of_freedom - ab.degrees_of_freedom).abs() <= 1e-8 * ab.degrees_of_freedom);

            let ma = sa.mean().unwrap();
            let mb = sb.mean().unwrap();
            if ma != mb {
                prop_assert_eq!(ab.t_statistic.signum(), (ma - mb).signum());
            }
        }
    }
}
