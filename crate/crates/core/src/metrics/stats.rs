//! Student's t-test and one-way ANOVA with exact p-values from the
//! regularized incomplete beta function.

use crate::error::{invalid, Error, Result};
use crate::math;

const BETA_EPS: f64 = 1e-16;
const BETA_TINY: f64 = 1e-300;
const BETA_MAX_ITER: usize = 10_000;

/// Continued fraction for `I_x(a, b)` by the modified Lentz method; converges
/// quickly for `x < (a + 1) / (a + b + 2)`.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let guard = |v: f64| if math::abs(v) < BETA_TINY { BETA_TINY } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=BETA_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let delta = d * c;
        h *= delta;
        if math::abs(delta - 1.0) < BETA_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(invalid("incomplete beta needs 0 <= x <= 1 and a, b > 0"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = math::ln_gamma(a + b) - math::ln_gamma(a) - math::ln_gamma(b)
        + a * math::ln(x)
        + b * math::ln(1.0 - x);
    let front = math::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(x, a, b) / a)
    } else {
        Ok(1.0 - front * beta_cf(1.0 - x, b, a) / b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

fn mean_and_ss(xs: &[f64]) -> (f64, f64) {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (mean, xs.iter().map(|x| (x - mean) * (x - mean)).sum())
}

/// Pooled-variance two-sample Student t-test.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(invalid("t-test needs at least two values per sample"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, ssa) = mean_and_ss(a);
    let (mb, ssb) = mean_and_ss(b);
    let df = na + nb - 2.0;
    let pooled = (ssa + ssb) / df;
    if pooled == 0.0 {
        if ma == mb {
            return Ok(TTestResult { t: 0.0, df, p: 1.0 });
        }
        return Err(Error::DegenerateVariance);
    }
    let t = (ma - mb) / math::sqrt(pooled * (1.0 / na + 1.0 / nb));
    let p = reg_incomplete_beta(df / (df + t * t), df / 2.0, 0.5)?;
    Ok(TTestResult { t, df, p })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub p: f64,
}

/// One-way ANOVA across `groups`.
pub fn one_way_anova(groups: &[&[f64]]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(invalid("ANOVA needs at least two groups"));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(invalid("every ANOVA group needs at least two values"));
    }
    let total: usize = groups.iter().map(|g| g.len()).sum();
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / total as f64;
    let (mut ss_between, mut ss_within) = (0.0, 0.0);
    for g in groups {
        let (m, ss) = mean_and_ss(g);
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += ss;
    }
    let d1 = (groups.len() - 1) as f64;
    let d2 = (total - groups.len()) as f64;
    if ss_within == 0.0 {
        let (f, p) = if ss_between == 0.0 { (0.0, 1.0) } else { (f64::INFINITY, 0.0) };
        return Ok(AnovaResult { f, df_between: d1, df_within: d2, p });
    }
    let f = (ss_between / d1) / (ss_within / d2);
    // upper tail 1 - I_x(d1/2, d2/2) written as I_{1-x}(d2/2, d1/2)
    let p = reg_incomplete_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0)?;
    Ok(AnovaResult {
        f,
        df_between: d1,
        df_within: d2,
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_examples() {
        assert_eq!(reg_incomplete_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(reg_incomplete_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        assert!((reg_incomplete_beta(0.5, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        // I_x(1, b) = 1 - (1 - x)^b
        let v = reg_incomplete_beta(0.3, 1.0, 4.0).unwrap();
        assert!((v - (1.0 - 0.7f64.powi(4))).abs() < 1e-13);
        assert!(reg_incomplete_beta(1.5, 1.0, 1.0).is_err());
        assert!(reg_incomplete_beta(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn t_test_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let r = t_test(&a, &b).unwrap();
        assert!((r.t + 1.0).abs() < 1e-12);
        assert_eq!(r.df, 8.0);
        assert!((r.p - 0.3466).abs() < 1e-4, "{}", r.p);
        let s = t_test(&b, &a).unwrap();
        assert!((s.t - 1.0).abs() < 1e-12);
        assert_eq!(s.p, r.p);
        assert_eq!(t_test(&a, &a).unwrap().p, 1.0);
        assert_eq!(t_test(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), TTestResult { t: 0.0, df: 2.0, p: 1.0 });
        assert_eq!(t_test(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::DegenerateVariance));
    }

    #[test]
    fn anova_examples() {
        let g: [&[f64]; 3] = [&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]];
        let r = one_way_anova(&g).unwrap();
        assert_eq!((r.f, r.p), (0.0, 1.0));
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.5, 3.0, 4.5, 5.0, 6.5];
        let t = t_test(&a, &b).unwrap();
        let f = one_way_anova(&[&a, &b]).unwrap();
        assert!((f.f - t.t * t.t).abs() < 1e-9);
        assert!((f.p - t.p).abs() < 1e-9);
        let sep = one_way_anova(&[&[0.0, 0.001, -0.001], &[10.0, 10.001, 9.999]]).unwrap();
        assert!(sep.p < 0.05);
        let inf = one_way_anova(&[&[0.0, 0.0], &[1.0, 1.0]]).unwrap();
        assert_eq!((inf.f, inf.p), (f64::INFINITY, 0.0));
    }
}
