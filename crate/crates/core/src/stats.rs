//! One-sample Student t tests and the special functions behind them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UpmError};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

/// `ln Γ(x)` for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
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

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

/// Two-tailed tail probability `P(|T| >= |t|)` of Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    inc_beta(df / (df + t * t), df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// `P(T <= t)`.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * student_t_two_tailed_p(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Critical value `q > 0` with `P(|T| >= q) = alpha`, by bisection on the CDF.
pub fn t_critical(alpha: f64, df: f64) -> f64 {
    let mut hi = 1.0;
    while student_t_two_tailed_p(hi, df) > alpha {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if student_t_two_tailed_p(mid, df) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub test_value: f64,
    pub t: f64,
    pub df: usize,
    pub p_two_tailed: f64,
    pub mean_difference: f64,
    pub ci95_lower: f64,
    pub ci95_upper: f64,
}

pub fn summarize(values: &[f64]) -> Result<SampleSummary> {
    let n = values.len();
    if n < 2 {
        return Err(UpmError::InvalidArgument(format!(
            "need at least 2 values, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = (ss / (nf - 1.0)).sqrt();
    Ok(SampleSummary {
        n,
        mean,
        sd,
        se: sd / nf.sqrt(),
    })
}

pub fn one_sample_t(values: &[f64], mu0: f64) -> Result<TTestResult> {
    let s = summarize(values)?;
    if s.se == 0.0 {
        return Err(UpmError::Numeric(
            "t statistic undefined for zero-variance sample".into(),
        ));
    }
    let diff = s.mean - mu0;
    let t = diff / s.se;
    let df = s.n - 1;
    let q = t_critical(0.05, df as f64);
    Ok(TTestResult {
        test_value: mu0,
        t,
        df,
        p_two_tailed: student_t_two_tailed_p(t, df as f64),
        mean_difference: diff,
        ci95_lower: diff - q * s.se,
        ci95_upper: diff + q * s.se,
    })
}

/// A labelled one-sample test over one results column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSampleReport {
    pub label: String,
    pub summary: SampleSummary,
    pub test: TTestResult,
}

impl OneSampleReport {
    pub fn compute(label: impl Into<String>, values: &[f64], mu0: f64) -> Result<Self> {
        Ok(OneSampleReport {
            label: label.into(),
            summary: summarize(values)?,
            test: one_sample_t(values, mu0)?,
        })
    }
}

/// Fixed decimals with the leading zero of |x| < 1 dropped.
fn num(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if let Some(rest) = s.strip_prefix("0.") {
        format!(".{rest}")
    } else if let Some(rest) = s.strip_prefix("-0.") {
        format!("-.{rest}")
    } else {
        s
    }
}

fn test_value(x: f64) -> String {
    num(x, 6).trim_end_matches('0').trim_end_matches('.').to_string()
}

/// The two tables "One-Sample Statistics" and "One-Sample Test".
pub fn format_report(r: &OneSampleReport) -> String {
    let (s, t) = (&r.summary, &r.test);
    let w = r.label.len().max(8);
    let mut out = String::new();
    let _ = writeln!(out, "One-Sample Statistics");
    let _ = writeln!(
        out,
        "{:w$}  {:>4}  {:>12}  {:>14}  {:>15}",
        "", "N", "Mean", "Std. Deviation", "Std. Error Mean"
    );
    let _ = writeln!(
        out,
        "{:w$}  {:>4}  {:>12}  {:>14}  {:>15}",
        r.label,
        s.n,
        num(s.mean, 6),
        num(s.sd, 7),
        num(s.se, 7)
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "One-Sample Test");
    let _ = writeln!(out, "Test Value = {}", test_value(t.test_value));
    let _ = writeln!(
        out,
        "{:w$}  {:>7}  {:>3}  {:>15}  {:>15}  {:>41}",
        "", "", "", "", "", "95% Confidence Interval of the Difference"
    );
    let _ = writeln!(
        out,
        "{:w$}  {:>7}  {:>3}  {:>15}  {:>15}  {:>20} {:>20}",
        "", "t", "df", "Sig. (2-tailed)", "Mean Difference", "Lower", "Upper"
    );
    let _ = writeln!(
        out,
        "{:w$}  {:>7}  {:>3}  {:>15}  {:>15}  {:>20} {:>20}",
        r.label,
        num(t.t, 3),
        t.df,
        num(t.p_two_tailed, 3),
        num(t.mean_difference, 7),
        num(t.ci95_lower, 6),
        num(t.ci95_upper, 6)
    );
    out
}

pub const REPORT_CSV_HEADER: &str =
    "column,n,mean,sd,se,test_value,t,df,p_two_tailed,mean_difference,ci95_lower,ci95_upper";

/// Machine-readable row with full precision.
pub fn report_csv_row(r: &OneSampleReport) -> String {
    let (s, t) = (&r.summary, &r.test);
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.label,
        s.n,
        s.mean,
        s.sd,
        s.se,
        t.test_value,
        t.t,
        t.df,
        t.p_two_tailed,
        t.mean_difference,
        t.ci95_lower,
        t.ci95_upper
    )
}
