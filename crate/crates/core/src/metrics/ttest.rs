//! Paired two-sided Student's t-test over per-subset scores.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Test outcome. `degenerate` marks the zero-variance branches where the
/// t statistic is not defined: identical samples give p = 1, a constant
/// nonzero difference gives p = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t_stat: f64,
    pub p_value: f64,
    pub degenerate: bool,
}

/// Two-sided paired t-test on `a - b` with `n - 1` degrees of freedom.
pub fn paired_t_test(scores_a: &[f64], scores_b: &[f64]) -> Result<TTest> {
    if scores_a.len() != scores_b.len() || scores_a.len() < 2 {
        return Err(Error::BadPairedSamples {
            a: scores_a.len(),
            b: scores_b.len(),
        });
    }
    let n = scores_a.len() as f64;
    let diffs: Vec<f64> = scores_a
        .iter()
        .zip(scores_b)
        .map(|(a, b)| a - b)
        .collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest {
                t_stat: 0.0,
                p_value: 1.0,
                degenerate: true,
            }
        } else {
            TTest {
                t_stat: if mean > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                p_value: 0.0,
                degenerate: true,
            }
        });
    }
    let t_stat = mean / (var.sqrt() / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::Config(format!("t distribution: {e}")))?;
    let p_value = 2.0 * (1.0 - dist.cdf(t_stat.abs()));
    Ok(TTest {
        t_stat,
        p_value,
        degenerate: false,
    })
}

/// Star annotation at the 0.05 / 0.01 / 0.001 levels.
pub fn significance_stars(p_value: f64) -> &'static str {
    if p_value < 0.001 {
        "***"
    } else if p_value < 0.01 {
        "**"
    } else if p_value < 0.05 {
        "*"
    } else {
        ""
    }
}
