//! Paired two-sided Student t-test.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    /// The paired differences have zero variance.
    pub degenerate: bool,
}

/// `t = mean(d) / (sd(d)/√n)` for `d = a − b`, `df = n − 1`, with the
/// two-sided p taken from the Student-t CDF (regularised incomplete beta).
///
/// Zero-variance differences are flagged degenerate: a nonzero mean gives
/// `|t| = ∞, p = 0`; identically zero differences give `t = 0, p = 1`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::contract(format!(
            "paired t-test needs equal lengths ≥ 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let df = n - 1;
    if sd == 0.0 {
        let (t, p) = if mean == 0.0 { (0.0, 1.0) } else { (mean.signum() * f64::INFINITY, 0.0) };
        return Ok(TTest { t, p, df, mean_diff: mean, sd_diff: 0.0, degenerate: true });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::contract(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTest { t, p, df, mean_diff: mean, sd_diff: sd, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_case() {
        let r = paired_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert!((r.mean_diff - 3.0).abs() < 1e-15);
        assert!((r.sd_diff - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((r.t - 4.242640687).abs() < 1e-8);
        assert!((r.p - 0.0132).abs() < 1e-4, "{}", r.p);
        assert_eq!(r.df, 4);
        assert!(!r.degenerate);
        let s = paired_ttest(&[0.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(s.t, -r.t);
        assert_eq!(s.p, r.p);
    }

    #[test]
    fn t_table_critical_value() {
        let d = [1.0, -1.0, 0.0, 0.0, 0.0];
        let r = paired_ttest(&d, &[0.0; 5]).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
        // two-sided 5% point for df = 4
        let dist = StudentsT::new(0.0, 1.0, 4.0).unwrap();
        assert!((2.0 * dist.cdf(-2.776) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn degenerate_cases() {
        let r = paired_ttest(&[0.8, 0.9], &[0.8, 0.9]).unwrap();
        assert!(r.degenerate && r.t == 0.0 && r.p == 1.0);
        let r = paired_ttest(&[1.0, 2.0], &[0.5, 1.5]).unwrap();
        assert!(r.degenerate && r.t.is_infinite() && r.p == 0.0);
        assert!(paired_ttest(&[1.0], &[1.0]).is_err());
        assert!(paired_ttest(&[1.0, 2.0], &[1.0]).is_err());
    }
}
