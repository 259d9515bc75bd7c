use super::quadrature::adaptive_simpson;
use crate::error::{KgmError, Result};

const PRIMITIVE_TOL: f64 = 1e-10;

/// A nonlinearity given by samples `(s_k, f_k)` on `[0, s_max]`.
///
/// `f` is the monotonicity-preserving cubic Hermite interpolant of the
/// samples; `F` is integrated by adaptive Simpson, with the cumulative
/// integral at every node computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTable {
    s: Vec<f64>,
    f: Vec<f64>,
    slopes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SampledTable {
    pub fn new(s: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let bad = |reason: &str| KgmError::InvalidParameter {
            name: "table",
            reason: reason.to_string(),
        };
        if s.len() != f.len() || s.len() < 2 {
            return Err(bad("need at least two (s, f) pairs of equal length"));
        }
        if s[0] != 0.0 || f[0] != 0.0 {
            return Err(bad("table must start at (0, 0)"));
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(bad("abscissae must be strictly increasing"));
        }
        if s.iter().chain(&f).any(|v| !v.is_finite()) {
            return Err(bad("non-finite entry"));
        }
        let slopes = pchip_slopes(&s, &f);
        let mut table = Self {
            s,
            f,
            slopes,
            cumulative: Vec::new(),
        };
        let mut cumulative = vec![0.0];
        for k in 0..table.s.len() - 1 {
            let seg = adaptive_simpson(
                &|x| table.interpolate(k, x).0,
                table.s[k],
                table.s[k + 1],
                PRIMITIVE_TOL / table.s.len() as f64,
            );
            cumulative.push(cumulative[k] + seg);
        }
        table.cumulative = cumulative;
        Ok(table)
    }

    pub fn s_max(&self) -> f64 {
        *self.s.last().expect("table is non-empty")
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.s, &self.f)
    }

    fn segment(&self, s: f64) -> usize {
        let k = self.s.partition_point(|x| *x <= s);
        k.saturating_sub(1).min(self.s.len() - 2)
    }

    /// Value and derivative of the interpolant on segment `k`.
    fn interpolate(&self, k: usize, x: f64) -> (f64, f64) {
        let h = self.s[k + 1] - self.s[k];
        let t = (x - self.s[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let (f0, f1) = (self.f[k], self.f[k + 1]);
        let (m0, m1) = (self.slopes[k], self.slopes[k + 1]);
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * f0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * f1
            + (t3 - t2) * h * m1;
        let deriv = ((6.0 * t2 - 6.0 * t) * f0 + (-6.0 * t2 + 6.0 * t) * f1) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (3.0 * t2 - 2.0 * t) * m1;
        (value, deriv)
    }

    fn check_range(&self, s: f64) -> Result<()> {
        if s > self.s_max() {
            return Err(KgmError::OutOfTableRange {
                s,
                max: self.s_max(),
            });
        }
        Ok(())
    }

    pub fn f(&self, s: f64) -> Result<f64> {
        self.check_range(s)?;
        Ok(self.f_unchecked(s))
    }

    pub fn big_f(&self, s: f64) -> Result<f64> {
        self.check_range(s)?;
        Ok(self.big_f_unchecked(s))
    }

    pub(crate) fn f_unchecked(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let s = s.min(self.s_max());
        self.interpolate(self.segment(s), s).0
    }

    pub(crate) fn df_unchecked(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let s = s.min(self.s_max());
        self.interpolate(self.segment(s), s).1
    }

    pub(crate) fn big_f_unchecked(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let s = s.min(self.s_max());
        let k = self.segment(s);
        self.cumulative[k]
            + adaptive_simpson(
                &|x| self.interpolate(k, x).0,
                self.s[k],
                s,
                PRIMITIVE_TOL / self.s.len() as f64,
            )
    }
}

/// Fritsch-Butland slopes: harmonic mean of neighbouring secants, zero at extrema.
fn pchip_slopes(s: &[f64], f: &[f64]) -> Vec<f64> {
    let n = s.len();
    let secant: Vec<f64> = (0..n - 1)
        .map(|k| (f[k + 1] - f[k]) / (s[k + 1] - s[k]))
        .collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m[0] = secant[0];
        m[1] = secant[0];
        return m;
    }
    for k in 1..n - 1 {
        let (a, b) = (secant[k - 1], secant[k]);
        if a * b > 0.0 {
            let h0 = s[k] - s[k - 1];
            let h1 = s[k + 1] - s[k];
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            m[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    m[0] = end_slope(s[1] - s[0], s[2] - s[1], secant[0], secant[1]);
    m[n - 1] = end_slope(
        s[n - 1] - s[n - 2],
        s[n - 2] - s[n - 3],
        secant[n - 2],
        secant[n - 3],
    );
    m
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic_table() -> SampledTable {
        let s: Vec<f64> = (0..=200).map(|k| k as f64 * 0.02).collect();
        let f = s.iter().map(|x| x.powi(4)).collect();
        SampledTable::new(s, f).unwrap()
    }

    #[test]
    fn reproduces_nodes_and_primitive() {
        let t = quartic_table();
        assert!((t.f(2.0).unwrap() - 16.0).abs() < 1e-9);
        assert!((t.big_f(2.0).unwrap() - 32.0 / 5.0).abs() < 1e-4);
        assert_eq!(t.f(0.0).unwrap(), 0.0);
        assert_eq!(t.big_f(0.0).unwrap(), 0.0);
        assert_eq!(t.f_unchecked(-1.0), 0.0);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let t = quartic_table();
        assert!(matches!(
            t.f(4.5),
            Err(KgmError::OutOfTableRange { .. })
        ));
    }

    #[test]
    fn primitive_matches_interpolant() {
        let t = quartic_table();
        for s in [0.13, 0.77, 1.5, 3.33] {
            let h = 1e-4;
            let fd = (t.big_f(s + h).unwrap() - t.big_f(s - h).unwrap()) / (2.0 * h);
            assert!((fd - t.f(s).unwrap()).abs() < 1e-6 * (1.0 + t.f(s).unwrap()));
        }
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(SampledTable::new(vec![0.0], vec![0.0]).is_err());
        assert!(SampledTable::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(SampledTable::new(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]).is_err());
    }
}
