//! Sigmoidal saturating nonlinearities applied to opinion exchanges.
//!
//! Construction validates the normalization constraints numerically:
//! S(0) = 0 and S'(0) = 1 (central differences, step 1e-6), the range stays
//! inside [-k1, k2], and the asymmetric family has a nonzero second
//! derivative at the origin whenever k1 != k2.

use crate::error::{CoreError, Result};

const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum SaturationFamily {
    /// `k * tanh(y / k)` with `k = k1 = k2`. Odd, so the second derivative
    /// at the origin vanishes.
    OddTanh,
    /// Rescaled logistic `k1*k2*(1 - e^(-B y)) / (k1 + k2 e^(-B y))` with
    /// `B = (k1+k2)/(k1*k2)`: lower limit -k1, upper limit k2, unit slope at
    /// the origin, and a genuinely nonzero curvature when k1 != k2.
    AsymmetricLogistic,
    /// Monotone piecewise-linear interpolation over explicit (y, s) samples,
    /// clamped outside the table.
    CustomTable(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationSpec {
    family: SaturationFamily,
    k1: f64,
    k2: f64,
}

impl SaturationSpec {
    pub fn new(family: SaturationFamily, k1: f64, k2: f64) -> Result<Self> {
        if !(k1 > 0.0) || !(k2 > 0.0) || !k1.is_finite() || !k2.is_finite() {
            return Err(CoreError::InvalidParameter(
                "saturation magnitudes k1, k2 must be positive and finite".into(),
            ));
        }
        if let SaturationFamily::OddTanh = family {
            if k1 != k2 {
                return Err(CoreError::InvalidParameter(
                    "odd_tanh needs k1 == k2 (its range is symmetric)".into(),
                ));
            }
        }
        if let SaturationFamily::CustomTable(table) = &family {
            validate_table(table, k1, k2)?;
        }
        let spec = Self { family, k1, k2 };
        spec.validate_normalization()?;
        Ok(spec)
    }

    /// `tanh`, the default for two-option reductions.
    pub fn odd_tanh() -> Self {
        Self::new(SaturationFamily::OddTanh, 1.0, 1.0).expect("tanh spec is valid")
    }

    /// Default for the general model: asymmetric logistic with k1 = 0.8,
    /// k2 = 1.2, which keeps the origin curvature away from zero.
    pub fn default_general() -> Self {
        Self::new(SaturationFamily::AsymmetricLogistic, 0.8, 1.2)
            .expect("default asymmetric spec is valid")
    }

    pub fn family(&self) -> &SaturationFamily {
        &self.family
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn eval(&self, y: f64) -> f64 {
        match &self.family {
            SaturationFamily::OddTanh => self.k1 * (y / self.k1).tanh(),
            SaturationFamily::AsymmetricLogistic => {
                let (k1, k2) = (self.k1, self.k2);
                let b = (k1 + k2) / (k1 * k2);
                // evaluate on the numerically safe side of the exponential
                if y >= 0.0 {
                    let e = (-b * y).exp();
                    k1 * k2 * (1.0 - e) / (k1 + k2 * e)
                } else {
                    let g = (b * y).exp();
                    k1 * k2 * (g - 1.0) / (k1 * g + k2)
                }
            }
            SaturationFamily::CustomTable(table) => eval_table(table, y),
        }
    }

    pub fn deriv(&self, y: f64) -> f64 {
        match &self.family {
            SaturationFamily::OddTanh => {
                let t = (y / self.k1).tanh();
                1.0 - t * t
            }
            SaturationFamily::AsymmetricLogistic => {
                let (k1, k2) = (self.k1, self.k2);
                let b = (k1 + k2) / (k1 * k2);
                if y >= 0.0 {
                    let e = (-b * y).exp();
                    let den = k1 + k2 * e;
                    b * k1 * k2 * (k1 + k2) * e / (den * den)
                } else {
                    let g = (b * y).exp();
                    let den = k1 * g + k2;
                    b * k1 * k2 * (k1 + k2) * g / (den * den)
                }
            }
            SaturationFamily::CustomTable(table) => deriv_table(table, y),
        }
    }

    /// Supremum of the derivative, defining the upper end of the interval
    /// `K = (0, sup]` entering the cluster-synchronization condition.
    pub fn derivative_sup(&self) -> f64 {
        match &self.family {
            SaturationFamily::OddTanh => 1.0,
            SaturationFamily::AsymmetricLogistic => {
                let s = self.k1 + self.k2;
                s * s / (4.0 * self.k1 * self.k2)
            }
            SaturationFamily::CustomTable(table) => table
                .windows(2)
                .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                .fold(0.0f64, f64::max),
        }
    }

    fn validate_normalization(&self) -> Result<()> {
        let at_zero = self.eval(0.0);
        if at_zero.abs() > 1e-9 {
            return Err(CoreError::InvalidParameter(format!(
                "saturation must vanish at the origin, got S(0) = {at_zero:e}"
            )));
        }
        let slope = (self.eval(FD_STEP) - self.eval(-FD_STEP)) / (2.0 * FD_STEP);
        if (slope - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidParameter(format!(
                "saturation must have unit slope at the origin, got S'(0) = {slope}"
            )));
        }
        if let SaturationFamily::AsymmetricLogistic = self.family {
            if self.k1 != self.k2 {
                let second = (self.eval(FD_STEP) - 2.0 * at_zero + self.eval(-FD_STEP))
                    / (FD_STEP * FD_STEP);
                if second.abs() <= 1e-6 {
                    return Err(CoreError::InvalidParameter(
                        "asymmetric saturation with k1 != k2 must have S''(0) != 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn validate_table(table: &[(f64, f64)], k1: f64, k2: f64) -> Result<()> {
    if table.len() < 3 {
        return Err(CoreError::InvalidParameter(
            "saturation table needs at least three samples".into(),
        ));
    }
    for w in table.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(CoreError::InvalidParameter(
                "saturation table abscissae must be strictly increasing".into(),
            ));
        }
        if w[1].1 < w[0].1 {
            return Err(CoreError::InvalidParameter(
                "saturation table must be nondecreasing".into(),
            ));
        }
    }
    if table.iter().any(|&(_, s)| s < -k1 - 1e-12 || s > k2 + 1e-12) {
        return Err(CoreError::InvalidParameter(
            "saturation table values must stay within [-k1, k2]".into(),
        ));
    }
    Ok(())
}

fn eval_table(table: &[(f64, f64)], y: f64) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    if y <= first.0 {
        return first.1;
    }
    if y >= last.0 {
        return last.1;
    }
    let idx = table.partition_point(|&(x, _)| x <= y);
    let (x0, s0) = table[idx - 1];
    let (x1, s1) = table[idx];
    s0 + (s1 - s0) * (y - x0) / (x1 - x0)
}

fn deriv_table(table: &[(f64, f64)], y: f64) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    if y <= first.0 || y >= last.0 {
        return 0.0;
    }
    let idx = table.partition_point(|&(x, _)| x <= y);
    let (x0, s0) = table[idx - 1];
    let (x1, s1) = table[idx];
    (s1 - s0) / (x1 - x0)
}

/// Odd part of a saturation, `(S(y) - S(-y)) / 2`, the form entering the
/// two-option reduction. Oddness holds bit-exactly by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct OddSaturation {
    inner: SaturationSpec,
}

impl OddSaturation {
    pub fn from_spec(inner: SaturationSpec) -> Self {
        Self { inner }
    }

    pub fn tanh() -> Self {
        Self::from_spec(SaturationSpec::odd_tanh())
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self.inner.family() {
            SaturationFamily::OddTanh => self.inner.eval(y),
            _ => 0.5 * (self.inner.eval(y) - self.inner.eval(-y)),
        }
    }

    pub fn deriv(&self, y: f64) -> f64 {
        match self.inner.family() {
            SaturationFamily::OddTanh => self.inner.deriv(y),
            _ => 0.5 * (self.inner.deriv(y) + self.inner.deriv(-y)),
        }
    }

    pub fn spec(&self) -> &SaturationSpec {
        &self.inner
    }

    pub fn derivative_sup(&self) -> f64 {
        // the symmetrized derivative cannot exceed the raw supremum
        self.inner.derivative_sup()
    }

    /// Saturation magnitude of the odd part: (k1 + k2) / 2.
    pub fn bound(&self) -> f64 {
        0.5 * (self.inner.k1() + self.inner.k2())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tanh_normalization() {
        let s = SaturationSpec::odd_tanh();
        assert_eq!(s.eval(0.0), 0.0);
        assert_abs_diff_eq!(s.deriv(0.0), 1.0, epsilon = 1e-15);
        assert!(s.eval(50.0) <= 1.0 && s.eval(50.0) > 1.0 - 1e-9);
    }

    #[test]
    fn asymmetric_limits() {
        let s = SaturationSpec::new(SaturationFamily::AsymmetricLogistic, 1.0, 2.0).unwrap();
        assert_eq!(s.eval(0.0), 0.0);
        assert_abs_diff_eq!(s.eval(50.0), 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.eval(-50.0), -1.0, epsilon = 1e-6);
        assert!(s.deriv(3.0) > 0.0 && s.deriv(-3.0) > 0.0);
    }

    #[test]
    fn asymmetric_second_derivative() {
        // closed form: S''(0) = B^2 k1 k2 (k2 - k1) / (k1 + k2)^2, which is
        // 0.5 for (k1, k2) = (1, 2)
        let s = SaturationSpec::new(SaturationFamily::AsymmetricLogistic, 1.0, 2.0).unwrap();
        let h = 1e-5;
        let second = (s.eval(h) - 2.0 * s.eval(0.0) + s.eval(-h)) / (h * h);
        assert_abs_diff_eq!(second, 0.5, epsilon = 1e-5);
    }

    #[test]
    fn default_general_is_generic() {
        let s = SaturationSpec::default_general();
        let h = 1e-5;
        let second = (s.eval(h) - 2.0 * s.eval(0.0) + s.eval(-h)) / (h * h);
        assert!(second.abs() > 1e-3, "curvature at origin must not vanish");
        assert_abs_diff_eq!(s.derivative_sup(), 4.0 / (4.0 * 0.96), epsilon = 1e-12);
    }

    #[test]
    fn odd_tanh_requires_equal_bounds() {
        assert!(SaturationSpec::new(SaturationFamily::OddTanh, 1.0, 2.0).is_err());
    }

    #[test]
    fn odd_part_is_bitwise_odd() {
        let s = OddSaturation::from_spec(SaturationSpec::default_general());
        for i in 0..200 {
            let y = -5.0 + 0.05 * i as f64;
            assert_eq!(s.eval(-y), -s.eval(y));
            assert!((s.eval(y) - s.eval(y)).abs() <= 1e-12);
        }
    }

    #[test]
    fn custom_table_roundtrip() {
        // unit slope through the origin, tanh-like saturation farther out
        let table = vec![
            (-3.0, -0.995),
            (-1.0, -0.7616),
            (-0.001, -0.001),
            (0.0, 0.0),
            (0.001, 0.001),
            (1.0, 0.7616),
            (3.0, 0.995),
        ];
        let s = SaturationSpec::new(SaturationFamily::CustomTable(table), 1.0, 1.0).unwrap();
        assert_eq!(s.eval(0.0), 0.0);
        assert_abs_diff_eq!(s.eval(0.0005), 0.0005, epsilon = 1e-12);
        assert_eq!(s.eval(5.0), 0.995);
        assert_eq!(s.eval(-5.0), -0.995);
        assert!(s.derivative_sup() <= 1.0 + 1e-9);
    }

    #[test]
    fn bad_tables_rejected() {
        // slope at origin far from one
        let t = vec![(-1.0, -0.5), (0.0, 0.0), (1.0, 0.5)];
        assert!(SaturationSpec::new(SaturationFamily::CustomTable(t), 1.0, 1.0).is_err());
        // not monotone
        let t = vec![(-1.0, -0.9), (0.0, 0.0), (0.5, 0.5), (1.0, 0.2)];
        assert!(SaturationSpec::new(SaturationFamily::CustomTable(t), 1.0, 1.0).is_err());
    }
}
