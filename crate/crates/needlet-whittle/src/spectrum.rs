//! Parametric models of the angular power spectrum `C_l`.
//!
//! All models have the semiparametric shape `C_l = l^{-alpha0} G(l)` with a
//! slowly varying factor `G` converging to `G0 > 0`. The estimation theory
//! assumes `alpha0 > 2`; the boundary value `alpha0 = 2` is accepted because
//! the published reference tables use it.

use crate::error::{Error, Result};

/// Shape of the slowly varying factor `G(l)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumForm {
    /// `G(l) = G0`.
    Pure,
    /// `G(l) = G0 (1 + kappa / l)`, the leading-order correction model.
    Kappa { kappa: f64 },
    /// `G(l) = (ln l)^delta P(l) / Q(l)` with `deg P = deg Q`; `G0` is the
    /// ratio of the leading coefficients.
    Rational {
        delta: f64,
        /// Coefficients of `P`, ascending in the power of `l`.
        p: Vec<f64>,
        /// Coefficients of `Q`, ascending in the power of `l`.
        q: Vec<f64>,
    },
}

/// A validated spectrum model.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumModel {
    alpha0: f64,
    g0: f64,
    form: SpectrumForm,
}

fn validate_alpha0(alpha0: f64) -> Result<()> {
    if !alpha0.is_finite() || alpha0 < 2.0 {
        return Err(Error::InvalidParameter {
            name: "alpha0",
            requirement: ">= 2 and finite",
            value: alpha0,
        });
    }
    Ok(())
}

/// Strips trailing zero coefficients; errors when nothing remains.
fn trim_poly(coeffs: &[f64], which: &str) -> Result<Vec<f64>> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidModel {
            reason: format!("polynomial {which} has a non-finite coefficient"),
        });
    }
    let mut v = coeffs.to_vec();
    while v.last() == Some(&0.0) {
        v.pop();
    }
    if v.is_empty() {
        return Err(Error::InvalidModel {
            reason: format!("polynomial {which} is identically zero"),
        });
    }
    Ok(v)
}

/// Horner evaluation of ascending coefficients.
fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

impl SpectrumModel {
    /// `C_l = G0 * l^{-alpha0}`.
    pub fn pure(alpha0: f64, g0: f64) -> Result<Self> {
        validate_alpha0(alpha0)?;
        if !g0.is_finite() || g0 <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "g0",
                requirement: "> 0 and finite",
                value: g0,
            });
        }
        Ok(Self {
            alpha0,
            g0,
            form: SpectrumForm::Pure,
        })
    }

    /// `C_l = G0 * (1 + kappa / l) * l^{-alpha0}`. Requires `kappa > -1` so
    /// the spectrum stays positive down to `l = 1`.
    pub fn with_kappa(alpha0: f64, g0: f64, kappa: f64) -> Result<Self> {
        let mut model = Self::pure(alpha0, g0)?;
        if !kappa.is_finite() || kappa <= -1.0 {
            return Err(Error::InvalidParameter {
                name: "kappa",
                requirement: "> -1 and finite",
                value: kappa,
            });
        }
        model.form = SpectrumForm::Kappa { kappa };
        Ok(model)
    }

    /// `C_l = (ln l)^delta * P(l)/Q(l) * l^{-alpha0}`. `P` and `Q` must have
    /// equal degree with leading coefficients of the same sign, so `G(l)`
    /// converges to `G0 = p_m / q_m > 0`.
    pub fn rational(alpha0: f64, delta: f64, p: &[f64], q: &[f64]) -> Result<Self> {
        validate_alpha0(alpha0)?;
        if !delta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "delta",
                requirement: "finite",
                value: delta,
            });
        }
        let p = trim_poly(p, "P")?;
        let q = trim_poly(q, "Q")?;
        if p.len() != q.len() {
            return Err(Error::InvalidModel {
                reason: format!(
                    "deg P = {} but deg Q = {}; G(l) must converge to a positive constant",
                    p.len() - 1,
                    q.len() - 1
                ),
            });
        }
        let g0 = p.last().unwrap() / q.last().unwrap();
        if !g0.is_finite() || g0 <= 0.0 {
            return Err(Error::InvalidModel {
                reason: "leading coefficients of P and Q must have the same sign".into(),
            });
        }
        Ok(Self {
            alpha0,
            g0,
            form: SpectrumForm::Rational { delta, p, q },
        })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    /// Limit of `G(l)`; for the rational form this is derived from the
    /// leading coefficients.
    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn form(&self) -> &SpectrumForm {
        &self.form
    }

    /// Exact `C_l`. The value is finite and nonnegative; positivity over a
    /// working multipole range is checked by [`Self::validate_range`].
    pub fn cl_value(&self, l: u32) -> Result<f64> {
        if l < 1 {
            return Err(Error::InvalidParameter {
                name: "l",
                requirement: ">= 1",
                value: l as f64,
            });
        }
        let lf = l as f64;
        let decay = (-self.alpha0 * lf.ln()).exp();
        let value = match &self.form {
            SpectrumForm::Pure => self.g0 * decay,
            SpectrumForm::Kappa { kappa } => self.g0 * (1.0 + kappa / lf) * decay,
            SpectrumForm::Rational { delta, p, q } => {
                lf.ln().powf(*delta) * poly_eval(p, lf) / poly_eval(q, lf) * decay
            }
        };
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidModel {
                reason: format!("C_l is {value} at l = {l}"),
            });
        }
        Ok(value)
    }

    /// Checks `C_l > 0` (finite) for every `l` in `l_min..=l_max`.
    pub fn validate_range(&self, l_min: u32, l_max: u32) -> Result<()> {
        if l_min < 1 || l_max < l_min {
            return Err(Error::InvalidParameter {
                name: "l_min",
                requirement: ">= 1 and <= l_max",
                value: l_min as f64,
            });
        }
        for l in l_min..=l_max {
            let v = self.cl_value(l)?;
            if v <= 0.0 {
                return Err(Error::InvalidModel {
                    reason: format!("C_l vanishes at l = {l}"),
                });
            }
        }
        Ok(())
    }

    /// First-order deviation coefficient: the `kappa` in
    /// `G(l) = G0 (1 + kappa / l + O(l^{-2}))`.
    ///
    /// Defined for the pure form (`0`), the kappa form, and the rational
    /// form with `delta = 0`, where it equals
    /// `p_{m-1}/p_m - q_{m-1}/q_m`.
    pub fn effective_kappa(&self) -> Result<f64> {
        match &self.form {
            SpectrumForm::Pure => Ok(0.0),
            SpectrumForm::Kappa { kappa } => Ok(*kappa),
            SpectrumForm::Rational { delta, p, q } => {
                if *delta != 0.0 {
                    return Err(Error::InvalidModel {
                        reason: format!(
                            "effective kappa requires delta = 0; the log factor (delta = {delta}) decays slower than 1/l"
                        ),
                    });
                }
                let m = p.len() - 1;
                if m == 0 {
                    return Ok(0.0);
                }
                Ok(p[m - 1] / p[m] - q[m - 1] / q[m])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pure_value() {
        let m = SpectrumModel::pure(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(m.cl_value(10).unwrap(), 0.01, epsilon = 1e-15);
        assert_eq!(m.effective_kappa().unwrap(), 0.0);
    }

    #[test]
    fn kappa_value() {
        let m = SpectrumModel::with_kappa(2.0, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(m.cl_value(4).unwrap(), 0.15625, epsilon = 1e-15);
        assert_eq!(m.effective_kappa().unwrap(), 1.0);
    }

    #[test]
    fn rational_with_equal_polynomials_reduces_to_pure() {
        let m = SpectrumModel::rational(3.0, 0.0, &[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(m.g0(), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(m.cl_value(7).unwrap(), 7f64.powi(-3), epsilon = 1e-17);
        assert_eq!(m.effective_kappa().unwrap(), 0.0);
    }

    #[test]
    fn rational_effective_kappa() {
        // P = l^2 + 3l, Q = l^2 + l: G = (1 + 3/l)/(1 + 1/l) = 1 + 2/l + ...
        let m = SpectrumModel::rational(2.0, 0.0, &[0.0, 3.0, 1.0], &[0.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(m.effective_kappa().unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.g0(), 1.0, epsilon = 0.0);
    }

    #[test]
    fn effective_kappa_rejects_log_factor() {
        let m = SpectrumModel::rational(2.0, 1.0, &[1.0], &[1.0]).unwrap();
        assert!(matches!(
            m.effective_kappa(),
            Err(Error::InvalidModel { .. })
        ));
    }

    #[test]
    fn construction_validation() {
        assert!(SpectrumModel::pure(1.9, 1.0).is_err());
        assert!(SpectrumModel::pure(2.0, 0.0).is_err());
        assert!(SpectrumModel::pure(2.0, -1.0).is_err());
        assert!(SpectrumModel::with_kappa(2.0, 1.0, -1.0).is_err());
        assert!(SpectrumModel::rational(2.0, 0.0, &[1.0], &[0.0, 1.0]).is_err());
        assert!(SpectrumModel::rational(2.0, 0.0, &[0.0], &[1.0]).is_err());
        assert!(SpectrumModel::rational(2.0, 0.0, &[-1.0], &[1.0]).is_err());
    }

    #[test]
    fn range_validation_catches_interior_zeros() {
        // P = (l-2)(l-3) vanishes at l = 2; Q = l^2 + 1 stays positive.
        let m = SpectrumModel::rational(2.0, 0.0, &[6.0, -5.0, 1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!(m.validate_range(1, 10).is_err());
        assert!(m.validate_range(4, 10).is_ok());
    }

    #[test]
    fn log_factor_vanishes_at_l_one() {
        let m = SpectrumModel::rational(2.0, 1.0, &[1.0], &[1.0]).unwrap();
        assert_eq!(m.cl_value(1).unwrap(), 0.0);
        assert!(m.validate_range(1, 4).is_err());
        assert!(m.validate_range(2, 4).is_ok());
    }
}
