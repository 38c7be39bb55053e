//! Sampling of the empirical angular power spectrum and evaluation of
//! needlet band powers.
//!
//! For a Gaussian isotropic field the empirical spectrum at multipole `l` is
//! `C_l_hat = C_l * X_l / (2l + 1)` with `X_l ~ chi^2_{2l+1}`, independent
//! across multipoles. Each `(seed, l)` pair owns a dedicated counter-based
//! random stream, so a sample is a pure function of `(seed, l)` regardless
//! of evaluation order or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::spectrum::SpectrumModel;
use crate::window::BandDecomposition;

/// Domain separation tag of the empirical-spectrum streams.
const SPECTRUM_STREAM_TAG: u64 = 0x4e45_4544_4c45_5431;

/// One realization (or deterministic surrogate) of the empirical spectrum
/// over a contiguous multipole range.
#[derive(Debug, Clone)]
pub struct EmpiricalSpectrum {
    l_min: u32,
    l_max: u32,
    values: Vec<f64>,
    seed: Option<u64>,
}

impl EmpiricalSpectrum {
    /// Wraps externally provided values for `l = l_min, l_min+1, ...`.
    pub fn from_values(l_min: u32, values: Vec<f64>) -> Result<Self> {
        if l_min < 1 {
            return Err(Error::InvalidParameter {
                name: "l_min",
                requirement: ">= 1",
                value: l_min as f64,
            });
        }
        if values.is_empty() {
            return Err(Error::InsufficientData {
                what: "empirical spectrum needs at least one multipole".into(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite {
                what: "empirical spectrum value",
            });
        }
        let l_max = l_min + (values.len() - 1) as u32;
        Ok(Self {
            l_min,
            l_max,
            values,
            seed: None,
        })
    }

    pub fn l_min(&self) -> u32 {
        self.l_min
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    /// Values for `l = l_min..=l_max`, in order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Seed used to draw this spectrum, if it was sampled.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn cl_hat(&self, l: u32) -> Option<f64> {
        if l < self.l_min || l > self.l_max {
            return None;
        }
        Some(self.values[(l - self.l_min) as usize])
    }
}

/// The random stream owned by multipole `l` under `seed`.
fn multipole_rng(seed: u64, l: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(l as u64).to_le_bytes());
    key[16..24].copy_from_slice(&SPECTRUM_STREAM_TAG.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Draws one empirical spectrum `C_l_hat = C_l * chi^2_{2l+1} / (2l+1)` for
/// `l = l_min..=l_max`.
///
/// The chi-square variate is a Gamma((2l+1)/2, 2) draw (Marsaglia-Tsang).
pub fn sample_empirical_spectrum(
    model: &SpectrumModel,
    l_max: u32,
    l_min: u32,
    seed: u64,
) -> Result<EmpiricalSpectrum> {
    model.validate_range(l_min, l_max)?;
    let mut values = Vec::with_capacity((l_max - l_min + 1) as usize);
    for l in l_min..=l_max {
        let cl = model.cl_value(l)?;
        let dof = f64::from(2 * l + 1);
        let gamma = Gamma::new(0.5 * dof, 2.0).map_err(|_| Error::InvalidParameter {
            name: "l",
            requirement: "valid chi-square degrees of freedom",
            value: l as f64,
        })?;
        let x = gamma.sample(&mut multipole_rng(seed, l));
        values.push(cl * x / dof);
    }
    Ok(EmpiricalSpectrum {
        l_min,
        l_max,
        values,
        seed: Some(seed),
    })
}

/// The noise-free spectrum `C_l_hat = C_l`, the exact expectation of the
/// sampler. Useful for recovery tests and diagnostics.
pub fn noise_free_spectrum(model: &SpectrumModel, l_max: u32, l_min: u32) -> Result<EmpiricalSpectrum> {
    model.validate_range(l_min, l_max)?;
    let values = (l_min..=l_max)
        .map(|l| model.cl_value(l))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalSpectrum {
        l_min,
        l_max,
        values,
        seed: None,
    })
}

/// Needlet band powers `T_j = sum_l b^2(l/B^j) (2l+1) C_l_hat`, one value
/// per usable band of `decomp`, in increasing `j` order.
#[derive(Debug, Clone)]
pub struct BandPowers {
    js: Vec<u32>,
    t: Vec<f64>,
}

impl BandPowers {
    pub fn js(&self) -> &[u32] {
        &self.js
    }

    pub fn values(&self) -> &[f64] {
        &self.t
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn get(&self, j: u32) -> Option<f64> {
        self.js
            .binary_search(&j)
            .ok()
            .map(|i| self.t[i])
    }
}

/// Evaluates every band power of `decomp` on `spec`.
///
/// Each band must lie inside the spectrum's multipole range.
pub fn band_powers(spec: &EmpiricalSpectrum, decomp: &BandDecomposition) -> Result<BandPowers> {
    let mut js = Vec::with_capacity(decomp.bands().len());
    let mut t = Vec::with_capacity(decomp.bands().len());
    for band in decomp.bands() {
        if band.first_multipole() < spec.l_min() || band.last_multipole() > spec.l_max() {
            return Err(Error::BandOutsideSpectrum {
                j: band.j(),
                need_lo: band.first_multipole(),
                need_hi: band.last_multipole(),
                have_lo: spec.l_min(),
                have_hi: spec.l_max(),
            });
        }
        let base = spec.l_min();
        let values = spec.values();
        let mut sum = 0.0;
        for (&l, &c) in band.multipoles().iter().zip(band.coeff()) {
            sum += c * values[(l - base) as usize];
        }
        js.push(band.j());
        t.push(sum);
    }
    Ok(BandPowers { js, t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::window::WindowParams;
    use approx::assert_abs_diff_eq;

    fn decomp(b: f64, l_max: u32) -> BandDecomposition {
        let p = WindowParams::with_default_tol(b).unwrap();
        BandDecomposition::new(&p, l_max, 1).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let m = SpectrumModel::pure(2.0, 1.0).unwrap();
        let a = sample_empirical_spectrum(&m, 64, 1, 42).unwrap();
        let b = sample_empirical_spectrum(&m, 64, 1, 42).unwrap();
        assert_eq!(a.values(), b.values());
        let c = sample_empirical_spectrum(&m, 64, 1, 43).unwrap();
        assert_ne!(a.values(), c.values());
        assert_eq!(a.seed(), Some(42));
    }

    #[test]
    fn multipole_streams_do_not_depend_on_the_range() {
        // l = 32 must get the same draw whether or not other multipoles are
        // sampled alongside it.
        let m = SpectrumModel::pure(2.0, 1.0).unwrap();
        let wide = sample_empirical_spectrum(&m, 64, 1, 7).unwrap();
        let narrow = sample_empirical_spectrum(&m, 32, 32, 7).unwrap();
        assert_eq!(wide.cl_hat(32), narrow.cl_hat(32));
    }

    #[test]
    fn chi_square_moments_match() {
        let m = SpectrumModel::pure(2.0, 1.0).unwrap();
        let l = 10u32;
        let cl = m.cl_value(l).unwrap();
        let n = 20_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for seed in 0..n {
            let r = sample_empirical_spectrum(&m, l, l, seed).unwrap().values()[0] / cl;
            sum += r;
            sum2 += r * r;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        let dof = f64::from(2 * l + 1);
        // Ratio mean is 1 with sd sqrt(2/dof)/sqrt(n); allow 4 sigma.
        let se = (2.0 / dof).sqrt() / (n as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * se, "mean = {mean}");
        assert!((var / (2.0 / dof) - 1.0).abs() < 0.1, "var = {var}");
    }

    #[test]
    fn band_powers_of_unit_spectrum_match_weight_sums() {
        let d = decomp(2.0, 32);
        let ones = EmpiricalSpectrum::from_values(1, vec![1.0; 32]).unwrap();
        let t = band_powers(&ones, &d).unwrap();
        // T_1 = 5 * 1 + 7 * 0.5 over multipoles {2, 3}.
        assert_abs_diff_eq!(t.get(1).unwrap(), 8.5, epsilon = 1e-9);
        assert_abs_diff_eq!(t.get(3).unwrap(), 115.872953550776, epsilon = 1e-8);
    }

    #[test]
    fn noise_free_band_power_golden() {
        let m = SpectrumModel::pure(3.0, 2.0).unwrap();
        let d = decomp(2.0, 128);
        let spec = noise_free_spectrum(&m, 128, 1).unwrap();
        let t = band_powers(&spec, &d).unwrap();
        assert!((t.get(5).unwrap() / 8.622953623392e-2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn band_outside_spectrum_is_reported() {
        let d = decomp(2.0, 32);
        let spec = EmpiricalSpectrum::from_values(5, vec![1.0; 28]).unwrap();
        let err = band_powers(&spec, &d).unwrap_err();
        assert!(matches!(err, Error::BandOutsideSpectrum { j: 0, .. }));
    }

    #[test]
    fn from_values_validation() {
        assert!(EmpiricalSpectrum::from_values(0, vec![1.0]).is_err());
        assert!(EmpiricalSpectrum::from_values(1, vec![]).is_err());
        assert!(EmpiricalSpectrum::from_values(1, vec![1.0, -0.5]).is_err());
        assert!(EmpiricalSpectrum::from_values(1, vec![1.0, f64::NAN]).is_err());
        let s = EmpiricalSpectrum::from_values(3, vec![1.0, 2.0]).unwrap();
        assert_eq!(s.l_max(), 4);
        assert_eq!(s.cl_hat(4), Some(2.0));
        assert_eq!(s.cl_hat(5), None);
        assert_eq!(s.seed(), None);
    }
}
