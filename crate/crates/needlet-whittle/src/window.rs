//! Needlet window function, band layout, and window-weighted multipole
//! moments.
//!
//! The squared window `b^2(x; B)` is the standard smooth compactly supported
//! needlet profile: it vanishes outside `(1/B, B)`, equals 1 at `x = 1`, and
//! interpolates through the regularized CDF of the bump `exp(-1/(1 - u^2))`.
//! Band `j` collects the integer multipoles `l` with `B^{j-1} < l < B^{j+1}`
//! and strictly positive weight `b^2(l / B^j)`; the weights over all bands
//! form a partition of unity for every `l > B`, so each multipole belongs to
//! at most two adjacent bands.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, QuadConfig};

/// Largest multipole value the band enumerator will touch.
const MAX_MULTIPOLE: f64 = 4.0e9;

/// `exp(-1/(1-u^2))` continued by zero outside `(-1, 1)`.
fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// `int_{-1}^{1} exp(-1/(1-u^2)) du`, frozen at a tolerance below every
/// supported window tolerance.
fn bump_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| {
        adaptive_simpson(
            bump,
            -1.0,
            1.0,
            QuadConfig {
                tol: 1e-14,
                max_depth: 52,
            },
        )
        .expect("bump normalizer integrand is smooth on [-1, 1]")
    })
}

/// `int_{-1}^{t} exp(-1/(1-u^2)) du / int_{-1}^{1} exp(-1/(1-u^2)) du`,
/// clamped to `[0, 1]`.
fn regularized_bump_cdf(t: f64, tol: f64) -> Result<f64> {
    if t <= -1.0 {
        return Ok(0.0);
    }
    if t >= 1.0 {
        return Ok(1.0);
    }
    // The division by the normalizer (about 0.444) inflates the absolute
    // error; a quarter of the requested tolerance absorbs that.
    let num = adaptive_simpson(bump, -1.0, t, QuadConfig::with_tol(0.25 * tol))?;
    Ok((num / bump_norm()).clamp(0.0, 1.0))
}

fn validate_b(b: f64) -> Result<()> {
    if !b.is_finite() || b <= 1.0 {
        return Err(Error::InvalidParameter {
            name: "b",
            requirement: "finite and > 1",
            value: b,
        });
    }
    Ok(())
}

fn validate_quad_tol(quad_tol: f64) -> Result<()> {
    if !quad_tol.is_finite() || quad_tol <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "quad_tol",
            requirement: "finite and > 0",
            value: quad_tol,
        });
    }
    Ok(())
}

/// Squared needlet window `b^2(x; B)`.
///
/// `quad_tol` is the absolute tolerance of the underlying bump quadrature;
/// returned values are accurate to about `max(quad_tol, 1e-13)` and lie in
/// `[0, 1]`.
pub fn window_squared(x: f64, b: f64, quad_tol: f64) -> Result<f64> {
    validate_b(b)?;
    validate_quad_tol(quad_tol)?;
    if x.is_nan() {
        return Err(Error::NonFinite {
            what: "window argument x",
        });
    }
    window_squared_raw(x, b, quad_tol)
}

/// [`window_squared`] without argument validation, for pre-validated hot
/// paths.
pub(crate) fn window_squared_raw(x: f64, b: f64, tol: f64) -> Result<f64> {
    if x <= 1.0 / b || x >= b {
        return Ok(0.0);
    }
    let slope = 2.0 * b / (b - 1.0);
    if x < 1.0 {
        let t = 1.0 - slope * (x - 1.0 / b);
        Ok(1.0 - regularized_bump_cdf(t, tol)?)
    } else {
        let t = 1.0 - slope * ((x - 1.0) / b);
        regularized_bump_cdf(t, tol)
    }
}

/// Bandwidth parameter and window quadrature tolerance.
#[derive(Debug, Clone, Copy)]
pub struct WindowParams {
    b: f64,
    quad_tol: f64,
}

impl WindowParams {
    /// Default absolute tolerance of the window quadrature.
    pub const DEFAULT_QUAD_TOL: f64 = 1e-12;

    pub fn new(b: f64, quad_tol: f64) -> Result<Self> {
        validate_b(b)?;
        validate_quad_tol(quad_tol)?;
        Ok(Self { b, quad_tol })
    }

    pub fn with_default_tol(b: f64) -> Result<Self> {
        Self::new(b, Self::DEFAULT_QUAD_TOL)
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }
}

/// Multipoles of one needlet band with their window weights.
///
/// Only multipoles with strictly positive weight are stored; a float-exact
/// zero at the support edge would otherwise produce a band whose moments all
/// vanish.
#[derive(Debug, Clone)]
pub struct Band {
    j: u32,
    multipoles: Vec<u32>,
    weights: Vec<f64>,
    log_l: Vec<f64>,
    coeff: Vec<f64>,
}

impl Band {
    pub fn j(&self) -> u32 {
        self.j
    }

    pub fn multipoles(&self) -> &[u32] {
        &self.multipoles
    }

    /// Window weights `b^2(l / B^j)`, aligned with [`Self::multipoles`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.multipoles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multipoles.is_empty()
    }

    pub fn first_multipole(&self) -> u32 {
        self.multipoles[0]
    }

    pub fn last_multipole(&self) -> u32 {
        *self.multipoles.last().expect("bands are never empty")
    }

    /// `ln l`, aligned with the multipoles.
    pub(crate) fn log_l(&self) -> &[f64] {
        &self.log_l
    }

    /// `b^2(l / B^j) * (2l + 1)`, aligned with the multipoles.
    pub(crate) fn coeff(&self) -> &[f64] {
        &self.coeff
    }
}

/// Enumerates band `j`: integer multipoles `l >= l_min` with
/// `B^{j-1} < l < B^{j+1}` and positive weight `b^2(l / B^j)`.
///
/// Fails with [`Error::EmptyBand`] when no multipole qualifies.
pub fn band_multipoles(j: u32, params: &WindowParams, l_min: u32) -> Result<Band> {
    if l_min < 1 {
        return Err(Error::InvalidParameter {
            name: "l_min",
            requirement: ">= 1",
            value: l_min as f64,
        });
    }
    let b = params.b();
    let lo = b.powi(j as i32 - 1);
    let hi = b.powi(j as i32 + 1);
    if hi > MAX_MULTIPOLE {
        return Err(Error::InvalidParameter {
            name: "j",
            requirement: "small enough that B^{j+1} stays in the supported multipole range",
            value: j as f64,
        });
    }
    let scale = b.powi(j as i32);
    let start = (lo.floor().max(0.0) as u64).max(l_min as u64);
    let end = hi.ceil() as u64;

    let mut multipoles = Vec::new();
    let mut weights = Vec::new();
    let mut log_l = Vec::new();
    let mut coeff = Vec::new();
    for l in start..=end {
        let lf = l as f64;
        if lf <= lo || lf >= hi {
            continue;
        }
        let w = window_squared_raw(lf / scale, b, params.quad_tol())?;
        if w > 0.0 {
            multipoles.push(l as u32);
            weights.push(w);
            log_l.push(lf.ln());
            coeff.push(w * (2.0 * lf + 1.0));
        }
    }
    if multipoles.is_empty() {
        return Err(Error::EmptyBand { j });
    }
    Ok(Band {
        j,
        multipoles,
        weights,
        log_l,
        coeff,
    })
}

/// All usable needlet bands for multipoles up to `l_max`.
///
/// The top scale is `J_L = floor(log_B(l_max)) - 1`, so every stored band
/// lies fully inside the available multipole range. Bands without a
/// positive-weight multipole (common for small `j` when `B` is close to 1)
/// are skipped.
#[derive(Debug, Clone)]
pub struct BandDecomposition {
    params: WindowParams,
    l_min: u32,
    l_max: u32,
    j_l: u32,
    bands: Vec<Band>,
}

impl BandDecomposition {
    pub fn new(params: &WindowParams, l_max: u32, l_min: u32) -> Result<Self> {
        if l_min < 1 {
            return Err(Error::InvalidParameter {
                name: "l_min",
                requirement: ">= 1",
                value: l_min as f64,
            });
        }
        if l_max < l_min {
            return Err(Error::InvalidParameter {
                name: "l_max",
                requirement: ">= l_min",
                value: l_max as f64,
            });
        }
        let b = params.b();
        // The small forward nudge keeps exact powers of B (e.g. L = 1024,
        // B = 2) on the intended side of the floor.
        let j_l_f = ((l_max as f64).ln() / b.ln() + 1e-9).floor() - 1.0;
        if j_l_f < 0.0 {
            return Err(Error::InvalidParameter {
                name: "l_max",
                requirement: ">= B^2 so that at least one band fits",
                value: l_max as f64,
            });
        }
        let j_l = j_l_f as u32;

        let mut bands = Vec::new();
        for j in 0..=j_l {
            match band_multipoles(j, params, l_min) {
                Ok(band) => {
                    if band.last_multipole() <= l_max {
                        bands.push(band);
                    }
                }
                Err(Error::EmptyBand { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        if bands.is_empty() {
            return Err(Error::NoUsableBands { j_lo: 0, j_hi: j_l });
        }
        Ok(Self {
            params: *params,
            l_min,
            l_max,
            j_l,
            bands,
        })
    }

    pub fn params(&self) -> &WindowParams {
        &self.params
    }

    pub fn l_min(&self) -> u32 {
        self.l_min
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    /// Top scale `J_L = floor(log_B(l_max)) - 1`.
    pub fn j_l(&self) -> u32 {
        self.j_l
    }

    /// Smallest scale with a usable band.
    pub fn j_min(&self) -> u32 {
        self.bands[0].j()
    }

    /// Usable bands in increasing `j` order.
    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    /// The band at scale `j`, if usable.
    pub fn band(&self, j: u32) -> Option<&Band> {
        self.bands
            .binary_search_by_key(&j, Band::j)
            .ok()
            .map(|i| &self.bands[i])
    }

    /// Band normalization `N_j = c_B * B^{2j}` with `c_B = 1`. The estimator
    /// is invariant to the value of `c_B`.
    pub fn n_j(&self, j: u32) -> f64 {
        self.params.b().powi(2 * j as i32)
    }
}

/// Window-weighted multipole moments of one band at a given `alpha`:
/// `k0 = K_j(alpha) = N_j^{-1} sum_l b^2(l/B^j) (2l+1) l^{-alpha}`, and its
/// first two `alpha`-derivatives `k1 = dK_j/dalpha` (the sum gains a factor
/// `-ln l`) and `k2 = d^2K_j/dalpha^2` (factor `ln^2 l`).
#[derive(Debug, Clone, Copy)]
pub struct KValues {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    /// Normalization `N_j` used for this band.
    pub n_j: f64,
}

/// Moments of band `j` of `decomp` at `alpha`.
pub fn k_values(decomp: &BandDecomposition, j: u32, alpha: f64) -> Result<KValues> {
    let band = decomp.band(j).ok_or(Error::EmptyBand { j })?;
    Ok(k_values_for(band, decomp.n_j(j), alpha))
}

/// Moments of `band` with an explicit normalization, shared by the hot
/// estimator loops.
pub(crate) fn k_values_for(band: &Band, n_j: f64, alpha: f64) -> KValues {
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for (&c, &lnl) in band.coeff().iter().zip(band.log_l()) {
        let e = c * (-alpha * lnl).exp();
        s0 += e;
        s1 += e * lnl;
        s2 += e * lnl * lnl;
    }
    KValues {
        k0: s0 / n_j,
        k1: -s1 / n_j,
        k2: s2 / n_j,
        n_j,
    }
}

/// `|sum_{j=0}^{j_max} b^2(l / B^j) - 1|`, the partition-of-unity residual
/// at multipole `l`.
///
/// Requires `l > B` (smaller multipoles are not fully covered) and
/// `B^{j_max - 1} > l` (so every contributing scale is included).
pub fn partition_residual(l: u32, params: &WindowParams, j_max: u32) -> Result<f64> {
    let b = params.b();
    if (l as f64) <= b {
        return Err(Error::InvalidParameter {
            name: "l",
            requirement: "> B",
            value: l as f64,
        });
    }
    if j_max < 1 || b.powi(j_max as i32 - 1) <= l as f64 {
        return Err(Error::InvalidParameter {
            name: "j_max",
            requirement: "large enough that B^{j_max-1} > l",
            value: j_max as f64,
        });
    }
    let mut sum = 0.0;
    for j in 0..=j_max {
        sum += window_squared_raw(l as f64 / b.powi(j as i32), b, params.quad_tol())?;
    }
    Ok((sum - 1.0).abs())
}
