//! Whittle-type profile estimation of `(alpha0, G0)` from needlet band
//! powers, plus a per-multipole Whittle baseline.
//!
//! With `T_j` the observed band powers and `K_j(alpha)` the model-implied
//! band shape, the scale profiles out in closed form,
//! `G_hat(alpha) = (sum_j T_j / K_j(alpha)) / (sum_j N_j)`, leaving the
//! one-dimensional objective
//! `R(alpha) = ln(sum_j T_j / K_j(alpha)) + (sum_j N_j ln K_j(alpha)) / sum_j N_j`
//! (constants dropped). `R` is minimized by a coarse scan followed by Brent
//! refinement; the score and curvature reported alongside the minimizer are
//! exact analytic derivatives of `R`.

use crate::bandsim::{BandPowers, EmpiricalSpectrum};
use crate::error::{Error, Result};
use crate::optimize::prescan_brent;
use crate::window::{k_values_for, Band, BandDecomposition};

/// Search and tolerance settings of the profile minimization.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorConfig {
    /// Closed search interval for `alpha`. The consistency theory assumes
    /// an interval inside `(2, inf)`; wider intervals are accepted so that
    /// reference experiments with `alpha0 = 2` keep the truth interior.
    pub alpha_range: (f64, f64),
    /// Admissible range of the profiled scale. `G_hat` has a closed form,
    /// so the range is validated but not enforced during optimization.
    pub g_range: (f64, f64),
    /// Absolute tolerance on the minimizing `alpha`.
    pub opt_tol: f64,
    /// Grid points of the pre-scan that brackets the global minimum.
    pub prescan_points: usize,
    /// Iteration budget of the Brent refinement.
    pub max_iter: u32,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            alpha_range: (2.01, 10.0),
            g_range: (1e-8, 1e8),
            opt_tol: 1e-6,
            prescan_points: 64,
            max_iter: 200,
        }
    }
}

impl EstimatorConfig {
    /// Checks the search intervals and tolerances; every entry point that
    /// consumes a config calls this first.
    pub fn validate(&self) -> Result<()> {
        let (a1, a2) = self.alpha_range;
        if !a1.is_finite() || !a2.is_finite() || a1 <= 0.0 || a1 >= a2 {
            return Err(Error::InvalidParameter {
                name: "alpha_range",
                requirement: "0 < a1 < a2, finite",
                value: a1,
            });
        }
        let (g1, g2) = self.g_range;
        if !g1.is_finite() || !g2.is_finite() || g1 <= 0.0 || g1 >= g2 {
            return Err(Error::InvalidParameter {
                name: "g_range",
                requirement: "0 < g1 < g2, finite",
                value: g1,
            });
        }
        if !self.opt_tol.is_finite() || self.opt_tol <= 0.0 || self.opt_tol >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "opt_tol",
                requirement: "in (0, 1)",
                value: self.opt_tol,
            });
        }
        if self.prescan_points < 2 {
            return Err(Error::InvalidParameter {
                name: "prescan_points",
                requirement: ">= 2",
                value: self.prescan_points as f64,
            });
        }
        Ok(())
    }
}

/// Outcome of one profile minimization.
#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub alpha_hat: f64,
    pub g_hat: f64,
    /// `R(alpha_hat)`; comparable across alpha for the same data only.
    pub objective_at_min: f64,
    /// Analytic `R'(alpha_hat)`; near zero at an interior minimum.
    pub score_at_min: f64,
    /// Analytic `R''(alpha_hat)`.
    pub curvature: f64,
    /// Needlet fits report the band scales `(j_lo, j_hi)` used; the Fourier
    /// baseline reports the multipole range `(l1, l2)`.
    pub j_range_used: (u32, u32),
    /// Set when `alpha_hat` lies within `opt_tol` of either end of the
    /// search interval.
    pub boundary_flag: bool,
}

/// Bands, powers, and normalizations of one fit, restricted to a scale
/// range.
struct ProfileTerms<'a> {
    bands: Vec<&'a Band>,
    t: Vec<f64>,
    n: Vec<f64>,
    sum_n: f64,
}

impl<'a> ProfileTerms<'a> {
    /// `band_scale` multiplies every `N_j`; the estimator is invariant to
    /// it, which [`minimize_profile_scaled`] exposes for verification.
    fn gather(
        powers: &BandPowers,
        decomp: &'a BandDecomposition,
        j_lo: u32,
        j_hi: u32,
        band_scale: f64,
    ) -> Result<Self> {
        if powers.js().len() != decomp.bands().len()
            || powers
                .js()
                .iter()
                .zip(decomp.bands())
                .any(|(&j, band)| j != band.j())
        {
            return Err(Error::MismatchedBands {
                powers: powers.js().len(),
                decomp: decomp.bands().len(),
            });
        }
        if !(band_scale.is_finite() && band_scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "band_scale",
                requirement: "> 0 and finite",
                value: band_scale,
            });
        }
        let mut bands = Vec::new();
        let mut t = Vec::new();
        let mut n = Vec::new();
        let mut sum_n = 0.0;
        for (band, &tj) in decomp.bands().iter().zip(powers.values()) {
            if band.j() < j_lo || band.j() > j_hi {
                continue;
            }
            let nj = band_scale * decomp.n_j(band.j());
            bands.push(band);
            t.push(tj);
            n.push(nj);
            sum_n += nj;
        }
        if bands.is_empty() {
            return Err(Error::NoUsableBands { j_lo, j_hi });
        }
        if t.iter().all(|&v| v == 0.0) {
            return Err(Error::AllZeroPowers);
        }
        Ok(Self {
            bands,
            t,
            n,
            sum_n,
        })
    }

    fn j_lo(&self) -> u32 {
        self.bands[0].j()
    }

    fn j_hi(&self) -> u32 {
        self.bands[self.bands.len() - 1].j()
    }

    /// `U(alpha) = sum_j T_j / K_j(alpha)`.
    fn eval_u(&self, alpha: f64) -> f64 {
        let mut u = 0.0;
        for i in 0..self.bands.len() {
            let kv = k_values_for(self.bands[i], self.n[i], alpha);
            u += self.t[i] / kv.k0;
        }
        u
    }

    /// The profile objective `R(alpha)`.
    fn eval_r(&self, alpha: f64) -> f64 {
        let mut u = 0.0;
        let mut pen = 0.0;
        for i in 0..self.bands.len() {
            let kv = k_values_for(self.bands[i], self.n[i], alpha);
            u += self.t[i] / kv.k0;
            pen += self.n[i] * kv.k0.ln();
        }
        u.ln() + pen / self.sum_n
    }

    /// Analytic `(R'(alpha), R''(alpha))`.
    fn eval_score_curvature(&self, alpha: f64) -> (f64, f64) {
        let mut u = 0.0;
        let mut u1 = 0.0;
        let mut u2 = 0.0;
        let mut pen1 = 0.0;
        let mut pen2 = 0.0;
        for i in 0..self.bands.len() {
            let kv = k_values_for(self.bands[i], self.n[i], alpha);
            let r1 = kv.k1 / kv.k0;
            let r2 = kv.k2 / kv.k0;
            u += self.t[i] / kv.k0;
            u1 += -self.t[i] * r1 / kv.k0;
            u2 += self.t[i] * (2.0 * r1 * r1 - r2) / kv.k0;
            pen1 += self.n[i] * r1;
            pen2 += self.n[i] * (r2 - r1 * r1);
        }
        let s = u1 / u + pen1 / self.sum_n;
        let q = u2 / u - (u1 / u) * (u1 / u) + pen2 / self.sum_n;
        (s, q)
    }
}

fn require_finite_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() {
        return Err(Error::NonFinite { what: "alpha" });
    }
    Ok(())
}

/// Profiled scale `G_hat(alpha) = (sum_j T_j / K_j(alpha)) / sum_j N_j`
/// over all usable bands.
pub fn g_hat(alpha: f64, powers: &BandPowers, decomp: &BandDecomposition) -> Result<f64> {
    require_finite_alpha(alpha)?;
    let terms = ProfileTerms::gather(powers, decomp, decomp.j_min(), decomp.j_l(), 1.0)?;
    Ok(terms.eval_u(alpha) / terms.sum_n)
}

/// Profile objective `R(alpha)` over all usable bands.
pub fn profile_objective(
    alpha: f64,
    powers: &BandPowers,
    decomp: &BandDecomposition,
) -> Result<f64> {
    require_finite_alpha(alpha)?;
    let terms = ProfileTerms::gather(powers, decomp, decomp.j_min(), decomp.j_l(), 1.0)?;
    Ok(terms.eval_r(alpha))
}

/// Analytic first and second derivative of `R` at `alpha`, over all usable
/// bands.
pub fn score_and_curvature(
    alpha: f64,
    powers: &BandPowers,
    decomp: &BandDecomposition,
) -> Result<(f64, f64)> {
    require_finite_alpha(alpha)?;
    let terms = ProfileTerms::gather(powers, decomp, decomp.j_min(), decomp.j_l(), 1.0)?;
    Ok(terms.eval_score_curvature(alpha))
}

fn fit(
    powers: &BandPowers,
    decomp: &BandDecomposition,
    config: &EstimatorConfig,
    j_lo: u32,
    j_hi: u32,
    band_scale: f64,
) -> Result<EstimateResult> {
    config.validate()?;
    let terms = ProfileTerms::gather(powers, decomp, j_lo, j_hi, band_scale)?;
    let (a1, a2) = config.alpha_range;
    // Brent's tolerance is relative to |alpha|; divide by the interval's
    // largest magnitude to guarantee the absolute tolerance everywhere.
    let rel_tol = config.opt_tol / a2.abs().max(1.0);
    let (alpha_hat, objective_at_min) = prescan_brent(
        |alpha| terms.eval_r(alpha),
        a1,
        a2,
        config.prescan_points,
        rel_tol,
        config.max_iter,
    );
    let alpha_hat = alpha_hat.clamp(a1, a2);
    let (score_at_min, curvature) = terms.eval_score_curvature(alpha_hat);
    let boundary_flag =
        (alpha_hat - a1).abs() <= config.opt_tol || (a2 - alpha_hat).abs() <= config.opt_tol;
    Ok(EstimateResult {
        alpha_hat,
        g_hat: terms.eval_u(alpha_hat) / terms.sum_n,
        objective_at_min,
        score_at_min,
        curvature,
        j_range_used: (terms.j_lo(), terms.j_hi()),
        boundary_flag,
    })
}

/// Full-band estimate of `(alpha0, G0)` from needlet band powers.
pub fn minimize_profile(
    powers: &BandPowers,
    decomp: &BandDecomposition,
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    fit(powers, decomp, config, decomp.j_min(), decomp.j_l(), 1.0)
}

/// [`minimize_profile`] with every `N_j` multiplied by `band_scale`.
///
/// The estimator is mathematically invariant to this constant; the variant
/// exists so that invariance can be verified against the default run.
pub fn minimize_profile_scaled(
    powers: &BandPowers,
    decomp: &BandDecomposition,
    config: &EstimatorConfig,
    band_scale: f64,
) -> Result<EstimateResult> {
    fit(
        powers,
        decomp,
        config,
        decomp.j_min(),
        decomp.j_l(),
        band_scale,
    )
}

/// Narrow-band estimate restricted to scales `j1..=J_L`.
pub fn estimate_narrow_band(
    powers: &BandPowers,
    decomp: &BandDecomposition,
    config: &EstimatorConfig,
    j1: u32,
) -> Result<EstimateResult> {
    if j1 > decomp.j_l() {
        return Err(Error::DegenerateNarrowBand {
            j1: j1 as i64,
            j_max: decomp.j_l().saturating_sub(1),
            j_l: decomp.j_l(),
        });
    }
    fit(powers, decomp, config, j1, decomp.j_l(), 1.0)
}

/// Default narrow-band bandwidth schedule `g = J_L^{-3}`.
pub fn default_narrow_g(j_l: u32) -> f64 {
    (j_l as f64).powi(-3)
}

/// Lowest scale of the narrow band: `J1 = floor(J_L + log_B(1 - g))`.
///
/// Requires `g` strictly inside `(0, 1)`; fails when the schedule leaves no
/// proper sub-range (`J1 >= J_L` after rounding, or `J1 < 0`).
pub fn narrow_band_range(j_l: u32, b: f64, g: f64) -> Result<u32> {
    if !b.is_finite() || b <= 1.0 {
        return Err(Error::InvalidParameter {
            name: "b",
            requirement: "finite and > 1",
            value: b,
        });
    }
    if !g.is_finite() || g <= 0.0 || g >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "g",
            requirement: "strictly inside (0, 1)",
            value: g,
        });
    }
    // The nudge keeps exact schedules such as g = 1 - B^{-k} on the intended
    // side of the floor.
    let j1 = (j_l as f64 + (1.0 - g).ln() / b.ln() + 1e-12).floor();
    if j1 >= j_l as f64 || j1 < 0.0 {
        return Err(Error::DegenerateNarrowBand {
            j1: j1 as i64,
            j_max: j_l.saturating_sub(1),
            j_l,
        });
    }
    Ok(j1 as u32)
}

/// First multipole of the narrow per-multipole range:
/// `l1 = round(l_max * (1 - g))`, clamped below at 1.
pub fn fourier_narrow_start(l_max: u32, g: f64) -> Result<u32> {
    if !g.is_finite() || g <= 0.0 || g >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "g",
            requirement: "strictly inside (0, 1)",
            value: g,
        });
    }
    let l1 = (l_max as f64 * (1.0 - g)).round().max(1.0) as u32;
    if l1 >= l_max {
        return Err(Error::InvalidParameter {
            name: "g",
            requirement: "large enough that the narrow range keeps at least two multipoles",
            value: g,
        });
    }
    Ok(l1)
}

/// Per-multipole Whittle baseline on `l = l_range.0 ..= l_range.1`.
///
/// The scale profiles out exactly as in the needlet case:
/// `G_hat(alpha) = sum_l (2l+1) C_l_hat l^alpha / sum_l (2l+1)`, and the
/// objective is `R(alpha) = ln G_hat(alpha) - alpha * M` with `M` the
/// multiplicity-weighted mean of `ln l`. `j_range_used` carries the
/// multipole range.
pub fn fourier_whittle_estimate(
    spec: &EmpiricalSpectrum,
    config: &EstimatorConfig,
    l_range: (u32, u32),
) -> Result<EstimateResult> {
    config.validate()?;
    let (l1, l2) = l_range;
    if l1 < 1 || l1 > l2 {
        return Err(Error::InvalidParameter {
            name: "l_range",
            requirement: "1 <= l1 <= l2",
            value: l1 as f64,
        });
    }
    if l1 < spec.l_min() || l2 > spec.l_max() {
        return Err(Error::BandOutsideSpectrum {
            j: 0,
            need_lo: l1,
            need_hi: l2,
            have_lo: spec.l_min(),
            have_hi: spec.l_max(),
        });
    }

    let base = spec.l_min();
    let mut log_l = Vec::with_capacity((l2 - l1 + 1) as usize);
    let mut wc = Vec::with_capacity(log_l.capacity());
    let mut sum_w = 0.0;
    let mut sum_w_logl = 0.0;
    for l in l1..=l2 {
        let w = f64::from(2 * l + 1);
        let lnl = (l as f64).ln();
        log_l.push(lnl);
        wc.push(w * spec.values()[(l - base) as usize]);
        sum_w += w;
        sum_w_logl += w * lnl;
    }
    if wc.iter().all(|&v| v == 0.0) {
        return Err(Error::AllZeroPowers);
    }
    let m = sum_w_logl / sum_w;

    // Weighted power sums sum_l wc_l l^alpha (ln l)^u for u = 0, 1, 2.
    let moments = |alpha: f64, order: u32| -> (f64, f64, f64) {
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for (&c, &lnl) in wc.iter().zip(&log_l) {
            let e = c * (alpha * lnl).exp();
            s0 += e;
            if order >= 1 {
                s1 += e * lnl;
            }
            if order >= 2 {
                s2 += e * lnl * lnl;
            }
        }
        (s0, s1, s2)
    };

    let objective = |alpha: f64| moments(alpha, 0).0.ln() - sum_w.ln() - alpha * m;
    let (a1, a2) = config.alpha_range;
    let rel_tol = config.opt_tol / a2.abs().max(1.0);
    let (alpha_hat, objective_at_min) = prescan_brent(
        objective,
        a1,
        a2,
        config.prescan_points,
        rel_tol,
        config.max_iter,
    );
    let alpha_hat = alpha_hat.clamp(a1, a2);

    let (s0, s1, s2) = moments(alpha_hat, 2);
    let mean_log = s1 / s0;
    let score_at_min = mean_log - m;
    let curvature = s2 / s0 - mean_log * mean_log;
    let boundary_flag =
        (alpha_hat - a1).abs() <= config.opt_tol || (a2 - alpha_hat).abs() <= config.opt_tol;
    Ok(EstimateResult {
        alpha_hat,
        g_hat: s0 / sum_w,
        objective_at_min,
        score_at_min,
        curvature,
        j_range_used: (l1, l2),
        boundary_flag,
    })
}
