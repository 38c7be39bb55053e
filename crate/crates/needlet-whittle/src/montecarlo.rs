//! Monte Carlo harness: repeated spectrum sampling, estimation with a
//! configurable set of estimators, and summary statistics with
//! variance-normalized ratios and a normality check.
//!
//! Replications are independent: each gets its own derived seed, and every
//! multipole stream is keyed by `(seed, l)`, so results are byte-identical
//! for any rayon thread count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::asymptotics::{variance_constants, AsymptoticConstants};
use crate::bandsim::{band_powers, sample_empirical_spectrum};
use crate::error::{Error, Result};
use crate::estimator::{
    default_narrow_g, estimate_narrow_band, fourier_narrow_start, fourier_whittle_estimate,
    minimize_profile, narrow_band_range, EstimateResult, EstimatorConfig,
};
use crate::spectrum::SpectrumModel;
use crate::swtest::shapiro_wilk;
use crate::window::{BandDecomposition, WindowParams};

/// The estimators the harness can run on each replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    /// Band-power fit over every usable scale.
    NeedletFull,
    /// Band-power fit over the top scales `J1..=J_L`.
    NeedletNarrow,
    /// Per-multipole fit over the whole spectrum.
    FourierFull,
    /// Per-multipole fit over the top multipoles `l1..=L`.
    FourierNarrow,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::NeedletFull,
        EstimatorKind::NeedletNarrow,
        EstimatorKind::FourierFull,
        EstimatorKind::FourierNarrow,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::NeedletFull => "needlet-full",
            EstimatorKind::NeedletNarrow => "needlet-narrow",
            EstimatorKind::FourierFull => "fourier-full",
            EstimatorKind::FourierNarrow => "fourier-narrow",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownEstimator {
                name: s.to_string(),
            })
    }
}

/// How the narrow-band bandwidth fraction `g` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NarrowSchedule {
    /// `g = J_L^{-3}`, the schedule that keeps the narrow fit first-order
    /// unbiased while losing no rate.
    DefaultJlCubed,
    /// A fixed bandwidth fraction in `(0, 1)`.
    G(f64),
    /// Explicit cut points: scales `j1..=J_L` and multipoles `l1..=L`.
    Explicit { j1: u32, l1: u32 },
}

/// One Monte Carlo experiment: a spectrum model observed up to `l_max`,
/// estimated `replications` times.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: SpectrumModel,
    pub b: f64,
    pub l_max: u32,
    pub l_min: u32,
    pub estimators: Vec<EstimatorKind>,
    pub replications: u32,
    pub seed: u64,
    pub narrow: NarrowSchedule,
    pub estimator: EstimatorConfig,
    pub window_quad_tol: f64,
}

impl ExperimentConfig {
    /// A full-band needlet run with library defaults everywhere else.
    pub fn new(model: SpectrumModel, b: f64, l_max: u32) -> Self {
        ExperimentConfig {
            model,
            b,
            l_max,
            l_min: 1,
            estimators: vec![EstimatorKind::NeedletFull],
            replications: 1000,
            seed: 0,
            narrow: NarrowSchedule::DefaultJlCubed,
            estimator: EstimatorConfig::default(),
            window_quad_tol: WindowParams::DEFAULT_QUAD_TOL,
        }
    }
}

/// Estimates from one replication, one entry per configured estimator, in
/// configuration order. Failures carry the rendered error.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub rep: u32,
    pub results: Vec<(EstimatorKind, std::result::Result<EstimateResult, String>)>,
}

/// Everything `run_experiment` produced, plus the resolved narrow-band cut
/// points so summaries and reports need no re-derivation.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub j_l: u32,
    /// Lowest narrow-band scale, when a needlet-narrow estimator ran.
    pub j1: Option<u32>,
    /// First narrow-range multipole, when a fourier-narrow estimator ran.
    pub l1: Option<u32>,
    /// The bandwidth fraction behind `j1`/`l1`.
    pub g_value: Option<f64>,
    pub records: Vec<RepOutcome>,
}

/// Summary of one estimator across all replications.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub estimator: EstimatorKind,
    /// Replications entering the summary statistics.
    pub n_used: usize,
    /// Successful replications excluded because the fit hit the search
    /// boundary.
    pub n_boundary: usize,
    pub n_failed: usize,
    pub mean: f64,
    pub sd: f64,
    /// Observed variance over its asymptotic prediction; near 1 when the
    /// theory matches.
    ///
    /// Needlet-full: `(L sd)^2 / (B^2 D)`. Fourier-full: `(L sd)^2 / 8`,
    /// the per-multipole benchmark. Needlet-narrow:
    /// `sd^2 Phi g B^{2 J_L} / rho^2`. Fourier-narrow is reported against
    /// the same per-multipole benchmark as the full fit; its bandwidth
    /// correction is left to the reader.
    pub normalized_ratio: f64,
    /// Shapiro-Wilk statistic of the used estimates, when computable.
    pub sw_w: Option<f64>,
    /// Shapiro-Wilk p-value of the used estimates, when computable.
    pub sw_p: Option<f64>,
}

const SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(SEED_MIX);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the spectrum seed of replication `rep` from the experiment seed.
pub fn replication_seed(seed: u64, rep: u32) -> u64 {
    splitmix64(seed.wrapping_add(u64::from(rep).wrapping_mul(SEED_MIX)))
}

/// Resolved narrow-band cut points for one experiment.
struct NarrowCuts {
    j1: Option<u32>,
    l1: Option<u32>,
    g: Option<f64>,
}

fn resolve_narrow(cfg: &ExperimentConfig, decomp: &BandDecomposition) -> Result<NarrowCuts> {
    let wants_needlet = cfg.estimators.contains(&EstimatorKind::NeedletNarrow);
    let wants_fourier = cfg.estimators.contains(&EstimatorKind::FourierNarrow);
    if !wants_needlet && !wants_fourier {
        return Ok(NarrowCuts {
            j1: None,
            l1: None,
            g: None,
        });
    }
    let j_l = decomp.j_l();
    match cfg.narrow {
        NarrowSchedule::Explicit { j1, l1 } => {
            let j1_out = if wants_needlet {
                if j1 > j_l {
                    return Err(Error::DegenerateNarrowBand {
                        j1: i64::from(j1),
                        j_max: j_l,
                        j_l,
                    });
                }
                Some(j1)
            } else {
                None
            };
            let l1_out = if wants_fourier {
                if l1 < cfg.l_min.max(1) || l1 >= cfg.l_max {
                    return Err(Error::InvalidParameter {
                        name: "l1",
                        requirement: "inside the observed multipole range",
                        value: f64::from(l1),
                    });
                }
                Some(l1)
            } else {
                None
            };
            // The fraction of scales kept, implied by the explicit cut.
            let g = 1.0 - cfg.b.powi(i32::try_from(j1).unwrap_or(i32::MAX) - j_l as i32);
            Ok(NarrowCuts {
                j1: j1_out,
                l1: l1_out,
                g: Some(g),
            })
        }
        NarrowSchedule::DefaultJlCubed | NarrowSchedule::G(_) => {
            let g = match cfg.narrow {
                NarrowSchedule::G(g) => g,
                _ => default_narrow_g(j_l),
            };
            let j1_out = if wants_needlet {
                Some(narrow_band_range(j_l, cfg.b, g)?)
            } else {
                None
            };
            let l1_out = if wants_fourier {
                Some(fourier_narrow_start(cfg.l_max, g)?)
            } else {
                None
            };
            Ok(NarrowCuts {
                j1: j1_out,
                l1: l1_out,
                g: Some(g),
            })
        }
    }
}

/// Runs the experiment. Deterministic in `(config, seed)` and independent
/// of the rayon thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    if cfg.estimators.is_empty() {
        return Err(Error::InvalidParameter {
            name: "estimators",
            requirement: "at least one estimator",
            value: 0.0,
        });
    }
    if cfg.replications == 0 {
        return Err(Error::InvalidParameter {
            name: "replications",
            requirement: ">= 1",
            value: 0.0,
        });
    }
    cfg.estimator.validate()?;
    cfg.model.validate_range(cfg.l_min, cfg.l_max)?;

    let params = WindowParams::new(cfg.b, cfg.window_quad_tol)?;
    let decomp = BandDecomposition::new(&params, cfg.l_max, cfg.l_min)?;
    let cuts = resolve_narrow(cfg, &decomp)?;
    let needs_needlet = cfg
        .estimators
        .iter()
        .any(|k| matches!(k, EstimatorKind::NeedletFull | EstimatorKind::NeedletNarrow));
    let fourier_full_range = (cfg.l_min.max(1), cfg.l_max);

    let records: Vec<RepOutcome> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(cfg.seed, rep);
            let mut results = Vec::with_capacity(cfg.estimators.len());
            match sample_empirical_spectrum(&cfg.model, cfg.l_max, cfg.l_min, seed) {
                Err(e) => {
                    let msg = e.to_string();
                    for &kind in &cfg.estimators {
                        results.push((kind, Err(msg.clone())));
                    }
                }
                Ok(spec) => {
                    let powers = if needs_needlet {
                        Some(band_powers(&spec, &decomp))
                    } else {
                        None
                    };
                    for &kind in &cfg.estimators {
                        let fit = match kind {
                            EstimatorKind::NeedletFull | EstimatorKind::NeedletNarrow => {
                                match powers.as_ref().expect("band powers computed above") {
                                    Err(e) => Err(e.clone()),
                                    Ok(p) => {
                                        if kind == EstimatorKind::NeedletFull {
                                            minimize_profile(p, &decomp, &cfg.estimator)
                                        } else {
                                            estimate_narrow_band(
                                                p,
                                                &decomp,
                                                &cfg.estimator,
                                                cuts.j1.expect("narrow cut resolved above"),
                                            )
                                        }
                                    }
                                }
                            }
                            EstimatorKind::FourierFull => {
                                fourier_whittle_estimate(&spec, &cfg.estimator, fourier_full_range)
                            }
                            EstimatorKind::FourierNarrow => fourier_whittle_estimate(
                                &spec,
                                &cfg.estimator,
                                (cuts.l1.expect("narrow cut resolved above"), cfg.l_max),
                            ),
                        };
                        results.push((kind, fit.map_err(|e| e.to_string())));
                    }
                }
            }
            RepOutcome { rep, results }
        })
        .collect();

    Ok(ExperimentRun {
        config: cfg.clone(),
        j_l: decomp.j_l(),
        j1: cuts.j1,
        l1: cuts.l1,
        g_value: cuts.g,
        records,
    })
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn normalized_ratio(
    kind: EstimatorKind,
    sd: f64,
    run: &ExperimentRun,
    constants: Option<&AsymptoticConstants>,
) -> Result<f64> {
    let l = f64::from(run.config.l_max);
    match kind {
        EstimatorKind::NeedletFull => {
            let c = constants.expect("constants computed for needlet estimators");
            Ok((l * sd).powi(2) / c.b2_d())
        }
        EstimatorKind::NeedletNarrow => {
            let c = constants.expect("constants computed for needlet estimators");
            let g = run.g_value.ok_or_else(|| Error::InsufficientData {
                what: "narrow bandwidth missing from run".to_string(),
            })?;
            Ok(sd * sd / c.predicted_narrow_variance(run.j_l, g))
        }
        EstimatorKind::FourierFull | EstimatorKind::FourierNarrow => Ok((l * sd).powi(2) / 8.0),
    }
}

/// Summarizes each estimator of `run` across replications.
///
/// Boundary-flagged fits are excluded from the statistics but counted in
/// `n_boundary`; failed fits are counted in `n_failed`. At least two usable
/// replications per estimator are required.
pub fn summarize(run: &ExperimentRun) -> Result<Vec<SummaryRow>> {
    let needs_constants = run
        .config
        .estimators
        .iter()
        .any(|k| matches!(k, EstimatorKind::NeedletFull | EstimatorKind::NeedletNarrow));
    let constants = if needs_constants {
        Some(variance_constants(
            run.config.b,
            run.config.model.alpha0(),
            run.config.window_quad_tol,
        )?)
    } else {
        None
    };

    let mut rows = Vec::with_capacity(run.config.estimators.len());
    for &kind in &run.config.estimators {
        let mut alphas = Vec::with_capacity(run.records.len());
        let mut n_boundary = 0usize;
        let mut n_failed = 0usize;
        for rec in &run.records {
            for (k, res) in &rec.results {
                if *k != kind {
                    continue;
                }
                match res {
                    Ok(fit) if fit.boundary_flag => n_boundary += 1,
                    Ok(fit) => alphas.push(fit.alpha_hat),
                    Err(_) => n_failed += 1,
                }
            }
        }
        if alphas.len() < 2 {
            return Err(Error::InsufficientData {
                what: format!(
                    "{kind}: {} usable replications ({n_boundary} at boundary, {n_failed} failed)",
                    alphas.len()
                ),
            });
        }
        let (mean, sd) = mean_and_sd(&alphas);
        let ratio = normalized_ratio(kind, sd, run, constants.as_ref())?;
        let sw = if alphas.len() <= 5000 {
            shapiro_wilk(&alphas).ok()
        } else {
            None
        };
        rows.push(SummaryRow {
            estimator: kind,
            n_used: alphas.len(),
            n_boundary,
            n_failed,
            mean,
            sd,
            normalized_ratio: ratio,
            sw_w: sw.map(|(w, _)| w),
            sw_p: sw.map(|(_, p)| p),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn small_config() -> ExperimentConfig {
        let model = SpectrumModel::pure(3.0, 1.0).unwrap();
        let mut cfg = ExperimentConfig::new(model, 2.0, 64);
        cfg.estimators = vec![
            EstimatorKind::NeedletFull,
            EstimatorKind::NeedletNarrow,
            EstimatorKind::FourierFull,
            EstimatorKind::FourierNarrow,
        ];
        cfg.narrow = NarrowSchedule::G(0.5);
        cfg.replications = 8;
        cfg.seed = 42;
        cfg.estimator.alpha_range = (1.0, 10.0);
        cfg
    }

    fn alpha_hats(run: &ExperimentRun) -> Vec<(u32, EstimatorKind, Option<f64>)> {
        run.records
            .iter()
            .flat_map(|r| {
                r.results
                    .iter()
                    .map(move |(k, res)| (r.rep, *k, res.as_ref().ok().map(|f| f.alpha_hat)))
            })
            .collect()
    }

    #[test]
    fn identical_results_for_any_thread_count() {
        let cfg = small_config();
        let mut outputs = Vec::new();
        for threads in [1usize, 2, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let run = pool.install(|| run_experiment(&cfg).unwrap());
            outputs.push(alpha_hats(&run));
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
    }

    #[test]
    fn summary_counts_are_consistent() {
        let cfg = small_config();
        let run = run_experiment(&cfg).unwrap();
        assert_eq!(run.j_l, 5);
        assert_eq!(run.j1, Some(4));
        assert_eq!(run.l1, Some(32));
        assert_eq!(run.records.len(), 8);
        let rows = summarize(&run).unwrap();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert_eq!(row.n_used + row.n_boundary + row.n_failed, 8);
            assert!(row.mean.is_finite());
            assert!(row.sd >= 0.0);
            assert!(row.normalized_ratio > 0.0);
            assert!(row.sw_p.unwrap_or(0.5) >= 0.0);
        }
    }

    #[test]
    fn replication_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for rep in 0..1000 {
            assert!(seen.insert(replication_seed(7, rep)));
        }
        assert_eq!(replication_seed(7, 0), replication_seed(7, 0));
        assert_ne!(replication_seed(7, 0), replication_seed(8, 0));
    }

    #[test]
    fn boundary_fits_are_counted_not_summarized() {
        let mut cfg = small_config();
        cfg.estimators = vec![EstimatorKind::NeedletFull];
        // Data have alpha0 = 3; a search box far above it pins every fit to
        // the boundary.
        cfg.estimator.alpha_range = (9.5, 10.0);
        let run = run_experiment(&cfg).unwrap();
        let err = summarize(&run).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { .. }));
        let boundary_count = run
            .records
            .iter()
            .filter(|r| r.results[0].1.as_ref().map(|f| f.boundary_flag) == Ok(true))
            .count();
        assert_eq!(boundary_count, 8);
    }

    #[test]
    fn estimator_kind_round_trips() {
        for kind in EstimatorKind::ALL {
            assert_eq!(kind.as_str().parse::<EstimatorKind>().unwrap(), kind);
        }
        assert!(matches!(
            "needlet".parse::<EstimatorKind>(),
            Err(Error::UnknownEstimator { .. })
        ));
    }

    #[test]
    fn explicit_schedule_overrides_g() {
        let mut cfg = small_config();
        cfg.narrow = NarrowSchedule::Explicit { j1: 5, l1: 60 };
        let run = run_experiment(&cfg).unwrap();
        assert_eq!(run.j1, Some(5));
        assert_eq!(run.l1, Some(60));
        // j1 = J_L keeps one scale; the implied g is 1 - B^0 = 0.
        assert_eq!(run.g_value, Some(0.0));

        cfg.narrow = NarrowSchedule::Explicit { j1: 9, l1: 60 };
        assert!(run_experiment(&cfg).is_err());
        cfg.narrow = NarrowSchedule::Explicit { j1: 5, l1: 64 };
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_config();
        cfg.estimators.clear();
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = small_config();
        cfg.replications = 0;
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = small_config();
        cfg.b = 1.0;
        assert!(run_experiment(&cfg).is_err());
    }

    // Calibration of the normality check itself: Gaussian samples should
    // pass and uniform samples should fail, at overwhelming frequency.
    #[test]
    fn shapiro_wilk_calibration() {
        let mut normal_pass = 0;
        let mut uniform_reject = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
            let (_, p) = shapiro_wilk(&normal).unwrap();
            if p > 0.01 {
                normal_pass += 1;
            }
            let uniform: Vec<f64> = (0..200).map(|_| rng.gen::<f64>()).collect();
            let (_, p) = shapiro_wilk(&uniform).unwrap();
            if p < 0.01 {
                uniform_reject += 1;
            }
        }
        assert!(normal_pass >= 95, "normal pass rate {normal_pass}/100");
        assert!(uniform_reject >= 95, "uniform reject rate {uniform_reject}/100");
    }
}
