//! Conditional-expectation estimation by local regression, and the two-phase
//! backward-induction scheme built on it.
//!
//! Regression is a nearest-neighbour averaging filter on one coordinate:
//! samples are sorted by the regressor, exact ties are merged by averaging,
//! and each knot's ordinate is the mean of the `bandwidth` nearest samples
//! (window centred where possible, pushed inward at the ends so it always
//! holds `bandwidth` points). Prediction interpolates linearly between knots
//! and clamps outside the fitted range. A global quadratic fit is available
//! as a cross-check fallback.
//!
//! The two-phase scheme prices a European swaption on simulated paths:
//!
//! * Phase one works on the swap's life. Realized discounted cashflows are
//!   rolled to the option expiry and regressed on the phase-one coordinate
//!   (the average pathwise discount factor from the expiry to each remaining
//!   grid date up to swap maturity), giving the exercise-value estimate. Any
//!   adjustment quantities are regressed on the same coordinate.
//! * The exercise rule is applied pathwise at expiry; the carried value is
//!   the realized cashflow PV (plus any regressed adjustment carry), the
//!   decision uses the regressed estimates.
//! * Phase two rolls the decided value from expiry to today by backward
//!   induction: a pathwise money-market discount step followed by a
//!   regression on the phase-two coordinate (the realized discount factor
//!   back to the valuation date, i.e. the reciprocal numeraire).

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{EngineError, Result};
use crate::exercise::{decide_exercise, ExerciseContext};
use crate::instruments::{discount_vector, realized_swap_pv, swap_value, SwaptionSpec};
use crate::ratesim::PathSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegressionFallback {
    #[default]
    None,
    /// Replace the averaging filter with a global quadratic least-squares fit.
    Quadratic,
}

#[derive(Debug, Clone)]
pub struct LocalRegressionConfig {
    /// Number of nearest neighbours averaged per knot.
    pub bandwidth: usize,
    pub fallback: RegressionFallback,
}

impl Default for LocalRegressionConfig {
    fn default() -> Self {
        LocalRegressionConfig {
            bandwidth: 15,
            fallback: RegressionFallback::None,
        }
    }
}

/// Identifies which conditional expectation a surface estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct QuantityKey {
    pub term: usize,
    pub date_index: usize,
}

#[derive(Debug, Clone)]
enum SurfaceKind {
    Constant(f64),
    /// Strictly increasing abscissae with smoothed ordinates.
    Knots(Vec<(f64, f64)>),
    /// Quadratic in the standardised coordinate, clamped to the fitted range.
    Poly {
        coeffs: [f64; 3],
        x_mean: f64,
        x_scale: f64,
        x_min: f64,
        x_max: f64,
    },
}

/// A fitted conditional-expectation estimator for one quantity at one
/// observation date. Prediction is defined for every real input.
#[derive(Debug, Clone)]
pub struct RegressionSurface {
    pub observation_date: f64,
    pub quantity: Option<QuantityKey>,
    kind: SurfaceKind,
}

impl RegressionSurface {
    pub fn predict(&self, x: f64) -> f64 {
        match &self.kind {
            SurfaceKind::Constant(c) => *c,
            SurfaceKind::Knots(knots) => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if x <= first.0 {
                    return first.1;
                }
                if x >= last.0 {
                    return last.1;
                }
                let i = knots.partition_point(|(kx, _)| *kx <= x) - 1;
                let (x0, y0) = knots[i];
                let (x1, y1) = knots[i + 1];
                let w = (x - x0) / (x1 - x0);
                y0 * (1.0 - w) + y1 * w
            }
            SurfaceKind::Poly {
                coeffs,
                x_mean,
                x_scale,
                x_min,
                x_max,
            } => {
                let xc = x.clamp(*x_min, *x_max);
                let z = (xc - x_mean) / x_scale;
                coeffs[0] + coeffs[1] * z + coeffs[2] * z * z
            }
        }
    }

    pub fn n_knots(&self) -> usize {
        match &self.kind {
            SurfaceKind::Constant(_) => 1,
            SurfaceKind::Knots(k) => k.len(),
            SurfaceKind::Poly { .. } => 3,
        }
    }
}

/// Convenience wrapper for [`RegressionSurface::predict`].
pub fn predict(surface: &RegressionSurface, x: f64) -> f64 {
    surface.predict(x)
}

/// Fit the averaging-filter regression of `ys` on `xs`.
pub fn fit_local_regression(
    xs: &[f64],
    ys: &[f64],
    cfg: &LocalRegressionConfig,
) -> Result<RegressionSurface> {
    if xs.len() != ys.len() {
        return Err(EngineError::LengthMismatch {
            what: "regression samples",
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if cfg.bandwidth == 0 {
        return Err(EngineError::invalid("bandwidth must be >= 1"));
    }
    if xs.len() < cfg.bandwidth {
        return Err(EngineError::BandwidthExceedsSamples {
            bandwidth: cfg.bandwidth,
            samples: xs.len(),
        });
    }
    if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
        return Err(EngineError::invalid("regression samples must be finite"));
    }

    if cfg.fallback == RegressionFallback::Quadratic {
        return fit_quadratic(xs, ys);
    }

    // Sort by x and merge exact ties by averaging, keeping abscissae strict.
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(xs.len());
    let mut i = 0;
    while i < order.len() {
        let x = xs[order[i]];
        let mut sum = 0.0;
        let mut count = 0usize;
        while i < order.len() && xs[order[i]] == x {
            sum += ys[order[i]];
            count += 1;
            i += 1;
        }
        merged.push((x, sum / count as f64));
    }

    if merged.len() == 1 {
        return Ok(RegressionSurface {
            observation_date: 0.0,
            quantity: None,
            kind: SurfaceKind::Constant(merged[0].1),
        });
    }

    let m = merged.len();
    let bw = cfg.bandwidth.min(m);
    let half = (bw - 1) / 2;

    // Prefix sums over merged ordinates for O(1) window means.
    let mut prefix = Vec::with_capacity(m + 1);
    prefix.push(0.0);
    for &(_, y) in &merged {
        prefix.push(prefix.last().unwrap() + y);
    }

    let knots: Vec<(f64, f64)> = merged
        .iter()
        .enumerate()
        .map(|(i, &(x, _))| {
            let lo = i.saturating_sub(half).min(m - bw);
            let mean = (prefix[lo + bw] - prefix[lo]) / bw as f64;
            (x, mean)
        })
        .collect();

    Ok(RegressionSurface {
        observation_date: 0.0,
        quantity: None,
        kind: SurfaceKind::Knots(knots),
    })
}

fn fit_quadratic(xs: &[f64], ys: &[f64]) -> Result<RegressionSurface> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let scale = var.sqrt();
    if scale < 1e-300 {
        let c = ys.iter().sum::<f64>() / n;
        return Ok(RegressionSurface {
            observation_date: 0.0,
            quantity: None,
            kind: SurfaceKind::Constant(c),
        });
    }

    let mut moments = [0.0f64; 5];
    let mut rhs = [0.0f64; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let z = (x - mean) / scale;
        let mut zp = 1.0;
        for (k, mom) in moments.iter_mut().enumerate() {
            *mom += zp;
            if k < 3 {
                rhs[k] += zp * y;
            }
            zp *= z;
        }
        // moments[3], moments[4] need z^3, z^4; the loop above covered them.
    }
    let a = Matrix3::new(
        moments[0], moments[1], moments[2], // row 0
        moments[1], moments[2], moments[3], // row 1
        moments[2], moments[3], moments[4], // row 2
    );
    let b = Vector3::new(rhs[0], rhs[1], rhs[2]);
    let coeffs = match a.lu().solve(&b) {
        Some(c) => [c[0], c[1], c[2]],
        None => {
            let c = ys.iter().sum::<f64>() / n;
            return Ok(RegressionSurface {
                observation_date: 0.0,
                quantity: None,
                kind: SurfaceKind::Constant(c),
            });
        }
    };
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in xs {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
    }
    Ok(RegressionSurface {
        observation_date: 0.0,
        quantity: None,
        kind: SurfaceKind::Poly {
            coeffs,
            x_mean: mean,
            x_scale: scale,
            x_min,
            x_max,
        },
    })
}

/// The regression coordinate used in each phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regressor {
    /// Phase one: the average of the pathwise discount factors from the
    /// observation date to every remaining grid date up to `maturity`.
    AvgDiscountToMaturity { maturity: f64 },
    /// Phase two: the realized discount factor back to the valuation date,
    /// i.e. the reciprocal of the money-market numeraire.
    DiscountToValuation,
}

impl Regressor {
    pub fn values(&self, ps: &PathSet, date_idx: usize) -> Result<Vec<f64>> {
        match self {
            Regressor::AvgDiscountToMaturity { maturity } => {
                let mat_idx = ps.date_index(*maturity)?;
                if mat_idx < date_idx {
                    return Err(EngineError::invalid(
                        "regressor maturity precedes the observation date",
                    ));
                }
                let count = (mat_idx - date_idx + 1) as f64;
                Ok((0..ps.n_paths())
                    .map(|p| {
                        let discounts = discount_vector(ps, p, date_idx, 0.0);
                        discounts[date_idx..=mat_idx].iter().sum::<f64>() / count
                    })
                    .collect())
            }
            Regressor::DiscountToValuation => Ok((0..ps.n_paths())
                .map(|p| 1.0 / ps.numeraire(p, date_idx))
                .collect()),
        }
    }
}

/// Pathwise realizations of the quantities to regress: one entry per
/// (term, future date).
#[derive(Debug, Clone)]
pub struct TargetSet {
    pub entries: Vec<TargetEntry>,
}

#[derive(Debug, Clone)]
pub struct TargetEntry {
    pub key: QuantityKey,
    pub values: Vec<f64>,
}

/// Fitted surfaces keyed by (term, date).
#[derive(Debug)]
pub struct SurfaceSet {
    surfaces: BTreeMap<QuantityKey, RegressionSurface>,
}

impl SurfaceSet {
    pub fn get(&self, term: usize, date_index: usize) -> Option<&RegressionSurface> {
        self.surfaces.get(&QuantityKey { term, date_index })
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }
}

/// Regress every target entry on the regressor observed at `obs_date`.
pub fn fit_conditional_expectations(
    ps: &PathSet,
    targets: &TargetSet,
    reg: &Regressor,
    obs_date: f64,
    cfg: &LocalRegressionConfig,
) -> Result<SurfaceSet> {
    if targets.entries.is_empty() {
        return Err(EngineError::invalid("no regression targets supplied"));
    }
    let date_idx = ps.date_index(obs_date)?;
    let xs = reg.values(ps, date_idx)?;
    for e in &targets.entries {
        if e.values.len() != ps.n_paths() {
            return Err(EngineError::LengthMismatch {
                what: "target values per path",
                expected: ps.n_paths(),
                got: e.values.len(),
            });
        }
    }
    let fitted: Result<Vec<(QuantityKey, RegressionSurface)>> = targets
        .entries
        .par_iter()
        .map(|e| {
            let mut s = fit_local_regression(&xs, &e.values, cfg)?;
            s.observation_date = obs_date;
            s.quantity = Some(e.key);
            Ok((e.key, s))
        })
        .collect();
    Ok(SurfaceSet {
        surfaces: fitted?.into_iter().collect(),
    })
}

/// Per-path adjustment estimates layered onto the exercise decision.
#[derive(Debug, Clone, Default)]
pub struct XvaOverlay {
    /// Adjustment carried if the option is exercised.
    pub u_ex: Vec<f64>,
    /// Adjustment if not exercised (zero for a standalone option).
    pub u_noex: Vec<f64>,
    /// Per-term decomposition of `u_ex`.
    pub per_term_u_ex: Vec<(String, Vec<f64>)>,
    /// Total surfaces fitted while building the overlay (diagnostic).
    pub n_surfaces: usize,
}

#[derive(Debug, Clone)]
pub struct TwoPhaseConfig {
    pub regression: LocalRegressionConfig,
    /// Grid steps between phase-two regressions (1 = regress at every date).
    pub phase2_stride: usize,
}

impl Default for TwoPhaseConfig {
    fn default() -> Self {
        TwoPhaseConfig {
            regression: LocalRegressionConfig::default(),
            phase2_stride: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoPhaseResult {
    /// Value at the valuation date from the backward induction.
    pub value0: f64,
    /// Monte Carlo standard error of the single-step discounted decided value.
    pub std_error: f64,
    pub exercised: Vec<bool>,
    pub exercise_probability: f64,
    /// Realized discounted swap cashflows per path at expiry.
    pub pv_at_expiry: Vec<f64>,
    /// Regressed exercise-value estimate per path at expiry.
    pub v_hat_at_expiry: Vec<f64>,
    /// Economic value per path carried into phase two.
    pub decided_at_expiry: Vec<f64>,
    /// Per-term adjustment contribution rolled back to the valuation date.
    pub term_values0: Vec<(String, f64)>,
    pub n_phase2_regressions: usize,
}

/// Roll pathwise values from grid index `from_idx` to 0 by backward
/// induction: discount each step with the realized money-market factor, then
/// replace values with their regression on the phase-two coordinate.
/// Returns the value at the valuation date and the number of regressions.
pub fn phase2_rollback(
    ps: &PathSet,
    values: &mut [f64],
    from_idx: usize,
    cfg: &TwoPhaseConfig,
) -> Result<(f64, usize)> {
    if values.len() != ps.n_paths() {
        return Err(EngineError::LengthMismatch {
            what: "rollback values",
            expected: ps.n_paths(),
            got: values.len(),
        });
    }
    let stride = cfg.phase2_stride.max(1);
    let mut cur = from_idx;
    let mut n_reg = 0usize;
    while cur > 0 {
        let next = cur.saturating_sub(stride);
        for (p, v) in values.iter_mut().enumerate() {
            *v *= ps.realized_df(p, next, cur);
        }
        if next > 0 {
            let xs = Regressor::DiscountToValuation.values(ps, next)?;
            let surface = fit_local_regression(&xs, values, &cfg.regression)?;
            for (p, v) in values.iter_mut().enumerate() {
                *v = surface.predict(xs[p]);
            }
            n_reg += 1;
        }
        cur = next;
    }
    let value0 = values.iter().sum::<f64>() / values.len() as f64;
    Ok((value0, n_reg))
}

/// Two-phase backward-induction price of a European swaption, with an
/// optional adjustment overlay entering both the exercise decision and the
/// carried value. The tie case (equal adjusted values) does not exercise.
pub fn two_phase_lsm(
    ps: &PathSet,
    option: &SwaptionSpec,
    overlay: Option<&XvaOverlay>,
    cfg: &TwoPhaseConfig,
) -> Result<TwoPhaseResult> {
    let n = ps.n_paths();
    let exp_idx = ps.date_index(option.expiry)?;
    ps.date_index(option.underlying.end)?;
    if let Some(ov) = overlay {
        for (what, v) in [("u_ex", &ov.u_ex), ("u_noex", &ov.u_noex)] {
            if v.len() != n {
                return Err(EngineError::LengthMismatch {
                    what: "overlay per-path values",
                    expected: n,
                    got: v.len(),
                });
            }
            if v.iter().any(|u| !u.is_finite()) {
                return Err(EngineError::invalid(format!("{what} must be finite")));
            }
        }
    }

    let pv: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|p| realized_swap_pv(ps, p, exp_idx, &option.underlying))
        .collect::<Result<Vec<f64>>>()?;

    let regressor = Regressor::AvgDiscountToMaturity {
        maturity: option.underlying.end,
    };
    let x1 = regressor.values(ps, exp_idx)?;
    let v_surface = fit_local_regression(&x1, &pv, &cfg.regression)?;
    let v_hat: Vec<f64> = x1.iter().map(|&x| v_surface.predict(x)).collect();

    let zeros;
    let (u_ex, u_noex): (&[f64], &[f64]) = match overlay {
        Some(ov) => (&ov.u_ex, &ov.u_noex),
        None => {
            zeros = vec![0.0; n];
            (&zeros, &zeros)
        }
    };

    let mut exercised = vec![false; n];
    let mut decided = vec![0.0; n];
    for p in 0..n {
        let ctx = ExerciseContext {
            v_ex: v_hat[p],
            v_noex: 0.0,
            u_ex: u_ex[p],
            u_noex: u_noex[p],
        };
        if decide_exercise(&ctx) {
            exercised[p] = true;
            decided[p] = pv[p] + u_ex[p];
        } else {
            decided[p] = u_noex[p];
        }
    }

    // Single-step discounted estimate drives the reported standard error.
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for p in 0..n {
        let v = decided[p] / ps.numeraire(p, exp_idx);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let std_error = ((sum_sq / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();

    let mut rolled = decided.clone();
    let (value0, n_reg) = phase2_rollback(ps, &mut rolled, exp_idx, cfg)?;

    let mut term_values0 = Vec::new();
    if let Some(ov) = overlay {
        for (name, u_term) in &ov.per_term_u_ex {
            let mut vals: Vec<f64> = (0..n)
                .map(|p| if exercised[p] { u_term[p] } else { 0.0 })
                .collect();
            let (v0, _) = phase2_rollback(ps, &mut vals, exp_idx, cfg)?;
            term_values0.push((name.clone(), v0));
        }
    }

    let n_ex = exercised.iter().filter(|e| **e).count();
    Ok(TwoPhaseResult {
        value0,
        std_error,
        exercise_probability: n_ex as f64 / n as f64,
        exercised,
        pv_at_expiry: pv,
        v_hat_at_expiry: v_hat,
        decided_at_expiry: decided,
        term_values0,
        n_phase2_regressions: n_reg,
    })
}

/// Single-step discounted-expectation value of a European swaption: the mean
/// of the discounted expiry-date intrinsic over paths, with its standard
/// error. The benchmark the backward induction is judged against.
pub fn european_single_step(ps: &PathSet, option: &SwaptionSpec) -> Result<(f64, f64)> {
    let n = ps.n_paths();
    let exp_idx = ps.date_index(option.expiry)?;
    let t = ps.dates()[exp_idx];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for p in 0..n {
        let intrinsic = swap_value(ps, p, t, &option.underlying)?.max(0.0);
        let v = intrinsic / ps.numeraire(p, exp_idx);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let se = ((sum_sq / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
    Ok((mean, se))
}
