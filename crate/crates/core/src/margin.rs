//! Initial margin via historical expected shortfall, and a simplified
//! standardized regulatory capital profile.
//!
//! Initial margin: absolute zero-yield shocks per tenor point are summed over
//! overlapping windows (5 business days by default), interpolated onto the
//! pathwise curve, and the portfolio is fully revalued under each window. The
//! 97.5% expected shortfall of that P&L distribution, scaled by sqrt(2) to a
//! 10-day horizon, is the margin requirement.
//!
//! Capital: a counterparty-risk charge `8% * RW * EAD` with
//! `EAD = V^+ + addon(maturity) * notional`, plus a market-risk charge from a
//! 3-by-3 scenario grid of relative volatility moves and absolute yield
//! shifts, taking the worst loss over the grid. Swaps carry no vega, so the
//! volatility axis is inert here; the grid shape is kept so option positions
//! could slot in later.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{EngineError, Result};
use crate::instruments::{cashflow_strip, discount_vector, CashflowStrip, SwapSpec};
use crate::ratesim::PathSet;

/// Absolute zero-yield shocks: one row per historical date, one column per
/// tenor point (years).
#[derive(Debug, Clone)]
pub struct ShockSeries {
    tenors: Vec<f64>,
    /// Row-major `[date][tenor]`.
    data: Vec<f64>,
    n_dates: usize,
}

impl ShockSeries {
    pub fn new(tenors: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if tenors.is_empty() {
            return Err(EngineError::invalid("shock series needs tenor columns"));
        }
        if tenors.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EngineError::invalid("shock tenors must be increasing"));
        }
        let mut data = Vec::with_capacity(rows.len() * tenors.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != tenors.len() {
                return Err(EngineError::LengthMismatch {
                    what: "shock row",
                    expected: tenors.len(),
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(EngineError::invalid(format!(
                    "non-finite shock in row {i}"
                )));
            }
            data.extend_from_slice(row);
        }
        let n_dates = rows.len();
        Ok(ShockSeries {
            tenors,
            data,
            n_dates,
        })
    }

    /// Parse a comma-delimited text file: a header row of tenors in years,
    /// then one row of decimal shocks per historical date.
    pub fn from_delimited(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| EngineError::invalid("shock file is empty"))?;
        let parse_row = |line_no: usize, line: &str| -> Result<Vec<f64>> {
            line.split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        EngineError::invalid(format!(
                            "shock file line {}: cannot parse '{}' as a number",
                            line_no + 1,
                            tok.trim()
                        ))
                    })
                })
                .collect()
        };
        let tenors = parse_row(0, header)?;
        let mut rows = Vec::new();
        for (line_no, line) in lines {
            rows.push(parse_row(line_no, line)?);
        }
        if rows.is_empty() {
            return Err(EngineError::invalid("shock file has no data rows"));
        }
        ShockSeries::new(tenors, rows)
    }

    /// Seeded synthetic series: normal daily shocks with one common factor,
    /// `shock_i = vol_i (sqrt(rho) z_common + sqrt(1 - rho) z_i)`.
    pub fn synthetic(
        tenors: Vec<f64>,
        daily_vols: Vec<f64>,
        correlation: f64,
        n_days: usize,
        seed: u64,
    ) -> Result<Self> {
        if daily_vols.len() != tenors.len() {
            return Err(EngineError::LengthMismatch {
                what: "daily vols",
                expected: tenors.len(),
                got: daily_vols.len(),
            });
        }
        if !(0.0..=1.0).contains(&correlation) {
            return Err(EngineError::invalid("correlation must lie in [0, 1]"));
        }
        if daily_vols.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(EngineError::invalid("daily vols must be finite and >= 0"));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let (wc, wi) = (correlation.sqrt(), (1.0 - correlation).sqrt());
        let rows: Vec<Vec<f64>> = (0..n_days)
            .map(|_| {
                let common: f64 = StandardNormal.sample(&mut rng);
                daily_vols
                    .iter()
                    .map(|vol| {
                        let own: f64 = StandardNormal.sample(&mut rng);
                        vol * (wc * common + wi * own)
                    })
                    .collect()
            })
            .collect();
        ShockSeries::new(tenors, rows)
    }

    pub fn n_dates(&self) -> usize {
        self.n_dates
    }

    pub fn tenors(&self) -> &[f64] {
        &self.tenors
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.tenors.len()..(i + 1) * self.tenors.len()]
    }

    /// Overlapping sums of `window` consecutive rows.
    pub fn overlapping_windows(&self, window: usize) -> Result<Vec<Vec<f64>>> {
        if window == 0 {
            return Err(EngineError::invalid("window must be >= 1"));
        }
        if self.n_dates < window {
            return Err(EngineError::TooFewSamples {
                needed: window,
                got: self.n_dates,
            });
        }
        let k = self.tenors.len();
        let mut out = Vec::with_capacity(self.n_dates - window + 1);
        let mut acc: Vec<f64> = vec![0.0; k];
        for i in 0..window {
            for (a, v) in acc.iter_mut().zip(self.row(i)) {
                *a += v;
            }
        }
        out.push(acc.clone());
        for i in window..self.n_dates {
            for ((a, add), sub) in acc.iter_mut().zip(self.row(i)).zip(self.row(i - window)) {
                *a += add - sub;
            }
            out.push(acc.clone());
        }
        Ok(out)
    }

    /// Linear interpolation of a shock vector at `tenor` years, flat outside
    /// the quoted range.
    pub fn interpolate(&self, shocks: &[f64], tenor: f64) -> f64 {
        let t = &self.tenors;
        if tenor <= t[0] {
            return shocks[0];
        }
        if tenor >= *t.last().unwrap() {
            return *shocks.last().unwrap();
        }
        let i = t.partition_point(|x| *x <= tenor) - 1;
        let w = (tenor - t[i]) / (t[i + 1] - t[i]);
        shocks[i] * (1.0 - w) + shocks[i + 1] * w
    }
}

/// Expected-shortfall initial margin parameters.
#[derive(Debug, Clone)]
pub struct ImConfig {
    pub es_level: f64,
    pub horizon_scale: f64,
    pub overlap_days: usize,
}

impl Default for ImConfig {
    fn default() -> Self {
        ImConfig {
            es_level: 0.975,
            horizon_scale: std::f64::consts::SQRT_2,
            overlap_days: 5,
        }
    }
}

impl ImConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.es_level > 0.5 && self.es_level < 1.0) {
            return Err(EngineError::invalid(format!(
                "es_level must lie in (0.5, 1), got {}",
                self.es_level
            )));
        }
        if !(self.horizon_scale > 0.0) {
            return Err(EngineError::invalid("horizon_scale must be > 0"));
        }
        if self.overlap_days == 0 {
            return Err(EngineError::invalid("overlap_days must be >= 1"));
        }
        Ok(())
    }
}

/// Simplified standardized capital parameters.
#[derive(Debug, Clone)]
pub struct CapitalConfig {
    pub counterparty_rating: String,
    /// Counterparty risk weight (1.0 for an unrated/BB-style weight).
    pub risk_weight: f64,
    /// `(max maturity in years, addon rate on notional)` buckets, ascending.
    pub ccr_addons: Vec<(f64, f64)>,
    /// Relative volatility moves of the scenario grid.
    pub vol_scenarios: [f64; 3],
    /// `(max maturity in years, absolute yield shift)` buckets, ascending.
    pub yield_shifts: Vec<(f64, f64)>,
    pub gamma_k: f64,
    pub phi: f64,
    pub include_market_risk: bool,
}

impl CapitalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.risk_weight < 0.0 {
            return Err(EngineError::invalid("risk weight must be >= 0"));
        }
        for (label, table) in [("ccr_addons", &self.ccr_addons), ("yield_shifts", &self.yield_shifts)]
        {
            if table.is_empty() {
                return Err(EngineError::invalid(format!("{label} must not be empty")));
            }
            if table.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(EngineError::invalid(format!(
                    "{label} buckets must have increasing maturities"
                )));
            }
            if table.iter().any(|(m, v)| *m <= 0.0 || *v < 0.0) {
                return Err(EngineError::invalid(format!("{label} entries must be >= 0")));
            }
        }
        Ok(())
    }

    fn lookup(table: &[(f64, f64)], maturity: f64) -> f64 {
        for (max_mat, v) in table {
            if maturity <= *max_mat {
                return *v;
            }
        }
        table.last().map(|(_, v)| *v).unwrap_or(0.0)
    }

    pub fn addon(&self, maturity: f64) -> f64 {
        Self::lookup(&self.ccr_addons, maturity)
    }

    pub fn yield_shift(&self, maturity: f64) -> f64 {
        Self::lookup(&self.yield_shifts, maturity)
    }
}

impl Default for CapitalConfig {
    fn default() -> Self {
        CapitalConfig {
            counterparty_rating: "BB".into(),
            risk_weight: 1.0,
            // Interest-rate style add-ons by remaining maturity.
            ccr_addons: vec![(1.0, 0.0), (5.0, 0.005), (100.0, 0.015)],
            vol_scenarios: [-0.25, 0.0, 0.25],
            yield_shifts: vec![(3.0, 0.0085), (7.0, 0.0075), (100.0, 0.006)],
            gamma_k: 0.1,
            phi: 0.0,
            include_market_risk: true,
        }
    }
}

/// Mean of the worst `ceil((1 - level) n)` outcomes, returned positive for a
/// loss tail. The tail always holds at least one scenario; a uniformly
/// profitable vector yields a negative number, and margin users floor at
/// zero. Agrees bit-for-bit with sorting ascending and averaging the first
/// `k` entries.
pub fn expected_shortfall(pnl: &[f64], level: f64) -> Result<f64> {
    if !(level > 0.5 && level < 1.0) {
        return Err(EngineError::invalid(format!(
            "es level must lie in (0.5, 1), got {level}"
        )));
    }
    let n = pnl.len();
    if n == 0 {
        return Err(EngineError::TooFewSamples { needed: 1, got: 0 });
    }
    if pnl.iter().any(|v| !v.is_finite()) {
        return Err(EngineError::invalid("pnl entries must be finite"));
    }
    let k = (((1.0 - level) * n as f64).ceil() as usize).max(1);
    let mut work = pnl.to_vec();
    if k < n {
        work.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
    }
    let tail = &mut work[..k];
    tail.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tail_mean = tail.iter().sum::<f64>() / k as f64;
    Ok(-tail_mean)
}

/// Precomputed revaluation grid for one observation date: shocked discount
/// multipliers per window per remaining grid date, shared by every path.
struct WindowGrid {
    /// `[window][grid date]`, multiplier on `P(t, d)`.
    factors: Vec<Vec<f64>>,
}

fn window_grid(
    ps: &PathSet,
    t_idx: usize,
    shocks: &ShockSeries,
    windows: &[Vec<f64>],
) -> WindowGrid {
    let dates = ps.dates();
    let t = dates[t_idx];
    let n = dates.len();
    let factors = windows
        .iter()
        .map(|w| {
            (0..n)
                .map(|j| {
                    if j <= t_idx {
                        1.0
                    } else {
                        let offset = dates[j] - t;
                        (-shocks.interpolate(w, offset) * offset).exp()
                    }
                })
                .collect()
        })
        .collect();
    WindowGrid { factors }
}

fn strip_pnls(
    strip: &CashflowStrip,
    discounts: &[f64],
    grid: &WindowGrid,
    out: &mut Vec<f64>,
) {
    out.clear();
    for factors in &grid.factors {
        let mut pnl = 0.0;
        for (&di, &a) in strip.date_indices.iter().zip(&strip.amounts) {
            pnl += a * discounts[di] * (factors[di] - 1.0);
        }
        out.push(pnl);
    }
}

fn portfolio_strip(
    ps: &PathSet,
    path: usize,
    t_idx: usize,
    portfolio: &[SwapSpec],
) -> Result<CashflowStrip> {
    let mut date_indices = Vec::new();
    let mut amounts = Vec::new();
    for spec in portfolio {
        let s = cashflow_strip(ps, path, t_idx, spec)?;
        date_indices.extend(s.date_indices);
        amounts.extend(s.amounts);
    }
    Ok(CashflowStrip {
        date_indices,
        amounts,
    })
}

/// Initial margin posted at `(path, t)`: full revaluation of the netted
/// portfolio under each overlapping shock window, expected shortfall of the
/// P&L, scaled to the margin horizon, floored at zero.
pub fn compute_im(
    ps: &PathSet,
    path: usize,
    t: f64,
    portfolio: &[SwapSpec],
    shocks: &ShockSeries,
    cfg: &ImConfig,
) -> Result<f64> {
    cfg.validate()?;
    let t_idx = ps.date_index(t)?;
    let windows = shocks.overlapping_windows(cfg.overlap_days)?;
    let grid = window_grid(ps, t_idx, shocks, &windows);
    compute_im_at(ps, path, t_idx, portfolio, &grid, cfg)
}

fn compute_im_at(
    ps: &PathSet,
    path: usize,
    t_idx: usize,
    portfolio: &[SwapSpec],
    grid: &WindowGrid,
    cfg: &ImConfig,
) -> Result<f64> {
    let strip = portfolio_strip(ps, path, t_idx, portfolio)?;
    if strip.is_empty() {
        return Ok(0.0);
    }
    let discounts = discount_vector(ps, path, t_idx, 0.0);
    let mut pnls = Vec::with_capacity(grid.factors.len());
    strip_pnls(&strip, &discounts, grid, &mut pnls);
    let es = expected_shortfall(&pnls, cfg.es_level)?;
    Ok((cfg.horizon_scale * es).max(0.0))
}

/// Initial margin for every path at a set of observation dates. The shock
/// windows and discount multipliers are computed once per date and shared
/// across paths; paths run in parallel.
pub fn im_profile(
    ps: &PathSet,
    portfolio: &[SwapSpec],
    date_indices: &[usize],
    shocks: &ShockSeries,
    cfg: &ImConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let windows = shocks.overlapping_windows(cfg.overlap_days)?;
    date_indices
        .iter()
        .map(|&t_idx| {
            let grid = window_grid(ps, t_idx, shocks, &windows);
            (0..ps.n_paths())
                .into_par_iter()
                .map(|path| compute_im_at(ps, path, t_idx, portfolio, &grid, cfg))
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

/// Market-risk capital at `(path, t)`: worst loss over the 3x3 grid of
/// relative volatility moves and absolute parallel yield shifts, floored at
/// zero. Linear portfolios only react along the yield axis.
pub fn market_risk_capital(
    ps: &PathSet,
    path: usize,
    t: f64,
    portfolio: &[SwapSpec],
    cfg: &CapitalConfig,
) -> Result<f64> {
    let t_idx = ps.date_index(t)?;
    let strip = portfolio_strip(ps, path, t_idx, portfolio)?;
    if strip.is_empty() {
        return Ok(0.0);
    }
    let t_now = ps.dates()[t_idx];
    let maturity = portfolio
        .iter()
        .map(|s| s.end - t_now)
        .fold(0.0f64, f64::max);
    let shift = cfg.yield_shift(maturity);
    let discounts = discount_vector(ps, path, t_idx, 0.0);
    let dates = ps.dates();

    let mut worst = 0.0f64;
    for _vol in cfg.vol_scenarios {
        for dy in [-shift, 0.0, shift] {
            let mut value_change = 0.0;
            for (&di, &a) in strip.date_indices.iter().zip(&strip.amounts) {
                let offset = dates[di] - t_now;
                value_change += a * discounts[di] * ((-dy * offset).exp() - 1.0);
            }
            worst = worst.max(-value_change);
        }
    }
    Ok(worst)
}

/// Counterparty credit capital: `8% * RW * EAD` with
/// `EAD = max(V, 0) + addon(maturity) * notional`.
pub fn ccr_capital(v: f64, notional: f64, maturity: f64, cfg: &CapitalConfig) -> f64 {
    let ead = v.max(0.0) + cfg.addon(maturity) * notional.abs();
    0.08 * cfg.risk_weight * ead
}

/// Pathwise total capital `K(t) = K_CCR(t) + K_MR(t)` at the given grid
/// dates, `[date][path]`.
pub fn total_capital_profile(
    ps: &PathSet,
    portfolio: &[SwapSpec],
    cfg: &CapitalConfig,
    date_indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let dates = ps.dates();
    date_indices
        .iter()
        .map(|&t_idx| {
            (0..ps.n_paths())
                .into_par_iter()
                .map(|path| {
                    let t = dates[t_idx];
                    let mut v_net = 0.0;
                    let mut notional = 0.0;
                    let mut maturity = 0.0f64;
                    for spec in portfolio {
                        if spec.end > t + crate::ratesim::DATE_TOL {
                            v_net += crate::instruments::swap_value(ps, path, t, spec)?;
                            notional += spec.notional.abs();
                            maturity = maturity.max(spec.end - t);
                        }
                    }
                    let mut k = ccr_capital(v_net, notional, maturity, cfg);
                    if cfg.include_market_risk {
                        k += market_risk_capital(ps, path, t, portfolio, cfg)?;
                    }
                    Ok(k)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}
