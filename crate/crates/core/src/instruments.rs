//! Interest-rate swaps and European swaptions, valued pathwise on a
//! [`PathSet`](crate::ratesim::PathSet).
//!
//! Valuation is single-curve: the simulated forwards both project the float
//! leg and discount. Float payments telescope against the pathwise discount
//! curve, so a float leg between schedule dates `e_a .. e_J` not yet started
//! is worth `N (P(t, e_a) - P(t, e_J))`; once inside a period the fixing set
//! at the period start is read back from the stored curve history.
//!
//! Day counts are plain year fractions taken from the date grid.

use crate::error::{EngineError, Result};
use crate::ratesim::{PathSet, DATE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapDirection {
    /// Pay fixed, receive float.
    Payer,
    /// Receive fixed, pay float.
    Receiver,
}

impl SwapDirection {
    pub fn sign(self) -> f64 {
        match self {
            SwapDirection::Payer => 1.0,
            SwapDirection::Receiver => -1.0,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            SwapDirection::Payer => SwapDirection::Receiver,
            SwapDirection::Receiver => SwapDirection::Payer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Settlement {
    Physical,
    /// Cash settlement pays out at expiry; the post-exercise period is too
    /// short to carry adjustments, so a cash-settled option is priced with
    /// every adjustment term switched off.
    Cash,
}

/// A fixed-for-float swap. Schedules are accrual boundary dates including
/// both `start` and `end`; payment happens at each period's end date.
#[derive(Debug, Clone)]
pub struct SwapSpec {
    pub notional: f64,
    pub fixed_rate: f64,
    pub direction: SwapDirection,
    pub start: f64,
    pub end: f64,
    pub fixed_dates: Vec<f64>,
    pub float_dates: Vec<f64>,
}

impl SwapSpec {
    pub fn new(
        notional: f64,
        fixed_rate: f64,
        direction: SwapDirection,
        start: f64,
        end: f64,
        fixed_periods_per_year: usize,
        float_periods_per_year: usize,
    ) -> Result<Self> {
        if !(end > start) {
            return Err(EngineError::invalid(format!(
                "swap end {end} must be after start {start}"
            )));
        }
        if fixed_periods_per_year == 0 || float_periods_per_year == 0 {
            return Err(EngineError::invalid("schedule frequency must be >= 1"));
        }
        let build = |per_year: usize| -> Result<Vec<f64>> {
            let n = ((end - start) * per_year as f64).round() as usize;
            if n == 0 || ((end - start) * per_year as f64 - n as f64).abs() > 1e-6 {
                return Err(EngineError::invalid(format!(
                    "swap tenor {} years does not fit {} periods per year",
                    end - start,
                    per_year
                )));
            }
            Ok((0..=n)
                .map(|i| start + i as f64 / per_year as f64)
                .collect())
        };
        Self::with_schedules(
            notional,
            fixed_rate,
            direction,
            build(fixed_periods_per_year)?,
            build(float_periods_per_year)?,
        )
    }

    pub fn with_schedules(
        notional: f64,
        fixed_rate: f64,
        direction: SwapDirection,
        fixed_dates: Vec<f64>,
        float_dates: Vec<f64>,
    ) -> Result<Self> {
        for dates in [&fixed_dates, &float_dates] {
            if dates.len() < 2 {
                return Err(EngineError::invalid("schedule needs at least two dates"));
            }
            if dates.windows(2).any(|w| w[1] - w[0] <= DATE_TOL) {
                return Err(EngineError::NonMonotonicGrid);
            }
        }
        if (fixed_dates[0] - float_dates[0]).abs() > DATE_TOL
            || (fixed_dates.last().unwrap() - float_dates.last().unwrap()).abs() > DATE_TOL
        {
            return Err(EngineError::invalid(
                "fixed and float schedules must share start and end",
            ));
        }
        if !notional.is_finite() || !fixed_rate.is_finite() {
            return Err(EngineError::invalid("notional and rate must be finite"));
        }
        let start = fixed_dates[0];
        let end = *fixed_dates.last().unwrap();
        Ok(SwapSpec {
            notional,
            fixed_rate,
            direction,
            start,
            end,
            fixed_dates,
            float_dates,
        })
    }

    /// Same swap with the opposite direction.
    pub fn flipped(&self) -> SwapSpec {
        let mut s = self.clone();
        s.direction = s.direction.opposite();
        s
    }

    /// Same swap with a different coupon (used for strike sweeps).
    pub fn with_fixed_rate(&self, rate: f64) -> SwapSpec {
        let mut s = self.clone();
        s.fixed_rate = rate;
        s
    }
}

/// A European swaption. Expiry must equal the underlying swap's start date.
#[derive(Debug, Clone)]
pub struct SwaptionSpec {
    pub expiry: f64,
    pub underlying: SwapSpec,
    pub settlement: Settlement,
}

impl SwaptionSpec {
    pub fn new(expiry: f64, underlying: SwapSpec, settlement: Settlement) -> Result<Self> {
        if (expiry - underlying.start).abs() > DATE_TOL {
            return Err(EngineError::invalid(format!(
                "expiry {expiry} must equal the underlying swap start {}",
                underlying.start
            )));
        }
        Ok(SwaptionSpec {
            expiry,
            underlying,
            settlement,
        })
    }

    pub fn strike(&self) -> f64 {
        self.underlying.fixed_rate
    }
}

/// Discounted cashflow representation of a swap at one observation date:
/// the remaining value is `sum_i amounts[i] * P(t, dates[i])`.
///
/// Fixed coupons appear directly; the float leg appears through its
/// telescoped notional exchanges, with the current period's fixing (if the
/// observation falls inside a period) folded into the leading amount. This is
/// what shock and scenario revaluation operate on: only the discounts move,
/// the amounts stay fixed.
#[derive(Debug, Clone)]
pub struct CashflowStrip {
    pub date_indices: Vec<usize>,
    pub amounts: Vec<f64>,
}

impl CashflowStrip {
    pub fn is_empty(&self) -> bool {
        self.date_indices.is_empty()
    }

    pub fn value(&self, discounts: &[f64]) -> f64 {
        self.date_indices
            .iter()
            .zip(&self.amounts)
            .map(|(&i, a)| a * discounts[i])
            .sum()
    }
}

fn grid_index(ps: &PathSet, t: f64) -> Result<usize> {
    ps.date_index(t)
}

/// Build the remaining-cashflow strip of `spec` as seen at grid date `t_idx`.
/// Discount indices are grid date indices (absolute, not offsets).
pub fn cashflow_strip(
    ps: &PathSet,
    path: usize,
    t_idx: usize,
    spec: &SwapSpec,
) -> Result<CashflowStrip> {
    let t = ps.dates()[t_idx];
    let mut date_indices = Vec::new();
    let mut amounts = Vec::new();
    let sign = spec.direction.sign();

    // Fixed leg: -sign * N * R * tau at each remaining payment date.
    for w in spec.fixed_dates.windows(2) {
        let (a, pay) = (w[0], w[1]);
        if pay > t + DATE_TOL {
            date_indices.push(grid_index(ps, pay)?);
            amounts.push(-sign * spec.notional * spec.fixed_rate * (pay - a));
        }
    }

    // Float leg, telescoped.
    let fl = &spec.float_dates;
    let last = *fl.last().unwrap();
    if last > t + DATE_TOL {
        let end_idx = grid_index(ps, last)?;
        if t <= fl[0] + DATE_TOL {
            date_indices.push(grid_index(ps, fl[0])?);
            amounts.push(sign * spec.notional);
        } else {
            // Inside period c: the payment at e_{c+1} was fixed at e_c.
            let c = fl
                .windows(2)
                .position(|w| w[0] <= t + DATE_TOL && t < w[1] - DATE_TOL)
                .ok_or(EngineError::DateOffGrid(t))?;
            let start_idx = grid_index(ps, fl[c])?;
            let pay_idx = grid_index(ps, fl[c + 1])?;
            let growth = 1.0 / ps.df_from_row(path, start_idx, start_idx, pay_idx);
            date_indices.push(pay_idx);
            amounts.push(sign * spec.notional * growth);
        }
        date_indices.push(end_idx);
        amounts.push(-sign * spec.notional);
    }

    Ok(CashflowStrip {
        date_indices,
        amounts,
    })
}

/// Discount factors `P(t, dates[j])` for every grid date `j >= t_idx`, laid
/// out as a full-length vector (entries before `t_idx` are zero). `bump` is
/// an absolute parallel shift applied to every forward on the observed curve.
pub fn discount_vector(ps: &PathSet, path: usize, t_idx: usize, bump: f64) -> Vec<f64> {
    let n = ps.n_dates();
    let mut out = vec![0.0; n];
    let row = ps.curve_forwards(path, t_idx);
    let acc = ps.accruals();
    let mut df = 1.0;
    out[t_idx] = 1.0;
    for j in t_idx..n - 1 {
        df /= 1.0 + acc[j] * (row[j - t_idx] + bump);
        out[j + 1] = df;
    }
    out
}

/// Pathwise mark of the remaining swap cashflows at date `t` (currency).
/// Zero once every payment date has passed.
pub fn swap_value(ps: &PathSet, path: usize, t: f64, spec: &SwapSpec) -> Result<f64> {
    let t_idx = grid_index(ps, t)?;
    let strip = cashflow_strip(ps, path, t_idx, spec)?;
    if strip.is_empty() {
        return Ok(0.0);
    }
    let discounts = discount_vector(ps, path, t_idx, 0.0);
    Ok(strip.value(&discounts))
}

/// Annuity (fixed-leg PV01 in currency) at `t`: `N * sum tau_i P(t, pay_i)`.
pub fn annuity(ps: &PathSet, path: usize, t: f64, spec: &SwapSpec) -> Result<f64> {
    let t_idx = grid_index(ps, t)?;
    let discounts = discount_vector(ps, path, t_idx, 0.0);
    let t_now = ps.dates()[t_idx];
    let mut a = 0.0;
    for w in spec.fixed_dates.windows(2) {
        if w[1] > t_now + DATE_TOL {
            a += (w[1] - w[0]) * discounts[grid_index(ps, w[1])?];
        }
    }
    Ok(spec.notional * a)
}

/// Forward par rate of the remaining swap at `t` from the pathwise curve.
pub fn swap_rate(ps: &PathSet, path: usize, t: f64, spec: &SwapSpec) -> Result<f64> {
    let ann = annuity(ps, path, t, spec)?;
    if ann.abs() < 1e-300 {
        return Err(EngineError::invalid(
            "swap has no remaining fixed periods; par rate undefined",
        ));
    }
    // Float-leg PV recovered from a zero-coupon payer version of the swap.
    let mut zero_coupon = spec.clone();
    zero_coupon.fixed_rate = 0.0;
    zero_coupon.direction = SwapDirection::Payer;
    let float_pv = swap_value(ps, path, t, &zero_coupon)?;
    Ok(float_pv / ann)
}

/// Mean over paths of the value change under a +1bp parallel shift of the
/// pathwise forward curve (currency per basis point). Fixings already set are
/// not shifted; telescoping makes the shifted float projection exact.
pub fn swap_delta(ps: &PathSet, t: f64, spec: &SwapSpec) -> Result<f64> {
    let t_idx = grid_index(ps, t)?;
    let bump = 1e-4;
    let mut sum = 0.0;
    for path in 0..ps.n_paths() {
        let strip = cashflow_strip(ps, path, t_idx, spec)?;
        if strip.is_empty() {
            continue;
        }
        let base = strip.value(&discount_vector(ps, path, t_idx, 0.0));
        let shifted = strip.value(&discount_vector(ps, path, t_idx, bump));
        sum += shifted - base;
    }
    Ok(sum / ps.n_paths() as f64)
}

/// Realized PV at grid date `from_idx` of all swap cashflows paid strictly
/// after it, discounted along the path with the money-market numeraire.
pub fn realized_swap_pv(
    ps: &PathSet,
    path: usize,
    from_idx: usize,
    spec: &SwapSpec,
) -> Result<f64> {
    realized_cashflows_between(ps, path, from_idx, ps.n_dates() - 1, spec)
}

/// Realized PV at `from_idx` of swap cashflows paid in `(from_idx, to_idx]`,
/// discounted with realized numeraire ratios.
pub fn realized_cashflows_between(
    ps: &PathSet,
    path: usize,
    from_idx: usize,
    to_idx: usize,
    spec: &SwapSpec,
) -> Result<f64> {
    let t = ps.dates()[from_idx];
    let t_to = ps.dates()[to_idx];
    let sign = spec.direction.sign();
    let mut pv = 0.0;

    for w in spec.fixed_dates.windows(2) {
        let pay = w[1];
        if pay > t + DATE_TOL && pay <= t_to + DATE_TOL {
            let pay_idx = grid_index(ps, pay)?;
            let cf = -sign * spec.notional * spec.fixed_rate * (pay - w[0]);
            pv += cf * ps.realized_df(path, from_idx, pay_idx);
        }
    }
    for w in spec.float_dates.windows(2) {
        let (fix, pay) = (w[0], w[1]);
        if pay > t + DATE_TOL && pay <= t_to + DATE_TOL {
            let fix_idx = grid_index(ps, fix)?;
            let pay_idx = grid_index(ps, pay)?;
            let growth = 1.0 / ps.df_from_row(path, fix_idx, fix_idx, pay_idx);
            let cf = sign * spec.notional * (growth - 1.0);
            pv += cf * ps.realized_df(path, from_idx, pay_idx);
        }
    }
    Ok(pv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratesim::{simulate_paths, CirParams, LmmParams};
    use approx::assert_relative_eq;

    fn annual_pathset(years: usize, fwd: f64, loading: [f64; 2], n_paths: usize) -> PathSet {
        let grid: Vec<f64> = (0..=years).map(|i| i as f64).collect();
        let m = years;
        let params = LmmParams::new(
            grid.clone(),
            vec![fwd; m],
            vec![0.01; m],
            LmmParams::loadings_from_tenor_vectors(&vec![loading; m]),
            CirParams::flat(1.0, 0.0, m).unwrap(),
        )
        .unwrap();
        simulate_paths(&params, &grid, n_paths, 3).unwrap()
    }

    fn monthly_pathset(years: usize, fwd: f64, loading: [f64; 2], n_paths: usize) -> PathSet {
        let m = years * 12;
        let grid: Vec<f64> = (0..=m).map(|i| i as f64 / 12.0).collect();
        let params = LmmParams::new(
            grid.clone(),
            vec![fwd; m],
            vec![0.01; m],
            LmmParams::loadings_from_tenor_vectors(&vec![loading; m]),
            CirParams::flat(1.0, 0.7, m).unwrap(),
        )
        .unwrap();
        simulate_paths(&params, &grid, n_paths, 3).unwrap()
    }

    fn annual_swap(start: f64, end: f64, rate: f64, dir: SwapDirection) -> SwapSpec {
        SwapSpec::new(1.0, rate, dir, start, end, 1, 1).unwrap()
    }

    #[test]
    fn hand_discounted_payer_value() {
        // Flat 2% annual curve, 5y swap paying 1% fixed on notional 1:
        // value = sum_{i=1..5} 1.02^-i * (2% - 1%) = 0.0471345951.
        let ps = annual_pathset(5, 0.02, [0.0, 0.0], 1);
        let swap = annual_swap(0.0, 5.0, 0.01, SwapDirection::Payer);
        let v = swap_value(&ps, 0, 0.0, &swap).unwrap();
        let expected: f64 = (1..=5).map(|i| 0.01 / 1.02f64.powi(i)).sum();
        assert_relative_eq!(v, expected, max_relative = 1e-12);
        assert_relative_eq!(v, 0.047135, max_relative = 1e-4);
    }

    #[test]
    fn par_swap_is_worthless() {
        let ps = annual_pathset(6, 0.02, [0.0, 0.0], 1);
        let swap = annual_swap(0.0, 6.0, 0.02, SwapDirection::Payer);
        assert_relative_eq!(
            swap_value(&ps, 0, 0.0, &swap).unwrap(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn payer_receiver_antisymmetry() {
        let ps = monthly_pathset(4, 0.025, [0.2, 0.05], 16);
        let swap = SwapSpec::new(2.5, 0.021, SwapDirection::Payer, 1.0, 4.0, 1, 2).unwrap();
        for path in 0..16 {
            for t in [0.0, 0.5, 1.0, 2.0 + 1.0 / 12.0, 3.5] {
                let p = swap_value(&ps, path, t, &swap).unwrap();
                let r = swap_value(&ps, path, t, &swap.flipped()).unwrap();
                assert_relative_eq!(p + r, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn value_zero_after_end() {
        let ps = annual_pathset(5, 0.02, [0.1, 0.0], 2);
        let swap = annual_swap(0.0, 3.0, 0.02, SwapDirection::Payer);
        assert_eq!(swap_value(&ps, 0, 3.0, &swap).unwrap(), 0.0);
        assert_eq!(swap_value(&ps, 0, 4.0, &swap).unwrap(), 0.0);
    }

    #[test]
    fn off_grid_date_errors() {
        let ps = annual_pathset(5, 0.02, [0.0, 0.0], 1);
        let swap = annual_swap(0.0, 5.0, 0.02, SwapDirection::Payer);
        assert!(swap_value(&ps, 0, 0.31, &swap).is_err());
    }

    #[test]
    fn par_rate_on_flat_curve() {
        let ps = annual_pathset(8, 0.02, [0.0, 0.0], 1);
        let swap = annual_swap(0.0, 8.0, 0.05, SwapDirection::Payer);
        assert_relative_eq!(swap_rate(&ps, 0, 0.0, &swap).unwrap(), 0.02, epsilon = 1e-13);

        // Forward-starting underlying on the same flat curve.
        let fwd = annual_swap(3.0, 8.0, 0.05, SwapDirection::Receiver);
        assert_relative_eq!(swap_rate(&ps, 0, 1.0, &fwd).unwrap(), 0.02, epsilon = 1e-13);
    }

    #[test]
    fn zero_vol_freezes_swap_rate() {
        let ps = annual_pathset(10, 0.03, [0.0, 0.0], 2);
        let swap = annual_swap(5.0, 10.0, 0.03, SwapDirection::Payer);
        let r0 = swap_rate(&ps, 0, 0.0, &swap).unwrap();
        for t in 1..=5 {
            assert_relative_eq!(
                swap_rate(&ps, 1, t as f64, &swap).unwrap(),
                r0,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn value_equals_sum_of_discounted_cashflows() {
        // Additivity: strip valuation against a by-hand cashflow sum.
        let ps = monthly_pathset(3, 0.02, [0.15, 0.04], 8);
        let swap = SwapSpec::new(10.0, 0.018, SwapDirection::Payer, 1.0, 3.0, 1, 2).unwrap();
        for path in 0..8 {
            let t_idx = ps.date_index(1.0).unwrap();
            let strip = cashflow_strip(&ps, path, t_idx, &swap).unwrap();
            let discounts = discount_vector(&ps, path, t_idx, 0.0);
            let direct = swap_value(&ps, path, 1.0, &swap).unwrap();
            let mut by_hand = 0.0;
            for (i, a) in strip.date_indices.iter().zip(&strip.amounts) {
                by_hand += a * discounts[*i];
            }
            assert_relative_eq!(direct, by_hand, max_relative = 1e-12);
        }
    }

    #[test]
    fn delta_one_period_hand_check() {
        // 1y single-period swap on a flat curve: delta ~ tau * P * N * 1bp.
        let ps = annual_pathset(3, 0.02, [0.0, 0.0], 4);
        let swap = annual_swap(0.0, 1.0, 0.02, SwapDirection::Payer);
        let d = swap_delta(&ps, 0.0, &swap).unwrap();
        assert_relative_eq!(d, 1.0 / 1.02 * 1e-4, max_relative = 2e-2);
        assert!(d > 0.0);
    }

    #[test]
    fn delta_antisymmetry_and_zero_notional() {
        let ps = monthly_pathset(3, 0.025, [0.2, 0.0], 32);
        let swap = SwapSpec::new(3.0, 0.02, SwapDirection::Payer, 0.5, 2.5, 1, 2).unwrap();
        let dp = swap_delta(&ps, 0.5, &swap).unwrap();
        let dr = swap_delta(&ps, 0.5, &swap.flipped()).unwrap();
        assert_relative_eq!(dp + dr, 0.0, epsilon = 1e-15);
        assert!(dp > 0.0);

        let zero = SwapSpec::new(0.0, 0.02, SwapDirection::Payer, 0.5, 2.5, 1, 2).unwrap();
        assert_eq!(swap_delta(&ps, 0.5, &zero).unwrap(), 0.0);
    }

    #[test]
    fn put_call_parity_at_expiry() {
        // Physical payer minus receiver payoff equals the swap value, pathwise.
        let ps = monthly_pathset(4, 0.022, [0.18, 0.05], 64);
        let swap = SwapSpec::new(1.0, 0.024, SwapDirection::Payer, 2.0, 4.0, 1, 2).unwrap();
        for path in 0..64 {
            let v = swap_value(&ps, path, 2.0, &swap).unwrap();
            let payer = v.max(0.0);
            let receiver = (-v).max(0.0);
            assert_eq!(payer - receiver, v);
        }
    }

    #[test]
    fn realized_pv_matches_mark_in_zero_vol() {
        // With no diffusion the realized discounted cashflows equal the mark.
        let ps = annual_pathset(6, 0.02, [0.0, 0.0], 1);
        let swap = annual_swap(2.0, 6.0, 0.015, SwapDirection::Payer);
        let t_idx = ps.date_index(2.0).unwrap();
        let realized = realized_swap_pv(&ps, 0, t_idx, &swap).unwrap();
        let mark = swap_value(&ps, 0, 2.0, &swap).unwrap();
        assert_relative_eq!(realized, mark, max_relative = 1e-12);
    }

    #[test]
    fn realized_pv_unbiased_for_mark() {
        // E[realized PV / B] should match E[mark / B] across paths.
        let ps = monthly_pathset(5, 0.0246, [0.18, 0.06], 4096);
        let swap = SwapSpec::new(1.0, 0.0246, SwapDirection::Payer, 2.0, 5.0, 1, 2).unwrap();
        let t_idx = ps.date_index(2.0).unwrap();
        let n = ps.n_paths();
        let mut diff_sum = 0.0;
        let mut diff_sq = 0.0;
        for p in 0..n {
            let realized = realized_swap_pv(&ps, p, t_idx, &swap).unwrap();
            let mark = swap_value(&ps, p, 2.0, &swap).unwrap();
            let d = (realized - mark) / ps.numeraire(p, t_idx);
            diff_sum += d;
            diff_sq += d * d;
        }
        let mean = diff_sum / n as f64;
        let se = ((diff_sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(
            mean.abs() <= 3.0 * se,
            "realized vs mark bias {mean} exceeds 3 se ({se})"
        );
    }

    #[test]
    fn expiry_must_match_swap_start() {
        let swap = annual_swap(2.0, 6.0, 0.02, SwapDirection::Payer);
        assert!(SwaptionSpec::new(2.0, swap.clone(), Settlement::Physical).is_ok());
        assert!(SwaptionSpec::new(1.0, swap, Settlement::Cash).is_err());
    }
}
