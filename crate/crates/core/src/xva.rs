//! Valuation-adjustment terms as instances of one generic integral,
//!
//! ```text
//! XVA(alpha, beta, gamma, delta) = - INT_t^T alpha(u) exp(-INT_t^u beta(s) ds) E_t[gamma(u)^delta] du
//! ```
//!
//! discretised with the trapezoid rule on the simulation grid. Each named
//! adjustment picks a deterministic spread `alpha`, the shared
//! credit-adjusted discount spread `beta = r + lambda_C + lambda_B`, a
//! simulated quantity `gamma`, and an exponent `delta` (positive part or
//! identity):
//!
//! | term      | alpha                   | gamma | delta |
//! |-----------|-------------------------|-------|-------|
//! | CVA       | (1 - R_C) lambda_C      | V     | (.)+  |
//! | FVA       | s_F                     | V     | id    |
//! | COLVA_X   | s_X                     | X     | id    |
//! | COLVA_IC  | r_IC                    | I_C   | id    |
//! | KVA       | gamma_K - r_B phi       | K     | id    |
//! | MVA       | s_F - s_IB              | I_B   | id    |
//!
//! The returned value is the contribution to the economic value
//! `V_hat = V + U`, so costs come out negative. Spreads are deterministic
//! term structures; all stochasticity enters through the expectation profile.

use crate::error::{EngineError, Result};

/// Piecewise-flat deterministic term structure. `values[i]` applies on
/// `[breaks[i], breaks[i+1])`; the first value extends left, the last right.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFlat {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseFlat {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.is_empty() || breaks.len() != values.len() {
            return Err(EngineError::LengthMismatch {
                what: "piecewise-flat breaks/values",
                expected: breaks.len().max(1),
                got: values.len(),
            });
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EngineError::NonMonotonicGrid);
        }
        if values.iter().chain(breaks.iter()).any(|v| !v.is_finite()) {
            return Err(EngineError::invalid("piecewise-flat entries must be finite"));
        }
        Ok(PiecewiseFlat { breaks, values })
    }

    pub fn flat(value: f64) -> Self {
        PiecewiseFlat {
            breaks: vec![0.0],
            values: vec![value],
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match self.breaks.iter().rposition(|b| *b <= t) {
            Some(i) => self.values[i],
            None => self.values[0],
        }
    }

    /// Exact integral over `[a, b]` (`a <= b`).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        debug_assert!(a <= b);
        let mut total = 0.0;
        let mut lo = a;
        while lo < b {
            let i = match self.breaks.iter().rposition(|brk| *brk <= lo) {
                Some(i) => i,
                None => {
                    // Left of the first break: flat extension up to it.
                    let hi = self.breaks[0].min(b);
                    total += self.values[0] * (hi - lo);
                    lo = hi;
                    continue;
                }
            };
            let hi = if i + 1 < self.breaks.len() {
                self.breaks[i + 1].min(b)
            } else {
                b
            };
            total += self.values[i] * (hi - lo);
            lo = hi;
        }
        total
    }
}

/// Credit, funding, collateral and capital parameters.
///
/// The funding spread is pinned to `s_F = (1 - R_B) lambda_B` at
/// construction, and the issuer bond yield is `r_B = r + s_F`.
#[derive(Debug, Clone)]
pub struct CreditFundingParams {
    pub lambda_b: f64,
    pub lambda_c: f64,
    pub r_b_recovery: f64,
    pub r_c_recovery: f64,
    pub s_f: f64,
    pub s_x: f64,
    pub r_ic: f64,
    pub s_ib: f64,
    pub gamma_k: f64,
    pub phi: f64,
    /// Deterministic short-rate level used for discount spreads and the
    /// issuer bond yield.
    pub r: f64,
}

impl CreditFundingParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda_b: f64,
        lambda_c: f64,
        r_b_recovery: f64,
        r_c_recovery: f64,
        s_x: f64,
        r_ic: f64,
        s_ib: f64,
        gamma_k: f64,
        phi: f64,
        r: f64,
    ) -> Result<Self> {
        if lambda_b < 0.0 || lambda_c < 0.0 {
            return Err(EngineError::invalid("hazard rates must be >= 0"));
        }
        for (name, rec) in [("R_B", r_b_recovery), ("R_C", r_c_recovery)] {
            if !(0.0..=1.0).contains(&rec) {
                return Err(EngineError::invalid(format!(
                    "recovery {name} must lie in [0, 1], got {rec}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&phi) {
            return Err(EngineError::invalid(format!(
                "phi must lie in [0, 1], got {phi}"
            )));
        }
        for (name, v) in [
            ("s_X", s_x),
            ("r_IC", r_ic),
            ("s_IB", s_ib),
            ("gamma_K", gamma_k),
            ("r", r),
        ] {
            if !v.is_finite() {
                return Err(EngineError::invalid(format!("{name} must be finite")));
            }
        }
        let s_f = (1.0 - r_b_recovery) * lambda_b;
        Ok(CreditFundingParams {
            lambda_b,
            lambda_c,
            r_b_recovery,
            r_c_recovery,
            s_f,
            s_x,
            r_ic,
            s_ib,
            gamma_k,
            phi,
            r,
        })
    }

    /// As [`CreditFundingParams::new`], but with an explicitly supplied
    /// funding spread that must agree with `(1 - R_B) lambda_B`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_explicit_funding_spread(
        lambda_b: f64,
        lambda_c: f64,
        r_b_recovery: f64,
        r_c_recovery: f64,
        s_f: f64,
        s_x: f64,
        r_ic: f64,
        s_ib: f64,
        gamma_k: f64,
        phi: f64,
        r: f64,
    ) -> Result<Self> {
        let implied = (1.0 - r_b_recovery) * lambda_b;
        if (s_f - implied).abs() > 1e-12 {
            return Err(EngineError::invalid(format!(
                "s_F = {s_f} is inconsistent with (1 - R_B) * lambda_B = {implied}"
            )));
        }
        Self::new(
            lambda_b, lambda_c, r_b_recovery, r_c_recovery, s_x, r_ic, s_ib, gamma_k, phi, r,
        )
    }

    /// Issuer bond yield `r_B = r + s_F`.
    pub fn r_b(&self) -> f64 {
        self.r + self.s_f
    }

    /// Shared discount spread `r + lambda_C + lambda_B`.
    pub fn beta(&self) -> PiecewiseFlat {
        PiecewiseFlat::flat(self.r + self.lambda_c + self.lambda_b)
    }
}

/// Which simulated quantity a term integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GammaId {
    /// Risk-free netting-set value `V`.
    Value,
    /// Collateral balance `X`.
    Collateral,
    /// Initial margin received `I_C` (zero against a CCP).
    ImReceived,
    /// Capital requirement `K`.
    Capital,
    /// Initial margin posted `I_B`.
    ImPosted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exponent {
    PositivePart,
    Identity,
}

impl Exponent {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Exponent::PositivePart => x.max(0.0),
            Exponent::Identity => x,
        }
    }
}

/// Which rate offsets the capital cost in the KVA spread. The two
/// conventions differ by the funding spread on the capital fraction phi.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KvaRateConvention {
    /// `alpha = gamma_K - r_B phi`.
    #[default]
    IssuerBond,
    /// `alpha = gamma_K - r phi`.
    RiskFree,
}

/// One valuation-adjustment term: a named (alpha, beta, gamma, delta) row.
#[derive(Debug, Clone)]
pub struct XvaTermSpec {
    pub name: String,
    pub alpha: PiecewiseFlat,
    pub beta: PiecewiseFlat,
    pub gamma: GammaId,
    pub exponent: Exponent,
}

impl XvaTermSpec {
    pub fn cva(p: &CreditFundingParams) -> Self {
        XvaTermSpec {
            name: "CVA".into(),
            alpha: PiecewiseFlat::flat((1.0 - p.r_c_recovery) * p.lambda_c),
            beta: p.beta(),
            gamma: GammaId::Value,
            exponent: Exponent::PositivePart,
        }
    }

    pub fn fva(p: &CreditFundingParams) -> Self {
        XvaTermSpec {
            name: "FVA".into(),
            alpha: PiecewiseFlat::flat(p.s_f),
            beta: p.beta(),
            gamma: GammaId::Value,
            exponent: Exponent::Identity,
        }
    }

    pub fn colva_x(p: &CreditFundingParams) -> Self {
        XvaTermSpec {
            name: "COLVA_X".into(),
            alpha: PiecewiseFlat::flat(p.s_x),
            beta: p.beta(),
            gamma: GammaId::Collateral,
            exponent: Exponent::Identity,
        }
    }

    pub fn colva_ic(p: &CreditFundingParams) -> Self {
        XvaTermSpec {
            name: "COLVA_IC".into(),
            alpha: PiecewiseFlat::flat(p.r_ic),
            beta: p.beta(),
            gamma: GammaId::ImReceived,
            exponent: Exponent::Identity,
        }
    }

    pub fn kva(p: &CreditFundingParams, convention: KvaRateConvention) -> Self {
        let offset = match convention {
            KvaRateConvention::IssuerBond => p.r_b(),
            KvaRateConvention::RiskFree => p.r,
        };
        XvaTermSpec {
            name: "KVA".into(),
            alpha: PiecewiseFlat::flat(p.gamma_k - offset * p.phi),
            beta: p.beta(),
            gamma: GammaId::Capital,
            exponent: Exponent::Identity,
        }
    }

    pub fn mva(p: &CreditFundingParams) -> Self {
        XvaTermSpec {
            name: "MVA".into(),
            alpha: PiecewiseFlat::flat(p.s_f - p.s_ib),
            beta: p.beta(),
            gamma: GammaId::ImPosted,
            exponent: Exponent::Identity,
        }
    }

    /// A custom term; all four components must be supplied.
    pub fn custom(
        name: impl Into<String>,
        alpha: PiecewiseFlat,
        beta: PiecewiseFlat,
        gamma: GammaId,
        exponent: Exponent,
    ) -> Self {
        XvaTermSpec {
            name: name.into(),
            alpha,
            beta,
            gamma,
            exponent,
        }
    }
}

/// Where an expected-exposure profile came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    PathwiseAverage,
    RegressionAtDate,
}

/// Expected values `E_t[gamma(t_i)^delta]` on the integration grid.
#[derive(Debug, Clone)]
pub struct ExposureProfile {
    pub dates: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl ExposureProfile {
    pub fn new(dates: Vec<f64>, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if dates.is_empty() {
            return Err(EngineError::invalid("exposure profile must not be empty"));
        }
        if dates.len() != values.len() {
            return Err(EngineError::LengthMismatch {
                what: "exposure profile dates/values",
                expected: dates.len(),
                got: values.len(),
            });
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EngineError::NonMonotonicGrid);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EngineError::invalid("exposure profile must be finite"));
        }
        Ok(ExposureProfile {
            dates,
            values,
            provenance,
        })
    }
}

/// Close-out value on counterparty default:
/// `g_C = R_C (V - X)^+ + (V - X)^- + X`.
pub fn closeout_g_c(v: f64, x: f64, r_c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r_c) {
        return Err(EngineError::invalid(format!(
            "R_C must lie in [0, 1], got {r_c}"
        )));
    }
    let e = v - x;
    Ok(r_c * e.max(0.0) + e.min(0.0) + x)
}

/// Close-out value on issuer default:
/// `g_B = (V - X)^+ + R_B (V - X)^- + X`.
pub fn closeout_g_b(v: f64, x: f64, r_b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r_b) {
        return Err(EngineError::invalid(format!(
            "R_B must lie in [0, 1], got {r_b}"
        )));
    }
    let e = v - x;
    Ok(e.max(0.0) + r_b * e.min(0.0) + x)
}

/// Trapezoid value of one term over a profile:
///
/// `-(1/2) sum_i [ alpha(t_{i-1}) D(t_{i-1}) E_{i-1} + alpha(t_i) D(t_i) E_i ] dt_i`
///
/// with `D(t) = exp(-INT_{t_0}^{t} beta)`. Negative for costs.
pub fn xva_term_integral(term: &XvaTermSpec, profile: &ExposureProfile) -> Result<f64> {
    let weights = term_weights(term, &profile.dates)?;
    Ok(weights
        .iter()
        .zip(&profile.values)
        .map(|(w, e)| w * e)
        .sum())
}

/// Trapezoid weights of a single term on a grid: the integral is
/// `sum_i w_i E[gamma(t_i)^delta]`.
pub fn term_weights(term: &XvaTermSpec, dates: &[f64]) -> Result<Vec<f64>> {
    if dates.is_empty() {
        return Err(EngineError::invalid("weight grid must not be empty"));
    }
    if dates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EngineError::NonMonotonicGrid);
    }
    let t0 = dates[0];
    let n = dates.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let dt = dates[i] - dates[i - 1];
        for (j, half) in [(i - 1, dt), (i, dt)] {
            let d = (-term.beta.integral(t0, dates[j])).exp();
            w[j] += -0.5 * term.alpha.value_at(dates[j]) * d * half;
        }
    }
    Ok(w)
}

/// Weight matrix `w[j][i]` for a family of terms on a shared grid, so that
/// `U = sum_j sum_i w[j][i] E[gamma_j(t_i)^delta_j]`.
pub fn build_weights(terms: &[XvaTermSpec], dates: &[f64]) -> Result<Vec<Vec<f64>>> {
    terms.iter().map(|t| term_weights(t, dates)).collect()
}

/// Total adjustment: the sum of the term contributions.
pub fn aggregate_u(term_values: &[f64]) -> f64 {
    term_values.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn params() -> CreditFundingParams {
        CreditFundingParams::new(0.012, 0.03, 0.4, 0.4, 0.001, 0.002, 0.0005, 0.1, 0.25, 0.0246)
            .unwrap()
    }

    #[test]
    fn closeout_hand_values() {
        assert_relative_eq!(closeout_g_c(10.0, 4.0, 0.4).unwrap(), 6.4);
        assert_relative_eq!(closeout_g_b(-10.0, -4.0, 0.4).unwrap(), -6.4);
    }

    #[test]
    fn closeout_degenerate_cases() {
        for (v, x) in [(5.0, 2.0), (-3.0, 1.0), (0.0, 0.0), (7.0, 7.0)] {
            assert_relative_eq!(closeout_g_c(v, x, 1.0).unwrap(), v, epsilon = 1e-15);
            assert_relative_eq!(closeout_g_b(v, x, 1.0).unwrap(), v, epsilon = 1e-15);
        }
        assert_relative_eq!(closeout_g_c(5.0, 5.0, 0.3).unwrap(), 5.0);
        assert_relative_eq!(closeout_g_b(5.0, 5.0, 0.3).unwrap(), 5.0);
        assert!(closeout_g_c(1.0, 0.0, 1.2).is_err());
        assert!(closeout_g_b(1.0, 0.0, -0.1).is_err());
    }

    #[test]
    fn piecewise_flat_value_and_integral() {
        let f = PiecewiseFlat::new(vec![0.0, 1.0, 3.0], vec![2.0, 4.0, 1.0]).unwrap();
        assert_eq!(f.value_at(0.5), 2.0);
        assert_eq!(f.value_at(1.0), 4.0);
        assert_eq!(f.value_at(10.0), 1.0);
        assert_relative_eq!(f.integral(0.0, 4.0), 2.0 + 2.0 * 4.0 + 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.integral(0.5, 1.5), 0.5 * 2.0 + 0.5 * 4.0, epsilon = 1e-14);
        assert_eq!(PiecewiseFlat::flat(3.0).integral(2.0, 5.0), 9.0);
    }

    #[test]
    fn zero_alpha_gives_zero() {
        let term = XvaTermSpec::custom(
            "zero",
            PiecewiseFlat::flat(0.0),
            PiecewiseFlat::flat(0.3),
            GammaId::Value,
            Exponent::Identity,
        );
        let dates: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let values = vec![123.0; dates.len()];
        let profile = ExposureProfile::new(dates, values, Provenance::PathwiseAverage).unwrap();
        assert_eq!(xva_term_integral(&term, &profile).unwrap(), 0.0);
    }

    #[test]
    fn constant_exposure_exact_quadrature() {
        // alpha = 1, beta = 0, E = c on [0, T]: the trapezoid rule is exact
        // for constants, giving -c T.
        let term = XvaTermSpec::custom(
            "unit",
            PiecewiseFlat::flat(1.0),
            PiecewiseFlat::flat(0.0),
            GammaId::Value,
            Exponent::Identity,
        );
        let dates: Vec<f64> = (0..=7).map(|i| i as f64).collect();
        let profile =
            ExposureProfile::new(dates, vec![3.0; 8], Provenance::PathwiseAverage).unwrap();
        assert_relative_eq!(
            xva_term_integral(&term, &profile).unwrap(),
            -21.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn constant_exposure_closed_form_monthly() {
        // Constant alpha, beta and exposure: closed form -c a (1 - e^{-bT}) / b.
        // Monthly trapezoid over 5y must agree to 0.01% relative.
        let (a, b, c, years) = (0.018, 0.0666, 2.5, 5.0);
        let term = XvaTermSpec::custom(
            "cf",
            PiecewiseFlat::flat(a),
            PiecewiseFlat::flat(b),
            GammaId::Value,
            Exponent::Identity,
        );
        let n = (years * 12.0) as usize;
        let dates: Vec<f64> = (0..=n).map(|i| i as f64 / 12.0).collect();
        let profile =
            ExposureProfile::new(dates, vec![c; n + 1], Provenance::PathwiseAverage).unwrap();
        let got = xva_term_integral(&term, &profile).unwrap();
        let exact = -c * a * (1.0 - (-b * years).exp()) / b;
        assert_relative_eq!(got, exact, max_relative = 1e-4);
    }

    #[test]
    fn quadrature_error_shrinks_fourfold_on_halving() {
        let (a, b, c, years): (f64, f64, f64, f64) = (1.0, 0.5, 1.0, 5.0);
        let exact = -c * a * (1.0 - (-b * years).exp()) / b;
        let run = |steps_per_year: usize| {
            let term = XvaTermSpec::custom(
                "cf",
                PiecewiseFlat::flat(a),
                PiecewiseFlat::flat(b),
                GammaId::Value,
                Exponent::Identity,
            );
            let n = (years * steps_per_year as f64) as usize;
            let dates: Vec<f64> = (0..=n).map(|i| i as f64 / steps_per_year as f64).collect();
            let profile =
                ExposureProfile::new(dates, vec![c; n + 1], Provenance::PathwiseAverage).unwrap();
            (xva_term_integral(&term, &profile).unwrap() - exact).abs()
        };
        let ratio = run(12) / run(24);
        assert!(
            (3.5..=4.5).contains(&ratio),
            "halving the step gave error ratio {ratio}"
        );
    }

    #[test]
    fn weights_two_dates() {
        let term = XvaTermSpec::custom(
            "unit",
            PiecewiseFlat::flat(1.0),
            PiecewiseFlat::flat(0.0),
            GammaId::Value,
            Exponent::Identity,
        );
        let w = term_weights(&term, &[0.0, 0.25]).unwrap();
        assert_relative_eq!(w[0], -0.125, epsilon = 1e-15);
        assert_relative_eq!(w[1], -0.125, epsilon = 1e-15);
    }

    #[test]
    fn weights_reproduce_integral_on_random_profile() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let p = params();
        let terms = vec![
            XvaTermSpec::cva(&p),
            XvaTermSpec::fva(&p),
            XvaTermSpec::kva(&p, KvaRateConvention::IssuerBond),
        ];
        let dates: Vec<f64> = (0..=60).map(|i| 5.0 + i as f64 / 12.0).collect();
        let weights = build_weights(&terms, &dates).unwrap();
        for (term, w) in terms.iter().zip(&weights) {
            let values: Vec<f64> = (0..dates.len())
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect();
            let profile =
                ExposureProfile::new(dates.clone(), values.clone(), Provenance::RegressionAtDate)
                    .unwrap();
            let direct = xva_term_integral(term, &profile).unwrap();
            let via_weights: f64 = w.iter().zip(&values).map(|(wi, e)| wi * e).sum();
            assert_relative_eq!(direct, via_weights, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn weights_constant_profile_reproduces_total_time() {
        let term = XvaTermSpec::custom(
            "unit",
            PiecewiseFlat::flat(1.0),
            PiecewiseFlat::flat(0.0),
            GammaId::Value,
            Exponent::Identity,
        );
        let dates: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let w = term_weights(&term, &dates).unwrap();
        let c = 2.0;
        let total: f64 = w.iter().map(|wi| wi * c).sum();
        assert_relative_eq!(total, -c * 10.0, epsilon = 1e-12);
    }

    #[test]
    fn costs_are_negative_and_linear() {
        let p = params();
        let term = XvaTermSpec::cva(&p);
        let dates: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let values: Vec<f64> = (0..dates.len()).map(|_| rng.gen_range(0.0..3.0)).collect();
        let profile =
            ExposureProfile::new(dates.clone(), values.clone(), Provenance::PathwiseAverage)
                .unwrap();
        let v1 = xva_term_integral(&term, &profile).unwrap();
        assert!(v1 <= 0.0);

        // Linearity in the profile.
        let scaled: Vec<f64> = values.iter().map(|v| 2.5 * v).collect();
        let profile2 = ExposureProfile::new(dates, scaled, Provenance::PathwiseAverage).unwrap();
        let v2 = xva_term_integral(&term, &profile2).unwrap();
        assert_relative_eq!(v2, 2.5 * v1, max_relative = 1e-13);
    }

    #[test]
    fn named_terms_match_their_rows() {
        let p = params();
        let cva = XvaTermSpec::cva(&p);
        assert_eq!(cva.name, "CVA");
        assert_eq!(cva.gamma, GammaId::Value);
        assert_eq!(cva.exponent, Exponent::PositivePart);
        assert_relative_eq!(cva.alpha.value_at(1.0), (1.0 - 0.4) * 0.03);

        let fva = XvaTermSpec::fva(&p);
        assert_eq!(fva.gamma, GammaId::Value);
        assert_eq!(fva.exponent, Exponent::Identity);
        assert_relative_eq!(fva.alpha.value_at(0.0), (1.0 - 0.4) * 0.012);

        let colva_x = XvaTermSpec::colva_x(&p);
        assert_eq!(colva_x.gamma, GammaId::Collateral);
        assert_relative_eq!(colva_x.alpha.value_at(0.0), 0.001);

        let colva_ic = XvaTermSpec::colva_ic(&p);
        assert_eq!(colva_ic.gamma, GammaId::ImReceived);
        assert_relative_eq!(colva_ic.alpha.value_at(0.0), 0.002);

        let kva = XvaTermSpec::kva(&p, KvaRateConvention::IssuerBond);
        assert_eq!(kva.gamma, GammaId::Capital);
        assert_relative_eq!(kva.alpha.value_at(0.0), 0.1 - p.r_b() * 0.25);
        let kva_rf = XvaTermSpec::kva(&p, KvaRateConvention::RiskFree);
        assert_relative_eq!(kva_rf.alpha.value_at(0.0), 0.1 - 0.0246 * 0.25);

        let mva = XvaTermSpec::mva(&p);
        assert_eq!(mva.gamma, GammaId::ImPosted);
        assert_relative_eq!(mva.alpha.value_at(0.0), p.s_f - 0.0005);

        // All rows share the same discount spread.
        for t in [&cva, &fva, &colva_x, &colva_ic, &kva, &mva] {
            assert_relative_eq!(t.beta.value_at(2.0), 0.0246 + 0.03 + 0.012);
        }
    }

    #[test]
    fn aggregate_is_additive_and_degenerate_params_kill_terms() {
        assert_eq!(aggregate_u(&[]), 0.0);
        assert_relative_eq!(aggregate_u(&[-1.0, -2.0, -3.0]), -6.0);

        // lambda_C = 0 kills CVA, lambda_B = 0 kills FVA and MVA (with
        // s_IB = 0), s_X = r_IC = 0 kill the collateral terms, and
        // gamma_K = r phi kills KVA.
        let r = 0.02;
        let phi = 0.5;
        let p = CreditFundingParams::new(0.0, 0.0, 0.4, 0.4, 0.0, 0.0, 0.0, r * phi, phi, r)
            .unwrap();
        let dates: Vec<f64> = (0..=12).map(|i| i as f64 / 4.0).collect();
        let profile =
            ExposureProfile::new(dates, vec![1.7; 13], Provenance::PathwiseAverage).unwrap();
        for term in [
            XvaTermSpec::cva(&p),
            XvaTermSpec::fva(&p),
            XvaTermSpec::colva_x(&p),
            XvaTermSpec::colva_ic(&p),
            XvaTermSpec::kva(&p, KvaRateConvention::RiskFree),
            XvaTermSpec::mva(&p),
        ] {
            assert_eq!(
                xva_term_integral(&term, &profile).unwrap(),
                0.0,
                "term {} should vanish",
                term.name
            );
        }
    }

    #[test]
    fn funding_spread_consistency_enforced() {
        let ok = CreditFundingParams::with_explicit_funding_spread(
            0.012, 0.03, 0.4, 0.4, 0.0072, 0.0, 0.0, 0.0, 0.1, 0.0, 0.02,
        );
        assert!(ok.is_ok());
        let bad = CreditFundingParams::with_explicit_funding_spread(
            0.012, 0.03, 0.4, 0.4, 0.009, 0.0, 0.0, 0.0, 0.1, 0.0, 0.02,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn rejects_invalid_profiles() {
        assert!(ExposureProfile::new(vec![], vec![], Provenance::PathwiseAverage).is_err());
        assert!(
            ExposureProfile::new(vec![0.0, 1.0], vec![1.0], Provenance::PathwiseAverage).is_err()
        );
        assert!(ExposureProfile::new(
            vec![0.0, 1.0, 0.5],
            vec![1.0; 3],
            Provenance::PathwiseAverage
        )
        .is_err());
        assert!(ExposureProfile::new(
            vec![0.0, 1.0],
            vec![1.0, f64::NAN],
            Provenance::PathwiseAverage
        )
        .is_err());
    }
}
