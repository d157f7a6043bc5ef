//! Shifted two-factor LIBOR market model with a common flat CIR stochastic
//! volatility, simulated under the spot-LIBOR measure.
//!
//! Forward dynamics for the simple forward `L_n` accruing on `[T_n, T_{n+1}]`:
//!
//! ```text
//! dL_n(t) = (L_n + s_n) sqrt(x(t)) lambda_n(t) . ( mu_n(t) dt + dW(t) )
//! mu_n(t) = sqrt(x(t)) * sum_{j=beta(t)..n} tau_j (L_j + s_j) lambda_j / (1 + tau_j L_j)
//! ```
//!
//! where `beta(t)` is the index of the first forward still accruing at `t`.
//! This is the standard no-arbitrage drift under the measure induced by the
//! discretely rolled money-market account
//! `B(T_{k+1}) = B(T_k)(1 + tau_k L_k(T_k))`, which is also the numeraire
//! stored per path. The common variance factor follows
//!
//! ```text
//! dx(t) = theta (1 - x(t)) dt + eta(t) sqrt(x(t)) dZ(t),   x(0) = 1,  dZ.dW = 0
//! ```
//!
//! discretised by full-truncation Euler so the stored variance is never
//! negative. Forwards are stepped with a log-Euler scheme on the shifted rate
//! plus a predictor-corrector drift average, which keeps the discretisation
//! bias well under the Monte Carlo noise at monthly steps.
//!
//! Paths are generated from per-path ChaCha12 substreams (`set_stream(path)`),
//! so path `i` is identical regardless of the total path count or of how the
//! work is split across threads. Draw order within a step is fixed: the two
//! driver normals for `W`, then one for `Z`.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{EngineError, Result};

/// Tolerance used when matching floating-point dates to grid points.
pub const DATE_TOL: f64 = 1e-9;

/// CIR variance parameters. The initial level is pinned at 1 so the variance
/// factor is a pure multiplier on the loadings.
#[derive(Debug, Clone)]
pub struct CirParams {
    /// Mean-reversion speed theta (1/year), toward the level 1.
    pub theta: f64,
    /// Vol-of-vol eta(t) per simulation step (1/sqrt(year)).
    pub eta: Vec<f64>,
    /// Initial variance level; fixed at 1.
    pub x0: f64,
}

impl CirParams {
    pub fn new(theta: f64, eta: Vec<f64>) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(EngineError::invalid(format!(
                "cir theta must be > 0, got {theta}"
            )));
        }
        if eta.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(EngineError::invalid("cir eta must be finite and >= 0"));
        }
        Ok(CirParams {
            theta,
            eta,
            x0: 1.0,
        })
    }

    /// Constant vol-of-vol across all `n_steps` simulation steps.
    pub fn flat(theta: f64, eta: f64, n_steps: usize) -> Result<Self> {
        Self::new(theta, vec![eta; n_steps])
    }
}

/// Model parameters for the shifted two-factor LMM.
///
/// `tenor_grid` holds the accrual boundary dates `T_0 = 0 < T_1 < ... < T_M`;
/// forward `n` accrues on `[T_n, T_{n+1}]`. Loadings are supplied directly as
/// two-vectors, one per live forward per time step: `vol_loadings[k][j]` is
/// the loading of forward `k + 1 + j` during the step `[T_k, T_{k+1}]` (the
/// forward fixing at `T_k` no longer diffuses during that step).
#[derive(Debug, Clone)]
pub struct LmmParams {
    pub tenor_grid: Vec<f64>,
    pub initial_forwards: Vec<f64>,
    pub shifts: Vec<f64>,
    pub vol_loadings: Vec<Vec<[f64; 2]>>,
    pub cir: CirParams,
    /// Discount factors to each tenor date, derived from the initial forwards.
    pub initial_discounts: Vec<f64>,
}

impl LmmParams {
    pub fn new(
        tenor_grid: Vec<f64>,
        initial_forwards: Vec<f64>,
        shifts: Vec<f64>,
        vol_loadings: Vec<Vec<[f64; 2]>>,
        cir: CirParams,
    ) -> Result<Self> {
        if tenor_grid.len() < 2 {
            return Err(EngineError::invalid("tenor grid needs at least two dates"));
        }
        if (tenor_grid[0]).abs() > DATE_TOL {
            return Err(EngineError::invalid("tenor grid must start at 0"));
        }
        if tenor_grid.windows(2).any(|w| w[1] - w[0] <= DATE_TOL) {
            return Err(EngineError::NonMonotonicGrid);
        }
        let m = tenor_grid.len() - 1;
        if initial_forwards.len() != m {
            return Err(EngineError::LengthMismatch {
                what: "initial_forwards",
                expected: m,
                got: initial_forwards.len(),
            });
        }
        if shifts.len() != m {
            return Err(EngineError::LengthMismatch {
                what: "shifts",
                expected: m,
                got: shifts.len(),
            });
        }
        if shifts.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(EngineError::invalid("shifts must be finite and >= 0"));
        }
        for (n, (f, s)) in initial_forwards.iter().zip(&shifts).enumerate() {
            if !f.is_finite() || f + s <= 0.0 {
                return Err(EngineError::invalid(format!(
                    "initial forward {n} must satisfy L + s > 0 (L={f}, s={s})"
                )));
            }
        }
        if vol_loadings.len() != m {
            return Err(EngineError::LengthMismatch {
                what: "vol_loadings time buckets",
                expected: m,
                got: vol_loadings.len(),
            });
        }
        for (k, bucket) in vol_loadings.iter().enumerate() {
            let live = m - k - 1;
            if bucket.len() != live {
                return Err(EngineError::LengthMismatch {
                    what: "vol_loadings per bucket",
                    expected: live,
                    got: bucket.len(),
                });
            }
            if bucket
                .iter()
                .any(|l| !l[0].is_finite() || !l[1].is_finite())
            {
                return Err(EngineError::invalid("vol loadings must be finite"));
            }
        }
        if cir.eta.len() != m {
            return Err(EngineError::LengthMismatch {
                what: "cir eta buckets",
                expected: m,
                got: cir.eta.len(),
            });
        }

        let mut initial_discounts = Vec::with_capacity(m + 1);
        initial_discounts.push(1.0);
        for n in 0..m {
            let tau = tenor_grid[n + 1] - tenor_grid[n];
            let prev = initial_discounts[n];
            initial_discounts.push(prev / (1.0 + tau * initial_forwards[n]));
        }

        Ok(LmmParams {
            tenor_grid,
            initial_forwards,
            shifts,
            vol_loadings,
            cir,
            initial_discounts,
        })
    }

    /// Build time-constant loadings from one two-vector per tenor.
    pub fn loadings_from_tenor_vectors(per_tenor: &[[f64; 2]]) -> Vec<Vec<[f64; 2]>> {
        let m = per_tenor.len();
        (0..m)
            .map(|k| per_tenor[k + 1..].to_vec())
            .collect()
    }

    pub fn n_forwards(&self) -> usize {
        self.tenor_grid.len() - 1
    }
}

/// One full-truncation Euler step of the CIR variance.
///
/// `x' = max(x + theta (1 - x) dt + eta sqrt(x) sqrt(dt) z, 0)`.
pub fn evolve_cir(x: f64, theta: f64, eta_bucket: f64, dt: f64, z: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(EngineError::invalid(format!("dt must be > 0, got {dt}")));
    }
    if !(x >= 0.0) {
        return Err(EngineError::invalid(format!(
            "cir state must be >= 0, got {x}"
        )));
    }
    let next = x + theta * (1.0 - x) * dt + eta_bucket * x.sqrt() * dt.sqrt() * z;
    Ok(next.max(0.0))
}

/// Immutable Monte Carlo state: simulated forward curves, the common variance
/// factor and the rolled money-market numeraire, per path per grid date.
///
/// Storage is triangular: at date index `k` only forwards with tenor index
/// `>= k` are kept (earlier forwards are dead; the forward fixing at `T_k` is
/// stored at date `k` with its reset value so later fixings can be read back).
#[derive(Debug)]
pub struct PathSet {
    n_paths: usize,
    dates: Vec<f64>,
    accruals: Vec<f64>,
    forwards: Vec<f64>,
    variance: Vec<f64>,
    numeraire: Vec<f64>,
    row_offsets: Vec<usize>,
    path_stride: usize,
    seed: u64,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn dates(&self) -> &[f64] {
        &self.dates
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    /// Number of simulated forwards (= number of accrual periods).
    pub fn n_tenors(&self) -> usize {
        self.accruals.len()
    }

    pub fn accruals(&self) -> &[f64] {
        &self.accruals
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Grid index of a date, within [`DATE_TOL`].
    pub fn date_index(&self, t: f64) -> Result<usize> {
        // The grids in play are short; a linear scan keeps the tolerance rule obvious.
        self.dates
            .iter()
            .position(|d| (d - t).abs() <= DATE_TOL)
            .ok_or(EngineError::DateOffGrid(t))
    }

    /// Forward `tenor` as observed at grid date `date`. Requires `tenor >= date`.
    pub fn forward(&self, path: usize, date: usize, tenor: usize) -> f64 {
        debug_assert!(tenor >= date, "forward {tenor} is dead at date {date}");
        self.forwards[path * self.path_stride + self.row_offsets[date] + (tenor - date)]
    }

    fn forward_row(&self, path: usize, date: usize) -> &[f64] {
        let start = path * self.path_stride + self.row_offsets[date];
        &self.forwards[start..start + (self.n_tenors() - date)]
    }

    /// Curve snapshot at `(path, date)`: the forwards for tenor indices
    /// `date..n_tenors`, i.e. everything needed to discount from `dates[date]`.
    pub fn curve_forwards(&self, path: usize, date: usize) -> &[f64] {
        self.forward_row(path, date)
    }

    pub fn variance(&self, path: usize, date: usize) -> f64 {
        self.variance[path * self.n_dates() + date]
    }

    pub fn numeraire(&self, path: usize, date: usize) -> f64 {
        self.numeraire[path * self.n_dates() + date]
    }

    /// Realized money-market discount factor from `from` back to `to <= from`,
    /// i.e. `B(to)/B(from)`.
    pub fn realized_df(&self, path: usize, to: usize, from: usize) -> f64 {
        debug_assert!(to <= from);
        self.numeraire(path, to) / self.numeraire(path, from)
    }

    /// Discount factor `P(t, T)` reconstructed from the forwards observed at
    /// `t`: the product of `1 / (1 + tau_n L_n(t))` over accrual periods
    /// between `t` and `T`. Equals 1 when `t == T`.
    pub fn discount_factor(&self, path: usize, t: f64, tt: f64) -> Result<f64> {
        let from = self.date_index(t)?;
        let to = self.date_index(tt)?;
        if to < from {
            return Err(EngineError::invalid(format!(
                "discount_factor requires t <= T, got t={t}, T={tt}"
            )));
        }
        Ok(self.df_from_row(path, from, from, to))
    }

    /// `P(dates[from], dates[to])` using the curve stored at `obs` (`obs <= from`).
    /// Used to read back fixings: the discount over a period as seen at an
    /// earlier observation date.
    pub fn df_from_row(&self, path: usize, obs: usize, from: usize, to: usize) -> f64 {
        debug_assert!(obs <= from && from <= to);
        let row = self.forward_row(path, obs);
        let mut df = 1.0;
        for n in from..to {
            df /= 1.0 + self.accruals[n] * row[n - obs];
        }
        df
    }
}

/// Simulate the model on `grid`, which must coincide with the tenor grid of
/// `params` (the engine simulates directly on the accrual dates).
pub fn simulate_paths(
    params: &LmmParams,
    grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<PathSet> {
    if n_paths == 0 {
        return Err(EngineError::invalid("n_paths must be >= 1"));
    }
    if grid.len() != params.tenor_grid.len()
        || grid
            .iter()
            .zip(&params.tenor_grid)
            .any(|(g, t)| (g - t).abs() > DATE_TOL)
    {
        return Err(EngineError::invalid(
            "simulation grid must coincide with the tenor grid",
        ));
    }

    let m = params.n_forwards();
    let n_dates = m + 1;
    let accruals: Vec<f64> = params
        .tenor_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .collect();

    // Triangular row offsets: row k holds tenors k..m.
    let mut row_offsets = Vec::with_capacity(n_dates);
    let mut off = 0usize;
    for k in 0..n_dates {
        row_offsets.push(off);
        off += m - k;
    }
    let path_stride = off;

    let mut forwards = vec![0.0f64; n_paths * path_stride];
    let mut variance = vec![0.0f64; n_paths * n_dates];
    let mut numeraire = vec![0.0f64; n_paths * n_dates];

    let fwd_chunks = forwards.par_chunks_mut(path_stride);
    let var_chunks = variance.par_chunks_mut(n_dates);
    let num_chunks = numeraire.par_chunks_mut(n_dates);

    fwd_chunks
        .zip(var_chunks.zip(num_chunks))
        .enumerate()
        .for_each(|(path, (fwd_out, (var_out, num_out)))| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(path as u64);

            let mut fwd: Vec<f64> = params.initial_forwards.clone();
            let mut x = params.cir.x0;

            fwd_out[row_offsets[0]..row_offsets[0] + m].copy_from_slice(&fwd);
            var_out[0] = x;
            num_out[0] = 1.0;

            // Scratch for the predictor-corrector drift terms of live forwards.
            let mut drift1 = vec![0.0f64; m];
            let mut pred = vec![0.0f64; m];
            let mut diffusion = vec![0.0f64; m];

            for k in 0..m {
                let dt = accruals[k];
                let sqrt_dt = dt.sqrt();
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let z3: f64 = StandardNormal.sample(&mut rng);

                num_out[k + 1] = num_out[k] * (1.0 + accruals[k] * fwd[k]);

                let sqrt_x = x.sqrt();
                let bucket = &params.vol_loadings[k];

                // Predictor pass: frozen drift at the step start.
                let mut acc = [0.0f64; 2];
                for n in (k + 1)..m {
                    let lam = bucket[n - k - 1];
                    let e = accruals[n] * (fwd[n] + params.shifts[n])
                        / (1.0 + accruals[n] * fwd[n]);
                    acc[0] += e * lam[0];
                    acc[1] += e * lam[1];
                    drift1[n] = x * (lam[0] * acc[0] + lam[1] * acc[1]);
                    let lam_sq = lam[0] * lam[0] + lam[1] * lam[1];
                    diffusion[n] =
                        sqrt_x * sqrt_dt * (lam[0] * z1 + lam[1] * z2) - 0.5 * x * lam_sq * dt;
                    pred[n] = -params.shifts[n]
                        + (fwd[n] + params.shifts[n]) * (drift1[n] * dt + diffusion[n]).exp();
                }

                // Corrector pass: drift re-evaluated at the predictor and averaged.
                acc = [0.0f64; 2];
                for n in (k + 1)..m {
                    let lam = bucket[n - k - 1];
                    let e = accruals[n] * (pred[n] + params.shifts[n])
                        / (1.0 + accruals[n] * pred[n]);
                    acc[0] += e * lam[0];
                    acc[1] += e * lam[1];
                    let drift2 = x * (lam[0] * acc[0] + lam[1] * acc[1]);
                    let drift = 0.5 * (drift1[n] + drift2);
                    fwd[n] = -params.shifts[n]
                        + (fwd[n] + params.shifts[n]) * (drift * dt + diffusion[n]).exp();
                }

                x = evolve_cir(x, params.cir.theta, params.cir.eta[k], dt, z3)
                    .expect("cir step with validated inputs");

                var_out[k + 1] = x;
                let row = row_offsets[k + 1];
                fwd_out[row..row + (m - k - 1)].copy_from_slice(&fwd[k + 1..]);
            }
        });

    Ok(PathSet {
        n_paths,
        dates: params.tenor_grid.clone(),
        accruals,
        forwards,
        variance,
        numeraire,
        row_offsets,
        path_stride,
        seed,
    })
}
