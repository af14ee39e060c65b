//! Positive-P Itô equations and trajectory ensembles.
//!
//! Each mode carries two independent complex fields `alpha` and `alpha+`.
//! Trajectory averages of products `alpha+^m alpha^n` estimate normally
//! ordered quantum moments.
//!
//! Noise layout: sixteen real Wiener increments per step. For the
//! `alpha` family the pair `(eta_a, eta_b)` of a process enters one low mode
//! as `sqrt(chi alpha_p / 2) (eta_a + i eta_b)` and its partner as
//! `sqrt(chi alpha_p / 2) (eta_a - i eta_b)`; the `alpha+` family uses
//! `alpha+_p` and the pair shifted by two. Square roots take the principal
//! branch.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::meanfield::{relax, steady_state, MeanState};
use crate::model::{CouplingTopology, ValidatedParams};

/// Trajectories with any `|amplitude|` at or above this are abandoned.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// Largest tolerated fraction of diverged trajectories in an ensemble.
pub const MAX_DIVERGED_FRACTION: f64 = 0.01;

/// Number of real noise increments per step.
pub const NOISE_DIM: usize = 16;

/// Number of phase-space variables, interleaved as
/// `[alpha1, alpha1+, alpha2, alpha2+, ..., alpha8, alpha8+]`.
pub const PHASE_DIM: usize = 16;

/// Index of `alpha_m` (zero-based mode) in the interleaved ordering.
pub const fn alpha_index(mode: usize) -> usize {
    2 * mode
}

/// Index of `alpha+_m` in the interleaved ordering.
pub const fn alpha_plus_index(mode: usize) -> usize {
    2 * mode + 1
}

#[derive(Debug, Clone, Copy)]
struct NoiseChannel {
    pump: usize,
    /// low mode (0 = mode 5) taking `eta_a + i eta_b`
    plus: usize,
    /// low mode taking `eta_a - i eta_b`
    minus: usize,
    /// zero-based index of `eta_a` for the `alpha` family
    eta: usize,
}

const NOISE_CHANNELS: [NoiseChannel; 4] = [
    NoiseChannel { pump: 0, plus: 0, minus: 1, eta: 4 },
    NoiseChannel { pump: 1, plus: 1, minus: 2, eta: 8 },
    NoiseChannel { pump: 2, plus: 2, minus: 3, eta: 0 },
    NoiseChannel { pump: 3, plus: 0, minus: 3, eta: 12 },
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub alpha: [C64; 8],
    pub alpha_plus: [C64; 8],
}

impl TrajectoryState {
    /// Coherent-state point: `alpha+ = conj(alpha)`.
    pub fn coherent(mean: &MeanState) -> Self {
        Self {
            alpha: mean.alpha,
            alpha_plus: mean.alpha.map(|a| a.conj()),
        }
    }

    /// Interleaved phase-space vector.
    pub fn to_vector(&self) -> [C64; PHASE_DIM] {
        let mut v = [C64::new(0.0, 0.0); PHASE_DIM];
        for m in 0..8 {
            v[alpha_index(m)] = self.alpha[m];
            v[alpha_plus_index(m)] = self.alpha_plus[m];
        }
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.alpha
            .iter()
            .chain(self.alpha_plus.iter())
            .map(|a| a.norm())
            .fold(0.0, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
    }
}

/// Deterministic part of the Itô equations.
pub fn drift(s: &TrajectoryState, params: &ValidatedParams) -> TrajectoryState {
    let (a, ap) = (&s.alpha, &s.alpha_plus);
    let zero = C64::new(0.0, 0.0);
    let mut da = [zero; 8];
    let mut dap = [zero; 8];
    for p in 0..4 {
        let (j, k) = CouplingTopology::low_pair(p);
        let (chi, eps, gamma) = (params.chi[p], params.eps[p], params.gamma[p]);
        da[p] = eps - chi * a[4 + j] * a[4 + k] - gamma * a[p];
        dap[p] = eps - chi * ap[4 + j] * ap[4 + k] - gamma * ap[p];
    }
    for j in 0..4 {
        let kappa = params.kappa[j];
        let mut x = -kappa * a[4 + j];
        let mut xp = -kappa * ap[4 + j];
        for (p, k) in CouplingTopology::feeds(j) {
            x += params.chi[p] * a[p] * ap[4 + k];
            xp += params.chi[p] * ap[p] * a[4 + k];
        }
        da[4 + j] = x;
        dap[4 + j] = xp;
    }
    TrajectoryState { alpha: da, alpha_plus: dap }
}

/// Noise coefficients `sqrt(chi_p alpha_p / 2)` and `sqrt(chi_p alpha+_p / 2)`.
fn noise_amplitudes(s: &TrajectoryState, params: &ValidatedParams) -> ([C64; 4], [C64; 4]) {
    let mut c = [C64::new(0.0, 0.0); 4];
    let mut cp = [C64::new(0.0, 0.0); 4];
    for p in 0..4 {
        c[p] = (params.chi[p] * s.alpha[p] * 0.5).sqrt();
        cp[p] = (params.chi[p] * s.alpha_plus[p] * 0.5).sqrt();
    }
    (c, cp)
}

/// Noise matrix `B` (phase-space rows in interleaved order, one column per
/// real noise) at the given point. The diffusion matrix is `B B^T`.
pub fn noise_matrix(s: &TrajectoryState, params: &ValidatedParams) -> DMatrix<C64> {
    let (c, cp) = noise_amplitudes(s, params);
    let i = C64::new(0.0, 1.0);
    let mut b = DMatrix::<C64>::zeros(PHASE_DIM, NOISE_DIM);
    for ch in NOISE_CHANNELS {
        let (plus, minus) = (4 + ch.plus, 4 + ch.minus);
        let (ea, eb) = (ch.eta, ch.eta + 1);
        b[(alpha_index(plus), ea)] += c[ch.pump];
        b[(alpha_index(plus), eb)] += i * c[ch.pump];
        b[(alpha_index(minus), ea)] += c[ch.pump];
        b[(alpha_index(minus), eb)] -= i * c[ch.pump];
        b[(alpha_plus_index(plus), ea + 2)] += cp[ch.pump];
        b[(alpha_plus_index(plus), eb + 2)] += i * cp[ch.pump];
        b[(alpha_plus_index(minus), ea + 2)] += cp[ch.pump];
        b[(alpha_plus_index(minus), eb + 2)] -= i * cp[ch.pump];
    }
    b
}

/// One Euler–Maruyama step. `dw` holds the Wiener increments for this step,
/// i.e. standard normals already scaled by `sqrt(dt)`.
pub fn step_ito(
    s: &TrajectoryState,
    params: &ValidatedParams,
    dt: f64,
    dw: &[f64; NOISE_DIM],
) -> Result<TrajectoryState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let d = drift(s, params);
    let (c, cp) = noise_amplitudes(s, params);
    let mut next = *s;
    for m in 0..8 {
        next.alpha[m] += d.alpha[m] * dt;
        next.alpha_plus[m] += d.alpha_plus[m] * dt;
    }
    let i = C64::new(0.0, 1.0);
    for ch in NOISE_CHANNELS {
        let (plus, minus) = (4 + ch.plus, 4 + ch.minus);
        let (wa, wb) = (dw[ch.eta], dw[ch.eta + 1]);
        let up = c[ch.pump] * C64::new(wa, wb);
        let down = c[ch.pump] * C64::new(wa, -wb);
        next.alpha[plus] += up;
        next.alpha[minus] += down;
        let (wa, wb) = (dw[ch.eta + 2], dw[ch.eta + 3]);
        next.alpha_plus[plus] += cp[ch.pump] * (wa + i * wb);
        next.alpha_plus[minus] += cp[ch.pump] * (wa - i * wb);
    }
    let magnitude = next.max_abs();
    if magnitude >= DIVERGENCE_LIMIT {
        return Err(Error::Diverged { magnitude });
    }
    Ok(next)
}

/// Ensemble settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    /// Starting point of every trajectory. `None` uses the classical steady
    /// state with `alpha+ = conj(alpha)`.
    pub initial: Option<TrajectoryState>,
}

/// Trajectory-and-time averages over the retained window `t >= t_final / 2`.
///
/// Standard errors come from the spread of the per-trajectory time averages
/// and are given separately for real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMoments {
    /// `<x_k>` over the interleaved phase-space variables.
    pub mean: [C64; PHASE_DIM],
    pub mean_stderr: [C64; PHASE_DIM],
    /// `<x_k x_l>`.
    pub second: DMatrix<C64>,
    pub second_stderr: DMatrix<C64>,
    /// Trajectories that contributed.
    pub n_traj: usize,
    pub n_diverged: usize,
    /// Time samples per trajectory in the retained window.
    pub samples_per_traj: usize,
}

impl EnsembleMoments {
    /// `<x_k x_l> - <x_k><x_l>` and the standard error of the raw moment.
    pub fn covariance(&self, k: usize, l: usize) -> (C64, C64) {
        (
            self.second[(k, l)] - self.mean[k] * self.mean[l],
            self.second_stderr[(k, l)],
        )
    }

    /// Normally ordered `<a_j^dagger a_i>` (zero-based modes) and its error.
    pub fn normal_moment(&self, i: usize, j: usize) -> (C64, C64) {
        let (k, l) = (alpha_index(i), alpha_plus_index(j));
        (self.second[(k, l)], self.second_stderr[(k, l)])
    }
}

const CHUNK: usize = 64;
const N_PAIRS: usize = PHASE_DIM * (PHASE_DIM + 1) / 2;

#[derive(Clone)]
struct Accumulator {
    count: usize,
    // sums of the per-trajectory averages, less a fixed shift, and of their
    // squares (real and imaginary parts separately)
    sum_mean: [C64; PHASE_DIM],
    sq_mean: [C64; PHASE_DIM],
    sum_pair: Vec<C64>,
    sq_pair: Vec<C64>,
    diverged: usize,
}

impl Accumulator {
    fn new() -> Self {
        let zero = C64::new(0.0, 0.0);
        Self {
            count: 0,
            sum_mean: [zero; PHASE_DIM],
            sq_mean: [zero; PHASE_DIM],
            sum_pair: vec![zero; N_PAIRS],
            sq_pair: vec![zero; N_PAIRS],
            diverged: 0,
        }
    }

    fn push(&mut self, mean: &[C64; PHASE_DIM], pairs: &[C64], shift: &Shift) {
        self.count += 1;
        for (k, v) in mean.iter().enumerate() {
            let v = v - shift.mean[k];
            self.sum_mean[k] += v;
            self.sq_mean[k] += C64::new(v.re * v.re, v.im * v.im);
        }
        for (k, v) in pairs.iter().enumerate() {
            let v = v - shift.pairs[k];
            self.sum_pair[k] += v;
            self.sq_pair[k] += C64::new(v.re * v.re, v.im * v.im);
        }
    }

    fn merge(mut self, other: &Accumulator) -> Self {
        self.count += other.count;
        self.diverged += other.diverged;
        for k in 0..PHASE_DIM {
            self.sum_mean[k] += other.sum_mean[k];
            self.sq_mean[k] += other.sq_mean[k];
        }
        for k in 0..N_PAIRS {
            self.sum_pair[k] += other.sum_pair[k];
            self.sq_pair[k] += other.sq_pair[k];
        }
        self
    }
}

/// Values of each quantity at the initial point, subtracted before
/// accumulation to limit cancellation in the variance.
struct Shift {
    mean: [C64; PHASE_DIM],
    pairs: Vec<C64>,
}

impl Shift {
    fn at(s: &TrajectoryState) -> Self {
        let v = s.to_vector();
        let mut pairs = Vec::with_capacity(N_PAIRS);
        for k in 0..PHASE_DIM {
            for l in k..PHASE_DIM {
                pairs.push(v[k] * v[l]);
            }
        }
        Self { mean: v, pairs }
    }
}

fn mean_and_stderr(sum: C64, sq: C64, n: usize, shift: C64) -> (C64, C64) {
    let nf = n as f64;
    let m = sum / nf;
    let se = |q: f64, mu: f64| {
        if n < 2 {
            return f64::INFINITY;
        }
        let var = ((q - nf * mu * mu) / (nf - 1.0)).max(0.0);
        (var / nf).sqrt()
    };
    (m + shift, C64::new(se(sq.re, m.re), se(sq.im, m.im)))
}

/// Per-trajectory RNG: the master seed selects the key and the trajectory
/// index the stream, so results do not depend on execution order.
fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn pair_index(k: usize, l: usize) -> usize {
    // upper triangle, row-major, k <= l
    k * PHASE_DIM - k * (k + 1) / 2 + l
}

/// Runs one trajectory and returns its time-averaged first and second
/// moments, or `None` if it diverged.
fn run_trajectory(
    params: &ValidatedParams,
    init: &TrajectoryState,
    n_steps: usize,
    keep_from: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Option<([C64; PHASE_DIM], Vec<C64>)> {
    let zero = C64::new(0.0, 0.0);
    let mut s = *init;
    let mut mean = [zero; PHASE_DIM];
    let mut pairs = vec![zero; N_PAIRS];
    let sqrt_dt = dt.sqrt();
    let mut dw = [0.0; NOISE_DIM];
    for step in 1..=n_steps {
        for w in dw.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *w = z * sqrt_dt;
        }
        s = step_ito(&s, params, dt, &dw).ok()?;
        if step >= keep_from {
            let v = s.to_vector();
            let mut idx = 0;
            for k in 0..PHASE_DIM {
                mean[k] += v[k];
                for l in k..PHASE_DIM {
                    pairs[idx] += v[k] * v[l];
                    idx += 1;
                }
            }
        }
    }
    let samples = (n_steps + 1 - keep_from) as f64;
    for m in mean.iter_mut() {
        *m /= samples;
    }
    for p in pairs.iter_mut() {
        *p /= samples;
    }
    Some((mean, pairs))
}

/// Integrates `n_traj` independent trajectories and averages first and
/// second moments over trajectories and over the second half of the run.
pub fn run_ensemble(params: &ValidatedParams, config: &EnsembleConfig) -> Result<EnsembleMoments> {
    let EnsembleConfig { n_traj, t_final, dt, seed, initial } = *config;
    if n_traj < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 trajectories, got {n_traj}")));
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidInput(format!("t_final must be positive, got {t_final}")));
    }
    let fastest = params
        .gamma
        .iter()
        .chain(params.kappa.iter())
        .fold(0.0f64, |m, v| m.max(*v));
    if !(dt > 0.0) || dt > 0.05 / fastest * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "dt = {dt} must be positive and at most 0.05 / max rate = {}",
            0.05 / fastest
        )));
    }
    let init = match initial {
        Some(s) => s,
        None => TrajectoryState::coherent(&classical_start(params)?),
    };

    let n_steps = ((t_final / dt).round() as usize).max(1);
    let keep_from = (n_steps / 2).max(1);

    let shift = Shift::at(&init);
    let chunks: Vec<Accumulator> = (0..n_traj.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Accumulator::new();
            for index in c * CHUNK..((c + 1) * CHUNK).min(n_traj) {
                let mut rng = trajectory_rng(seed, index);
                match run_trajectory(params, &init, n_steps, keep_from, dt, &mut rng) {
                    Some((mean, pairs)) => acc.push(&mean, &pairs, &shift),
                    None => acc.diverged += 1,
                }
            }
            acc
        })
        .collect();
    let total = chunks.iter().fold(Accumulator::new(), |a, b| a.merge(b));

    if total.diverged as f64 > MAX_DIVERGED_FRACTION * n_traj as f64 {
        return Err(Error::TooManyDivergences { diverged: total.diverged, total: n_traj });
    }

    let n = total.count;
    let zero = C64::new(0.0, 0.0);
    let mut mean = [zero; PHASE_DIM];
    let mut mean_stderr = [zero; PHASE_DIM];
    for k in 0..PHASE_DIM {
        (mean[k], mean_stderr[k]) = mean_and_stderr(total.sum_mean[k], total.sq_mean[k], n, shift.mean[k]);
    }
    let mut second = DMatrix::zeros(PHASE_DIM, PHASE_DIM);
    let mut second_stderr = DMatrix::zeros(PHASE_DIM, PHASE_DIM);
    for k in 0..PHASE_DIM {
        for l in k..PHASE_DIM {
            let idx = pair_index(k, l);
            let (m, e) = mean_and_stderr(total.sum_pair[idx], total.sq_pair[idx], n, shift.pairs[idx]);
            second[(k, l)] = m;
            second[(l, k)] = m;
            second_stderr[(k, l)] = e;
            second_stderr[(l, k)] = e;
        }
    }
    Ok(EnsembleMoments {
        mean,
        mean_stderr,
        second,
        second_stderr,
        n_traj: n,
        n_diverged: total.diverged,
        samples_per_traj: n_steps + 1 - keep_from,
    })
}

fn classical_start(params: &ValidatedParams) -> Result<MeanState> {
    if params.is_symmetric() {
        return Ok(steady_state(params)?.0);
    }
    let mut below = MeanState::zero();
    for p in 0..4 {
        below.alpha[p] = C64::new(params.eps[p] / params.gamma[p], 0.0);
    }
    Ok(relax(params, below, 1e5, 1e-10)?.state)
}
