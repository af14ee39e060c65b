//! Linearised fluctuations about a steady state.
//!
//! Fluctuations obey `d x = A x dt + B dW` over the interleaved ordering
//! `[a1, a1+, ..., a8, a8+]`, with `A` the Jacobian of the positive-P drift
//! and `D = B B^T`. The intracavity spectrum is the Ornstein–Uhlenbeck form
//!
//! ```text
//! S(w) = (i w I - A)^-1 D (-i w I - A^T)^-1
//! ```
//!
//! Above threshold the low-mode phases can drift freely: rotating modes 5
//! and 7 by `e^{i theta}` and 6 and 8 by `e^{-i theta}` leaves every
//! process invariant, so `A` has an exact zero eigenvalue there. That mode is
//! excluded from the stability test and projected out at `w = 0`.

use nalgebra::{DMatrix, DVector, SMatrix};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::entanglement::{vlf_optimized, GainVector, Matrix8, QuadCovariance, VlfCorrelations};
use crate::error::{Error, Result};
use crate::meanfield::{classical_drift, steady_state, MeanState};
use crate::model::{threshold_pump, CouplingTopology, ValidatedParams};
use crate::stochastic::{alpha_index, alpha_plus_index, noise_matrix, TrajectoryState, PHASE_DIM};

/// Largest mean-field residual accepted by [`linearize`].
pub const FIXED_POINT_TOL: f64 = 1e-8;

/// Eigenvalues must have real part below `-STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-10;

/// Pump ratios closer than this to 1 are rejected by [`scan_pump`].
pub const THRESHOLD_EXCLUSION: f64 = 0.02;

/// Relative size of `|A g|` below which `g` counts as a neutral direction.
const NEUTRAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub drift: DMatrix<C64>,
    pub diffusion: DMatrix<C64>,
    /// `B`, one column per real noise.
    pub noise: DMatrix<C64>,
    pub steady: MeanState,
    pub kappa: [f64; 4],
    /// Unit phase-rotation direction, present when the low modes are
    /// occupied and the rotation is a symmetry of the drift.
    pub neutral_direction: Option<DVector<C64>>,
}

/// Drift Jacobian at an arbitrary phase-space point.
pub fn drift_jacobian(s: &TrajectoryState, params: &ValidatedParams) -> DMatrix<C64> {
    let (a, ap) = (&s.alpha, &s.alpha_plus);
    let mut m = DMatrix::<C64>::zeros(PHASE_DIM, PHASE_DIM);
    let c = |v: f64| C64::new(v, 0.0);
    for p in 0..4 {
        let (j, k) = CouplingTopology::low_pair(p);
        let chi = params.chi[p];
        let (ra, rp) = (alpha_index(p), alpha_plus_index(p));
        m[(ra, ra)] = c(-params.gamma[p]);
        m[(rp, rp)] = c(-params.gamma[p]);
        m[(ra, alpha_index(4 + j))] -= chi * a[4 + k];
        m[(ra, alpha_index(4 + k))] -= chi * a[4 + j];
        m[(rp, alpha_plus_index(4 + j))] -= chi * ap[4 + k];
        m[(rp, alpha_plus_index(4 + k))] -= chi * ap[4 + j];
    }
    for j in 0..4 {
        let (ra, rp) = (alpha_index(4 + j), alpha_plus_index(4 + j));
        m[(ra, ra)] = c(-params.kappa[j]);
        m[(rp, rp)] = c(-params.kappa[j]);
        for (p, k) in CouplingTopology::feeds(j) {
            let chi = params.chi[p];
            m[(ra, alpha_index(p))] += chi * ap[4 + k];
            m[(ra, alpha_plus_index(4 + k))] += chi * a[p];
            m[(rp, alpha_plus_index(p))] += chi * a[4 + k];
            m[(rp, alpha_index(4 + k))] += chi * ap[p];
        }
    }
    m
}

/// Phase-rotation generator at a mean state, or `None` if it vanishes.
fn rotation_generator(steady: &MeanState) -> Option<DVector<C64>> {
    let mut g = DVector::<C64>::zeros(PHASE_DIM);
    let i = C64::new(0.0, 1.0);
    for j in 0..4 {
        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
        let a = steady.alpha[4 + j];
        g[alpha_index(4 + j)] = i * s * a;
        g[alpha_plus_index(4 + j)] = -i * s * a.conj();
    }
    let norm = g.norm();
    (norm > 0.0).then(|| g / C64::new(norm, 0.0))
}

/// Drift and diffusion matrices at a mean-field fixed point.
pub fn linearize(params: &ValidatedParams, steady: &MeanState) -> Result<LinearizedSystem> {
    let residual = classical_drift(steady, params).max_abs();
    if !(residual < FIXED_POINT_TOL) {
        return Err(Error::NotAFixedPoint { residual });
    }
    let point = TrajectoryState::coherent(steady);
    let drift = drift_jacobian(&point, params);
    let noise = noise_matrix(&point, params);
    let diffusion = &noise * noise.transpose();
    let neutral_direction = rotation_generator(steady).filter(|g| {
        let scale = drift.norm();
        (&drift * g).norm() <= NEUTRAL_TOL * scale
    });
    Ok(LinearizedSystem {
        drift,
        diffusion,
        noise,
        steady: *steady,
        kappa: params.kappa,
        neutral_direction,
    })
}

/// Eigenvalue summary of a drift matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// All sixteen eigenvalues, sorted by decreasing real part.
    pub eigenvalues: Vec<C64>,
    /// Largest real part, excluding the neutral phase mode if there is one.
    pub max_real: f64,
    /// The eigenvalue attributed to the phase-rotation symmetry.
    pub neutral: Option<C64>,
    pub is_stable: bool,
}

/// Eigenvalues of a complex square matrix via the complex Schur form.
pub fn eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    m.clone()
        .try_schur(1e-15, 10_000)
        .and_then(|s| s.eigenvalues())
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::InvalidInput("eigenvalue iteration did not converge".into()))
}

pub fn stability(sys: &LinearizedSystem) -> Result<StabilityReport> {
    let mut eigenvalues = eigenvalues(&sys.drift)?;
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let neutral_index = sys.neutral_direction.as_ref().map(|_| {
        (0..eigenvalues.len())
            .min_by(|&a, &b| eigenvalues[a].norm().total_cmp(&eigenvalues[b].norm()))
            .unwrap()
    });
    let max_real = eigenvalues
        .iter()
        .enumerate()
        .filter(|(k, _)| Some(*k) != neutral_index)
        .map(|(_, l)| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityReport {
        neutral: neutral_index.map(|k| eigenvalues[k]),
        is_stable: max_real < -STABILITY_MARGIN,
        max_real,
        eigenvalues,
    })
}

fn require_stable(sys: &LinearizedSystem) -> Result<()> {
    let report = stability(sys)?;
    if report.is_stable {
        Ok(())
    } else {
        Err(Error::Unstable { max_real: report.max_real })
    }
}

fn singular() -> Error {
    Error::InvalidInput("frequency response is singular (eigenvalue on the imaginary axis)".into())
}

/// Ornstein–Uhlenbeck spectrum for `dx = A x dt + B dW`, `D = B B^T`.
pub fn ou_spectrum(a: &DMatrix<C64>, d: &DMatrix<C64>, omega: f64) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    let iw = DMatrix::<C64>::identity(n, n) * C64::new(0.0, omega);
    let left = (&iw - a).try_inverse().ok_or_else(singular)?;
    let right = (-&iw - a.transpose()).try_inverse().ok_or_else(singular)?;
    Ok(left * d * right)
}

/// Group inverse of `A` when `A r = 0` for the unit vector `r`.
fn group_inverse(a: &DMatrix<C64>, r: &DVector<C64>) -> Result<DMatrix<C64>> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.as_ref().ok_or_else(singular)?;
    let k = (0..svd.singular_values.len())
        .min_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]))
        .ok_or_else(singular)?;
    // left null vector: l^T A = 0
    let l = u.column(k).map(|z| z.conj());
    let overlap = (l.transpose() * r)[(0, 0)];
    if overlap.norm() < 1e-12 {
        return Err(singular());
    }
    let l = l / overlap;
    let p = r * l.transpose();
    Ok((a + &p).try_inverse().ok_or_else(singular)? - p)
}

/// Intracavity spectrum. At `w = 0` the neutral phase mode, if any, is
/// projected out.
pub fn intracavity_spectrum(sys: &LinearizedSystem, omega: f64) -> Result<DMatrix<C64>> {
    require_stable(sys)?;
    spectrum_unchecked(sys, omega)
}

fn spectrum_unchecked(sys: &LinearizedSystem, omega: f64) -> Result<DMatrix<C64>> {
    match &sys.neutral_direction {
        Some(r) if omega == 0.0 => {
            let g = group_inverse(&sys.drift, r)?;
            Ok(&g * &sys.diffusion * g.transpose())
        }
        _ => ou_spectrum(&sys.drift, &sys.diffusion, omega),
    }
}

/// Stationary covariance `C` solving `A C + C A^T + D = 0`.
pub fn stationary_covariance(a: &DMatrix<C64>, d: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let op = id.kronecker(a) + a.kronecker(&id);
    let rhs = DVector::from_iterator(n * n, d.iter().map(|v| -v));
    let vec_c = op.lu().solve(&rhs).ok_or_else(singular)?;
    Ok(DMatrix::from_column_slice(n, n, vec_c.as_slice()))
}

/// Low-mode block in quadratures: `X = a + a+`, `Y = -i (a - a+)`, ordered
/// `(X5..X8, Y5..Y8)`.
pub fn quadrature_spectrum(s: &DMatrix<C64>) -> SMatrix<C64, 8, 8> {
    let mut t = SMatrix::<C64, 8, PHASE_DIM>::zeros();
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    for j in 0..4 {
        t[(j, alpha_index(4 + j))] = one;
        t[(j, alpha_plus_index(4 + j))] = one;
        t[(4 + j, alpha_index(4 + j))] = -i;
        t[(4 + j, alpha_plus_index(4 + j))] = i;
    }
    let s = SMatrix::<C64, PHASE_DIM, PHASE_DIM>::from_iterator(s.iter().copied());
    t * s * t.transpose()
}

/// Output quadrature spectral covariance: unit vacuum level plus
/// `2 sqrt(kappa_i kappa_j)` times the normally ordered intracavity part.
pub fn output_covariance(kappa: &[f64; 4], s: &DMatrix<C64>) -> Result<QuadCovariance> {
    let q = quadrature_spectrum(s);
    let mut v = Matrix8::identity();
    for r in 0..8 {
        for c in 0..8 {
            let k = (kappa[r % 4] * kappa[c % 4]).sqrt();
            v[(r, c)] += k * (q[(r, c)] + q[(c, r)]).re;
        }
    }
    QuadCovariance::new(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub omega: f64,
    pub vout: QuadCovariance,
    pub correlations: VlfCorrelations,
    pub gains: GainVector,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectrumTable {
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumTable {
    /// For each of the three correlations, the smallest value on the grid
    /// and the row where it occurs.
    pub fn minima(&self) -> Option<[(f64, usize); 3]> {
        if self.rows.is_empty() {
            return None;
        }
        let mut out = [(f64::INFINITY, 0); 3];
        for (k, row) in self.rows.iter().enumerate() {
            for (m, v) in row.correlations.as_array().into_iter().enumerate() {
                if v < out[m].0 {
                    out[m] = (v, k);
                }
            }
        }
        Some(out)
    }
}

fn row_unchecked(sys: &LinearizedSystem, omega: f64) -> Result<SpectrumRow> {
    let s = spectrum_unchecked(sys, omega)?;
    let vout = output_covariance(&sys.kappa, &s)?;
    let opt = vlf_optimized(&vout)?;
    Ok(SpectrumRow { omega, vout, correlations: opt.correlations, gains: opt.gains })
}

/// Output spectral correlations at one frequency.
pub fn output_vlf_spectrum(sys: &LinearizedSystem, omega: f64) -> Result<SpectrumRow> {
    require_stable(sys)?;
    row_unchecked(sys, omega)
}

/// Output spectral correlations over a frequency grid, in grid order.
pub fn scan_frequency(sys: &LinearizedSystem, omegas: &[f64]) -> Result<SpectrumTable> {
    require_stable(sys)?;
    let rows = omegas
        .par_iter()
        .map(|&w| row_unchecked(sys, w))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumTable { rows })
}

/// Linearisation about the closed-form steady state of a symmetric system.
pub fn linearize_symmetric(params: &ValidatedParams) -> Result<LinearizedSystem> {
    let (steady, _) = steady_state(params)?;
    linearize(params, &steady)
}

/// Frequency minima of the three correlations at one pump ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpScanPoint {
    pub minima: [f64; 3],
    /// Frequency of each minimum.
    pub omega_at_min: [f64; 3],
    /// Gains at the minimum of the first correlation.
    pub gains: GainVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpScanRow {
    pub ratio: f64,
    pub outcome: Result<PumpScanPoint>,
}

/// Minimum over the grid of each correlation, for each `eps / eps_c`.
///
/// Failures at individual ratios (typically `Unstable`) are reported in the
/// row rather than aborting the scan.
pub fn scan_pump(params: &ValidatedParams, ratios: &[f64], omegas: &[f64]) -> Result<Vec<PumpScanRow>> {
    let eps_c = threshold_pump(params)?;
    for &r in ratios {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidInput(format!("pump ratio {r} must be finite and nonnegative")));
        }
        if (r - 1.0).abs() < THRESHOLD_EXCLUSION {
            return Err(Error::InvalidInput(format!(
                "pump ratio {r} lies within {THRESHOLD_EXCLUSION} of threshold, where linearisation fails"
            )));
        }
    }
    if omegas.is_empty() {
        return Err(Error::InvalidInput("frequency grid is empty".into()));
    }
    let point = |r: f64| -> Result<PumpScanPoint> {
        let p = params.with_eps(r * eps_c)?;
        let sys = linearize_symmetric(&p)?;
        let table = scan_frequency(&sys, omegas)?;
        let m = table.minima().expect("grid is not empty");
        Ok(PumpScanPoint {
            minima: m.map(|(v, _)| v),
            omega_at_min: m.map(|(_, k)| table.rows[k].omega),
            gains: table.rows[m[0].1].gains,
        })
    };
    Ok(ratios
        .par_iter()
        .map(|&ratio| PumpScanRow { ratio, outcome: point(ratio) })
        .collect())
}

/// Largest real part of the drift spectrum at the below-threshold state
/// (`a_p = eps / gamma`, low modes empty) with every pump set to `eps`.
pub fn below_branch_growth_rate(params: &ValidatedParams, eps: f64) -> Result<f64> {
    let p = params.with_eps(eps)?;
    let mut state = MeanState::zero();
    for q in 0..4 {
        state.alpha[q] = C64::new(p.eps[q] / p.gamma[q], 0.0);
    }
    let sys = linearize(&p, &state)?;
    Ok(stability(&sys)?.max_real)
}

/// Locates the pump amplitude where the below-threshold state loses
/// stability, by bisection on `[lo, hi]` to relative width `rtol`.
pub fn critical_pump_by_bisection(params: &ValidatedParams, lo: f64, hi: f64, rtol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let f_lo = below_branch_growth_rate(params, lo)?;
    let f_hi = below_branch_growth_rate(params, hi)?;
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bracket [{lo}, {hi}] does not straddle the instability (growth rates {f_lo:e}, {f_hi:e})"
        )));
    }
    while hi - lo > rtol * hi {
        let mid = 0.5 * (lo + hi);
        if below_branch_growth_rate(params, mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Uniform grid of `points` frequencies on `[0, omega_max]`.
pub fn frequency_grid(omega_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|k| omega_max * k as f64 / (n - 1) as f64).collect(),
    }
}
