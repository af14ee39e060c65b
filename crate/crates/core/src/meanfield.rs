//! Classical mean-field equations and their steady states.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{threshold_pump, CouplingTopology, ValidatedParams};

/// Mean amplitudes of modes 1..8 (index 0 is mode 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanState {
    pub alpha: [C64; 8],
}

impl MeanState {
    pub fn zero() -> Self {
        Self { alpha: [C64::new(0.0, 0.0); 8] }
    }

    pub fn from_real(values: [f64; 8]) -> Self {
        Self { alpha: values.map(|v| C64::new(v, 0.0)) }
    }

    pub fn pumps(&self) -> &[C64] {
        &self.alpha[..4]
    }

    pub fn low(&self) -> &[C64] {
        &self.alpha[4..]
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.alpha.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }
}

/// Right-hand side of the mean-value equations
///
/// ```text
/// d a_p/dt = eps_p - chi_p a_j a_k - gamma_p a_p            (pumps)
/// d a_j/dt = sum_p chi_p a_p conj(a_k) - kappa_j a_j        (low modes)
/// ```
///
/// where `(j, k)` runs over the ring pairs fed by pump `p`.
pub fn classical_drift(state: &MeanState, params: &ValidatedParams) -> MeanState {
    let a = &state.alpha;
    let mut d = [C64::new(0.0, 0.0); 8];
    for p in 0..4 {
        let (j, k) = CouplingTopology::low_pair(p);
        d[p] = params.eps[p] - params.chi[p] * a[4 + j] * a[4 + k] - params.gamma[p] * a[p];
    }
    for j in 0..4 {
        let mut acc = -params.kappa[j] * a[4 + j];
        for (p, k) in CouplingTopology::feeds(j) {
            acc += params.chi[p] * a[p] * a[4 + k].conj();
        }
        d[4 + j] = acc;
    }
    MeanState { alpha: d }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Below,
    AtThreshold,
    Above,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Below => "below",
            Regime::AtThreshold => "at-threshold",
            Regime::Above => "above",
        }
    }
}

/// Relative width of the band around `eps_c` labelled [`Regime::AtThreshold`].
pub const THRESHOLD_BAND: f64 = 1e-9;

/// Closed-form steady state of the symmetric system.
///
/// Below threshold the pumps sit at `eps / gamma` and the low modes are
/// empty. Above threshold the pumps clamp at `kappa / (2 chi)` and the low
/// modes take the all-positive real branch `sqrt((eps - eps_c) / chi)`; any
/// alternating phase rotation of the low modes is an equally valid solution.
pub fn steady_state(params: &ValidatedParams) -> Result<(MeanState, Regime)> {
    let (chi, eps, gamma, kappa) = params.symmetric_values()?;
    if chi == 0.0 {
        let pump = eps / gamma;
        return Ok((MeanState::from_real([pump, pump, pump, pump, 0.0, 0.0, 0.0, 0.0]), Regime::Below));
    }
    let eps_c = threshold_pump(params)?;
    let regime = if ((eps - eps_c) / eps_c).abs() < THRESHOLD_BAND {
        Regime::AtThreshold
    } else if eps < eps_c {
        Regime::Below
    } else {
        Regime::Above
    };
    let state = match regime {
        Regime::Below | Regime::AtThreshold => {
            let pump = eps / gamma;
            MeanState::from_real([pump, pump, pump, pump, 0.0, 0.0, 0.0, 0.0])
        }
        Regime::Above => {
            let pump = kappa / (2.0 * chi);
            let low = ((eps - eps_c) / chi).sqrt();
            MeanState::from_real([pump, pump, pump, pump, low, low, low, low])
        }
    };
    Ok((state, regime))
}

/// Result of [`relax`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    pub state: MeanState,
    /// Integration time used.
    pub time: f64,
    /// Accepted integrator steps.
    pub steps: usize,
    /// Final `max |d alpha / dt|`.
    pub residual: f64,
}

/// Relative tolerance of the adaptive integrator used by [`relax`].
pub const RELAX_RTOL: f64 = 1e-10;

/// Integrates the mean-field equations from `init` until the largest
/// derivative magnitude drops below `tol`.
pub fn relax(params: &ValidatedParams, init: MeanState, t_max: f64, tol: f64) -> Result<Relaxation> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if !(t_max > 0.0) {
        return Err(Error::InvalidInput(format!("t_max must be positive, got {t_max}")));
    }
    if !init.is_finite() {
        return Err(Error::InvalidInput("initial state is not finite".into()));
    }
    let f = |y: &MeanState| classical_drift(y, params);
    let mut y = init;
    let mut k1 = f(&y);
    let mut residual = k1.max_abs();
    let mut t = 0.0;
    let mut steps = 0usize;
    let rate = params
        .gamma
        .iter()
        .chain(params.kappa.iter())
        .fold(0.0f64, |m, v| m.max(*v));
    let mut h = 0.01 / rate;
    // local errors much larger than tol / rate would keep the residual from
    // ever settling below tol
    let cap = 0.1 * tol / rate;

    while residual >= tol {
        if t >= t_max {
            return Err(Error::NoConvergence { t_max, residual, tol });
        }
        let h_try = h.min(t_max - t);
        let (y_new, k_new, err) = dopri_step(&f, &y, &k1, h_try, cap);
        if err <= 1.0 {
            t += h_try;
            y = y_new;
            k1 = k_new;
            steps += 1;
            residual = k1.max_abs();
            if !y.is_finite() {
                return Err(Error::NoConvergence { t_max, residual: f64::INFINITY, tol });
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = h_try * factor;
    }
    Ok(Relaxation { state: y, time: t, steps, residual })
}

fn axpy(y: &MeanState, terms: &[(f64, &MeanState)]) -> MeanState {
    let mut out = *y;
    for (c, k) in terms {
        for (o, v) in out.alpha.iter_mut().zip(k.alpha.iter()) {
            *o += *c * *v;
        }
    }
    out
}

/// One Dormand–Prince 5(4) step, with per-component error scale
/// `RELAX_RTOL |y|` capped at `cap`. Returns the new state, the derivative at
/// the new state (first-same-as-last) and the scaled error norm.
fn dopri_step<F>(f: &F, y: &MeanState, k1: &MeanState, h: f64, cap: f64) -> (MeanState, MeanState, f64)
where
    F: Fn(&MeanState) -> MeanState,
{
    let k2 = f(&axpy(y, &[(h / 5.0, k1)]));
    let k3 = f(&axpy(y, &[(h * 3.0 / 40.0, k1), (h * 9.0 / 40.0, &k2)]));
    let k4 = f(&axpy(y, &[(h * 44.0 / 45.0, k1), (-h * 56.0 / 15.0, &k2), (h * 32.0 / 9.0, &k3)]));
    let k5 = f(&axpy(
        y,
        &[
            (h * 19372.0 / 6561.0, k1),
            (-h * 25360.0 / 2187.0, &k2),
            (h * 64448.0 / 6561.0, &k3),
            (-h * 212.0 / 729.0, &k4),
        ],
    ));
    let k6 = f(&axpy(
        y,
        &[
            (h * 9017.0 / 3168.0, k1),
            (-h * 355.0 / 33.0, &k2),
            (h * 46732.0 / 5247.0, &k3),
            (h * 49.0 / 176.0, &k4),
            (-h * 5103.0 / 18656.0, &k5),
        ],
    ));
    let y5 = axpy(
        y,
        &[
            (h * 35.0 / 384.0, k1),
            (h * 500.0 / 1113.0, &k3),
            (h * 125.0 / 192.0, &k4),
            (-h * 2187.0 / 6784.0, &k5),
            (h * 11.0 / 84.0, &k6),
        ],
    );
    let k7 = f(&y5);
    // difference between the 5th and embedded 4th order solutions
    let e = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let ks = [k1, &k2, &k3, &k4, &k5, &k6, &k7];
    let mut err = 0.0f64;
    for i in 0..8 {
        let mut d = C64::new(0.0, 0.0);
        for (c, k) in e.iter().zip(ks.iter()) {
            d += h * c * k.alpha[i];
        }
        let mag = y.alpha[i].norm().max(y5.alpha[i].norm());
        let scale = (RELAX_RTOL * mag).min(cap).max(1e-14 * mag).max(1e-300);
        err = err.max(d.norm() / scale);
    }
    (y5, k7, err)
}
