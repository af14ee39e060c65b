//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;
use quadopo::entanglement::{vlf_correlations, GainVector, QuadCovariance};

/// `exp(M)` by scaling and squaring of a truncated Taylor series.
pub fn expm_taylor(m: &Matrix4<f64>) -> Matrix4<f64> {
    let norm = m.abs().row_sum().max();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m / 2f64.powi(squarings);
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for k in 1..30 {
        term = term * a / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// Ring coupling matrix written out entry by entry.
pub fn ring(xi: [f64; 4]) -> Matrix4<f64> {
    let mut k = Matrix4::zeros();
    for (p, (a, b)) in [(0, 1), (1, 2), (2, 3), (3, 0)].into_iter().enumerate() {
        k[(a, b)] = xi[p];
        k[(b, a)] = xi[p];
    }
    k
}

/// Undepleted-pump covariance built from the Taylor propagators.
pub fn covariance_oracle(xi: [f64; 4], t: f64) -> QuadCovariance {
    let k = ring(xi) * t;
    let mx = expm_taylor(&k);
    let my = expm_taylor(&(-k));
    let mut m = quadopo::entanglement::Matrix8::zeros();
    m.fixed_view_mut::<4, 4>(0, 0).copy_from(&(mx * mx.transpose()));
    m.fixed_view_mut::<4, 4>(4, 4).copy_from(&(my * my.transpose()));
    QuadCovariance::new(m).unwrap()
}

/// Minimises `f` over `[lo, hi]^2` on a grid of spacing `step`, then refines
/// on successively finer grids around the best point.
fn grid_min_2d(f: impl Fn(f64, f64) -> f64, lo: f64, hi: f64, step: f64, refinements: usize) -> (f64, f64) {
    let mut best = (lo, lo, f64::INFINITY);
    let n = ((hi - lo) / step).round() as usize;
    for i in 0..=n {
        for j in 0..=n {
            let (x, y) = (lo + i as f64 * step, lo + j as f64 * step);
            let v = f(x, y);
            if v < best.2 {
                best = (x, y, v);
            }
        }
    }
    let mut h = step;
    for _ in 0..refinements {
        let (cx, cy) = (best.0, best.1);
        let fine = h / 20.0;
        for i in -20..=20 {
            for j in -20..=20 {
                let (x, y) = (cx + i as f64 * fine, cy + j as f64 * fine);
                let v = f(x, y);
                if v < best.2 {
                    best = (x, y, v);
                }
            }
        }
        h = fine;
    }
    (best.0, best.1)
}

/// Gains minimising the outer two inequalities by dense search over
/// `[-3, 3]` with spacing 0.01, optionally refined.
pub fn grid_search_gains(cov: &QuadCovariance, refinements: usize) -> GainVector {
    let (g7, g8) = grid_min_2d(
        |a, b| vlf_correlations(cov, &GainVector::new(0.0, 0.0, a, b)).v56,
        -3.0,
        3.0,
        0.01,
        refinements,
    );
    let (g5, g6) = grid_min_2d(
        |a, b| vlf_correlations(cov, &GainVector::new(a, b, 0.0, 0.0)).v78,
        -3.0,
        3.0,
        0.01,
        refinements,
    );
    GainVector::new(g5, g6, g7, g8)
}

/// Adaptive 15-point Gauss–Kronrod quadrature of a matrix-valued integrand.
pub fn integrate(f: &dyn Fn(f64) -> DMatrix<C64>, a: f64, b: f64, tol: f64) -> DMatrix<C64> {
    let (value, err) = kronrod(f, a, b);
    if err <= tol || (b - a) < 1e-9 {
        return value;
    }
    let mid = 0.5 * (a + b);
    integrate(f, a, mid, 0.5 * tol) + integrate(f, mid, b, 0.5 * tol)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod(f: &dyn Fn(f64) -> DMatrix<C64>, a: f64, b: f64) -> (DMatrix<C64>, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let center = f(c);
    let mut k = &center * C64::new(WGK[7], 0.0);
    let mut g = &center * C64::new(WG[3], 0.0);
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += &s * C64::new(WGK[j], 0.0);
        if j % 2 == 1 {
            g += &s * C64::new(WG[j / 2], 0.0);
        }
    }
    let k = k * C64::new(h, 0.0);
    let g = g * C64::new(h, 0.0);
    let err = (&k - &g).iter().map(|z| z.norm()).fold(0.0, f64::max);
    (k, err)
}

/// `∫_{|w| > W} S(w) dw` from the large-`w` expansion
/// `S = sum_{k,l} A^k D (A^T)^l i^-(k+1) (-i)^-(l+1) w^-(k+l+2)`,
/// keeping terms with `k + l <= order`.
pub fn spectrum_tail(a: &DMatrix<C64>, d: &DMatrix<C64>, w: f64, order: usize) -> DMatrix<C64> {
    let n = a.nrows();
    let i = C64::new(0.0, 1.0);
    let mut powers = vec![DMatrix::<C64>::identity(n, n)];
    for k in 1..=order {
        powers.push(&powers[k - 1] * a);
    }
    let mut out = DMatrix::<C64>::zeros(n, n);
    for k in 0..=order {
        for l in 0..=(order - k) {
            let p = k + l + 2;
            if p % 2 == 1 {
                continue;
            }
            let integral = 2.0 * w.powi(1 - p as i32) / (p as f64 - 1.0);
            let phase = i.powi(-(k as i32 + 1)) * (-i).powi(-(l as i32 + 1));
            out += &powers[k] * d * powers[l].transpose() * (phase * integral);
        }
    }
    out
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
