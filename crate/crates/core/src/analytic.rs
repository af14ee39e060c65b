//! Undepleted-pump solutions for the low-frequency quadratures.
//!
//! With the pumps frozen at real amplitudes the low modes obey
//! `dX/dt = K X` and `dY/dt = -K Y`, where `K` is the symmetric ring matrix
//! of effective couplings `xi_i = chi_i <a_i(0)>`. Starting from vacuum the
//! second moments follow directly from the propagators.

use nalgebra::{Matrix4, SymmetricEigen};

use crate::entanglement::{vlf_optimized, Matrix8, QuadCovariance, VlfOptimized};
use crate::error::{Error, Result};
use crate::model::CouplingTopology;

/// Effective couplings `xi_1..xi_4`, nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCouplings([f64; 4]);

impl EffectiveCouplings {
    pub fn new(xi: [f64; 4]) -> Result<Self> {
        if let Some(i) = xi.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain {
                field: format!("xi{}", i + 1),
                reason: format!("effective coupling must be finite and nonnegative, got {}", xi[i]),
            });
        }
        Ok(Self(xi))
    }

    pub fn equal(xi: f64) -> Result<Self> {
        Self::new([xi; 4])
    }

    /// Ring weights `(a, a, b, b)`: both couplings touching mode 6 equal `a`,
    /// both touching mode 8 equal `b`.
    pub fn paired(a: f64, b: f64) -> Result<Self> {
        Self::new([a, a, b, b])
    }

    pub fn values(&self) -> [f64; 4] {
        self.0
    }
}

/// Ring matrix `K` over modes 5..8 (indices 0..3).
pub fn coupling_matrix(xi: &EffectiveCouplings) -> Matrix4<f64> {
    let mut k = Matrix4::zeros();
    for (p, x) in xi.0.iter().enumerate() {
        let (a, b) = CouplingTopology::low_pair(p);
        k[(a, b)] = *x;
        k[(b, a)] = *x;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorMethod {
    /// Eigendecomposition of `K`; any couplings.
    General,
    /// Closed form for four equal couplings.
    ClosedEqual,
    /// Closed form for ring weights `(a, a, b, b)`.
    ClosedPaired,
}

/// Linear maps taking the initial quadratures to their values at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorPair {
    /// `(X5..X8)(0) -> (X5..X8)(t)`
    pub mx: Matrix4<f64>,
    /// `(Y5..Y8)(0) -> (Y5..Y8)(t)`
    pub my: Matrix4<f64>,
}

impl PropagatorPair {
    pub fn identity() -> Self {
        Self {
            mx: Matrix4::identity(),
            my: Matrix4::identity(),
        }
    }
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

pub fn propagator(xi: &EffectiveCouplings, t: f64, method: PropagatorMethod) -> Result<PropagatorPair> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite, got {t}")));
    }
    let v = xi.0;
    match method {
        PropagatorMethod::General => Ok(general(xi, t)),
        PropagatorMethod::ClosedEqual => {
            if !v.iter().all(|x| nearly_equal(*x, v[0])) {
                return Err(Error::MethodMismatch { method: "ClosedEqual", xi: v });
            }
            Ok(closed_equal(v[0], t))
        }
        PropagatorMethod::ClosedPaired => {
            if !(nearly_equal(v[0], v[1]) && nearly_equal(v[2], v[3])) {
                return Err(Error::MethodMismatch { method: "ClosedPaired", xi: v });
            }
            Ok(closed_paired(v[0], v[2], t))
        }
    }
}

fn general(xi: &EffectiveCouplings, t: f64) -> PropagatorPair {
    let eig = SymmetricEigen::new(coupling_matrix(xi));
    let q = eig.eigenvectors;
    let expo = |sign: f64| {
        let d = Matrix4::from_diagonal(&eig.eigenvalues.map(|l| (sign * l * t).exp()));
        q * d * q.transpose()
    };
    PropagatorPair {
        mx: expo(1.0),
        my: expo(-1.0),
    }
}

/// Equal couplings: `A = cosh^2(xi t)` on the diagonal, `B = sinh(2 xi t)/2`
/// between ring neighbours and `C = sinh^2(xi t)` between opposite modes.
fn closed_equal(xi: f64, t: f64) -> PropagatorPair {
    let s = xi * t;
    let a = s.cosh().powi(2);
    let b = 0.5 * (2.0 * s).sinh();
    let c = s.sinh().powi(2);
    let mx = Matrix4::new(
        a, b, c, b, //
        b, a, b, c, //
        c, b, a, b, //
        b, c, b, a,
    );
    let my = Matrix4::new(
        a, -b, c, -b, //
        -b, a, -b, c, //
        c, -b, a, -b, //
        -b, c, -b, a,
    );
    PropagatorPair { mx, my }
}

/// Ring weights `(a, a, b, b)`, with `omega = sqrt(a^2 + b^2)`.
///
/// Mode 5 and mode 7 are interchangeable. The neighbour terms scale as
/// `sinh(sqrt(2) omega t) / (sqrt(2) omega)` and the (5,7) term is
/// `sinh^2(omega t / sqrt(2))`.
fn closed_paired(a: f64, b: f64, t: f64) -> PropagatorPair {
    let omega2 = a * a + b * b;
    if omega2 == 0.0 {
        return PropagatorPair::identity();
    }
    let omega = omega2.sqrt();
    let r2 = std::f64::consts::SQRT_2;
    let half = omega * t / r2;
    let full = r2 * omega * t;

    let d = half.cosh().powi(2);
    let opp = half.sinh().powi(2);
    let sh = full.sinh() / (r2 * omega);
    let e = a * sh;
    let g = b * sh;
    let h = (b * b + a * a * full.cosh()) / omega2;
    let i = a * b * (full.cosh() - 1.0) / omega2;
    let j = (a * a + b * b * full.cosh()) / omega2;

    let mx = Matrix4::new(
        d, e, opp, g, //
        e, h, e, i, //
        opp, e, d, g, //
        g, i, g, j,
    );
    let my = Matrix4::new(
        d, -e, opp, -g, //
        -e, h, -e, i, //
        opp, -e, d, -g, //
        -g, i, -g, j,
    );
    PropagatorPair { mx, my }
}

/// Second moments at time `t` from vacuum initial moments
/// `<X_i(0) X_j(0)> = <Y_i(0) Y_j(0)> = delta_ij`.
pub fn quad_covariance(prop: &PropagatorPair) -> QuadCovariance {
    let xx = prop.mx * prop.mx.transpose();
    let yy = prop.my * prop.my.transpose();
    let mut m = Matrix8::zeros();
    m.fixed_view_mut::<4, 4>(0, 0).copy_from(&xx);
    m.fixed_view_mut::<4, 4>(4, 4).copy_from(&yy);
    // products of symmetric-by-construction blocks: exact symmetry up to rounding
    QuadCovariance::new(m).expect("propagator moments are finite and symmetric")
}

/// Optimised correlations of the undepleted-pump state at time `t`.
pub fn vlf_at(xi: &EffectiveCouplings, t: f64, method: PropagatorMethod) -> Result<VlfOptimized> {
    vlf_optimized(&quad_covariance(&propagator(xi, t, method)?))
}

/// Literal transcription of the printed closed form for the equal-coupling
/// correlation `V3`.
///
/// The printed expression mixes `sqrt(B)` and `sqrt(2B)` with quadratic terms
/// and does not agree with the moment pipeline ([`vlf_at`]) away from
/// `xi t = 0`. It is kept only so the two can be compared side by side.
pub fn v3_closed_form(xi: f64, t: f64) -> f64 {
    let s = xi * t;
    let a = s.cosh().powi(2);
    let b = 0.5 * (2.0 * s).sinh();
    let c = s.sinh().powi(2);
    let r2 = std::f64::consts::SQRT_2;
    let sqrt_2b = (2.0 * b).sqrt();
    let num = b * b - 4.0 * b.powf(1.5) * c * r2 + 12.0 * b * c * c - 8.0 * c.powi(3) * sqrt_2b
        + 4.0 * c.powi(4);
    let den = a * a - 2.0 * a * b.sqrt() + b - c * sqrt_2b + c * c;
    4.0 * a * a - 4.0 * a * sqrt_2b + 4.0 * (sqrt_2b - c) * c + 2.0 * num / den
}

/// Uniform grid of `points` values on `[0, t_max]`.
pub fn time_grid(t_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Scaling-and-squaring Taylor exponential, independent of the
    /// eigendecomposition path.
    fn expm_taylor(m: Matrix4<f64>) -> Matrix4<f64> {
        let norm = m.amax() * 4.0;
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let scaled = m / 2f64.powi(squarings as i32);
        let mut term = Matrix4::identity();
        let mut sum = Matrix4::identity();
        for k in 1..30 {
            term = term * scaled / k as f64;
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    fn max_abs(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn coupling_matrix_layouts() {
        let k = coupling_matrix(&EffectiveCouplings::equal(1.0).unwrap());
        let ring = Matrix4::new(
            0.0, 1.0, 0.0, 1.0, //
            1.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 1.0, //
            1.0, 0.0, 1.0, 0.0,
        );
        assert_eq!(k, ring);

        let k = coupling_matrix(&EffectiveCouplings::new([1.0, 0.0, 0.0, 0.0]).unwrap());
        let mut single = Matrix4::zeros();
        single[(0, 1)] = 1.0;
        single[(1, 0)] = 1.0;
        assert_eq!(k, single);

        let k = coupling_matrix(&EffectiveCouplings::new([1.0, 1.0, 0.5, 0.5]).unwrap());
        assert_eq!(k[(0, 1)], 1.0);
        assert_eq!(k[(1, 2)], 1.0);
        assert_eq!(k[(2, 3)], 0.5);
        assert_eq!(k[(3, 0)], 0.5);
        assert_eq!(k[(0, 2)], 0.0);
        assert_eq!(k[(1, 3)], 0.0);
        assert_eq!(k, k.transpose());
    }

    #[test]
    fn negative_coupling_rejected() {
        assert!(EffectiveCouplings::new([1.0, -0.1, 1.0, 1.0]).is_err());
    }

    #[test]
    fn zero_time_is_identity() {
        for method in [PropagatorMethod::General, PropagatorMethod::ClosedEqual, PropagatorMethod::ClosedPaired] {
            let p = propagator(&EffectiveCouplings::equal(0.7).unwrap(), 0.0, method).unwrap();
            assert!(max_abs(&p.mx, &Matrix4::identity()) < 1e-15);
            assert!(max_abs(&p.my, &Matrix4::identity()) < 1e-15);
        }
    }

    #[test]
    fn equal_coefficients_at_unit_time() {
        let xi = EffectiveCouplings::equal(1.0).unwrap();
        let a = 1f64.cosh().powi(2);
        let b = 0.5 * 2f64.sinh();
        let c = 1f64.sinh().powi(2);
        for method in [PropagatorMethod::General, PropagatorMethod::ClosedEqual] {
            let p = propagator(&xi, 1.0, method).unwrap();
            for i in 0..4 {
                assert!((p.mx[(i, i)] - a).abs() < 1e-12);
                assert!((p.mx[(i, (i + 1) % 4)] - b).abs() < 1e-12);
                assert!((p.mx[(i, (i + 2) % 4)] - c).abs() < 1e-12);
                assert!((p.my[(i, (i + 1) % 4)] + b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn paired_matches_general() {
        let xi = EffectiveCouplings::new([1.0, 1.0, 0.5, 0.5]).unwrap();
        let closed = propagator(&xi, 0.7, PropagatorMethod::ClosedPaired).unwrap();
        let general = propagator(&xi, 0.7, PropagatorMethod::General).unwrap();
        assert!(max_abs(&closed.mx, &general.mx) <= 1e-12);
        assert!(max_abs(&closed.my, &general.my) <= 1e-12);
    }

    #[test]
    fn general_matches_taylor_oracle() {
        let xi = EffectiveCouplings::new([0.3, 1.1, 0.0, 0.8]).unwrap();
        let k = coupling_matrix(&xi);
        for t in [0.1, 0.9, 2.5] {
            let p = propagator(&xi, t, PropagatorMethod::General).unwrap();
            let ex = expm_taylor(k * t);
            let ey = expm_taylor(-k * t);
            let scale = ex.amax();
            assert!(max_abs(&p.mx, &ex) <= 1e-12 * scale);
            assert!(max_abs(&p.my, &ey) <= 1e-12 * scale);
        }
    }

    #[test]
    fn method_mismatch() {
        let xi = EffectiveCouplings::new([1.0, 1.0, 0.5, 0.5]).unwrap();
        assert!(matches!(
            propagator(&xi, 1.0, PropagatorMethod::ClosedEqual),
            Err(Error::MethodMismatch { method: "ClosedEqual", .. })
        ));
        let xi = EffectiveCouplings::new([1.0, 0.5, 1.0, 0.5]).unwrap();
        assert!(matches!(
            propagator(&xi, 1.0, PropagatorMethod::ClosedPaired),
            Err(Error::MethodMismatch { method: "ClosedPaired", .. })
        ));
    }

    #[test]
    fn vacuum_covariance() {
        assert_eq!(
            quad_covariance(&PropagatorPair::identity()),
            QuadCovariance::identity()
        );
    }

    #[test]
    fn equal_covariance_list() {
        let s: f64 = 0.8;
        let (a, b, c) = (s.cosh().powi(2), 0.5 * (2.0 * s).sinh(), s.sinh().powi(2));
        let cov = quad_covariance(&propagator(&EffectiveCouplings::equal(1.0).unwrap(), s, PropagatorMethod::ClosedEqual).unwrap());
        let tol = 1e-12 * cov.matrix().amax();
        for i in 0..4 {
            assert!((cov.x(i, i) - (a * a + 2.0 * b * b + c * c)).abs() < tol);
            assert!((cov.y(i, i) - (a * a + 2.0 * b * b + c * c)).abs() < tol);
        }
        let near = 2.0 * (a * b + b * c);
        let opp = 2.0 * (a * c + b * b);
        for (i, j) in [(0, 1), (0, 3), (1, 2), (2, 3)] {
            assert!((cov.x(i, j) - near).abs() < tol);
            assert!((cov.y(i, j) + near).abs() < tol);
        }
        for (i, j) in [(0, 2), (1, 3)] {
            assert!((cov.x(i, j) - opp).abs() < tol);
            assert!((cov.y(i, j) - opp).abs() < tol);
        }
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(cov.matrix()[(i, 4 + j)], 0.0);
            }
        }
    }

    #[test]
    fn paired_covariance_list() {
        let (x1, t) = (1.0, 0.6);
        let p = propagator(&EffectiveCouplings::paired(x1, 0.5 * x1).unwrap(), t, PropagatorMethod::ClosedPaired).unwrap();
        let cov = quad_covariance(&p);
        // coefficients by position in the mode-6 and mode-8 rows
        let e = p.mx[(1, 0)];
        let h = p.mx[(1, 1)];
        let i = p.mx[(1, 3)];
        let g = p.mx[(3, 0)];
        let j = p.mx[(3, 3)];
        let tol = 1e-12 * cov.matrix().amax();
        assert!((cov.x(1, 1) - (2.0 * e * e + h * h + i * i)).abs() < tol);
        assert!((cov.y(1, 1) - (2.0 * e * e + h * h + i * i)).abs() < tol);
        assert!((cov.x(1, 3) - (2.0 * e * g + h * i + i * j)).abs() < tol);
        assert!((cov.y(1, 3) - (2.0 * e * g + h * i + i * j)).abs() < tol);
    }

    #[test]
    fn v3_literal_at_origin() {
        assert_eq!(v3_closed_form(1.0, 0.0), 4.0);
        assert_eq!(v3_closed_form(0.0, 5.0), 4.0);
    }

    #[test]
    fn grid_shape() {
        assert!(time_grid(3.0, 0).is_empty());
        assert_eq!(time_grid(3.0, 1), vec![0.0]);
        let g = time_grid(3.0, 301);
        assert_eq!(g.len(), 301);
        assert_eq!(g[300], 3.0);
        assert!((g[1] - 0.01).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn semigroup_and_commutators(
            xi in proptest::array::uniform4(0.0f64..1.5),
            t in 0.0f64..1.5,
            s in 0.0f64..1.5,
        ) {
            let xi = EffectiveCouplings::new(xi).unwrap();
            let pt = propagator(&xi, t, PropagatorMethod::General).unwrap();
            let ps = propagator(&xi, s, PropagatorMethod::General).unwrap();
            let pts = propagator(&xi, t + s, PropagatorMethod::General).unwrap();
            let scale = pts.mx.amax().max(1.0);
            prop_assert!(max_abs(&(pt.mx * ps.mx), &pts.mx) <= 1e-10 * scale);
            prop_assert!(max_abs(&(pt.mx * pt.my.transpose()), &Matrix4::identity()) <= 1e-12 * pt.mx.amax().powi(2).max(1.0));
        }

        #[test]
        fn covariance_is_psd(xi in proptest::array::uniform4(0.0f64..1.0), t in 0.0f64..3.0) {
            let xi = EffectiveCouplings::new(xi).unwrap();
            let cov = quad_covariance(&propagator(&xi, t, PropagatorMethod::General).unwrap());
            let m = cov.matrix();
            prop_assert_eq!(*m, m.transpose());
            let min = SymmetricEigen::new(*m).eigenvalues.min();
            prop_assert!(min >= -1e-10 * m.amax().max(1.0));
        }
    }
}
