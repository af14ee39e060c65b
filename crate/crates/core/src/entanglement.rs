//! Optimised van Loock–Furusawa criteria for the four low-frequency modes.
//!
//! The three inequalities
//!
//! ```text
//! V(X5 - X6) + V(   Y5 +    Y6 + g7 Y7 + g8 Y8) >= 4
//! V(X6 - X7) + V(g5 Y5 +    Y6 +    Y7 + g8 Y8) >= 4
//! V(X7 - X8) + V(g5 Y5 + g6 Y6 +    Y7 +    Y8) >= 4
//! ```
//!
//! must all be violated to certify quadripartite entanglement. The gains
//! `g7, g8` minimise the first sum and `g5, g6` the third; the middle
//! inequality reuses `g5` and `g8` from those two minimisations.
//!
//! Everything here works on a [`QuadCovariance`] and does not care whether it
//! came from the undepleted-pump moments or from an output spectrum.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};

use crate::error::{Error, Result};

/// Bound of each inequality in the uncorrelated limit.
pub const VLF_BOUND: f64 = 4.0;

/// Smallest admissible magnitude of `V56^2 - V5 V6` and `V78^2 - V7 V8`.
pub const DEGENERACY_TOL: f64 = 1e-12;

pub type Matrix8 = SMatrix<f64, 8, 8>;
type Vector8 = SVector<f64, 8>;

/// Symmetrised second moments over `(X5, X6, X7, X8, Y5, Y6, Y7, Y8)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadCovariance {
    m: Matrix8,
}

impl QuadCovariance {
    /// Wraps a matrix, rejecting non-finite or visibly asymmetric input.
    pub fn new(m: Matrix8) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("covariance has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        let asym = (m - m.transpose()).amax();
        if asym > 1e-9 * scale {
            return Err(Error::InvalidInput(format!(
                "covariance is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self {
            m: (m + m.transpose()) * 0.5,
        })
    }

    /// Vacuum: unit variance in every quadrature, no correlations.
    pub fn identity() -> Self {
        Self { m: Matrix8::identity() }
    }

    pub fn matrix(&self) -> &Matrix8 {
        &self.m
    }

    /// `<X_{5+i} X_{5+j}>`-type entry of the amplitude block.
    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Entry of the phase-quadrature block; `y(0, 1)` is `V56`.
    pub fn y(&self, i: usize, j: usize) -> f64 {
        self.m[(4 + i, 4 + j)]
    }

    /// Variance of the linear combination `coeffs . (X5..X8, Y5..Y8)`.
    pub fn variance_of(&self, coeffs: &[f64; 8]) -> f64 {
        let c = Vector8::from_column_slice(coeffs);
        (c.transpose() * self.m * c)[(0, 0)]
    }
}

/// The four free gains of the inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GainVector {
    pub g5: f64,
    pub g6: f64,
    pub g7: f64,
    pub g8: f64,
}

impl GainVector {
    pub fn new(g5: f64, g6: f64, g7: f64, g8: f64) -> Self {
        Self { g5, g6, g7, g8 }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.g5, self.g6, self.g7, self.g8]
    }
}

/// Left-hand sides of the three inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VlfCorrelations {
    pub v56: f64,
    pub v67: f64,
    pub v78: f64,
}

impl VlfCorrelations {
    pub fn as_array(&self) -> [f64; 3] {
        [self.v56, self.v67, self.v78]
    }

    /// True when all three inequalities are violated.
    pub fn all_violated(&self) -> bool {
        self.as_array().iter().all(|v| *v < VLF_BOUND)
    }
}

/// Optimised correlations together with the gains that produced them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VlfOptimized {
    pub correlations: VlfCorrelations,
    pub gains: GainVector,
}

/// Closed-form minimising gains, with every moment read from the Y block.
pub fn optimal_gains(cov: &QuadCovariance) -> Result<GainVector> {
    let v = |i: usize, j: usize| cov.y(i - 5, j - 5);

    let den56 = v(5, 6).powi(2) - v(5, 5) * v(6, 6);
    let den78 = v(7, 8).powi(2) - v(7, 7) * v(8, 8);
    for den in [den56, den78] {
        if den.abs() < DEGENERACY_TOL {
            return Err(Error::DegenerateCovariance {
                denominator: den,
                tolerance: DEGENERACY_TOL,
            });
        }
    }

    let s57_58 = v(5, 7) + v(5, 8);
    let s67_68 = v(6, 7) + v(6, 8);
    let s57_67 = v(5, 7) + v(6, 7);
    let s58_68 = v(5, 8) + v(6, 8);

    Ok(GainVector {
        g5: (v(6, 6) * s57_58 - v(5, 6) * s67_68) / den56,
        g6: (v(5, 5) * s67_68 - v(5, 6) * s57_58) / den56,
        g7: (v(8, 8) * s57_67 - v(7, 8) * s58_68) / den78,
        g8: (v(7, 7) * s58_68 - v(7, 8) * s57_67) / den78,
    })
}

/// Evaluates the three inequality left-hand sides at the given gains.
pub fn vlf_correlations(cov: &QuadCovariance, g: &GainVector) -> VlfCorrelations {
    // (X5, X6, X7, X8, Y5, Y6, Y7, Y8)
    let v56 = cov.variance_of(&[1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        + cov.variance_of(&[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, g.g7, g.g8]);
    let v67 = cov.variance_of(&[0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        + cov.variance_of(&[0.0, 0.0, 0.0, 0.0, g.g5, 1.0, 1.0, g.g8]);
    let v78 = cov.variance_of(&[0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0])
        + cov.variance_of(&[0.0, 0.0, 0.0, 0.0, g.g5, g.g6, 1.0, 1.0]);
    VlfCorrelations { v56, v67, v78 }
}

pub fn vlf_optimized(cov: &QuadCovariance) -> Result<VlfOptimized> {
    let gains = optimal_gains(cov)?;
    Ok(VlfOptimized {
        correlations: vlf_correlations(cov, &gains),
        gains,
    })
}

/// Exploratory variant: minimises the middle inequality over its own
/// `(g5, g8)` instead of borrowing them from the outer two. Returns the
/// minimised `V67` and the gains used. Not part of the standard criterion.
pub fn middle_reoptimized(cov: &QuadCovariance) -> Result<(f64, GainVector)> {
    let v = |i: usize, j: usize| cov.y(i - 5, j - 5);
    let h = Matrix2::new(v(5, 5), v(5, 8), v(5, 8), v(8, 8));
    let rhs = -Vector2::new(v(5, 6) + v(5, 7), v(6, 8) + v(7, 8));
    let det = h.determinant();
    if det.abs() < DEGENERACY_TOL {
        return Err(Error::DegenerateCovariance {
            denominator: det,
            tolerance: DEGENERACY_TOL,
        });
    }
    let sol = h.lu().solve(&rhs).ok_or(Error::DegenerateCovariance {
        denominator: det,
        tolerance: DEGENERACY_TOL,
    })?;
    let mut gains = optimal_gains(cov)?;
    gains.g5 = sol[0];
    gains.g8 = sol[1];
    Ok((vlf_correlations(cov, &gains).v67, gains))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_pd(entries: &[f64]) -> QuadCovariance {
        let a = Matrix8::from_iterator(entries.iter().copied());
        QuadCovariance::new(a * a.transpose() + Matrix8::identity() * 0.1).unwrap()
    }

    #[test]
    fn vacuum_gives_four_with_zero_gains() {
        let r = vlf_optimized(&QuadCovariance::identity()).unwrap();
        assert_eq!(r.gains, GainVector::default());
        for v in r.correlations.as_array() {
            assert!((v - 4.0).abs() < 1e-12);
        }
        assert!(!r.correlations.all_violated());
    }

    #[test]
    fn vacuum_with_unit_gains() {
        let c = vlf_correlations(&QuadCovariance::identity(), &GainVector::new(1.0, 1.0, 1.0, 1.0));
        assert_eq!(c.as_array(), [6.0, 6.0, 6.0]);
    }

    #[test]
    fn forced_singular_denominator() {
        let mut m = Matrix8::identity();
        // V56^2 = V5 V6 with nonzero numerators
        m[(4, 5)] = 1.0;
        m[(5, 4)] = 1.0;
        m[(4, 6)] = 0.3;
        m[(6, 4)] = 0.3;
        let cov = QuadCovariance::new(m).unwrap();
        assert!(matches!(
            optimal_gains(&cov),
            Err(Error::DegenerateCovariance { .. })
        ));
        assert!(matches!(
            vlf_optimized(&cov),
            Err(Error::DegenerateCovariance { .. })
        ));
    }

    #[test]
    fn asymmetric_input_rejected() {
        let mut m = Matrix8::identity();
        m[(0, 1)] = 0.5;
        assert!(QuadCovariance::new(m).is_err());
        m[(1, 0)] = f64::NAN;
        assert!(QuadCovariance::new(m).is_err());
    }

    #[test]
    fn reoptimized_middle_never_worse() {
        let entries: Vec<f64> = (0..64).map(|k| ((k * 37 % 17) as f64 - 8.0) / 9.0).collect();
        let cov = random_pd(&entries);
        let std = vlf_optimized(&cov).unwrap();
        let (v67, _) = middle_reoptimized(&cov).unwrap();
        assert!(v67 <= std.correlations.v67 + 1e-12);
    }

    proptest! {
        #[test]
        fn gains_are_local_minima(entries in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let cov = random_pd(&entries);
            let opt = vlf_optimized(&cov).unwrap();
            let g = opt.gains;
            for (d7, d8) in [(0.01, 0.0), (-0.01, 0.0), (0.0, 0.01), (0.0, -0.01), (0.01, 0.01), (-0.01, 0.01)] {
                let p = GainVector { g7: g.g7 + d7, g8: g.g8 + d8, ..g };
                prop_assert!(vlf_correlations(&cov, &p).v56 >= opt.correlations.v56 - 1e-12);
                let p = GainVector { g5: g.g5 + d7, g6: g.g6 + d8, ..g };
                prop_assert!(vlf_correlations(&cov, &p).v78 >= opt.correlations.v78 - 1e-12);
            }
        }

        #[test]
        fn gains_invariant_under_y_block_scaling(
            entries in proptest::collection::vec(-1.0f64..1.0, 64),
            s in 0.01f64..100.0,
        ) {
            let cov = random_pd(&entries);
            let mut m = *cov.matrix();
            for i in 4..8 {
                for j in 4..8 {
                    m[(i, j)] *= s;
                }
            }
            let scaled = QuadCovariance::new(m).unwrap();
            let a = optimal_gains(&cov).unwrap().as_array();
            let b = optimal_gains(&scaled).unwrap().as_array();
            for k in 0..4 {
                prop_assert!((a[k] - b[k]).abs() <= 1e-9 * (1.0 + a[k].abs()));
            }
        }
    }
}
