//! Physical parameters and the ring coupling topology.
//!
//! All quantities are rates in units where the low-mode loss is of order one.
//! Modes are labelled 1..=8 as in the usual notation: 1..=4 are the pumped
//! (high-frequency) modes, 5..=8 the downconverted low-frequency modes.
//!
//! Threshold convention: every pump drives two downconversion processes, so
//! the symmetric oscillation threshold is `eps_c = gamma * kappa / (2 * chi)`,
//! half the value of a single non-degenerate OPO with the same rates.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Raw physical constants. Use [`SystemParams::validate`] before handing them
/// to any of the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Nonlinear couplings chi_1..chi_4.
    pub chi: [f64; 4],
    /// Real, nonnegative pump amplitudes eps_1..eps_4.
    pub eps: [f64; 4],
    /// Pump-mode loss rates gamma_1..gamma_4.
    pub gamma: [f64; 4],
    /// Low-mode loss rates for modes 5..8.
    pub kappa: [f64; 4],
}

impl SystemParams {
    pub fn symmetric(chi: f64, eps: f64, gamma: f64, kappa: f64) -> Self {
        Self {
            chi: [chi; 4],
            eps: [eps; 4],
            gamma: [gamma; 4],
            kappa: [kappa; 4],
        }
    }

    /// Same system with every pump set to `eps`.
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = [eps; 4];
        self
    }

    pub fn is_symmetric(&self) -> bool {
        fn all_equal(v: &[f64; 4]) -> bool {
            v.iter().all(|x| *x == v[0])
        }
        all_equal(&self.chi) && all_equal(&self.eps) && all_equal(&self.gamma) && all_equal(&self.kappa)
    }

    /// Checks every invariant and returns the parameters unchanged on success.
    /// The error names the first violated invariant.
    pub fn validate(self) -> Result<ValidatedParams> {
        let groups: [(&str, &[f64; 4]); 4] = [
            ("chi", &self.chi),
            ("eps", &self.eps),
            ("gamma", &self.gamma),
            ("kappa", &self.kappa),
        ];
        for (name, values) in groups {
            for (i, v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(domain(name, i, format!("must be finite, got {v}")));
                }
            }
        }
        for (name, values) in [("gamma", &self.gamma), ("kappa", &self.kappa)] {
            if let Some(i) = values.iter().position(|v| *v <= 0.0) {
                return Err(domain(
                    name,
                    i,
                    format!("loss rate must be strictly positive, got {}", values[i]),
                ));
            }
        }
        if let Some(i) = self.chi.iter().position(|v| *v < 0.0) {
            return Err(domain(
                "chi",
                i,
                format!("coupling sign: must be nonnegative, got {}", self.chi[i]),
            ));
        }
        if let Some(i) = self.eps.iter().position(|v| *v < 0.0) {
            return Err(domain(
                "eps",
                i,
                format!("pump amplitude must be nonnegative, got {}", self.eps[i]),
            ));
        }
        Ok(ValidatedParams(self))
    }
}

fn domain(name: &str, index: usize, reason: String) -> Error {
    Error::Domain {
        field: format!("{name}{}", index + 1),
        reason,
    }
}

/// Parameters that passed [`SystemParams::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams(SystemParams);

impl ValidatedParams {
    pub fn into_inner(self) -> SystemParams {
        self.0
    }

    /// Same system with every pump set to `eps` (revalidated).
    pub fn with_eps(self, eps: f64) -> Result<Self> {
        self.0.with_eps(eps).validate()
    }

    /// Common value of a symmetric parameter set as `(chi, eps, gamma, kappa)`.
    pub fn symmetric_values(&self) -> Result<(f64, f64, f64, f64)> {
        if !self.is_symmetric() {
            return Err(Error::Symmetry);
        }
        Ok((self.chi[0], self.eps[0], self.gamma[0], self.kappa[0]))
    }
}

impl Deref for ValidatedParams {
    type Target = SystemParams;

    fn deref(&self) -> &SystemParams {
        &self.0
    }
}

/// Critical pump amplitude `gamma * kappa / (2 chi)` of the symmetric system.
pub fn threshold_pump(params: &ValidatedParams) -> Result<f64> {
    let (chi, _, gamma, kappa) = params.symmetric_values()?;
    if chi == 0.0 {
        return Err(Error::Domain {
            field: "chi".into(),
            reason: "threshold is undefined without nonlinear coupling".into(),
        });
    }
    Ok(gamma * kappa / (2.0 * chi))
}

/// The fixed ring of downconversion processes: pump 1 feeds (5,6), pump 2
/// feeds (6,7), pump 3 feeds (7,8) and pump 4 feeds (8,5).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CouplingTopology;

impl CouplingTopology {
    /// Low-mode pairs per pump, as mode labels.
    pub const PAIRS: [(usize, usize); 4] = [(5, 6), (6, 7), (7, 8), (8, 5)];

    /// Low-mode pair of pump `p` (zero-based) as zero-based low-mode indices
    /// (0 = mode 5).
    pub const fn low_pair(p: usize) -> (usize, usize) {
        let (a, b) = Self::PAIRS[p];
        (a - 5, b - 5)
    }

    /// For zero-based low mode `j`, the two (pump, partner) couplings that
    /// feed it, both zero-based.
    pub fn feeds(j: usize) -> [(usize, usize); 2] {
        let mut out = [(usize::MAX, usize::MAX); 2];
        let mut n = 0;
        for p in 0..4 {
            let (a, b) = Self::low_pair(p);
            if a == j {
                out[n] = (p, b);
                n += 1;
            } else if b == j {
                out[n] = (p, a);
                n += 1;
            }
        }
        debug_assert_eq!(n, 2);
        out
    }
}
