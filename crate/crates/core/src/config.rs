//! Flat `key = value` parameter files.
//!
//! ```text
//! # symmetric cavity below threshold
//! gamma = 10
//! kappa = 1
//! chi   = 0.01
//! eps   = 400
//! eps3  = 410   # per-mode keys override the shorthand
//! ```
//!
//! Recognised keys are `chi1..chi4`, `eps1..eps4`, `gamma1..gamma4`,
//! `kappa1..kappa4` and the shorthands `chi`, `eps`, `gamma`, `kappa` that set
//! all four entries. `#` starts a comment.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::SystemParams;

const GROUPS: [&str; 4] = ["chi", "eps", "gamma", "kappa"];

/// Partially specified parameters; every slot must be filled before
/// [`ParamSet::resolve`] succeeds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    slots: [[Option<f64>; 4]; 4],
}

impl ParamSet {
    pub fn parse(text: &str) -> Result<Self> {
        let mut shorthand: [Option<f64>; 4] = [None; 4];
        let mut explicit = ParamSet::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                reason: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| Error::Config {
                line,
                reason: format!("`{}` is not a number", value.trim()),
            })?;
            match parse_key(key) {
                Some((g, None)) => shorthand[g] = Some(value),
                Some((g, Some(i))) => explicit.slots[g][i] = Some(value),
                None => {
                    return Err(Error::Config {
                        line,
                        reason: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        for g in 0..4 {
            for i in 0..4 {
                if explicit.slots[g][i].is_none() {
                    explicit.slots[g][i] = shorthand[g];
                }
            }
        }
        Ok(explicit)
    }

    pub fn from_params(p: &SystemParams) -> Self {
        let mut s = ParamSet::default();
        for (g, values) in [p.chi, p.eps, p.gamma, p.kappa].iter().enumerate() {
            for i in 0..4 {
                s.slots[g][i] = Some(values[i]);
            }
        }
        s
    }

    /// Sets one key (shorthand or per-mode); later calls win.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match parse_key(key) {
            Some((g, None)) => self.slots[g] = [Some(value); 4],
            Some((g, Some(i))) => self.slots[g][i] = Some(value),
            None => return Err(Error::InvalidInput(format!("unknown parameter `{key}`"))),
        }
        Ok(())
    }

    /// Overlays every slot that `other` defines.
    pub fn merge(&mut self, other: &ParamSet) {
        for g in 0..4 {
            for i in 0..4 {
                if let Some(v) = other.slots[g][i] {
                    self.slots[g][i] = Some(v);
                }
            }
        }
    }

    pub fn resolve(&self) -> Result<SystemParams> {
        let mut out = [[0.0; 4]; 4];
        for g in 0..4 {
            for i in 0..4 {
                out[g][i] = self.slots[g][i].ok_or_else(|| {
                    Error::InvalidInput(format!("missing parameter `{}{}`", GROUPS[g], i + 1))
                })?;
            }
        }
        Ok(SystemParams {
            chi: out[0],
            eps: out[1],
            gamma: out[2],
            kappa: out[3],
        })
    }
}

fn parse_key(key: &str) -> Option<(usize, Option<usize>)> {
    let g = GROUPS.iter().position(|name| key.starts_with(name))?;
    match &key[GROUPS[g].len()..] {
        "" => Some((g, None)),
        "1" => Some((g, Some(0))),
        "2" => Some((g, Some(1))),
        "3" => Some((g, Some(2))),
        "4" => Some((g, Some(3))),
        _ => None,
    }
}

/// Renders parameters in the same format [`ParamSet::parse`] reads, one
/// per-mode key per line, at full round-trip precision.
pub fn render(p: &SystemParams) -> String {
    let mut s = String::new();
    for (g, values) in [p.chi, p.eps, p.gamma, p.kappa].iter().enumerate() {
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(s, "{}{} = {:?}", GROUPS[g], i + 1, v);
        }
    }
    s
}
