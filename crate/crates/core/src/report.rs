//! CSV rendering.
//!
//! Every table starts with `#` comment lines recording the tool version, the
//! command and the fully resolved inputs, followed by one header row. Numbers
//! are written with 17 significant digits so they round-trip exactly.

use std::fmt::Write as _;

use crate::analytic::{v3_closed_form, vlf_at, EffectiveCouplings, PropagatorMethod};
use crate::config::render;
use crate::error::Result;
use crate::meanfield::{MeanState, Regime};
use crate::model::SystemParams;
use crate::spectra::{PumpScanRow, SpectrumTable, StabilityReport};
use crate::stochastic::{alpha_index, alpha_plus_index, EnsembleMoments};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Full-precision scientific notation.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Comment block: version, command, extra `key = value` settings and the
/// resolved parameters if there are any.
pub fn header(command: &str, settings: &[(&str, String)], params: Option<&SystemParams>) -> String {
    let mut s = format!("# quadopo {VERSION}\n# command = {command}\n");
    for (k, v) in settings {
        let _ = writeln!(s, "# {k} = {v}");
    }
    if let Some(p) = params {
        for line in render(p).lines() {
            let _ = writeln!(s, "# {line}");
        }
    }
    s
}

fn row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let cells: Vec<String> = cells.into_iter().collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// Undepleted-pump correlations over a time grid. In `ClosedEqual` mode a
/// final column carries the literal printed closed form for comparison.
pub fn analytic_csv(xi: &EffectiveCouplings, method: PropagatorMethod, times: &[f64]) -> Result<String> {
    let equal = method == PropagatorMethod::ClosedEqual;
    let x = xi.values();
    let mut out = header(
        "analytic",
        &[
            ("xi", x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ")),
            ("method", format!("{method:?}")),
        ],
        None,
    );
    let mut cols = vec!["t", "V56", "V67", "V78", "g5", "g6", "g7", "g8"];
    if equal {
        cols.push("v3_closed_form");
    }
    out.push_str(&cols.join(","));
    out.push('\n');
    for &t in times {
        let r = vlf_at(xi, t, method)?;
        let mut cells = vec![num(t)];
        cells.extend(r.correlations.as_array().map(num));
        cells.extend(r.gains.as_array().map(num));
        if equal {
            cells.push(num(v3_closed_form(x[0], t)));
        }
        row(&mut out, cells);
    }
    Ok(out)
}

pub fn steady_csv(params: &SystemParams, state: &MeanState, regime: Regime, residual: f64) -> String {
    let mut out = header("steady", &[], Some(params));
    out.push_str("mode,re,im,abs\n");
    for (m, a) in state.alpha.iter().enumerate() {
        row(&mut out, [(m + 1).to_string(), num(a.re), num(a.im), num(a.norm())]);
    }
    let _ = writeln!(out, "# regime = {}", regime.label());
    let _ = writeln!(out, "# residual = {}", num(residual));
    out
}

pub fn stability_csv(params: &SystemParams, report: &StabilityReport) -> String {
    let mut out = header(
        "stability",
        &[
            ("max_real", num(report.max_real)),
            ("stable", report.is_stable.to_string()),
        ],
        Some(params),
    );
    out.push_str("index,re,im,neutral\n");
    let mut neutral_seen = false;
    for (k, l) in report.eigenvalues.iter().enumerate() {
        let neutral = !neutral_seen && report.neutral == Some(*l);
        neutral_seen |= neutral;
        row(&mut out, [k.to_string(), num(l.re), num(l.im), neutral.to_string()]);
    }
    out
}

pub fn spectrum_csv(params: &SystemParams, settings: &[(&str, String)], table: &SpectrumTable) -> String {
    let mut out = header("spectrum", settings, Some(params));
    out.push_str("omega,I56,I67,I78,g5,g6,g7,g8,stable\n");
    for r in &table.rows {
        let mut cells = vec![num(r.omega)];
        cells.extend(r.correlations.as_array().map(num));
        cells.extend(r.gains.as_array().map(num));
        cells.push("true".into());
        row(&mut out, cells);
    }
    out
}

/// Pump-ratio scan. Rows that failed carry `NaN` values, `stable = false`
/// and the error name in a trailing column.
pub fn scan_pump_csv(params: &SystemParams, settings: &[(&str, String)], rows: &[PumpScanRow]) -> String {
    let mut out = header("scan-pump", settings, Some(params));
    out.push_str("ratio,I56,I67,I78,g5,g6,g7,g8,stable,error\n");
    for r in rows {
        let mut cells = vec![num(r.ratio)];
        match &r.outcome {
            Ok(p) => {
                cells.extend(p.minima.map(num));
                cells.extend(p.gains.as_array().map(num));
                cells.push("true".into());
                cells.push(String::new());
            }
            Err(e) => {
                cells.extend(std::iter::repeat_n("NaN".to_string(), 7));
                cells.push("false".into());
                cells.push(e.name().into());
            }
        }
        row(&mut out, cells);
    }
    out
}

/// Ensemble summary: the mean of every field and the normally ordered
/// low-mode moments `<a_j+ a_i>` and `<a_i a_j>`, with standard errors.
pub fn sde_csv(params: &SystemParams, settings: &[(&str, String)], m: &EnsembleMoments) -> String {
    let mut settings = settings.to_vec();
    settings.push(("n_traj", m.n_traj.to_string()));
    settings.push(("n_diverged", m.n_diverged.to_string()));
    let mut out = header("sde", &settings, Some(params));
    out.push_str("quantity,re,im,stderr_re,stderr_im\n");
    let mut emit = |name: String, v: num_complex::Complex64, e: num_complex::Complex64| {
        row(&mut out, [name, num(v.re), num(v.im), num(e.re), num(e.im)]);
    };
    for mode in 0..8 {
        let k = alpha_index(mode);
        emit(format!("a{}", mode + 1), m.mean[k], m.mean_stderr[k]);
        let k = alpha_plus_index(mode);
        emit(format!("a{}+", mode + 1), m.mean[k], m.mean_stderr[k]);
    }
    for i in 4..8 {
        for j in i..8 {
            let (v, e) = m.normal_moment(i, j);
            emit(format!("a{}+ a{}", j + 1, i + 1), v, e);
        }
    }
    for i in 4..8 {
        for j in i..8 {
            let (k, l) = (alpha_index(i), alpha_index(j));
            emit(format!("a{} a{}", i + 1, j + 1), m.second[(k, l)], m.second_stderr[(k, l)]);
        }
    }
    out
}

/// Data rows of a CSV produced here, parsed back to numbers. Comment lines
/// and the header row are skipped; non-numeric cells become `None`.
pub fn parse_rows(csv: &str) -> Vec<Vec<Option<f64>>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse::<f64>().ok()).collect())
        .collect()
}
