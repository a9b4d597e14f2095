//! Finite-difference gradient checking.
//!
//! The checker re-runs a forward builder under single-coordinate
//! perturbations (central differences, `f64`) and compares against the
//! tape's reverse-mode gradients. Relative error uses a unit floor —
//! `|a - n| / max(1, |a|, |n|)` — so coordinates whose true gradient is
//! at the finite-difference noise floor (clamped or dead paths, ~1e-9)
//! do not produce spurious failures, while any real discrepancy on a
//! gradient of visible magnitude is caught.

use crate::numeric::params::ModelParams;
use crate::numeric::tape::{NodeId, Tape};
use crate::numeric::NumericError;

/// Outcome of a gradient check over every flat coordinate.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name and within-tensor offset of the worst coordinate.
    pub worst_param: String,
    pub worst_offset: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub coords_checked: usize,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "max rel err {:.3e} over {} coords (worst: {}[{}], analytic {:.6e}, numeric {:.6e})",
            self.max_rel_err,
            self.coords_checked,
            self.worst_param,
            self.worst_offset,
            self.analytic_at_worst,
            self.numeric_at_worst
        )
    }
}

/// Evaluate the builder once and return (loss, flat analytic gradients).
/// The error type is the builder's own; anything that can wrap a
/// [`NumericError`] works, so whole-model losses check without adapters.
pub fn analytic_grads<B, E>(build: &B, params: &ModelParams<f64>) -> Result<(f64, Vec<f64>), E>
where
    B: Fn(&mut Tape<f64>, &ModelParams<f64>) -> Result<NodeId, E>,
    E: From<NumericError>,
{
    let mut tape = Tape::new();
    let root = build(&mut tape, params)?;
    let bp = tape.backward(root)?;
    let flat = tape.flat_param_grads(&bp, params);
    Ok((tape.scalar_value(root), flat))
}

/// Central finite differences of the builder's scalar output over every
/// flat parameter coordinate.
pub fn finite_diff<B, E>(build: &B, params: &ModelParams<f64>, h: f64) -> Result<Vec<f64>, E>
where
    B: Fn(&mut Tape<f64>, &ModelParams<f64>) -> Result<NodeId, E>,
    E: From<NumericError>,
{
    let eval = |p: &ModelParams<f64>| -> Result<f64, E> {
        let mut tape = Tape::new();
        let root = build(&mut tape, p)?;
        Ok(tape.scalar_value(root))
    };
    let mut work = params.clone();
    let mut out = Vec::with_capacity(params.flat_len());
    for i in 0..params.flat_len() {
        let orig = work.get_coord(i);
        work.set_coord(i, orig + h);
        let plus = eval(&work)?;
        work.set_coord(i, orig - h);
        let minus = eval(&work)?;
        work.set_coord(i, orig);
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

/// Compare two flat gradient vectors; `describe` maps a flat coordinate to
/// (parameter name, within-tensor offset) for reporting.
pub fn compare_grads(
    analytic: &[f64],
    numeric: &[f64],
    describe: impl Fn(usize) -> (String, usize),
) -> GradCheckReport {
    assert_eq!(analytic.len(), numeric.len());
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_offset: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        coords_checked: analytic.len(),
    };
    for (i, (&a, &n)) in analytic.iter().zip(numeric.iter()).enumerate() {
        let rel = (a - n).abs() / 1.0f64.max(a.abs()).max(n.abs());
        if rel > report.max_rel_err {
            let (name, off) = describe(i);
            report.max_rel_err = rel;
            report.worst_param = name;
            report.worst_offset = off;
            report.analytic_at_worst = a;
            report.numeric_at_worst = n;
        }
    }
    report
}

/// Full check: reverse-mode vs central differences with step `h` for every
/// parameter coordinate. The builder must be deterministic — callers
/// freeze noise draws and negative samples as tape constants.
pub fn grad_check<B, E>(build: B, params: &ModelParams<f64>, h: f64) -> Result<GradCheckReport, E>
where
    B: Fn(&mut Tape<f64>, &ModelParams<f64>) -> Result<NodeId, E>,
    E: From<NumericError>,
{
    let (_, analytic) = analytic_grads(&build, params)?;
    let numeric = finite_diff(&build, params, h)?;
    Ok(compare_grads(&analytic, &numeric, |i| {
        params.describe_coord(i)
    }))
}
