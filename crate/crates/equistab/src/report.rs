//! Benchmark-style report for one orbit: group generators, action value,
//! gradient norm, Morse indices with extreme eigenvalues, and the maximal
//! Floquet multiplier modulus.

use std::fmt;

use nalgebra::DVector;

use crate::action::{action_reduced, grad_action_reduced};
use crate::dynamics::ProblemSpec;
use crate::error::Result;
use crate::floquet::{monodromy, stability_verdict, MonodromyOptions};
use crate::io::{GeneratorFile, TauFile};
use crate::morse::{morse_fundamental, morse_period, EpsZero, MorseResult};
use crate::symmetry::ReducedSpace;
use crate::TrigLoop;

/// Everything the `report` subcommand prints.
#[derive(Debug, Clone)]
pub struct ReportTable {
    pub generator_lines: Vec<String>,
    pub group_order: usize,
    pub kernel_order: usize,
    pub quotient_order: usize,
    pub action_value: f64,
    pub gradient_norm: f64,
    pub morse_fundamental: MorseResult,
    pub morse_period: MorseResult,
    pub max_multiplier: f64,
    pub stable: bool,
    pub equivariance_residual: f64,
}

/// Options controlling the indicator computations inside a report.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub monodromy: MonodromyOptions,
    pub grid: Option<usize>,
    pub eps_zero: EpsZero,
    pub stability_tol: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            monodromy: MonodromyOptions::default(),
            grid: None,
            eps_zero: EpsZero::Auto,
            stability_tol: 0.05,
        }
    }
}

fn format_generator(g: &GeneratorFile, index: usize) -> String {
    let tau = TauFile {
        kind: g.tau.kind.clone(),
        num: g.tau.num,
        den: g.tau.den,
    };
    let rho: Vec<String> = g.rho.iter().map(|v| format!("{v:.4}")).collect();
    let sigma: Vec<String> = g.sigma.iter().map(|s| s.to_string()).collect();
    format!(
        "g{}: rho = [{}], sigma = ({}), tau = {} {}/{}",
        index + 1,
        rho.join(", "),
        sigma.join(" "),
        tau.kind,
        tau.num,
        tau.den
    )
}

/// Compute all indicators for a converged orbit.
pub fn compute_report(
    spec: &ProblemSpec,
    rs: &ReducedSpace,
    lp: &TrigLoop,
    opts: &ReportOptions,
) -> Result<ReportTable> {
    let z: DVector<f64> = rs.reduce(lp.coeffs());
    let action = action_reduced(&z, rs, spec)?;
    let gradient_norm = grad_action_reduced(&z, rs, spec)?.norm();

    let fundamental = morse_fundamental(&z, rs, spec, opts.eps_zero)?;
    let grid = opts.grid.unwrap_or_else(|| spec.grid_size());
    let period = morse_period(lp, spec, grid, opts.eps_zero)?;

    let mono = monodromy(lp, spec, &opts.monodromy)?;
    let verdict = stability_verdict(&mono, opts.stability_tol);

    let generator_lines = spec
        .group()
        .generators()
        .iter()
        .map(GeneratorFile::from_element)
        .enumerate()
        .map(|(i, g)| format_generator(&g, i))
        .collect();

    Ok(ReportTable {
        generator_lines,
        group_order: spec.group().order(),
        kernel_order: spec.group().kernel_order(),
        quotient_order: spec.quotient_order(),
        action_value: action,
        gradient_norm,
        morse_fundamental: fundamental,
        morse_period: period,
        max_multiplier: mono.max_modulus,
        stable: verdict.stable,
        equivariance_residual: crate::symmetry::check_equivariance(lp, spec),
    })
}

fn fmt_max_negative(m: &MorseResult) -> String {
    match m.max_negative {
        Some(v) => format!("{v:.4}"),
        None => "---".to_string(),
    }
}

impl fmt::Display for ReportTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Group generator(s)")?;
        if self.generator_lines.is_empty() {
            writeln!(f, "  (trivial group)")?;
        }
        for line in &self.generator_lines {
            writeln!(f, "  {line}")?;
        }
        writeln!(
            f,
            "  |G| = {}, |ker tau| = {}, l = {}",
            self.group_order, self.kernel_order, self.quotient_order
        )?;
        writeln!(f, "Action value                     {:.4}", self.action_value)?;
        writeln!(f, "Gradient norm                    {:.2e}", self.gradient_norm)?;
        writeln!(
            f,
            "Morse (fund. domain)  index      {}",
            self.morse_fundamental.index
        )?;
        writeln!(
            f,
            "                      max neg.   {}",
            fmt_max_negative(&self.morse_fundamental)
        )?;
        writeln!(
            f,
            "Morse (period)        index      {}",
            self.morse_period.index
        )?;
        writeln!(
            f,
            "                      max neg.   {}",
            fmt_max_negative(&self.morse_period)
        )?;
        writeln!(
            f,
            "Floquet max |multiplier|         {:.4}  ({})",
            self.max_multiplier,
            if self.stable { "stable" } else { "unstable" }
        )?;
        Ok(())
    }
}

impl ReportTable {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "generators": self.generator_lines,
            "group_order": self.group_order,
            "kernel_order": self.kernel_order,
            "quotient_order": self.quotient_order,
            "action_value": self.action_value,
            "gradient_norm": self.gradient_norm,
            "morse_fundamental": {
                "index": self.morse_fundamental.index,
                "max_negative": self.morse_fundamental.max_negative,
                "near_zero_count": self.morse_fundamental.near_zero_count,
                "eps_zero": self.morse_fundamental.eps_zero,
            },
            "morse_period": {
                "index": self.morse_period.index,
                "max_negative": self.morse_period.max_negative,
                "near_zero_count": self.morse_period.near_zero_count,
                "eps_zero": self.morse_period.eps_zero,
            },
            "max_multiplier": self.max_multiplier,
            "stable": self.stable,
            "equivariance_residual": self.equivariance_residual,
        })
    }
}
