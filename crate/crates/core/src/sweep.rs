//! Parameter sweeps over (L, Ω_p, channel, regime) and their CSV/JSON output.
//!
//! CSV schema v1: optional `#` comment lines (tool version, conventions,
//! assumptions), then the header
//!
//! ```text
//! L_um,omega_p_um,channel,regime,R,f_ent,f_sep,C_ratio,err_R,converged
//! ```
//!
//! and one row per grid point in grid order. A point whose ratio could not be
//! evaluated has `NaN` values and `converged = false`; the reason goes to the
//! JSON `error` field. JSON output writes one record object per line.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::observables::{enhancement_ratio, Channel, RatioResult};
use crate::units::{ExperimentConfig, Regime};

pub const CSV_SCHEMA: &str = "sweep-csv v1";
pub const CSV_HEADER: &str = "L_um,omega_p_um,channel,regime,R,f_ent,f_sep,C_ratio,err_R,converged";
/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "QIONIZE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Param {
    #[serde(rename = "L_um")]
    CrystalLength,
    #[serde(rename = "omega_p_um")]
    PumpWaist,
}

impl Param {
    pub fn as_str(self) -> &'static str {
        match self {
            Param::CrystalLength => "L_um",
            Param::PumpWaist => "omega_p_um",
        }
    }

    fn apply(self, cfg: ExperimentConfig, value: f64) -> ExperimentConfig {
        match self {
            Param::CrystalLength => cfg.with_crystal_length(value),
            Param::PumpWaist => cfg.with_pump_waist(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(param: Param, values: Vec<f64>) -> Self {
        Self { param, values }
    }

    fn validate(&self) -> Result<()> {
        let field = self.param.as_str();
        if self.values.is_empty() {
            return Err(Error::config(field, "value list is empty"));
        }
        if let Some(v) = self.values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::config(
                field,
                format!("values must be positive and finite, got {v}"),
            ));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config(field, "values must be strictly ascending"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub name: String,
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    pub channels: Vec<Channel>,
    pub regimes: Vec<Regime>,
    /// Assumptions recorded in output metadata.
    pub notes: Vec<String>,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        if let Some(a2) = &self.axis2 {
            a2.validate()?;
            if a2.param == self.axis1.param {
                return Err(Error::config(
                    a2.param.as_str(),
                    "both sweep axes use the same parameter",
                ));
            }
        }
        if self.channels.is_empty() {
            return Err(Error::config("channels", "no channel selected"));
        }
        if self.regimes.is_empty() {
            return Err(Error::config("regimes", "no regime selected"));
        }
        Ok(())
    }

    /// Grid points in output order: channel, regime, axis1, axis2.
    fn points(&self, template: &ExperimentConfig) -> Vec<(Channel, ExperimentConfig)> {
        let second: Vec<Option<f64>> = match &self.axis2 {
            Some(a) => a.values.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut out = Vec::new();
        for ch in &self.channels {
            for &regime in &self.regimes {
                for &v1 in &self.axis1.values {
                    for v2 in &second {
                        let mut cfg = self
                            .axis1
                            .param
                            .apply(template.clone().with_regime(regime), v1);
                        if let (Some(a2), Some(v2)) = (&self.axis2, v2) {
                            cfg = a2.param.apply(cfg, *v2);
                        }
                        out.push((ch.clone(), cfg));
                    }
                }
            }
        }
        out
    }
}

/// `n` points from `lo` to `hi` evenly spaced in log10, endpoints exact.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    i if i == n - 1 => hi,
                    i => 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64),
                })
                .collect()
        }
    }
}

pub const PRESET_NAMES: [&str; 3] = ["fig2a", "fig2b", "fig2c"];

/// Built-in figure grids.
pub fn preset(name: &str) -> Result<SweepPlan> {
    let l_range = "L grid: log-spaced in [0.01, 100] um".to_string();
    let w_range = "omega_p grid: log-spaced in [1, 100] um".to_string();
    match name {
        "fig2a" => Ok(SweepPlan {
            name: name.into(),
            axis1: Axis::new(Param::CrystalLength, logspace(0.01, 100.0, 13)),
            axis2: Some(Axis::new(Param::PumpWaist, logspace(1.0, 100.0, 9))),
            channels: vec![Channel::dipole()],
            regimes: vec![Regime::Exact, Regime::Paraxial],
            notes: vec![l_range, w_range],
        }),
        "fig2b" => Ok(SweepPlan {
            name: name.into(),
            axis1: Axis::new(Param::PumpWaist, vec![3.0, 10.0, 50.0]),
            axis2: Some(Axis::new(Param::CrystalLength, logspace(0.01, 100.0, 40))),
            channels: vec![Channel::dipole()],
            regimes: vec![Regime::Exact],
            notes: vec![l_range],
        }),
        "fig2c" => Ok(SweepPlan {
            name: name.into(),
            axis1: Axis::new(Param::PumpWaist, logspace(1.0, 100.0, 21)),
            axis2: Some(Axis::new(Param::CrystalLength, vec![1.0])),
            channels: vec![Channel::dipole()],
            regimes: vec![Regime::Exact],
            notes: vec![w_range, "crystal length L = 1 taken as 1 um".into()],
        }),
        other => Err(Error::config(
            "preset",
            format!(
                "unknown preset `{other}` (available: {})",
                PRESET_NAMES.join(", ")
            ),
        )),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    #[serde(rename = "L_um")]
    pub length_um: f64,
    pub omega_p_um: f64,
    pub channel: String,
    pub regime: Regime,
    #[serde(rename = "R")]
    pub r: f64,
    pub f_ent: f64,
    pub f_sep: f64,
    #[serde(rename = "C_ratio")]
    pub c_ratio: f64,
    #[serde(rename = "err_R")]
    pub err_r: f64,
    pub converged: bool,
    pub kernel: String,
    pub measure: &'static str,
    pub error: Option<String>,
}

impl SweepRecord {
    fn from_ratio(cfg: &ExperimentConfig, res: &RatioResult) -> Self {
        Self {
            length_um: cfg.crystal_length_um,
            omega_p_um: cfg.pump_waist_um,
            channel: res.channel.clone(),
            regime: res.regime,
            r: res.r,
            f_ent: res.f_ent,
            f_sep: res.f_sep,
            c_ratio: res.c_ratio,
            err_r: res.err_r,
            converged: res.converged,
            kernel: res.kernel.clone(),
            measure: res.measure.as_str(),
            error: None,
        }
    }

    fn failed(cfg: &ExperimentConfig, channel: &Channel, err: &Error) -> Self {
        Self {
            length_um: cfg.crystal_length_um,
            omega_p_um: cfg.pump_waist_um,
            channel: channel.name.clone(),
            regime: cfg.regime,
            r: f64::NAN,
            f_ent: f64::NAN,
            f_sep: f64::NAN,
            c_ratio: f64::NAN,
            err_r: f64::NAN,
            converged: false,
            kernel: channel.kernel_label(),
            measure: cfg.measure.as_str(),
            error: Some(err.to_string()),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.length_um,
            self.omega_p_um,
            self.channel,
            self.regime,
            self.r,
            self.f_ent,
            self.f_sep,
            self.c_ratio,
            self.err_r,
            self.converged
        )
    }
}

/// Evaluates one grid point; failures become in-row records.
pub fn evaluate_point(cfg: &ExperimentConfig, channel: &Channel) -> SweepRecord {
    match enhancement_ratio(cfg, channel) {
        Ok(res) => SweepRecord::from_ratio(cfg, &res),
        Err(Error::RatioNotConverged { partial }) => {
            let mut rec = SweepRecord::from_ratio(cfg, &partial);
            rec.error = Some("not converged".into());
            rec
        }
        Err(e) => SweepRecord::failed(cfg, channel, &e),
    }
}

/// Thread pool sized by `QIONIZE_THREADS`, else by the available cores.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| {
                Error::config(
                    THREADS_ENV,
                    format!("expected a positive integer, got `{v}`"),
                )
            })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(THREADS_ENV, e.to_string()))
}

/// Evaluates the plan at every grid point; records come back in grid order.
pub fn run_sweep(plan: &SweepPlan, template: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    plan.validate()?;
    template.validate()?;
    let points = plan.points(template);
    let pool = thread_pool()?;
    Ok(pool.install(|| {
        points
            .par_iter()
            .map(|(ch, cfg)| evaluate_point(cfg, ch))
            .collect()
    }))
}

/// Comment lines written ahead of the CSV header.
pub fn metadata_lines(plan: &SweepPlan, template: &ExperimentConfig) -> Vec<String> {
    let mut lines = vec![
        format!(
            "qionize {}; schema {CSV_SCHEMA}; plan {}",
            env!("CARGO_PKG_VERSION"),
            plan.name
        ),
        format!(
            "conventions: paraxial dkz = second-order expansion, paraxial obliquity weight = 2; \
             measure = {}; filter factors cancel in R and are not evaluated",
            template.measure.as_str()
        ),
        format!(
            "template: omega = {} um, omega_y = {} um, channel energy from channel, quadrature rel_tol = {}",
            template.filter_omega_um, template.filter_omega_y_um, template.quadrature.rel_tol
        ),
    ];
    let kernels: Vec<String> = plan
        .channels
        .iter()
        .map(|c| format!("{}={}", c.name, c.kernel_label()))
        .collect();
    lines.push(format!("kernels: {}", kernels.join(", ")));
    lines.extend(plan.notes.iter().cloned());
    lines
}

pub fn write_csv(
    out: &mut impl Write,
    plan: &SweepPlan,
    template: &ExperimentConfig,
    records: &[SweepRecord],
) -> std::io::Result<()> {
    for line in metadata_lines(plan, template) {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn write_json_lines(out: &mut impl Write, records: &[SweepRecord]) -> std::io::Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(std::io::Error::other)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logspace_endpoints_and_ratio() {
        let v = logspace(0.01, 100.0, 5);
        assert_eq!(v[0], 0.01);
        assert_eq!(v[4], 100.0);
        assert!((v[2] - 1.0).abs() < 1e-12);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(logspace(2.0, 3.0, 1), vec![2.0]);
    }

    #[test]
    fn presets_are_valid() {
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(preset("fig9").is_err());
        let b = preset("fig2b").unwrap();
        assert_eq!(b.axis2.as_ref().unwrap().values.len(), 40);
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let mut p = preset("fig2c").unwrap();
        p.axis1.values = vec![3.0, 1.0];
        assert!(p.validate().is_err());
        p.axis1.values = vec![-1.0];
        assert!(p.validate().is_err());
        let mut p = preset("fig2c").unwrap();
        p.axis2 = Some(Axis::new(Param::PumpWaist, vec![1.0]));
        assert!(p.validate().is_err());
        let mut p = preset("fig2c").unwrap();
        p.regimes.clear();
        assert!(p.validate().is_err());
    }

    #[test]
    fn grid_order_is_channel_regime_axis1_axis2() {
        let plan = SweepPlan {
            name: "t".into(),
            axis1: Axis::new(Param::CrystalLength, vec![1.0, 2.0]),
            axis2: Some(Axis::new(Param::PumpWaist, vec![3.0, 4.0])),
            channels: vec![Channel::dipole()],
            regimes: vec![Regime::Exact, Regime::Paraxial],
            notes: vec![],
        };
        let pts = plan.points(&ExperimentConfig::sodium_dipole());
        let keys: Vec<_> = pts
            .iter()
            .map(|(_, c)| (c.regime, c.crystal_length_um, c.pump_waist_um))
            .collect();
        assert_eq!(keys[0], (Regime::Exact, 1.0, 3.0));
        assert_eq!(keys[1], (Regime::Exact, 1.0, 4.0));
        assert_eq!(keys[2], (Regime::Exact, 2.0, 3.0));
        assert_eq!(keys[4], (Regime::Paraxial, 1.0, 3.0));
    }

    #[test]
    fn failures_stay_in_row() {
        let cfg = ExperimentConfig::sodium_dipole();
        let rec = evaluate_point(&cfg, &Channel::quadrupole());
        assert!(!rec.converged);
        assert!(rec.r.is_nan());
        assert!(rec.error.unwrap().contains("kernel"));
    }
}
