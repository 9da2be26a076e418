//! Case configuration, built-in cases and output writers.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::analysis::{fill_orders, l2_error_field, l2_error_pressure, ErrorReport};
use crate::error::{Error, Result};
use crate::forms::{default_eta, FluxParams, StressVariant};
use crate::mesh::{Rect, Topology};
use crate::solver::{run_case_with, RunResult, StepDiagnostics};
use crate::space::{build_function_space, DiscreteField, FunctionSpace, SpaceKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    TaylorGreen,
    Gresho,
}

impl FromStr for CaseKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "taylor_green" => Ok(CaseKind::TaylorGreen),
            "gresho" => Ok(CaseKind::Gresho),
            _ => Err(format!("unknown case '{s}' (expected taylor_green or gresho)")),
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseKind::TaylorGreen => "taylor_green",
            CaseKind::Gresho => "gresho",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
pub enum Formulation {
    #[serde(rename = "TH-Symmetric")]
    ThSymmetric,
    #[serde(rename = "TH-NonSymmetric")]
    ThNonSymmetric,
    #[serde(rename = "BDM-Symmetric")]
    BdmSymmetric,
    #[serde(rename = "BDM-NonSymmetric")]
    BdmNonSymmetric,
    #[serde(rename = "RT-Symmetric")]
    RtSymmetric,
}

impl Formulation {
    pub const ALL: [Formulation; 5] = [
        Formulation::ThSymmetric,
        Formulation::ThNonSymmetric,
        Formulation::BdmSymmetric,
        Formulation::BdmNonSymmetric,
        Formulation::RtSymmetric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Formulation::ThSymmetric => "TH-Symmetric",
            Formulation::ThNonSymmetric => "TH-NonSymmetric",
            Formulation::BdmSymmetric => "BDM-Symmetric",
            Formulation::BdmNonSymmetric => "BDM-NonSymmetric",
            Formulation::RtSymmetric => "RT-Symmetric",
        }
    }

    /// Velocity space kind and element degree for case degree `k`.
    pub fn velocity_space(self, k: usize) -> (SpaceKind, usize) {
        match self {
            Formulation::ThSymmetric | Formulation::ThNonSymmetric => (SpaceKind::ContinuousVector, k + 1),
            Formulation::BdmSymmetric | Formulation::BdmNonSymmetric => (SpaceKind::Bdm, k + 1),
            Formulation::RtSymmetric => (SpaceKind::Rt, k),
        }
    }

    pub fn pressure_space(self, k: usize) -> (SpaceKind, usize) {
        match self {
            Formulation::ThSymmetric | Formulation::ThNonSymmetric => (SpaceKind::ContinuousScalar, k),
            _ => (SpaceKind::DiscontinuousScalar, k),
        }
    }

    pub fn stress_variant(self) -> StressVariant {
        match self {
            Formulation::ThSymmetric => StressVariant::FullDeviatoric,
            Formulation::BdmSymmetric | Formulation::RtSymmetric => StressVariant::SymmetricPair,
            Formulation::ThNonSymmetric | Formulation::BdmNonSymmetric => StressVariant::GradientOnly,
        }
    }

    pub fn is_hdiv(self) -> bool {
        !matches!(self, Formulation::ThSymmetric | Formulation::ThNonSymmetric)
    }
}

impl FromStr for Formulation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Formulation::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown formulation '{s}'"))
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Partially specified settings from a file or the command line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigOverrides {
    pub case: Option<CaseKind>,
    pub formulation: Option<Formulation>,
    pub k: Option<usize>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub nu: Option<f64>,
    pub zeta: Option<f64>,
    pub eta: Option<f64>,
    pub delta: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub meshes: Option<Vec<usize>>,
}

pub const CONFIG_KEYS: [&str; 13] =
    ["case", "formulation", "k", "nx", "ny", "nu", "zeta", "eta", "delta", "dt", "t_end", "out_dir", "meshes"];

fn take<T: DeserializeOwned>(map: &Map<String, Value>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| Error::Config { key: key.into(), message: e.to_string() }),
    }
}

impl ConfigOverrides {
    /// Parses a JSON object; unknown keys are rejected by name.
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config { key: "<file>".into(), message: e.to_string() })?;
        let Value::Object(map) = value else {
            return Err(Error::Config { key: "<file>".into(), message: "top level must be a JSON object".into() });
        };
        if let Some(key) = map.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(Error::Config { key: key.clone(), message: "unknown key".into() });
        }
        Ok(ConfigOverrides {
            case: take(&map, "case")?,
            formulation: take(&map, "formulation")?,
            k: take(&map, "k")?,
            nx: take(&map, "nx")?,
            ny: take(&map, "ny")?,
            nu: take(&map, "nu")?,
            zeta: take(&map, "zeta")?,
            eta: take(&map, "eta")?,
            delta: take(&map, "delta")?,
            dt: take(&map, "dt")?,
            t_end: take(&map, "t_end")?,
            out_dir: take(&map, "out_dir")?,
            meshes: take(&map, "meshes")?,
        })
    }

    /// Values set in `other` win.
    pub fn merged(&self, other: &ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            case: other.case.or(self.case),
            formulation: other.formulation.or(self.formulation),
            k: other.k.or(self.k),
            nx: other.nx.or(self.nx),
            ny: other.ny.or(self.ny),
            nu: other.nu.or(self.nu),
            zeta: other.zeta.or(self.zeta),
            eta: other.eta.or(self.eta),
            delta: other.delta.or(self.delta),
            dt: other.dt.or(self.dt),
            t_end: other.t_end.or(self.t_end),
            out_dir: other.out_dir.clone().or_else(|| self.out_dir.clone()),
            meshes: other.meshes.clone().or_else(|| self.meshes.clone()),
        }
    }
}

/// Validated case settings.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseConfig {
    pub case: CaseKind,
    pub formulation: Formulation,
    pub k: usize,
    pub nx: usize,
    pub ny: usize,
    pub nu: f64,
    pub zeta: f64,
    pub eta: f64,
    pub delta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub out_dir: Option<PathBuf>,
    /// Mesh resolutions of a convergence sweep.
    pub meshes: Vec<usize>,
}

pub const CONVERGENCE_MESHES: [usize; 4] = [10, 20, 40, 50];

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

impl CaseConfig {
    /// Applies defaults and range checks.
    pub fn resolve(o: &ConfigOverrides) -> Result<Self> {
        let case = o.case.unwrap_or(CaseKind::TaylorGreen);
        let (nu, nx, t_end) = match case {
            CaseKind::TaylorGreen => (0.01, 10, 1.0),
            CaseKind::Gresho => (5e-6, 28, 14.0),
        };
        let k = o.k.unwrap_or(1);
        if !(1..=3).contains(&k) {
            return Err(config_err("k", format!("k = {k} outside {{1, 2, 3}}")));
        }
        let nx = o.nx.unwrap_or(nx);
        let ny = o.ny.unwrap_or(nx);
        if nx < 2 || ny < 2 {
            return Err(config_err(if nx < 2 { "nx" } else { "ny" }, "need at least 2 cells per direction"));
        }
        let cfg = CaseConfig {
            case,
            formulation: o.formulation.unwrap_or(Formulation::BdmSymmetric),
            k,
            nx,
            ny,
            nu: o.nu.unwrap_or(nu),
            zeta: o.zeta.unwrap_or(0.5),
            eta: o.eta.unwrap_or(default_eta(k)),
            delta: o.delta.unwrap_or(0.0),
            dt: o.dt.unwrap_or(0.01),
            t_end: o.t_end.unwrap_or(t_end),
            out_dir: o.out_dir.clone(),
            meshes: o.meshes.clone().unwrap_or_else(|| CONVERGENCE_MESHES.to_vec()),
        };
        if !(0.0..=1.0).contains(&cfg.zeta) {
            return Err(config_err("zeta", format!("zeta = {} outside [0, 1]", cfg.zeta)));
        }
        if !(cfg.eta > 0.0) {
            return Err(config_err("eta", "eta must be positive"));
        }
        if !(cfg.nu > 0.0) {
            return Err(config_err("nu", "nu must be positive"));
        }
        if !(cfg.delta >= 0.0) {
            return Err(config_err("delta", "delta must be nonnegative"));
        }
        if !(cfg.dt > 0.0) {
            return Err(config_err("dt", "dt must be positive"));
        }
        if !(cfg.t_end >= cfg.dt) {
            return Err(config_err("t_end", "t_end must be at least dt"));
        }
        if cfg.meshes.is_empty() || cfg.meshes.iter().any(|&n| n < 2) || cfg.meshes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("meshes", "need strictly increasing resolutions >= 2"));
        }
        Ok(cfg)
    }

    pub fn params(&self) -> FluxParams {
        FluxParams { zeta: self.zeta, eta: self.eta, nu: self.nu, delta: self.delta }
    }

    pub fn with_mesh(&self, n: usize) -> CaseConfig {
        CaseConfig { nx: n, ny: n, ..self.clone() }
    }

    /// File stem shared by tables and snapshots of this configuration.
    pub fn tag(&self) -> String {
        format!("{}_{}_k{}_zeta{}_delta{}", self.case, self.formulation.name(), self.k, self.zeta, self.delta)
    }
}

/// Reads an optional JSON file and lays `flags` over it.
pub fn parse_config(path: Option<&Path>, flags: &ConfigOverrides) -> Result<CaseConfig> {
    let base = match path {
        Some(p) => ConfigOverrides::from_json(&std::fs::read_to_string(p)?)?,
        None => ConfigOverrides::default(),
    };
    CaseConfig::resolve(&base.merged(flags))
}

/// Exact Taylor-Green vortex on `[0, 2π]²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorGreen {
    pub nu: f64,
}

impl TaylorGreen {
    pub fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let d = (-2.0 * self.nu * t).exp();
        [x[0].sin() * x[1].cos() * d, -x[0].cos() * x[1].sin() * d]
    }

    pub fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        0.25 * ((2.0 * x[0]).cos() + (2.0 * x[1]).cos()) * (-4.0 * self.nu * t).exp()
    }

    pub fn vorticity(&self, x: [f64; 2], t: f64) -> f64 {
        2.0 * x[0].sin() * x[1].sin() * (-2.0 * self.nu * t).exp()
    }
}

/// Angular velocity profile of the Gresho vortex.
pub fn gresho_u_phi(r: f64) -> f64 {
    if r <= 0.2 {
        5.0 * r
    } else if r <= 0.4 {
        2.0 - 5.0 * r
    } else {
        0.0
    }
}

pub fn gresho_velocity(x: [f64; 2]) -> [f64; 2] {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let u = gresho_u_phi(r);
    [-u * x[1] / r, u * x[0] / r]
}

/// Mesh, spaces and parameters of a configured case.
pub struct CaseSetup {
    pub config: CaseConfig,
    pub topo: Arc<Topology>,
    pub vel: Arc<FunctionSpace>,
    pub pres: Arc<FunctionSpace>,
    pub variant: StressVariant,
    pub params: FluxParams,
    pub exact: Option<TaylorGreen>,
    pub initial: fn([f64; 2]) -> [f64; 2],
    pub h: f64,
}

fn zero_field(_: [f64; 2]) -> [f64; 2] {
    [0.0, 0.0]
}

pub fn setup_case(config: &CaseConfig) -> Result<CaseSetup> {
    let (rect, periodic) = match config.case {
        CaseKind::TaylorGreen => (Rect::new(0.0, 0.0, 2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI), true),
        CaseKind::Gresho => (Rect::new(-0.5, -0.5, 0.5, 0.5), false),
    };
    let topo = Arc::new(Topology::structured(config.nx, config.ny, rect, periodic)?);
    let (vk, vd) = config.formulation.velocity_space(config.k);
    let (pk, pd) = config.formulation.pressure_space(config.k);
    let vel = Arc::new(build_function_space(&topo, vk, vd)?);
    let pres = Arc::new(build_function_space(&topo, pk, pd)?);
    let params = config.params();
    params.validate()?;
    let (exact, initial): (Option<TaylorGreen>, fn([f64; 2]) -> [f64; 2]) = match config.case {
        CaseKind::TaylorGreen => (Some(TaylorGreen { nu: config.nu }), zero_field),
        CaseKind::Gresho => (None, gresho_velocity),
    };
    Ok(CaseSetup {
        config: config.clone(),
        h: topo.mesh.h_max(),
        topo,
        vel,
        pres,
        variant: config.formulation.stress_variant(),
        params,
        exact,
        initial,
    })
}

/// Formats an optional order column.
fn fmt_order(o: Option<f64>) -> String {
    o.map_or(String::new(), |v| format!("{v:.2}"))
}

pub const ERROR_TABLE_HEADER: &str = "k,h,dof,vel_error,vel_order,pres_error,pres_order";

pub fn format_error_table(reports: &[ErrorReport]) -> String {
    let mut s = String::from(ERROR_TABLE_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&format!(
            "{},{:.4},{},{:.2e},{},{:.2e},{}\n",
            r.k,
            r.h,
            r.dof,
            r.vel_l2,
            fmt_order(r.vel_order),
            r.pres_l2,
            fmt_order(r.pres_order)
        ));
    }
    s
}

pub fn write_error_table(reports: &[ErrorReport], path: &Path) -> Result<()> {
    std::fs::write(path, format_error_table(reports))?;
    Ok(())
}

/// Parses a table written by [`write_error_table`].
pub fn read_error_table(path: &Path) -> Result<Vec<ErrorReport>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(ERROR_TABLE_HEADER) {
        return Err(Error::InvalidArgument(format!("{} is not an error table", path.display())));
    }
    let bad = |l: &str| Error::InvalidArgument(format!("malformed error table row '{l}'"));
    let opt = |s: &str| -> std::result::Result<Option<f64>, std::num::ParseFloatError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some)
        }
    };
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(bad(l));
            }
            Ok(ErrorReport {
                k: f[0].parse().map_err(|_| bad(l))?,
                h: f[1].parse().map_err(|_| bad(l))?,
                dof: f[2].parse().map_err(|_| bad(l))?,
                vel_l2: f[3].parse().map_err(|_| bad(l))?,
                vel_order: opt(f[4]).map_err(|_| bad(l))?,
                pres_l2: f[5].parse().map_err(|_| bad(l))?,
                pres_order: opt(f[6]).map_err(|_| bad(l))?,
            })
        })
        .collect()
}

/// Writes a legacy VTK unstructured grid sampled on a per-element lattice of
/// `m = max(1, velocity degree)` subdivisions. Nodes are duplicated per
/// element so discontinuous fields are shown as computed.
pub fn write_field_output(u: &DiscreteField, p: &DiscreteField, t: f64, path: &Path) -> Result<()> {
    if !u.space.is_vector() || p.space.is_vector() {
        return Err(Error::Contract("field output needs a vector velocity and a scalar pressure".into()));
    }
    let m = u.space.poly_degree().max(1);
    let lattice: Vec<(usize, usize)> = (0..=m).flat_map(|j| (0..=m - j).map(move |i| (i, j))).collect();
    let local_id = |i: usize, j: usize| lattice.iter().position(|&q| q == (i, j)).expect("lattice node");
    let mut sub: Vec<[usize; 3]> = Vec::new();
    for j in 0..m {
        for i in 0..m - j {
            sub.push([local_id(i, j), local_id(i + 1, j), local_id(i, j + 1)]);
            if i + j + 1 < m {
                sub.push([local_id(i + 1, j), local_id(i + 1, j + 1), local_id(i, j + 1)]);
            }
        }
    }
    let ne = u.space.n_elements();
    let np = lattice.len();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "velocity and pressure at t = {t:.6}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", ne * np)?;
    let mut vel = Vec::with_capacity(ne * np);
    let mut pres = Vec::with_capacity(ne * np);
    for e in 0..ne {
        let map = &u.space.maps[e];
        for &(i, j) in &lattice {
            let xi = [i as f64 / m as f64, j as f64 / m as f64];
            let x = map.map_to_physical(xi);
            writeln!(out, "{:.9e} {:.9e} 0", x[0], x[1])?;
            vel.push(u.eval_element(e, xi).val);
            pres.push(p.eval_element(e, xi).val[0]);
        }
    }
    let nc = ne * sub.len();
    writeln!(out, "CELLS {} {}", nc, 4 * nc)?;
    for e in 0..ne {
        for s in &sub {
            writeln!(out, "3 {} {} {}", e * np + s[0], e * np + s[1], e * np + s[2])?;
        }
    }
    writeln!(out, "CELL_TYPES {nc}")?;
    for _ in 0..nc {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", ne * np)?;
    writeln!(out, "VECTORS velocity double")?;
    for v in &vel {
        writeln!(out, "{:.9e} {:.9e} 0", v[0], v[1])?;
    }
    writeln!(out, "SCALARS pressure double 1\nLOOKUP_TABLE default")?;
    for q in &pres {
        writeln!(out, "{q:.9e}")?;
    }
    writeln!(out, "SCALARS velocity_magnitude double 1\nLOOKUP_TABLE default")?;
    for v in &vel {
        writeln!(out, "{:.9e}", (v[0] * v[0] + v[1] * v[1]).sqrt())?;
    }
    writeln!(out, "CELL_DATA {nc}")?;
    writeln!(out, "SCALARS vorticity double 1\nLOOKUP_TABLE default")?;
    for e in 0..ne {
        for s in &sub {
            let c = s.iter().fold([0.0, 0.0], |a, &id| {
                let (i, j) = lattice[id];
                [a[0] + i as f64 / (3 * m) as f64, a[1] + j as f64 / (3 * m) as f64]
            });
            let g = u.eval_element(e, c).grad;
            writeln!(out, "{:.9e}", g[1][0] - g[0][1])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Velocity and pressure errors of a finished Taylor-Green run.
pub fn error_report(run: &RunResult) -> Result<ErrorReport> {
    let exact = run
        .setup
        .exact
        .ok_or_else(|| Error::InvalidArgument("errors need a case with an exact solution".into()))?;
    let t = run.t;
    Ok(ErrorReport {
        k: run.setup.config.k,
        h: run.setup.h,
        dof: run.system_size,
        vel_l2: l2_error_field(&run.u, |x| exact.velocity(x, t)),
        pres_l2: l2_error_pressure(&run.p, |x| exact.pressure(x, t))?,
        vel_order: None,
        pres_order: None,
    })
}

/// Runs every mesh of the sweep and returns the filled table.
pub fn run_convergence(
    config: &CaseConfig,
    mut progress: impl FnMut(usize, &StepDiagnostics),
) -> Result<Vec<ErrorReport>> {
    if config.case != CaseKind::TaylorGreen {
        return Err(config_err("case", "convergence studies need the taylor_green case"));
    }
    let mut reports = Vec::new();
    for &n in &config.meshes {
        let run = run_case_with(&config.with_mesh(n), |d| progress(n, d))?;
        reports.push(error_report(&run)?);
    }
    fill_orders(&mut reports)?;
    Ok(reports)
}

/// Writes the sweep table under the output directory and returns its path.
pub fn convergence_to_dir(config: &CaseConfig, dir: &Path, progress: impl FnMut(usize, &StepDiagnostics)) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let reports = run_convergence(config, progress)?;
    let path = dir.join(format!("errors_{}.csv", config.tag()));
    write_error_table(&reports, &path)?;
    Ok(path)
}

/// Writes the per-step diagnostics of a run as CSV.
pub fn write_diagnostics(steps: &[StepDiagnostics], path: &Path) -> Result<()> {
    let mut s = String::from("step,t,bdf_order,kinetic_energy,max_divergence,picard_iterations,seeded\n");
    for d in steps {
        s.push_str(&format!(
            "{},{:.6},{},{:.12e},{:.3e},{},{}\n",
            d.step, d.t, d.bdf_order, d.kinetic_energy, d.max_divergence, d.picard_iterations, d.seeded
        ));
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let cfg = CaseConfig::resolve(&ConfigOverrides::from_json("").unwrap()).unwrap();
        assert_eq!((cfg.nu, cfg.dt, cfg.t_end), (0.01, 0.01, 1.0));
        let o = ConfigOverrides::from_json(r#"{"k": 2}"#).unwrap();
        assert_eq!(CaseConfig::resolve(&o).unwrap().eta, 36.0);
        let o = ConfigOverrides::from_json(r#"{"zeta": 2}"#).unwrap();
        assert!(matches!(CaseConfig::resolve(&o), Err(Error::Config { key, .. }) if key == "zeta"));
        assert!(matches!(ConfigOverrides::from_json(r#"{"bogus": 1}"#), Err(Error::Config { key, .. }) if key == "bogus"));
        assert!(matches!(ConfigOverrides::from_json(r#"{"k": "two"}"#), Err(Error::Config { key, .. }) if key == "k"));
        let g = CaseConfig::resolve(&ConfigOverrides { case: Some(CaseKind::Gresho), ..Default::default() }).unwrap();
        assert_eq!((g.nu, g.nx, g.t_end), (5e-6, 28, 14.0));
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigOverrides::from_json(r#"{"k": 2, "nx": 20, "formulation": "TH-Symmetric"}"#).unwrap();
        let flags = ConfigOverrides { nx: Some(40), ..Default::default() };
        let cfg = CaseConfig::resolve(&file.merged(&flags)).unwrap();
        assert_eq!((cfg.k, cfg.nx, cfg.formulation), (2, 40, Formulation::ThSymmetric));
    }

    #[test]
    fn exact_fields() {
        let tg = TaylorGreen { nu: 0.01 };
        let u = tg.velocity([std::f64::consts::FRAC_PI_2, 0.0], 0.0);
        assert!((u[0] - 1.0).abs() < 1e-15 && u[1].abs() < 1e-15);
        assert!((tg.pressure([0.0, 0.0], 0.0) - 0.5).abs() < 1e-15);
        assert!((gresho_u_phi(0.1) - 0.5).abs() < 1e-15);
        assert!((gresho_u_phi(0.3) - 0.5).abs() < 1e-15);
        assert_eq!(gresho_u_phi(0.5), 0.0);
    }

    #[test]
    fn table_single_row_has_blank_orders() {
        let r = ErrorReport { k: 1, h: 0.8886, dof: 2101, vel_l2: 1.98e-2, pres_l2: 6.79e-2, vel_order: None, pres_order: None };
        let s = format_error_table(&[r]);
        assert_eq!(s.lines().nth(1).unwrap(), "1,0.8886,2101,1.98e-2,,6.79e-2,");
    }
}
