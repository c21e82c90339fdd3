//! Flat `key = value` run configuration with `#` comments.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::constitutive::EosParams;
use crate::geometry::{CutoffBreakpoints, GeometryConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipe {
    Equilibrium,
    DensityBump,
    MagneticBump,
    ShellKick,
    Collapse,
}

impl Recipe {
    pub fn name(&self) -> &'static str {
        match self {
            Recipe::Equilibrium => "equilibrium",
            Recipe::DensityBump => "density-bump",
            Recipe::MagneticBump => "magnetic-bump",
            Recipe::ShellKick => "shell-kick",
            Recipe::Collapse => "collapse",
        }
    }
}

impl FromStr for Recipe {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "equilibrium" => Recipe::Equilibrium,
            "density-bump" => Recipe::DensityBump,
            "magnetic-bump" => Recipe::MagneticBump,
            "shell-kick" => Recipe::ShellKick,
            "collapse" => Recipe::Collapse,
            other => return Err(format!("unknown recipe '{other}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingConfig {
    pub dt: f64,
    pub delta: f64,
    pub xi: f64,
    pub final_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellConfig {
    pub n_nodes: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub substeps: usize,
    /// Feed fluid traction and entropy flux into the shell; the penalty alone
    /// carries the coupling when false.
    pub traction_forcing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidConfig {
    pub nx: usize,
    pub cfl: f64,
    /// Vacuum regularization relative to `init.rho0`.
    pub eps_vacuum: f64,
    pub kernel_halfwidth: f64,
    pub markers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub recipe: Recipe,
    pub amplitude: f64,
    pub rho0: f64,
    pub b0: f64,
    pub theta0: f64,
    pub shell_theta0: f64,
    /// Width of the empty band inside the interface, in cells.
    pub band_cells: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    /// `delta` and `xi` mirror the splitting section.
    pub eos: EosParams,
    /// `eos.rho_ref` given explicitly; otherwise the mean initial density over the box.
    pub rho_ref_given: bool,
    pub splitting: SplittingConfig,
    pub shell: ShellConfig,
    pub fluid: FluidConfig,
    pub init: InitConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let splitting = SplittingConfig {
            dt: 0.01,
            delta: 0.01,
            xi: 0.1,
            final_time: 0.1,
        };
        Self {
            geometry: GeometryConfig::default(),
            eos: EosParams {
                delta: splitting.delta,
                xi: splitting.xi,
                ..EosParams::default()
            },
            rho_ref_given: false,
            splitting,
            shell: ShellConfig {
                n_nodes: 256,
                alpha1: 0.5,
                alpha2: 0.1,
                substeps: 4,
                traction_forcing: false,
            },
            fluid: FluidConfig {
                nx: 128,
                cfl: 0.4,
                eps_vacuum: 1e-8,
                kernel_halfwidth: 2.0,
                markers: 256,
            },
            init: InitConfig {
                recipe: Recipe::DensityBump,
                amplitude: 0.5,
                rho0: 1.0,
                b0: 0.5,
                theta0: 1.0,
                shell_theta0: 1.0,
                band_cells: 4.0,
            },
            seed: 0,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> std::result::Result<T, String> {
    raw.parse()
        .map_err(|_| format!("invalid value '{raw}' for key '{key}'"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates; `origin` names the source in errors.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.into(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key '{key}'")));
            }
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assigns one key; unknown keys are rejected by name.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let g = &mut self.geometry;
        let c = &mut g.cutoff;
        match key {
            "geometry.radius" => g.radius = parse_value(key, v)?,
            "geometry.cutoff.m2" => c.inner_support = parse_value(key, v)?,
            "geometry.cutoff.m1" => c.inner_plateau = parse_value(key, v)?,
            "geometry.cutoff.M1" => c.outer_plateau = parse_value(key, v)?,
            "geometry.cutoff.M2" => c.outer_support = parse_value(key, v)?,
            "geometry.bounds.alpha" => g.alpha_bound = parse_value(key, v)?,
            "geometry.bounds.beta" => g.beta_bound = parse_value(key, v)?,
            "geometry.box_halfwidth" => g.box_halfwidth = parse_value(key, v)?,
            "eos.gamma" => self.eos.gamma = parse_value(key, v)?,
            "eos.a" => self.eos.a = parse_value(key, v)?,
            "eos.beta" => self.eos.beta = parse_value(key, v)?,
            "eos.mu_bar" => self.eos.mu_bar = parse_value(key, v)?,
            "eos.eta_bar" => self.eos.eta_bar = parse_value(key, v)?,
            "eos.kappa_bar" => self.eos.kappa_bar = parse_value(key, v)?,
            "eos.rho_ref" => {
                self.eos.rho_ref = parse_value(key, v)?;
                self.rho_ref_given = true;
            }
            "eos.theta_ref" => self.eos.theta_ref = parse_value(key, v)?,
            "splitting.dt" => self.splitting.dt = parse_value(key, v)?,
            "splitting.delta" => {
                self.splitting.delta = parse_value(key, v)?;
                self.eos.delta = self.splitting.delta;
            }
            "splitting.xi" => {
                self.splitting.xi = parse_value(key, v)?;
                self.eos.xi = self.splitting.xi;
            }
            "splitting.final_time" => self.splitting.final_time = parse_value(key, v)?,
            "shell.n_nodes" => self.shell.n_nodes = parse_value(key, v)?,
            "shell.alpha1" => self.shell.alpha1 = parse_value(key, v)?,
            "shell.alpha2" => self.shell.alpha2 = parse_value(key, v)?,
            "shell.substeps" => self.shell.substeps = parse_value(key, v)?,
            "shell.traction_forcing" => self.shell.traction_forcing = parse_value(key, v)?,
            "fluid.nx" => self.fluid.nx = parse_value(key, v)?,
            "fluid.cfl" => self.fluid.cfl = parse_value(key, v)?,
            "fluid.eps_vacuum" => self.fluid.eps_vacuum = parse_value(key, v)?,
            "fluid.kernel_halfwidth" => self.fluid.kernel_halfwidth = parse_value(key, v)?,
            "fluid.markers" => self.fluid.markers = parse_value(key, v)?,
            "init.recipe" => self.init.recipe = v.parse()?,
            "init.amplitude" => self.init.amplitude = parse_value(key, v)?,
            "init.rho0" => self.init.rho0 = parse_value(key, v)?,
            "init.b0" => self.init.b0 = parse_value(key, v)?,
            "init.theta0" => self.init.theta0 = parse_value(key, v)?,
            "init.shell_theta0" => self.init.shell_theta0 = parse_value(key, v)?,
            "init.band_cells" => self.init.band_cells = parse_value(key, v)?,
            "run.seed" => self.seed = parse_value(key, v)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        self.eos.validate()?;
        let h = 2.0 * self.geometry.box_halfwidth / self.fluid.nx as f64;
        self.geometry.validate(self.fluid.kernel_halfwidth * h)?;
        let s = &self.splitting;
        if !(s.dt > 0.0) {
            return bad("splitting.dt must be positive".into());
        }
        if !(s.delta > 0.0 && s.delta < 1.0) {
            return bad("splitting.delta must satisfy 0 < delta < 1".into());
        }
        if !(s.xi >= 0.0 && s.xi <= 1.0) {
            return bad("splitting.xi must lie in [0, 1]".into());
        }
        if !(s.final_time >= 0.0) {
            return bad("splitting.final_time must be nonnegative".into());
        }
        let windows = s.final_time / s.dt;
        if (windows - windows.round()).abs() > 1e-9 * windows.max(1.0) {
            return bad(format!(
                "splitting.final_time = {} is not an integer multiple of splitting.dt = {}",
                s.final_time, s.dt
            ));
        }
        let sh = &self.shell;
        if sh.n_nodes < 4 {
            return bad("shell.n_nodes must be at least 4".into());
        }
        if !(sh.alpha1 >= 0.0 && sh.alpha2 >= 0.0) {
            return bad("shell.alpha1 and shell.alpha2 must be nonnegative".into());
        }
        if sh.substeps == 0 {
            return bad("shell.substeps must be at least 1".into());
        }
        let f = &self.fluid;
        if f.nx < 8 {
            return bad("fluid.nx must be at least 8".into());
        }
        if !(f.cfl > 0.0 && f.cfl <= 1.0) {
            return bad("fluid.cfl must lie in (0, 1]".into());
        }
        if !(f.eps_vacuum > 0.0) {
            return bad("fluid.eps_vacuum must be positive".into());
        }
        if !(f.kernel_halfwidth >= 1.0) {
            return bad("fluid.kernel_halfwidth must be at least 1 cell".into());
        }
        if f.markers != sh.n_nodes {
            return bad(format!(
                "fluid.markers = {} must equal shell.n_nodes = {}",
                f.markers, sh.n_nodes
            ));
        }
        let i = &self.init;
        if !(i.rho0 > 0.0 && i.theta0 > 0.0) {
            return bad("init.rho0 and init.theta0 must be positive".into());
        }
        if !(i.b0 >= 0.0 && i.shell_theta0 >= 0.0 && i.amplitude >= 0.0) {
            return bad("init.b0, init.shell_theta0 and init.amplitude must be nonnegative".into());
        }
        if !(i.band_cells >= 2.0) {
            return bad("init.band_cells must be at least 2".into());
        }
        Ok(())
    }

    pub fn windows(&self) -> usize {
        (self.splitting.final_time / self.splitting.dt).round() as usize
    }

    /// Canonical text form; parses back to an equal configuration.
    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let c: &CutoffBreakpoints = &g.cutoff;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("geometry.radius", format!("{:?}", g.radius));
        kv("geometry.cutoff.m2", format!("{:?}", c.inner_support));
        kv("geometry.cutoff.m1", format!("{:?}", c.inner_plateau));
        kv("geometry.cutoff.M1", format!("{:?}", c.outer_plateau));
        kv("geometry.cutoff.M2", format!("{:?}", c.outer_support));
        kv("geometry.bounds.alpha", format!("{:?}", g.alpha_bound));
        kv("geometry.bounds.beta", format!("{:?}", g.beta_bound));
        kv("geometry.box_halfwidth", format!("{:?}", g.box_halfwidth));
        let e = &self.eos;
        kv("eos.gamma", format!("{:?}", e.gamma));
        kv("eos.a", format!("{:?}", e.a));
        kv("eos.beta", format!("{:?}", e.beta));
        kv("eos.mu_bar", format!("{:?}", e.mu_bar));
        kv("eos.eta_bar", format!("{:?}", e.eta_bar));
        kv("eos.kappa_bar", format!("{:?}", e.kappa_bar));
        if self.rho_ref_given {
            kv("eos.rho_ref", format!("{:?}", e.rho_ref));
        }
        kv("eos.theta_ref", format!("{:?}", e.theta_ref));
        let sp = &self.splitting;
        kv("splitting.dt", format!("{:?}", sp.dt));
        kv("splitting.delta", format!("{:?}", sp.delta));
        kv("splitting.xi", format!("{:?}", sp.xi));
        kv("splitting.final_time", format!("{:?}", sp.final_time));
        let sh = &self.shell;
        kv("shell.n_nodes", sh.n_nodes.to_string());
        kv("shell.alpha1", format!("{:?}", sh.alpha1));
        kv("shell.alpha2", format!("{:?}", sh.alpha2));
        kv("shell.substeps", sh.substeps.to_string());
        kv("shell.traction_forcing", sh.traction_forcing.to_string());
        let f = &self.fluid;
        kv("fluid.nx", f.nx.to_string());
        kv("fluid.cfl", format!("{:?}", f.cfl));
        kv("fluid.eps_vacuum", format!("{:?}", f.eps_vacuum));
        kv("fluid.kernel_halfwidth", format!("{:?}", f.kernel_halfwidth));
        kv("fluid.markers", f.markers.to_string());
        let i = &self.init;
        kv("init.recipe", i.recipe.name().to_string());
        kv("init.amplitude", format!("{:?}", i.amplitude));
        kv("init.rho0", format!("{:?}", i.rho0));
        kv("init.b0", format!("{:?}", i.b0));
        kv("init.theta0", format!("{:?}", i.theta0));
        kv("init.shell_theta0", format!("{:?}", i.shell_theta0));
        kv("init.band_cells", format!("{:?}", i.band_cells));
        kv("run.seed", self.seed.to_string());
        s
    }

    /// Copy with a different window length and master parameter.
    pub fn with_ladder(&self, dt: f64, xi: f64) -> Result<Self> {
        let mut c = *self;
        c.splitting.dt = dt;
        c.splitting.xi = xi;
        c.eos.xi = xi;
        c.validate()?;
        Ok(c)
    }
}

/// One sweep entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepEntry {
    pub dt: f64,
    pub xi: f64,
}

/// Parses a manifest with one `dt=<v> xi=<v>` entry per line.
pub fn parse_manifest(text: &str, origin: &str) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: origin.into(),
            line: idx + 1,
            message,
        };
        let (mut dt, mut xi) = (None, None);
        for tok in line.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key=value', found '{tok}'")))?;
            let val: f64 = parse_value(k, v).map_err(err)?;
            match k {
                "dt" if dt.is_none() => dt = Some(val),
                "xi" if xi.is_none() => xi = Some(val),
                "dt" | "xi" => return Err(err(format!("duplicate '{k}'"))),
                other => return Err(err(format!("unknown manifest key '{other}'"))),
            }
        }
        match (dt, xi) {
            (Some(dt), Some(xi)) => out.push(SweepEntry { dt, xi }),
            _ => return Err(err("each entry needs both dt and xi".into())),
        }
    }
    Ok(out)
}
