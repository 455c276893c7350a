use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use vmsflow::navier_stokes::SubscaleModel;
use vmsflow::verification::{ElementFamily, RateBand};

/// Global Peclet number from which Oseen studies are judged against the
/// preasymptotic band `k - 1 +- 0.3` instead of the optimal `k +- 0.2`.
pub const ADVECTIVE_PE: f64 = 1e4;

#[derive(Parser, Debug)]
#[command(name = "vmsflow", version, about = "Convergence and robustness studies for the VMS flow solver")]
#[command(after_help = "Physics conventions: unit cavity with unit lid speed, Pe = |a| L / (2 nu) with |a| = 1, \
Re = |u_lid| L / nu with L = 1. Taylor-Green runs on [-pi, pi]^2 use the same Re = 1 / nu.\n\
Exit codes: 0 success, 1 usage, I/O or solver failure, 2 rate band violated under --assert-rates.")]
pub struct Cli {
    /// Run the study behind a figure instead of a subcommand
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,

    /// Output directory for CSV reports and the run manifest
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Meshes (or Peclet numbers) solved concurrently
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,

    /// Exit with status 2 if a fitted rate falls outside its band
    #[arg(long, global = true)]
    pub assert_rates: bool,

    /// Print the resolved configuration as JSON and exit
    #[arg(long, global = true)]
    pub print_config: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Oseen flow in the regularized cavity with advection at 30 degrees
    OseenCavity(OseenArgs),
    /// Oseen cavity over a range of Peclet numbers on one mesh
    PeSweep(SweepArgs),
    /// Steady Navier-Stokes in the regularized cavity
    NsCavity(NsArgs),
    /// Decaying Taylor-Green vortex with free-slip walls
    TaylorGreen(TaylorGreenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Element {
    LagrangeTh,
    SplineTh,
}

impl Element {
    pub fn family(self) -> ElementFamily {
        match self {
            Element::LagrangeTh => ElementFamily::LagrangeTaylorHood,
            Element::SplineTh => ElementFamily::SplineTaylorHood,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subscales {
    Dynamic,
    QuasiStatic,
}

impl Subscales {
    pub fn model(self) -> SubscaleModel {
        match self {
            Subscales::Dynamic => SubscaleModel::Dynamic,
            Subscales::QuasiStatic => SubscaleModel::QuasiStatic,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Subscales::Dynamic => "ds",
            Subscales::QuasiStatic => "qs",
        }
    }
}

#[derive(Args, Debug)]
pub struct Discretization {
    #[arg(long, value_enum, default_value = "lagrange-th")]
    pub element: Element,

    /// Velocity degree (pressure is one lower)
    #[arg(short = 'k', long = "degree", default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=4))]
    pub k: u8,

    /// Cells per side, comma separated
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub meshes: Option<Vec<usize>>,

    /// Inverse-estimate constant in the stabilization parameters
    #[arg(long = "cinv", default_value_t = vmsflow::forms::DEFAULT_C_INV)]
    pub c_inv: f64,

    /// Custom acceptance band MIN,MAX for the fitted H1 rate
    #[arg(long, value_delimiter = ',', value_name = "MIN,MAX")]
    pub rate_band: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct OseenArgs {
    #[command(flatten)]
    pub disc: Discretization,

    /// Peclet number |a| L / (2 nu)
    #[arg(long, conflicts_with = "nu")]
    pub pe: Option<f64>,

    /// Kinematic viscosity
    #[arg(long)]
    pub nu: Option<f64>,

    /// Plain Galerkin (all stabilization off)
    #[arg(long)]
    pub galerkin: bool,

    /// Also write each mesh's constrained system in Matrix Market format
    #[arg(long)]
    pub dump_matrix: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "lagrange-th")]
    pub element: Element,

    #[arg(short = 'k', long = "degree", default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=4))]
    pub k: u8,

    /// Cells per side of the fixed mesh
    #[arg(long, default_value_t = 16)]
    pub n: usize,

    /// Peclet numbers, comma separated (default 1e0 to 1e10 by decades)
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub pes: Option<Vec<f64>>,

    #[arg(long = "cinv", default_value_t = vmsflow::forms::DEFAULT_C_INV)]
    pub c_inv: f64,

    /// Also write the stabilized system at each Pe in Matrix Market format
    #[arg(long)]
    pub dump_matrix: bool,
}

#[derive(Args, Debug)]
pub struct NsArgs {
    #[command(flatten)]
    pub disc: Discretization,

    /// Reynolds number |u_lid| L / nu
    #[arg(long, conflicts_with = "nu")]
    pub re: Option<f64>,

    #[arg(long)]
    pub nu: Option<f64>,

    /// Also write the Newton matrix at each converged solution
    #[arg(long)]
    pub dump_matrix: bool,
}

#[derive(Args, Debug)]
pub struct TaylorGreenArgs {
    #[command(flatten)]
    pub disc: Discretization,

    #[arg(long, conflicts_with = "nu")]
    pub re: Option<f64>,

    #[arg(long)]
    pub nu: Option<f64>,

    #[arg(long, value_enum, default_value = "dynamic")]
    pub subscales: Subscales,

    /// Time step as a fraction of h; the step is shortened to land on T
    #[arg(long, default_value_t = 0.25)]
    pub dt_ratio: f64,

    #[arg(long, default_value_t = 1.0)]
    pub t_final: f64,
}

/// Band as serialized in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub min: f64,
    /// `None` for one-sided bands.
    pub max: Option<f64>,
}

impl Band {
    pub fn rate_band(self) -> RateBand {
        RateBand { min: self.min, max: self.max.unwrap_or(f64::INFINITY) }
    }
}

/// One convergence study or sweep, fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "benchmark", rename_all = "kebab-case")]
pub enum Study {
    OseenCavity {
        element: Element,
        k: usize,
        meshes: Vec<usize>,
        pe: f64,
        nu: f64,
        c_inv: f64,
        galerkin: bool,
        band: Band,
    },
    PeSweep {
        element: Element,
        k: usize,
        n: usize,
        pes: Vec<f64>,
        c_inv: f64,
    },
    NsCavity {
        element: Element,
        k: usize,
        meshes: Vec<usize>,
        re: f64,
        nu: f64,
        c_inv: f64,
        band: Band,
    },
    TaylorGreen {
        element: Element,
        k: usize,
        meshes: Vec<usize>,
        re: f64,
        nu: f64,
        c_inv: f64,
        subscales: Subscales,
        dt_ratio: f64,
        t_final: f64,
        band: Band,
    },
}

impl Study {
    pub fn label(&self) -> String {
        match self {
            Study::OseenCavity { element, k, pe, galerkin, .. } => {
                let g = if *galerkin { "-galerkin" } else { "" };
                format!("oseen-cavity-{}-k{k}-pe{pe:e}{g}", element.family().id())
            }
            Study::PeSweep { element, k, n, .. } => format!("pe-sweep-{}-k{k}-n{n}", element.family().id()),
            Study::NsCavity { element, k, re, .. } => format!("ns-cavity-{}-k{k}-re{re}", element.family().id()),
            Study::TaylorGreen { element, k, re, subscales, .. } => {
                format!("taylor-green-{}-k{k}-re{re}-{}", element.family().id(), subscales.tag())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub out: PathBuf,
    pub jobs: usize,
    pub assert_rates: bool,
    pub dump_matrix: bool,
    pub studies: Vec<Study>,
}

const CONVERGENCE_MESHES: [usize; 4] = [8, 16, 32, 64];
const TAYLOR_GREEN_MESHES: [usize; 3] = [16, 32, 48];

fn meshes(given: &Option<Vec<usize>>, default: &[usize]) -> Result<Vec<usize>, String> {
    let mut m = given.clone().unwrap_or_else(|| default.to_vec());
    if m.iter().any(|&n| n == 0) {
        return Err("mesh sizes must be positive".into());
    }
    m.sort_unstable();
    m.dedup();
    if m.len() < 2 {
        return Err("a convergence study needs at least two distinct meshes".into());
    }
    Ok(m)
}

fn positive(name: &str, v: f64) -> Result<f64, String> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{name} must be positive and finite, got {v}"))
    }
}

fn custom_band(given: &Option<Vec<f64>>) -> Result<Option<Band>, String> {
    match given.as_deref() {
        None => Ok(None),
        Some([min, max]) if min <= max => Ok(Some(Band { min: *min, max: Some(*max) })),
        Some(v) => Err(format!("rate band needs MIN,MAX with MIN <= MAX, got {v:?}")),
    }
}

/// Optimal steady rate: `k +- 0.2` for Lagrange, `k +- 0.3` for splines.
pub fn ns_band(element: Element, k: usize) -> Band {
    let w = match element {
        Element::LagrangeTh => 0.2,
        Element::SplineTh => 0.3,
    };
    Band { min: k as f64 - w, max: Some(k as f64 + w) }
}

/// `k +- 0.2` below [`ADVECTIVE_PE`], `k - 1 +- 0.3` above.
pub fn oseen_band(k: usize, pe: f64) -> Band {
    if pe >= ADVECTIVE_PE {
        Band { min: k as f64 - 1.3, max: Some(k as f64 - 0.7) }
    } else {
        Band { min: k as f64 - 0.2, max: Some(k as f64 + 0.2) }
    }
}

fn oseen(a: &OseenArgs) -> Result<Study, String> {
    let (pe, nu) = match (a.pe, a.nu) {
        (Some(pe), None) => (positive("Pe", pe)?, 0.5 / pe),
        (None, Some(nu)) => (0.5 / positive("nu", nu)?, nu),
        (None, None) => (1e2, 0.5 / 1e2),
        (Some(_), Some(_)) => return Err("give either --pe or --nu".into()),
    };
    let k = a.disc.k as usize;
    Ok(Study::OseenCavity {
        element: a.disc.element,
        k,
        meshes: meshes(&a.disc.meshes, &CONVERGENCE_MESHES)?,
        pe,
        nu,
        c_inv: positive("C_inv", a.disc.c_inv)?,
        galerkin: a.galerkin,
        band: custom_band(&a.disc.rate_band)?.unwrap_or_else(|| oseen_band(k, pe)),
    })
}

fn reynolds(re: Option<f64>, nu: Option<f64>) -> Result<(f64, f64), String> {
    match (re, nu) {
        (Some(re), None) => Ok((positive("Re", re)?, 1.0 / re)),
        (None, Some(nu)) => Ok((1.0 / positive("nu", nu)?, nu)),
        (None, None) => Ok((100.0, 0.01)),
        (Some(_), Some(_)) => Err("give either --re or --nu".into()),
    }
}

fn ns(a: &NsArgs) -> Result<Study, String> {
    let (re, nu) = reynolds(a.re, a.nu)?;
    let k = a.disc.k as usize;
    Ok(Study::NsCavity {
        element: a.disc.element,
        k,
        meshes: meshes(&a.disc.meshes, &CONVERGENCE_MESHES)?,
        re,
        nu,
        c_inv: positive("C_inv", a.disc.c_inv)?,
        band: custom_band(&a.disc.rate_band)?.unwrap_or_else(|| ns_band(a.disc.element, k)),
    })
}

fn taylor_green(a: &TaylorGreenArgs) -> Result<Study, String> {
    let (re, nu) = reynolds(a.re, a.nu)?;
    let k = a.disc.k as usize;
    Ok(Study::TaylorGreen {
        element: a.disc.element,
        k,
        meshes: meshes(&a.disc.meshes, &TAYLOR_GREEN_MESHES)?,
        re,
        nu,
        c_inv: positive("C_inv", a.disc.c_inv)?,
        subscales: a.subscales,
        dt_ratio: positive("dt ratio", a.dt_ratio)?,
        t_final: positive("final time", a.t_final)?,
        band: custom_band(&a.disc.rate_band)?.unwrap_or(Band { min: k as f64, max: None }),
    })
}

fn sweep(a: &SweepArgs) -> Result<Study, String> {
    let pes = a.pes.clone().unwrap_or_else(|| (0..=10).map(|e| 10f64.powi(e)).collect());
    for &pe in &pes {
        positive("Pe", pe)?;
    }
    if a.n == 0 {
        return Err("mesh size must be positive".into());
    }
    Ok(Study::PeSweep { element: a.element, k: a.k as usize, n: a.n, pes, c_inv: positive("C_inv", a.c_inv)? })
}

fn preset(p: Preset) -> Vec<Study> {
    let both = [(Element::LagrangeTh, 2), (Element::SplineTh, 3)];
    let c_inv = vmsflow::forms::DEFAULT_C_INV;
    let oseen_at = |pe: f64| {
        both.iter()
            .map(|&(element, k)| Study::OseenCavity {
                element,
                k,
                meshes: CONVERGENCE_MESHES.to_vec(),
                pe,
                nu: 0.5 / pe,
                c_inv,
                galerkin: false,
                band: oseen_band(k, pe),
            })
            .collect()
    };
    match p {
        Preset::Fig1 => oseen_at(1e2),
        Preset::Fig2 => oseen_at(1e8),
        Preset::Fig3 => vec![Study::PeSweep {
            element: Element::LagrangeTh,
            k: 2,
            n: 16,
            pes: (0..=10).map(|e| 10f64.powi(e)).collect(),
            c_inv,
        }],
        Preset::Fig4 => both
            .iter()
            .map(|&(element, k)| Study::NsCavity {
                element,
                k,
                meshes: CONVERGENCE_MESHES.to_vec(),
                re: 100.0,
                nu: 0.01,
                c_inv,
                band: ns_band(element, k),
            })
            .collect(),
        Preset::Fig5 => both
            .iter()
            .flat_map(|&(element, k)| {
                [Subscales::Dynamic, Subscales::QuasiStatic].map(|subscales| Study::TaylorGreen {
                    element,
                    k,
                    meshes: TAYLOR_GREEN_MESHES.to_vec(),
                    re: 100.0,
                    nu: 0.01,
                    c_inv,
                    subscales,
                    dt_ratio: 0.25,
                    t_final: 1.0,
                    band: Band { min: k as f64, max: None },
                })
            })
            .collect(),
    }
}

/// Validates the parsed arguments into a run plan.
pub fn resolve(cli: &Cli) -> Result<RunConfig, String> {
    let (studies, dump_matrix, preset_name) = match (&cli.preset, &cli.command) {
        (Some(_), Some(_)) => return Err("--preset and a subcommand are mutually exclusive".into()),
        (None, None) => return Err("give a subcommand or --preset (see --help)".into()),
        (Some(p), None) => {
            let name = p.to_possible_value().map(|v| v.get_name().to_string());
            (preset(*p), false, name)
        }
        (None, Some(c)) => match c {
            Command::OseenCavity(a) => (vec![oseen(a)?], a.dump_matrix, None),
            Command::PeSweep(a) => (vec![sweep(a)?], a.dump_matrix, None),
            Command::NsCavity(a) => (vec![ns(a)?], a.dump_matrix, None),
            Command::TaylorGreen(a) => (vec![taylor_green(a)?], false, None),
        },
    };
    Ok(RunConfig {
        preset: preset_name,
        out: cli.out.clone(),
        jobs: cli.jobs as usize,
        assert_rates: cli.assert_rates,
        dump_matrix,
        studies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, String> {
        let cli = Cli::try_parse_from(std::iter::once("vmsflow").chain(args.iter().copied())).map_err(|e| e.to_string())?;
        resolve(&cli)
    }

    #[test]
    fn oseen_example_is_valid() {
        let cfg = parse(&["oseen-cavity", "--pe", "1e2", "--element", "lagrange-th", "-k", "2", "--meshes", "8,16,32,64"]).unwrap();
        let Study::OseenCavity { meshes, pe, nu, k, band, .. } = &cfg.studies[0] else { panic!() };
        assert_eq!(meshes, &[8, 16, 32, 64]);
        assert_eq!((*pe, *nu, *k), (100.0, 0.005, 2));
        assert_eq!(*band, Band { min: 1.8, max: Some(2.2) });
        assert_eq!(cfg.jobs, 1);
    }

    #[test]
    fn conflicting_physics_is_rejected() {
        assert!(parse(&["oseen-cavity", "--pe", "1e2", "--nu", "0.01"]).is_err());
        assert!(parse(&["ns-cavity", "--re", "100", "--nu", "0.01"]).is_err());
        assert!(parse(&["taylor-green", "--re", "100", "--nu", "0.01"]).is_err());
    }

    #[test]
    fn taylor_green_dt_policy() {
        let cfg = parse(&["taylor-green", "--re", "100", "--subscales", "dynamic", "--dt-ratio", "0.25"]).unwrap();
        let Study::TaylorGreen { dt_ratio, nu, subscales, meshes, .. } = &cfg.studies[0] else { panic!() };
        assert_eq!((*dt_ratio, *nu, *subscales), (0.25, 0.01, Subscales::Dynamic));
        assert_eq!(meshes, &[16, 32, 48]);
    }

    #[test]
    fn presets_resolve() {
        let count = |p: &str| parse(&["--preset", p]).unwrap().studies.len();
        assert_eq!([count("fig1"), count("fig2"), count("fig3"), count("fig4"), count("fig5")], [2, 2, 1, 2, 4]);
        let cfg = parse(&["--preset", "fig2"]).unwrap();
        let Study::OseenCavity { band, .. } = &cfg.studies[1] else { panic!() };
        assert_eq!(*band, Band { min: 1.7, max: Some(2.3) });
        let cfg = parse(&["--preset", "fig4"]).unwrap();
        let Study::NsCavity { band, .. } = &cfg.studies[1] else { panic!() };
        assert_eq!(*band, Band { min: 2.7, max: Some(3.3) });
        assert!(parse(&["--preset", "fig1", "pe-sweep"]).is_err());
        assert!(parse(&[]).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(parse(&["oseen-cavity", "--pe", "-3"]).is_err());
        assert!(parse(&["oseen-cavity", "--meshes", "8"]).is_err());
        assert!(parse(&["oseen-cavity", "--meshes", "0,8"]).is_err());
        assert!(parse(&["oseen-cavity", "--rate-band", "2,1"]).is_err());
        assert!(parse(&["oseen-cavity", "--rate-band", "2"]).is_err());
        assert!(parse(&["oseen-cavity", "--rate-band", "1.8,2.2"]).is_ok());
        assert!(parse(&["ns-cavity", "-k", "7"]).is_err());
        assert!(parse(&["oseen-cavity", "--jobs", "0"]).is_err());
        assert!(parse(&["pe-sweep", "--unknown"]).is_err());
    }
}
