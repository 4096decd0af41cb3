use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use srcopt::analysis::{components, convexity_score, level_set, regularity_integral};
use srcopt::config::{self, parse_with_overrides, ConfigError, RunConfig};
use srcopt::kkt::kkt_report;
use srcopt::mesh::{load_mesh, quality, save_mesh, Mesh};
use srcopt::pipeline::{self, RunStatus};
use srcopt::poisson::{load_control, load_field, save_control, save_field, Control, FemSpace, ScalarField};
use srcopt::Error;

const EXIT_OTHER: u8 = 1;
const EXIT_MAX_ITERS: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(
    name = "srcopt",
    version,
    about = "Optimal source terms for the Dirichlet Poisson problem"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Run config file.
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Use a shipped preset instead of a config file.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Extra `section.key=value` assignment, applied after the config.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Reserved; every algorithm is deterministic.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh the configured domain.
    Mesh,
    /// Solve the state equation once.
    Solve {
        /// Saved mesh; generated from the config when absent.
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Saved control; `source.density` when absent.
        #[arg(long)]
        control: Option<PathBuf>,
    },
    /// Run the full optimization pipeline.
    Optimize,
    /// Optimality report for a saved control under the configured problem.
    Kkt {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        control: PathBuf,
    },
    /// Level-set and regularity diagnostics of a saved nodal field or control density.
    Analyze {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        field: PathBuf,
        /// Level of the sublevel set.
        #[arg(long, allow_negative_numbers = true)]
        level: Option<f64>,
        /// Exponent of the regularity integral; repeatable.
        #[arg(long = "q")]
        q: Vec<f64>,
    },
    /// List the shipped presets, or print one.
    Presets { name: Option<String> },
}

enum Failure {
    Config(String),
    Lib(Error),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("config error:\n{msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_solver_failure() { EXIT_SOLVER } else { EXIT_OTHER })
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_OTHER)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    let g = &cli.global;
    let log = |msg: &str| {
        if !g.quiet {
            eprintln!("{msg}");
        }
    };
    match &cli.command {
        Command::Presets { name } => {
            match name {
                None => config::PRESET_NAMES.iter().for_each(|n| println!("{n}")),
                Some(n) => {
                    let text = config::preset(n).ok_or_else(|| Failure::Config(format!("unknown preset `{n}`")))?;
                    print!("{text}");
                }
            }
            Ok(0)
        }
        Command::Mesh => {
            let cfg = load_config(g)?;
            let mesh = cfg.domain.generate(cfg.h)?;
            let dir = out_dir(g, &cfg);
            write(&dir, pipeline::MESH_FILE, &save_mesh(&mesh))?;
            let q = quality(&mesh);
            log(&format!(
                "{} vertices, {} triangles, min angle {:.2} deg, max angle {:.2} deg",
                mesh.n_vertices(),
                mesh.n_triangles(),
                q.min_angle,
                q.max_angle
            ));
            Ok(0)
        }
        Command::Solve { mesh, control } => {
            let cfg = load_config(g)?;
            let mesh = match mesh {
                Some(p) => load_mesh(&read(p)?)?,
                None => cfg.domain.generate(cfg.h)?,
            };
            let f = match control {
                Some(p) => load_control(&mesh, &read(p)?)?,
                None => Control::from_density(ScalarField::new(cfg.source.values(&mesh)?)),
            };
            let u = FemSpace::new(&mesh)?.resolvent(&f, cfg.optimizer.cg_tol)?;
            let dir = out_dir(g, &cfg);
            write(&dir, pipeline::MESH_FILE, &save_mesh(&mesh))?;
            write(&dir, pipeline::CONTROL_FILE, &save_control(&mesh, &f))?;
            write(&dir, pipeline::STATE_FILE, &save_field(&mesh, &u))?;
            log(&format!("max u = {:.9e}", u.max()));
            Ok(0)
        }
        Command::Optimize => {
            let mut cfg = load_config(g)?;
            cfg.output_dir = out_dir(g, &cfg);
            if let Some(input) = &g.config {
                let target = cfg.output_dir.join(pipeline::CONFIG_FILE);
                if let (Ok(a), Ok(b)) = (fs::canonicalize(input), fs::canonicalize(&target)) {
                    if a == b {
                        return Err(Failure::Config(format!(
                            "output directory {} would overwrite the input config",
                            cfg.output_dir.display()
                        )));
                    }
                }
            }
            let outcome = pipeline::run_pipeline(&cfg)?;
            log(&outcome.summary);
            log(&format!("artifacts in {}", outcome.dir.display()));
            Ok(match outcome.status {
                RunStatus::MaxIterations => EXIT_MAX_ITERS,
                RunStatus::Converged | RunStatus::Solved => 0,
            })
        }
        Command::Kkt { mesh, control } => {
            let cfg = load_config(g)?;
            let (cost, constraint) = match (&cfg.cost, &cfg.constraint) {
                (Some(c), Some(k)) => (c, k),
                _ => return Err(Failure::Config("kkt needs a config in optimize mode".into())),
            };
            let mesh = load_mesh(&read(mesh)?)?;
            let f = load_control(&mesh, &read(control)?)?;
            let space = FemSpace::new(&mesh)?;
            let report = kkt_report(cost, constraint, &space, &f, cfg.optimizer.cg_tol)?.to_text();
            print!("{report}");
            if g.out.is_some() {
                write(&out_dir(g, &cfg), pipeline::KKT_FILE, &report)?;
            }
            Ok(0)
        }
        Command::Analyze { mesh, field, level, q } => {
            let mesh = load_mesh(&read(mesh)?)?;
            let text = read(field)?;
            // a control file also works; its density is analyzed
            let u = match load_field(&mesh, &text) {
                Ok(u) => u,
                Err(e) => load_control(&mesh, &text).map(|f| f.density).map_err(|_| e)?,
            };
            print!("{}", analyze(&mesh, &u, *level, q, g.out.as_deref())?);
            Ok(0)
        }
    }
}

fn analyze(
    mesh: &Mesh,
    u: &ScalarField,
    level: Option<f64>,
    qs: &[f64],
    out: Option<&Path>,
) -> Result<String, Failure> {
    let mut text = format!("field.min = {}\nfield.max = {}\n", u.min(), u.max());
    if let Some(s) = level {
        let g = level_set(mesh, &u.values, s);
        text += &format!(
            "level = {s}\nsublevel_area = {}\nperimeter = {}\n",
            g.volume, g.perimeter
        );
        text += &format!("components = {}\n", components(mesh, &u.values, &g).len());
        match convexity_score(&g) {
            Ok(c) => text += &format!("convexity = {c}\n"),
            Err(_) => text += "convexity = nan\n",
        }
        if let Some(dir) = out {
            write(dir, pipeline::LEVELSET_FILE, &g.segments_csv())?;
        }
    }
    for &q in qs {
        let r = regularity_integral(mesh, &u.values, q)?;
        text += &format!(
            "regularity.q{q}.value = {}\nregularity.q{q}.excluded_area = {}\n",
            r.value, r.excluded_area
        );
    }
    if let Some(dir) = out {
        write(dir, pipeline::ANALYSIS_FILE, &text)?;
    }
    Ok(text)
}

fn load_config(g: &GlobalArgs) -> Result<RunConfig, Failure> {
    let text = match (&g.config, &g.preset) {
        (Some(p), _) => fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        (None, Some(name)) => config::preset(name)
            .ok_or_else(|| Failure::Config(format!("unknown preset `{name}`")))?
            .to_string(),
        (None, None) => return Err(Failure::Config("pass --config PATH or --preset NAME".into())),
    };
    Ok(parse_with_overrides(&text, &g.overrides)?)
}

fn out_dir(g: &GlobalArgs, cfg: &RunConfig) -> PathBuf {
    g.out.clone().unwrap_or_else(|| cfg.output_dir.clone())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Other(format!("{}: {e}", dir.join(name).display()));
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(dir.join(name), contents).map_err(io)
}
