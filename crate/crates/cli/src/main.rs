use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use toric_theta::bergman::{self, rho, theta_distortion};
use toric_theta::config::{random_lattices, ExperimentConfig};
use toric_theta::equilibrium::energy::{arithmetic_degree, arithmetic_degree_by_slopes, degree_of_equilibrium, hodge_gap};
use toric_theta::equilibrium::{equilibrium_measure, equilibrium_weight, GridFunction};
use toric_theta::lattice;
use toric_theta::toric::{geometric_volume, lattice_points};
use toric_theta::verify::{run_suite, Suite, MAX_RANDOM_RANK, RANDOM_LATTICES};
use toric_theta::Error;

#[derive(Parser)]
#[command(name = "toric-theta", version, about = "Theta invariants of toric section lattices")]
struct Cli {
    /// Experiment configuration (JSON); the Fubini–Study model on O(1) over P¹ when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for scans.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the random lattice suites; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lattice invariants of the configured or seeded random lattices.
    Lattice,
    /// Lattice point counts of the dilated polytope.
    Count,
    /// Diagonal Gram entries of the section lattices.
    Gram,
    /// Bergman distortion on the evaluation grid.
    Rho,
    /// Theta distortion on the evaluation grid.
    ThetaDistortion,
    /// Normalized theta volumes and their extrapolated limit.
    VolumeScan,
    /// Normalized χ-volumes and their extrapolated limit.
    ChiScan,
    /// Equilibrium weight and measure of the configured weight.
    Equilibrium,
    /// Arithmetic degree of the configured weight.
    Degree,
    /// Volume estimate against the degrees of the weight and of its envelope.
    Hodge,
    /// Runs the acceptance checks.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

enum Failure {
    Config(String),
    Compute(String),
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ConfigInvalid(msg) => Failure::Config(msg),
            other => Failure::Compute(other.to_string()),
        }
    }
}

/// 17 significant digits.
fn real(x: f64) -> String {
    // no negative zero in the tables
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn write_json(out: &mut String, v: &Value, indent: usize) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => write!(out, "{i}").unwrap(),
            (_, Some(u), _) => write!(out, "{u}").unwrap(),
            (_, _, Some(x)) => out.push_str(&real(x)),
            _ => out.push_str("null"),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad);
                out.push_str("  ");
                write_json(out, item, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                write!(out, "{pad}  {}: ", Value::String(k.clone())).unwrap();
                write_json(out, item, indent + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad);
            out.push('}');
        }
    }
}

fn json(v: &Value) -> String {
    let mut s = String::new();
    write_json(&mut s, v, 0);
    s.push('\n');
    s
}

fn to_value<T: serde::Serialize>(x: &T) -> Result<Value, Failure> {
    serde_json::to_value(x).map_err(|e| Failure::Compute(e.to_string()))
}

struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    /// Prints `text` and, with an output directory, also stores it as `name`.
    fn emit(&self, name: &str, text: &str) -> Result<(), Failure> {
        print!("{text}");
        self.store(name, text)
    }

    fn store(&self, name: &str, text: &str) -> Result<(), Failure> {
        if let Some(dir) = &self.dir {
            fs::create_dir_all(dir).map_err(|e| Failure::Compute(format!("{}: {e}", dir.display())))?;
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Failure::Compute(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::fubini_study_line(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn point(u: &[f64]) -> String {
    u.iter().map(|&x| real(x)).collect::<Vec<_>>().join(";")
}

fn exponent(m: &[i64]) -> String {
    m.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let out = Output {
        dir: cli.out.clone().or_else(|| cfg.output.dir.as_ref().map(PathBuf::from)),
    };
    let ks = &cfg.scan.k_list;
    match &cli.command {
        Command::Lattice => {
            let mut lats = cfg.lattices()?;
            if lats.is_empty() {
                lats = random_lattices(cfg.seed, RANDOM_LATTICES, MAX_RANDOM_RANK);
            }
            let mut t = Table::new(&[
                "index",
                "rank",
                "h0_theta",
                "h1_theta",
                "degree",
                "poisson_residual",
                "h0_ar",
                "u_function",
                "monotonicity_violation",
            ]);
            let t_grid = [0.5, 1.0, 2.0, 4.0];
            for (i, lat) in lats.iter().enumerate() {
                let mono = lattice::lemma_monotonicity_check(lat, &t_grid)?;
                t.push(vec![
                    i.to_string(),
                    lat.rank().to_string(),
                    real(lattice::h0_theta(lat)?),
                    real(lattice::h1_theta(lat)?),
                    real(lattice::degree(lat)?),
                    real(lattice::poisson_residual(lat)?),
                    real(lattice::h0_ar(lat)?),
                    real(lattice::u_function(lat, 1.0)?),
                    real(mono.max_violation),
                ]);
            }
            out.emit("lattice.csv", &t.to_csv())
        }
        Command::Count => {
            let p = &cfg.model.polytope;
            let n = p.dim() as i32;
            let fact = (1..=p.dim()).product::<usize>() as f64;
            let mut t = Table::new(&["k", "n_k", "normalized", "volume"]);
            for &k in ks {
                let nk = lattice_points(p, k)?.n_k();
                t.push(vec![
                    k.to_string(),
                    nk.to_string(),
                    real(nk as f64 * fact / (k as f64).powi(n)),
                    real(geometric_volume(p)),
                ]);
            }
            out.emit("count.csv", &t.to_csv())
        }
        Command::Gram => {
            let model = cfg.model()?;
            let mut t = Table::new(&["k", "m", "entry", "error_bound"]);
            for &k in ks {
                let g = model.gram(k)?;
                for ((m, d), e) in g.space.exponents.iter().zip(&g.diag).zip(&g.errors) {
                    t.push(vec![k.to_string(), exponent(m), real(*d), real(*e)]);
                }
            }
            out.emit("gram.csv", &t.to_csv())
        }
        Command::Rho => {
            let model = cfg.model()?;
            let grid = cfg.u_grid();
            let mut t = Table::new(&["k", "u", "rho"]);
            for &k in ks {
                let g = model.gram(k)?;
                for u in &grid {
                    t.push(vec![k.to_string(), point(u), real(rho(&g, u))]);
                }
            }
            out.emit("rho.csv", &t.to_csv())
        }
        Command::ThetaDistortion => {
            let model = cfg.model()?;
            let grid = cfg.u_grid();
            let mut t = Table::new(&["k", "t", "u", "theta", "rho", "ratio"]);
            for &k in ks {
                let g = model.gram(k)?;
                for &tt in &cfg.scan.t_list {
                    for u in &grid {
                        let th = theta_distortion(&g, u, tt);
                        let r = rho(&g, u);
                        t.push(vec![k.to_string(), real(tt), point(u), real(th), real(r), real(th / r)]);
                    }
                }
            }
            out.emit("theta_distortion.csv", &t.to_csv())
        }
        Command::VolumeScan | Command::ChiScan => {
            let model = cfg.model()?;
            let chi = matches!(cli.command, Command::ChiScan);
            let est = if chi {
                bergman::chi_volume_estimate(&model, ks)?
            } else {
                bergman::volume_estimate(&model, ks)?
            };
            let mut t = Table::new(&["k", "n_k", "h0_theta", "chi_hat", "v_k", "chi_k", "sup_rho", "theta_over_rho_max"]);
            for r in &est.rows {
                t.push(vec![
                    r.k.to_string(),
                    r.n_k.to_string(),
                    real(r.h0_theta),
                    real(r.chi_hat),
                    real(r.v_k),
                    real(r.chi_k),
                    real(r.sup_rho),
                    real(r.theta_over_rho_max),
                ]);
            }
            let name = if chi { "chi_scan" } else { "volume_scan" };
            out.emit(&format!("{name}.csv"), &t.to_csv())?;
            out.store(&format!("{name}_fit.json"), &json(&to_value(&est.fit)?))
        }
        Command::Equilibrium => {
            let w = cfg.weight()?;
            let env = equilibrium_weight(&w)?;
            let samples = GridFunction::sample(&w, &env.nodes)?;
            let atoms = equilibrium_measure(&w)?;
            let mut t = Table::new(&["u", "weight", "envelope"]);
            for ((u, v), e) in env.nodes.iter().zip(&samples.values).zip(&env.values) {
                t.push(vec![real(*u), real(*v), real(*e)]);
            }
            out.store("equilibrium.csv", &t.to_csv())?;
            let gap = samples.values.iter().zip(&env.values).map(|(v, e)| v - e).fold(0.0, f64::max);
            let mass: f64 = atoms.iter().map(|a| a.1).sum();
            let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
            let summary = serde_json::json!({
                "nodes": env.nodes.len(),
                "max_gap": gap,
                "measure_mass": mass,
                "measure_mean": mean,
                "degree_equilibrium": degree_of_equilibrium(&w)?,
            });
            out.emit("equilibrium.json", &json(&summary))
        }
        Command::Degree => {
            let w = cfg.weight()?;
            let degree = arithmetic_degree(&w)?;
            let mut report = serde_json::json!({
                "degree": degree,
                "energy": 0.5 * degree,
                "degree_equilibrium": degree_of_equilibrium(&w)?,
                "anchor": "canonical=0",
            });
            if w.is_smooth() {
                report["degree_by_slopes"] = Value::from(arithmetic_degree_by_slopes(&w)?);
            }
            out.emit("degree.json", &json(&report))
        }
        Command::Hodge => {
            let report = hodge_gap(&cfg.weight()?, &cfg.measure()?, ks)?;
            out.emit("hodge.json", &json(&to_value(&report)?))
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let results = run_suite(suite, cfg.seed);
            let mut text = String::new();
            for r in &results {
                writeln!(text, "{r}").unwrap();
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            writeln!(text, "{} passed, {failed} failed", results.len() - failed).unwrap();
            out.emit("verify.txt", &text)?;
            out.store("verify.json", &json(&to_value(&results)?))?;
            if failed > 0 {
                return Err(Failure::Verify);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("invalid configuration: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
