use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use multiphase::fisher::{inverse_bound, qfi_matrix};
use multiphase::probes::{
    coherent_qfi_matrix, make_generalized_noon, make_noon, separate_noon_qfi, CoherentBenchmark,
    GeneralizedNoonSpec, ReferenceEnergy, ReferenceLayout,
};
use multiphase::InfoMatrix;
use multiphase_bench::config::{hash_text, SCENARIO_KINDS};
use multiphase_bench::table::sweep_label;
use multiphase_bench::{run_scenario, verify_fixtures, BenchError, FixtureOutcome, Format, ResultTable, ScenarioConfig};

#[derive(Parser)]
#[command(name = "multiphase-bench", version, about = "Multiphase estimation scenario runner")]
struct Cli {
    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the config's `output.dir`, else `.`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Jsonl,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Jsonl => Format::Jsonl,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config and write its result table.
    Run { config: PathBuf },
    /// Rerun every fixture in a directory against its golden table.
    Verify { fixtures: PathBuf },
    /// List the scenario kinds a config can name.
    ListScenarios,
    /// One-shot QFI matrix and total-variance bound of a probe.
    Qfi {
        #[arg(value_enum)]
        probe: ProbeKind,
        /// Number of unknown phases.
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Photon number (NOON and generalized NOON).
        #[arg(long, default_value_t = 2)]
        n: u32,
        /// Probing weight |α|² of the generalized NOON probe (default: optimal).
        #[arg(long)]
        alpha_sq: Option<f64>,
        /// Photon numbers of separate NOON pairs, comma separated.
        #[arg(long, value_delimiter = ',')]
        photons: Vec<u32>,
        /// Total probing energy of the coherent benchmark.
        #[arg(long, default_value_t = 1.0)]
        energy: f64,
        /// Reference energy of the coherent benchmark; omit for infinite.
        #[arg(long)]
        reference: Option<f64>,
        /// Reference layout for a finite coherent reference.
        #[arg(long, value_enum, default_value_t = Layout::Single)]
        layout: Layout,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeKind {
    Noon,
    GeneralizedNoon,
    SeparateNoon,
    Coherent,
}

fn probe_name(p: ProbeKind) -> &'static str {
    match p {
        ProbeKind::Noon => "noon",
        ProbeKind::GeneralizedNoon => "generalized-noon",
        ProbeKind::SeparateNoon => "separate-noon",
        ProbeKind::Coherent => "coherent",
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    Separate,
    Single,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Verify { fixtures } => verify(fixtures),
        Command::ListScenarios => {
            for (kind, about) in SCENARIO_KINDS {
                println!("{kind:<20} {about}");
            }
            Ok(0)
        }
        Command::Qfi { probe, d, n, alpha_sq, photons, energy, reference, layout } => {
            qfi(&cli, *probe, *d, *n, *alpha_sq, photons, *energy, *reference, *layout)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli, path: &Path) -> Result<u8, BenchError> {
    let mut config = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let table = run_scenario(&config)?;
    let format: Format = cli.format.into();
    let dir = cli
        .out_dir
        .clone()
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let out = dir.join(format!("{}.{}", config.name, format.extension()));
    table.write(BufWriter::new(File::create(&out)?), format)?;
    let violations = table.violations();
    for row in &violations {
        eprintln!(
            "out of band: [{}] {} = {} not in [{}, {}]",
            row.sweep, row.quantity, row.value, row.tol_lo, row.tol_hi
        );
    }
    println!("{} rows written to {} ({} out of band)", table.rows.len(), out.display(), violations.len());
    Ok(if violations.is_empty() { 0 } else { 1 })
}

fn verify(dir: &Path) -> Result<u8, BenchError> {
    let report = verify_fixtures(dir)?;
    if report.fixtures.is_empty() {
        eprintln!("no fixtures found in {}", dir.display());
        return Ok(1);
    }
    for (name, outcome) in &report.fixtures {
        match outcome {
            FixtureOutcome::Pass => println!("PASS {name}"),
            FixtureOutcome::Fail(problems) => {
                println!("FAIL {name}");
                for p in problems {
                    println!("     {p}");
                }
            }
            FixtureOutcome::Error(e) => println!("ERROR {name}: {e}"),
        }
    }
    println!("{} fixtures, {} failed", report.fixtures.len(), report.failures());
    Ok(if report.passed() { 0 } else { 1 })
}

#[allow(clippy::too_many_arguments)]
fn qfi(
    cli: &Cli,
    probe: ProbeKind,
    d: usize,
    n: u32,
    alpha_sq: Option<f64>,
    photons: &[u32],
    energy: f64,
    reference: Option<f64>,
    layout: Layout,
) -> Result<u8, BenchError> {
    let module = |source| BenchError::Module { scenario: "qfi".into(), source };
    let (label, q): (String, InfoMatrix) = match probe {
        ProbeKind::Noon => (sweep_label(&[("n", n.to_string())]), qfi_matrix(&make_noon(n).map_err(module)?).map_err(module)?),
        ProbeKind::GeneralizedNoon => {
            let spec = match alpha_sq {
                Some(a) => GeneralizedNoonSpec::new(d, n, a),
                None => GeneralizedNoonSpec::optimal(d, n),
            }
            .map_err(module)?;
            let state = make_generalized_noon(&spec).map_err(module)?;
            let label = sweep_label(&[("d", d.to_string()), ("n", n.to_string()), ("alpha_sq", spec.alpha_sq.to_string())]);
            (label, qfi_matrix(&state).map_err(module)?)
        }
        ProbeKind::SeparateNoon => {
            let label = sweep_label(&[("photons", format!("{photons:?}"))]);
            (label, separate_noon_qfi(photons).map_err(module)?)
        }
        ProbeKind::Coherent => {
            let (r, l) = match reference {
                None => (ReferenceEnergy::Infinite, ReferenceLayout::Infinite),
                Some(b) => (
                    ReferenceEnergy::Finite(b),
                    match layout {
                        Layout::Separate => ReferenceLayout::SeparateReferences,
                        Layout::Single => ReferenceLayout::SingleReference,
                    },
                ),
            };
            let bench = CoherentBenchmark::equal(d, energy, r, l).map_err(module)?;
            let label = sweep_label(&[("d", d.to_string()), ("energy", energy.to_string())]);
            (label, coherent_qfi_matrix(&bench).map_err(module)?)
        }
    };
    let mut table = ResultTable::new("qfi", &hash_text(&format!("{:?} {label}", probe_name(probe))));
    let dim = q.dim();
    for i in 0..dim {
        for j in 0..dim {
            let v = q.matrix()[(i, j)];
            table.push(&label, &format!("qfi[{},{}]", i + 1, j + 1), v, v, v, "numeric");
        }
    }
    let bound = inverse_bound(&q);
    table.push(&label, "trace-qinv", bound.trace(), bound.trace(), bound.trace(), "numeric");
    if bound.singular {
        eprintln!("warning: QFI matrix is singular (rank {}); the bound uses the pseudoinverse", bound.rank);
    }
    table.write(std::io::stdout().lock(), cli.format.into())?;
    Ok(0)
}
