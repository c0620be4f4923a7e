use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use dcmg::series_csv::write_csv;
use dcmg::{
    compute_metrics, load_scenario, run_scenario, ExpectationTable, Metrics, PlantModel, Scenario,
    SimError, TimeSeries, Window,
};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(name = "dcmg", version, about = "Islanded DC microgrid simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its time series as CSV.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Simulate a scenario and check window metrics against an expectations table.
    Verify {
        scenario: PathBuf,
        expectations: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    /// Plant model for every converter.
    #[arg(long)]
    model: Option<PlantModel>,
    /// Plant integration step in seconds.
    #[arg(long, value_name = "SECONDS")]
    plant_dt: Option<f64>,
    /// Recording interval in seconds.
    #[arg(long, value_name = "SECONDS")]
    decimate: Option<f64>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn input(error: anyhow::Error) -> Self {
        Self {
            code: EXIT_INPUT,
            error,
        }
    }
}

fn prepare(path: &Path, overrides: &Overrides) -> Result<Scenario, Failure> {
    let mut scenario = load_scenario(path)
        .with_context(|| format!("cannot load scenario {}", path.display()))
        .map_err(Failure::input)?;
    if let Some(model) = overrides.model {
        scenario = scenario.with_model(model);
    }
    if let Some(dt) = overrides.plant_dt {
        scenario.plant_dt = dt;
    }
    if let Some(d) = overrides.decimate {
        scenario.decimate = d;
    }
    scenario
        .validate()
        .map_err(|e| Failure::input(anyhow!("invalid scenario after overrides: {e}")))?;
    Ok(scenario)
}

fn simulate(scenario: &Scenario) -> Result<TimeSeries, Failure> {
    run_scenario(scenario).map_err(|e| match e {
        SimError::Invalid(_) => Failure::input(e.into()),
        SimError::Abort { .. } => Failure {
            code: EXIT_ABORT,
            error: e.into(),
        },
    })
}

fn write_atomically(series: &TimeSeries, out: &Path) -> anyhow::Result<()> {
    let dir = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create output in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write_csv(series, &mut w)?;
        w.flush()?;
    }
    tmp.persist(out)
        .with_context(|| format!("cannot write {}", out.display()))?;
    Ok(())
}

fn print_summary(metrics: &Metrics) {
    for w in &metrics.windows {
        let settle = w
            .settling_time
            .map_or_else(|| "unsettled".to_string(), |t| format!("{t:.3} s"));
        println!(
            "[{}, {}] v_pcc {:.3} V  max dev {:.3} V  i_load {:.3} A  sharing err {:.4} A  settling {settle}",
            w.window.start, w.window.end, w.mean_v_pcc, w.max_deviation, w.mean_i_load, w.sharing_error
        );
        for (k, c) in w.converters.iter().enumerate() {
            println!(
                "    converter {}: i {:.3} A  p {:.1} W  v_term {:.3} V  comp {:.3} V{}",
                k + 1,
                c.mean_current,
                c.mean_power,
                c.mean_v_term,
                c.mean_comp,
                if c.connected { "" } else { "  (disconnected)" }
            );
        }
    }
}

fn run(scenario: &Path, out: &Path, overrides: &Overrides) -> Result<(), Failure> {
    let scenario = prepare(scenario, overrides)?;
    let series = simulate(&scenario)?;
    write_atomically(&series, out).map_err(Failure::input)?;
    let windows = if scenario.windows.is_empty() {
        vec![Window::new(0.0, scenario.duration)]
    } else {
        scenario.windows.clone()
    };
    match compute_metrics(&series, &windows) {
        Ok(m) => print_summary(&m),
        Err(e) => eprintln!("warning: no summary: {e}"),
    }
    println!(
        "wrote {} samples to {}",
        series.samples.len(),
        out.display()
    );
    Ok(())
}

fn verify(scenario: &Path, expectations: &Path, overrides: &Overrides) -> Result<(), Failure> {
    let scenario = prepare(scenario, overrides)?;
    let text = fs::read_to_string(expectations)
        .with_context(|| format!("cannot read expectations {}", expectations.display()))
        .map_err(Failure::input)?;
    let table = ExpectationTable::parse(&text)
        .with_context(|| format!("in {}", expectations.display()))
        .map_err(Failure::input)?;
    if table.is_empty() {
        eprintln!("warning: {} holds no expectations", expectations.display());
        return Ok(());
    }
    table
        .resolve(scenario.converters.len())
        .with_context(|| format!("in {}", expectations.display()))
        .map_err(Failure::input)?;

    let series = simulate(&scenario)?;
    let metrics = compute_metrics(&series, &table.windows())
        .context("expectation window does not fit the run")
        .map_err(Failure::input)?;
    let outcomes = table.evaluate(&metrics);
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        return Err(Failure {
            code: EXIT_VERIFY_FAILED,
            error: anyhow!("{failed} expectation(s) failed"),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            scenario,
            out,
            overrides,
        } => run(scenario, out, overrides),
        Command::Verify {
            scenario,
            expectations,
            overrides,
        } => verify(scenario, expectations, overrides),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
