use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kfl::error::{EXIT_ACCEPTANCE, EXIT_OK};
use kfl::fixtures::{load_profile_file, FixtureSource};
use kfl::formats::parse_tensor;
use kfl::scenario::{run_scenario, Scenario};
use kfl::verify::{verify_all, VerifyOptions};
use kfl::{pool, HarnessError};
use kfl_core::flow::FlowState;
use kfl_core::functionals::futaki_report;
use kfl_core::positivity::{certify, DEFAULT_RESTARTS};
use kfl_core::spectral::spectral_report;
use serde_json::json;

#[derive(Parser)]
#[command(name = "kfl", version, about = "Kähler-Ricci flow laboratory on U(n)-invariant metrics of P¹ and P²")]
struct Cli {
    /// Directory of `<name>.profile` fixture files overriding the embedded ones
    /// (also `KFL_FIXTURES`).
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one or more scenarios and write CSV plus JSON manifests.
    RunFlow {
        #[arg(long, required = true)]
        scenario: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the acceptance suite.
    Verify {
        /// Comma-separated criterion ids (c1..c10) or name fragments.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "kfl-verify")]
        out: PathBuf,
    },
    /// Smallest positive eigenvalues λ and λ̃ of a profile.
    Spectrum {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = kfl_core::spectral::DEFAULT_SECTORS)]
        sectors: usize,
    },
    /// Griffiths and Nakano certificates of a curvature tensor file.
    CheckPositivity {
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
    },
    /// Futaki invariant on the holomorphic basis of a profile.
    Futaki {
        #[arg(long)]
        profile: PathBuf,
    },
}

fn fixtures(cli: &Option<PathBuf>) -> FixtureSource {
    match cli {
        Some(d) => FixtureSource::Dir(d.clone()),
        None => FixtureSource::from_env(),
    }
}

fn id_of(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("profile").to_string()
}

fn print_json(v: &impl serde::Serialize) -> Result<i32, HarnessError> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(EXIT_OK)
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    let src = fixtures(&cli.fixtures);
    match cli.cmd {
        Cmd::RunFlow { scenario, out } => {
            // Parse everything first: a bad file stops the batch before any stepping.
            let parsed = scenario.iter().map(|p| Scenario::from_file(p)).collect::<Result<Vec<_>, _>>()?;
            let results = pool::map(parsed, pool::width(), |s| {
                let r = run_scenario(&s, &src, &out);
                (s.name, r)
            });
            let mut code = EXIT_OK;
            for r in results {
                match r {
                    Ok((name, Ok(o))) => {
                        let last = o.run.series.samples.last();
                        println!(
                            "{name}: {} samples, final sup|R-n| {:.3e} -> {}",
                            o.run.series.samples.len(),
                            last.map(|s| s.sup_r_minus_n).unwrap_or(f64::NAN),
                            o.csv_path.display()
                        );
                        if o.bounds_ok == Some(false) {
                            eprintln!("{name}: Perelman bounds exceeded (see manifest)");
                        }
                    }
                    Ok((name, Err(e))) => {
                        eprintln!("{name}: {e}");
                        code = code.max(e.exit_code());
                    }
                    Err(panic) => {
                        eprintln!("scenario worker panicked: {panic}");
                        code = code.max(kfl::error::EXIT_HALT);
                    }
                }
            }
            Ok(code)
        }
        Cmd::Verify { filter, seed, out } => {
            let opts = VerifyOptions { seed, filter, fixtures: src, out, threads: pool::width() };
            let report = verify_all(&opts)?;
            for c in &report.criteria {
                println!("{}", c.line());
            }
            if report.criteria.is_empty() {
                return Err(HarnessError::Config("filter selects no criterion".into()));
            }
            Ok(if report.passed { EXIT_OK } else { EXIT_ACCEPTANCE })
        }
        Cmd::Spectrum { profile, sectors } => {
            let p = load_profile_file(&profile)?.profile;
            let r = spectral_report(&p, sectors).map_err(HarnessError::Halt)?;
            print_json(&r)
        }
        Cmd::CheckPositivity { tensor, seed, restarts } => {
            let text = std::fs::read_to_string(&tensor).map_err(|e| HarnessError::io(&tensor, e))?;
            let t = parse_tensor(&text)?;
            let r = certify(&t, seed, restarts)?;
            print_json(&json!({
                "griffiths_min": r.griffiths_min,
                "nakano_min_sym": r.nakano_min_sym,
                "nakano_min_full": r.nakano_min_full,
                "griffiths_certified": r.griffiths_certified,
                "nakano_certified": r.nakano_certified,
                "seed": r.seed,
                "restarts": r.restarts,
            }))
        }
        Cmd::Futaki { profile } => {
            let p = load_profile_file(&profile)?.profile;
            let s = FlowState::new(p)?;
            print_json(&futaki_report(&s, &id_of(&profile))?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
