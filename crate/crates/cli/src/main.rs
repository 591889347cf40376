mod config;
mod run;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::parser::ValueSource;
use clap::{ArgMatches, Args, Command, CommandFactory, Parser, Subcommand};
use nodal_lab::Error;

use config::{parse_config, KEYS};

const EXIT_GATE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_GUARD: u8 = 3;

#[derive(Parser)]
#[command(name = "nodal-lab", version, about = "Numerical experiments on nodal sets of Laplace eigenmodes")]
#[command(subcommand_required = true, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List modes up to --mu-max with Weyl counts
    Spectrum(Opts),
    /// Tube volume scaling Vol/(mu delta)
    Tube(Opts),
    /// Nodal measure / mu
    Yau(Opts),
    /// Largest distance to the nodal set
    Density(Opts),
    /// Box statistics: comparability set or nodal-box counts (--box-stat)
    Boxes(Opts),
    /// Nodal domains, areas and inner radii of 2D modes
    Dim2(Opts),
    /// Approximation exponents of sampled points
    Dioph(Opts),
    /// Borel-Cantelli sums and hit fractions
    BorelCantelli(Opts),
    /// Summarize saved reports in --out
    Report(Opts),
}

/// Every option may also be set as `key=value` in the --config file.
#[derive(Args)]
struct Opts {
    /// key=value file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// interval, box<n> or torus<n>
    #[arg(long)]
    domain: Option<String>,
    /// Per-axis weights, comma separated
    #[arg(long)]
    alpha: Option<String>,
    /// Mode indices, e.g. 3,4 or 3,4;6,8
    #[arg(long)]
    m: Option<String>,
    #[arg(long = "mu-min")]
    mu_min: Option<String>,
    #[arg(long = "mu-max")]
    mu_max: Option<String>,
    /// Tube widths, comma separated
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    /// Tube widths as mu*delta, comma separated
    #[arg(long = "mu-delta", allow_hyphen_values = true)]
    mu_delta: Option<String>,
    /// Points per wavelength
    #[arg(long)]
    ppw: Option<String>,
    /// Comparability factor A
    #[arg(long)]
    a: Option<String>,
    /// Approximation exponent for event listings
    #[arg(long)]
    b: Option<String>,
    /// Approximation constant C
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    points: Option<String>,
    #[arg(long = "k-max")]
    k_max: Option<String>,
    #[arg(long)]
    k0: Option<String>,
    #[arg(long = "fit-mu-min")]
    fit_mu_min: Option<String>,
    #[arg(long = "fit-mu-max")]
    fit_mu_max: Option<String>,
    /// modes or distinct
    #[arg(long)]
    convention: Option<String>,
    /// euclidean or max
    #[arg(long)]
    metric: Option<String>,
    /// comparability or nodal
    #[arg(long = "box-stat")]
    box_stat: Option<String>,
    /// Drop Dirichlet boundary zeros from the nodal set
    #[arg(long = "exclude-boundary")]
    exclude_boundary: bool,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    #[arg(long = "cache-dir")]
    cache_dir: Option<String>,
    #[arg(long = "no-cache")]
    no_cache: bool,
    /// Worker threads
    #[arg(long)]
    jobs: Option<String>,
}

/// Flags given on the command line, keyed by long name.
fn given_flags(cmd: &Command, m: &ArgMatches) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        let Some(long) = arg.get_long() else { continue };
        if long == "config" || m.value_source(id) != Some(ValueSource::CommandLine) {
            continue;
        }
        let v = match m.try_get_one::<bool>(id) {
            Ok(Some(b)) => b.to_string(),
            _ => m.get_one::<String>(id).cloned().unwrap_or_default(),
        };
        out.insert(long.to_string(), v);
    }
    out
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::ResourceGuard(_) | Error::Resolution { .. } => EXIT_GUARD,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let mut cli = Cli::command();
    let matches = match cli.try_get_matches_from_mut(std::env::args_os()) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_INPUT),
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let sub_cmd = cli.find_subcommand(name).expect("known subcommand");
    let flags = given_flags(sub_cmd, sub);
    debug_assert!(flags.keys().all(|k| KEYS.contains(&k.as_str())));
    let file = sub.get_one::<PathBuf>("config");
    let cfg = match parse_config(name, &flags, file.map(PathBuf::as_path)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    if let Some(j) = cfg.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    if name == "report" {
        return match run::summarize_dir(&cfg.out) {
            Ok((lines, all)) => {
                for l in lines {
                    println!("{l}");
                }
                ExitCode::from(if all { 0 } else { EXIT_GATE })
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_for(&e))
            }
        };
    }
    let results = match run::dispatch(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_for(&e));
        }
    };
    let mut code = 0;
    for (report, extra) in results {
        let report = report.with_config(cfg.echo());
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        let written = report.write(&cfg.out).and_then(|(json, csv)| {
            let stem = report.file_stem();
            for (suffix, body) in &extra {
                std::fs::write(cfg.out.join(format!("{stem}-{suffix}")), body)?;
            }
            Ok((json, csv))
        });
        match written {
            Ok((json, csv)) => {
                println!("{}", report.summary_line());
                println!("  {}\n  {}", json.display(), csv.display());
            }
            Err(e) => {
                eprintln!("error: writing reports: {e}");
                return ExitCode::from(EXIT_INPUT);
            }
        }
        let guarded: Vec<_> = report.cells.iter().filter(|c| c.skipped_by_guard()).collect();
        for c in &guarded {
            eprintln!("guard: cell `{}`: {}", c.label, c.skipped.as_deref().unwrap_or(""));
        }
        if !guarded.is_empty() {
            code = EXIT_GUARD;
        } else if !report.passed && code == 0 {
            code = EXIT_GATE;
        }
    }
    ExitCode::from(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_mirror_config_keys() {
        let cli = Cli::command();
        let sub = cli.find_subcommand("tube").unwrap();
        let mut longs: Vec<&str> = sub
            .get_arguments()
            .filter_map(|a| a.get_long())
            .filter(|l| *l != "config" && *l != "help")
            .collect();
        longs.sort_unstable();
        let mut keys = KEYS.to_vec();
        keys.sort_unstable();
        assert_eq!(longs, keys);
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
