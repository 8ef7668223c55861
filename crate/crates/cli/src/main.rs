//! `urllc`: command-line front end for the scheduling simulator.
//!
//! Exit codes: 0 success, 1 infeasible or nobody admitted, 2 usage or input
//! error, 3 internal inconsistency.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use urllc_core::admission::{exact_uum_capped, greedy_admission, matching_admission_d1, DEFAULT_EXACT_CAP};
use urllc_core::continuous::{baseline_greedy_continuous, ita_traced, level_thresholds, DEFAULT_D_MAX};
use urllc_core::experiment::{emit_plot_data, run_experiment, summarize, write_csv, ExperimentMode};
use urllc_core::feasibility::{build_relaxed_lp, check_feasibility, Feasibility};
use urllc_core::model::{
    assign_demand_bands, binarize, demand_thresholds, generate_trial, AdmissionResult, InstanceFile,
    ScenarioConfig,
};
use urllc_core::reduction::{graph_to_urllc, UndirectedGraph};
use urllc_core::seed::{trial_rng, Stream};
use urllc_core::Error;

#[derive(Parser)]
#[command(name = "urllc", version, about = "URLLC admission control and resource-block scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one frame from a scenario config and write it as an instance file.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Also binarize with demand bands and s(d_k) thresholds.
        #[arg(long)]
        binary: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide whether a user set of a binary instance can be scheduled.
    Feasible {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated user indices; all users when omitted.
        #[arg(long, value_delimiter = ',')]
        users: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the relaxed LP (first cost draw) in CPLEX LP format.
        #[arg(long)]
        lp_dump: Option<PathBuf>,
    },
    /// Admission control on a binary instance.
    Admit {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Algo::Greedy)]
        algo: Algo,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
        exact_cap: usize,
    },
    /// Iterative Thresholding Algorithm on a continuous instance.
    Ita {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_D_MAX)]
        d_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run the random-placement baseline instead.
        #[arg(long)]
        baseline: bool,
    },
    /// Build the binary instance of an edge-list graph.
    Reduce {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded Monte-Carlo comparison written as CSV.
    Experiment {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Also write per-(R, K, algorithm) means for plotting.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Greedy,
    Exact,
    Matching,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Binary,
    Continuous,
}

enum Outcome {
    Done,
    Negative,
}

fn emit(value: &Value, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn admission_json(res: &AdmissionResult) -> Result<Value, Error> {
    let mut v = serde_json::to_value(res)?;
    v["admitted_users"] = json!(res.admitted_users());
    Ok(v)
}

fn verdict(admitted_any: bool) -> Outcome {
    if admitted_any {
        Outcome::Done
    } else {
        Outcome::Negative
    }
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    match cli.command {
        Command::Generate { config, trial, binary, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let t = generate_trial(&cfg, trial);
            let mut file = InstanceFile::from_grid(&t.grid, &t.utilities, &cfg.sla);
            if binary {
                let demands = assign_demand_bands(&t.mean_snr_db);
                let thresholds = demand_thresholds(&demands, &cfg.sla)?;
                let inst = binarize(&t.grid, &thresholds, &demands, &t.utilities)?;
                let b = InstanceFile::from_binary(&inst);
                file.delta = b.delta;
                file.demands = b.demands;
            }
            emit(&serde_json::to_value(&file)?, out.as_deref())?;
            Ok(Outcome::Done)
        }
        Command::Feasible { instance, users, seed, lp_dump } => {
            let inst = InstanceFile::load(&instance)?.binary()?;
            let users = users.unwrap_or_else(|| (0..inst.users()).collect());
            let mut rng = trial_rng(seed, 0, Stream::Algorithm);
            if let Some(path) = lp_dump {
                let lp = build_relaxed_lp(&inst, &users, &mut trial_rng(seed, 0, Stream::Algorithm))?;
                fs::write(&path, lp.to_lp_format()).map_err(|e| Error::Io { path, source: e })?;
            }
            let out = check_feasibility(&inst, &users, &mut rng)?;
            let feasible = out.status.is_feasible();
            let mut v = json!({
                "feasible": feasible,
                "users": users,
                "retry_count": out.retry_count,
                "used_fallback": out.used_fallback,
            });
            if let Feasibility::Feasible(x) = &out.status {
                v["schedule"] = serde_json::to_value(x)?;
            }
            emit(&v, None)?;
            Ok(verdict(feasible))
        }
        Command::Admit { instance, algo, seed, exact_cap } => {
            let inst = InstanceFile::load(&instance)?.binary()?;
            let mut v = match algo {
                Algo::Greedy => {
                    let (res, trace) = greedy_admission(&inst, &mut trial_rng(seed, 0, Stream::Algorithm));
                    let mut v = admission_json(&res)?;
                    v["trace"] = serde_json::to_value(trace)?;
                    v
                }
                Algo::Exact => admission_json(&exact_uum_capped(&inst, exact_cap)?)?,
                Algo::Matching => admission_json(&matching_admission_d1(&inst)?)?,
            };
            let any = v["admitted_users"].as_array().is_some_and(|a| !a.is_empty());
            v["algorithm"] = json!(match algo {
                Algo::Greedy => "greedy",
                Algo::Exact => "exact",
                Algo::Matching => "matching",
            });
            emit(&v, None)?;
            Ok(verdict(any))
        }
        Command::Ita { instance, d_max, seed, baseline } => {
            let file = InstanceFile::load(&instance)?;
            let (grid, utilities, sla) = (file.grid()?, file.utilities(), file.sla()?);
            let v = if baseline {
                let mut rng = trial_rng(seed, 0, Stream::Baseline);
                let res = baseline_greedy_continuous(&grid, &utilities, &sla, &mut rng)?;
                let mut v = admission_json(&res)?;
                v["algorithm"] = json!("baseline");
                v
            } else {
                let thresholds = level_thresholds(&sla, d_max)?;
                let mut rng = trial_rng(seed, 0, Stream::Algorithm);
                let (res, levels) = ita_traced(&grid, &utilities, &thresholds, &mut rng)?;
                let mut v = admission_json(&res)?;
                v["algorithm"] = json!("ita");
                v["levels"] = serde_json::to_value(levels)?;
                v
            };
            let any = v["admitted_users"].as_array().is_some_and(|a| !a.is_empty());
            emit(&v, None)?;
            Ok(verdict(any))
        }
        Command::Reduce { graph, out } => {
            let g = UndirectedGraph::load(&graph)?;
            let file = InstanceFile::from_binary(&graph_to_urllc(&g));
            emit(&serde_json::to_value(&file)?, out.as_deref())?;
            Ok(Outcome::Done)
        }
        Command::Experiment { mode, config, out, seed, trials, plot } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let mode = match mode {
                Mode::Binary => ExperimentMode::Binary,
                Mode::Continuous => ExperimentMode::Continuous,
            };
            let rows = run_experiment(&cfg, mode)?;
            write_csv(&rows, &out)?;
            let stats = summarize(&rows);
            if let Some(path) = plot {
                emit_plot_data(&stats, &path)?;
            }
            for g in &stats.groups {
                eprintln!(
                    "R={} K={} {:<8} trials={} admitted {:.3} ± {:.3} utility {:.3} ± {:.3}",
                    g.blocks, g.users, g.algorithm, g.trials, g.mean_admitted, g.std_admitted, g.mean_utility, g.std_utility
                );
            }
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(1),
        Err(e @ (Error::Inconsistent(_) | Error::LpNumerical(_))) => {
            eprintln!("urllc: internal error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("urllc: {e}");
            ExitCode::from(2)
        }
    }
}
