use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use combom::campaign::{
    hypervolume_evolution, read_log, resume_campaign, run_campaign, CampaignOutcome, RunPaths,
};
use combom::config::{ReplayFixture, RunFile};
use combom::core::SubsetMask;
use combom::error::{Error, Result};
use combom::mobo::RefPoint;

#[derive(Parser)]
#[command(name = "combom", version, about = "Combinatorial multi-objective Bayesian optimization over exemplar subsets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more campaigns described by a run file.
    Run {
        /// TOML or JSON run file ([campaign] + [problem]).
        #[arg(long)]
        config: PathBuf,
        /// Override the configured strategy (combom|rs|ga|sa|hc|fixed-mask).
        #[arg(long)]
        strategy: Option<String>,
        /// Run a single seed instead of every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Resume from a state file written by an interrupted run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Output directory for logs and state files.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Print the Pareto front of one or more logs and their hypervolume
    /// evolution; multiple logs additionally report the median final
    /// hypervolume across seeds.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        log: Vec<PathBuf>,
        /// Reference accuracy (fraction).
        #[arg(long, default_value_t = 0.0)]
        ref_acc: f64,
        /// Reference calibration error (fraction).
        #[arg(long, default_value_t = 1.0)]
        ref_ece: f64,
        /// Write the hypervolume-evolution CSV here instead of stdout
        /// (single log only).
        #[arg(long)]
        hv_csv: Option<PathBuf>,
    },
    /// Emit CSV series (per log and the median across logs) for plotting.
    PlotData {
        #[arg(long, required = true, num_args = 1..)]
        logs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        ref_acc: f64,
        #[arg(long, default_value_t = 1.0)]
        ref_ece: f64,
    },
    /// Re-evaluate fixture masks against a replay cache and check the
    /// recorded metrics bit-exactly.
    ReplayVerify {
        #[arg(long)]
        config: PathBuf,
        /// JSON fixture with masks and their recorded (acc, ece).
        #[arg(long)]
        fixtures: PathBuf,
        /// Export the full evaluation report (bins and per-instance
        /// records) for each mask into this directory.
        #[arg(long)]
        export_reports: Option<PathBuf>,
    },
}

fn main() {
    if let Err(e) = dispatch() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn dispatch() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            strategy,
            seed,
            resume,
            out,
        } => cmd_run(&config, strategy.as_deref(), seed, resume.as_deref(), &out),
        Command::Report {
            log,
            ref_acc,
            ref_ece,
            hv_csv,
        } => cmd_report(&log, ref_acc, ref_ece, hv_csv.as_deref()),
        Command::PlotData {
            logs,
            out,
            ref_acc,
            ref_ece,
        } => cmd_plot_data(&logs, &out, ref_acc, ref_ece),
        Command::ReplayVerify {
            config,
            fixtures,
            export_reports,
        } => cmd_replay_verify(&config, &fixtures, export_reports.as_deref()),
    }
}

fn load_run_file(path: &Path) -> Result<RunFile> {
    let mut file = RunFile::load(path)?;
    if let Some(base) = path.parent() {
        file.anchor_paths(base);
    }
    Ok(file)
}

fn print_outcome(outcome: &CampaignOutcome, ref_point: &RefPoint) -> Result<()> {
    let hv = combom::mobo::hypervolume_2d(&outcome.front.max_pairs(), ref_point)?;
    println!("evaluations: {}", outcome.log.len());
    println!("front size:  {}", outcome.front.len());
    println!("hypervolume: {hv:.6}");
    println!("{:<10} {:<34} {:>8} {:>8}", "iteration", "mask", "acc", "ece");
    for obs in outcome.front.points() {
        println!(
            "{:<10} {:<34} {:>8.4} {:>8.4}",
            obs.iteration,
            obs.mask.to_bitstring(),
            obs.value.acc(),
            obs.value.ece()
        );
    }
    Ok(())
}

fn cmd_run(
    config: &Path,
    strategy: Option<&str>,
    seed: Option<u64>,
    resume: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let file = load_run_file(config)?;
    let mut cfg = file.campaign.clone();
    if let Some(s) = strategy {
        cfg.strategy = s.parse()?;
    }
    cfg.validate()?;
    let built = file.problem.build(&cfg.eval, cfg.m)?;
    let problem = built.as_problem();
    std::fs::create_dir_all(out)?;

    let seeds: Vec<u64> = match seed {
        Some(s) => vec![s],
        None => cfg.seeds.clone(),
    };
    if resume.is_some() && seeds.len() != 1 {
        return Err(Error::Config("--resume requires --seed".into()));
    }
    for &s in &seeds {
        let paths = RunPaths::in_dir(out, cfg.strategy, s);
        let outcome = match resume {
            Some(state) => resume_campaign(state, &cfg, s, problem, &paths)?,
            None => run_campaign(&cfg, s, problem, Some(&paths))?,
        };
        println!("== strategy {:?}, seed {s} ==", cfg.strategy);
        print_outcome(&outcome, &cfg.ref_point)?;
        println!("log:   {}", paths.log.display());
        println!("state: {}", paths.state.display());
    }
    Ok(())
}

fn cmd_report(log_paths: &[PathBuf], ref_acc: f64, ref_ece: f64, hv_csv: Option<&Path>) -> Result<()> {
    let ref_point = RefPoint::from_acc_ece(ref_acc, ref_ece);
    if hv_csv.is_some() && log_paths.len() != 1 {
        return Err(Error::Config("--hv-csv needs exactly one --log".into()));
    }
    let mut final_hvs = Vec::with_capacity(log_paths.len());
    for log_path in log_paths {
        let log = read_log(log_path)?;
        let front = combom::core::pareto_front(&log)?;
        if log_paths.len() > 1 {
            println!("== {} ==", log_path.display());
        }
        print_outcome(
            &CampaignOutcome {
                log: log.clone(),
                front,
            },
            &ref_point,
        )?;
        let evolution = hypervolume_evolution(&log, &ref_point)?;
        final_hvs.push(evolution.last().map(|&(_, hv)| hv).unwrap_or(0.0));
        let mut csv = String::from("iteration,hypervolume\n");
        for (iteration, hv) in &evolution {
            csv.push_str(&format!("{iteration},{hv}\n"));
        }
        match hv_csv {
            Some(path) => {
                std::fs::write(path, csv)?;
                println!("hypervolume evolution: {}", path.display());
            }
            None => print!("{csv}"),
        }
    }
    if final_hvs.len() > 1 {
        final_hvs.sort_by(|a, b| a.partial_cmp(b).expect("finite hypervolume"));
        let median = if final_hvs.len() % 2 == 1 {
            final_hvs[final_hvs.len() / 2]
        } else {
            0.5 * (final_hvs[final_hvs.len() / 2 - 1] + final_hvs[final_hvs.len() / 2])
        };
        println!("median final hypervolume across {} runs: {median:.6}", final_hvs.len());
    }
    Ok(())
}

fn cmd_plot_data(logs: &[PathBuf], out: &Path, ref_acc: f64, ref_ece: f64) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let ref_point = RefPoint::from_acc_ece(ref_acc, ref_ece);
    let mut series: Vec<Vec<f64>> = Vec::new();
    for log_path in logs {
        let log = read_log(log_path)?;
        let evolution = hypervolume_evolution(&log, &ref_point)?;
        let stem = log_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("log");
        let mut csv = String::from("iteration,hypervolume\n");
        for (iteration, hv) in &evolution {
            csv.push_str(&format!("{iteration},{hv}\n"));
        }
        let path = out.join(format!("{stem}_hv.csv"));
        std::fs::write(&path, csv)?;
        println!("wrote {}", path.display());
        series.push(evolution.into_iter().map(|(_, hv)| hv).collect());
    }
    // Median across runs, aligned by evaluation index.
    let horizon = series.iter().map(|s| s.len()).min().unwrap_or(0);
    let mut csv = String::from("evaluation,median_hypervolume\n");
    for i in 0..horizon {
        let mut column: Vec<f64> = series.iter().map(|s| s[i]).collect();
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite hypervolume"));
        let median = if column.len() % 2 == 1 {
            column[column.len() / 2]
        } else {
            0.5 * (column[column.len() / 2 - 1] + column[column.len() / 2])
        };
        csv.push_str(&format!("{},{median}\n", i + 1));
    }
    let path = out.join("median_hv.csv");
    std::fs::write(&path, csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_replay_verify(config: &Path, fixtures: &Path, export_reports: Option<&Path>) -> Result<()> {
    let file = load_run_file(config)?;
    let fixture = ReplayFixture::load(fixtures)?;
    let built = file.problem.build(&file.campaign.eval, file.campaign.m)?;
    let problem = built.as_llm().ok_or_else(|| {
        Error::Config("replay-verify needs an llm problem in the run file".into())
    })?;
    if let Some(dir) = export_reports {
        std::fs::create_dir_all(dir)?;
    }
    let mut failures = 0usize;
    for entry in &fixture.entries {
        let mask = SubsetMask::from_bitstring(&entry.mask)?;
        let (value, report) = problem.evaluate_with_report(&mask)?;
        if let Some(dir) = export_reports {
            let path = dir.join(format!("report_{}.json", entry.mask));
            std::fs::write(&path, serde_json::to_string_pretty(&report.to_json())?)?;
        }
        let ok = value.acc() == entry.acc && value.ece() == entry.ece;
        println!(
            "[{}] mask {}: acc {:.17} (recorded {:.17}), ece {:.17} (recorded {:.17})",
            if ok { "PASS" } else { "FAIL" },
            entry.mask,
            value.acc(),
            entry.acc,
            value.ece(),
            entry.ece
        );
        if !ok {
            failures += 1;
        }
    }
    println!(
        "replay-verify: {}/{} masks reproduced bit-exactly; {} network calls",
        fixture.entries.len() - failures,
        fixture.entries.len(),
        problem.backend.request_count()
    );
    if failures > 0 {
        return Err(Error::Config(format!(
            "{failures} fixture masks did not reproduce"
        )));
    }
    Ok(())
}
