use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ocmdp::cn::{ocmdp_cn, solve_cn};
use ocmdp::model::{
    fmt_rational, format_aautomaton, format_cmd_strategy, format_counter_regular, format_md_strategy,
    parse_cmd_strategy, parse_counter_regular, parse_mdp, parse_ocmdp, parse_solvency, FiniteMdp,
};
use ocmdp::oracle::{
    brute_force_qual_mp, brute_force_st, cmd_cn_value, enumerate_cmd, simulate, truncated_termination_lower_bound,
    OracleError, SimMode, SimOptions, SimStrategy,
};
use ocmdp::qualmp::qual_mp;
use ocmdp::solvency::{qual_bankruptcy, Mode};
use ocmdp::termination::{
    nt_membership, nt_value_one, st_candidates, st_merge, st_optimal_strategy, CandidateOutcome, TerminationError,
};
use ocmdp::{Config, ModelError, OcMdp, Rational};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ModelError },
    #[error("bad configuration `{0}` (expected <state>:<counter>)")]
    BadConfig(String),
    #[error(transparent)]
    Termination(#[from] TerminationError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Analyses of one-counter MDPs, reward MDPs and solvency games.
#[derive(Parser, Debug)]
#[command(name = "ocmdp", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CN values of an OC-MDP and an optimal counter-oblivious strategy.
    Cn { file: PathBuf },
    /// CN values of a reward MDP and an optimal MD strategy.
    MdpCn { file: PathBuf },
    /// Vertices winning the mean-payoff objective almost surely.
    MdpQualmp { file: PathBuf },
    /// Configurations with non-selective termination value one.
    Nt {
        file: PathBuf,
        /// Only decide `<state>:<counter>`; exit 1 if its value is below one.
        #[arg(long)]
        config: Option<String>,
    },
    /// Rectangles, automaton and strategy for selective termination.
    St {
        file: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write the candidate outcomes and the merged coloring here.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Qualitative bankruptcy; exit 1 when the answer is no.
    Solvency {
        file: PathBuf,
        /// One of p>0, p=1, p=0, p<1; all four when omitted.
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Monte-Carlo runs under a strategy (the NT strategy by default).
    Simulate(SimulateArgs),
    /// Brute-force cross-checks.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Parse a model file and report its kind and size.
    Validate { file: PathBuf },
}

#[derive(Args, Debug)]
struct SimulateArgs {
    file: PathBuf,
    /// Start configuration `<state>:<counter>`.
    #[arg(long)]
    config: String,
    /// A `cmd` or `cregular` strategy file.
    #[arg(long)]
    strategy: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    steps: u64,
    #[arg(long, default_value_t = 10_000)]
    runs: u64,
    #[arg(long, env = "OCMDP_SEED", default_value_t = 0)]
    seed: u64,
    /// Let the counter go negative and use positive rules throughout.
    #[arg(long)]
    boundaryless: bool,
}

#[derive(Subcommand, Debug)]
enum OracleCommand {
    /// Best CN value over all counter-oblivious selectors.
    Cn {
        file: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        bound: usize,
    },
    /// Mean-payoff winning set over all MD strategies.
    Qualmp {
        file: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        bound: usize,
    },
    /// Optimal termination probability with the counter capped.
    Truncated {
        file: PathBuf,
        #[arg(long)]
        config: String,
        #[arg(long)]
        cap: usize,
    },
    /// Configurations up to `levels` with an ST-optimal strategy found by
    /// enumeration (an under-approximation).
    St {
        file: PathBuf,
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        cap: usize,
        #[arg(long, default_value_t = 1_000_000)]
        bound: usize,
    },
}

/// Result text plus whether the answer counts as "yes".
struct Outcome {
    text: String,
    yes: bool,
}

fn yes(text: String) -> Outcome {
    Outcome { text, yes: true }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load<T>(path: &Path, parse: impl Fn(&str) -> Result<T, ModelError>) -> Result<T, CliError> {
    parse(&read(path)?).map_err(|source| CliError::Parse { path: path.to_path_buf(), source })
}

fn parse_config(a: &OcMdp, s: &str) -> Result<Config, CliError> {
    let bad = || CliError::BadConfig(s.to_string());
    let (q, i) = s.rsplit_once(':').ok_or_else(bad)?;
    let p = a.state_index(q).ok_or_else(bad)?;
    let i: i64 = i.parse().map_err(|_| bad())?;
    Ok(Config::new(p, i))
}

fn values_block(names: &[String], values: &[Rational]) -> String {
    let mut out = String::from("values\n");
    for (n, v) in names.iter().zip(values) {
        let _ = writeln!(out, "{n} {}", fmt_rational(v));
    }
    out
}

fn set_block(header: &str, names: &[String], set: &[bool]) -> String {
    let mut out = format!("{header}\n");
    for (n, &b) in names.iter().zip(set) {
        let _ = writeln!(out, "{n} {}", if b { "yes" } else { "no" });
    }
    out
}

fn run(cmd: Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Cn { file } => {
            let a = load(&file, parse_ocmdp)?;
            let (v, s) = ocmdp_cn(&a);
            Ok(yes(format!("{}\n{}", values_block(a.names(), &v), format_cmd_strategy(&a, &s))))
        }
        Command::MdpCn { file } => {
            let m = load(&file, parse_mdp)?;
            let (v, s) = solve_cn(&m);
            Ok(yes(format!("{}\n{}", values_block(m.names(), &v), format_md_strategy(&m, &s))))
        }
        Command::MdpQualmp { file } => {
            let m = load(&file, parse_mdp)?;
            let (win, s) = qual_mp(&m);
            Ok(yes(format!("{}\n{}", set_block("winning", m.names(), &win), format_md_strategy(&m, &s))))
        }
        Command::Nt { file, config } => {
            let a = load(&file, parse_ocmdp)?;
            let ans = nt_value_one(&a);
            if let Some(c) = config {
                let c = parse_config(&a, &c)?;
                if c.counter < 0 {
                    return Err(CliError::BadConfig(format!("{}:{}", a.name(c.state), c.counter)));
                }
                let one = nt_membership(&ans, c.state, c.counter as u64);
                let text =
                    format!("{}:{} {}\n", a.name(c.state), c.counter, if one { "value-one" } else { "below-one" });
                return Ok(Outcome { text, yes: one });
            }
            let mut out = String::from("nt\n");
            for p in 0..a.num_states() {
                match ans.thresholds[p] {
                    _ if ans.safe[p] => writeln!(out, "{} all", a.name(p)),
                    Some(t) => writeln!(out, "{} upto={t}", a.name(p)),
                    None => unreachable!("unsafe states carry a threshold"),
                }
                .expect("write to string");
            }
            Ok(yes(format!("{out}\n{}", format_cmd_strategy(&a, &ans.strategy))))
        }
        Command::St { file, jobs, certificate } => {
            let a = load(&file, parse_ocmdp)?;
            let cands = st_candidates(&a, jobs)?;
            let rect = st_merge(&a, &cands)?;
            let strat = st_optimal_strategy(&a, &rect)?;
            let text = format!(
                "{}\n{}\n{}",
                rect.format(&a),
                format_aautomaton(&a, &rect.automaton()),
                format_counter_regular(&a, &strat)
            );
            if let Some(path) = certificate {
                let mut cert = String::new();
                for c in &cands {
                    let what = match c.outcome {
                        CandidateOutcome::ColorConflict => "color-conflict",
                        CandidateOutcome::ValueConflict => "value-conflict",
                        CandidateOutcome::PathConflict => "path-conflict",
                        CandidateOutcome::Accepted(_) => "accepted",
                    };
                    let mask: String =
                        (0..a.num_states()).map(|p| if c.mask >> p & 1 == 1 { 'B' } else { 'W' }).collect();
                    let _ = writeln!(cert, "candidate period={} column={mask} {what}", c.period);
                }
                cert.push('\n');
                cert += &rect.format(&a);
                std::fs::write(&path, cert).map_err(|source| CliError::Io { path, source })?;
            }
            Ok(yes(text))
        }
        Command::Solvency { file, mode } => {
            let g = load(&file, parse_solvency)?;
            let modes = mode.map_or(Mode::ALL.to_vec(), |m| vec![m]);
            let mut text = String::new();
            let mut all = true;
            for m in modes {
                let ans = qual_bankruptcy(&g, m);
                all &= ans;
                let _ = writeln!(text, "{m} {}", if ans { "yes" } else { "no" });
            }
            Ok(Outcome { text, yes: mode.is_none() || all })
        }
        Command::Simulate(s) => {
            let a = load(&s.file, parse_ocmdp)?;
            let start = parse_config(&a, &s.config)?;
            let opts = SimOptions {
                steps: s.steps,
                runs: s.runs,
                seed: s.seed,
                mode: if s.boundaryless { SimMode::Boundaryless } else { SimMode::Bounded },
            };
            let report = match &s.strategy {
                None => simulate(&a, SimStrategy::Cmd(&nt_value_one(&a).strategy), start, opts)?,
                Some(path) => {
                    let text = read(path)?;
                    let parsed = |e| CliError::Parse { path: path.clone(), source: e };
                    if text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')) == Some("cmd") {
                        let st = parse_cmd_strategy(&a, &text).map_err(parsed)?;
                        simulate(&a, SimStrategy::Cmd(&st), start, opts)?
                    } else {
                        let st = parse_counter_regular(&a, &text).map_err(parsed)?;
                        simulate(&a, SimStrategy::CounterRegular(&st), start, opts)?
                    }
                }
            };
            Ok(yes(report.to_string()))
        }
        Command::Oracle(o) => oracle(o),
        Command::Validate { file } => {
            let text = read(&file)?;
            let head =
                text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).find(|l| !l.is_empty()).unwrap_or("");
            let wrap = |e| CliError::Parse { path: file.clone(), source: e };
            let msg = match head {
                "mdp" => {
                    let m: FiniteMdp = parse_mdp(&text).map_err(wrap)?;
                    format!("ok mdp vertices={}", m.num_vertices())
                }
                "solvency" => {
                    let g = parse_solvency(&text).map_err(wrap)?;
                    format!("ok solvency actions={}", g.actions().len())
                }
                _ => {
                    let a = parse_ocmdp(&text).map_err(wrap)?;
                    format!(
                        "ok ocmdp states={} zero_rules={} positive_rules={} finals={}",
                        a.num_states(),
                        a.zero_rules().len(),
                        a.positive_rules().len(),
                        a.finals().len()
                    )
                }
            };
            Ok(yes(msg + "\n"))
        }
    }
}

fn oracle(o: OracleCommand) -> Result<Outcome, CliError> {
    match o {
        OracleCommand::Cn { file, bound } => {
            let a = load(&file, parse_ocmdp)?;
            let all = enumerate_cmd(&a, bound)?;
            let best: Vec<Rational> = (0..a.num_states())
                .map(|p| all.iter().map(|s| cmd_cn_value(&a, s, p)).max().expect("at least one selector"))
                .collect();
            Ok(yes(values_block(a.names(), &best)))
        }
        OracleCommand::Qualmp { file, bound } => {
            let m = load(&file, parse_mdp)?;
            let win = brute_force_qual_mp(&m, bound)?;
            Ok(yes(set_block("winning", m.names(), &win)))
        }
        OracleCommand::Truncated { file, config, cap } => {
            let a = load(&file, parse_ocmdp)?;
            let c = parse_config(&a, &config)?;
            let v = truncated_termination_lower_bound(&a, c, cap)?;
            Ok(yes(format!("{}:{} cap={cap} {}\n", a.name(c.state), c.counter, fmt_rational(&v))))
        }
        OracleCommand::St { file, levels, cap, bound } => {
            let a = load(&file, parse_ocmdp)?;
            let flags = brute_force_st(&a, levels, cap, bound)?;
            let mut out = String::new();
            for p in 0..a.num_states() {
                let row: String = flags.iter().map(|l| if l[p] { 'B' } else { 'W' }).collect();
                let _ = writeln!(out, "{} {row}", a.name(p));
            }
            Ok(yes(out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(o) => {
            print!("{}", o.text);
            if o.yes {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
