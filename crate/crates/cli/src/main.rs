//! `fpma`: session-file driven front end.
//!
//! Every command reads the session JSON, acts, and (if it mutates) writes it
//! back through a temporary file and rename. Running two commands against the
//! same session file at once is not supported.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fpma_core::device::{self, BitPair, Direction, VtShift};
use fpma_core::mcam::{self, TernaryQuery};
use fpma_core::metrics::{bench_report, SwitchingCharge, TimingParams, Workload};
use fpma_core::{Array, ArrayMode, DeviceParams, Error, MCAMBit, Parasitics, StLevel};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NO_MATCH: u8 = 3;
const EXIT_CONVERGENCE: u8 = 4;

/// Points in the diode I-V sweep.
const IV_POINTS: usize = 201;

#[derive(Parser)]
#[command(name = "fpma", version, about = "Reconfigurable ferroelectric MirrorBit array simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an erased session in AND mode.
    Init {
        rows: usize,
        cols: usize,
        /// Device parameter JSON; defaults are used when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Wire resistance between adjacent taps (ohm).
        #[arg(long, default_value_t = 0.0)]
        r_wire: f64,
        /// Match-line sense resistance (ohm).
        #[arg(long, default_value_t = 0.0)]
        r_sense: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Program cells (AND mode only).
    Program(ProgramArgs),
    /// Switch between AND (low) and NOR (high) operation.
    Reconfig {
        session: PathBuf,
        #[arg(long, value_enum)]
        st: St,
    },
    /// Two-step ternary search (NOR mode only). Exits 3 when nothing matches.
    Search {
        session: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-step node and branch CSVs as `<prefix>_step{1,0}_{nodes,branches}.csv`.
        #[arg(long)]
        dump: Option<String>,
    },
    /// Gate sweep of one cell (AND mode only).
    Sweep {
        session: PathBuf,
        #[arg(long)]
        row: usize,
        #[arg(long)]
        col: usize,
        #[arg(long, value_enum)]
        direction: Dir,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-terminal I-V of one cell over +/- v_read.
    Iv {
        session: PathBuf,
        #[arg(long)]
        row: usize,
        #[arg(long)]
        col: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read back one row of MirrorBit pairs (AND mode only).
    Read {
        session: PathBuf,
        #[arg(long)]
        row: usize,
    },
    /// Random write/search workload energy report. The session is not modified.
    Bench {
        session: PathBuf,
        #[arg(long)]
        searches: usize,
        #[arg(long)]
        writes: usize,
        /// Falls back to FPMA_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("payload").required(true).args(["bits", "cam"]))]
struct ProgramArgs {
    session: PathBuf,
    #[arg(long)]
    row: Option<usize>,
    #[arg(long)]
    col: Option<usize>,
    /// Comma-separated source/drain pairs for a whole row, e.g. `00,10,01`.
    #[arg(long)]
    bits: Option<String>,
    /// Ternary word over 0/1/X. With `--col` it is stored down that match
    /// line; with `--row` symbol k is written to column k of that row.
    #[arg(long)]
    cam: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum St {
    Low,
    High,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Dr,
    Sr,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Convergence { .. } => EXIT_CONVERGENCE,
            _ => EXIT_VALIDATION,
        };
        let message = match e {
            Error::Mode { required, .. } => {
                let st = match required {
                    ArrayMode::And => "low",
                    ArrayMode::Nor => "high",
                };
                format!("{e}; run `fpma reconfig <session> --st {st}` first")
            }
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::from(Error::Io(e))
    }
}

fn validation(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message: message.into(),
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Init { rows, cols, params, r_wire, r_sense, out } => {
            let params = match params {
                Some(path) => DeviceParams::from_json(&fs::read_to_string(path)?)?,
                None => DeviceParams::default(),
            };
            let parasitics = Parasitics { r_wire_per_cell: r_wire, r_sense };
            let array = Array::new(rows, cols, params, parasitics)?;
            store(&array, &out)?;
            println!("initialized {rows}x{cols} array in AND mode at {}", out.display());
            Ok(0)
        }
        Command::Program(args) => program(args),
        Command::Reconfig { session, st } => {
            let mut array = Array::load(&session)?;
            let level = match st {
                St::Low => StLevel::Low,
                St::High => StLevel::High,
            };
            array.set_mode(level);
            store(&array, &session)?;
            println!("mode: {:?}", array.mode());
            Ok(0)
        }
        Command::Search { session, query, out, dump } => search(&session, &query, out, dump),
        Command::Sweep { session, row, col, direction, out } => {
            let array = Array::load(&session)?;
            array.require_mode(ArrayMode::And)?;
            let state = array.state(row, col)?;
            let direction = match direction {
                Dir::Dr => Direction::Dr,
                Dir::Sr => Direction::Sr,
            };
            let curve = device::sweep_gate(&array.params, state, direction, VtShift::ZERO);
            let mut csv = String::from("v_gate_V,current_A\n");
            for (v, i) in &curve {
                let _ = writeln!(csv, "{v:.12e},{i:.12e}");
            }
            emit(&csv, out.as_deref())?;
            if out.is_some() {
                let vt = device::extract_vt(&curve, array.params.i_crit)?;
                println!("cell ({row}, {col}) {state} {direction:?}: V_T = {vt:.12e} V");
            }
            Ok(0)
        }
        Command::Iv { session, row, col, out } => {
            let array = Array::load(&session)?;
            let state = array.state(row, col)?;
            let p = &array.params;
            let mut csv = String::from("v_ds_V,current_A\n");
            for k in 0..IV_POINTS {
                let v = -p.v_read + 2.0 * p.v_read * k as f64 / (IV_POINTS - 1) as f64;
                let i = device::diode_current(p, state, v, 0.0, p.v_gate_diode)?;
                let _ = writeln!(csv, "{v:.12e},{i:.12e}");
            }
            emit(&csv, out.as_deref())?;
            if out.is_some() {
                println!("cell ({row}, {col}) {state}: {IV_POINTS} points over +/-{} V", p.v_read);
            }
            Ok(0)
        }
        Command::Read { session, row } => {
            let array = Array::load(&session)?;
            let word = array.read_word(row)?;
            let text: Vec<String> = word.iter().map(BitPair::to_string).collect();
            println!("{}", text.join(","));
            Ok(0)
        }
        Command::Bench { session, searches, writes, seed, out } => {
            let array = Array::load(&session)?;
            let seed = match seed {
                Some(s) => s,
                None => match std::env::var("FPMA_SEED") {
                    Ok(s) => s
                        .trim()
                        .parse()
                        .map_err(|_| validation(format!("FPMA_SEED is not an unsigned integer: {s:?}")))?,
                    Err(_) => 0,
                },
            };
            let workload = Workload::new(searches, writes, seed);
            let report = bench_report(
                &array,
                &workload,
                &TimingParams::default(),
                &SwitchingCharge::default(),
            )?;
            if let Some(path) = out {
                let mut text = report.to_json()?;
                text.push('\n');
                fs::write(path, text)?;
            }
            print!("{}", report.to_table());
            Ok(0)
        }
    }
}

fn program(args: ProgramArgs) -> CmdResult {
    let mut array = Array::load(&args.session)?;
    let pulses = match (&args.bits, &args.cam, args.row, args.col) {
        (Some(bits), None, Some(row), None) => {
            let pairs = bits
                .split(',')
                .map(|s| s.trim().parse::<BitPair>())
                .collect::<Result<Vec<_>, _>>()?;
            array.program_word(row, &pairs)?
        }
        (None, Some(word), None, Some(col)) => {
            array.mcam_write_column(col, &MCAMBit::parse_word(word)?)?
        }
        (None, Some(word), Some(row), None) => {
            let word = MCAMBit::parse_word(word)?;
            if word.len() != array.cols() {
                return Err(Error::Length { expected: array.cols(), actual: word.len() }.into());
            }
            array.require_mode(ArrayMode::And)?;
            let mut pulses = Vec::new();
            for (col, &bit) in word.iter().enumerate() {
                pulses.extend(array.mcam_write(row, col, bit)?);
            }
            pulses
        }
        (Some(_), None, _, _) => return Err(validation("--bits requires --row and no --col")),
        _ => return Err(validation("--cam requires exactly one of --row or --col")),
    };
    store(&array, &args.session)?;
    println!("programmed with {} pulse(s)", pulses.len());
    Ok(0)
}

fn search(session: &Path, query: &str, out: Option<PathBuf>, dump: Option<String>) -> CmdResult {
    let array = Array::load(session)?;
    array.require_mode(ArrayMode::Nor)?;
    let query: TernaryQuery = query.parse()?;
    let results = mcam::search(&array, &query)?;
    if let Some(prefix) = dump {
        for (en, tag) in [(true, "step1"), (false, "step0")] {
            let (network, solution) = mcam::search_step_solution(&array, &query, en)?;
            let mut nodes = Vec::new();
            solution.write_nodes_csv(&network, &mut nodes)?;
            fs::write(format!("{prefix}_{tag}_nodes.csv"), nodes)?;
            let mut branches = Vec::new();
            solution.write_branches_csv(&mut branches)?;
            fs::write(format!("{prefix}_{tag}_branches.csv"), branches)?;
        }
    }
    let mut csv = Vec::new();
    mcam::write_results_csv(&results, &mut csv)?;
    let matched: Vec<usize> = results.iter().filter(|r| r.matched).map(|r| r.ml_index).collect();
    match &out {
        Some(path) => {
            fs::write(path, &csv)?;
            println!("matches: {matched:?}");
        }
        None => io::stdout().write_all(&csv)?,
    }
    Ok(if matched.is_empty() { EXIT_NO_MATCH } else { 0 })
}

fn emit(text: &str, out: Option<&Path>) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, text),
        None => io::stdout().write_all(text.as_bytes()),
    }
}

/// Writes the session next to its destination, then renames over it.
fn store(array: &Array, path: &Path) -> Result<(), Failure> {
    let mut text = array.to_json()?;
    text.push('\n');
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
