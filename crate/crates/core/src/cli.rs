//! The `pdnql` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{Pdn, PdnConfig};
use crate::error::{Error, Result};
use crate::federation::{run_query, RunOptions, TransportKind};
use crate::garble::{
    decode, evaluate_traced, garble, hex, select_input_labels, to_bits, BooleanCircuit, Gate, GateKind,
};
use crate::planner::{explain, plan_query, OptimizerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PLAN: i32 = 2;
pub const EXIT_RUN: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pdnql", version, about = "Query a two-party private data network")]
pub struct Cli {
    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the secure plan of a query.
    Explain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Preset::Full)]
        preset: Preset,
        /// A file holding the query, or the query text itself.
        query: String,
    },
    /// Run a query over the configured providers.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Preset::Full)]
        preset: Preset,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Cost report as JSON on stderr.
        #[arg(long)]
        stats: bool,
        /// Oblivious engine events as JSON lines on stderr.
        #[arg(long)]
        trace: bool,
        #[arg(long, value_enum, default_value_t = Transport::InProcess)]
        transport: Transport,
        query: String,
    },
    /// Garble a circuit, evaluate it and decode the output.
    DemoGarble {
        /// A circuit file, or one of `and`, `or`, `xor`, `not` for a single gate.
        circuit: String,
        /// Alice's and Bob's inputs as integers, e.g. `3,3`.
        #[arg(long, value_delimiter = ',', num_args = 1..=2)]
        inputs: Vec<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Baseline,
    Smc,
    Full,
}

impl Preset {
    pub fn config(self) -> OptimizerConfig {
        match self {
            Preset::Baseline => OptimizerConfig::baseline(),
            Preset::Smc => OptimizerConfig::smc_minimized(),
            Preset::Full => OptimizerConfig::full(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Transport {
    InProcess,
    Socket,
}

fn query_text(arg: &str) -> Result<String> {
    let path = Path::new(arg);
    if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| Error::Load(format!("cannot read {arg}: {e}")))
    } else {
        Ok(arg.to_string())
    }
}

fn single_gate(kind: GateKind) -> BooleanCircuit {
    let (inputs, bob) = match kind.arity() {
        1 => (vec![0], vec![]),
        _ => (vec![0, 1], vec![1]),
    };
    let out = inputs.len();
    BooleanCircuit::new(vec![Gate { id: 0, kind, inputs, output: out }], vec![0], bob, vec![out])
        .expect("single gate is well formed")
}

fn load_circuit(arg: &str) -> Result<BooleanCircuit> {
    match arg.to_ascii_lowercase().as_str() {
        "and" => Ok(single_gate(GateKind::And)),
        "or" => Ok(single_gate(GateKind::Or)),
        "xor" => Ok(single_gate(GateKind::Xor)),
        "not" => Ok(single_gate(GateKind::Not)),
        _ => BooleanCircuit::parse(
            &std::fs::read_to_string(arg).map_err(|e| Error::Circuit(format!("cannot read {arg}: {e}")))?,
        ),
    }
}

fn bits(b: &[bool]) -> String {
    b.iter().map(|x| if *x { '1' } else { '0' }).collect()
}

fn demo_garble(circuit: &str, inputs: &[u64], seed: u64, out: &mut dyn Write) -> Result<()> {
    let c = load_circuit(circuit)?;
    let a = to_bits(inputs.first().copied().unwrap_or(0), c.alice_inputs.len());
    let b = to_bits(inputs.get(1).copied().unwrap_or(0), c.bob_inputs.len());
    let (garbled, tables) = garble(&c, seed)?;
    let io = |e: std::io::Error| Error::Execute(e.to_string());
    writeln!(out, "seed {seed}").map_err(io)?;
    writeln!(out, "alice sends {} garbled gates", garbled.gates.len()).map_err(io)?;
    for g in &garbled.gates {
        let ins: Vec<String> = g.inputs.iter().map(|w| w.to_string()).collect();
        writeln!(out, "G{} {} -> {}", g.gate_id, ins.join(" "), g.output).map_err(io)?;
        for (i, r) in g.rows.iter().enumerate() {
            writeln!(out, "  row {i} {}", hex(r)).map_err(io)?;
        }
    }
    let labels = select_input_labels(&tables, &a, &b)?;
    writeln!(out, "inputs a={} b={} (least significant bit first)", bits(&a), bits(&b)).map_err(io)?;
    for (w, k) in &labels.labels {
        writeln!(out, "  wire {w} label {}", hex(&k.0)).map_err(io)?;
    }
    let (outputs, steps) = evaluate_traced(&garbled, &labels)?;
    writeln!(out, "bob evaluates").map_err(io)?;
    for s in &steps {
        writeln!(out, "  G{} row {} gives {}", s.gate_id, s.row, hex(&s.output.0)).map_err(io)?;
    }
    let decoded = decode(&tables, &outputs)?;
    writeln!(out, "decoded {}", bits(&decoded)).map_err(io)?;
    Ok(())
}

fn load(config: &Path, seed: Option<u64>) -> Result<Pdn> {
    let mut pdn = PdnConfig::load(config)?;
    if let Some(s) = seed {
        pdn.seed = s;
    }
    Ok(pdn)
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Execute(e.to_string());
    match cli.command {
        Command::Explain { config, preset, query } => {
            let pdn = load(&config, cli.seed)?;
            let plan = plan_query(&query_text(&query)?, &pdn.catalog, preset.config())?;
            write!(out, "{}", explain(&plan, None)).map_err(io)?;
        }
        Command::Run { config, preset, format, stats, trace, transport, query } => {
            let pdn = load(&config, cli.seed)?;
            let transport = match transport {
                Transport::InProcess => TransportKind::InProcess,
                Transport::Socket => TransportKind::Socket,
            };
            let opts = RunOptions { config: preset.config(), trace, transport };
            let res = run_query(&query_text(&query)?, &pdn.catalog, &pdn.data, opts)?;
            match format {
                Format::Csv => write!(out, "{}", res.result.to_csv()).map_err(io)?,
                Format::Json => writeln!(out, "{}", res.result.to_json()).map_err(io)?,
            }
            if stats {
                writeln!(err, "{}", res.cost.to_json()).map_err(io)?;
            }
            for e in &res.trace {
                writeln!(err, "{}", serde_json::to_string(e).map_err(|e| Error::Codec(e.to_string()))?).map_err(io)?;
            }
        }
        Command::DemoGarble { circuit, inputs } => {
            demo_garble(&circuit, &inputs, cli.seed.unwrap_or(crate::config::DEFAULT_SEED), out)?;
        }
    }
    Ok(())
}

/// Runs one command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PLAN } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "pdnql: {e}");
            if e.stage().is_plan_time() {
                EXIT_PLAN
            } else {
                EXIT_RUN
            }
        }
    }
}
