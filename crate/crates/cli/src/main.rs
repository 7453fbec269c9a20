use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use memsoc::budget::{audit, bandwidth_audit};
use memsoc::chipdesc::{reference_chip, validate_floorplan, ChipDescription};
use memsoc::harness::{self, SimOptions, Workload};

#[derive(Parser)]
#[command(
    name = "memsoc",
    version,
    about = "Memristive SoC simulator and chip-description auditor"
)]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the reference chip description.
    Describe,
    /// Check a description's floorplan and bond wires.
    Validate {
        /// Description file, or `-` for standard input.
        desc: PathBuf,
    },
    /// Rail currents, pad and pin counts, and mismatches against claimed totals.
    Audit {
        desc: PathBuf,
        /// Exit with status 1 when any mismatch is found.
        #[arg(long)]
        strict: bool,
    },
    /// Run a workload and print the report.
    Simulate {
        desc: PathBuf,
        workload: PathBuf,
        /// Overrides the workload's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the NoC trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the monitor capture in binary form.
        #[arg(long)]
        monitor: Option<PathBuf>,
    },
    /// Memory self-test of every SRAM and the scan-chain check.
    Bist {
        desc: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Place one random stuck-at bit in each SRAM first.
        #[arg(long)]
        inject_fault: bool,
    },
}

fn load_desc(path: &Path) -> Result<ChipDescription> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .context("reading standard input")?;
        s
    } else {
        harness::read_file(path)?
    };
    ChipDescription::from_json(&text).with_context(|| format!("{}", path.display()))
}

fn emit(format: Format, json: String, text: impl FnOnce() -> String) {
    match format {
        Format::Json => println!("{json}"),
        Format::Text => print!("{}", text()),
    }
}

/// `Ok(false)` means the check ran and found problems (exit 1); any error
/// is bad input (exit 2).
fn run(cli: Cli) -> Result<bool> {
    let fmt = cli.format;
    match cli.cmd {
        Cmd::Describe => {
            let desc = reference_chip();
            emit(fmt, desc.to_json(), || {
                let mut s = format!("die {} x {} mm\n", desc.die_width_mm, desc.die_height_mm);
                for b in &desc.blocks {
                    let r = &b.rect;
                    s += &format!(
                        "  {:<20} {:>6.2} {:>6.2} {:>6.2} {:>6.2}\n",
                        b.name, r.x_mm, r.y_mm, r.w_mm, r.h_mm
                    );
                }
                s
            });
            Ok(true)
        }
        Cmd::Validate { desc } => {
            let desc = load_desc(&desc)?;
            let v = validate_floorplan(&desc)?;
            emit(fmt, serde_json::to_string_pretty(&v)?, || {
                if v.is_empty() {
                    "no violations\n".into()
                } else {
                    v.iter().map(|x| format!("{x}\n")).collect()
                }
            });
            Ok(v.is_empty())
        }
        Cmd::Audit { desc, strict } => {
            let desc = load_desc(&desc)?;
            let report = audit(&desc)?;
            let bw = bandwidth_audit(&desc);
            let json = serde_json::json!({ "audit": report, "bandwidth": bw });
            emit(fmt, serde_json::to_string_pretty(&json)?, || {
                format!(
                    "{}\nbandwidth: NoC {:.1} Gbit/s, bridge TX {:.1} Gbit/s, RX {:.1} Gbit/s, monitor at speed: {}\n",
                    report.to_text(),
                    bw.noc_peak_gbps,
                    bw.bridge_tx_gbps,
                    bw.bridge_rx_gbps,
                    bw.monitor_at_speed
                )
            });
            Ok(!strict || report.mismatches.is_empty())
        }
        Cmd::Simulate {
            desc,
            workload,
            seed,
            trace,
            monitor,
        } => {
            let desc = load_desc(&desc)?;
            let w = Workload::load(&workload)?;
            let seed = seed.unwrap_or(w.seed);
            let opts = SimOptions {
                trace: trace.is_some(),
            };
            let out = harness::simulate(&desc, &w, seed, opts)?;
            if let Some(p) = &trace {
                harness::write_file(p, harness::trace_to_csv(&out.trace)?)?;
            }
            if let Some(p) = &monitor {
                harness::write_file(p, harness::monitor_to_bytes(&out.monitor))?;
            }
            emit(fmt, out.report.to_json(), || out.report.to_text());
            Ok(true)
        }
        Cmd::Bist {
            desc,
            seed,
            inject_fault,
        } => {
            let desc = load_desc(&desc)?;
            let r = harness::bist(&desc, seed, inject_fault)?;
            emit(fmt, serde_json::to_string_pretty(&r)?, || r.to_text());
            Ok(r.pass())
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
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
