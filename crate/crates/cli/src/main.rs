//! `redfin`: assemble, run, verify and time programs for the REDFIN-style ISA.
//!
//! Exit codes: 0 success or proven, 1 falsified, 2 usage or input error,
//! 3 unknown or solver failure.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use redfin_core::asm;
use redfin_core::hll::{compile_program, parse_expr, CompileTarget};
use redfin_core::isa::{Instruction, InstructionCode, Register};
use redfin_core::machine::{decode_image, encode_image, parse_data, MEMORY_SIZE};
use redfin_core::smt::{QueryStats, Solver, Verdict};
use redfin_core::verify::{self, Options, PropertySpec, Report, TimingReport, VerifyError};
use redfin_core::{ConcreteState, CycleModel, Interpreter};

#[derive(Parser, Debug)]
#[command(name = "redfin", version, about = "Assembler, simulator and verifier for a REDFIN-style ISA")]
struct Cli {
    /// Print machine-readable JSON reports.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemble a .s file into a binary image.
    Asm {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the assembly listing of a binary image or .s file.
    Disasm { input: PathBuf },
    /// Run a program on the concrete simulator.
    Run {
        input: PathBuf,
        /// Initial data memory, e.g. 10,5,3,5,0,100.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        data: String,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Memory window to print, e.g. 0..5 (inclusive).
        #[arg(long)]
        dump: Option<String>,
        /// Charge one extra cycle when abs sees a negative operand.
        #[arg(long)]
        abs_penalty: bool,
    },
    /// Prove a property of a program.
    Verify {
        input: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
        /// Also write the SMT-LIB query to this file.
        #[arg(long)]
        emit_smt: Option<PathBuf>,
    },
    /// Prove that two programs agree on an observable.
    Equiv {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
        /// Goal-language term compared between the final states, e.g. "reg(r0)".
        #[arg(long)]
        observable: Option<String>,
        #[arg(long)]
        emit_smt: Option<PathBuf>,
    },
    /// Best- and worst-case cycle counts.
    Timing {
        input: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long)]
        abs_penalty: bool,
    },
    /// Compile an arithmetic expression to assembly.
    Compile {
        /// Expression text, e.g. "abs(m[0] - m[1]) * (m[2] + m[3]) / 2", or a file holding it.
        expr: String,
        #[arg(long, default_value = "r0")]
        result: String,
        #[arg(long, default_value_t = 5)]
        stack: u8,
        #[arg(long, default_value_t = 4)]
        temp: u8,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Solver binary; defaults to $REDFIN_SOLVER, then z3 on PATH.
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Per-query solver timeout in seconds.
    #[arg(long, default_value_t = 300)]
    timeout: u64,
    /// Use binary search instead of the solver's optimization commands.
    #[arg(long)]
    no_native_optimization: bool,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(e: impl Display) -> Failure {
    Failure { code: 2, message: e.to_string() }
}

fn unknown(e: impl Display) -> Failure {
    Failure { code: 3, message: e.to_string() }
}

fn verify_failure(e: VerifyError) -> Failure {
    match e {
        VerifyError::Spec(_) | VerifyError::Property { .. } | VerifyError::Boot(_) => usage(e),
        VerifyError::NonHalting(_) => Failure { code: 1, message: e.to_string() },
        VerifyError::Smt(_) | VerifyError::Inconsistent(_) => unknown(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            if cli.json {
                println!("{}", json!({ "error": f.message }));
            } else {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Asm { input, output } => {
            let code = load_codes(input)?;
            std::fs::write(output, encode_image(&code)).map_err(|e| usage(format!("{}: {e}", output.display())))?;
            if cli.json {
                println!("{}", json!({ "instructions": code.len(), "output": output.display().to_string() }));
            } else {
                println!("{} instructions written to {}", code.len(), output.display());
            }
            Ok(0)
        }
        Command::Disasm { input } => {
            let code = load_codes(input)?;
            let lines: Vec<String> = code
                .iter()
                .map(|c| match Instruction::decode(*c) {
                    Ok(i) => i.to_string(),
                    Err(e) => format!("; {e} (word {:#06x})", c.0),
                })
                .collect();
            if cli.json {
                println!("{}", json!({ "listing": lines }));
            } else {
                for l in lines {
                    println!("{l}");
                }
            }
            Ok(0)
        }
        Command::Run { input, data, steps, dump, abs_penalty } => {
            let code = load_codes(input)?;
            let data = parse_data(data).map_err(usage)?;
            let (lo, hi) = match dump {
                Some(range) => parse_range(range)?,
                None => (0, data.len().saturating_sub(1) as u8),
            };
            let start = Instant::now();
            let boot = ConcreteState::boot(&code, &data).map_err(usage)?;
            let mut interp = Interpreter::new(CycleModel::default().with_abs_penalty(*abs_penalty));
            let end = interp.simulate(*steps, &boot).map_err(unknown)?;
            let report = end.report(lo, hi);
            let diagnostics: Vec<String> = interp.diagnostics().iter().map(ToString::to_string).collect();
            if cli.json {
                let mut v = serde_json::to_value(&report).expect("serializable report");
                v["diagnostics"] = json!(diagnostics);
                v["elapsed_ms"] = json!(millis(start.elapsed()));
                println!("{v}");
            } else {
                println!("{report}");
                for d in diagnostics {
                    eprintln!("warning: {d}");
                }
            }
            Ok(0)
        }
        Command::Verify { input, query, emit_smt } => {
            let program = load_program(input)?;
            let (spec, mut options) = query_setup(query)?;
            options.keep_script = emit_smt.is_some();
            let report = verify::verify(&program, &spec, &options).map_err(verify_failure)?;
            write_script(emit_smt.as_deref(), &report)?;
            print_report(cli.json, &report);
            Ok(exit_code(&report.verdict))
        }
        Command::Equiv { a, b, query, observable, emit_smt } => {
            let pa = load_program(a)?;
            let pb = load_program(b)?;
            let (spec, mut options) = query_setup(query)?;
            options.keep_script = emit_smt.is_some();
            let observable = observable
                .clone()
                .or_else(|| spec.observable.clone())
                .ok_or_else(|| usage("no observable: pass --observable or set it in the spec"))?;
            let report = verify::check_equivalence(&pa, &pb, &spec, &observable, &options).map_err(verify_failure)?;
            write_script(emit_smt.as_deref(), &report)?;
            print_report(cli.json, &report);
            Ok(exit_code(&report.verdict))
        }
        Command::Timing { input, query, abs_penalty } => {
            let program = load_program(input)?;
            let (spec, mut options) = query_setup(query)?;
            options.cycles = options.cycles.with_abs_penalty(*abs_penalty);
            let report = verify::timing_bounds(&program, &spec, &options).map_err(verify_failure)?;
            print_timing(cli.json, &report);
            let solved = matches!(report.best, Verdict::Optimum { .. }) && matches!(report.worst, Verdict::Optimum { .. });
            Ok(if solved { 0 } else { 3 })
        }
        Command::Compile { expr, result, stack, temp, output } => {
            let text = match std::fs::read_to_string(expr) {
                Ok(contents) if Path::new(expr).is_file() => contents,
                _ => expr.clone(),
            };
            let e = parse_expr(text.trim()).map_err(|err| usage(format!("expression: {err}")))?;
            let reg = parse_register(result)?;
            let code = compile_program(&e, &CompileTarget::new(reg, *stack, *temp)).map_err(usage)?;
            let listing = asm::disassemble(&code);
            match output {
                Some(path) => {
                    std::fs::write(path, &listing).map_err(|err| usage(format!("{}: {err}", path.display())))?
                }
                None if !cli.json => print!("{listing}"),
                None => {}
            }
            if cli.json {
                let lines: Vec<&str> = listing.lines().collect();
                println!("{}", json!({ "instructions": code.len(), "listing": lines }));
            } else {
                eprintln!("{} instructions", code.len());
            }
            Ok(0)
        }
    }
}

fn parse_register(s: &str) -> Result<Register, Failure> {
    Register::ALL
        .into_iter()
        .find(|r| r.to_string() == s.to_ascii_lowercase())
        .ok_or_else(|| usage(format!("unknown register `{s}`")))
}

fn parse_range(s: &str) -> Result<(u8, u8), Failure> {
    let bad = || usage(format!("bad range `{s}`; expected LO..HI with 0 <= LO <= HI <= {}", MEMORY_SIZE - 1));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: u8 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u8 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn load_codes(path: &Path) -> Result<Vec<InstructionCode>, Failure> {
    let show = |e: &dyn Display| usage(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e == "bin") {
        let bytes = std::fs::read(path).map_err(|e| show(&e))?;
        decode_image(&bytes).map_err(|e| show(&e))
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| show(&e))?;
        let program = asm::assemble(&text).map_err(|e| show(&e))?;
        if program.len() > redfin_core::machine::PROGRAM_SIZE {
            return Err(show(&"program does not fit in program memory"));
        }
        Ok(program.iter().map(Instruction::encode).collect())
    }
}

fn load_program(path: &Path) -> Result<Vec<Instruction>, Failure> {
    load_codes(path)?
        .into_iter()
        .enumerate()
        .map(|(slot, c)| Instruction::decode(c).map_err(|e| usage(format!("{}: slot {slot}: {e}", path.display()))))
        .collect()
}

fn query_setup(q: &QueryArgs) -> Result<(PropertySpec, Options), Failure> {
    let text = std::fs::read_to_string(&q.spec).map_err(|e| usage(format!("{}: {e}", q.spec.display())))?;
    let spec = PropertySpec::from_json(&text).map_err(|e| usage(format!("{}: {e}", q.spec.display())))?;
    let mut solver = Solver::locate(q.solver.as_deref()).with_timeout(Duration::from_secs(q.timeout));
    if q.no_native_optimization {
        solver = solver.without_optimization();
    }
    Ok((spec, Options::new(solver)))
}

fn write_script(path: Option<&Path>, report: &Report) -> Result<(), Failure> {
    if let (Some(path), Some(text)) = (path, &report.script) {
        std::fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn exit_code(v: &Verdict) -> u8 {
    match v {
        Verdict::Proven | Verdict::Optimum { .. } => 0,
        Verdict::Falsified(_) => 1,
        Verdict::Unknown(_) => 3,
    }
}

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

fn stats_json(s: &QueryStats) -> Value {
    json!({
        "terms": s.terms,
        "assertions": s.assertions,
        "solver_calls": s.solver_calls,
        "solver_ms": millis(s.elapsed),
    })
}

fn verdict_json(v: &Verdict) -> Value {
    match v {
        Verdict::Proven => json!({ "verdict": "Proven" }),
        Verdict::Falsified(m) => json!({ "verdict": "Falsified", "model": m }),
        Verdict::Unknown(reason) => json!({ "verdict": "Unknown", "reason": reason }),
        Verdict::Optimum { objective, value, model } => {
            json!({ "verdict": "Optimum", "objective": objective, "value": value, "model": model })
        }
    }
}

fn print_report(as_json: bool, r: &Report) {
    if as_json {
        let mut v = verdict_json(&r.verdict);
        v["stats"] = stats_json(&r.stats);
        v["elapsed_ms"] = json!(millis(r.elapsed));
        v["diagnostics"] = json!(r.diagnostics);
        println!("{v}");
    } else {
        println!("{}", r.verdict);
        for d in &r.diagnostics {
            eprintln!("warning: {d}");
        }
        println!(
            "({} terms, {} assertions, {:.3} s)",
            r.stats.terms,
            r.stats.assertions,
            r.elapsed.as_secs_f64()
        );
    }
}

fn print_timing(as_json: bool, r: &TimingReport) {
    if as_json {
        let mut best = verdict_json(&r.best);
        best["stats"] = stats_json(&r.stats[0]);
        let mut worst = verdict_json(&r.worst);
        worst["stats"] = stats_json(&r.stats[1]);
        let v = json!({
            "best": best,
            "worst": worst,
            "clock_bounds": [r.best_value(), r.worst_value()],
            "elapsed_ms": millis(r.elapsed),
            "diagnostics": r.diagnostics,
        });
        println!("{v}");
    } else {
        println!("{}", r.best);
        println!("{}", r.worst);
        for d in &r.diagnostics {
            eprintln!("warning: {d}");
        }
        println!("({:.3} s)", r.elapsed.as_secs_f64());
    }
}
