//! Command-line front end: parse inputs, dispatch computations and
//! verifications, emit deterministic machine-readable reports.
//!
//! Exit codes: 0 on success (and verified / oracle match), 1 when a
//! verification fails or a comparison mismatches, 2 on usage or parse
//! errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num::BigRational;
use rayon::prelude::*;
use starglue::bvbfv::verify::{
    mdqme_mutation_battery, verify_homotopy, verify_mdcme, verify_mdqme, HomotopyOptions,
    MdcmeOptions, VerifyOptions,
};
use starglue::bvbfv::{flat, SurfaceSpec};
use starglue::glue::moyal_via_gluing;
use starglue::parse::parse_poly;
use starglue::poly::{Poly, PoissonTensor, VarClass};
use starglue::report::RunReport;
use starglue::sample;
use starglue::star::{check_associativity, moyal_product, star_bracket};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "starglue", version, about = "Exact star products, graded boundary calculus, and state gluing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Include wall-clock timing in reports (off by default so structured
    /// output is byte-identical for a fixed seed).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Clone)]
struct TensorArgs {
    /// Target dimension.
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Antisymmetric tensor as a JSON matrix of rationals, e.g.
    /// '[[0,1],[-1,0]]' or entries like "3/2".
    #[arg(long)]
    alpha: Option<String>,
    /// Read the tensor matrix from a file instead.
    #[arg(long, conflicts_with = "alpha")]
    alpha_file: Option<std::path::PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the star product of two polynomials.
    Star {
        #[command(flatten)]
        tensor: TensorArgs,
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long, default_value_t = 2)]
        order: u32,
    },
    /// Compute the bracket recovered from the star commutator.
    Bracket {
        #[command(flatten)]
        tensor: TensorArgs,
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
    },
    /// Randomized associativity battery.
    Assoc {
        #[command(flatten)]
        tensor: TensorArgs,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        max_deg: u32,
        #[arg(long, default_value_t = 3)]
        order: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Master-equation and identity verifications.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// State gluing pipelines.
    #[command(subcommand)]
    Glue(GlueCommand),
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// The modified differential quantum master equation for a surface.
    Mdqme {
        #[arg(long, value_parser = ["L1", "L3"])]
        surface: String,
        #[command(flatten)]
        tensor: TensorArgs,
        /// Flip a single sign before verifying; the residual must then be
        /// nonempty. Accepts generator/atom names (see --list-mutations)
        /// or the alias "free-sign".
        #[arg(long)]
        mutate: Option<String>,
        /// Run the whole battery of single-sign mutations.
        #[arg(long)]
        mutations: bool,
        #[arg(long)]
        list_mutations: bool,
        /// Emit the rewrite-rule application trace.
        #[arg(long)]
        trace: bool,
    },
    /// The classical master-equation reduction.
    Mdcme {
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
    /// The propagator-family variation is operator-exact.
    Homotopy {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[command(flatten)]
        tensor: TensorArgs,
    },
    /// Shifted functions are flat sections of the background connection.
    Flatness {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum GlueCommand {
    /// Run the full gluing pipeline and compare with the closed form.
    Moyal {
        #[command(flatten)]
        tensor: TensorArgs,
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long, default_value_t = 2)]
        order: u32,
        /// Evaluation point as comma-separated rationals, e.g. "0,1/2".
        #[arg(long)]
        point: Option<String>,
    },
}

fn load_tensor(args: &TensorArgs) -> Result<PoissonTensor, String> {
    let text = match (&args.alpha, &args.alpha_file) {
        (Some(t), _) => t.clone(),
        (None, Some(path)) => std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?,
        (None, None) => {
            return Ok(PoissonTensor::standard(args.d));
        }
    };
    starglue::parse::parse_tensor_json(&text, args.d).map_err(|e| e.to_string())
}

fn parse_point(text: &str, d: usize) -> Result<Vec<BigRational>, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != d {
        return Err(format!("point has {} coordinates, expected {d}", parts.len()));
    }
    parts.into_iter().map(starglue::parse::parse_rational_str).collect()
}

struct Emit {
    format: Format,
    timings: bool,
    start: Instant,
}

impl Emit {
    fn finish(&self, mut report: RunReport, ok: bool) -> ExitCode {
        if !ok {
            report.status = "failed".into();
        }
        if self.timings {
            report.timing_ms = Some(self.start.elapsed().as_millis());
        }
        match self.format {
            Format::Json => println!("{}", report.to_json()),
            Format::Text => {
                println!("command: {}", report.command);
                for (k, v) in &report.inputs {
                    println!("  {k}: {v}");
                }
                println!("status: {}", report.status);
                if let Some(r) = &report.result {
                    match r {
                        serde_json::Value::String(s) => println!("result: {s}"),
                        other => println!("result: {other}"),
                    }
                }
                if let Some(res) = &report.residual_terms {
                    println!("residual terms: {}", res.len());
                    for t in res {
                        println!("  {t}");
                    }
                }
                if let Some(notes) = &report.notes {
                    for n in notes {
                        println!("note: {n}");
                    }
                }
                if let Some(ms) = report.timing_ms {
                    println!("timing_ms: {ms}");
                }
            }
        }
        if ok {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(1)
        }
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let emit = Emit { format: cli.format, timings: cli.timings, start: Instant::now() };
    match run(cli.command, &emit) {
        Ok(code) => code,
        Err(msg) => usage_error(&msg),
    }
}

fn parse_input_poly(text: &str, d: usize, order: u32) -> Result<Poly, String> {
    parse_poly(text, d, order).map_err(|e| e.to_string())
}

fn run(command: Command, emit: &Emit) -> Result<ExitCode, String> {
    match command {
        Command::Star { tensor, f, g, order } => {
            let alpha = load_tensor(&tensor)?;
            let fp = parse_input_poly(&f, tensor.d, order)?;
            let gp = parse_input_poly(&g, tensor.d, order)?;
            let r = moyal_product(&fp, &gp, &alpha, order).map_err(|e| e.to_string())?;
            let report = RunReport::new("star")
                .input("d", tensor.d)
                .input("f", f)
                .input("g", g)
                .input("order", order)
                .input("alpha", tensor.alpha.clone().unwrap_or_else(|| "standard".into()));
            let mut report = report;
            report.result = Some(r.to_string().into());
            Ok(emit.finish(report, true))
        }
        Command::Bracket { tensor, f, g } => {
            let alpha = load_tensor(&tensor)?;
            let fp = parse_input_poly(&f, tensor.d, 1)?;
            let gp = parse_input_poly(&g, tensor.d, 1)?;
            let r = star_bracket(&fp, &gp, &alpha).map_err(|e| e.to_string())?;
            let mut report = RunReport::new("bracket")
                .input("d", tensor.d)
                .input("f", f)
                .input("g", g)
                .input("alpha", tensor.alpha.clone().unwrap_or_else(|| "standard".into()));
            report.result = Some(r.to_string().into());
            Ok(emit.finish(report, true))
        }
        Command::Assoc { tensor, count, max_deg, order, seed } => {
            let alpha = load_tensor(&tensor)?;
            let d = tensor.d;
            let triples: Vec<(Poly, Poly, Poly)> = {
                let mut rng = sample::rng_from_seed(seed);
                (0..count)
                    .map(|_| {
                        (
                            sample::rand_poly(&mut rng, d, order, max_deg, 4),
                            sample::rand_poly(&mut rng, d, order, max_deg, 4),
                            sample::rand_poly(&mut rng, d, order, max_deg, 4),
                        )
                    })
                    .collect()
            };
            let failures: Vec<usize> = triples
                .par_iter()
                .enumerate()
                .filter_map(|(k, (f, g, h))| {
                    let r = check_associativity(f, g, h, &alpha, order).expect("compatible inputs");
                    (!r.is_zero()).then_some(k)
                })
                .collect();
            let ok = failures.is_empty();
            let mut report = RunReport::new("assoc")
                .input("d", d)
                .input("count", count)
                .input("max_deg", max_deg)
                .input("order", order)
                .input("seed", seed)
                .input("alpha", tensor.alpha.clone().unwrap_or_else(|| "standard".into()));
            report.result = Some(
                if ok { format!("{count} residuals identically zero") } else { format!("failures at {failures:?}") }
                    .into(),
            );
            Ok(emit.finish(report, ok))
        }
        Command::Verify(v) => run_verify(v, emit),
        Command::Glue(GlueCommand::Moyal { tensor, f, g, order, point }) => {
            let alpha = load_tensor(&tensor)?;
            let d = tensor.d;
            let fp = parse_input_poly(&f, d, order)?;
            let gp = parse_input_poly(&g, d, order)?;
            let pt = point.as_deref().map(|p| parse_point(p, d)).transpose()?;
            let via_glue =
                moyal_via_gluing(&fp, &gp, pt.as_deref(), &alpha, order).map_err(|e| e.to_string())?;
            let mut closed = moyal_product(&fp, &gp, &alpha, order)
                .map_err(|e| e.to_string())?
                .eval_at_point_coords();
            if let Some(pt) = &pt {
                closed = closed.substitute_class(VarClass::Xt, pt).map_err(|e| e.to_string())?;
            }
            let ok = via_glue == closed;
            let mut report = RunReport::new("glue moyal")
                .input("d", d)
                .input("f", f)
                .input("g", g)
                .input("order", order)
                .input("point", point.clone().unwrap_or_else(|| "symbolic".into()))
                .input("alpha", tensor.alpha.clone().unwrap_or_else(|| "standard".into()));
            report.result = Some(
                serde_json::json!({
                    "pipeline": via_glue.to_string(),
                    "closed_form": closed.to_string(),
                    "match": ok,
                }),
            );
            Ok(emit.finish(report, ok))
        }
    }
}

fn run_verify(v: VerifyCommand, emit: &Emit) -> Result<ExitCode, String> {
    match v {
        VerifyCommand::Mdqme { surface, tensor, mutate, mutations, list_mutations, trace } => {
            let alpha = load_tensor(&tensor)?;
            let spec = if surface == "L3" { SurfaceSpec::L3 } else { SurfaceSpec::L1X };
            let mut report = RunReport::new("verify mdqme")
                .input("surface", surface.clone())
                .input("d", tensor.d)
                .input("alpha", tensor.alpha.clone().unwrap_or_else(|| "standard".into()));
            if list_mutations {
                let names = starglue::bvbfv::verify::mutation_names(spec, tensor.d, &alpha);
                report.result = Some(serde_json::json!(names));
                return Ok(emit.finish(report, true));
            }
            if mutations {
                let battery = mdqme_mutation_battery(spec, tensor.d, &alpha).map_err(|e| e.to_string())?;
                let all = battery.iter().all(|m| m.detected);
                report.result = Some(serde_json::to_value(&battery).unwrap());
                return Ok(emit.finish(report, all));
            }
            let opts = VerifyOptions { mutate: mutate.clone(), trace, ..Default::default() };
            if let Some(m) = mutate {
                report = report.input("mutate", m);
            }
            let r = verify_mdqme(spec, tensor.d, &alpha, &opts).map_err(|e| e.to_string())?;
            let verified = r.verified;
            report.residual_terms = Some(r.residual_terms);
            if !r.notes.is_empty() {
                report.notes = Some(r.notes);
            }
            report.result = Some(serde_json::json!({ "verified": verified, "residual_count": r.residual_count }));
            Ok(emit.finish(report, verified))
        }
        VerifyCommand::Mdcme { d } => {
            let r = verify_mdcme(d, &MdcmeOptions::default());
            let mut report = RunReport::new("verify mdcme").input("d", d);
            let verified = r.verified;
            report.residual_terms = Some(r.residual_terms);
            report.result = Some(serde_json::json!({ "verified": verified }));
            Ok(emit.finish(report, verified))
        }
        VerifyCommand::Homotopy { n, tensor } => {
            let alpha = load_tensor(&tensor)?;
            let r = verify_homotopy(n, tensor.d, &alpha, &HomotopyOptions::default())
                .map_err(|e| e.to_string())?;
            let mut report = RunReport::new("verify homotopy")
                .input("n", n)
                .input("d", tensor.d)
                .input("alpha", tensor.alpha.clone().unwrap_or_else(|| "standard".into()));
            let verified = r.verified;
            report.residual_terms = Some(r.residual_terms);
            if !r.notes.is_empty() {
                report.notes = Some(r.notes);
            }
            report.result = Some(serde_json::json!({ "verified": verified }));
            Ok(emit.finish(report, verified))
        }
        VerifyCommand::Flatness { d, count, seed } => {
            let mut rng = sample::rng_from_seed(seed);
            let mut failures = 0usize;
            for _ in 0..count {
                let f = sample::rand_poly(&mut rng, d, 2, 4, 4);
                if !flat::grothendieck_flat_check(&f).expect("target polynomial").is_zero() {
                    failures += 1;
                }
                // the connection squares to zero on arbitrary sections
                let section = flat::TargetSection::scalar(sample::rand_poly(&mut rng, d, 2, 3, 3));
                if !flat::connection_squared(&section, d).expect("in range").is_zero() {
                    failures += 1;
                }
            }
            let ok = failures == 0;
            let mut report = RunReport::new("verify flatness")
                .input("d", d)
                .input("count", count)
                .input("seed", seed);
            report.result = Some(format!("{failures} failures in {count} checks").into());
            Ok(emit.finish(report, ok))
        }
    }
}
