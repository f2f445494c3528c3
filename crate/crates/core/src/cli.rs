//! The `crbm` command-line front end.
//!
//! Every JSON document is wrapped as `{"schema", "command", "result"}`.
//! Output goes to `--out`, else to `$CRBM_OUT_DIR/<command>.<ext>` when that
//! variable is set, else to stdout. Exit codes: 0 success, 1 domain error,
//! 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{bounds_report, divergence_upper};
use crate::compiler::{
    compile_common_support, compile_partition, compile_support_points, compile_universal,
    divergence_witness, CompileOptions,
};
use crate::dimension::{certify_dimension_with, DEFAULT_TRIALS};
use crate::distributions::{
    partition_project, random_conditional, random_dist_with, ConditionalTable, Dist, PartitionModel,
};
use crate::error::{Error, Result};
use crate::ltn::{
    check_deter_fixed_point, embed_ltn_in_crbm, embed_sigmoid_output, parity_net, ThresholdNet,
};
use crate::mrf::{
    compilation_tv, compile_conditional_mrf, compile_mrf_to_rbm, conditional_tv, FaceValue,
    MrfModel, SimplicialComplex,
};
use crate::packing::{build_packing, sequence_table, validate_packing};
use crate::verify::{verify_all, VerifyConfig, SCHEMA_VERSION};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CRBM_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "crbm",
    version,
    about = "Compile, bound and certify conditional restricted Boltzmann machines"
)]
pub struct Cli {
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Universal,
    Support,
    Common,
    Partition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LtnMode {
    Parity,
    Embed,
    Sigmoid,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Hidden-unit, dimension and divergence bounds for (k, n[, m])
    Bounds {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: Option<usize>,
    },
    /// The F, resets, K, P sequence table for r = 1..=rmax
    Table1 {
        #[arg(long, default_value_t = 5)]
        rmax: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Build and validate the star packing of {0,1}^k at depth r
    Pack {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        r: usize,
    },
    /// Compile a target conditional table into CRBM parameters
    Compile {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        /// Packing depth (default: the one with the smallest budget)
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        /// Seed for the random target when --target is absent
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Universal)]
        mode: Mode,
        /// Target table as CSV: header `x,y0,y1,...`, one row per input state
        #[arg(long)]
        target: Option<PathBuf>,
        /// Extra non-zero entries allowed in support mode (default 2^k)
        #[arg(long)]
        d: Option<usize>,
        /// Number of output bits fixed by the partition blocks
        #[arg(long, default_value_t = 1)]
        l: usize,
    },
    /// Certify the model dimension
    Dim {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
    },
    /// Divergence bound plus a constructive witness on a target
    Divergence {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Compile a Markov random field into (C)RBM weights
    Mrf {
        /// JSON {"n": N, "faces": [[i, ...], ...]}; faces are closed downward
        #[arg(long)]
        complex: PathBuf,
        /// JSON [{"face": [i, ...], "value": v}, ...]
        #[arg(long)]
        theta: PathBuf,
        /// Treat the first k variables as inputs
        #[arg(long)]
        k: Option<usize>,
    },
    /// Threshold-network constructions
    Ltn {
        #[arg(long, value_enum)]
        mode: LtnMode,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Network as JSON (k, m, n, V, c, W, b); overrides the random one
        #[arg(long)]
        net: Option<PathBuf>,
    },
    /// Run every acceptance check and report pass/fail
    VerifyAll {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bounds { .. } => "bounds",
            Command::Table1 { .. } => "table1",
            Command::Pack { .. } => "pack",
            Command::Compile { .. } => "compile",
            Command::Dim { .. } => "dim",
            Command::Divergence { .. } => "divergence",
            Command::Mrf { .. } => "mrf",
            Command::Ltn { .. } => "ltn",
            Command::VerifyAll { .. } => "verify-all",
        }
    }
}

enum Output {
    Json(Value),
    Csv(String),
}

/// A run's payload and whether the run itself counts as a success.
struct Produced {
    output: Output,
    ok: bool,
}

fn json_of<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn envelope(command: &str, result: Value) -> Value {
    json!({ "schema": SCHEMA_VERSION, "command": command, "result": result })
}

/// Checks the wrapper before anything is written.
pub fn validate_envelope(doc: &Value) -> Result<()> {
    let ok = doc.get("schema").and_then(Value::as_str) == Some(SCHEMA_VERSION)
        && doc.get("command").is_some_and(Value::is_string)
        && doc
            .get("result")
            .is_some_and(|r| r.is_object() || r.is_array());
    if ok {
        Ok(())
    } else {
        Err(Error::Parse(
            "output document does not match the schema envelope".into(),
        ))
    }
}

/// Reals with 17 significant digits.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_table(path: &Path) -> Result<ConditionalTable> {
    ConditionalTable::from_csv(&std::fs::read_to_string(path)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Rows sharing one random support of at least one state.
pub fn random_common_support(k: usize, n: usize, seed: u64) -> Result<ConditionalTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ny = 1usize << n;
    let mut support: Vec<usize> = (0..ny).filter(|_| rng.random_bool(0.5)).collect();
    if support.is_empty() {
        support.push(rng.random_range(0..ny));
    }
    let rows = (0..1usize << k)
        .map(|_| {
            let mut w = vec![0.0; ny];
            for &y in &support {
                w[y] = rng.random_range(0.05..1.0);
            }
            Dist::from_weights(n, w)
        })
        .collect::<Result<Vec<_>>>()?;
    ConditionalTable::new(k, n, rows)
}

/// At most `2^k + d` non-zero entries: one shared state per row plus `d` extras.
pub fn random_sparse(k: usize, n: usize, d: usize, seed: u64) -> Result<ConditionalTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nx, ny) = (1usize << k, 1usize << n);
    let shared = rng.random_range(0..ny);
    let mut free: Vec<(usize, usize)> = (0..nx)
        .flat_map(|x| (0..ny).filter(move |&y| y != shared).map(move |y| (x, y)))
        .collect();
    free.shuffle(&mut rng);
    let mut weights = vec![vec![0.0; ny]; nx];
    for row in weights.iter_mut() {
        row[shared] = rng.random_range(0.05..1.0);
    }
    for &(x, y) in free.iter().take(d) {
        weights[x][y] = rng.random_range(0.05..1.0);
    }
    let rows = weights
        .into_iter()
        .map(|w| Dist::from_weights(n, w))
        .collect::<Result<Vec<_>>>()?;
    ConditionalTable::new(k, n, rows)
}

/// Random rows projected onto the cylinder partition fixing the low `l` bits.
pub fn random_block_constant(k: usize, n: usize, l: usize, seed: u64) -> Result<ConditionalTable> {
    let model = PartitionModel::cylinders(n, l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..1usize << k)
        .map(|_| {
            random_dist_with(n, &mut rng)
                .and_then(|p| partition_project(&p, &model))
                .map(|(q, _)| q)
        })
        .collect::<Result<Vec<_>>>()?;
    ConditionalTable::new(k, n, rows)
}

fn produce(command: &Command) -> Result<Produced> {
    let done = |v: Value| Produced {
        output: Output::Json(v),
        ok: true,
    };
    match *command {
        Command::Bounds { k, n, m } => Ok(done(json_of(&bounds_report(k, n, m)?)?)),
        Command::Table1 { rmax, format } => {
            let rows = sequence_table(rmax)?;
            match format {
                Format::Json => Ok(done(json_of(&rows)?)),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["r", "two_pow_neg_s", "f", "resets", "k", "p"])?;
                    for row in rows {
                        w.write_record([
                            row.r.to_string(),
                            format_real(row.two_pow_neg_s),
                            row.f.to_string(),
                            row.resets.to_string(),
                            format_real(row.k),
                            format_real(row.p),
                        ])?;
                    }
                    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
                    Ok(Produced {
                        output: Output::Csv(String::from_utf8(bytes).expect("ascii")),
                        ok: true,
                    })
                }
            }
        }
        Command::Pack { k, r } => {
            let seq = build_packing(k, r)?;
            let report = validate_packing(&seq);
            let ok = report.valid;
            Ok(Produced {
                output: Output::Json(
                    json!({ "packing": json_of(&seq)?, "report": json_of(&report)? }),
                ),
                ok,
            })
        }
        Command::Compile {
            k,
            n,
            r,
            eps,
            seed,
            mode,
            ref target,
            d,
            l,
        } => {
            let opts = CompileOptions {
                r,
                ..CompileOptions::with_eps(eps)
            };
            let d = d.unwrap_or(1 << k);
            let table = match target {
                Some(path) => read_table(path)?,
                None => match mode {
                    Mode::Universal => random_conditional(k, n, seed)?,
                    Mode::Common => random_common_support(k, n, seed)?,
                    Mode::Support => random_sparse(k, n, d, seed)?,
                    Mode::Partition => random_block_constant(k, n, l, seed)?,
                },
            };
            let (params, report) = match mode {
                Mode::Universal => compile_universal(&table, &opts)?,
                Mode::Common => compile_common_support(&table, &opts)?,
                Mode::Support => compile_support_points(&table, d, &opts)?,
                Mode::Partition => compile_partition(&table, l, &opts)?,
            };
            let ok = report.within_budget && report.achieved_tv <= eps;
            let mut report = json_of(&report)?;
            report["seed"] = json!(target.is_none().then_some(seed));
            Ok(Produced {
                output: Output::Json(json!({ "report": report, "params": json_of(&params)? })),
                ok,
            })
        }
        Command::Dim { k, n, m, trials } => {
            let rep = certify_dimension_with(k, n, m, trials)?;
            Ok(done(json_of(&rep)?))
        }
        Command::Divergence {
            k,
            n,
            m,
            seed,
            eps,
            ref target,
        } => {
            let table = match target {
                Some(p) => read_table(p)?,
                None => random_conditional(k, n, seed)?,
            };
            let bound = divergence_upper(table.k(), table.n(), m);
            let (params, witness) = divergence_witness(&table, m, &CompileOptions::with_eps(eps))?;
            Ok(done(json!({
                "bound": json_of(&bound)?,
                "witness": json_of(&witness)?,
                "params": json_of(&params)?,
            })))
        }
        Command::Mrf {
            ref complex,
            ref theta,
            k,
        } => {
            let complex: SimplicialComplex = read_json(complex)?;
            let values: Vec<FaceValue> = read_json(theta)?;
            let model = MrfModel::from_face_values(complex, &values)?;
            match k {
                Some(k) => {
                    let params = compile_conditional_mrf(&model, k)?;
                    let tv = conditional_tv(&model, k, &params)?;
                    Ok(done(json!({ "params": json_of(&params)?, "row_tv": tv })))
                }
                None => {
                    let keep = SimplicialComplex::new(model.complex().n(), &[0])?;
                    let out = compile_mrf_to_rbm(&model, &keep)?;
                    let tv = compilation_tv(&model, &out)?;
                    Ok(done(json!({
                        "params": json_of(&out.params)?,
                        "correction": json_of(&out.correction.face_values())?,
                        "tv": tv,
                    })))
                }
            }
        }
        Command::Ltn {
            mode,
            k,
            m,
            n,
            eps,
            seed,
            ref net,
        } => {
            let net = match (mode, net) {
                (LtnMode::Parity, _) => parity_net(k)?,
                (_, Some(path)) => {
                    let net: ThresholdNet = read_json(path)?;
                    net.validate()?;
                    net
                }
                (_, None) => ThresholdNet::random(k, m, n, &mut ChaCha8Rng::seed_from_u64(seed)),
            };
            let embedding = match mode {
                LtnMode::Sigmoid => embed_sigmoid_output(&net, eps)?,
                _ => embed_ltn_in_crbm(&net, eps)?,
            };
            let fixed_point = match mode {
                LtnMode::Sigmoid => None,
                _ => Some(check_deter_fixed_point(
                    &embedding.params,
                    &net.truth_table()?,
                )?),
            };
            Ok(done(json!({
                "net": json_of(&net)?,
                "embedding": json_of(&embedding)?,
                "fixed_point": json_of(&fixed_point)?,
            })))
        }
        Command::VerifyAll { seed } => {
            let report = verify_all(&VerifyConfig { seed });
            let ok = report.all_passed;
            Ok(Produced {
                output: Output::Json(json_of(&report)?),
                ok,
            })
        }
    }
}

fn destination(cli: &Cli, ext: &str) -> Option<PathBuf> {
    if let Some(p) = &cli.out {
        return Some(p.clone());
    }
    std::env::var_os(OUT_DIR_ENV)
        .map(|dir| PathBuf::from(dir).join(format!("{}.{ext}", cli.command.name())))
}

fn emit(cli: &Cli, produced: Produced) -> Result<()> {
    let (text, ext) = match produced.output {
        Output::Json(result) => {
            let doc = envelope(cli.command.name(), result);
            validate_envelope(&doc)?;
            (serde_json::to_string_pretty(&doc)? + "\n", "json")
        }
        Output::Csv(text) => (text, "csv"),
    };
    match destination(cli, ext) {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match produce(&cli.command).and_then(|p| {
        let ok = p.ok;
        emit(&cli, p).map(|_| ok)
    }) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
