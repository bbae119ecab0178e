//! `matrange`: joint matricial range computations from the command line.
//!
//! Inputs and outputs use the shared JSON encodings of the library. Exit
//! codes: 0 member / success, 1 not a member / failed check, 2 inconclusive,
//! 64 malformed input or usage, 65 invalid data, 66 missing input, 70
//! internal failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use matrange::essential::BlockRepetitionModel;
use matrange::herm::{pencil_norm, HermTuple};
use matrange::json::{
    decode_model, decode_pencil, decode_simplex, decode_tuple, encode_isometry, encode_matrix,
    encode_model, encode_tuple, encode_verdict, encode_witness, MatrixJson, ModelJson, SimplexJson,
    TupleJson,
};
use matrange::lambda::{lambda_realize, lambda_search, LambdaSearchOptions};
use matrange::membership::{membership, MembershipOptions, Status};
use matrange::simplex::{
    barycentric_povm, dilation_compression, naimark_dilate, povm_reconstruction,
};
use matrange::suite::{model_polylines, run_suite, SuiteConfig};
use matrange::support::{boundary_polyline, ANGLE_GRID};
use matrange::witness::{check_inequality, search_witness, WitnessOptions};
use matrange::{sampling, RangeError};

const EX_MEMBER: u8 = 0;
const EX_NOT_MEMBER: u8 = 1;
const EX_INCONCLUSIVE: u8 = 2;
const EX_USAGE: u8 = 64;
const EX_DATAERR: u8 = 65;
const EX_NOINPUT: u8 = 66;
const EX_SOFTWARE: u8 = 70;

#[derive(Parser)]
#[command(
    name = "matrange",
    version,
    about = "Joint matricial ranges of Hermitian matrix tuples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// Image residual accepted for a certificate
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// Projection iterations
    #[arg(long = "max-iter", default_value_t = 5000)]
    max_iter: usize,
    /// Objective evaluations for randomized searches
    #[arg(long, default_value_t = 20_000)]
    budget: usize,
    /// Random seed (falls back to MATRANGE_SEED, then 0)
    #[arg(long, env = "MATRANGE_SEED", default_value_t = 0)]
    seed: u64,
}

impl Common {
    fn membership(&self) -> MembershipOptions {
        let mut o = MembershipOptions {
            max_iter: self.max_iter,
            member_tol: self.tol,
            ..Default::default()
        };
        o.witness.budget = self.budget;
        o.witness.seed = self.seed;
        o
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide B ∈ W^q(A), or essential membership against a model
    Member {
        #[arg(
            long = "A",
            conflicts_with = "model",
            required_unless_present = "model"
        )]
        a: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "B")]
        b: PathBuf,
        /// Expected size of the B matrices
        #[arg(long)]
        q: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a given pencil, or search for a violating one
    Witness {
        #[arg(long = "A")]
        a: PathBuf,
        #[arg(long = "B")]
        b: PathBuf,
        /// Pencil (R_0, ..., R_m) to evaluate instead of searching
        #[arg(long = "R")]
        r: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Barycentric POVM and Naimark dilation of a tuple inside a simplex
    Dilate {
        #[arg(long = "T")]
        t: PathBuf,
        #[arg(long)]
        simplex: PathBuf,
    },
    /// Interior test and essential norms of a block-repetition model
    Essential {
        #[arg(long)]
        model: PathBuf,
        /// Random pencils compared against the truncated operator
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 2)]
        q: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-rank head perturbation making the model block periodic
    Perturb {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 2)]
        q: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Rank-(p,q) realization in a model, or search in a finite tuple
    Lambda {
        #[arg(
            long = "A",
            conflicts_with = "model",
            required_unless_present = "model"
        )]
        a: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "B")]
        b: PathBuf,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run the property suite and print a JSON report
    Theoremsuite {
        #[arg(long, env = "MATRANGE_SEED", default_value_t = 0)]
        seed: u64,
        /// Reduced instance counts
        #[arg(long)]
        quick: bool,
    },
    /// Boundary polylines of W(M_1, M_2) as plot data
    Report {
        #[arg(long = "A", conflicts_with = "model")]
        a: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = ANGLE_GRID)]
        samples: usize,
        #[arg(long, env = "MATRANGE_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        quick: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<RangeError> for Failure {
    fn from(e: RangeError) -> Self {
        let code = match e {
            RangeError::Malformed { .. } => EX_USAGE,
            RangeError::SolverFailure { .. } | RangeError::ToleranceExceeded { .. } => EX_SOFTWARE,
            _ => EX_DATAERR,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: EX_NOINPUT,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| Failure {
        code: EX_USAGE,
        message: format!("malformed JSON in {}: {e}", path.display()),
    })
}

fn load_tuple(path: &Path, field: &str) -> CliResult<HermTuple> {
    let raw: TupleJson = read_json(path)?;
    Ok(decode_tuple(&raw, field)?)
}

fn load_model(path: &Path) -> CliResult<BlockRepetitionModel> {
    let raw: ModelJson = read_json(path)?;
    Ok(decode_model(&raw, "model")?)
}

fn check_pair(a: &HermTuple, b: &HermTuple, q: Option<usize>) -> CliResult<()> {
    if a.len() != b.len() {
        return Err(RangeError::dim("B", a.len(), b.len()).into());
    }
    if let Some(q) = q {
        if b.dim() != q {
            return Err(RangeError::dim("B[0].dim", q, b.dim()).into());
        }
    }
    Ok(())
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Member => EX_MEMBER,
        Status::NotMember => EX_NOT_MEMBER,
        Status::Inconclusive => EX_INCONCLUSIVE,
    }
}

fn emit(v: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Failure {
        code: EX_SOFTWARE,
        message: e.to_string(),
    })?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| Failure {
        code: EX_SOFTWARE,
        message: e.to_string(),
    })
}

fn to_value<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report types serialize")
}

fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Member {
            a,
            model,
            b,
            q,
            common,
        } => {
            let b = load_tuple(&b, "B")?;
            let opts = common.membership();
            let verdict = match (a, model) {
                (Some(a), _) => {
                    let a = load_tuple(&a, "A")?;
                    check_pair(&a, &b, q)?;
                    membership(&b, &a, &opts)?
                }
                (None, Some(m)) => {
                    let model = load_model(&m)?;
                    check_pair(model.body(), &b, q)?;
                    model.essential_membership(&b, &opts)?
                }
                (None, None) => unreachable!("clap requires one of --A/--model"),
            };
            emit(&to_value(&encode_verdict(&verdict)))?;
            Ok(status_code(verdict.status))
        }
        Command::Witness { a, b, r, common } => {
            let a = load_tuple(&a, "A")?;
            let b = load_tuple(&b, "B")?;
            check_pair(&a, &b, None)?;
            match r {
                Some(path) => {
                    let raw: Vec<MatrixJson> = read_json(&path)?;
                    let r = decode_pencil(&raw, "R")?;
                    if r.m() != a.len() {
                        return Err(RangeError::dim("R", a.len() + 1, r.m() + 1).into());
                    }
                    let c = check_inequality(&r, &b, |r| pencil_norm(r, &a))?;
                    emit(&json!({"lhs": c.lhs, "rhs": c.rhs, "holds": c.holds}))?;
                    Ok(if c.holds { EX_MEMBER } else { EX_NOT_MEMBER })
                }
                None => {
                    let opts = WitnessOptions {
                        budget: common.budget,
                        seed: common.seed,
                        ..Default::default()
                    };
                    let found = search_witness(&b, |r| pencil_norm(r, &a), &opts)?;
                    emit(&json!({
                        "found": found.is_some(),
                        "witness": found.as_ref().map(encode_witness),
                    }))?;
                    Ok(if found.is_some() {
                        EX_NOT_MEMBER
                    } else {
                        EX_INCONCLUSIVE
                    })
                }
            }
        }
        Command::Dilate { t, simplex } => {
            let t = load_tuple(&t, "T")?;
            let raw: SimplexJson = read_json(&simplex)?;
            let s = decode_simplex(&raw)?;
            if s.m() != t.len() {
                return Err(RangeError::dim("T", s.m(), t.len()).into());
            }
            let povm = barycentric_povm(&t, &s)?;
            let x = naimark_dilate(&povm)?;
            let povm_residual = povm_reconstruction(&povm, &s)?.max_distance(&t)?;
            let dilation_residual = dilation_compression(&x, &s)?.max_distance(&t)?;
            emit(&json!({
                "povm": povm.elements().iter().map(|e| encode_matrix(e.as_mat())).collect::<Vec<_>>(),
                "x": encode_isometry(&x),
                "isometry_defect": x.defect(),
                "povm_residual": povm_residual,
                "dilation_residual": dilation_residual,
            }))?;
            Ok(EX_MEMBER)
        }
        Command::Essential {
            model,
            samples,
            q,
            common,
        } => {
            let model = load_model(&model)?;
            let interior = model.interior_test()?;
            let a = model.materialize()?;
            let mut rng = sampling::rng(common.seed);
            let mut worst_excess = f64::NEG_INFINITY;
            for _ in 0..samples {
                let r = sampling::norm_test_tuple(&mut rng, q.max(1), model.m());
                let ess = model.essential_pencil_norm(&r)?;
                let full = pencil_norm(&r, &a)?;
                worst_excess = worst_excess.max(ess - full);
            }
            emit(&json!({
                "head_dim": model.head_dim(),
                "body_dim": model.body_dim(),
                "level": model.level(),
                "total_dim": model.total_dim(),
                "interior": to_value(&interior),
                "samples": samples,
                "worst_essential_excess": (samples > 0).then_some(worst_excess),
            }))?;
            Ok(EX_MEMBER)
        }
        Command::Perturb {
            model,
            samples,
            q,
            common,
        } => {
            let model = load_model(&model)?;
            let pert = model.preserving_perturbation()?;
            let perturbed = pert.perturbed_model()?;
            let a_plus_k = perturbed.materialize()?;
            let copies = a_plus_k.dim() / model.body_dim();
            let periodic = matrange::essential::periodic(model.body(), copies)?;
            let periodic_defect = a_plus_k.max_distance(&periodic)?;
            let mut rng = sampling::rng(common.seed);
            let mut worst_gap = 0.0f64;
            for _ in 0..samples {
                let r = sampling::norm_test_tuple(&mut rng, q.max(1), model.m());
                worst_gap = worst_gap
                    .max((pencil_norm(&r, &a_plus_k)? - model.essential_pencil_norm(&r)?).abs());
            }
            let passed = periodic_defect <= 1e-12 && worst_gap <= 1e-10;
            emit(&json!({
                "k": pert.k.head.as_ref().map(encode_tuple),
                "rank_bound": pert.k.rank_bound,
                "padded_model": encode_model(&pert.model),
                "verification": {
                    "periodic_defect": periodic_defect,
                    "samples": samples,
                    "worst_norm_gap": worst_gap,
                    "passed": passed,
                },
            }))?;
            Ok(if passed { EX_MEMBER } else { EX_NOT_MEMBER })
        }
        Command::Lambda {
            a,
            model,
            b,
            p,
            common,
        } => {
            let b = load_tuple(&b, "B")?;
            if p == 0 {
                return Err(RangeError::Invalid("--p must be positive".into()).into());
            }
            match (a, model) {
                (Some(a), _) => {
                    let a = load_tuple(&a, "A")?;
                    check_pair(&a, &b, None)?;
                    let opts = LambdaSearchOptions {
                        budget: common.budget,
                        seed: common.seed,
                        ..Default::default()
                    };
                    let found = lambda_search(&b, &a, p, &opts)?;
                    emit(&json!({
                        "found": found.is_some(),
                        "x": found.as_ref().map(|w| encode_isometry(&w.x)),
                        "residual": found.as_ref().map(|w| w.residual),
                    }))?;
                    Ok(if found.is_some() {
                        EX_MEMBER
                    } else {
                        EX_INCONCLUSIVE
                    })
                }
                (None, Some(m)) => {
                    let model = load_model(&m)?;
                    check_pair(model.body(), &b, None)?;
                    let verdict = model.essential_membership(&b, &common.membership())?;
                    let Some(phi) = verdict.certificate.as_ref() else {
                        emit(&json!({"essential": encode_verdict(&verdict)}))?;
                        return Ok(status_code(verdict.status));
                    };
                    let perturbed = model.preserving_perturbation()?.perturbed_model()?;
                    let rank = p * phi.kraus_decomposition()?.len();
                    let host = perturbed.with_level(perturbed.level().max(rank));
                    let w = lambda_realize(&b, &host, p, phi)?;
                    emit(&json!({
                        "essential": encode_verdict(&verdict),
                        "host": encode_model(&host),
                        "x": encode_isometry(&w.x),
                        "residual": w.residual,
                    }))?;
                    Ok(EX_MEMBER)
                }
                (None, None) => unreachable!("clap requires one of --A/--model"),
            }
        }
        Command::Theoremsuite { seed, quick } => {
            let cfg = SuiteConfig { seed, quick };
            let report = run_suite(&cfg)?;
            let mut err = std::io::stderr().lock();
            for c in &report.criteria {
                let _ = writeln!(err, "{}", c.line());
            }
            emit(&to_value(&report))?;
            Ok(if report.passed {
                EX_MEMBER
            } else {
                EX_NOT_MEMBER
            })
        }
        Command::Report {
            a,
            model,
            samples,
            seed,
            quick,
        } => {
            let body = match (a, model) {
                (Some(a), _) => Some(load_tuple(&a, "A")?),
                (None, Some(m)) => Some(load_model(&m)?.body().clone()),
                (None, None) => None,
            };
            match body {
                Some(t) => {
                    if t.len() != 2 {
                        return Err(RangeError::dim("A", 2, t.len()).into());
                    }
                    let poly = boundary_polyline(&t, samples.max(3))?;
                    emit(
                        &json!({"polylines": [{"model": 0, "body_dim": t.dim(), "points": poly.points}]}),
                    )?;
                }
                None => {
                    let lines = model_polylines(&SuiteConfig { seed, quick })?;
                    emit(&json!({"polylines": to_value(&lines)}))?;
                }
            }
            Ok(EX_MEMBER)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EX_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
