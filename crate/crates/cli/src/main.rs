//! Command-line front end. Exit status: 0 when the run verifies, 1 when a
//! verification or construction fails, 2 on usage and input errors.

mod output;
mod recipe;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use contactflex::diffeo::Diffeo;
use contactflex::extension::{extend_positive, ContactPathInput, ExtensionOptions};
use contactflex::factorize::{auto_factorize, factorize, FactorizeOptions, Factorization};
use contactflex::family::Family;
use contactflex::field::ScalarField;
use contactflex::grid::{time_grid, Grid};
use contactflex::legendrian::{isotopy_classify, jet_legendrian, transport, Jet, JetSampling};
use contactflex::paths::{sweep, DiffeoPath, PathRecord, Verdict};
use contactflex::synthesis::{
    null_path_to, positive_path_compact, positive_path_to, subdivide_and_connect,
    SynthesisOptions, Synthesized,
};
use contactflex::verify::{verify, verify_records, VerifyConfig};

use output::{emit, Failure};
use recipe::{parse_map, PathRecipe};

#[derive(Parser, Debug)]
#[command(name = "contactflex", version, about = "Null and positive paths of contact R^3")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalArgs {
    /// Points per axis of the verification grid.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Half-width of the certified box [-R, R]^3.
    #[arg(long = "box", value_name = "R", global = true)]
    box_radius: Option<f64>,
    /// Number of equispaced times on [0, 1].
    #[arg(long, global = true)]
    times: Option<usize>,
    /// Alpha tolerance for samples that are not closed form.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write the report here (`.json`) or the sample records (`.jsonl`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the extra random verification points.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file with defaults for the flags above.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

/// Keys accepted in `--config`; flags win over the file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    grid: Option<usize>,
    #[serde(rename = "box")]
    box_radius: Option<f64>,
    times: Option<usize>,
    tol: Option<f64>,
    endpoint_tol: Option<f64>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    random_points: Option<usize>,
}

#[derive(Debug, Clone)]
struct Settings {
    grid: Grid,
    times: usize,
    tol: f64,
    endpoint_tol: f64,
    out: Option<PathBuf>,
    seed: u64,
    random_points: usize,
}

impl Settings {
    fn resolve(g: &GlobalArgs) -> Result<Self, Failure> {
        let file = match &g.config {
            Some(path) => {
                let text = read(path)?;
                serde_json::from_str::<FileConfig>(&text)
                    .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let n = g.grid.or(file.grid).unwrap_or(11);
        let r = g.box_radius.or(file.box_radius).unwrap_or(1.0);
        if n == 0 || !(r > 0.0 && r.is_finite()) {
            return Err(Failure::usage(format!("bad grid {n} on box {r}")));
        }
        Ok(Self {
            grid: Grid::cube(r, n),
            times: g.times.or(file.times).unwrap_or(33),
            tol: g.tol.or(file.tol).unwrap_or(1e-6),
            endpoint_tol: file.endpoint_tol.unwrap_or(1e-5),
            out: g.out.clone().or(file.out),
            seed: g.seed.or(file.seed).unwrap_or(0),
            random_points: file.random_points.unwrap_or(0),
        })
    }

    fn verify_config(&self, expect: Option<Verdict>, eps: Option<f64>) -> VerifyConfig {
        VerifyConfig {
            grid: self.grid,
            times: self.times,
            tol: self.tol,
            endpoint_tol: self.endpoint_tol,
            expect,
            random_points: self.random_points,
            seed: self.seed,
            eps,
            ..Default::default()
        }
    }

    fn synthesis(&self, eps: Option<f64>) -> SynthesisOptions {
        SynthesisOptions {
            grid: self.grid,
            eps,
            ..Default::default()
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Factor a near-identity map into five horizontal flows.
    Factorize {
        #[command(flatten)]
        map: MapArg,
        #[command(flatten)]
        eps: EpsArg,
    },
    /// Null path from the identity to a near-identity map.
    NullPath {
        #[command(flatten)]
        map: MapArg,
        #[command(flatten)]
        eps: EpsArg,
    },
    /// Positive path from the identity to a map.
    PositivePath {
        #[command(flatten)]
        map: OptionalMapArg,
        /// Reeb time T; every velocity has alpha T.
        #[arg(long)]
        reeb_time: f64,
        /// Cut-off construction that stays close to the identity far out.
        #[arg(long)]
        compact: bool,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Null path along a time-indexed family by subdivision.
    Connect {
        /// Family `(f1, f2, f3)` in x, y, z and t.
        #[arg(long)]
        family: String,
        /// Number of subdivisions, or `auto`.
        #[arg(long, default_value = "auto")]
        subdivide: String,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Extend a path positive outside K0 to a path positive everywhere.
    Extend {
        /// Autonomous contact Hamiltonian; the shipped example by default.
        #[arg(long)]
        hamiltonian: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        k0: f64,
        /// Bump height, or `auto`.
        #[arg(long, default_value = "auto")]
        bump_height: String,
    },
    /// Transport the 1-jet of u(y) along a path.
    Legendrian {
        /// Profile u(y).
        #[arg(long)]
        jet: String,
        /// Path recipe (JSON).
        #[arg(long)]
        path_from: PathBuf,
        /// Parameter range `lo:hi`.
        #[arg(long, default_value = "-1:1")]
        range: String,
        #[arg(long, default_value_t = 21)]
        samples: usize,
        #[arg(long, value_enum)]
        expect: Option<VerdictArg>,
    },
    /// Verify a recipe (`.json`) or a recorded sweep (`.jsonl`).
    Verify {
        #[arg(long)]
        path: PathBuf,
        /// Expected end map, as an expression or builtin name.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, value_enum)]
        expect: Option<VerdictArg>,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct MapArg {
    /// Map `(f1, f2, f3)` in x, y, z.
    #[arg(long)]
    map: Option<String>,
    /// Builtin such as `reeb:0.2`, `shear:0.1`, `bumpflow:0.1`.
    #[arg(long)]
    builtin: Option<String>,
}

#[derive(Args, Debug)]
#[group(required = false, multiple = false)]
struct OptionalMapArg {
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    builtin: Option<String>,
}

#[derive(Args, Debug)]
#[group(required = false, multiple = false)]
struct EpsArg {
    #[arg(long)]
    eps: Option<f64>,
    /// Largest eps on the ladder 1, 1/2, ..., 2^-20 (the default).
    #[arg(long)]
    auto_eps: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VerdictArg {
    Null,
    Positive,
    NonNegative,
    Mixed,
}

impl From<VerdictArg> for Verdict {
    fn from(v: VerdictArg) -> Self {
        match v {
            VerdictArg::Null => Verdict::Null,
            VerdictArg::Positive => Verdict::Positive,
            VerdictArg::NonNegative => Verdict::NonNegative,
            VerdictArg::Mixed => Verdict::Mixed,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn map_from(map: &Option<String>, builtin: &Option<String>) -> Result<Option<(String, Diffeo)>, Failure> {
    let (src, f) = match (map, builtin) {
        (Some(m), _) => (m.clone(), Diffeo::parse(m)),
        (None, Some(b)) => (b.clone(), Diffeo::builtin(b)),
        (None, None) => return Ok(None),
    };
    Ok(Some((src, f.map_err(Failure::from_core)?)))
}

#[derive(Serialize)]
struct AmplitudeSummary {
    field: contactflex::FrameField,
    scale: f64,
    constant: Option<f64>,
    min: f64,
    max: f64,
}

#[derive(Serialize)]
struct FactorizeOutput<'a> {
    schema: &'static str,
    map: &'a str,
    eps: f64,
    translation: contactflex::Translation,
    factors: Vec<AmplitudeSummary>,
    report: &'a contactflex::factorize::FactorizationReport,
    passed: bool,
}

fn amplitude_summaries(fac: &Factorization, grid: &Grid) -> Result<Vec<AmplitudeSummary>, Failure> {
    let pts = grid.points();
    fac.factors()
        .iter()
        .map(|f| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in &pts {
                let a = f.amplitude.value(p).map_err(Failure::from_core)?;
                lo = lo.min(a);
                hi = hi.max(a);
            }
            Ok(AmplitudeSummary {
                field: f.field,
                scale: f.scale,
                constant: f.amplitude.as_const(),
                min: lo,
                max: hi,
            })
        })
        .collect()
}

/// Summary of a synthesized path together with its verification.
#[derive(Serialize)]
struct PathOutput<'a> {
    schema: &'static str,
    command: &'static str,
    input: &'a str,
    eps: Option<f64>,
    subdivisions: usize,
    residual_sup: f64,
    pieces: usize,
    verification: contactflex::VerificationReport,
    passed: bool,
}

fn records(path: &DiffeoPath, cfg: &VerifyConfig) -> Result<Vec<PathRecord>, Failure> {
    let samples = sweep(path, &cfg.points(), &time_grid(cfg.times)).map_err(Failure::from_core)?;
    Ok(samples.iter().map(PathRecord::from).collect())
}

fn finish_path(
    s: &Settings,
    command: &'static str,
    input: &str,
    syn: &Synthesized,
    target: Option<&Diffeo>,
    expect: Verdict,
) -> Result<bool, Failure> {
    let cfg = s.verify_config(Some(expect), syn.eps);
    let report = verify(&syn.path, target, &cfg).map_err(Failure::from_core)?;
    let passed = report.passed;
    let out = PathOutput {
        schema: "contactflex.path/1",
        command,
        input,
        eps: syn.eps,
        subdivisions: syn.subdivisions,
        residual_sup: syn.residual_sup,
        pieces: syn.path.piece_count(),
        verification: report,
        passed,
    };
    emit(s.out.as_deref(), &out, || records(&syn.path, &cfg))?;
    Ok(passed)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let s = Settings::resolve(&cli.global)?;
    match cli.command {
        Command::Factorize { map, eps } => {
            let (src, f) = map_from(&map.map, &map.builtin)?.expect("clap requires a map");
            let opts = FactorizeOptions::default();
            let fac = match eps.eps {
                Some(e) => factorize(&f, e, &s.grid, &opts),
                None => auto_factorize(&f, &s.grid, &opts),
            }
            .map_err(Failure::from_core)?;
            let out = FactorizeOutput {
                schema: "contactflex.factorize/1",
                map: &src,
                eps: fac.eps,
                translation: fac.translation,
                factors: amplitude_summaries(&fac, &s.grid)?,
                report: &fac.report,
                passed: true,
            };
            emit(s.out.as_deref(), &out, || Ok(Vec::<PathRecord>::new()))?;
            Ok(true)
        }
        Command::NullPath { map, eps } => {
            let (src, f) = map_from(&map.map, &map.builtin)?.expect("clap requires a map");
            let syn = null_path_to(&f, &s.synthesis(eps.eps)).map_err(Failure::from_core)?;
            finish_path(&s, "null-path", &src, &syn, Some(&f), Verdict::Null)
        }
        Command::PositivePath {
            map,
            reeb_time,
            compact,
            eps,
        } => {
            let (src, f) = map_from(&map.map, &map.builtin)?
                .unwrap_or_else(|| ("id".to_string(), Diffeo::Identity));
            let opts = s.synthesis(eps);
            let syn = if compact {
                positive_path_compact(&f, reeb_time, &opts)
            } else {
                positive_path_to(&f, reeb_time, &opts)
            }
            .map_err(Failure::from_core)?;
            finish_path(&s, "positive-path", &src, &syn, Some(&f), Verdict::Positive)
        }
        Command::Connect {
            family,
            subdivide,
            eps,
        } => {
            let fam = Family::parse(&family).map_err(Failure::from_core)?;
            let m = match subdivide.as_str() {
                "auto" => None,
                n => Some(n.parse::<usize>().ok().filter(|&m| m > 0).ok_or_else(|| {
                    Failure::usage(format!("--subdivide takes `auto` or a positive count, got `{n}`"))
                })?),
            };
            let syn = subdivide_and_connect(&fam, m, &s.synthesis(eps)).map_err(Failure::from_core)?;
            finish_path(&s, "connect", &family, &syn, Some(&fam.end()), Verdict::Null)
        }
        Command::Extend {
            hamiltonian,
            k0,
            bump_height,
        } => {
            let height = match bump_height.as_str() {
                "auto" => None,
                h => Some(h.parse::<f64>().map_err(|_| {
                    Failure::usage(format!("--bump-height takes `auto` or a number, got `{h}`"))
                })?),
            };
            let input = match &hamiltonian {
                Some(h) => ContactPathInput::from_hamiltonian(
                    ScalarField::parse(h).map_err(Failure::from_core)?,
                    k0,
                ),
                None => ContactPathInput {
                    k0,
                    ..ContactPathInput::shipped_example()
                },
            };
            let opts = ExtensionOptions {
                height,
                tol: s.tol,
                ..Default::default()
            };
            let ext = extend_positive(&input, &opts).map_err(Failure::from_core)?;
            let r = &ext.report;
            let passed = r.classification.verdict == Verdict::Positive
                && r.classification.stats.min_alpha > 0.0
                && r.far_field_sup <= 1e-9;
            let cfg = s.verify_config(None, None);
            let value = serde_json::json!({
                "schema": "contactflex.extend/1",
                "hamiltonian": hamiltonian.as_deref().unwrap_or("1 - 2 bump(0, 2)"),
                "report": r,
                "passed": passed,
            });
            emit(s.out.as_deref(), &value, || records(&ext.path, &cfg))?;
            Ok(passed)
        }
        Command::Legendrian {
            jet,
            path_from,
            range,
            samples,
            expect,
        } => {
            let (lo, hi) = range
                .split_once(':')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                .filter(|(a, b): &(f64, f64)| a <= b)
                .ok_or_else(|| Failure::usage(format!("--range takes `lo:hi`, got `{range}`")))?;
            let recipe: PathRecipe = serde_json::from_str(&read(&path_from)?)
                .map_err(|e| Failure::usage(format!("{}: {e}", path_from.display())))?;
            let path = recipe.build(&s.synthesis(None)).map_err(Failure::from_core)?;
            let u = Jet::parse(&jet).map_err(Failure::from_core)?;
            let l = jet_legendrian(&u, &JetSampling { lo, hi, n: samples })
                .map_err(Failure::from_core)?;
            let iso = transport(&l, &path, &time_grid(s.times), None).map_err(Failure::from_core)?;
            let (verdict, stats) = isotopy_classify(&iso, s.tol);
            let expected = expect.map(Verdict::from);
            let passed = expected.is_none_or(|e| e == verdict);
            let value = serde_json::json!({
                "schema": "contactflex.isotopy/1",
                "jet": u.to_string(),
                "samples": samples,
                "times": s.times,
                "verdict": verdict,
                "expected": expected,
                "alpha": stats,
                "max_tangent_alpha": iso.max_tangent_alpha(),
                "passed": passed,
            });
            emit(s.out.as_deref(), &value, || Ok(iso.records()))?;
            Ok(passed)
        }
        Command::Verify {
            path,
            target,
            expect,
        } => {
            let text = read(&path)?;
            let expect = expect.map(Verdict::from);
            let target = target
                .as_deref()
                .map(parse_map)
                .transpose()
                .map_err(Failure::from_core)?;
            let is_jsonl = path.extension().is_some_and(|e| e == "jsonl");
            let report = if is_jsonl {
                let recs = text
                    .lines()
                    .enumerate()
                    .filter(|(_, l)| !l.trim().is_empty())
                    .map(|(i, l)| {
                        serde_json::from_str::<PathRecord>(l)
                            .map_err(|e| Failure::usage(format!("{}:{}: {e}", path.display(), i + 1)))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                verify_records(&recs, target.as_ref(), &s.verify_config(expect, None))
            } else {
                let recipe: PathRecipe = serde_json::from_str(&text)
                    .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
                let target = match target {
                    Some(t) => Some(t),
                    None => recipe.target().map_err(Failure::from_core)?,
                };
                let built = recipe.build(&s.synthesis(None)).map_err(Failure::from_core)?;
                verify(&built, target.as_ref(), &s.verify_config(expect, None))
            }
            .map_err(Failure::from_core)?;
            let passed = report.passed;
            emit(s.out.as_deref(), &report, || Ok(Vec::<PathRecord>::new()))?;
            Ok(passed)
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
        Err(f) => {
            eprintln!("error: {}", f.message);
            if let Some(report) = f.report() {
                println!("{report}");
            }
            ExitCode::from(f.code)
        }
    }
}
