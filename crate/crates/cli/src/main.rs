//! `manidel`: generate atlases, run the perturbation, verify and export complexes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Deserialize;
use serde_json::{json, Value};

use manidel::assembly::{
    assemble, assign_pl_metric, build_stars, check_star_consistency, complex_from_json, complex_to_json,
    manifold_check, max_geodesic_error, oracle_compare, realizability, star_in_chart, torus_delaunay_oracle,
    vertex_coordinates, write_off, AbstractComplex,
};
use manidel::atlas::{build_flat_torus, build_sphere_exp, validate_input, Atlas, Embedding};
use manidel::patch::is_delta_protected;
use manidel::perturbation::{
    derive_params, forbidden_scan_all, hoop_distortion_check, run_extended, AlgorithmParams, Overrides,
};
use manidel::simplex::{check_distortion_lemmas, is_gamma_good, Label};

#[derive(Parser)]
#[command(name = "manidel", version, about = "Delaunay complexes of perturbed nets on atlas-presented manifolds")]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a fixture atlas and write it as JSON.
    Generate(GenerateArgs),
    /// Perturb an atlas and assemble the output complex.
    Run(RunArgs),
    /// Re-check a complex against the perturbed atlas it came from.
    Verify(VerifyArgs),
    /// Property-check the distortion lemmas and, given an atlas, hoop stability.
    Lemmas(LemmaArgs),
    /// Write a complex as OFF or JSON.
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Torus,
    Sphere,
}

#[derive(Args)]
struct GenerateArgs {
    kind: Kind,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    mu0: f64,
    /// Sphere radius.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Algorithm parameters, read from `--config` and overridden by flags.
#[derive(Args, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ParamArgs {
    /// JSON file with any of the flag names (underscored) as keys.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long = "alpha-tilde0")]
    alpha_tilde0: Option<f64>,
    #[arg(long)]
    max_attempts: Option<usize>,
    /// Use the derived constants only; refuses when the parameter constraints fail.
    #[arg(long)]
    #[serde(skip)]
    certified: bool,
    #[arg(skip)]
    #[serde(rename = "certified")]
    certified_file: Option<bool>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<ParamArgs> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ParamArgs::default(),
        };
        Ok(ParamArgs {
            config: None,
            seed: self.seed.or(file.seed),
            rho0: self.rho0.or(file.rho0),
            gamma0: self.gamma0.or(file.gamma0),
            delta0: self.delta0.or(file.delta0),
            alpha0: self.alpha0.or(file.alpha0),
            alpha_tilde0: self.alpha_tilde0.or(file.alpha_tilde0),
            max_attempts: self.max_attempts.or(file.max_attempts),
            certified: self.certified || file.certified_file.unwrap_or(false),
            certified_file: None,
        })
    }

    /// Practical constants unless `--certified`, with explicit values taking precedence.
    fn params(&self, a: &Atlas) -> Result<AlgorithmParams> {
        let r = self.resolve()?;
        let rho0 = r.rho0.unwrap_or(0.1);
        let mut o = if r.certified { Overrides::default() } else { Overrides::practical(a.m, rho0) };
        if r.certified && (r.gamma0.is_some() || r.delta0.is_some() || r.alpha0.is_some() || r.alpha_tilde0.is_some()) {
            bail!("--certified cannot be combined with constant overrides");
        }
        o.gamma0 = r.gamma0.or(o.gamma0);
        o.delta0 = r.delta0.or(o.delta0);
        o.alpha0 = r.alpha0.or(o.alpha0);
        o.alpha_tilde0 = r.alpha_tilde0.or(o.alpha_tilde0);
        let mut p = derive_params(a.m, a.mu0, rho0, a.xi0, a.nu0, &o)?;
        p.rng_seed = r.seed.unwrap_or(0);
        if let Some(n) = r.max_attempts {
            p.max_attempts = n;
        }
        for w in &p.warnings {
            log::warn!("{w}");
        }
        Ok(p)
    }
}

#[derive(Args)]
struct RunArgs {
    atlas: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    complex: PathBuf,
    /// The perturbed atlas written by `run`.
    atlas: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LemmaArgs {
    /// Simplex dimensions to test.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 1e-6)]
    xi0: f64,
    /// Atlas for the hoop stability check.
    #[arg(long)]
    atlas: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    hoop_trials: usize,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Off,
    Json,
}

#[derive(Args)]
struct ExportArgs {
    complex: PathBuf,
    /// Atlas supplying vertex coordinates, required for OFF.
    #[arg(long)]
    atlas: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "off")]
    format: Format,
    #[arg(long)]
    out: PathBuf,
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, v: &Value) -> Result<()> {
    match out {
        Some(p) => write_json(p, v),
        None => {
            println!("{}", serde_json::to_string_pretty(v)?);
            Ok(())
        }
    }
}

fn load_atlas(path: &Path) -> Result<Atlas> {
    Atlas::load(path).with_context(|| format!("loading atlas {}", path.display()))
}

fn generate(args: &GenerateArgs) -> Result<bool> {
    let a = match args.kind {
        Kind::Torus => build_flat_torus(args.n, args.mu0, args.seed)?,
        Kind::Sphere => build_sphere_exp(args.n, args.radius, args.mu0, args.seed)?,
    };
    a.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    info!("wrote {} charts to {}", a.len(), args.out.display());
    Ok(true)
}

fn torus_oracle_diff(a: &Atlas, c: &AbstractComplex) -> Option<usize> {
    if !matches!(a.embedding, Some(Embedding::FlatTorus)) || a.m != 2 {
        return None;
    }
    let coords = vertex_coordinates(a)?;
    let pts = coords.iter().map(|(&l, x)| (l, [x[0], x[1]])).collect();
    Some(oracle_compare(c, &torus_delaunay_oracle(&pts)).len())
}

fn run(args: &RunArgs) -> Result<bool> {
    let mut a = load_atlas(&args.atlas)?;
    let validation = validate_input(&a);
    if !validation.ok() {
        bail!(
            "atlas fails validation: {} failure(s), first {:?}",
            validation.failures.len(),
            validation.failures.first()
        );
    }
    let params = args.params.params(&a)?;
    let report = run_extended(&mut a, &params)?;
    fs::create_dir_all(&args.out)?;
    a.save(&args.out.join("atlas_perturbed.json"))?;

    let stars = build_stars(&a);
    let consistency = check_star_consistency(&stars);
    let mut summary = json!({
        "run": report,
        "star_consistency": consistency,
    });
    let mut ok = report.scan_empty && consistency.ok();
    match assemble(a.m, &stars) {
        Ok(c) => {
            let mut manifold = manifold_check(&c);
            manifold.star_consistency_ok = Some(consistency.ok());
            ok &= manifold.ok();
            summary["manifold"] = json!(manifold);
            summary["vertices"] = json!(c.count(0));
            summary["top_simplices"] = json!(c.count(a.m));
            let oracle = torus_oracle_diff(&a, &c);
            ok &= oracle.unwrap_or(0) == 0;
            summary["torus_oracle_diff"] = json!(oracle);
            match assign_pl_metric(&a, &c) {
                Ok(metric) => {
                    summary["max_geodesic_error"] = json!(max_geodesic_error(&a, &metric));
                    summary["length_fallbacks"] = json!(metric.fallbacks.len());
                    let lam = metric.min_gram_eigenvalue.iter().map(|(_, l)| *l).fold(f64::INFINITY, f64::min);
                    summary["min_gram_eigenvalue"] = json!(lam);
                    fs::write(args.out.join("complex.json"), complex_to_json(&c, &metric)?)?;
                    if let Some(coords) = vertex_coordinates(&a) {
                        write_off(&c, &coords, fs::File::create(args.out.join("complex.off"))?)?;
                    }
                }
                Err(e) => {
                    ok = false;
                    summary["metric_error"] = json!(e.to_string());
                }
            }
        }
        Err(e) => {
            ok = false;
            summary["assembly_error"] = json!(e.to_string());
        }
    }
    summary["ok"] = json!(ok);
    write_json(&args.out.join("report.json"), &summary)?;
    Ok(ok)
}

fn verify(args: &VerifyArgs) -> Result<bool> {
    let a = load_atlas(&args.atlas)?;
    let params = args.params.params(&a)?;
    let text = fs::read_to_string(&args.complex).with_context(|| format!("reading {}", args.complex.display()))?;
    let (c, lengths) = complex_from_json(&text)?;

    let forbidden = forbidden_scan_all(&a, &params);
    let mut unprotected: Vec<(Label, Vec<Label>)> = Vec::new();
    for i in a.labels() {
        let patch = &a.patches[&i];
        let delta = params.delta(patch.eps);
        for s in star_in_chart(&a, i) {
            if !is_delta_protected(&patch.points, &s, delta) || !is_gamma_good(&patch.simplex(&s), params.gamma0) {
                unprotected.push((i, s));
            }
        }
    }
    let stars = build_stars(&a);
    let consistency = check_star_consistency(&stars);
    let rebuilt = assemble(a.m, &stars).ok();
    let matches_atlas = rebuilt.as_ref().map(|r| oracle_compare(&c, r).len());
    let mut manifold = manifold_check(&c);
    manifold.star_consistency_ok = Some(consistency.ok());
    let real = realizability(&c, &lengths.edge_lengths);
    let oracle = torus_oracle_diff(&a, &c);

    let ok = forbidden.is_empty()
        && unprotected.is_empty()
        && manifold.ok()
        && matches_atlas == Some(0)
        && real.failures.is_empty()
        && oracle.unwrap_or(0) == 0;
    let v = json!({
        "params": params,
        "forbidden": forbidden,
        "unprotected_star_simplices": unprotected,
        "star_consistency": consistency,
        "manifold": manifold,
        "complex_differs_from_atlas_stars": matches_atlas,
        "not_realizable": real.failures,
        "torus_oracle_diff": oracle,
        "ok": ok,
    });
    emit(args.out.as_deref(), &v)?;
    Ok(ok)
}

fn lemmas(args: &LemmaArgs) -> Result<bool> {
    let seed = args.params.resolve()?.seed.unwrap_or(0);
    let mut ok = true;
    let mut reports = Vec::new();
    for &k in &args.k {
        if k == 0 {
            bail!("simplex dimension must be positive");
        }
        let rep = check_distortion_lemmas(args.trials, k, args.xi0, seed);
        ok &= rep.total_violations() == 0;
        reports.push(rep);
    }
    let mut v = json!({ "lemmas": reports });
    if let Some(path) = &args.atlas {
        let a = load_atlas(path)?;
        let params = args.params.params(&a)?;
        let hoop = hoop_distortion_check(&a, args.hoop_trials, &params, seed);
        ok &= hoop.violations() == 0;
        v["hoop"] = json!(hoop);
    }
    v["ok"] = json!(ok);
    emit(args.out.as_deref(), &v)?;
    Ok(ok)
}

fn export(args: &ExportArgs) -> Result<bool> {
    let text = fs::read_to_string(&args.complex).with_context(|| format!("reading {}", args.complex.display()))?;
    let (c, metric) = complex_from_json(&text)?;
    match args.format {
        Format::Json => fs::write(&args.out, complex_to_json(&c, &metric)?)?,
        Format::Off => {
            let Some(path) = &args.atlas else {
                bail!("OFF export needs --atlas for vertex coordinates");
            };
            let coords = vertex_coordinates(&load_atlas(path)?).context("atlas has no built-in embedding")?;
            write_off(&c, &coords, fs::File::create(&args.out)?)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MANIDEL_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Lemmas(a) => lemmas(a),
        Command::Export(a) => export(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("certification failed; see the report");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
