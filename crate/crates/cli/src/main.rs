use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dyadwave::czd::cz_decompose;
use dyadwave::dyadic::{build_cubes, build_nets, verify_cube_axioms, CubeSystem};
use dyadwave::product::{cmo_norm, hp_norm, Factor, OmegaMode, ProductFrame, ProductSignal};
use dyadwave::space::geometry_report;
use dyadwave::spacefile::{
    gen_cycle, gen_euclidean, gen_grid, gen_snowflake, gen_ultrametric_tree, SpaceFile,
    WeightScheme,
};
use dyadwave::squares::{
    continuous_square_function, discrete_square_function, lp_norm, pp_quantities,
};
use dyadwave::verify::{run_all, run_space_checks, CriterionOutcome, SpaceCase, DELTAS};
use dyadwave::wavelets::{build_basis, WaveletBasis};
use dyadwave::FiniteSpace;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(
    name = "dyadwave",
    version,
    about = "Dyadic wavelet analysis on finite quasi-metric spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded space file.
    Gen(GenArgs),
    /// Build nets, cubes and the wavelet basis; dump them and check the axioms.
    Build(BuildArgs),
    /// Wavelet coefficients, square functions and sampled oscillation norms of a signal.
    Analyze(AnalyzeArgs),
    /// Norms of a signal, or of a product signal when `--space2` is given.
    Norms(NormsArgs),
    /// Split a product signal at height `--alpha`.
    Czd(CzdArgs),
    /// Run the acceptance suite, or the single-space checks on `--space`.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Euclidean,
    Grid,
    Cycle,
    Tree,
    Snowflake,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Weights {
    Uniform,
    Random,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    Exact,
    Heuristic,
}

impl From<Mode> for OmegaMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => OmegaMode::Exact,
            Mode::Heuristic => OmegaMode::Heuristic,
        }
    }
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Number of points (euclidean, cycle).
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Points per axis (grid).
    #[arg(long, default_value_t = 8)]
    side: usize,
    #[arg(long, default_value_t = 2)]
    branching: usize,
    #[arg(long, default_value_t = 4)]
    depth: u32,
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    /// Exponent applied to the base metric (snowflake).
    #[arg(long, default_value_t = 2.0)]
    theta: f64,
    /// Base space file (snowflake).
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Weights::Uniform)]
    weights: Weights,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Clone)]
struct SpaceArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long = "kmin", default_value_t = 0, allow_negative_numbers = true)]
    k_min: i32,
}

#[derive(Args, Serialize)]
struct BuildArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Directory receiving `cubes.json` and `basis.json`.
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// CSV with columns `point_id,value`.
    #[arg(long)]
    signal: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long = "p-grid", value_delimiter = ',')]
    p_grid: Vec<f64>,
    #[arg(long = "N", default_value_t = 0)]
    n_shift: i32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct NormsArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Second factor; the signal is then a product CSV `x1_id,x2_id,value`.
    #[arg(long)]
    space2: Option<PathBuf>,
    #[arg(long)]
    signal: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long = "p-grid", value_delimiter = ',')]
    p_grid: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Heuristic)]
    mode: Mode,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CzdArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long)]
    space2: PathBuf,
    /// Product CSV `x1_id,x2_id,value`.
    #[arg(long)]
    signal: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 2.0)]
    p1: f64,
    #[arg(long, default_value_t = 0.5)]
    p2: f64,
    /// Directory receiving `g.csv`, `b.csv` and `remainder.csv`.
    #[arg(long)]
    signals_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    /// Spaces for the single-space checks; the full suite runs when omitted.
    #[arg(long)]
    space: Vec<PathBuf>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SpaceInfo {
    path: String,
    sha256: String,
    n: usize,
    a0: f64,
    a0_exact: bool,
    doubling_constant: Option<f64>,
    upper_dimension: Option<f64>,
}

fn hash_space(space: &FiniteSpace) -> String {
    let mut h = Sha256::new();
    h.update((space.len() as u64).to_le_bytes());
    for v in space.distances().iter().chain(space.weights()) {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn space_info(path: &Path, space: &FiniteSpace) -> SpaceInfo {
    let lo = space.min_positive_distance();
    let hi = 2.0 * space.diameter();
    let grid: Vec<f64> = if space.len() < 2 {
        vec![1.0]
    } else {
        (0..8)
            .map(|i| lo * (hi / lo).powf(i as f64 / 7.0))
            .collect()
    };
    let geo = geometry_report(space, &grid).ok();
    let q = space.quasi_triangle();
    SpaceInfo {
        path: path.display().to_string(),
        sha256: hash_space(space),
        n: space.len(),
        a0: q.a0,
        a0_exact: q.exact,
        doubling_constant: geo.as_ref().map(|g| g.doubling_constant),
        upper_dimension: geo.as_ref().map(|g| g.upper_dimension),
    }
}

fn load_space(path: &Path) -> Result<FiniteSpace> {
    let text = fs::read_to_string(path).with_context(|| {
        format!(
            "cannot read space file {}; create one with `dyadwave gen`",
            path.display()
        )
    })?;
    let file = SpaceFile::from_json(&text)
        .with_context(|| format!("invalid space file {}", path.display()))?;
    Ok(file.to_space()?)
}

#[derive(Deserialize, Serialize)]
struct Row {
    point_id: usize,
    value: f64,
}

#[derive(Deserialize, Serialize)]
struct ProductRow {
    x1_id: usize,
    x2_id: usize,
    value: f64,
}

fn read_signal(path: &Path, n: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read signal file {}", path.display()))?;
    let mut out = vec![None; n];
    for row in rdr.deserialize() {
        let r: Row = row.with_context(|| format!("bad row in {}", path.display()))?;
        let slot = out
            .get_mut(r.point_id)
            .ok_or_else(|| anyhow!("point_id {} out of range (n = {n})", r.point_id))?;
        if slot.replace(r.value).is_some() {
            bail!("point_id {} appears twice", r.point_id);
        }
    }
    out.iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| anyhow!("missing value for point_id {i}")))
        .collect()
}

fn read_product_signal(path: &Path, n1: usize, n2: usize) -> Result<ProductSignal> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read signal file {}", path.display()))?;
    let mut out = vec![None; n1 * n2];
    for row in rdr.deserialize() {
        let r: ProductRow = row.with_context(|| format!("bad row in {}", path.display()))?;
        if r.x1_id >= n1 || r.x2_id >= n2 {
            bail!("({}, {}) out of range ({n1} x {n2})", r.x1_id, r.x2_id);
        }
        if out[r.x1_id * n2 + r.x2_id].replace(r.value).is_some() {
            bail!("({}, {}) appears twice", r.x1_id, r.x2_id);
        }
    }
    let values: Vec<f64> = out
        .iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| anyhow!("missing value for ({}, {})", i / n2, i % n2)))
        .collect::<Result<_>>()?;
    Ok(ProductSignal::from_row_major(n1, n2, &values)?)
}

fn write_product_signal(path: &Path, f: &ProductSignal) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let (n1, n2) = f.0.shape();
    for a in 0..n1 {
        for b in 0..n2 {
            w.serialize(ProductRow {
                x1_id: a,
                x2_id: b,
                value: f.0[(a, b)],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn emit(out: &Option<PathBuf>, report: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn envelope(
    command: &str,
    config: impl Serialize,
    spaces: Vec<SpaceInfo>,
    result: Value,
) -> Result<Value> {
    Ok(json!({
        "version": dyadwave::VERSION,
        "command": command,
        "config": serde_json::to_value(config)?,
        "spaces": serde_json::to_value(spaces)?,
        "result": result,
    }))
}

struct Built {
    space: FiniteSpace,
    cubes: CubeSystem,
    basis: WaveletBasis,
}

fn build(args: &SpaceArgs) -> Result<Built> {
    let space = load_space(&args.space)?;
    let nets = build_nets(&space, args.delta, args.k_min)?;
    let cubes = build_cubes(&space, &nets)?;
    let basis = build_basis(&space, &cubes)?;
    Ok(Built {
        space,
        cubes,
        basis,
    })
}

fn p_list(p: f64, grid: &[f64]) -> Vec<f64> {
    if grid.is_empty() {
        vec![p]
    } else {
        grid.to_vec()
    }
}

fn cube_dump(cubes: &CubeSystem) -> Value {
    let levels: Vec<Value> = (cubes.k_min()..=cubes.k_max())
        .map(|k| {
            let list: Vec<Value> = cubes
                .cubes(k)
                .iter()
                .map(|c| {
                    json!({
                        "center": c.center,
                        "members": c.members,
                        "measure": c.measure,
                        "parent": c.parent,
                    })
                })
                .collect();
            json!({ "k": k, "scale": cubes.delta().powi(k), "cubes": list })
        })
        .collect();
    json!({
        "delta": cubes.delta(),
        "k_min": cubes.k_min(),
        "k_max": cubes.k_max(),
        "constants": cubes.constants,
        "levels": levels,
    })
}

fn basis_dump(basis: &WaveletBasis) -> Value {
    let wavelets: Vec<Value> = basis
        .wavelets()
        .iter()
        .map(|w| {
            json!({
                "k": w.k,
                "alpha": w.alpha,
                "support_cube": w.support_cube,
                "coeff_cube": w.coeff_cube,
                "values": w.values,
            })
        })
        .collect();
    let scaling: Vec<Value> = basis
        .scaling()
        .iter()
        .map(|s| json!({ "alpha": s.alpha, "cube": s.cube, "values": s.values }))
        .collect();
    json!({ "n": basis.n(), "wavelets": wavelets, "scaling": scaling })
}

/// Outcome of a command: the report plus whether its assertions held.
type Outcome = (Value, bool);

fn cmd_gen(args: &GenArgs) -> Result<Outcome> {
    let scheme = match args.weights {
        Weights::Uniform => WeightScheme::Uniform,
        Weights::Random => WeightScheme::Random,
    };
    let file = match args.kind {
        Kind::Euclidean => gen_euclidean(args.n, args.dim, args.seed, scheme),
        Kind::Grid => gen_grid(args.side, args.dim, args.seed, scheme),
        Kind::Cycle => gen_cycle(args.n, args.seed, scheme),
        Kind::Tree => {
            gen_ultrametric_tree(args.branching, args.depth, args.ratio, args.seed, scheme)
        }
        Kind::Snowflake => {
            let base = args
                .base
                .as_ref()
                .ok_or_else(|| anyhow!("--kind snowflake needs --base <space file>"))?;
            let text = fs::read_to_string(base)
                .with_context(|| format!("cannot read base space {}", base.display()))?;
            gen_snowflake(SpaceFile::from_json(&text)?, args.theta)
        }
    };
    file.to_space()?;
    Ok((serde_json::from_str(&file.to_json())?, true))
}

fn cmd_build(args: &BuildArgs) -> Result<Outcome> {
    let b = build(&args.space)?;
    let axioms = verify_cube_axioms(&b.space, &b.cubes);
    if let Some(dir) = &args.dump {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        fs::write(
            dir.join("cubes.json"),
            serde_json::to_string_pretty(&cube_dump(&b.cubes))?,
        )?;
        fs::write(
            dir.join("basis.json"),
            serde_json::to_string_pretty(&basis_dump(&b.basis))?,
        )?;
    }
    let nets = b.cubes.nets();
    let net_sizes: BTreeMap<i32, usize> = nets.levels().map(|k| (k, nets.level(k).len())).collect();
    let ok = axioms.exact_axioms_pass();
    let result = json!({
        "k_min": b.cubes.k_min(),
        "k_max": b.cubes.k_max(),
        "net_sizes": net_sizes,
        "cube_count": b.cubes.len(),
        "wavelet_count": b.basis.wavelets().len(),
        "delta_admissible": nets.admissible,
        "axioms": axioms,
    });
    let info = space_info(&args.space.space, &b.space);
    Ok((envelope("build", args, vec![info], result)?, ok))
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<Outcome> {
    let b = build(&args.space)?;
    let f = read_signal(&args.signal, b.space.len())?;
    let coeffs = b.basis.analyze(&f)?;
    let s = discrete_square_function(&b.basis, &f)?;
    let sc = continuous_square_function(&b.basis, &f)?;
    let w = b.space.weights();
    let mut per_p = Vec::new();
    let mut ok = true;
    for p in p_list(args.p, &args.p_grid) {
        let pp = pp_quantities(&b.basis, &b.cubes, &f, args.n_shift, p)?;
        let nsc = lp_norm(w, &sc, p)?;
        ok &= pp.pp_inf_norm <= nsc * (1.0 + 1e-12) && nsc <= pp.pp_sup_norm * (1.0 + 1e-12);
        per_p.push(json!({
            "p": p,
            "norm_f": lp_norm(w, &f, p)?,
            "norm_s": lp_norm(w, &s, p)?,
            "norm_sc": nsc,
            "pp_inf_norm": pp.pp_inf_norm,
            "pp_sup_norm": pp.pp_sup_norm,
            "clamped_levels": pp.clamped_levels,
        }));
    }
    let wavelet_coeffs: Vec<Value> = b
        .basis
        .wavelets()
        .iter()
        .zip(&coeffs.wavelet)
        .map(|(psi, c)| json!({ "k": psi.k, "alpha": psi.alpha, "value": c }))
        .collect();
    let scaling_coeffs: Vec<Value> = b
        .basis
        .scaling()
        .iter()
        .zip(&coeffs.scaling)
        .map(|(phi, c)| json!({ "alpha": phi.alpha, "value": c }))
        .collect();
    let result = json!({
        "wavelet_coefficients": wavelet_coeffs,
        "scaling_coefficients": scaling_coeffs,
        "square_function": s,
        "continuous_square_function": sc,
        "norms": per_p,
    });
    let info = space_info(&args.space.space, &b.space);
    Ok((envelope("analyze", args, vec![info], result)?, ok))
}

fn product_frame(first: &SpaceArgs, second: &Path) -> Result<(ProductFrame, Vec<SpaceInfo>)> {
    let s1 = load_space(&first.space)?;
    let s2 = load_space(second)?;
    let infos = vec![space_info(&first.space, &s1), space_info(second, &s2)];
    let f1 = Factor::build(s1, first.delta, first.k_min)?;
    let f2 = Factor::build(s2, first.delta, first.k_min)?;
    Ok((ProductFrame::new(f1, f2), infos))
}

fn cmd_norms(args: &NormsArgs) -> Result<Outcome> {
    let ps = p_list(args.p, &args.p_grid);
    match &args.space2 {
        None => {
            let b = build(&args.space)?;
            let f = read_signal(&args.signal, b.space.len())?;
            let s = discrete_square_function(&b.basis, &f)?;
            let sc = continuous_square_function(&b.basis, &f)?;
            let w = b.space.weights();
            let coarse = b.basis.coarse(&f)?;
            let osc: Vec<f64> = f.iter().zip(coarse.iter()).map(|(a, c)| a - c).collect();
            let mut rows = Vec::new();
            for p in ps {
                rows.push(json!({
                    "p": p,
                    "lp_norm": lp_norm(w, &f, p)?,
                    "hp_norm": lp_norm(w, &s, p)?,
                    "continuous_norm": lp_norm(w, &sc, p)?,
                    "oscillation_norm": lp_norm(w, &osc, p)?,
                }));
            }
            let info = space_info(&args.space.space, &b.space);
            Ok((
                envelope("norms", args, vec![info], json!({ "norms": rows }))?,
                true,
            ))
        }
        Some(second) => {
            let (frame, infos) = product_frame(&args.space, second)?;
            let (n1, n2) = frame.shape();
            let f = read_product_signal(&args.signal, n1, n2)?;
            let mut rows = Vec::new();
            for p in ps {
                let cmo = cmo_norm(&frame, &f, p, args.mode.into())?;
                rows.push(json!({
                    "p": p,
                    "lp_norm": frame.lp_norm(&f, p)?,
                    "hp_norm": hp_norm(&frame, &f, p)?,
                    "cmo_norm": cmo.value,
                    "cmo_lower_bound_only": cmo.lower_bound,
                    "cmo_family_size": cmo.family_size,
                    "cmo_argmax": cmo.argmax,
                }));
            }
            let result = json!({ "rectangles": frame.n_rectangles(), "norms": rows });
            Ok((envelope("norms", args, infos, result)?, true))
        }
    }
}

fn cmd_czd(args: &CzdArgs) -> Result<Outcome> {
    let (frame, infos) = product_frame(&args.space, &args.space2)?;
    let (n1, n2) = frame.shape();
    let f = read_product_signal(&args.signal, n1, n2)?;
    let r = cz_decompose(&frame, &f, args.alpha, args.p, args.p1, args.p2)?;
    if let Some(dir) = &args.signals_out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write_product_signal(&dir.join("g.csv"), &r.g)?;
        write_product_signal(&dir.join("b.csv"), &r.b)?;
        write_product_signal(&dir.join("remainder.csv"), &r.remainder)?;
    }
    let ok = r.reconstruction_error <= 1e-10;
    let result = serde_json::to_value(r.summary(&frame))?;
    Ok((envelope("czd", args, infos, result)?, ok))
}

fn cmd_verify(args: &VerifyArgs) -> Result<Outcome> {
    let (outcomes, infos): (Vec<CriterionOutcome>, Vec<SpaceInfo>) = if args.space.is_empty() {
        (run_all(args.seed)?, Vec::new())
    } else {
        let mut cases = Vec::new();
        let mut infos = Vec::new();
        for p in &args.space {
            let space = load_space(p)?;
            infos.push(space_info(p, &space));
            cases.push(SpaceCase {
                name: p.display().to_string(),
                space,
            });
        }
        let deltas = args
            .delta
            .map(|d| vec![d])
            .unwrap_or_else(|| DELTAS.to_vec());
        (run_space_checks(&cases, &deltas, args.seed)?, infos)
    };
    for o in &outcomes {
        eprintln!("{}", o.line());
        for f in &o.failures {
            eprintln!("    {f}");
        }
    }
    let ok = outcomes.iter().all(|o| o.pass);
    let result = json!({ "all_pass": ok, "criteria": outcomes });
    Ok((envelope("verify", args, infos, result)?, ok))
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Build(a) => cmd_build(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Norms(a) => cmd_norms(a),
        Command::Czd(a) => cmd_czd(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn out_path(cli: &Cli) -> &Option<PathBuf> {
    match &cli.command {
        Command::Gen(a) => &a.out,
        Command::Build(a) => &a.out,
        Command::Analyze(a) => &a.out,
        Command::Norms(a) => &a.out,
        Command::Czd(a) => &a.out,
        Command::Verify(a) => &a.out,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli).and_then(|(report, ok)| emit(out_path(&cli), &report).map(|_| ok)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
