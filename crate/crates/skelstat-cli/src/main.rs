//! Command-line pipeline for skeletal shape statistics: reparameterize,
//! average, test, simulate and deform ds-reps, emitting CSV/SVG/JSON
//! artifacts.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage/IO/validation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use skelstat::dsrep::{lp_size, scale_lp, GpDsRep, LpDsRep};
use skelstat::error::Error;
use skelstat::hypothesis::{
    run_study_gp, run_study_lp, Euclideanization, StudyOptions, TestReport,
};
use skelstat::io;
use skelstat::reparam::{apply_rigid, gp_to_lp, lp_to_gp, root_chart_motion};
use skelstat::report;
use skelstat::simulate::{
    build_study, default_bend_nodes, ellipsoid_template, ellipsoid_template_with_fold_points,
    rotate_frames, DeformAxis, DeformSpec, GroupBend, NoiseSpec,
};
use skelstat::sphere::geodesic_dist;
use skelstat::stats::{mean_lp, DirectionMean, LengthMean, LpPopulation, MeanConfig};

#[derive(Parser)]
#[command(name = "skelstat", version, about = "Skeletal shape statistics")]
struct Cli {
    /// Worker thread cap (falls back to SKELSTAT_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between global and local parameterizations.
    Reparam(ReparamArgs),
    /// Average a directory of LP ds-reps.
    Mean(MeanArgs),
    /// Permutation tests between two groups of ds-reps.
    Test(TestArgs),
    /// Generate a two-group simulation study.
    Simulate(SimulateArgs),
    /// Rotate selected frames of an LP ds-rep.
    Deform(DeformArgs),
    /// Generate an analytic ellipsoid template ds-rep.
    Template(TemplateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Gp2lp,
    Lp2gp,
}

#[derive(Args)]
struct ReparamArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    direction: Direction,
    /// Scale the produced LP rep to unit LP-size (gp2lp only).
    #[arg(long)]
    scale: bool,
    /// Target LP-size when reconstructing from a scaled rep.
    #[arg(long, default_value_t = 1.0)]
    size: f64,
    /// Reference GP rep; prints reconstruction errors against it after
    /// aligning the reference to the root chart (lp2gp only).
    #[arg(long)]
    compare: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LengthMeanArg {
    Geometric,
    Arithmetic,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionMeanArg {
    Pns,
    Frechet,
}

#[derive(Args)]
struct MeanArgs {
    #[arg(long = "input-dir")]
    input_dir: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long = "length-mean", value_enum, default_value = "geometric")]
    length_mean: LengthMeanArg,
    #[arg(long = "direction-mean", value_enum, default_value = "pns")]
    direction_mean: DirectionMeanArg,
    /// Also reconstruct the mean as a GP ds-rep at the mean LP-size.
    #[arg(long)]
    reconstruct: Option<PathBuf>,
    /// Write the reconstructed mean's spoke tips as an xyz CSV.
    #[arg(long)]
    tips: Option<PathBuf>,
    /// Print per-family deviations of the mean from this LP template.
    #[arg(long)]
    compare: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Lp,
    Gp,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum EuclidArg {
    Pns,
    Tangent,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long = "group-a")]
    group_a: PathBuf,
    #[arg(long = "group-b")]
    group_b: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    /// GPA scaling for the GP baseline (ignored by LP mode).
    #[arg(long, value_enum, default_value = "on")]
    scaling: OnOff,
    #[arg(long, default_value_t = 10_000)]
    b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    fdr: f64,
    #[arg(long, value_enum, default_value = "pns")]
    euclid: EuclidArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DeformArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Gp,
    Lp,
}

#[derive(Args)]
struct TemplateArgs {
    #[arg(long, default_value_t = 5)]
    rows: usize,
    #[arg(long, default_value_t = 13)]
    cols: usize,
    /// Principal radii a,b,c with a > b > c.
    #[arg(long, value_delimiter = ',', default_values_t = [3.0, 2.0, 1.0])]
    radii: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    crest: usize,
    /// Put crest tails on dedicated fold points instead of boundary nodes.
    #[arg(long = "fold-points")]
    fold_points: bool,
    #[arg(long, value_enum, default_value = "gp")]
    kind: KindArg,
    #[arg(long)]
    output: PathBuf,
}

/// Study configuration consumed by `simulate`.
#[derive(Serialize, Deserialize)]
struct StudyConfig {
    /// LP template file (unscaled).
    template: PathBuf,
    n_per_group: usize,
    seed: u64,
    bend: BendConfig,
    /// Omit for deterministic, noise-free members.
    #[serde(default)]
    noise: Option<NoiseSpec>,
}

#[derive(Serialize, Deserialize)]
struct BendConfig {
    /// Target nodes; omitted: the three spinal nodes nearest the root.
    #[serde(default)]
    nodes: Option<Vec<usize>>,
    axis: DeformAxis,
    mean_angle_a: f64,
    mean_angle_b: f64,
    /// Von Mises concentration of the per-member angle; omitted: exact.
    #[serde(default)]
    kappa: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("SKELSTAT_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not cap worker threads: {e}");
        }
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = match &err {
                Error::Numerical(_) => "numerical",
                Error::Io(_) => "io",
                Error::Parse(_) => "parse",
                Error::Validation(_) => "validation",
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": err.to_string(), "kind": kind })
            );
            match err {
                Error::Numerical(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Reparam(args) => cmd_reparam(args),
        Command::Mean(args) => cmd_mean(args),
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Deform(args) => cmd_deform(args),
        Command::Template(args) => cmd_template(args),
    }
}

fn cmd_reparam(args: ReparamArgs) -> Result<(), Error> {
    match args.direction {
        Direction::Gp2lp => {
            if args.compare.is_some() {
                return Err(Error::validation(
                    "--compare applies to lp2gp only".to_string(),
                ));
            }
            let gp = io::load_gp(&args.input)?;
            let mut lp = gp_to_lp(&gp)?;
            if args.scale {
                lp = scale_lp(&lp);
            }
            io::save_lp(&lp, &args.output)?;
            print_lp_info(&lp);
        }
        Direction::Lp2gp => {
            if args.scale {
                return Err(Error::validation(
                    "--scale applies to gp2lp only".to_string(),
                ));
            }
            let lp = io::load_lp(&args.input)?;
            let size = lp.scaled.then_some(args.size);
            let gp = lp_to_gp(&lp, None, size)?;
            io::save_gp(&gp, &args.output)?;
            println!(
                "reconstructed {} skeletal points, {} spokes",
                gp.n_points(),
                gp.n_spokes()
            );
            if let Some(reference) = args.compare {
                let original = io::load_gp(&reference)?;
                let (r, t) = root_chart_motion(&original)?;
                let aligned = apply_rigid(&original, &r, &t);
                let mut max_pos = 0.0f64;
                for (a, b) in aligned.skeletal_points.iter().zip(&gp.skeletal_points) {
                    max_pos = max_pos.max((a - b).norm());
                }
                let mut max_dir = 0.0f64;
                let mut max_len = 0.0f64;
                for (a, b) in aligned.spokes.iter().zip(&gp.spokes) {
                    max_dir = max_dir.max(geodesic_dist(&a.dir, &b.dir));
                    max_len = max_len.max((a.len - b.len).abs());
                }
                println!("round-trip tolerance report (reference aligned to root chart):");
                println!("  max position error:        {max_pos:.3e}");
                println!("  max direction angle error: {max_dir:.3e}");
                println!("  max length error:          {max_len:.3e}");
            }
        }
    }
    Ok(())
}

fn print_lp_info(lp: &LpDsRep) {
    let n_s = lp.n_spokes();
    let n_p = lp.n_points();
    println!(
        "lp_size: {}  (scaled: {})",
        if lp.scaled {
            lp.lp_size
        } else {
            lp_size(lp)
        },
        lp.scaled
    );
    println!(
        "spokes: {n_s}, skeletal points: {n_p}, LP GOPs: {}, GP GOPs: {}",
        skelstat::hypothesis::lp_gop_count(n_s, n_p),
        skelstat::hypothesis::gp_gop_count(n_s, n_p)
    );
}

fn load_lp_population(dir: &Path) -> Result<LpPopulation, Error> {
    let entries = list_json(dir)?;
    if entries.is_empty() {
        return Err(Error::validation(format!(
            "{}: no .json files found",
            dir.display()
        )));
    }
    let mut members = Vec::with_capacity(entries.len());
    for path in &entries {
        let lp =
            io::load_lp(path).map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        if let Some(first) = members.first() {
            let _: &LpDsRep = first;
            if !first.same_structure(&lp) {
                return Err(Error::validation(format!(
                    "{} differs structurally from {}",
                    path.display(),
                    entries[0].display()
                )));
            }
        }
        members.push(lp);
    }
    LpPopulation::new(members)
}

fn list_json(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().map(|e| e == "json").unwrap_or(false))
        .collect();
    entries.sort();
    Ok(entries)
}

fn cmd_mean(args: MeanArgs) -> Result<(), Error> {
    let pop = load_lp_population(&args.input_dir)?;
    let pop = if pop.scaled() {
        pop
    } else {
        LpPopulation::new(pop.members().iter().map(scale_lp).collect())?
    };
    let cfg = MeanConfig {
        length_mean: match args.length_mean {
            LengthMeanArg::Geometric => LengthMean::Geometric,
            LengthMeanArg::Arithmetic => LengthMean::Arithmetic,
        },
        direction_mean: match args.direction_mean {
            DirectionMeanArg::Pns => DirectionMean::Pns,
            DirectionMeanArg::Frechet => DirectionMean::Frechet,
        },
        ..MeanConfig::default()
    };
    let outcome = mean_lp(&pop, &cfg)?;
    io::save_lp(&outcome.mean, &args.output)?;
    println!(
        "mean of {} members written; lengths renormalized: {} (factor {:.6})",
        pop.len(),
        outcome.renormalized,
        outcome.renorm_factor
    );

    if args.reconstruct.is_some() || args.tips.is_some() {
        let gp = lp_to_gp(&outcome.mean, None, Some(outcome.mean.lp_size))?;
        if let Some(path) = &args.reconstruct {
            io::save_gp(&gp, path)?;
        }
        if let Some(path) = &args.tips {
            let tips: Vec<_> = (0..gp.n_spokes()).map(|i| gp.spoke_tip(i)).collect();
            report::write_tips_csv(&tips, path)?;
        }
    }

    if let Some(template_path) = &args.compare {
        let raw = io::load_lp(template_path)?;
        let template = if raw.scaled { raw } else { scale_lp(&raw) };
        if !template.same_structure(&outcome.mean) {
            return Err(Error::validation(
                "comparison template differs structurally from the mean".to_string(),
            ));
        }
        let mean = &outcome.mean;
        let mut frame_dev = 0.0f64;
        let mut conn_dev = 0.0f64;
        for j in 0..mean.n_points() {
            frame_dev = frame_dev.max(mean.frames[j].max_axis_angle_to(&template.frames[j]));
            if j != mean.hierarchy.root() {
                conn_dev = conn_dev
                    .max(geodesic_dist(&mean.connections[j].dir, &template.connections[j].dir));
            }
        }
        let mut spoke_dev = 0.0f64;
        for (a, b) in mean.spokes.iter().zip(&template.spokes) {
            spoke_dev = spoke_dev.max(geodesic_dist(&a.dir, &b.dir));
        }
        println!("max geodesic deviation from template:");
        println!("  frame axes:            {frame_dev:.6e}");
        println!("  connection directions: {conn_dev:.6e}");
        println!("  spoke directions:      {spoke_dev:.6e}");
    }
    Ok(())
}

fn cmd_test(args: TestArgs) -> Result<(), Error> {
    let options = StudyOptions {
        b: args.b,
        seed: args.seed,
        alpha: args.alpha,
        fdr: args.fdr,
        euclid: match args.euclid {
            EuclidArg::Pns => Euclideanization::Pns,
            EuclidArg::Tangent => Euclideanization::Tangent,
        },
        gpa_scaling: matches!(args.scaling, OnOff::On),
    };
    let report: TestReport = match args.mode {
        ModeArg::Lp => {
            let a = load_lp_population(&args.group_a)?;
            let b = load_lp_population(&args.group_b)?;
            run_study_lp(&a, &b, &options)?
        }
        ModeArg::Gp => {
            let a = load_gp_group(&args.group_a)?;
            let b = load_gp_group(&args.group_b)?;
            run_study_gp(&a, &b, &options)?
        }
    };

    std::fs::create_dir_all(&args.out_dir)?;
    report::write_report_csv(&report, args.out_dir.join("report.csv"))?;
    report::write_summary_json(&report, args.out_dir.join("summary.json"))?;
    report::write_pvalue_svg(&report, args.out_dir.join("pvalues.svg"))?;
    report::write_significance_map_csv(&report, args.out_dir.join("significance_map.csv"))?;
    println!(
        "K = {}; significant raw/BH/Bonferroni: {}/{}/{}",
        report.k,
        report.significant_raw(),
        report.significant_bh(),
        report.significant_bonf()
    );
    Ok(())
}

fn load_gp_group(dir: &Path) -> Result<Vec<GpDsRep>, Error> {
    let entries = list_json(dir)?;
    if entries.is_empty() {
        return Err(Error::validation(format!(
            "{}: no .json files found",
            dir.display()
        )));
    }
    entries
        .iter()
        .map(|p| io::load_gp(p).map_err(|e| Error::validation(format!("{}: {e}", p.display()))))
        .collect()
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let config: StudyConfig = serde_json::from_slice(&std::fs::read(&args.config)?)?;
    let template = io::load_lp(&config.template)?;
    let nodes = match &config.bend.nodes {
        Some(nodes) => nodes.clone(),
        None => default_bend_nodes(&template)?,
    };
    let bend_a = GroupBend {
        nodes: nodes.clone(),
        axis: config.bend.axis,
        mean_angle: config.bend.mean_angle_a,
        kappa: config.bend.kappa,
    };
    let bend_b = GroupBend {
        nodes,
        axis: config.bend.axis,
        mean_angle: config.bend.mean_angle_b,
        kappa: config.bend.kappa,
    };
    let (group_a, group_b) = build_study(
        &template,
        config.n_per_group,
        &bend_a,
        &bend_b,
        config.noise.as_ref(),
        config.seed,
    )?;

    for (name, group) in [("group_a", &group_a), ("group_b", &group_b)] {
        let dir = args.out_dir.join(name);
        std::fs::create_dir_all(&dir)?;
        let width = group.len().to_string().len().max(3);
        for (i, member) in group.members().iter().enumerate() {
            io::save_lp(member, dir.join(format!("member_{i:0width$}.json")))?;
        }
    }
    println!(
        "wrote {} members per group under {}",
        config.n_per_group,
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_deform(args: DeformArgs) -> Result<(), Error> {
    let lp = io::load_lp(&args.input)?;
    let spec: DeformSpec = serde_json::from_slice(&std::fs::read(&args.spec)?)?;
    let out = rotate_frames(&lp, &spec)?;
    io::save_lp(&out, &args.output)?;
    println!(
        "rotated {} frame(s) about the {:?} axis",
        spec.target_nodes.len(),
        spec.axis
    );
    Ok(())
}

fn cmd_template(args: TemplateArgs) -> Result<(), Error> {
    if args.radii.len() != 3 {
        return Err(Error::validation(
            "--radii expects three comma-separated values".to_string(),
        ));
    }
    let radii = (args.radii[0], args.radii[1], args.radii[2]);
    let gp = if args.fold_points {
        ellipsoid_template_with_fold_points(args.rows, args.cols, radii, args.crest)?
    } else {
        ellipsoid_template(args.rows, args.cols, radii, args.crest)?
    };
    match args.kind {
        KindArg::Gp => {
            io::save_gp(&gp, &args.output)?;
            println!(
                "template: {} skeletal points, {} spokes",
                gp.n_points(),
                gp.n_spokes()
            );
        }
        KindArg::Lp => {
            let lp = gp_to_lp(&gp)?;
            io::save_lp(&lp, &args.output)?;
            print_lp_info(&lp);
        }
    }
    Ok(())
}
