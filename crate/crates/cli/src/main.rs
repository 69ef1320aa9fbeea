use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use agrivolt::energy::{annual_yield, find_optimal_tilt};
use agrivolt::optics::Orientation;
use agrivolt::scenario::{parse_scenario, Scenario, GMPV_TILT};
use agrivolt::study::Study;
use agrivolt::sweep::{feasibility_boundary, min_fit_table, run_sweep, BoundaryPoint, Metric, SweepSpec};
use agrivolt::validation::{run_validation, ValidationConfig, ValidationHooks, DEFAULT_MC_RAYS, DEFAULT_SEED};
use agrivolt::Error;

/// Agrivoltaic vs ground-mounted PV feasibility explorer.
#[derive(Debug, Parser)]
#[command(name = "agrivolt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Output style: aligned text or JSON.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,

    /// Directory for output files. Created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for the Monte-Carlo oracles.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Machine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrientationArg {
    #[value(name = "ns_tilted")]
    NsTilted,
    #[value(name = "ew_vertical")]
    EwVertical,
}

impl From<OrientationArg> for Orientation {
    fn from(o: OrientationArg) -> Self {
        match o {
            OrientationArg::NsTilted => Orientation::NsTilted,
            OrientationArg::EwVertical => Orientation::EwVertical,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one design point against GMPV and the open field.
    Feasibility {
        #[arg(long)]
        scenario: PathBuf,
        /// Switch the AV orientation (κ and clearance follow unless set in the file).
        #[arg(long, value_enum)]
        orientation: Option<OrientationArg>,
        /// AV pitch-to-height ratio (defaults to the scenario's).
        #[arg(long)]
        ph: Option<f64>,
        /// M_L = c_M / c_L (defaults to the scenario's).
        #[arg(long)]
        ml: Option<f64>,
    },
    /// Evaluate metrics over the (p/h × M_L) grid and write one CSV per metric.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        orientation: Option<OrientationArg>,
        /// Restrict to these metrics (default: the scenario's sweep metrics).
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        /// Replace the p/h axis with these values.
        #[arg(long, value_delimiter = ',')]
        ph: Vec<f64>,
        /// Replace the M_L axis with these values.
        #[arg(long, value_delimiter = ',')]
        ml: Vec<f64>,
    },
    /// Tariff premium needed for equivalence with GMPV, in % of the base tariff.
    FitThreshold {
        /// One table column per scenario and orientation.
        #[arg(long, required = true)]
        scenario: Vec<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',')]
        orientation: Vec<OrientationArg>,
        #[arg(long, value_delimiter = ',', default_values_t = [2.0, 3.0, 4.0])]
        ph: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 15.0, 20.0, 30.0])]
        ml: Vec<f64>,
    },
    /// Fixed tilt maximizing annual yield of the scenario's GMPV array.
    OptimalTilt {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run the built-in oracle suites.
    Validate {
        /// Monte-Carlo rays per view factor.
        #[arg(long, default_value_t = DEFAULT_MC_RAYS)]
        rays: usize,
        /// Randomized geometries for the view-factor suite.
        #[arg(long, default_value_t = 20)]
        geometries: usize,
        /// Randomized economic scenarios per suite.
        #[arg(long, default_value_t = 1000)]
        scenarios: usize,
        /// Offset κ inside the model only; used to show the oracles can fail.
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_kappa: f64,
    },
}

enum Failure {
    Model(Error),
    Oracles,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

type CmdResult = Result<(), Failure>;

/// What a command prints and, with `--out`, writes.
struct Report {
    file_stem: &'static str,
    text: String,
    json: Value,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
        Err(Failure::Oracles) => {
            eprintln!("error: oracle validation failed");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(Error::invalid("--threads", "must be >= 1").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Degenerate(format!("thread pool: {e}")))?;
    }
    if let Some(dir) = &cli.common.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let common = &cli.common;
    match cli.command {
        Command::Feasibility {
            scenario,
            orientation,
            ph,
            ml,
        } => emit(common, feasibility_cmd(&scenario, orientation, ph, ml)?),
        Command::Sweep {
            scenario,
            orientation,
            metrics,
            ph,
            ml,
        } => sweep_cmd(common, &scenario, orientation, &metrics, ph, ml),
        Command::FitThreshold {
            scenario,
            orientation,
            ph,
            ml,
        } => emit(common, fit_threshold_cmd(&scenario, &orientation, &ph, &ml)?),
        Command::OptimalTilt { scenario } => emit(common, optimal_tilt_cmd(&scenario)?),
        Command::Validate {
            rays,
            geometries,
            scenarios,
            perturb_kappa,
        } => {
            let cfg = ValidationConfig {
                seed: common.seed,
                mc_rays: rays,
                geometries,
                scenarios,
                hooks: ValidationHooks {
                    kappa_perturbation: perturb_kappa,
                },
            };
            let (report, ok) = validate_cmd(&cfg);
            emit(common, report)?;
            if ok {
                Ok(())
            } else {
                Err(Failure::Oracles)
            }
        }
    }
}

fn emit(common: &Common, report: Report) -> CmdResult {
    let (body, ext) = match common.format {
        Format::Table => (report.text, "txt"),
        Format::Machine => (
            serde_json::to_string_pretty(&report.json).expect("JSON values serialize") + "\n",
            "json",
        ),
    };
    print!("{body}");
    if let Some(dir) = &common.out {
        let path = dir.join(format!("{}.{ext}", report.file_stem));
        std::fs::write(&path, &body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn load(path: &Path, orientation: Option<OrientationArg>) -> Result<Scenario, Error> {
    let s = parse_scenario(path)?;
    match orientation {
        Some(o) => s.with_orientation(o.into()),
        None => Ok(s),
    }
}

fn display_name(s: &Scenario, path: &Path) -> String {
    s.name.clone().unwrap_or_else(|| path.display().to_string())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"))
}

fn feasibility_cmd(
    path: &Path,
    orientation: Option<OrientationArg>,
    ph: Option<f64>,
    ml: Option<f64>,
) -> Result<Report, Error> {
    let study = Study::new(load(path, orientation)?)?;
    let s = study.scenario();
    let ph = ph.unwrap_or(s.av.pitch_over_height);
    let ml = ml.unwrap_or(s.econ.m_l_pv);
    let r = study.feasibility_at(ph, ml)?;
    let econ = study.econ_at(ml);

    let mut text = String::new();
    let mut row = |k: &str, v: String| {
        let _ = writeln!(text, "{k:<22} {v}");
    };
    row("scenario", display_name(s, path));
    row("scenario_hash", study.scenario_hash().to_string());
    row("orientation", s.av.orientation.to_string());
    row("ph_av", format!("{ph}"));
    row("ph_pv", format!("{}", study.gmpv_geometry().pitch_over_height));
    row("gmpv_tilt", format!("{:.2}", study.gmpv_tilt()));
    row("m_l", format!("{ml}"));
    row("kappa", format!("{}", r.kappa));
    row("delta_fit", format!("{}", r.delta_fit));
    row("rho", format!("{:.6}", r.rho));
    row("rho_effective", format!("{:.6}", r.rho_effective));
    row("beta", format!("{:.6}", r.beta));
    row("chi", format!("{:.6}", r.chi));
    row("p_c_norm", format!("{:.6}", r.p_c_norm));
    row("c_l_norm", format!("{:.6}", r.c_l_norm));
    row("y_pv", format!("{:.6}", r.y_pv));
    row("y_par", format!("{:.6}", r.y_par));
    row("psi", fmt_opt(r.psi));
    row("delta_fit_th", format!("{:.6}", r.delta_fit_th));
    row("delta_fit_th_percent", format!("{:.4}", r.delta_fit_th_percent));
    row("feasible_vs_gmpv", r.feasible_vs_gmpv.to_string());
    row("feasible_vs_open", r.feasible_vs_open.to_string());

    let json = json!({
        "scenario": display_name(s, path),
        "scenario_hash": study.scenario_hash(),
        "orientation": s.av.orientation,
        "ph_av": ph,
        "ph_pv": study.gmpv_geometry().pitch_over_height,
        "gmpv_tilt": study.gmpv_tilt(),
        "econ": econ,
        "result": r,
    });
    Ok(Report {
        file_stem: "feasibility",
        text,
        json,
    })
}

fn sweep_cmd(
    common: &Common,
    path: &Path,
    orientation: Option<OrientationArg>,
    metrics: &[String],
    ph: Vec<f64>,
    ml: Vec<f64>,
) -> CmdResult {
    let Some(out) = &common.out else {
        return Err(Error::invalid("--out", "sweep needs an output directory").into());
    };
    let scenario = load(path, orientation)?;
    let mut spec: SweepSpec = scenario.sweep.clone();
    if !metrics.is_empty() {
        spec.metrics = metrics.iter().map(|m| m.parse()).collect::<Result<_, Error>>()?;
    }
    if !ph.is_empty() {
        spec.ph_axis = ph;
    }
    if !ml.is_empty() {
        spec.ml_axis = ml;
    }
    spec.validate("sweep")?;

    let study = Study::new(scenario)?;
    let grids = run_sweep(&study, &spec)?;
    let mut files = Vec::new();
    for g in &grids {
        let file = out.join(format!("{}.csv", g.metric));
        g.write(&file)?;
        files.push(file);
    }

    let boundary = match grids.iter().find(|g| g.metric == Metric::Rho) {
        Some(rho) => {
            let b = feasibility_boundary(&study, rho)?;
            let file = out.join("boundary.csv");
            std::fs::write(&file, boundary_csv(&b, study.kappa())).map_err(|e| Error::io(&file, e))?;
            files.push(file);
            Some(b)
        }
        None => None,
    };

    let mut text = String::new();
    let _ = writeln!(
        text,
        "swept {} p/h x {} M_L for {} metric(s), kappa {}",
        spec.ph_axis.len(),
        spec.ml_axis.len(),
        grids.len(),
        study.kappa()
    );
    for f in &files {
        let _ = writeln!(text, "wrote {}", f.display());
    }
    if let Some(b) = &boundary {
        let _ = writeln!(text, "{:>8} {:>12}", "p/h", "min M_L");
        for p in b {
            let ml = p.ml.map_or_else(|| "none".to_string(), |m| format!("{m:.4}"));
            let _ = writeln!(text, "{:>8} {ml:>12}", p.ph);
        }
    }
    let json = json!({
        "scenario_hash": study.scenario_hash(),
        "orientation": study.scenario().av.orientation,
        "kappa": study.kappa(),
        "files": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
        "boundary": boundary,
    });
    let (body, ext) = match common.format {
        Format::Table => (text, "txt"),
        Format::Machine => (
            serde_json::to_string_pretty(&json).expect("JSON values serialize") + "\n",
            "json",
        ),
    };
    print!("{body}");
    let summary = out.join(format!("sweep.{ext}"));
    std::fs::write(&summary, body).map_err(|e| Error::io(&summary, e))?;
    Ok(())
}

fn boundary_csv(points: &[BoundaryPoint], kappa: f64) -> String {
    let mut out = format!("# kappa: {kappa}\nph,min_ml,rho\n");
    for p in points {
        let cell = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let _ = writeln!(out, "{},{},{}", p.ph, cell(p.ml), cell(p.rho));
    }
    out
}

fn fit_threshold_cmd(
    paths: &[PathBuf],
    orientations: &[OrientationArg],
    ph: &[f64],
    ml: &[f64],
) -> Result<Report, Error> {
    struct Column {
        label: String,
        scenario: String,
        orientation: Orientation,
        percents: Vec<f64>,
        thresholds: Vec<f64>,
    }
    let mut columns = Vec::new();
    for path in paths {
        let base = parse_scenario(path)?;
        let chosen: Vec<Orientation> = if orientations.is_empty() {
            vec![base.av.orientation]
        } else {
            orientations.iter().map(|&o| o.into()).collect()
        };
        for o in chosen {
            let study = Study::new(base.with_orientation(o)?)?;
            let table = min_fit_table(&study, ph, ml)?;
            let name = display_name(&base, path);
            columns.push(Column {
                label: format!("{name} [{o}]"),
                scenario: name,
                orientation: o,
                percents: table.iter().map(|e| e.percent).collect(),
                thresholds: table.iter().map(|e| e.delta_fit_th).collect(),
            });
        }
    }

    let mut text = String::from("delta_fit_th as % of fit_pv\n");
    for (i, c) in columns.iter().enumerate() {
        let _ = writeln!(text, "  [{}] {}", i + 1, c.label);
    }
    let _ = write!(text, "{:>8} {:>6}", "M_L", "p/h");
    for i in 0..columns.len() {
        let _ = write!(text, " {:>9}", format!("[{}]", i + 1));
    }
    text.push('\n');
    let mut rows = Vec::new();
    let mut k = 0;
    for &m in ml {
        for &p in ph {
            let _ = write!(text, "{m:>8} {p:>6}");
            for c in &columns {
                let _ = write!(text, " {:>9.2}", c.percents[k]);
            }
            text.push('\n');
            rows.push(json!({
                "ml": m,
                "ph": p,
                "columns": columns.iter().map(|c| json!({
                    "scenario": c.scenario,
                    "orientation": c.orientation,
                    "delta_fit_th": c.thresholds[k],
                    "percent": c.percents[k],
                })).collect::<Vec<_>>(),
            }));
            k += 1;
        }
    }
    Ok(Report {
        file_stem: "fit_threshold",
        text,
        json: json!({ "rows": rows }),
    })
}

fn optimal_tilt_cmd(path: &Path) -> Result<Report, Error> {
    let study = Study::new(parse_scenario(path)?)?;
    let s = study.scenario();
    let climate = study.climate();
    let template = s.gmpv_geometry(GMPV_TILT)?;
    let tilt = find_optimal_tilt(&template, &climate.weather, &climate.suns, &s.module, s.ground_points)?;
    let at = |t: f64| -> Result<f64, Error> {
        let g = s.gmpv_geometry(t)?;
        Ok(annual_yield(&g, &climate.weather, &climate.suns, &s.module, s.ground_points)?.0)
    };
    let (best, reference) = (at(tilt)?, at(GMPV_TILT)?);
    let text = format!(
        "optimal tilt          {tilt:.2} deg\nannual yield          {best:.3} kWh/m2\nyield at {GMPV_TILT} deg       {reference:.3} kWh/m2\np/h                   {}\n",
        template.pitch_over_height
    );
    let json = json!({
        "scenario": display_name(s, path),
        "pitch_over_height": template.pitch_over_height,
        "optimal_tilt": tilt,
        "annual_yield": best,
        "reference_tilt": GMPV_TILT,
        "reference_yield": reference,
    });
    Ok(Report {
        file_stem: "optimal_tilt",
        text,
        json,
    })
}

fn validate_cmd(cfg: &ValidationConfig) -> (Report, bool) {
    let report = run_validation(cfg);
    let mut text = format!("seed {}\n", report.seed);
    for s in &report.suites {
        let _ = writeln!(
            text,
            "{:<6} {:<32} passed {:>6}  failed {:>6}  worst {:.3e}",
            if s.ok() { "PASS" } else { "FAIL" },
            s.name,
            s.passed,
            s.failed,
            s.worst
        );
        for n in &s.notes {
            let _ = writeln!(text, "       {n}");
        }
    }
    let ok = report.ok();
    let json = json!({ "ok": ok, "report": report });
    (
        Report {
            file_stem: "validate",
            text,
            json,
        },
        ok,
    )
}
