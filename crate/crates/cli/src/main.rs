//! `mailrisk` command line.
//!
//! Stage subcommands (`clean` through `evaluate`) each run the pipeline for a
//! single grid cell up to their own stage and write that stage's artifacts.
//! `grid` runs the whole cross product.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use mailrisk_core::evaluate::{render_chart, ChartKind, EvalReport};
use mailrisk_core::experiment::{
    cleanse_for, emit_report, fit_group, generate_synthetic, parse_config, run_grid, stratified_split, BinningAxis,
    CellKey, CellResult, Cleansed, ExperimentGrid, GroupModels, ReportFormat, Split, SynthSpec,
};
use mailrisk_core::impute::ImputeStrategy;
use mailrisk_core::learners::{train, Learner, TrainedModel};
use mailrisk_core::profile::profiles_csv;
use mailrisk_core::resample::{resample, ResamplePlan, Resampled, Sampling, TrainingSet};
use mailrisk_core::table::store::{load_table, save_table};
use mailrisk_core::table::{load_csv, write_csv};
use mailrisk_core::{Error, Table};

#[derive(Parser)]
#[command(name = "mailrisk", version, about = "Response and credit-risk modeling experiments")]
struct Cli {
    /// Grid config file; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the split/resampling seed and the synthetic data seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a CSV file into the native table format.
    Ingest {
        input: PathBuf,
        /// Field values read as missing, in addition to empty fields.
        #[arg(long = "missing-token", default_values_t = ["NA".to_string()])]
        missing_tokens: Vec<String>,
    },
    /// Generate a synthetic campaign table from the config's synth.* keys.
    Synth {
        /// Also write the table as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Derive the target and drop coded, sparse, constant and policy columns.
    Clean(CellArgs),
    /// Split, then fit imputation on the training rows.
    Impute(CellArgs),
    /// Fit WoE bins on the training rows.
    Bin(CellArgs),
    /// IV screen and variable selection.
    Select(CellArgs),
    /// Resample the training partition.
    Sample(CellArgs),
    /// Train one cell's model.
    Train(CellArgs),
    /// Evaluate a cell's model on the test partition.
    Evaluate {
        #[command(flatten)]
        cell: CellArgs,
        /// Saved model to evaluate instead of training a fresh one.
        #[arg(long)]
        model_file: Option<PathBuf>,
    },
    /// Run every cell of the grid.
    Grid {
        #[command(flatten)]
        data: DataArg,
    },
    /// Re-emit the results matrix of a finished grid run in `--out-dir`.
    Report {
        #[arg(long, default_value = "md")]
        format: String,
    },
}

#[derive(Args)]
struct DataArg {
    /// CSV file or table directory; synthetic data from the config when absent.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct CellArgs {
    #[command(flatten)]
    data: DataArg,
    /// Cell coordinates; each defaults to the first value of its grid axis.
    #[arg(long)]
    imputation: Option<String>,
    #[arg(long)]
    binning: Option<String>,
    #[arg(long)]
    sampling: Option<String>,
    #[arg(long)]
    model: Option<String>,
}

enum Failure {
    Config(String),
    Data(String),
    Cells(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let outcome = match cli.jobs {
        Some(0) => Err(Failure::Config("--jobs must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::Config(e.to_string())),
        },
        None => dispatch(&cli),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Cells(n)) => {
            eprintln!("{n} cell(s) failed; see the report lineage");
            ExitCode::from(3)
        }
    }
}

fn load_settings(cli: &Cli) -> Result<(ExperimentGrid, SynthSpec), Failure> {
    let (mut grid, mut synth) = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            parse_config(&text)?
        }
        None => (ExperimentGrid::default(), SynthSpec::default()),
    };
    if let Some(s) = cli.seed {
        grid.split.seed = s;
        synth.seed = s;
    }
    grid.validate()?;
    Ok((grid, synth))
}

fn load_data(arg: &DataArg, synth: &SynthSpec) -> Result<Table, Failure> {
    match &arg.data {
        None => Ok(generate_synthetic(synth)?),
        Some(p) if p.is_dir() => Ok(load_table(p)?),
        Some(p) => Ok(load_csv(p, &HashSet::from(["NA".to_string()]))?),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Outcome {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Failure::Data(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn rows_text(rows: &[usize]) -> String {
    rows.iter().fold(String::new(), |mut s, r| {
        let _ = writeln!(s, "{r}");
        s
    })
}

fn dispatch(cli: &Cli) -> Outcome {
    let (grid, synth) = load_settings(cli)?;
    let out = &cli.out_dir;
    match &cli.command {
        Command::Ingest { input, missing_tokens } => {
            let tokens: HashSet<String> = missing_tokens.iter().cloned().collect();
            let t = load_csv(input, &tokens)?;
            let dir = out.join("table");
            save_table(&t, &dir)?;
            println!("{} rows x {} columns -> {}", t.n_rows(), t.n_cols(), dir.display());
            Ok(())
        }
        Command::Synth { csv } => {
            let t = generate_synthetic(&synth)?;
            let dir = out.join("synth");
            save_table(&t, &dir)?;
            if *csv {
                write_csv(&t, out.join("synth.csv"))?;
            }
            println!("{} rows x {} columns -> {}", t.n_rows(), t.n_cols(), dir.display());
            Ok(())
        }
        Command::Clean(args) => {
            let data = load_data(&args.data, &synth)?;
            let cell = pick_cell(&grid, args)?;
            let c = cleanse(&grid, &data, cell)?;
            let dir = out.join("clean").join(cell.imputation.as_str());
            save_table(&c.table, dir.join("table"))?;
            write(&dir.join("drops.csv"), c.drops.to_csv())?;
            let codes: Vec<String> = c.codes.iter().map(i64::to_string).collect();
            write(&dir.join("codes.txt"), codes.join("\n") + "\n")?;
            println!("kept {} predictors, dropped {}", c.table.predictor_names().len(), c.drops.entries.len());
            Ok(())
        }
        Command::Impute(args) | Command::Bin(args) | Command::Select(args) => {
            let data = load_data(&args.data, &synth)?;
            let cell = pick_cell(&grid, args)?;
            let (_, split, gm) = fit(&grid, &data, cell)?;
            let dir = out.join("groups").join(cell.group_id());
            match &cli.command {
                Command::Impute(_) => {
                    write(&dir.join("train_rows.txt"), rows_text(&split.train))?;
                    write(&dir.join("test_rows.txt"), rows_text(&split.test))?;
                    write(&dir.join("imputation.txt"), gm.imputation.to_manifest())?;
                }
                Command::Bin(_) => {
                    write(&dir.join("profiles.csv"), profiles_csv(&gm.profiles))?;
                    write(&dir.join("binning.txt"), gm.binning.to_manifest())?;
                    write(&dir.join("iv.csv"), gm.binning.iv_table())?;
                    println!("{} of {} variables pass the IV screen", gm.iv_kept.len(), gm.profiles.len());
                }
                _ => {
                    write(&dir.join("selection.csv"), gm.selection.to_csv())?;
                    write(&dir.join("selection.pov.svg"), gm.selection.pov_svg()?)?;
                    println!("selected: {}", gm.selection.final_variables.join(" "));
                }
            }
            info!("wrote {}", dir.display());
            Ok(())
        }
        Command::Sample(args) => {
            let data = load_data(&args.data, &synth)?;
            let cell = pick_cell(&grid, args)?;
            let (_, _, gm) = fit(&grid, &data, cell)?;
            let r = resample_cell(&grid, &gm, cell)?;
            let dir = out.join("groups").join(cell.group_id()).join(cell.sampling.as_str());
            write_resampled(&dir, &r)?;
            let [zeros, ones] = r.data.class_counts();
            println!("label0 {zeros}, label1 {ones}, {} synthetic", r.origins.len());
            Ok(())
        }
        Command::Train(args) => {
            let data = load_data(&args.data, &synth)?;
            let cell = pick_cell(&grid, args)?;
            let (_, _, gm) = fit(&grid, &data, cell)?;
            let r = resample_cell(&grid, &gm, cell)?;
            let model = train(cell.model, &r.data, &grid.hyperparams)?;
            let path = out.join("cells").join(cell.id()).join("model.txt");
            write(&path, model.to_text())?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Evaluate { cell: args, model_file } => {
            let data = load_data(&args.data, &synth)?;
            let cell = pick_cell(&grid, args)?;
            let (_, _, gm) = fit(&grid, &data, cell)?;
            let model = match model_file {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
                    TrainedModel::from_text(&text)?
                }
                None => train(cell.model, &resample_cell(&grid, &gm, cell)?.data, &grid.hyperparams)?,
            };
            let scores = model.predict_dataset(&gm.test)?;
            let report = EvalReport::new(&scores, gm.test.labels())?;
            let dir = out.join("cells").join(cell.id());
            write(&dir.join("eval.md"), report.to_markdown())?;
            for (kind, curve) in [(ChartKind::Roc, report.roc_points.clone()), (ChartKind::Gain, report.gain_curve())] {
                let svg = render_chart(&curve, kind, &format!("{} {}", cell.id(), kind.as_str()))?;
                write(&dir.join(format!("{}.svg", kind.as_str())), svg)?;
            }
            print!("{}", report.to_markdown());
            Ok(())
        }
        Command::Grid { data } => {
            let data = load_data(data, &synth)?;
            let results = run_grid(&grid, &data, Some(out))?;
            let failed = results.iter().filter(|r| r.failure.is_some()).count();
            println!("{} cells, {failed} failed -> {}", results.len(), out.join("report.md").display());
            if failed > 0 {
                return Err(Failure::Cells(failed));
            }
            Ok(())
        }
        Command::Report { format } => {
            let fmt = ReportFormat::parse(format)
                .ok_or_else(|| Failure::Config(format!("unknown report format `{format}` (csv, md)")))?;
            let path = out.join("results.json");
            let text = fs::read_to_string(&path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            let results: Vec<CellResult> =
                serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            // The run's own config wins over --config so the lineage stays true.
            let run_grid_cfg = match fs::read_to_string(out.join("config.txt")) {
                Ok(t) => parse_config(&t)?.0,
                Err(_) => grid,
            };
            let doc = emit_report(&results, &run_grid_cfg, fmt)?;
            print!("{doc}");
            let failed = results.iter().filter(|r| r.failure.is_some()).count();
            if failed > 0 {
                return Err(Failure::Cells(failed));
            }
            Ok(())
        }
    }
}

fn pick_cell(grid: &ExperimentGrid, args: &CellArgs) -> Result<CellKey, Failure> {
    fn axis<T: Copy>(given: &Option<String>, default: T, parse: fn(&str) -> Option<T>, what: &str) -> Result<T, Failure> {
        match given {
            None => Ok(default),
            Some(s) => parse(s).ok_or_else(|| Failure::Config(format!("unknown {what} `{s}`"))),
        }
    }
    Ok(CellKey {
        imputation: axis(&args.imputation, grid.imputations[0], ImputeStrategy::parse, "imputation")?,
        binning: axis(&args.binning, grid.binnings[0], BinningAxis::parse, "binning")?,
        sampling: axis(&args.sampling, grid.samplings[0], Sampling::parse, "sampling")?,
        model: axis(&args.model, grid.models[0], Learner::parse, "model")?,
    })
}

fn stage_failure(e: mailrisk_core::experiment::StageError) -> Failure {
    let msg = e.to_string();
    if e.error.is_config() {
        Failure::Config(msg)
    } else {
        Failure::Data(msg)
    }
}

fn cleanse(grid: &ExperimentGrid, data: &Table, cell: CellKey) -> Result<Cleansed, Failure> {
    cleanse_for(grid, data, cell.imputation).map_err(stage_failure)
}

fn fit(grid: &ExperimentGrid, data: &Table, cell: CellKey) -> Result<(Cleansed, Split, GroupModels), Failure> {
    let c = cleanse(grid, data, cell)?;
    let s = &grid.split;
    let split = stratified_split(&c.table.labels()?, s.train_frac, s.stratified, s.seed)?;
    let gm = fit_group(grid, &c, &split, cell.binning).map_err(stage_failure)?;
    Ok((c, split, gm))
}

fn resample_cell(grid: &ExperimentGrid, gm: &GroupModels, cell: CellKey) -> Result<Resampled, Failure> {
    let plan = ResamplePlan {
        k_neighbors: grid.smote_k,
        target_ratio: grid.target_ratio,
        ..ResamplePlan::new(cell.sampling, grid.split.seed)
    };
    Ok(resample(&TrainingSet::new(gm.train.clone()), &plan)?)
}

fn write_resampled(dir: &Path, r: &Resampled) -> Outcome {
    let [zeros, ones] = r.data.class_counts();
    write(&dir.join("counts.txt"), format!("label0 {zeros}\nlabel1 {ones}\n"))?;
    if !r.origins.is_empty() {
        let mut s = String::from("a,b,u\n");
        for o in &r.origins {
            let _ = writeln!(s, "{},{},{}", o.a, o.b, o.u);
        }
        write(&dir.join("origins.csv"), s)?;
    }
    Ok(())
}
