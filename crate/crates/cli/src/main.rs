use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ssvr_core::data::{load_csv_with, load_features, similarity_split, write_split_files};
use ssvr_core::model::{load, save};
use ssvr_core::{
    cross_validate, evaluate_report, fit, grid_search, predict, synth, ColumnRef, CsvOptions, CvScheme, Dataset,
    GridSpec, Hyperparams, KernelKind, KernelSpec, SolverConfig,
};

#[derive(Parser)]
#[command(
    name = "ssvr",
    version,
    about = "Smooth epsilon-insensitive support vector regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a CSV file and save it.
    Train(TrainArgs),
    /// Predict targets for the rows of a CSV file.
    Predict(PredictArgs),
    /// Cross-validate one hyperparameter setting.
    Cv(CvArgs),
    /// Cross-validate every combination of the given hyperparameter lists.
    Grid(GridArgs),
    /// Metric table and scatter data for a saved model on train and test files.
    Eval(EvalArgs),
    /// Target-stratified train/test split of a CSV file.
    Split(SplitArgs),
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Columns {
    /// Target column, by header name or zero-based index.
    #[arg(long)]
    target: String,
    /// Identifier column to ignore.
    #[arg(long)]
    id_col: Option<String>,
}

impl Columns {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            target: Some(column(&self.target)),
            id_col: self.id_col.as_deref().map(column),
        }
    }

    fn load(&self, path: &Path) -> Result<Dataset> {
        load_csv_with(path, &self.options()).with_context(|| format!("loading {}", path.display()))
    }
}

fn column(s: &str) -> ColumnRef {
    s.parse().expect("column parsing is infallible")
}

#[derive(Clone, Copy, ValueEnum)]
enum Kernel {
    Linear,
    Gaussian,
}

#[derive(Args)]
struct Hyper {
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: Kernel,
    #[arg(long, default_value_t = 1000.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Smoothing sharpness of the plus-function approximation.
    #[arg(long, default_value_t = 5.0)]
    alpha: f64,
    /// Gaussian kernel width; required for the Gaussian kernel.
    #[arg(long)]
    gamma: Option<f64>,
}

impl Hyper {
    fn build(&self) -> Result<Hyperparams> {
        let kernel = match (self.kernel, self.gamma) {
            (Kernel::Linear, _) => KernelSpec::Linear,
            (Kernel::Gaussian, Some(g)) => KernelSpec::gaussian(g).context("gamma must be positive and finite")?,
            (Kernel::Gaussian, None) => bail!("--gamma is required with the gaussian kernel"),
        };
        Ok(Hyperparams::new(self.c, self.epsilon, self.alpha, kernel)?)
    }
}

#[derive(Args)]
struct Solver {
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
}

impl Solver {
    fn build(&self) -> Result<SolverConfig> {
        Ok(SolverConfig::default()
            .with_grad_tol(self.grad_tol)?
            .with_max_iters(self.max_iters)?)
    }
}

#[derive(Args)]
#[group(multiple = false)]
struct Folds {
    /// Number of folds.
    #[arg(long)]
    k: Option<usize>,
    /// Leave-one-out instead of k folds.
    #[arg(long)]
    loo: bool,
}

impl Folds {
    fn scheme(&self) -> CvScheme {
        if self.loo {
            CvScheme::LeaveOneOut
        } else {
            CvScheme::KFold(self.k.unwrap_or(10))
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    columns: Columns,
    #[command(flatten)]
    hyper: Hyper,
    #[command(flatten)]
    solver: Solver,
    #[arg(long)]
    out_model: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Column to skip if the file also carries targets.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    id_col: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    columns: Columns,
    #[command(flatten)]
    hyper: Hyper,
    #[command(flatten)]
    solver: Solver,
    #[command(flatten)]
    folds: Folds,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    columns: Columns,
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: Kernel,
    #[arg(long, value_delimiter = ',', default_values_t = [1e3, 8350.0, 1e6, 1e7])]
    c_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1])]
    epsilon_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09])]
    gamma_list: Vec<f64>,
    #[arg(long, default_value_t = 5.0)]
    alpha: f64,
    #[command(flatten)]
    folds: Folds,
    #[command(flatten)]
    solver: Solver,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    columns: Columns,
    #[arg(long)]
    out_table: PathBuf,
    /// Observed/predicted pairs for both splits.
    #[arg(long)]
    out_scatter: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    columns: Columns,
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_train: PathBuf,
    #[arg(long)]
    out_test: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Linear,
    Sinc,
    Descriptors,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(long, default_value_t = 100)]
    rows: usize,
    /// Feature count; ignored for sinc.
    #[arg(long, default_value_t = 10)]
    features: usize,
    /// Keep only this many descriptor columns, those most correlated with
    /// the target.
    #[arg(long)]
    keep: Option<usize>,
    /// Noise standard deviation; ignored for descriptors.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn train(a: &TrainArgs) -> Result<()> {
    let data = a.columns.load(&a.data)?;
    let model = fit(&data, &a.hyper.build()?, &a.solver.build()?)?;
    save(&model, &a.out_model)?;
    let s = &model.summary;
    println!(
        "trained on {} rows x {} features: {} after {} iterations, gradient norm {:.3e}",
        data.len(),
        data.n_features(),
        s.termination.as_str(),
        s.iterations,
        s.final_grad_norm
    );
    if !model.converged() {
        eprintln!("warning: gradient tolerance not met; the saved model is the last iterate");
    }
    Ok(())
}

fn run_predict(a: &PredictArgs) -> Result<()> {
    let model = load(&a.model)?;
    let opts = CsvOptions {
        target: a.target.as_deref().map(column),
        id_col: a.id_col.as_deref().map(column),
    };
    let (features, names) = load_features(&a.data, &opts).with_context(|| format!("loading {}", a.data.display()))?;
    if let Some(expected) = &model.feature_names {
        if expected != &names && expected.len() == names.len() {
            bail!(
                "feature columns of {} do not match the model's training columns",
                a.data.display()
            );
        }
    }
    let pred = predict(&model, &features)?;
    let mut out = String::from("row,prediction\n");
    for (i, p) in pred.iter().enumerate() {
        out.push_str(&format!("{i},{p}\n"));
    }
    write(&a.out, &out)?;
    println!("wrote {} predictions to {}", pred.len(), a.out.display());
    Ok(())
}

fn cv(a: &CvArgs) -> Result<()> {
    let data = a.columns.load(&a.data)?;
    let folds = a.folds.scheme().folds(&data, a.seed)?;
    let out = cross_validate(&data, &a.hyper.build()?, &folds, &a.solver.build()?)?;
    println!("mean_rmse,{}", out.mean_rmse);
    for (f, r) in out.per_fold.iter().enumerate() {
        println!("fold_{f},{r}");
    }
    Ok(())
}

fn grid(a: &GridArgs) -> Result<()> {
    let data = a.columns.load(&a.data)?;
    let spec = GridSpec {
        c_values: a.c_list.clone(),
        epsilon_values: a.epsilon_list.clone(),
        gamma_values: a.gamma_list.clone(),
        alpha: a.alpha,
        kernel: match a.kernel {
            Kernel::Linear => KernelKind::Linear,
            Kernel::Gaussian => KernelKind::Gaussian,
        },
        cv: a.folds.scheme(),
        seed: a.seed,
    };
    let result = grid_search(&data, &spec, &a.solver.build()?)?;
    let files = result.write_files(&a.out_dir)?;
    let failed = result.cells.iter().filter(|c| c.outcome.is_err()).count();
    let best = result.best();
    println!(
        "{} cells ({failed} failed); best C={} epsilon={}{} mean RMSE {}",
        result.cells.len(),
        best.c(),
        best.epsilon(),
        best.gamma().map(|g| format!(" gamma={g}")).unwrap_or_default(),
        best.mean_rmse().expect("best cell succeeded")
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let model = load(&a.model)?;
    let train = a.columns.load(&a.train)?;
    let test = a.columns.load(&a.test)?;
    let report = evaluate_report(&model, &train, &test)?;
    let table = report.table_csv(&model.hyper);
    write(&a.out_table, &table)?;
    if let Some(path) = &a.out_scatter {
        write(path, &report.scatter_csv())?;
    }
    print!("{table}");
    Ok(())
}

fn split(a: &SplitArgs) -> Result<()> {
    let data = a.columns.load(&a.data)?;
    let plan = similarity_split(&data, a.test_fraction, a.seed)?;
    write_split_files(&a.data, &plan, &a.out_train, &a.out_test)?;
    println!(
        "{} training rows -> {}, {} test rows -> {}",
        plan.train_indices.len(),
        a.out_train.display(),
        plan.test_indices.len(),
        a.out_test.display()
    );
    Ok(())
}

fn run_synth(a: &SynthArgs) -> Result<()> {
    let data = match a.kind {
        SynthKind::Linear => synth::linear(a.rows, a.features, a.noise, a.seed),
        SynthKind::Sinc => synth::sinc(a.rows, a.noise, a.seed),
        SynthKind::Descriptors => synth::descriptor_table(a.rows, a.features, a.seed),
    };
    let data = match (a.kind, a.keep) {
        (SynthKind::Descriptors, Some(keep)) => synth::most_correlated(&data, keep),
        (_, Some(_)) => bail!("--keep applies only to descriptor tables"),
        (_, None) => data,
    };
    data.write_csv(&a.out)?;
    println!(
        "wrote {} rows x {} features to {}",
        data.len(),
        data.n_features(),
        a.out.display()
    );
    Ok(())
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => run_predict(a),
        Command::Cv(a) => cv(a),
        Command::Grid(a) => grid(a),
        Command::Eval(a) => eval(a),
        Command::Split(a) => split(a),
        Command::Synth(a) => run_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
