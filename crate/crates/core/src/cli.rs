//! Command-line front end: `train`, `predict`, `evaluate`, `cv` and `grid`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::booster::{train, BoostedModel, TrainConfig};
use crate::io::{load_csv, load_features, write_predictions, CsvSchema, OutputMode};
use crate::loss::LossParams;
use crate::metrics::{confusion_from_predictions, ConfusionCounts, MetricMode, MetricScores};
use crate::model_selection::{
    cross_validate, grid_search, refit, CvReport, GridResult, SearchGrid, SplitPlan,
};

#[derive(Debug, Parser)]
#[command(
    name = "imboost",
    version,
    about = "Newton-boosted trees for imbalanced binary classification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it to --out.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write predictions of a trained model.
    Predict {
        /// Model file written by train or grid.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Column to skip when reading features.
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        group: Option<String>,
        #[arg(long = "output-mode", visible_alias = "mode", value_enum, default_value_t = ModeArg::Raw)]
        output_mode: ModeArg,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained model on labelled data.
    Evaluate {
        /// Model file written by train or grid.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Cross-validate one configuration.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Split plan: kfold:K, loo or logo (needs --group).
        #[arg(long, default_value = "kfold:5")]
        cv: String,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Grid-search the loss parameter, then refit on all data.
    Grid {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Comma-separated alpha candidates [default: 0.2,0.4,0.6,0.8,1.0].
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        /// Comma-separated gamma candidates [default: 1,1.5,...,4].
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        /// Split plan: kfold:K, loo or logo (needs --group).
        #[arg(long, default_value = "kfold:5")]
        cv: String,
        /// Pooled metric used to pick the best candidate.
        #[arg(long, value_enum, default_value_t = MetricArg::Accuracy)]
        metric: MetricArg,
        /// Where to write the refitted model.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the 0/1 label column.
    #[arg(long)]
    pub label: String,
    /// Name of the group id column, excluded from the features.
    #[arg(long)]
    pub group: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value_t = LossArg::Plain)]
    pub loss: LossArg,
    /// Positive-class weight; required with --loss weighted.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Focusing exponent; required with --loss focal.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Boosting rounds [default: 10].
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Learning rate [default: 0.3].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Maximum tree depth [default: 6].
    #[arg(long)]
    pub depth: Option<usize>,
    /// L2 penalty on leaf weights [default: 1].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Gain a split must exceed [default: 0].
    #[arg(long = "min-split-gain")]
    pub min_split_gain: Option<f64>,
    /// Minimum hessian sum per child [default: 1].
    #[arg(long = "min-child-hessian")]
    pub min_child_hessian: Option<f64>,
    /// Initial raw score [default: 0].
    #[arg(long = "base-score", allow_hyphen_values = true)]
    pub base_score: Option<f64>,
    /// Seed recorded in reports; fold i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Write the JSON report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Plain,
    Weighted,
    Focal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Raw,
    Sigmoid,
    Determine,
    Onehot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Accuracy,
    Precision,
    Recall,
    F1,
    Mcc,
}

impl From<MetricArg> for MetricMode {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Accuracy => MetricMode::Accuracy,
            MetricArg::Precision => MetricMode::Precision,
            MetricArg::Recall => MetricMode::Recall,
            MetricArg::F1 => MetricMode::F1,
            MetricArg::Mcc => MetricMode::Mcc,
        }
    }
}

impl From<ModeArg> for OutputMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Raw => OutputMode::Raw,
            ModeArg::Sigmoid => OutputMode::Sigmoid,
            ModeArg::Determine => OutputMode::Determine,
            ModeArg::Onehot => OutputMode::OneHot,
        }
    }
}

impl TrainArgs {
    /// Loss parameters; a missing `--alpha`/`--gamma` for the chosen loss is
    /// an error unless `search` supplies candidates instead.
    fn loss_params(&self, search: bool) -> anyhow::Result<LossParams> {
        Ok(match self.loss {
            LossArg::Plain => LossParams::Plain,
            LossArg::Weighted => match (self.alpha, search) {
                (Some(alpha), _) => LossParams::Weighted { alpha },
                (None, true) => LossParams::Weighted { alpha: 1.0 },
                (None, false) => bail!("--loss weighted requires the essential parameter --alpha"),
            },
            LossArg::Focal => match (self.gamma, search) {
                (Some(gamma), _) => LossParams::Focal { gamma },
                (None, true) => LossParams::Focal { gamma: 0.0 },
                (None, false) => bail!("--loss focal requires the essential parameter --gamma"),
            },
        })
    }

    fn config(&self, search: bool) -> anyhow::Result<TrainConfig> {
        let d = TrainConfig::default();
        let config = TrainConfig {
            num_rounds: self.rounds.unwrap_or(d.num_rounds),
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            max_depth: self.depth.unwrap_or(d.max_depth),
            reg_lambda: self.lambda.unwrap_or(d.reg_lambda),
            min_split_gain: self.min_split_gain.unwrap_or(d.min_split_gain),
            min_child_hessian: self.min_child_hessian.unwrap_or(d.min_child_hessian),
            base_score: self.base_score.unwrap_or(d.base_score),
            loss: self.loss_params(search)?,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

impl DataArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            label_column: self.label.clone(),
            group_column: self.group.clone(),
        }
    }
}

/// Parses `kfold:K`, `loo` or `logo`. K-fold shuffles with `seed`.
pub fn parse_plan(spec: &str, seed: u64) -> anyhow::Result<SplitPlan> {
    match spec {
        "loo" => Ok(SplitPlan::LeaveOneOut),
        "logo" => Ok(SplitPlan::LeaveOneGroupOut),
        other => {
            let k = other
                .strip_prefix("kfold:")
                .and_then(|k| k.parse().ok())
                .with_context(|| format!("--cv must be kfold:K, loo or logo, got `{other}`"))?;
            Ok(SplitPlan::KFold {
                k,
                shuffle_seed: Some(seed),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub counts: ConfusionCounts,
    pub scores: MetricScores,
}

impl MetricsTable {
    pub fn from_counts(counts: ConfusionCounts) -> crate::Result<Self> {
        Ok(MetricsTable {
            counts,
            scores: counts.scores()?,
        })
    }
}

/// Machine-readable record of one command run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub config: Option<TrainConfig>,
    pub plan: Option<SplitPlan>,
    pub metrics: Option<MetricsTable>,
    pub cv: Option<CvReport>,
    pub grid: Option<GridResult>,
    pub seed: Option<u64>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    fn new(command: Vec<String>) -> Self {
        RunReport {
            command,
            config: None,
            plan: None,
            metrics: None,
            cv: None,
            grid: None,
            seed: None,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Human-readable summary with four decimals.
    pub fn table(&self) -> String {
        let mut out = String::new();
        if let Some(grid) = &self.grid {
            out.push_str(&format!(
                "{:<24} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
                "candidate", "accuracy", "precision", "recall", "f1", "mcc"
            ));
            for r in &grid.candidates {
                let s = &r.scores;
                out.push_str(&format!(
                    "{:<24} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}\n",
                    describe_loss(&r.loss),
                    s.accuracy,
                    s.precision,
                    s.recall,
                    s.f1,
                    s.mcc
                ));
            }
            out.push_str(&format!(
                "best by {}: {}\n\n",
                grid.selection_metric,
                describe_loss(&grid.best)
            ));
        }
        if let Some(m) = &self.metrics {
            let c = &m.counts;
            out.push_str(&format!(
                "tp {}  fp {}  tn {}  fn {}\n",
                c.tp, c.fp, c.tn, c.fn_
            ));
            for mode in MetricMode::ALL {
                out.push_str(&format!("{:<10} {:.4}\n", mode.name(), m.scores.get(mode)));
            }
        }
        out
    }
}

fn describe_loss(loss: &LossParams) -> String {
    match loss {
        LossParams::Plain => "plain".into(),
        LossParams::Weighted { alpha } => format!("weighted alpha={alpha}"),
        LossParams::Focal { gamma } => format!("focal gamma={gamma}"),
    }
}

fn emit(report: &RunReport, args: &ReportArgs) -> anyhow::Result<()> {
    if let Some(path) = &args.report {
        std::fs::write(path, report.to_json())
            .with_context(|| format!("writing report to {}", path.display()))?;
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    if args.json {
        writeln!(lock, "{}", report.to_json())?;
    } else {
        write!(lock, "{}", report.table())?;
    }
    Ok(())
}

/// Runs one command. Returns the report for commands that produce one.
pub fn run<I, T>(argv: I) -> anyhow::Result<Option<RunReport>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let echo = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let cli = Cli::try_parse_from(&argv)?;
    let started = Instant::now();
    let mut report = RunReport::new(echo);

    match cli.command {
        Command::Train {
            data,
            train: args,
            out,
        } => {
            let config = args.config(false)?;
            let dataset = load_csv(&data.data, &data.schema())
                .with_context(|| format!("loading {}", data.data.display()))?;
            let model = train(&dataset, &config)?;
            model
                .save(&out)
                .with_context(|| format!("writing model to {}", out.display()))?;
            return Ok(None);
        }
        Command::Predict {
            model,
            data,
            label,
            group,
            output_mode,
            out,
        } => {
            let model = BoostedModel::load(&model)
                .with_context(|| format!("loading model {}", model.display()))?;
            let (_, features) = load_features(&data, label.as_deref(), group.as_deref())
                .with_context(|| format!("loading {}", data.display()))?;
            match out {
                Some(path) => {
                    let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
                    write_predictions(&mut file, output_mode.into(), &model, features.view())?;
                    file.flush()?;
                }
                None => {
                    let stdout = std::io::stdout();
                    write_predictions(
                        &mut stdout.lock(),
                        output_mode.into(),
                        &model,
                        features.view(),
                    )?;
                }
            }
            return Ok(None);
        }
        Command::Evaluate {
            model,
            data,
            report: report_args,
        } => {
            let model = BoostedModel::load(&model)
                .with_context(|| format!("loading model {}", model.display()))?;
            let dataset = load_csv(&data.data, &data.schema())?;
            let raw = model.predict_raw(dataset.features())?;
            let counts = confusion_from_predictions(dataset.labels(), &raw)?;
            report.metrics = Some(MetricsTable::from_counts(counts)?);
            report.wall_clock_seconds = started.elapsed().as_secs_f64();
            emit(&report, &report_args)?;
        }
        Command::Cv {
            data,
            train: args,
            cv,
            report: report_args,
        } => {
            let config = args.config(false)?;
            let plan = parse_plan(&cv, config.seed)?;
            let dataset = load_csv(&data.data, &data.schema())?;
            let cv_report = cross_validate(&dataset, &config, &plan)?;
            report.config = Some(config);
            report.plan = Some(plan);
            report.seed = Some(config.seed);
            report.metrics = Some(MetricsTable::from_counts(cv_report.pooled)?);
            report.cv = Some(cv_report);
            report.wall_clock_seconds = started.elapsed().as_secs_f64();
            emit(&report, &report_args)?;
        }
        Command::Grid {
            data,
            train: args,
            alphas,
            gammas,
            cv,
            metric,
            out,
            report: report_args,
        } => {
            let config = args.config(true)?;
            let plan = parse_plan(&cv, config.seed)?;
            let dataset = load_csv(&data.data, &data.schema())?;
            let mut grid = SearchGrid::new(config);
            if let Some(a) = alphas {
                grid.alpha_candidates = a;
            }
            if let Some(g) = gammas {
                grid.gamma_candidates = g;
            }
            let result = grid_search(&dataset, &grid, &plan, metric.into())?;
            if let Some(path) = out {
                refit(&dataset, &config, result.best)?
                    .save(&path)
                    .with_context(|| format!("writing model to {}", path.display()))?;
            }
            report.config = Some(config.with_loss(result.best));
            report.plan = Some(plan);
            report.seed = Some(config.seed);
            report.metrics = Some(MetricsTable::from_counts(result.best_report().pooled)?);
            report.grid = Some(result);
            report.wall_clock_seconds = started.elapsed().as_secs_f64();
            emit(&report, &report_args)?;
        }
    }
    Ok(Some(report))
}
