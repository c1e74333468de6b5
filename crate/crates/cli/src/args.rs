use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hyperclust::em::Family;
use hyperclust::gpcm::CovarianceStructure;
use hyperclust::missing::Mechanism;

#[derive(Debug, Parser)]
#[command(name = "hyperclust", version, about = "Clustering and imputation of incomplete data with generalized hyperbolic and skew-t mixtures")]
pub struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "HYPERCLUST_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one mixture and write the model, labels, imputed data and a report.
    Fit(FitArgs),
    /// Fit a grid of models and tabulate BIC and ICL.
    Search(SearchArgs),
    /// Impute missing cells and label rows with a saved model.
    Impute(ImputeArgs),
    /// Draw a built-in simulation design, optionally with missing values.
    Simulate(SimulateArgs),
    /// Replicated simulation study.
    Study(StudyArgs),
    /// Adjusted Rand index between two label files.
    Evaluate(EvaluateArgs),
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: hyperclust::Error| e.to_string())
}

fn parse_structure(s: &str) -> Result<CovarianceStructure, String> {
    s.parse().map_err(|e: hyperclust::Error| e.to_string())
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    Mechanism::parse(s).ok_or_else(|| format!("unknown mechanism '{s}'; expected mcar, mar1 or mar2"))
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..1.0).contains(&r) {
        Ok(r)
    } else {
        Err(format!("rate {r} is outside [0, 1)"))
    }
}

/// Input table options shared by the commands that read data.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Cell values read as missing.
    #[arg(long, value_delimiter = ',', default_values_t = ["NA".to_string(), "".to_string(), "?".to_string()])]
    pub na: Vec<String>,
}

/// EM controls.
#[derive(Debug, Args)]
pub struct EmArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Aitken stopping threshold.
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Number of EM starts; the best final log-likelihood is kept.
    #[arg(long, default_value_t = 5)]
    pub starts: usize,
    /// Starting partitions: kmeans or random.
    #[arg(long, default_value = "kmeans")]
    pub init: String,
    /// Standardize columns by their observed mean and sd before fitting.
    #[arg(long)]
    pub scale: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Number of components.
    #[arg(long, short = 'g')]
    pub groups: usize,
    #[arg(long, value_parser = parse_family, default_value = "mghd")]
    pub family: Family,
    /// One of the fourteen scale structure tags, e.g. VVV.
    #[arg(long, value_parser = parse_structure, default_value = "VVV")]
    pub structure: CovarianceStructure,
    #[command(flatten)]
    pub em: EmArgs,
    /// Directory for model.txt, report.txt, labels.csv and imputed.csv.
    #[arg(long, short)]
    pub out_dir: PathBuf,
    /// True labels; adds the adjusted Rand index to the report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, short = 'g', value_delimiter = ',', default_value = "1,2,3,4")]
    pub groups: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_family, default_value = "mghd,mst")]
    pub families: Vec<Family>,
    /// Structure tags; all fourteen when omitted.
    #[arg(long, value_delimiter = ',', value_parser = parse_structure)]
    pub structures: Vec<CovarianceStructure>,
    #[command(flatten)]
    pub em: EmArgs,
    /// CSV with one row per fitted cell.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Model file written by `fit`.
    #[arg(long, short)]
    pub model: PathBuf,
    /// Completed data CSV.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Optional MAP labels CSV.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Design number, 1 to 6.
    #[arg(long, short)]
    pub design: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Share of cells to delete.
    #[arg(long, value_parser = parse_rate, default_value = "0")]
    pub rate: f64,
    #[arg(long, value_parser = parse_mechanism, default_value = "mcar")]
    pub mechanism: Mechanism,
    /// Draws per component (200 in the built-in designs).
    #[arg(long)]
    pub per_component: Option<usize>,
    /// Data CSV; missing cells are written as NA.
    #[arg(long)]
    pub data: PathBuf,
    /// True labels CSV.
    #[arg(long)]
    pub labels: PathBuf,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, short)]
    pub design: usize,
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_rate, default_value = "0.05,0.15,0.3")]
    pub rates: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_mechanism, default_value = "mcar,mar1,mar2")]
    pub mechanisms: Vec<Mechanism>,
    #[arg(long, short = 'g', value_delimiter = ',', default_value = "1,2,3")]
    pub groups: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_family, default_value = "mghd,mst")]
    pub families: Vec<Family>,
    /// Structure tags; the design's own structure when omitted.
    #[arg(long, value_delimiter = ',', value_parser = parse_structure)]
    pub structures: Vec<CovarianceStructure>,
    #[arg(long)]
    pub per_component: Option<usize>,
    #[command(flatten)]
    pub em: EmArgs,
    /// Directory for summary.csv and parameters.csv.
    #[arg(long, short)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub predicted: PathBuf,
    /// Also write the result here.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}
