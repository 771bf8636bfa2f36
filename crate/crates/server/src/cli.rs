//! Command line: `run` executes an experiment and writes its metric files,
//! `serve` starts the HTTP service.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use prefelicit::harness::{run_experiment, ExperimentReport, ExperimentSpec, HarnessError};

use crate::api::router;
use crate::store::SessionStore;

const RUN_HELP: &str = "\
Settings are given as `--key value` or `--key=value`; keys accept `-` or `_`.

Common keys: --experiment {media|admissions|appendix} --data PATH
  --strategy {utility|entropy|random|cluster|none} --rounds N --seeds a,b,c --out DIR
  --queries-per-round N --eval-every N --user-selection {roundrobin|random} --retrain {finetune|scratch}

Model and sampler keys: --latent-dim --embed-dim --hidden a,b --noise-dim --learning-rate
  --l2-lambda --epochs --round-epochs --init-std --pool-size --mc-samples --eval-samples
  --finetune-epochs --finetune-learning-rate --replay --menu-size --top-k

Data keys: --n-users --n-items --test-items --pretrain-per-user --max-users --max-items
  --initial-comparisons --n-clusters --fractions a,b,c --density --max-pairs-per-user
  --shadow-dim --alpha

`--config FILE` reads a TOML table with the same keys; command-line flags win.
Exit status: 0 success, 2 invalid settings, 3 unreadable or malformed data.";

#[derive(Debug, Parser)]
#[command(name = "prefelicit", version, about = "Preference elicitation experiments and service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write metrics_<name>.csv plus manifest.json.
    #[command(after_help = RUN_HELP)]
    Run {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
        settings: Vec<String>,
    },
    /// Serve the elicitation HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ServeArgs {
    /// Listen address [env: PREFELICIT_BIND, default 127.0.0.1:8080].
    #[arg(long)]
    pub bind: Option<String>,
    /// Directory for session logs; sessions are in-memory only when unset [env: PREFELICIT_DATA_DIR].
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Directory of static assets served under `/` [env: PREFELICIT_STATIC_DIR].
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// TOML file with `bind`, `data_dir` and `static_dir`; overrides the environment.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn spec_error(msg: impl Into<String>) -> HarnessError {
    HarnessError::Spec(msg.into())
}

fn toml_value_text(key: &str, v: &toml::Value) -> Result<String, HarnessError> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items.iter().map(|x| toml_value_text(key, x)).collect::<Result<Vec<_>, _>>()?.join(","),
        _ => return Err(spec_error(format!("config key {key}: unsupported value"))),
    })
}

/// `key = value` pairs from a TOML config file, in file order.
pub fn config_settings(path: &Path) -> Result<Vec<(String, String)>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| spec_error(format!("config {}: {e}", path.display())))?;
    let table: toml::Table = text.parse().map_err(|e| spec_error(format!("config {}: {e}", path.display())))?;
    table.iter().map(|(k, v)| Ok((k.clone(), toml_value_text(k, v)?))).collect()
}

/// Splits `--key value` / `--key=value` arguments into pairs.
pub fn flag_settings(args: &[String]) -> Result<Vec<(String, String)>, HarnessError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg.strip_prefix("--").ok_or_else(|| spec_error(format!("expected --key, got \"{arg}\"")))?;
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_owned(), v.to_owned())),
            None => {
                let value = it.next().ok_or_else(|| spec_error(format!("--{key} needs a value")))?;
                out.push((key.to_owned(), value.clone()));
            }
        }
    }
    Ok(out)
}

/// Full spec from command-line arguments, with `--config` applied first.
pub fn spec_from_args(args: &[String]) -> Result<ExperimentSpec, HarnessError> {
    let flags = flag_settings(args)?;
    let mut settings = Vec::new();
    for (k, v) in &flags {
        if k == "config" {
            settings.extend(config_settings(Path::new(v))?);
        }
    }
    settings.extend(flags.into_iter().filter(|(k, _)| k != "config"));
    ExperimentSpec::from_settings(&settings)
}

/// Output directory: `--out`, or `results/<experiment>-<strategy>`.
pub fn output_dir(spec: &ExperimentSpec) -> PathBuf {
    spec.out.clone().unwrap_or_else(|| PathBuf::from(format!("results/{}-{}", spec.experiment, spec.strategy)))
}

pub fn run(args: &[String]) -> Result<(ExperimentReport, PathBuf), HarnessError> {
    let spec = spec_from_args(args)?;
    let report = run_experiment(&spec)?;
    let dir = output_dir(&spec);
    report.write(&spec, &dir)?;
    Ok((report, dir))
}

fn print_summary(report: &ExperimentReport, dir: &Path) {
    for name in report.metric_names() {
        if let Some(last) = report.aggregate(name).last() {
            println!("{name}: round {} mean {:.4} +/- {:.4} (n={})", last.round, last.mean, last.stderr, last.n);
        }
    }
    println!("wrote {}", dir.display());
}

/// Serve settings after applying flags, then the config file, then the environment.
pub fn resolve_serve(args: &ServeArgs) -> Result<(SocketAddr, Option<PathBuf>, Option<PathBuf>), String> {
    let mut file = toml::Table::new();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        file = text.parse().map_err(|e| format!("config {}: {e}", path.display()))?;
        if let Some(k) = file.keys().find(|k| !["bind", "data_dir", "static_dir"].contains(&k.as_str())) {
            return Err(format!("config {}: unknown key \"{k}\"", path.display()));
        }
    }
    let pick = |flag: Option<String>, key: &str, env: &str| -> Option<String> {
        flag.or_else(|| file.get(key).and_then(|v| v.as_str()).map(str::to_owned)).or_else(|| std::env::var(env).ok().filter(|s| !s.is_empty()))
    };
    let bind = pick(args.bind.clone(), "bind", "PREFELICIT_BIND").unwrap_or_else(|| "127.0.0.1:8080".into());
    let bind = bind.parse().map_err(|e| format!("bind address \"{bind}\": {e}"))?;
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let data = pick(path(&args.data_dir), "data_dir", "PREFELICIT_DATA_DIR").map(PathBuf::from);
    let assets = pick(path(&args.static_dir), "static_dir", "PREFELICIT_STATIC_DIR").map(PathBuf::from);
    Ok((bind, data, assets))
}

pub async fn serve(args: &ServeArgs) -> Result<(), String> {
    let (bind, data, assets) = resolve_serve(args)?;
    let store = match &data {
        Some(dir) => SessionStore::open(dir).map_err(|e| e.to_string())?,
        None => SessionStore::in_memory(),
    };
    tracing::info!(sessions = store.len(), data_dir = ?data, static_dir = ?assets, "session store ready");
    let app = router(Arc::new(store), assets);
    let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| format!("bind {bind}: {e}"))?;
    tracing::info!(%bind, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| e.to_string())
}

/// Parses `std::env::args` and runs the command, returning the exit code.
pub fn main_exit_code() -> i32 {
    let cli = Cli::parse();
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match cli.command {
        Command::Run { settings } => match run(&settings) {
            Ok((report, dir)) => {
                print_summary(&report, &dir);
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::Serve(args) => {
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 1;
                }
            };
            match runtime.block_on(serve(&args)) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn flags_parse_both_forms() {
        let pairs = flag_settings(&strings(&["--rounds", "3", "--pool-size=7"])).unwrap();
        assert_eq!(pairs, vec![("rounds".into(), "3".into()), ("pool-size".into(), "7".into())]);
        assert!(flag_settings(&strings(&["rounds"])).is_err());
        assert!(flag_settings(&strings(&["--rounds"])).is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("exp.toml");
        std::fs::write(&cfg, "experiment = \"media\"\nrounds = 9\nseeds = [4, 5]\npool_size = 11\n").unwrap();
        let spec = spec_from_args(&strings(&["--rounds", "2", "--config", cfg.to_str().unwrap()])).unwrap();
        assert_eq!(spec.rounds, 2);
        assert_eq!(spec.seeds, vec![4, 5]);
        assert_eq!(spec.pool_size, 11);
    }

    #[test]
    fn missing_config_is_a_spec_error() {
        let err = spec_from_args(&strings(&["--experiment", "media", "--config", "/nonexistent/x.toml"])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
