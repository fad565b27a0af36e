use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use testpilot_core::config::{load_config, ConfigLayer, ServiceConfig};
use testpilot_core::gateway::{GatewayMode, Provider};
use testpilot_core::pipeline::{aggregate_metrics, GroupBy, RunLog};

use crate::check_prompt;

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUN_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "testpilot", version, about = "Generate, run and report unit tests from a plain-language request")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file
    #[arg(long, short, global = true, env = "TESTPILOT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Call the provider and store every exchange in the fixture file
    #[arg(long, global = true, conflicts_with = "replay")]
    pub record: bool,
    /// Answer LLM requests only from the fixture file
    #[arg(long, global = true)]
    pub replay: bool,
    /// Fixture file for --record and --replay
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    #[arg(long, global = true)]
    pub provider: Option<Provider>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Directory holding projects; repeat for several
    #[arg(long = "workspace-root", global = true)]
    pub workspace_roots: Vec<PathBuf>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// JSON Lines file every run is appended to
    #[arg(long, global = true)]
    pub run_log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupByArg {
    Project,
    Language,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline once and print the run manifest
    Run { prompt: String },
    /// Serve GET /run, /report/{run_id} and /runs
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
    /// Aggregate the run log into the project metrics table
    Metrics {
        #[arg(long, value_enum, default_value = "project")]
        group_by: GroupByArg,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

impl GlobalArgs {
    /// Flags as the top configuration layer.
    pub fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            workspace_roots: (!self.workspace_roots.is_empty()).then(|| self.workspace_roots.clone()),
            output_dir: self.output_dir.clone(),
            provider: self.provider,
            model: self.model.clone(),
            gateway_mode: if self.record {
                Some(GatewayMode::Record)
            } else if self.replay {
                Some(GatewayMode::Replay)
            } else {
                None
            },
            fixture_path: self.fixtures.clone(),
            run_log: self.run_log.clone(),
            ..ConfigLayer::default()
        }
    }

    pub fn load(&self, extra: ConfigLayer) -> Result<ServiceConfig, String> {
        let mut layer = self.layer();
        if extra.listen_address.is_some() {
            layer.listen_address = extra.listen_address;
        }
        load_config(self.config.as_deref(), layer).map_err(|e| e.to_string())
    }
}

/// Parses `args` and executes the command; returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match &cli.command {
        Command::Run { prompt } => cmd_run(&cli.global, prompt, out, err),
        Command::Serve { listen } => cmd_serve(&cli.global, listen.clone(), err),
        Command::Metrics { group_by, format } => cmd_metrics(&cli.global, *group_by, *format, out, err),
    }
}

fn usage_error(err: &mut dyn Write, message: &str) -> u8 {
    let _ =
        writeln!(err, "error: {message}\n\nUsage: testpilot [OPTIONS] <COMMAND>\nFor more information, try '--help'.");
    EXIT_USAGE
}

fn cmd_run(global: &GlobalArgs, prompt: &str, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let prompt = match check_prompt(prompt) {
        Ok(p) => p,
        Err(m) => return usage_error(err, &m),
    };
    let config = match global.load(ConfigLayer::default()) {
        Ok(c) => c,
        Err(m) => return usage_error(err, &m),
    };
    let pipeline = match config.pipeline() {
        Ok(p) => p,
        Err(e) => return usage_error(err, &e.to_string()),
    };
    let record = pipeline.run(prompt);
    let manifest = serde_json::to_string_pretty(&record.manifest()).expect("manifest serializes");
    let _ = writeln!(out, "{manifest}");
    if record.is_success() {
        EXIT_OK
    } else {
        let _ = writeln!(
            err,
            "run {} failed ({}): {}",
            record.run_id,
            record.failure_category.map(|c| c.as_str()).unwrap_or("unknown"),
            record.failure_message.as_deref().unwrap_or("")
        );
        EXIT_RUN_FAILED
    }
}

fn cmd_serve(global: &GlobalArgs, listen: Option<String>, err: &mut dyn Write) -> u8 {
    let config = match global.load(ConfigLayer { listen_address: listen, ..ConfigLayer::default() }) {
        Ok(c) => c,
        Err(m) => return usage_error(err, &m),
    };
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(crate::server::serve(config)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_RUN_FAILED
        }
    }
}

fn cmd_metrics(
    global: &GlobalArgs,
    group_by: GroupByArg,
    format: Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    // the run log is all metrics needs, so a full config is only required
    // when the flag is absent
    let path = match &global.run_log {
        Some(path) => path.clone(),
        None => match global.load(ConfigLayer::default()) {
            Ok(ServiceConfig { run_log: Some(path), .. }) => path,
            Ok(_) => return usage_error(err, "no run log configured; pass --run-log"),
            Err(m) => return usage_error(err, &m),
        },
    };
    let records = match RunLog::new(&path).load() {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_RUN_FAILED;
        }
    };
    if records.is_empty() {
        let _ = writeln!(err, "error: run log {} has no records", path.display());
        return EXIT_RUN_FAILED;
    }
    let group_by = match group_by {
        GroupByArg::Project => GroupBy::Project,
        GroupByArg::Language => GroupBy::Language,
    };
    let table = aggregate_metrics(&records, group_by);
    let _ = match format {
        Format::Text => write!(out, "{table}"),
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&table).expect("table serializes")),
    };
    EXIT_OK
}
