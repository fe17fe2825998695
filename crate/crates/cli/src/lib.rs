//! Command implementations behind the `genread` binary.

use std::fmt::Write as _;
use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use genread_core::bundle::{build_bundle, BuildOptions, BuildProviders, Bundle, BundleError};
use genread_core::config::{Config, ConfigError};
use genread_core::content::{ContentError, PreferenceSpec};
use genread_core::experiment::{
    parse_event_log, replay, ExperimentError, ExperimentPlan, FileEventStore, SessionLog, SystemClock, EVENTS_FILE,
    GAZE_ATTACHMENT, PLAN_ATTACHMENT,
};
use genread_core::gaze::{
    analyze_session, analyze_sessions, condition_report, heatmap, parse_gaze_csv, scan_path, Fixation, GazeError,
    GazePoint, LayoutSet, SessionAnalysis,
};
use genread_core::providers::http::{
    HttpEmbeddingProvider, HttpImageProvider, HttpTextProvider, MissingEnv, ProviderEndpoint,
};
use genread_core::providers::mock::{MockEmbeddingProvider, MockImageProvider, MockTextProvider};
use genread_core::providers::{EmbeddingProvider, ImageProvider, ProviderError, TextProvider};
use genread_server::{AppState, ServerError};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Usage = 1,
    Provider = 2,
    Validation = 3,
    Io = 4,
}

#[derive(Debug, Parser)]
#[command(name = "genread", version, about = "Generated reading material, experiment sessions and gaze analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a story bundle: story, summary, questions, images and selection.
    GenerateBundle(GenerateArgs),
    /// Serve the session API over exactly four bundles.
    Serve(ServeArgs),
    /// Analyze one recorded session directory.
    AnalyzeGaze(AnalyzeArgs),
    /// Aggregate every session under a directory into a condition report.
    Report(ReportArgs),
    /// Check a bundle's hashes and invariants.
    ValidateBundle(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output bundle directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Use the deterministic offline providers.
    #[arg(long)]
    pub mock: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub genre: Option<String>,
    #[arg(long)]
    pub animal: Option<String>,
    #[arg(long)]
    pub favorite_title: Option<String>,
    /// Overrides `content.story_words`.
    #[arg(long)]
    pub story_words: Option<u32>,
    /// Overrides `content.summary_words`.
    #[arg(long)]
    pub summary_words: Option<u32>,
    /// Overrides `content.retries`.
    #[arg(long)]
    pub retries: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Bundle directories; exactly four.
    #[arg(long, num_args = 1.., required = true)]
    pub bundles: Vec<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Session storage directory.
    #[arg(long, default_value = "sessions")]
    pub data: PathBuf,
    /// Bundle id read under C1 in every group; defaults to the first bundle.
    #[arg(long)]
    pub fixed: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Session directory holding events.jsonl, plan.json and gaze.csv.
    #[arg(long)]
    pub session: PathBuf,
    /// AOI layout TOML; overrides `gaze.layout_file`.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Output directory; defaults to `<session>/analysis`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory with one subdirectory per session.
    #[arg(long)]
    pub sessions: PathBuf,
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Output CSV; defaults to `<sessions>/condition_report.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub bundle: PathBuf,
}

/// An input that failed validation, for exit-code purposes.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

/// Maps an error chain to an exit code by its most specific known cause.
pub fn exit_code(err: &anyhow::Error) -> Exit {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<BundleError>() {
            return match e {
                _ if e.is_provider() => Exit::Provider,
                BundleError::Io { .. } => Exit::Io,
                _ => Exit::Validation,
            };
        }
        if cause.is::<ProviderError>() {
            return Exit::Provider;
        }
        if let Some(e) = cause.downcast_ref::<ContentError>() {
            return match e {
                ContentError::Provider(_) => Exit::Provider,
                _ => Exit::Validation,
            };
        }
        if cause.is::<ConfigError>() || cause.is::<MissingEnv>() || cause.is::<clap::Error>() {
            return Exit::Usage;
        }
        if let Some(e) = cause.downcast_ref::<ServerError>() {
            return match e {
                ServerError::Bind { .. } => Exit::Io,
                ServerError::Experiment(ExperimentError::Storage(_)) => Exit::Io,
                _ => Exit::Validation,
            };
        }
        if let Some(e) = cause.downcast_ref::<ExperimentError>() {
            return match e {
                ExperimentError::Storage(_) => Exit::Io,
                _ => Exit::Validation,
            };
        }
        if cause.is::<GazeError>() || cause.is::<Invalid>() || cause.is::<serde_json::Error>() {
            return Exit::Validation;
        }
        if cause.is::<std::io::Error>() {
            return Exit::Io;
        }
    }
    Exit::Io
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateBundle(a) => generate_bundle(&a),
        Command::Serve(a) => serve(&a),
        Command::AnalyzeGaze(a) => analyze_gaze(&a).map(|_| ()),
        Command::Report(a) => report(&a).map(|_| ()),
        Command::ValidateBundle(a) => validate_bundle(&a),
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    Ok(match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    })
}

/// RFC 3339 creation time. Mock builds use `SOURCE_DATE_EPOCH` (or the
/// epoch) so that repeated runs are byte-identical.
fn created_at(mock: bool) -> Result<String> {
    let ts = if mock {
        let secs = match std::env::var("SOURCE_DATE_EPOCH") {
            Ok(v) => v.trim().parse::<i64>().map_err(|_| ConfigError::Invalid(format!("bad SOURCE_DATE_EPOCH {v:?}")))?,
            Err(_) => 0,
        };
        chrono::DateTime::from_timestamp(secs, 0)
            .ok_or_else(|| ConfigError::Invalid(format!("SOURCE_DATE_EPOCH {secs} out of range")))?
    } else {
        chrono::Utc::now()
    };
    Ok(ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

pub fn generate_bundle(a: &GenerateArgs) -> Result<()> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(w) = a.story_words {
        config.content.story_words = w;
    }
    if let Some(w) = a.summary_words {
        config.content.summary_words = w;
    }
    if let Some(r) = a.retries {
        config.content.retries = r;
    }
    config.validate()?;

    let timeout = Duration::from_secs(config.providers.timeout_seconds);
    let (text, image, embed): (Box<dyn TextProvider>, Box<dyn ImageProvider>, Box<dyn EmbeddingProvider>) = if a.mock {
        (
            Box::new(MockTextProvider::new(a.seed)),
            Box::new(MockImageProvider::new()),
            Box::new(MockEmbeddingProvider::new(config.images.embedding_dims, config.images.token_budget)),
        )
    } else {
        let p = &config.providers;
        (
            Box::new(HttpTextProvider::new(ProviderEndpoint::from_env("TEXT", &p.text_model)?, p.temperature, timeout)),
            Box::new(HttpImageProvider::new(
                ProviderEndpoint::from_env("IMAGE", &p.image_model)?,
                config.images.width_px,
                config.images.height_px,
                timeout,
            )),
            Box::new(HttpEmbeddingProvider::new(
                ProviderEndpoint::from_env("EMBED", &p.embed_model)?,
                config.images.embedding_dims,
                config.images.token_budget,
                timeout,
            )),
        )
    };
    let opts = BuildOptions {
        preferences: PreferenceSpec {
            genre: a.genre.clone(),
            animal: a.animal.clone(),
            favorite_title: a.favorite_title.clone(),
        },
        config,
        seed: a.seed,
        mock: a.mock,
        created_at: created_at(a.mock)?,
    };
    let bundle = build_bundle(&BuildProviders { text: &*text, image: &*image, embed: &*embed }, &opts)?;
    let manifest = bundle.save(&a.out)?;
    println!(
        "bundle {} \"{}\": {} words, {} sentences, {} files -> {}",
        manifest.bundle_id,
        manifest.title,
        bundle.story.word_count,
        bundle.story.sentences.len(),
        manifest.files.len() + 1,
        a.out.display()
    );
    Ok(())
}

pub fn validate_bundle(a: &ValidateArgs) -> Result<()> {
    let b = Bundle::load(&a.bundle)?;
    println!(
        "ok: bundle {} \"{}\", {} words, {} sentences, {} questions, {} summary images",
        b.id(),
        b.story.title,
        b.story.word_count,
        b.story.sentences.len(),
        b.questions.questions.len(),
        b.selection.selection.entries.len()
    );
    Ok(())
}

pub fn load_bundles(dirs: &[PathBuf]) -> Result<Vec<Bundle>> {
    dirs.iter().map(|d| Bundle::load(d).with_context(|| format!("loading bundle {}", d.display()))).collect()
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let config = load_config(a.config.as_deref())?;
    let bundles = load_bundles(&a.bundles)?;
    let store = Arc::new(FileEventStore::open(&a.data)?);
    let state = AppState::new(bundles, a.fixed.as_deref(), config.experiment.distraction_problems, store, Arc::new(SystemClock))?;
    let addr = SocketAddr::new(a.host, a.port);
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(genread_server::serve(Arc::new(state), addr))?;
    Ok(())
}

fn layouts(flag: Option<&Path>, config: &Config) -> Result<LayoutSet> {
    Ok(match flag.or(config.gaze.layout_file.as_deref()) {
        Some(p) => LayoutSet::load(p).with_context(|| format!("layout {}", p.display()))?,
        None => LayoutSet::defaults(),
    })
}

/// Reads a stored session: its plan, replayed log and optional gaze.
pub fn load_session(dir: &Path) -> Result<(SessionLog, Option<Vec<GazePoint>>)> {
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .with_context(|| format!("session directory {} has no name", dir.display()))?;
    let read = |name: &str| fs::read(dir.join(name)).with_context(|| format!("reading {}", dir.join(name).display()));
    let plan: ExperimentPlan =
        serde_json::from_slice(&read(PLAN_ATTACHMENT)?).with_context(|| format!("{}/{PLAN_ATTACHMENT}", dir.display()))?;
    let text = String::from_utf8(read(EVENTS_FILE)?)
        .map_err(|_| Invalid(format!("{}/{EVENTS_FILE} is not UTF-8", dir.display())))?;
    let events = parse_event_log(&text).with_context(|| format!("{}/{EVENTS_FILE}", dir.display()))?;
    let log = replay(&plan, id, &events).with_context(|| format!("replaying session {id}"))?;
    let gaze_path = dir.join(GAZE_ATTACHMENT);
    let gaze = if gaze_path.exists() {
        let f = fs::File::open(&gaze_path).with_context(|| format!("reading {}", gaze_path.display()))?;
        Some(parse_gaze_csv(f).with_context(|| gaze_path.display().to_string())?)
    } else {
        None
    };
    Ok((log, gaze))
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    let p = dir.join(name);
    fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
    Ok(p)
}

fn aoi_csv(analysis: &SessionAnalysis) -> String {
    let mut s = String::from("slot,condition,story_id,aoi,duration_ms,ratio\n");
    for slot in &analysis.slots {
        if let Some(aoi) = &slot.aoi {
            for b in &aoi.buckets {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{:.3},{:.6}",
                    slot.slot, slot.condition, slot.story_id, b.name, b.duration_ms, b.ratio
                );
            }
        }
    }
    s
}

/// Writes the per-session outputs and returns their paths.
pub fn analyze_gaze(a: &AnalyzeArgs) -> Result<Vec<PathBuf>> {
    let config = load_config(a.config.as_deref())?;
    let layouts = layouts(a.layout.as_deref(), &config)?;
    let (log, gaze) = load_session(&a.session)?;
    if gaze.is_none() {
        log::warn!("session {} has no {GAZE_ATTACHMENT}; only scores are reported", log.session_id);
    }
    let analysis = analyze_session(&log, gaze.as_deref(), &layouts, &config.fixation);
    let out = a.out.clone().unwrap_or_else(|| a.session.join("analysis"));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let (sw, sh) = (layouts.screen_width_px, layouts.screen_height_px);
    let (gw, gh) = (config.gaze.grid_w, config.gaze.grid_h);

    let mut written = vec![
        write(&out, "fixations.json", serde_json::to_vec_pretty(&analysis)?)?,
        write(&out, "aoi_ratios.csv", aoi_csv(&analysis))?,
    ];
    let paths: Vec<serde_json::Value> = analysis
        .slots
        .iter()
        .map(|s| serde_json::json!({ "slot": s.slot, "condition": s.condition, "path": scan_path(&s.fixations) }))
        .collect();
    written.push(write(&out, "scanpath.json", serde_json::to_vec_pretty(&paths)?)?);
    let all: Vec<Fixation> = analysis.slots.iter().flat_map(|s| s.fixations.iter().cloned()).collect();
    written.push(write(&out, "scanpath.svg", scan_path(&all).to_svg(sw, sh))?);
    written.push(write(&out, "heatmap.csv", heatmap(&all, gw, gh, sw, sh)?.to_csv())?);
    for s in &analysis.slots {
        written.push(write(&out, &format!("scanpath_slot{}.svg", s.slot), scan_path(&s.fixations).to_svg(sw, sh))?);
        written.push(write(&out, &format!("heatmap_slot{}.csv", s.slot), heatmap(&s.fixations, gw, gh, sw, sh)?.to_csv())?);
    }
    written.push(write(&out, "condition_report.csv", condition_report(std::slice::from_ref(&analysis)).to_csv())?);
    let n_fix: usize = analysis.slots.iter().map(|s| s.fixations.len()).sum();
    println!("session {}: {} fixations, {} files -> {}", analysis.session_id, n_fix, written.len(), out.display());
    Ok(written)
}

/// Session directories under `root`, in name order.
pub fn session_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).with_context(|| format!("reading {}", root.display()))? {
        let p = entry.with_context(|| format!("reading {}", root.display()))?.path();
        if p.join(EVENTS_FILE).is_file() {
            dirs.push(p);
        }
    }
    dirs.sort();
    Ok(dirs)
}

pub fn report(a: &ReportArgs) -> Result<PathBuf> {
    let config = load_config(a.config.as_deref())?;
    let layouts = layouts(a.layout.as_deref(), &config)?;
    let dirs = session_dirs(&a.sessions)?;
    if dirs.is_empty() {
        return Err(Invalid(format!("no sessions under {}", a.sessions.display())).into());
    }
    let inputs = dirs.iter().map(|d| load_session(d)).collect::<Result<Vec<_>>>()?;
    let analyses = analyze_sessions(&inputs, &layouts, &config.fixation);
    let report = condition_report(&analyses);
    let out = a.out.clone().unwrap_or_else(|| a.sessions.join("condition_report.csv"));
    fs::write(&out, report.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    let completed = inputs.iter().filter(|(l, _)| l.completed).count();
    println!(
        "{} sessions ({} completed), {} rows -> {}",
        inputs.len(),
        completed,
        report.rows.len(),
        out.display()
    );
    Ok(out)
}
