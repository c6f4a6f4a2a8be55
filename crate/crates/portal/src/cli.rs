//! The `marginalia` command line: run the portal or administer a node.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use marginalia_core::analytics::{Bucket, Grouping, RelationKind};
use marginalia_core::federation::{collaborative_sync, interpretative_export, CollaborationMode};
use marginalia_core::model::{
    AnnotationKind, AnnotationObjective, AnnotatorProfile, ApproachKind, DocumentRecord, Role,
    Timestamp,
};
use marginalia_core::search::AnnotationWeight;
use marginalia_core::store::{AnnotationFilter, SharedStore, Store, StoreConfig};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tracing::{info, warn};
use tracing_subscriber::EnvFilter;

use crate::api::{router, AppState};
use crate::node;
use crate::transport::HttpTransport;

const PEER_TIMEOUT: Duration = Duration::from_secs(30);
const SWEEP_INTERVAL: Duration = Duration::from_secs(30);

#[derive(Debug, Parser)]
#[command(name = "marginalia", version, about = "Federated annotation service")]
pub struct Cli {
    #[command(flatten)]
    pub node: NodeArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct NodeArgs {
    /// Directory holding the transaction log and system id.
    #[arg(
        long,
        env = "MARGINALIA_DATA_DIR",
        default_value = "data",
        global = true
    )]
    pub data_dir: PathBuf,
    /// Origin id of this system. Recorded on first use.
    #[arg(long, env = "MARGINALIA_SYSTEM_ID", global = true)]
    pub system_id: Option<String>,
    #[arg(
        long,
        env = "MARGINALIA_LISTEN",
        default_value = "127.0.0.1:8080",
        global = true
    )]
    pub listen: SocketAddr,
    /// Weight of annotation matches in extended search, as a decimal.
    #[arg(
        long,
        env = "MARGINALIA_ANNOTATION_WEIGHT",
        default_value = "1",
        global = true
    )]
    pub annotation_weight: AnnotationWeight,
    /// Seconds of inactivity after which a session is closed.
    #[arg(
        long,
        env = "MARGINALIA_SESSION_TIMEOUT",
        default_value_t = 3600,
        global = true
    )]
    pub session_timeout: Timestamp,
    /// Browser origin allowed by CORS.
    #[arg(long, env = "MARGINALIA_UI_ORIGIN", global = true)]
    pub ui_origin: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP portal.
    Serve {
        /// Seconds between collaborative sync cycles with every
        /// collaborative peer. Off unless set.
        #[arg(long, env = "MARGINALIA_SYNC_INTERVAL")]
        sync_interval: Option<u64>,
    },
    /// Ingest every `*.json` document record in a directory.
    Ingest { dir: PathBuf },
    #[command(subcommand)]
    User(UserCommand),
    #[command(subcommand)]
    Group(GroupCommand),
    #[command(subcommand)]
    Peer(PeerCommand),
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Replay the log and compare with the state it was opened with.
    ReplayCheck,
}

#[derive(Debug, Subcommand)]
pub enum UserCommand {
    /// Create a user.
    Add(UserAdd),
}

#[derive(Debug, Args)]
pub struct UserAdd {
    pub annotator_ref: String,
    #[arg(long)]
    pub role: Role,
    #[arg(long, default_value = "")]
    pub first_name: String,
    #[arg(long, default_value = "")]
    pub last_name: String,
    #[arg(long, default_value = "")]
    pub email: String,
    #[arg(long, default_value = "")]
    pub postal_address: String,
    #[arg(long, default_value = "")]
    pub region: String,
    #[arg(long, default_value = "")]
    pub country: String,
    #[arg(long, default_value = "")]
    pub activity_area: String,
    /// Login password. Without one the user cannot log in.
    #[arg(long)]
    pub password: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum GroupCommand {
    /// Create a proxy group.
    Add { group_id: String },
    /// Add a user to a proxy group.
    Member {
        group_id: String,
        annotator_ref: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum PeerCommand {
    /// Register an external system and print its token.
    Register {
        peer_id: String,
        base_url: String,
        #[arg(long = "mode", required = true)]
        modes: Vec<CollaborationMode>,
        /// Shared token. Generated when absent.
        #[arg(long)]
        token: Option<String>,
    },
    /// List registered peers.
    List,
    /// Run one collaborative sync cycle with a peer.
    Sync { peer_id: String },
    /// Export shared annotations to an interpretative peer.
    Export {
        peer_id: String,
        #[command(flatten)]
        filter: FilterArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Annotation counts per group and time bucket.
    GroupTime {
        #[arg(long = "as")]
        as_user: String,
        #[arg(long, default_value = "by_role", value_parser = snake_enum::<Grouping>)]
        grouping: Grouping,
        #[arg(long, default_value = "day", value_parser = snake_enum::<Bucket>)]
        bucket: Bucket,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Weighted relationship graph.
    Graph {
        #[arg(long = "as")]
        as_user: String,
        #[arg(long, value_parser = snake_enum::<RelationKind>)]
        kind: RelationKind,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub document: Option<String>,
    #[arg(long)]
    pub annotator: Option<String>,
    /// Earliest `created_at`, inclusive.
    #[arg(long)]
    pub from: Option<Timestamp>,
    /// Latest `created_at`, inclusive.
    #[arg(long)]
    pub to: Option<Timestamp>,
    #[arg(long)]
    pub kind: Option<AnnotationKind>,
    #[arg(long)]
    pub objective: Option<AnnotationObjective>,
    #[arg(long)]
    pub approach: Option<ApproachKind>,
}

impl From<FilterArgs> for AnnotationFilter {
    fn from(f: FilterArgs) -> Self {
        AnnotationFilter {
            document_ref: f.document,
            annotator_ref: f.annotator,
            from: f.from,
            to: f.to,
            kind: f.kind,
            objective: f.objective,
            approach: f.approach,
        }
    }
}

/// Parses a snake_case serde enum, accepting `-` for `_`.
fn snake_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown value {s:?}"))
}

/// Parses arguments, runs the command and reports failures as
/// `error [CODE]: message` on stderr.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let rendered = e.render().to_string();
            eprint!(
                "error [ValidationFailed]: {}",
                rendered.trim_start_matches("error: ")
            );
            return ExitCode::from(2);
        }
    };
    let default_level = if matches!(cli.command, Command::Serve { .. }) {
        "info"
    } else {
        "warn"
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)),
        )
        .with_writer(std::io::stderr)
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e:#}", error_code(&e));
            ExitCode::FAILURE
        }
    }
}

/// Machine-readable code for a CLI failure.
pub fn error_code(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<marginalia_core::Error>() {
            return core.code();
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "ValidationFailed";
        }
    }
    "Internal"
}

fn config(node: &NodeArgs) -> StoreConfig {
    StoreConfig {
        session_timeout: node.session_timeout,
    }
}

fn open(node: &NodeArgs) -> anyhow::Result<Store> {
    node::open_store(&node.data_dir, node.system_id.as_deref(), config(node))
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn print_csv<T: Serialize>(rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    let node = cli.node;
    match cli.command {
        Command::Serve { sync_interval } => serve(&node, sync_interval),
        Command::Ingest { dir } => {
            let mut store = open(&node)?;
            let n = ingest_dir(&mut store, &dir)?;
            println!("{n} documents ingested");
            Ok(())
        }
        Command::User(UserCommand::Add(args)) => {
            let mut store = open(&node)?;
            let profile = AnnotatorProfile {
                annotator_ref: args.annotator_ref,
                role: args.role,
                first_name: args.first_name,
                last_name: args.last_name,
                email: args.email,
                postal_address: args.postal_address,
                region: args.region,
                country: args.country,
                activity_area: args.activity_area,
                created_at: store.now(),
            };
            let annotator_ref = store.put_user(profile)?;
            if let Some(password) = args.password {
                store.set_password(&annotator_ref, &password)?;
            }
            println!("user {annotator_ref} added");
            Ok(())
        }
        Command::Group(GroupCommand::Add { group_id }) => {
            open(&node)?.create_group(&group_id)?;
            println!("group {group_id} added");
            Ok(())
        }
        Command::Group(GroupCommand::Member {
            group_id,
            annotator_ref,
        }) => {
            open(&node)?.add_group_member(&group_id, &annotator_ref)?;
            println!("{annotator_ref} added to group {group_id}");
            Ok(())
        }
        Command::Peer(cmd) => peer(&node, cmd),
        Command::Analyze(cmd) => analyze(&node, cmd),
        Command::ReplayCheck => {
            let store = open(&node)?;
            if !store.replay_check()? {
                bail!(marginalia_core::Error::ValidationFailed(
                    "replayed state differs from the live state".into()
                ));
            }
            println!("replay ok: {} entries", store.state().head());
            Ok(())
        }
    }
}

/// Ingests every `*.json` file in `dir`, in name order. All files are parsed
/// and checked before anything is written.
pub fn ingest_dir(store: &mut Store, dir: &Path) -> anyhow::Result<usize> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .with_context(|| format!("reading {}", dir.display()))?;
    paths.retain(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"));
    paths.sort();

    let mut docs = Vec::with_capacity(paths.len());
    let mut seen: HashMap<String, &Path> = HashMap::new();
    for path in &paths {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let doc: DocumentRecord =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if store.state().document(&doc.document_ref).is_some() {
            return Err(marginalia_core::Error::DuplicateRef(doc.document_ref))
                .with_context(|| format!("ingesting {}", path.display()));
        }
        if let Some(first) = seen.insert(doc.document_ref.clone(), path) {
            return Err(marginalia_core::Error::DuplicateRef(doc.document_ref))
                .with_context(|| format!("{} repeats {}", path.display(), first.display()));
        }
        docs.push((path, doc));
    }
    for (path, doc) in docs {
        store
            .ingest_document(doc)
            .with_context(|| format!("ingesting {}", path.display()))?;
    }
    Ok(paths.len())
}

fn peer(node: &NodeArgs, cmd: PeerCommand) -> anyhow::Result<()> {
    match cmd {
        PeerCommand::Register {
            peer_id,
            base_url,
            modes,
            token,
        } => {
            let modes: BTreeSet<CollaborationMode> = modes.into_iter().collect();
            let peer = open(node)?.register_peer(&peer_id, &base_url, modes, token)?;
            println!("{}", peer.token);
            Ok(())
        }
        PeerCommand::List => {
            let store = open(node)?;
            let peers: Vec<_> = store.state().peers().collect();
            print_json(&peers)
        }
        PeerCommand::Sync { peer_id } => {
            let shared = SharedStore::new(open(node)?);
            let report = collaborative_sync(&shared, &peer_id, &HttpTransport::new(PEER_TIMEOUT)?)?;
            print_json(&report)
        }
        PeerCommand::Export { peer_id, filter } => {
            let shared = SharedStore::new(open(node)?);
            let transport = HttpTransport::new(PEER_TIMEOUT)?;
            // A failed delivery is recorded as a receipt and reported as an error.
            let receipt = interpretative_export(&shared, &peer_id, &filter.into(), &transport)?;
            print_json(&receipt)
        }
    }
}

fn analyze(node: &NodeArgs, cmd: AnalyzeCommand) -> anyhow::Result<()> {
    let store = open(node)?;
    match cmd {
        AnalyzeCommand::GroupTime {
            as_user,
            grouping,
            bucket,
            filter,
            format,
        } => {
            let matrix = store.group_time_counts(grouping, bucket, &filter.into(), &as_user)?;
            match format {
                Format::Json => print_json(&matrix),
                Format::Csv => print_csv(&matrix.cells),
            }
        }
        AnalyzeCommand::Graph {
            as_user,
            kind,
            format,
        } => {
            store.get_user(&as_user)?;
            let edges = store.relationship_graph(kind, &as_user);
            match format {
                Format::Json => print_json(&edges),
                Format::Csv => print_csv(&edges),
            }
        }
    }
}

fn serve(node: &NodeArgs, sync_interval: Option<u64>) -> anyhow::Result<()> {
    let store = open(node)?;
    info!(
        system = store.system_id(),
        head = store.state().head(),
        "store opened"
    );
    let shared = SharedStore::new(store);
    let app = router(
        AppState::new(shared.clone(), node.annotation_weight),
        node.ui_origin.as_deref(),
    )?;

    let stop = Arc::new(AtomicBool::new(false));
    if let Some(secs) = sync_interval.filter(|s| *s > 0) {
        let (shared, stop) = (shared.clone(), stop.clone());
        let transport = HttpTransport::new(PEER_TIMEOUT)?;
        std::thread::spawn(move || {
            sync_loop(&shared, &transport, Duration::from_secs(secs), &stop)
        });
    }

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(node.listen)
            .await
            .with_context(|| format!("binding {}", node.listen))?;
        info!(addr = %listener.local_addr()?, "listening");
        tokio::spawn(sweep_idle_sessions(shared.clone()));
        axum::serve(listener, app)
            .with_graceful_shutdown(shutdown_signal())
            .await?;
        anyhow::Ok(())
    });
    stop.store(true, Ordering::Relaxed);
    info!("stopped");
    result
}

async fn shutdown_signal() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        warn!(error = %e, "cannot listen for ctrl-c");
        std::future::pending::<()>().await;
    }
}

async fn sweep_idle_sessions(shared: SharedStore) {
    let mut tick = tokio::time::interval(SWEEP_INTERVAL);
    loop {
        tick.tick().await;
        let shared = shared.clone();
        let swept = tokio::task::spawn_blocking(move || {
            let mut store = shared.write();
            let now = store.now();
            store.expire_idle_sessions(now)
        })
        .await;
        match swept {
            Ok(Ok(closed)) if !closed.is_empty() => {
                info!(count = closed.len(), "closed idle sessions")
            }
            Ok(Err(e)) => warn!(error = %e, "idle session sweep failed"),
            _ => {}
        }
    }
}

fn sync_loop(shared: &SharedStore, transport: &HttpTransport, every: Duration, stop: &AtomicBool) {
    while !stop.load(Ordering::Relaxed) {
        std::thread::sleep(every);
        let peers: Vec<String> = shared
            .read()
            .state()
            .peers()
            .filter(|p| p.modes.contains(&CollaborationMode::Collaborative))
            .map(|p| p.peer_id.clone())
            .collect();
        for peer_id in peers {
            match collaborative_sync(shared, &peer_id, transport) {
                Ok(r) => info!(peer = %peer_id, sent = r.sent, merged = r.merged, "synced"),
                Err(e) => warn!(peer = %peer_id, error = %e, "sync failed"),
            }
        }
    }
}
