use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hub_core::{AclEntry, Hub, VolumeKind};
use hub_server::config::Config;
use hub_server::{App, Listeners};

/// Administration and server entry point for the hub.
#[derive(Parser)]
#[command(name = "hubctl", version)]
struct Cli {
    /// Config file (defaults to $HUB_CONFIG, then built-in defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manage registered users.
    #[command(subcommand)]
    User(UserCmd),
    /// Export the user registry.
    #[command(subcommand)]
    Ldif(LdifCmd),
    /// Manage volumes.
    #[command(subcommand)]
    Volume(VolumeCmd),
    /// Run the API and proxy.
    Serve,
    /// Save or restore the state snapshot.
    #[command(subcommand)]
    Snapshot(SnapshotCmd),
}

#[derive(Subcommand)]
enum UserCmd {
    /// Register a user; prints `<username> <numeric id>`.
    Add { username: String, email: String },
    /// One `<username> <numeric id>` line per user.
    List,
}

#[derive(Subcommand)]
enum LdifCmd {
    Export {
        #[arg(long, default_value = hub_core::ldif::DEFAULT_BASE_DN)]
        base_dn: String,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum KindArg {
    Storage,
    Functional,
}

#[derive(Subcommand)]
enum VolumeCmd {
    /// Create a volume; prints its id.
    Add {
        name: String,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Maintainer username (functional volumes).
        #[arg(long)]
        maintainer: Option<String>,
        /// ACL entry `user:<name>` or `group:<name>` (storage volumes); repeatable.
        #[arg(long = "acl")]
        acl: Vec<String>,
    },
    List,
}

#[derive(Subcommand)]
enum SnapshotCmd {
    Save { path: PathBuf },
    Load { path: PathBuf },
}

fn open_hub(config: &Config) -> Result<Hub, String> {
    Hub::open(&config.storage_root, config.hub_options()).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), String> {
    let config = Config::load(cli.config.as_deref()).map_err(|e| e.to_string())?;
    match cli.command {
        Command::User(UserCmd::Add { username, email }) => {
            let u = open_hub(&config)?.register_user(&username, &email).map_err(|e| e.to_string())?;
            println!("{} {}", u.username, u.numeric_id);
        }
        Command::User(UserCmd::List) => {
            for u in open_hub(&config)?.list_users() {
                println!("{} {}", u.username, u.numeric_id);
            }
        }
        Command::Ldif(LdifCmd::Export { base_dn }) => {
            print!("{}", open_hub(&config)?.export_ldif(&base_dn));
        }
        Command::Volume(VolumeCmd::Add { name, kind, maintainer, acl }) => {
            let hub = open_hub(&config)?;
            let maintainer = match maintainer {
                Some(m) => Some(hub.user_by_name(&m).map_err(|e| e.to_string())?.user_id),
                None => None,
            };
            let mut entries = BTreeSet::new();
            for a in acl {
                let entry = match a.split_once(':') {
                    Some(("user", n)) => AclEntry::User(hub.user_by_name(n).map_err(|e| e.to_string())?.user_id),
                    Some(("group", g)) => AclEntry::Group(g.to_owned()),
                    _ => return Err(format!("bad ACL entry {a:?}; expected user:<name> or group:<name>")),
                };
                entries.insert(entry);
            }
            let kind = match kind {
                KindArg::Storage => VolumeKind::Storage,
                KindArg::Functional => VolumeKind::Functional,
            };
            let v = hub.create_volume(&name, kind, maintainer, entries).map_err(|e| e.to_string())?;
            println!("{} {} {}", v.volume_id, v.kind.as_str(), v.name);
        }
        Command::Volume(VolumeCmd::List) => {
            for v in open_hub(&config)?.list_volumes() {
                println!("{} {} {}", v.volume_id, v.kind.as_str(), v.name);
            }
        }
        Command::Snapshot(SnapshotCmd::Save { path }) => {
            open_hub(&config)?.store().persist_to(&path).map_err(|e| e.to_string())?;
            println!("saved {}", path.display());
        }
        Command::Snapshot(SnapshotCmd::Load { path }) => {
            open_hub(&config)?.store().restore_from(&path).map_err(|e| e.to_string())?;
            println!("loaded {}", path.display());
        }
        Command::Serve => serve(config)?,
    }
    Ok(())
}

fn serve(config: Config) -> Result<(), String> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("HUB_LOG").unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async move {
        let app = App::from_config(&config).await.map_err(|e| e.to_string())?;
        let listeners =
            Listeners::bind(&config.bind, config.api_port, config.proxy_port).await.map_err(|e| e.to_string())?;
        let (api, proxy) = listeners.addrs().map_err(|e| e.to_string())?;
        // stable lines so wrappers can discover ephemeral ports
        println!("api listening on {api}");
        println!("proxy listening on {proxy}");
        hub_server::app::serve(app, listeners, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| e.to_string())
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
