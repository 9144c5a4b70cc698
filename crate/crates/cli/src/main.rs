//! `campuscloud`: initialise a data directory, run the server, and drive it.
//!
//! Everything except `init` and `verify-replay` goes through the HTTP API.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::{Arc, RwLock};

use campuscloud::datacenter::{NodeStatus, GIB};
use campuscloud::workload::{fill_payload, run_workload, WorkloadSpec};
use campuscloud::{verify_replay, Cloud, CloudConfig, Error, ErrorCode, NewAccount, Role, StudentRecord};
use campuscloud_gateway::server::DEFAULT_WORKERS;
use campuscloud_gateway::{serve, ApiClient, ClientError, Http};
use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED_STAFF: &str = "seed-staff";
const SEED_COURSE: &str = "SEED";

#[derive(Parser)]
#[command(name = "campuscloud", version, about = "University cloud operator tool")]
struct Cli {
    #[command(flatten)]
    conn: Conn,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Conn {
    /// Server base URL; defaults to http://127.0.0.1:$CAMPUSCLOUD_PORT
    #[arg(long, global = true)]
    url: Option<String>,
    #[arg(long, global = true, env = "CAMPUSCLOUD_PORT", default_value_t = 8080)]
    port: u16,
    /// Admin user id
    #[arg(long, global = true, env = "CAMPUSCLOUD_USER", default_value = "admin")]
    user: String,
    #[arg(long, global = true, env = "CAMPUSCLOUD_SECRET", default_value = "admin", hide_env_values = true)]
    secret: String,
}

#[derive(Args)]
struct DataDir {
    #[arg(long, env = "CAMPUSCLOUD_DATA", default_value = "campuscloud-data")]
    data: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Create a new data directory with an admin account and N nodes
    Init {
        #[command(flatten)]
        dir: DataDir,
        #[arg(long, default_value_t = 3)]
        nodes: u32,
        /// Capacity of each node in bytes
        #[arg(long, default_value_t = GIB)]
        capacity: u64,
        #[arg(long, default_value_t = 2)]
        replication: u8,
        #[arg(long)]
        autoscale: bool,
        #[arg(long, default_value_t = GIB)]
        autoscale_capacity: u64,
        #[arg(long, default_value_t = 64)]
        max_nodes: usize,
        /// Micro-credits per MiB per node per tick
        #[arg(long, default_value_t = 1)]
        rate: u64,
        #[arg(long)]
        snapshot_every: Option<u64>,
        /// Seed for session tokens and salts
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the HTTP API over a data directory
    Serve {
        #[command(flatten)]
        dir: DataDir,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = DEFAULT_WORKERS)]
        workers: usize,
    },
    /// Insert generated student records and optional course objects
    Seed {
        #[arg(long, default_value_t = 10)]
        students: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of course materials to upload
        #[arg(long, default_value_t = 0)]
        objects: u32,
        #[arg(long, default_value_t = 1 << 20)]
        object_bytes: u64,
    },
    /// Mark a node Down
    FailNode { node: String },
    /// Mark a node Up
    RecoverNode { node: String },
    /// Advance the simulation clock
    Advance {
        #[arg(long, allow_negative_numbers = true)]
        ticks: i64,
    },
    /// Restore every object to its replication factor
    Rereplicate,
    /// Print the bill for ticks [from, to) in micro-credits
    Bill {
        #[arg(long)]
        from: u64,
        #[arg(long)]
        to: u64,
        /// Print the full statement as JSON
        #[arg(long)]
        json: bool,
    },
    /// Run a generated workload described by a JSON spec file
    Workload {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Replay the event log and check it against every snapshot
    VerifyReplay {
        #[command(flatten)]
        dir: DataDir,
        /// Also require this final digest
        #[arg(long)]
        expect: Option<String>,
    },
}

struct Failure {
    code: String,
    message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: e.code.to_string(),
            message: e.message,
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Api(e) => e.into(),
            ClientError::Transport(message) => Failure {
                code: "TRANSPORT".into(),
                message,
            },
        }
    }
}

fn io_failure(what: &str, e: impl fmt::Display) -> Failure {
    Failure {
        code: "IO".into(),
        message: format!("{what}: {e}"),
    }
}

type Outcome = Result<(), Failure>;

impl Conn {
    fn client(&self) -> ApiClient<Http> {
        let base = self.url.clone().unwrap_or_else(|| format!("http://127.0.0.1:{}", self.port));
        ApiClient::new(Http::new(&base))
    }

    fn admin(&self, api: &ApiClient<Http>) -> Result<String, Failure> {
        Ok(api.login(&self.user, &self.secret, Some(Role::Admin))?.token.0)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let conn = &cli.conn;
    match cli.command {
        Command::Init {
            dir,
            nodes,
            capacity,
            replication,
            autoscale,
            autoscale_capacity,
            max_nodes,
            rate,
            snapshot_every,
            seed,
        } => {
            let mut config = CloudConfig {
                rng_seed: seed,
                ..Default::default()
            };
            if let Some(n) = snapshot_every {
                config.snapshot_every = n;
            }
            config.datacenter.replication = replication;
            config.datacenter.autoscale = autoscale;
            config.datacenter.autoscale_node_capacity = autoscale_capacity;
            config.datacenter.max_nodes = max_nodes;
            config.datacenter.rate_micro_per_mib_tick = rate;
            config.validate()?;
            let capacity = i64::try_from(capacity).map_err(|_| Error::validation("capacity too large"))?;
            let mut cloud = Cloud::create(&dir.data, config)?;
            cloud.bootstrap_admin(&conn.user, &conn.secret)?;
            let token = cloud.login(&conn.user, &conn.secret, Some(Role::Admin))?.token.0;
            for _ in 0..nodes {
                cloud.add_node(&token, capacity)?;
            }
            cloud.logout(&token)?;
            println!("initialised {} with {nodes} nodes", dir.data.display());
            println!("digest: {}", cloud.digest());
        }
        Command::Serve { dir, host, workers } => {
            let cloud = Cloud::open(&dir.data)?;
            let server = serve(&format!("{host}:{}", conn.port), Arc::new(RwLock::new(cloud)), workers)
                .map_err(|e| io_failure("bind", e))?;
            println!("listening on {}", server.base_url());
            let _ = std::io::stdout().flush();
            server.join();
        }
        Command::Seed {
            students,
            seed,
            objects,
            object_bytes,
        } => {
            let api = conn.client();
            let admin = conn.admin(&api)?;
            let staff_secret = format!("{SEED_STAFF}-{}", conn.secret);
            let account = NewAccount {
                user_id: SEED_STAFF.into(),
                roles: vec![Role::Staff],
                secret: staff_secret.clone(),
                ..Default::default()
            };
            match api.create_account(&admin, &account) {
                Err(e) if e.code() == Some(ErrorCode::DuplicateId) => {}
                other => other?,
            }
            let staff = api.login(SEED_STAFF, &staff_secret, Some(Role::Staff))?.token.0;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..students {
                api.insert_student(&staff, &seed_record(&mut rng, seed, i))?;
            }
            for i in 0..objects {
                api.upload_material(&staff, SEED_COURSE, fill_payload(object_bytes, seed ^ u64::from(i)))?;
            }
            println!("seeded {students} students and {objects} objects");
        }
        Command::FailNode { node } => set_status(conn, &node, NodeStatus::Down)?,
        Command::RecoverNode { node } => set_status(conn, &node, NodeStatus::Up)?,
        Command::Advance { ticks } => {
            let api = conn.client();
            let admin = conn.admin(&api)?;
            println!("tick: {}", api.advance_clock(&admin, ticks)?);
        }
        Command::Rereplicate => {
            let api = conn.client();
            let admin = conn.admin(&api)?;
            let report = api.rereplicate(&admin)?;
            println!("repaired: {}", report.repaired);
            println!("trimmed: {}", report.trimmed);
            println!("degraded: {}", report.degraded.len());
            for id in &report.degraded {
                println!("  {id}");
            }
        }
        Command::Bill { from, to, json } => {
            let api = conn.client();
            let admin = conn.admin(&api)?;
            let bill = api.compute_bill(&admin, from, to)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&bill).expect("bill serializes"));
            } else {
                println!("{}", bill.total_micro_credits);
            }
        }
        Command::Workload { spec } => {
            let raw = std::fs::read(&spec).map_err(|e| io_failure(&spec.display().to_string(), e))?;
            let spec: WorkloadSpec =
                serde_json::from_slice(&raw).map_err(|e| Error::validation(format!("workload spec: {e}")))?;
            let mut api = conn.client();
            let summary = run_workload(&mut api, &spec, &conn.user, &conn.secret)?;
            let admin = conn.admin(&api)?;
            let digest = api.digest(&admin)?;
            println!("ops: {}", summary.ops);
            println!("applied: {}", summary.applied);
            let errors: Vec<String> = summary.errors.iter().map(|(code, n)| format!("{code}={n}")).collect();
            println!("errors: {}", if errors.is_empty() { "none".into() } else { errors.join(" ") });
            println!("digest: {}", digest.digest);
        }
        Command::VerifyReplay { dir, expect } => {
            let report = verify_replay(&dir.data)?;
            println!("entries: {}", report.entries);
            println!("snapshots verified: {}", report.checkpoints_verified.len());
            println!("digest: {}", report.digest);
            if !report.snapshots_past_end.is_empty() {
                return Err(Error::new(
                    ErrorCode::ReplayError,
                    format!("log ends before snapshots {:?}", report.snapshots_past_end),
                )
                .into());
            }
            if let Some(want) = expect {
                if want != report.digest {
                    return Err(Error::new(ErrorCode::ReplayError, format!("expected digest {want}")).into());
                }
            }
        }
    }
    Ok(())
}

fn set_status(conn: &Conn, node: &str, status: NodeStatus) -> Outcome {
    let api = conn.client();
    let admin = conn.admin(&api)?;
    api.set_node_status(&admin, node, status)?;
    println!("{node}: {status:?}");
    Ok(())
}

const FIRST: [&str; 8] = ["Asha", "Bilal", "Chen", "Dara", "Elif", "Femi", "Goran", "Hana"];
const LAST: [&str; 8] = ["Okafor", "Silva", "Nakamura", "Haddad", "Kowalski", "Mensah", "Ibarra", "Lindqvist"];
const PROGRAMS: [&str; 4] = ["BSc Computer Science", "BA History", "BEng Civil", "MSc Data Science"];

fn seed_record(rng: &mut ChaCha8Rng, seed: u64, i: u32) -> StudentRecord {
    let first = FIRST.choose(rng).unwrap();
    let last = LAST.choose(rng).unwrap();
    StudentRecord {
        user_id: format!("S{seed}-{i:05}").parse().expect("generated id is valid"),
        name: format!("{first} {last}"),
        program: PROGRAMS.choose(rng).unwrap().to_string(),
        year: rng.gen_range(1..=4),
        contact: format!("{}.{}{i}@example.edu", first.to_lowercase(), last.to_lowercase()),
        version: 1,
    }
}
