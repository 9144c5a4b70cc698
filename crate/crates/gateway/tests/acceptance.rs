//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use bytes::Bytes;
use campuscloud::datacenter::{DataCenter, DataCenterConfig, NodeStatus, ObjectId, GIB, MIB};
use campuscloud::persistence::{read_log, TailPolicy, LOG_FILE};
use campuscloud::provider::{Capability, CapabilityTable};
use campuscloud::workload::{run_workload, Mix, WorkloadSpec};
use campuscloud::{replay, verify_replay, Cloud, CloudConfig, ErrorCode, NewAccount, Role, StudentPatch, StudentRecord};
use campuscloud_gateway::api::{StudentInsert, API_PREFIX};
use campuscloud_gateway::{serve, ApiClient, Http, InProcess, Method, Operation, Request, Response, ENDPOINTS};
use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn shared(config: CloudConfig) -> Arc<RwLock<Cloud>> {
    let mut cloud = Cloud::in_memory(config).unwrap();
    cloud.bootstrap_admin("admin", "admin-pw").unwrap();
    Arc::new(RwLock::new(cloud))
}

fn add_account<T: campuscloud_gateway::Transport>(api: &ApiClient<T>, admin: &str, id: &str, role: Role) -> String {
    api.create_account(
        admin,
        &NewAccount {
            user_id: id.into(),
            roles: vec![role],
            secret: format!("{id}-pw"),
            ..Default::default()
        },
    )
    .unwrap();
    api.login(id, &format!("{id}-pw"), None).unwrap().token.0
}

fn record(id: &str, n: u32) -> StudentRecord {
    StudentRecord {
        user_id: id.parse().unwrap(),
        name: format!("Student {n}"),
        program: "BSc Computer Science".into(),
        year: 1 + n % 4,
        contact: format!("s{n}@example.edu"),
        version: 1,
    }
}

fn sha(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

// ---------------------------------------------------------------------------

fn tc01_duplicate_insert() -> Check {
    let cloud = shared(CloudConfig::default());
    let server = serve("127.0.0.1:0", Arc::clone(&cloud), 2).map_err(|e| e.to_string())?;
    let api = ApiClient::new(Http::new(&server.base_url()));
    let admin = api.login("admin", "admin-pw", None).unwrap().token.0;
    for _ in 0..3 {
        api.add_node(&admin, GIB as i64).unwrap();
    }
    let staff = add_account(&api, &admin, "T0001", Role::Staff);
    api.insert_student(&staff, &record("S1001", 1)).map_err(|e| e.to_string())?;

    let before = api.digest(&admin).unwrap();
    let resp = api
        .send(
            Request::new(Method::Post, &format!("{API_PREFIX}/students"))
                .with_token(&staff)
                .with_json(&StudentInsert::from(&record("S1001", 2))),
        )
        .unwrap();
    let after = api.digest(&admin).unwrap();
    let code = resp.api_error().code;
    ensure(resp.status == 409 && code == ErrorCode::DuplicateId, || {
        format!("got HTTP {} {code}", resp.status)
    })?;
    ensure(before == after, || format!("digest changed: {} -> {}", before.digest, after.digest))?;
    Ok(format!("409 DUPLICATE_ID, digest {}… unchanged", &after.digest[..12]))
}

fn tc02_no_user_found() -> Check {
    let cloud = shared(CloudConfig::default());
    let server = serve("127.0.0.1:0", Arc::clone(&cloud), 2).map_err(|e| e.to_string())?;
    let api = ApiClient::new(Http::new(&server.base_url()));
    let admin = api.login("admin", "admin-pw", None).unwrap().token.0;
    for _ in 0..2 {
        api.add_node(&admin, GIB as i64).unwrap();
    }
    let staff = add_account(&api, &admin, "T0001", Role::Staff);
    api.insert_student(&staff, &record("S1001", 1)).unwrap();
    let resp = api
        .send(Request::new(Method::Get, &format!("{API_PREFIX}/students/S9999")).with_token(&staff))
        .unwrap();
    let err = resp.api_error();
    ensure(
        resp.status == 404 && err.code == ErrorCode::NotFound && err.message == "No user found",
        || format!("got HTTP {} {err}", resp.status),
    )?;
    Ok("404 NOT_FOUND \"No user found\"".into())
}

// ---------------------------------------------------------------------------

struct StorageFixture {
    cloud: Arc<RwLock<Cloud>>,
    api: ApiClient<InProcess>,
    admin: String,
    staff: String,
    records: Vec<StudentRecord>,
    /// assignment object -> payload checksum
    assignments: Vec<(ObjectId, [u8; 32])>,
}

fn storage_fixture(seed: u64) -> StorageFixture {
    let mut config = CloudConfig::default();
    config.datacenter.replication = 3;
    let cloud = shared(config);
    let api = ApiClient::new(InProcess(Arc::clone(&cloud)));
    let admin = api.login("admin", "admin-pw", None).unwrap().token.0;
    for _ in 0..6 {
        api.add_node(&admin, GIB as i64).unwrap();
    }
    let staff = add_account(&api, &admin, "T0001", Role::Staff);
    let student = add_account(&api, &admin, "S0001", Role::Student);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records: Vec<StudentRecord> = (0..50).map(|i| record(&format!("S{:04}", 1000 + i), rng.gen())).collect();
    for r in &records {
        api.insert_student(&staff, r).unwrap();
    }
    let assignments = (0..50)
        .map(|_| {
            let mut payload = vec![0u8; rng.gen_range(1024..=256 * 1024)];
            rng.fill_bytes(&mut payload);
            let sum = sha(&payload);
            let asg = api.submit_assignment(&student, "CS101", Bytes::from(payload)).unwrap();
            (asg.object_ref, sum)
        })
        .collect();
    StorageFixture {
        cloud,
        api,
        admin,
        staff,
        records,
        assignments,
    }
}

fn read_violations(f: &StorageFixture) -> Vec<String> {
    let mut bad = Vec::new();
    for r in &f.records {
        match f.api.retrieve_student(&f.staff, r.user_id.as_str()) {
            Ok(got) if &got == r => {}
            Ok(_) => bad.push(format!("{} differs", r.user_id)),
            Err(e) => bad.push(format!("{}: {e}", r.user_id)),
        }
    }
    let cloud = f.cloud.read().unwrap();
    for (obj, sum) in &f.assignments {
        match cloud.state().datacenter.get_object(obj) {
            Ok(bytes) if sha(&bytes) == *sum => {}
            Ok(_) => bad.push(format!("{obj} checksum mismatch")),
            Err(e) => bad.push(format!("{obj}: {e}")),
        }
    }
    bad
}

fn fault_tolerance() -> Check {
    let f = storage_fixture(7);
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut violations = Vec::new();
    for trial in 0..50 {
        let pick: Vec<String> = sample(&mut rng, 6, 2).into_iter().map(|i| format!("n{}", i + 1)).collect();
        for n in &pick {
            f.api.set_node_status(&f.admin, n, NodeStatus::Down).unwrap();
        }
        for v in read_violations(&f) {
            violations.push(format!("trial {trial} ({pick:?}): {v}"));
        }
        for n in &pick {
            f.api.set_node_status(&f.admin, n, NodeStatus::Up).unwrap();
        }
    }
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok("100 objects at R=3 on 6 nodes, 50 two-node failures, 0 violations".into())
}

/// Objects not at exactly R Up replicas, unless flagged degraded with no
/// Up non-holder able to take a copy.
fn replica_violations(cloud: &Cloud, degraded: &[ObjectId]) -> Vec<String> {
    let dc = &cloud.state().datacenter;
    let mut bad = Vec::new();
    for object in dc.objects() {
        let up = dc.up_replica_count(object);
        let target = usize::from(object.replication);
        if up == target {
            continue;
        }
        let provably_short = degraded.contains(&object.id)
            && up < target
            && dc
                .nodes()
                .filter(|n| n.is_up() && !object.replicas.contains(&n.id))
                .all(|n| n.free_bytes() < object.size_bytes);
        if !provably_short {
            bad.push(format!("{} has {up}/{target} Up replicas", object.id));
        }
    }
    bad
}

fn repair_convergence() -> Check {
    let f = storage_fixture(8);
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let mut violations = Vec::new();
    let mut repaired = 0;
    for trial in 0..50 {
        let pick: Vec<String> = sample(&mut rng, 6, 2).into_iter().map(|i| format!("n{}", i + 1)).collect();
        for n in &pick {
            f.api.set_node_status(&f.admin, n, NodeStatus::Down).unwrap();
        }
        let report = f.api.rereplicate(&f.admin).unwrap();
        repaired += report.repaired;
        for v in replica_violations(&f.cloud.read().unwrap(), &report.degraded) {
            violations.push(format!("trial {trial} after failure: {v}"));
        }
        for n in &pick {
            f.api.set_node_status(&f.admin, n, NodeStatus::Up).unwrap();
        }
        let report = f.api.rereplicate(&f.admin).unwrap();
        for v in replica_violations(&f.cloud.read().unwrap(), &report.degraded) {
            violations.push(format!("trial {trial} after recovery: {v}"));
        }
        if !f.cloud.read().unwrap().audit().is_clean() {
            violations.push(format!("trial {trial}: audit not clean"));
        }
    }

    // Permanent losses on a minimal autoscaling cluster.
    let mut config = CloudConfig::default();
    config.datacenter.replication = 3;
    config.datacenter.autoscale = true;
    let mut cloud = Cloud::in_memory(config).unwrap();
    cloud.bootstrap_admin("admin", "pw").unwrap();
    let admin = cloud.login("admin", "pw", None).unwrap().token.0;
    for _ in 0..3 {
        cloud.add_node(&admin, GIB as i64).unwrap();
    }
    for i in 0..20u8 {
        cloud.upload_material(&admin, "CS101", Bytes::from(vec![i; 10_000])).ok();
    }
    let staff = {
        cloud
            .create_account(
                &admin,
                NewAccount {
                    user_id: "T0001".into(),
                    roles: vec![Role::Staff],
                    secret: "pw".into(),
                    ..Default::default()
                },
            )
            .unwrap();
        cloud.login("T0001", "pw", None).unwrap().token.0
    };
    for i in 0..20u8 {
        cloud.upload_material(&staff, "CS101", Bytes::from(vec![i; 10_000])).unwrap();
    }
    for trial in 0..10 {
        let up: Vec<String> = cloud
            .state()
            .datacenter
            .nodes()
            .filter(|n| n.is_up())
            .map(|n| n.id.to_string())
            .collect();
        let victim = &up[rng.gen_range(0..up.len())];
        cloud.set_node_status(&admin, victim, NodeStatus::Down).unwrap();
        let report = cloud.rereplicate(&admin).unwrap();
        for v in replica_violations(&cloud, &report.degraded) {
            violations.push(format!("autoscale trial {trial}: {v}"));
        }
    }

    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok(format!(
        "50 fail/repair/recover rounds ({repaired} copies made) + 10 permanent losses with autoscale, 0 violations"
    ))
}

// ---------------------------------------------------------------------------

fn infinite_storage() -> Check {
    let config = DataCenterConfig {
        replication: 2,
        autoscale: true,
        max_nodes: 64,
        autoscale_node_capacity: 4 * GIB,
        ..Default::default()
    };
    let mut dc = DataCenter::new(config);
    dc.add_node((4 * GIB) as i64).unwrap();
    dc.add_node((4 * GIB) as i64).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut pool = vec![0u8; 16 * MIB as usize];
    rng.fill_bytes(&mut pool);
    let pool = Bytes::from(pool);

    let mut errors: BTreeMap<ErrorCode, u64> = BTreeMap::new();
    let mut stored = 0u64;
    let mut samples = Vec::new();
    for i in 0..10_000 {
        let size = rng.gen_range(1024..=8 * MIB as usize);
        let offset = rng.gen_range(0..=pool.len() - size);
        let payload = pool.slice(offset..offset + size);
        match dc.put_object(payload, 2) {
            Ok(id) => {
                stored += size as u64;
                if i % 1000 == 0 {
                    samples.push((id, offset, size));
                }
            }
            Err(e) => *errors.entry(e.code).or_default() += 1,
        }
        let _ = dc.take_effects();
    }
    for (id, offset, size) in samples {
        ensure(dc.get_object(&id).ok().as_deref() == Some(&pool[offset..offset + size]), || {
            format!("{id} did not read back")
        })?;
    }
    let capacity_errors = errors.get(&ErrorCode::CapacityExceeded).copied().unwrap_or(0);
    ensure(errors.is_empty(), || format!("errors by code: {errors:?}"))?;
    Ok(format!(
        "10000 puts, {:.1} GiB logical at R=2, {} nodes, {capacity_errors} CAPACITY_EXCEEDED",
        stored as f64 / GIB as f64,
        dc.nodes().count()
    ))
}

// ---------------------------------------------------------------------------

/// Recomputes per-tick, per-node MiB usage from the storage effects recorded
/// in a log file, without using the system's ledger.
fn oracle_usage(log_text: &str) -> Result<BTreeMap<u64, BTreeMap<String, u64>>, String> {
    let mut used: BTreeMap<String, u64> = BTreeMap::new();
    let mut up: BTreeMap<String, bool> = BTreeMap::new();
    let mut tick = 0u64;
    let mut per_tick: BTreeMap<u64, BTreeMap<String, u64>> = BTreeMap::new();
    for line in log_text.lines() {
        let entry: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let effects = entry["payload"]["result"]["effects"].as_array().cloned().unwrap_or_default();
        for effect in effects {
            let node = effect["node"].as_str().unwrap_or_default().to_owned();
            let size = effect["size_bytes"].as_u64().unwrap_or(0);
            match effect["kind"].as_str() {
                Some("node_added") => {
                    used.insert(node.clone(), 0);
                    up.insert(node, true);
                }
                Some("node_status") => {
                    up.insert(node, effect["status"] == "Up");
                }
                Some("replica_written") => *used.get_mut(&node).ok_or("unknown node")? += size,
                Some("replica_removed") => *used.get_mut(&node).ok_or("unknown node")? -= size,
                Some("clock_advanced") => {
                    for _ in 0..effect["ticks"].as_u64().unwrap_or(0) {
                        let row = per_tick.entry(tick).or_default();
                        for (n, bytes) in &used {
                            if up[n] {
                                *row.entry(n.clone()).or_default() += bytes.div_ceil(MIB);
                            }
                        }
                        tick += 1;
                    }
                }
                Some("object_stored" | "object_deleted") => {}
                other => return Err(format!("unknown effect {other:?}")),
            }
        }
    }
    Ok(per_tick)
}

fn billing_oracle() -> Check {
    let rate = 7u64;
    let mut compared = 0;
    for i in 0..20u64 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut config = CloudConfig {
            rng_seed: i,
            snapshot_every: 0,
            ..Default::default()
        };
        config.datacenter.rate_micro_per_mib_tick = rate;
        let mut cloud = Cloud::create(dir.path(), config).map_err(|e| e.to_string())?;
        cloud.bootstrap_admin("admin", "admin-pw").unwrap();
        let cloud = Arc::new(RwLock::new(cloud));
        let mut api = ApiClient::new(InProcess(Arc::clone(&cloud)));
        let spec = WorkloadSpec {
            seed: 5000 + i,
            ops: 250,
            mix: Mix {
                retrieve: 0.35,
                insert: 0.2,
                submit: 0.2,
                update: 0.1,
                admin: 0.15,
            },
            payload_bytes: [1024, 3 * MIB],
            nodes: 4,
        };
        run_workload(&mut api, &spec, "admin", "admin-pw").map_err(|e| e.to_string())?;
        let admin = api.login("admin", "admin-pw", None).unwrap().token.0;
        api.advance_clock(&admin, 3).unwrap();

        let text = std::fs::read_to_string(dir.path().join(LOG_FILE)).map_err(|e| e.to_string())?;
        let per_tick = oracle_usage(&text)?;
        let end = cloud.read().unwrap().state().tick();
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let mut ranges = vec![(0, end), (0, 0), (end, end)];
        for _ in 0..5 {
            let a = rng.gen_range(0..=end);
            ranges.push((a, rng.gen_range(a..=end)));
        }
        for (from, to) in ranges {
            let bill = api.compute_bill(&admin, from, to).map_err(|e| e.to_string())?;
            let mut expected: BTreeMap<String, u64> = BTreeMap::new();
            for (_, row) in per_tick.range(from..to) {
                for (n, mib) in row {
                    *expected.entry(n.clone()).or_default() += mib;
                }
            }
            let total: u64 = expected.values().sum::<u64>() * rate;
            let got: BTreeMap<String, u64> = bill
                .per_node_breakdown
                .iter()
                .filter(|(_, c)| c.mib_ticks > 0)
                .map(|(n, c)| (n.to_string(), c.mib_ticks))
                .collect();
            expected.retain(|_, v| *v > 0);
            ensure(bill.total_micro_credits == total && got == expected, || {
                format!(
                    "workload {i} [{from},{to}): billed {} vs oracle {total}; nodes {got:?} vs {expected:?}",
                    bill.total_micro_credits
                )
            })?;
            ensure(
                bill.per_node_breakdown.values().all(|c| c.micro_credits == c.mib_ticks * rate),
                || format!("workload {i}: per-node credits not mib_ticks x rate"),
            )?;
            compared += 1;
        }
    }
    Ok(format!("20 workloads, {compared} bills integer-exact against the log oracle"))
}

// ---------------------------------------------------------------------------

/// The capability sets each role holds, as published.
fn published_table() -> BTreeMap<Role, BTreeSet<Capability>> {
    use Capability::*;
    BTreeMap::from([
        (
            Role::Student,
            BTreeSet::from([StudentReadSelf, StudentUpdateSelf, AssignmentSubmit, MaterialDownload, ServiceRequest]),
        ),
        (
            Role::Staff,
            BTreeSet::from([
                StudentInsert,
                StudentRetrieveAny,
                StudentUpdateAny,
                MaterialUpload,
                MaterialDownload,
                SubmissionList,
                GradeRecord,
                ServiceRequest,
            ]),
        ),
        (Role::Admin, BTreeSet::from([AdminNodeOps, AdminBilling, AdminAccounts, AdminClock])),
    ])
}

enum Need {
    Public,
    Session,
    Cap(Capability),
    OwnOrAny(Capability, Capability),
}

/// Each operation's precondition, written out independently of the router.
fn precondition(op: Operation) -> Need {
    use Capability::*;
    match op {
        Operation::Login | Operation::Health => Need::Public,
        Operation::Logout | Operation::SwitchRole => Need::Session,
        Operation::ListServices | Operation::RequestService => Need::Cap(ServiceRequest),
        Operation::InsertStudent => Need::Cap(StudentInsert),
        Operation::RetrieveSelf => Need::Cap(StudentReadSelf),
        Operation::RetrieveStudent => Need::OwnOrAny(StudentReadSelf, StudentRetrieveAny),
        Operation::UpdateStudent => Need::OwnOrAny(StudentUpdateSelf, StudentUpdateAny),
        Operation::SubmitAssignment => Need::Cap(AssignmentSubmit),
        Operation::ListSubmissions => Need::Cap(SubmissionList),
        Operation::UploadMaterial => Need::Cap(MaterialUpload),
        Operation::DownloadMaterial => Need::Cap(MaterialDownload),
        Operation::RecordGrade => Need::Cap(GradeRecord),
        Operation::AddNode | Operation::SetNodeStatus | Operation::Rereplicate | Operation::Digest => {
            Need::Cap(AdminNodeOps)
        }
        Operation::AdvanceClock => Need::Cap(AdminClock),
        Operation::UsageReport | Operation::ComputeBill => Need::Cap(AdminBilling),
        Operation::CreateAccount => Need::Cap(AdminAccounts),
    }
}

struct Probe {
    api: ApiClient<InProcess>,
    tokens: BTreeMap<Role, (String, String)>,
}

fn probe_fixture() -> Probe {
    let cloud = shared(CloudConfig::default());
    let api = ApiClient::new(InProcess(cloud));
    let admin = api.login("admin", "admin-pw", None).unwrap().token.0;
    for _ in 0..3 {
        api.add_node(&admin, GIB as i64).unwrap();
    }
    let staff = add_account(&api, &admin, "T0001", Role::Staff);
    let student = add_account(&api, &admin, "S1001", Role::Student);
    api.insert_student(&staff, &record("S1001", 1)).unwrap();
    api.insert_student(&staff, &record("S1002", 2)).unwrap();
    api.upload_material(&staff, "CS101", Bytes::from_static(b"syllabus")).unwrap();
    api.submit_assignment(&student, "CS101", Bytes::from_static(b"essay")).unwrap();
    let tokens = BTreeMap::from([
        (Role::Student, ("S1001".to_owned(), student)),
        (Role::Staff, ("T0001".to_owned(), staff)),
        (Role::Admin, ("admin".to_owned(), admin)),
    ]);
    Probe { api, tokens }
}

fn probe_request(op: Operation, role: Role, user: &str, target: &str) -> Request {
    let p = |rest: &str| format!("{API_PREFIX}{rest}");
    let json_post = |rest: &str, body: Value| Request::new(Method::Post, &p(rest)).with_json(&body);
    match op {
        Operation::Login => {
            let secret = if role == Role::Admin { "admin-pw".to_owned() } else { format!("{user}-pw") };
            json_post("/login", json!({"user_id": user, "secret": secret}))
        }
        Operation::Logout => json_post("/logout", json!({})),
        Operation::SwitchRole => json_post("/session/role", json!({"role": role})),
        Operation::ListServices => Request::new(Method::Get, &p("/services")),
        Operation::RequestService => json_post("/services/request", json!({"service": "matlab-saas"})),
        Operation::InsertStudent => json_post("/students", json!(StudentInsert::from(&record("S3001", 3)))),
        Operation::RetrieveSelf => Request::new(Method::Get, &p("/students/self")),
        Operation::RetrieveStudent => Request::new(Method::Get, &p(&format!("/students/{target}"))),
        Operation::UpdateStudent => Request::new(Method::Patch, &p(&format!("/students/{target}"))).with_json(
            &StudentPatch {
                contact: Some("probe@example.edu".into()),
                ..Default::default()
            },
        ),
        Operation::SubmitAssignment => {
            Request::new(Method::Post, &p("/courses/CS101/assignments")).with_body(Bytes::from_static(b"work"))
        }
        Operation::ListSubmissions => Request::new(Method::Get, &p("/courses/CS101/submissions")),
        Operation::UploadMaterial => {
            Request::new(Method::Post, &p("/courses/CS101/materials")).with_body(Bytes::from_static(b"notes"))
        }
        Operation::DownloadMaterial => Request::new(Method::Get, &p("/courses/CS101/materials/mat-1")),
        Operation::RecordGrade => json_post("/assignments/asg-1/grade", json!({"grade": "B+"})),
        Operation::AddNode => json_post("/admin/nodes", json!({"capacity_bytes": 1 << 20})),
        Operation::SetNodeStatus => json_post("/admin/nodes/n1/status", json!({"status": "Up"})),
        Operation::Rereplicate => json_post("/admin/rereplicate", json!({})),
        Operation::AdvanceClock => json_post("/admin/clock/advance", json!({"ticks": 1})),
        Operation::UsageReport => Request::new(Method::Get, &p("/admin/usage?from=0&to=1")),
        Operation::ComputeBill => Request::new(Method::Get, &p("/admin/bill?from=0&to=1")),
        Operation::Health => Request::new(Method::Get, &p("/health")),
        Operation::CreateAccount => json_post(
            "/admin/accounts",
            json!({"user_id": "N0001", "roles": ["Student"], "secret": "x"}),
        ),
        Operation::Digest => Request::new(Method::Get, &p("/admin/digest")),
    }
}

/// Granted: 2xx, or 404 when probing one's own (absent) student record.
fn classify(resp: &Response, own_probe: bool) -> Option<bool> {
    match resp.status {
        200..=299 => Some(true),
        404 if own_probe => Some(true),
        403 => Some(false),
        _ => None,
    }
}

fn authorization_matrix() -> Check {
    let published = published_table();
    let declared = CapabilityTable::default();
    for role in Role::ALL {
        let declared_set: BTreeSet<Capability> = declared.capabilities(role).clone();
        ensure(declared_set == published[&role], || format!("{role} capability set differs from the published table"))?;
    }

    let mut mismatches = Vec::new();
    let mut probes = 0;
    for endpoint in ENDPOINTS {
        let need = precondition(endpoint.operation);
        let targets: &[bool] = match need {
            Need::OwnOrAny(..) => &[false, true],
            _ => &[false],
        };
        for role in Role::ALL {
            for &own in targets {
                let fixture = probe_fixture();
                let (user, token) = fixture.tokens[&role].clone();
                let target = if own { user.clone() } else { "S1002".to_owned() };
                let caps = &published[&role];
                let expected = match need {
                    Need::Public | Need::Session => true,
                    Need::Cap(c) => caps.contains(&c),
                    Need::OwnOrAny(own_cap, any_cap) => caps.contains(&any_cap) || (own && caps.contains(&own_cap)),
                };
                let req = probe_request(endpoint.operation, role, &user, &target).with_token(&token);
                let resp = fixture.api.send(req).unwrap();
                probes += 1;
                match classify(&resp, own) {
                    Some(granted) if granted == expected => {}
                    got => mismatches.push(format!(
                        "{role} {} {} (own={own}): expected {}, got HTTP {} {:?}",
                        endpoint.method.as_str(),
                        endpoint.path,
                        if expected { "granted" } else { "FORBIDDEN" },
                        resp.status,
                        got.map(|_| resp.api_error().to_string()).unwrap_or_else(|| resp.api_error().to_string())
                    )),
                }
            }
        }
        // without a token, everything but the public endpoints is 401
        let fixture = probe_fixture();
        let resp = fixture
            .api
            .send(probe_request(endpoint.operation, Role::Student, "S1001", "S1002"))
            .unwrap();
        probes += 1;
        let public = matches!(need, Need::Public);
        if public == (resp.status == 401) {
            mismatches.push(format!("anonymous {} {}: HTTP {}", endpoint.method.as_str(), endpoint.path, resp.status));
        }
    }
    ensure(mismatches.is_empty(), || format!("{} mismatches, first: {}", mismatches.len(), mismatches[0]))?;
    Ok(format!("{} endpoints, {probes} probes, 0 mismatches", ENDPOINTS.len()))
}

// ---------------------------------------------------------------------------

fn replay_determinism() -> Check {
    let mut boundaries = 0;
    for i in 0..20u64 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config = CloudConfig {
            snapshot_every: 50,
            rng_seed: 100 + i,
            ..Default::default()
        };
        let mut cloud = Cloud::create(dir.path(), config.clone()).map_err(|e| e.to_string())?;
        cloud.bootstrap_admin("admin", "admin-pw").unwrap();
        let cloud = Arc::new(RwLock::new(cloud));
        let mut api = ApiClient::new(InProcess(Arc::clone(&cloud)));
        run_workload(&mut api, &WorkloadSpec::new(9000 + i, 500), "admin", "admin-pw").map_err(|e| e.to_string())?;
        let (live_digest, live_checkpoints) = {
            let c = cloud.read().unwrap();
            (c.digest(), c.checkpoints().to_vec())
        };

        let report = verify_replay(dir.path()).map_err(|e| format!("workload {i}: {e}"))?;
        let live_seqs: Vec<u64> = live_checkpoints.iter().map(|(s, _)| *s).collect();
        ensure(report.digest == live_digest, || format!("workload {i}: final digest differs"))?;
        ensure(report.checkpoints_verified == live_seqs, || {
            format!("workload {i}: snapshots {:?} vs live {live_seqs:?}", report.checkpoints_verified)
        })?;

        let entries = read_log(&dir.path().join(LOG_FILE), TailPolicy::Strict).map_err(|e| e.to_string())?.entries;
        let mut at = live_checkpoints.iter().peekable();
        let state = replay(&config, &entries, |seq, state| {
            if let Some((s, d)) = at.peek() {
                if *s == seq {
                    if &state.digest() != d {
                        return Err(campuscloud::Error::replay(seq, "digest differs from live"));
                    }
                    at.next();
                }
            }
            Ok(())
        })
        .map_err(|e| format!("workload {i}: {e}"))?;
        ensure(at.next().is_none(), || format!("workload {i}: not every boundary replayed"))?;
        ensure(state.digest() == live_digest, || format!("workload {i}: replayed digest differs"))?;
        boundaries += live_seqs.len();
    }
    Ok(format!("20 workloads x 500 ops, {boundaries} snapshot boundaries + 20 final digests equal"))
}

// ---------------------------------------------------------------------------

fn entitlement_exposure() -> Check {
    let mut checks = 0;
    for seed in 0..30u64 {
        let cloud = shared(CloudConfig::default());
        let api = ApiClient::new(InProcess(Arc::clone(&cloud)));
        let admin = api.login("admin", "admin-pw", None).unwrap().token.0;
        let users: Vec<(String, String)> = [("S1001", Role::Student), ("S1002", Role::Student), ("T0001", Role::Staff)]
            .into_iter()
            .map(|(id, role)| (id.to_owned(), add_account(&api, &admin, id, role)))
            .collect();
        let catalog: Vec<String> = cloud.read().unwrap().config().provider.catalog.iter().map(|e| e.id.0.clone()).collect();
        let mut offered = catalog.clone();
        offered.extend(["ghost-svc".to_owned(), "MATLAB-SAAS".to_owned()]);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut requested: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for _ in 0..25 {
            let (user, token) = &users[rng.gen_range(0..users.len())];
            let service = &offered[rng.gen_range(0..offered.len())];
            let _ = api.request_service(token, service);
            requested.entry(user.clone()).or_default().insert(service.clone());
            for (u, t) in &users {
                let listed: Vec<String> = api
                    .list_entitled_services(t)
                    .map_err(|e| e.to_string())?
                    .into_iter()
                    .map(|e| e.id.0)
                    .collect();
                let expected: Vec<String> = catalog
                    .iter()
                    .filter(|c| requested.get(u).is_some_and(|r| r.contains(*c)))
                    .cloned()
                    .collect();
                ensure(listed == expected, || format!("seed {seed} {u}: listed {listed:?}, expected {expected:?}"))?;
                checks += 1;
            }
        }
    }
    Ok(format!("30 random request sequences, {checks} listings equal requested ∩ catalog"))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("TC-01 duplicate insert rejected, state unchanged", Duration::from_secs(1), tc01_duplicate_insert),
        ("TC-02 unknown id reports \"No user found\"", Duration::from_secs(1), tc02_no_user_found),
        ("fault tolerance under two-node failures", Duration::from_secs(30), fault_tolerance),
        ("repair convergence", Duration::from_secs(30), repair_convergence),
        ("infinite-storage illusion", Duration::from_secs(60), infinite_storage),
        ("billing oracle", Duration::from_secs(60), billing_oracle),
        ("authorization matrix", Duration::from_secs(10), authorization_matrix),
        ("replay determinism", Duration::from_secs(60), replay_determinism),
        ("entitlement exposure", Duration::from_secs(60), entitlement_exposure),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(detail) if elapsed <= limit => (true, detail),
            Ok(detail) => (false, format!("{detail}; took longer than {limit:?}")),
            Err(why) => (false, why),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name} [{:.2}s, limit {}s]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
