//! On-disk view of node storage: one directory per node holding one file per
//! replica (named by object id) plus a canonical-JSON `manifest.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataCenter, NodeId, NodeStatus, ObjectId};
use crate::canonical::to_canonical_vec;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct NodeManifest {
    id: NodeId,
    capacity_bytes: u64,
    used_bytes: u64,
    status: NodeStatus,
    replicas: BTreeMap<ObjectId, String>,
}

/// Brings `root` in line with the in-memory node contents, writing only
/// replicas missing from the previous manifest. `only` limits the pass to
/// the given nodes; `None` syncs every node.
pub fn sync_node_dirs(dc: &DataCenter, root: &Path, only: Option<&BTreeSet<NodeId>>) -> io::Result<()> {
    fs::create_dir_all(root)?;
    for node in dc.nodes().filter(|n| only.is_none_or(|set| set.contains(&n.id))) {
        let dir = root.join(node.id.to_string());
        fs::create_dir_all(&dir)?;
        let previous: BTreeMap<ObjectId, String> = fs::read(dir.join(MANIFEST))
            .ok()
            .and_then(|raw| serde_json::from_slice::<NodeManifest>(&raw).ok())
            .map(|m| m.replicas)
            .unwrap_or_default();

        let mut replicas = BTreeMap::new();
        for object in node.replica_ids() {
            let bytes = node.replica(object).expect("listed replica exists");
            let sum = dc.object(object).map(|o| o.checksum.clone()).unwrap_or_default();
            if previous.get(object) != Some(&sum) || !dir.join(object.as_str()).exists() {
                write_atomic(&dir.join(object.as_str()), bytes)?;
            }
            replicas.insert(object.clone(), sum);
        }
        for stale in previous.keys().filter(|o| !replicas.contains_key(*o)) {
            match fs::remove_file(dir.join(stale.as_str())) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
                _ => {}
            }
        }
        let manifest = NodeManifest {
            id: node.id,
            capacity_bytes: node.capacity_bytes,
            used_bytes: node.used_bytes,
            status: node.status,
            replicas,
        };
        write_atomic(&dir.join(MANIFEST), &to_canonical_vec(&manifest))?;
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datacenter::DataCenterConfig;
    use bytes::Bytes;

    #[test]
    fn mirrors_replicas_and_removals() {
        let dir = tempfile::tempdir().unwrap();
        let mut dc = DataCenter::new(DataCenterConfig::default());
        dc.add_node(1 << 20).unwrap();
        dc.add_node(1 << 20).unwrap();
        let id = dc.put_object(Bytes::from_static(b"payload"), 2).unwrap();
        sync_node_dirs(&dc, dir.path(), None).unwrap();
        for n in ["n1", "n2"] {
            assert_eq!(fs::read(dir.path().join(n).join("obj-1")).unwrap(), b"payload");
            let manifest: serde_json::Value =
                serde_json::from_slice(&fs::read(dir.path().join(n).join(MANIFEST)).unwrap())
                    .unwrap();
            assert_eq!(manifest["used_bytes"], 7);
        }
        dc.delete_object(&id).unwrap();
        sync_node_dirs(&dc, dir.path(), None).unwrap();
        assert!(!dir.path().join("n1").join("obj-1").exists());
    }
}
