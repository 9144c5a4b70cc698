//! Replica placement. The default policy is rendezvous (highest-random-weight)
//! hashing over FNV-1a-64 scores.

use std::cmp::Ordering;

use super::{NodeId, ObjectId};
use crate::domain::{Error, ErrorCode, Result};

const FNV_OFFSET: u64 = 14695981039346656037;
const FNV_PRIME: u64 = 1099511628211;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, b| {
        (hash ^ u64::from(*b)).wrapping_mul(FNV_PRIME)
    })
}

/// Rendezvous score of `node` for `object`: FNV-1a-64 over `"<node>:<object>"`.
pub fn rendezvous_score(node: &NodeId, object: &ObjectId) -> u64 {
    fnv1a64(format!("{node}:{object}").as_bytes())
}

/// What a placement policy sees of a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub id: NodeId,
    pub up: bool,
    pub free_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementPlan {
    pub object_id: ObjectId,
    pub replicas: Vec<NodeId>,
}

/// Chooses `r` distinct nodes for an object. Implementations must be pure:
/// the same inputs always produce the same plan.
pub trait PlacementPolicy: Send + Sync {
    fn place(
        &self,
        object_id: &ObjectId,
        size_bytes: u64,
        r: usize,
        candidates: &[Candidate],
    ) -> Result<PlacementPlan>;

    /// Orders `nodes` by preference for holding `object_id`, best first.
    fn rank(&self, object_id: &ObjectId, nodes: &[NodeId]) -> Vec<NodeId>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Rendezvous;

impl Rendezvous {
    fn by_preference(object_id: &ObjectId) -> impl Fn(&NodeId, &NodeId) -> Ordering + '_ {
        move |a, b| {
            rendezvous_score(b, object_id)
                .cmp(&rendezvous_score(a, object_id))
                .then_with(|| a.to_string().cmp(&b.to_string()))
        }
    }
}

impl PlacementPolicy for Rendezvous {
    fn place(
        &self,
        object_id: &ObjectId,
        size_bytes: u64,
        r: usize,
        candidates: &[Candidate],
    ) -> Result<PlacementPlan> {
        if r == 0 {
            return Err(Error::validation("replication factor must be at least 1"));
        }
        let mut eligible: Vec<NodeId> = candidates
            .iter()
            .filter(|c| c.up && c.free_bytes >= size_bytes)
            .map(|c| c.id)
            .collect();
        eligible.sort_unstable();
        eligible.dedup();
        if eligible.len() < r {
            return Err(Error::new(
                ErrorCode::InsufficientNodes,
                format!(
                    "{} qualifying node(s) for {object_id}, {r} required",
                    eligible.len()
                ),
            ));
        }
        eligible.sort_by(Self::by_preference(object_id));
        eligible.truncate(r);
        Ok(PlacementPlan {
            object_id: object_id.clone(),
            replicas: eligible,
        })
    }

    fn rank(&self, object_id: &ObjectId, nodes: &[NodeId]) -> Vec<NodeId> {
        let mut ranked = nodes.to_vec();
        ranked.sort_by(Self::by_preference(object_id));
        ranked
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn up(id: u64, free: u64) -> Candidate {
        Candidate {
            id: NodeId(id),
            up: true,
            free_bytes: free,
        }
    }

    #[test]
    fn fnv_reference_values() {
        // Scores computed with an independent Python FNV-1a implementation.
        assert_eq!(fnv1a64(b""), 14695981039346656037);
        let obj = ObjectId::from_seq(1);
        assert_eq!(rendezvous_score(&NodeId(1), &obj), 7899563557201945817);
        assert_eq!(rendezvous_score(&NodeId(2), &obj), 15849814665008307848);
        assert_eq!(rendezvous_score(&NodeId(3), &obj), 11809103914470309063);
    }

    #[test]
    fn picks_two_highest_scores() {
        let cands = [up(1, 100), up(2, 100), up(3, 100)];
        let plan = Rendezvous.place(&ObjectId::from_seq(1), 10, 2, &cands).unwrap();
        assert_eq!(plan.replicas, vec![NodeId(2), NodeId(3)]);
    }

    #[test]
    fn single_candidate() {
        let plan = Rendezvous
            .place(&ObjectId::from_seq(1), 10, 1, &[up(1, 100)])
            .unwrap();
        assert_eq!(plan.replicas, vec![NodeId(1)]);
        let err = Rendezvous
            .place(&ObjectId::from_seq(1), 10, 2, &[up(1, 100)])
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::InsufficientNodes);
    }

    #[test]
    fn skips_down_and_full_nodes() {
        let cands = [
            up(1, 100),
            Candidate {
                id: NodeId(2),
                up: false,
                free_bytes: 100,
            },
            up(3, 5),
        ];
        let plan = Rendezvous.place(&ObjectId::from_seq(1), 10, 1, &cands).unwrap();
        assert_eq!(plan.replicas, vec![NodeId(1)]);
        assert!(Rendezvous.place(&ObjectId::from_seq(1), 10, 2, &cands).is_err());
    }

    #[test]
    fn rank_agrees_with_place() {
        let obj = ObjectId::from_seq(7);
        let nodes: Vec<NodeId> = (1..=8).map(NodeId).collect();
        let cands: Vec<Candidate> = nodes.iter().map(|n| up(n.0, 1 << 20)).collect();
        let plan = Rendezvous.place(&obj, 1, 3, &cands).unwrap();
        assert_eq!(plan.replicas, Rendezvous.rank(&obj, &nodes)[..3].to_vec());
    }
}
