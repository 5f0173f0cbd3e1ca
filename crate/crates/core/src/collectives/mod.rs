//! Broadcast and gather.
//!
//! Three broadcast variants share one executor: each builds a [`CommPlan`],
//! a list of stages made of rounds of `(sender, receiver)` pairs, and every
//! rank walks the plan in order, receiving when it is a receiver and
//! forwarding when it is a sender.
//!
//! * [`BcastVariant::Serial`]: the root sends to every other rank in rank order.
//! * [`BcastVariant::NodeSerial`]: the root's node leader sends to each other
//!   leader in turn, then every leader sends to its own node in turn.
//! * [`BcastVariant::Tree`]: binomial tree over the node leaders, then a
//!   binomial tree inside each node.
//!
//! A root that is not its node's leader first hands the value to that leader.
//! Every call draws exactly one reserved tag; all messages of the call use it,
//! and no `(sender, receiver)` pair occurs twice within a plan.

pub mod schedule;

use std::fmt;
use std::str::FromStr;

pub use schedule::{binomial_schedule, ceil_log2, TreeSchedule};

use crate::comm::{CommContext, CommError, NodeTopology, Result};
use crate::transport::Payload;
use crate::{Rank, Tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcastVariant {
    Serial,
    NodeSerial,
    Tree,
}

impl BcastVariant {
    pub const ALL: [BcastVariant; 3] = [BcastVariant::Serial, BcastVariant::NodeSerial, BcastVariant::Tree];
}

impl FromStr for BcastVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "serial" => Ok(BcastVariant::Serial),
            "node-serial" => Ok(BcastVariant::NodeSerial),
            "tree" => Ok(BcastVariant::Tree),
            other => Err(format!("unknown broadcast variant {other:?} (serial|node-serial|tree)")),
        }
    }
}

impl fmt::Display for BcastVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BcastVariant::Serial => "serial",
            BcastVariant::NodeSerial => "node-serial",
            BcastVariant::Tree => "tree",
        })
    }
}

/// A named group of rounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub name: &'static str,
    pub rounds: Vec<Vec<(Rank, Rank)>>,
}

/// The complete message pattern of one collective call.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommPlan {
    pub stages: Vec<Stage>,
}

impl CommPlan {
    fn push(&mut self, name: &'static str, rounds: Vec<Vec<(Rank, Rank)>>) {
        let rounds: Vec<_> = rounds.into_iter().filter(|r| !r.is_empty()).collect();
        if !rounds.is_empty() {
            self.stages.push(Stage { name, rounds });
        }
    }

    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Rank, Rank)> + '_ {
        self.stages.iter().flat_map(|s| s.rounds.iter().flatten().copied())
    }

    pub fn message_count(&self) -> usize {
        self.pairs().count()
    }

    /// Messages sent or received by `rank`.
    pub fn messages_touching(&self, rank: Rank) -> usize {
        self.pairs().filter(|&(s, d)| s == rank || d == rank).count()
    }
}

/// Participants grouped by node, each list ascending so its head is the leader.
#[derive(Debug, Clone)]
struct NodeGroups {
    nodes: Vec<Vec<Rank>>,
}

impl NodeGroups {
    fn new(topology: &NodeTopology, participants: &[Rank]) -> Self {
        let mut nodes: Vec<Vec<Rank>> = vec![Vec::new(); topology.node_count()];
        for &r in participants {
            nodes[topology.node_of(r)].push(r);
        }
        for n in &mut nodes {
            n.sort_unstable();
            n.dedup();
        }
        nodes.retain(|n| !n.is_empty());
        Self { nodes }
    }

    fn node_index_of(&self, rank: Rank) -> Option<usize> {
        self.nodes.iter().position(|n| n.contains(&rank))
    }

    fn leaders(&self) -> Vec<Rank> {
        self.nodes.iter().map(|n| n[0]).collect()
    }
}

/// Merges per-node binomial schedules round by round.
fn merge_rounds(per_node: Vec<Vec<Vec<(Rank, Rank)>>>) -> Vec<Vec<(Rank, Rank)>> {
    let depth = per_node.iter().map(Vec::len).max().unwrap_or(0);
    (0..depth)
        .map(|t| per_node.iter().filter_map(|r| r.get(t)).flatten().copied().collect())
        .collect()
}

/// Broadcast pattern for `variant` rooted at `root` over `topology`.
pub fn bcast_plan(variant: BcastVariant, topology: &NodeTopology, root: Rank) -> CommPlan {
    let all: Vec<Rank> = (0..topology.size()).collect();
    bcast_plan_for(variant, &NodeGroups::new(topology, &all), root)
}

fn bcast_plan_for(variant: BcastVariant, groups: &NodeGroups, root: Rank) -> CommPlan {
    let mut plan = CommPlan::default();
    if variant == BcastVariant::Serial {
        let mut ranks: Vec<Rank> = groups.nodes.iter().flatten().copied().collect();
        ranks.sort_unstable();
        plan.push("flat", ranks.into_iter().filter(|&r| r != root).map(|r| vec![(root, r)]).collect());
        return plan;
    }

    let root_node = groups.node_index_of(root).expect("root participates");
    let root_leader = groups.nodes[root_node][0];
    if root != root_leader {
        plan.push("handoff", vec![vec![(root, root_leader)]]);
    }
    let mut leaders = vec![root_leader];
    leaders.extend(groups.leaders().into_iter().filter(|&l| l != root_leader));
    // in-node lists start at the leader and skip the root, which already holds the value
    let in_node: Vec<Vec<Rank>> = groups
        .nodes
        .iter()
        .map(|n| n.iter().copied().filter(|&r| r == n[0] || r != root).collect())
        .collect();

    match variant {
        BcastVariant::NodeSerial => {
            plan.push("leaders", leaders[1..].iter().map(|&l| vec![(root_leader, l)]).collect());
            let depth = in_node.iter().map(Vec::len).max().unwrap_or(1);
            plan.push(
                "in-node",
                (1..depth)
                    .map(|j| in_node.iter().filter_map(|n| n.get(j).map(|&r| (n[0], r))).collect())
                    .collect(),
            );
        }
        BcastVariant::Tree => {
            plan.push("leaders", TreeSchedule::over(leaders).rank_rounds());
            plan.push(
                "in-node",
                merge_rounds(in_node.into_iter().map(|n| TreeSchedule::over(n).rank_rounds()).collect()),
            );
        }
        BcastVariant::Serial => unreachable!(),
    }
    plan
}

/// Gather pattern toward the smallest participant: reversed binomial trees,
/// first inside each node toward its leader, then across leaders.
pub fn gather_plan(topology: &NodeTopology, participants: &[Rank]) -> CommPlan {
    let groups = NodeGroups::new(topology, participants);
    let mut plan = CommPlan::default();
    plan.push(
        "in-node",
        merge_rounds(
            groups
                .nodes
                .iter()
                .map(|n| TreeSchedule::over(n.clone()).reversed_rank_rounds())
                .collect(),
        ),
    );
    let mut leaders = groups.leaders();
    leaders.sort_unstable();
    plan.push("leaders", TreeSchedule::over(leaders).reversed_rank_rounds());
    plan
}

fn run_bcast(ctx: &CommContext, plan: &CommPlan, tag: Tag, root: Rank, value: Payload) -> Result<Payload> {
    let me = ctx.rank();
    let mut frame = (me == root).then(|| value.encode());
    for (s, d) in plan.pairs() {
        if d == me {
            frame = Some(ctx.recv_frame(s, tag)?);
        } else if s == me {
            let bytes = frame.as_ref().expect("plan delivers before forwarding");
            ctx.send_frame(d, tag, bytes)?;
        }
    }
    if me == root {
        return Ok(value);
    }
    match frame {
        Some(bytes) => Ok(Payload::decode(&bytes)?),
        None => Err(CommError::UnexpectedPayload(format!("rank {me} is not reached by the plan"))),
    }
}

fn check_root(ctx: &CommContext, root: Rank) -> Result<()> {
    if root >= ctx.size() {
        return Err(CommError::InvalidDest { dest: root, size: ctx.size() });
    }
    Ok(())
}

/// Broadcasts `value` from `root`; every rank returns the root's value.
/// Non-root ranks' `value` is ignored.
pub fn bcast(ctx: &CommContext, variant: BcastVariant, root: Rank, value: Payload) -> Result<Payload> {
    check_root(ctx, root)?;
    let tag = ctx.next_reserved_tag();
    let plan = bcast_plan(variant, ctx.topology(), root);
    run_bcast(ctx, &plan, tag, root, value)
}

pub fn bcast_serial(ctx: &CommContext, root: Rank, value: Payload) -> Result<Payload> {
    bcast(ctx, BcastVariant::Serial, root, value)
}

pub fn bcast_node_aware_serial(ctx: &CommContext, root: Rank, value: Payload) -> Result<Payload> {
    bcast(ctx, BcastVariant::NodeSerial, root, value)
}

pub fn bcast_tree(ctx: &CommContext, root: Rank, value: Payload) -> Result<Payload> {
    bcast(ctx, BcastVariant::Tree, root, value)
}

/// Rank-tagged contributions travelling up the gather tree.
///
/// Encoded as a raw frame whose body is `u32 count`, then `count` pairs of
/// `(u64 rank, u64 length)`, then the contributors' frames back to back.
struct Bundle(Vec<(Rank, Vec<u8>)>);

impl Bundle {
    fn encode(&self) -> Vec<u8> {
        let total: usize = self.0.iter().map(|(_, f)| f.len()).sum();
        let mut body = Vec::with_capacity(4 + 16 * self.0.len() + total);
        body.extend_from_slice(&(self.0.len() as u32).to_le_bytes());
        for (rank, f) in &self.0 {
            body.extend_from_slice(&(*rank as u64).to_le_bytes());
            body.extend_from_slice(&(f.len() as u64).to_le_bytes());
        }
        for (_, f) in &self.0 {
            body.extend_from_slice(f);
        }
        Payload::Bytes(body).encode()
    }

    fn decode(frame: &[u8]) -> Result<Self> {
        let bad = |m: &str| CommError::UnexpectedPayload(format!("gather bundle: {m}"));
        let body = Payload::decode(frame)?.into_bytes().ok_or_else(|| bad("not raw bytes"))?;
        let word = |at: usize, len: usize| -> Result<u64> {
            let b = body.get(at..at + len).ok_or_else(|| bad("truncated"))?;
            let mut w = [0u8; 8];
            w[..len].copy_from_slice(b);
            Ok(u64::from_le_bytes(w))
        };
        let count = word(0, 4)? as usize;
        let mut at = 4 + 16 * count;
        let mut parts = Vec::with_capacity(count);
        for i in 0..count {
            let rank = word(4 + 16 * i, 8)? as Rank;
            let len = word(12 + 16 * i, 8)? as usize;
            let f = body.get(at..at + len).ok_or_else(|| bad("truncated contribution"))?;
            parts.push((rank, f.to_vec()));
            at += len;
        }
        if at != body.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Bundle(parts))
    }

    fn merge(&mut self, other: Bundle) {
        self.0.extend(other.0);
        self.0.sort_by_key(|(r, _)| *r);
    }
}

/// Gathers one payload per participant at the smallest participant, ordered
/// by rank. Ranks outside `participants` return `None` without communicating.
pub(crate) fn gather_group(
    ctx: &CommContext,
    tag: Tag,
    participants: &[Rank],
    value: &Payload,
) -> Result<Option<Vec<Payload>>> {
    let me = ctx.rank();
    if !participants.contains(&me) {
        return Ok(None);
    }
    let plan = gather_plan(ctx.topology(), participants);
    let mut bundle = Bundle(vec![(me, value.encode())]);
    for (s, d) in plan.pairs() {
        if d == me {
            bundle.merge(Bundle::decode(&ctx.recv_frame(s, tag)?)?);
        } else if s == me {
            ctx.send_frame(d, tag, &bundle.encode())?;
            return Ok(None);
        }
    }
    let mut expected: Vec<Rank> = participants.to_vec();
    expected.sort_unstable();
    expected.dedup();
    let got: Vec<Rank> = bundle.0.iter().map(|(r, _)| *r).collect();
    if got != expected {
        return Err(CommError::UnexpectedPayload(format!("gather collected ranks {got:?}, expected {expected:?}")));
    }
    bundle.0.iter().map(|(_, f)| Ok(Payload::decode(f)?)).collect::<Result<Vec<_>>>().map(Some)
}

/// Two-level binomial gather to rank 0. Rank 0 returns all `size` values in
/// rank order; other ranks return `None`.
pub fn gather_tree(ctx: &CommContext, value: &Payload) -> Result<Option<Vec<Payload>>> {
    let tag = ctx.next_reserved_tag();
    let all: Vec<Rank> = (0..ctx.size()).collect();
    gather_group(ctx, tag, &all, value)
}

/// Gather of empty payloads to rank 0 followed by a tree broadcast back out.
pub fn barrier(ctx: &CommContext) -> Result<()> {
    if ctx.size() == 1 {
        // keep the tag sequence identical to the multi-rank path
        ctx.next_reserved_tag();
        ctx.next_reserved_tag();
        return Ok(());
    }
    gather_tree(ctx, &Payload::empty())?;
    bcast_tree(ctx, 0, Payload::empty())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::Triples;
    use std::collections::HashSet;

    fn topo(nodes: usize, ppn: usize) -> NodeTopology {
        NodeTopology::from_triples(Triples::new(nodes, ppn))
    }

    #[test]
    fn node_serial_trace_two_by_two() {
        let plan = bcast_plan(BcastVariant::NodeSerial, &topo(2, 2), 0);
        assert_eq!(plan.stage("leaders").unwrap().rounds, vec![vec![(0, 2)]]);
        assert_eq!(plan.stage("in-node").unwrap().rounds, vec![vec![(0, 1), (2, 3)]]);
        assert!(plan.stage("handoff").is_none());
    }

    #[test]
    fn non_leader_root_hands_off_first() {
        let plan = bcast_plan(BcastVariant::NodeSerial, &topo(2, 2), 3);
        assert_eq!(plan.stages[0].name, "handoff");
        assert_eq!(plan.stages[0].rounds, vec![vec![(3, 2)]]);
        assert_eq!(plan.stage("leaders").unwrap().rounds, vec![vec![(2, 0)]]);
        // root 3 is not sent to again
        assert_eq!(plan.stage("in-node").unwrap().rounds, vec![vec![(0, 1)]]);
    }

    #[test]
    fn tree_shapes() {
        let plan = bcast_plan(BcastVariant::Tree, &topo(4, 1), 0);
        assert_eq!(plan.stage("leaders").unwrap().rounds.len(), 2);
        assert!(plan.stage("in-node").is_none());

        let plan = bcast_plan(BcastVariant::Tree, &topo(2, 4), 0);
        assert_eq!(plan.stage("leaders").unwrap().rounds, vec![vec![(0, 4)]]);
        assert_eq!(
            plan.stage("in-node").unwrap().rounds,
            vec![vec![(0, 1), (4, 5)], vec![(0, 2), (1, 3), (4, 6), (5, 7)]]
        );
    }

    #[test]
    fn every_plan_reaches_each_rank_once() {
        for (n, p) in [(1, 1), (1, 5), (3, 2), (2, 4), (4, 3), (5, 1)] {
            let t = topo(n, p);
            for root in 0..t.size() {
                for v in BcastVariant::ALL {
                    let plan = bcast_plan(v, &t, root);
                    let mut seen = HashSet::new();
                    let mut have: HashSet<Rank> = [root].into();
                    for (s, d) in plan.pairs() {
                        assert!(have.contains(&s), "{v} sender {s} has no value yet");
                        assert!(seen.insert((s, d)), "pair repeated");
                        have.insert(d);
                    }
                    assert_eq!(have.len(), t.size());
                    assert_eq!(plan.message_count(), t.size() - 1);
                }
            }
        }
    }

    #[test]
    fn tree_message_bound() {
        for (n, p) in [(2, 4), (3, 3), (4, 4), (5, 2), (1, 7)] {
            let t = topo(n, p);
            for root in 0..t.size() {
                let plan = bcast_plan(BcastVariant::Tree, &t, root);
                let bound = ceil_log2(t.node_count()) + ceil_log2(t.max_ppn()) + 1;
                for r in 0..t.size() {
                    assert!(plan.messages_touching(r) <= bound, "rank {r} exceeds {bound}");
                }
            }
        }
    }

    #[test]
    fn gather_plan_collects_everything_at_min() {
        let t = topo(3, 3);
        let plan = gather_plan(&t, &(0..9).collect::<Vec<_>>());
        let mut pending: HashSet<Rank> = (1..9).collect();
        let mut sent = HashSet::new();
        for (s, d) in plan.pairs() {
            assert!(sent.insert(s), "rank {s} sends twice");
            assert!(!sent.contains(&d), "rank {d} receives after sending");
            pending.remove(&s);
        }
        assert!(pending.is_empty());
        assert!(!sent.contains(&0));
    }

    #[test]
    fn bundle_round_trip() {
        let mut a = Bundle(vec![(2, vec![1, 2, 3])]);
        a.merge(Bundle(vec![(0, vec![]), (5, vec![9])]));
        let b = Bundle::decode(&a.encode()).unwrap();
        assert_eq!(b.0, vec![(0, vec![]), (2, vec![1, 2, 3]), (5, vec![9])]);
    }

    #[test]
    fn variant_parsing() {
        for v in BcastVariant::ALL {
            assert_eq!(v.to_string().parse::<BcastVariant>(), Ok(v));
        }
        assert!("ring".parse::<BcastVariant>().is_err());
    }
}
