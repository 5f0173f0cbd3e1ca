#![allow(dead_code)]

use std::time::Duration;

use fcm_core::launcher::run_threads;
use fcm_core::{CommContext, NodeTopology, TransportConfig, Triples};

pub fn fast_config(root: &std::path::Path) -> TransportConfig {
    TransportConfig::shared(root)
        .with_polling(Duration::from_micros(50), Duration::from_millis(2))
        .with_timeout(Some(Duration::from_secs(60)))
}

/// Runs `f` on `nodes x ppn` emulated ranks in a fresh mailbox root.
pub fn spmd<R: Send>(nodes: usize, ppn: usize, f: impl Fn(CommContext) -> R + Sync) -> Vec<R> {
    let dir = tempfile::tempdir().unwrap();
    let topo = NodeTopology::from_triples(Triples::new(nodes, ppn));
    run_threads(&topo, &fast_config(dir.path()), f)
}

/// Number of message files left anywhere under `root`.
pub fn leftover_messages(root: &std::path::Path) -> usize {
    let mut n = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            n += leftover_messages(&path);
        } else if path.extension().is_some_and(|e| e == "buf" || e == "lock" || e == "tmp") {
            n += 1;
        }
    }
    n
}
