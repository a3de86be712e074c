#![allow(dead_code)]

use proptest::prelude::*;
use timebuffer_core::plan::{build_network, Network, Task};

/// Random DAG with a single source (1) and sink (n) where every node lies on
/// a source-to-sink path. Extra arcs stop at `max_tasks`; parallel arcs and
/// dummies occur.
pub fn dag(max_tasks: usize) -> impl Strategy<Value = Network> {
    (2u32..=6, any::<u64>()).prop_map(move |(n, seed)| random_dag(n, seed, max_tasks))
}

pub fn random_dag(n: u32, seed: u64, max_tasks: usize) -> Network {
    let mut rng = SplitMix(seed);
    let mut arcs: Vec<(u32, u32)> = Vec::new();
    if n == 2 {
        arcs.push((1, 2));
    }
    for k in 2..n {
        arcs.push((1 + rng.below(k - 1), k));
        arcs.push((k, k + 1 + rng.below(n - k)));
    }
    let extra = rng.below(4) as usize;
    for _ in 0..extra {
        if arcs.len() >= max_tasks {
            break;
        }
        let i = 1 + rng.below(n - 1);
        let j = i + 1 + rng.below(n - i);
        arcs.push((i, j));
    }
    let tasks = arcs
        .into_iter()
        .enumerate()
        .map(|(i, (s, d))| {
            let code = format!("T{i:02}");
            if rng.below(8) == 0 {
                Task::dummy(&code, s, d)
            } else {
                let o = 1 + i64::from(rng.below(20));
                let m = o + i64::from(rng.below(20));
                let p = m + i64::from(rng.below(30));
                Task::new(&code, &code, s, d, o, m, p, 0).unwrap()
            }
        })
        .collect();
    build_network(tasks).expect("generator builds valid networks")
}

struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: u32) -> u32 {
        (self.next() % u64::from(n.max(1))) as u32
    }
}

/// Every source-to-sink path as a list of task indices.
pub fn all_paths(net: &Network) -> Vec<Vec<usize>> {
    fn walk(net: &Network, node: u32, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if node == net.sink_node() {
            out.push(path.clone());
            return;
        }
        for (i, t) in net.tasks().iter().enumerate() {
            if t.source_knot == node {
                path.push(i);
                walk(net, t.dest_knot, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(net, net.source_node(), &mut Vec::new(), &mut out);
    out
}

pub struct Oracle {
    pub duration: i64,
    pub early_start: Vec<i64>,
    pub slack: Vec<i64>,
    pub critical_paths: Vec<Vec<String>>,
}

/// Brute force over explicit path enumeration.
pub fn oracle(net: &Network, durations: &[i64]) -> Oracle {
    let paths = all_paths(net);
    let len = |p: &Vec<usize>| p.iter().map(|&i| durations[i]).sum::<i64>();
    let duration = paths.iter().map(len).max().unwrap_or(0);
    let n = net.tasks().len();
    let mut early_start = vec![0; n];
    let mut through = vec![i64::MIN; n];
    for p in &paths {
        let total = len(p);
        let mut prefix = 0;
        for &i in p {
            early_start[i] = early_start[i].max(prefix);
            through[i] = through[i].max(total);
            prefix += durations[i];
        }
    }
    let slack = through.iter().map(|t| duration - t).collect();
    let mut critical_paths: Vec<Vec<String>> = paths
        .iter()
        .filter(|p| len(p) == duration)
        .map(|p| p.iter().map(|&i| net.tasks()[i].code.clone()).collect())
        .collect();
    critical_paths.sort();
    critical_paths.dedup();
    Oracle {
        duration,
        early_start,
        slack,
        critical_paths,
    }
}
