//! NISQ device description: coupling graph with per-edge 2-qubit infidelity.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("device JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading device file: {0}")]
    Io(#[from] std::io::Error),
    #[error("device needs at least one qubit")]
    NoQubits,
    #[error("edge ({0}, {0}) is a self-loop")]
    SelfLoop(usize),
    #[error("edge ({u}, {v}) references a qubit outside 0..{n}")]
    EdgeOutOfRange { u: usize, v: usize, n: usize },
    #[error("edge ({0}, {1}) listed more than once")]
    DuplicateEdge(usize, usize),
    #[error("infidelity {value} of {what} is outside [0, 1)")]
    BadProbability { what: String, value: f64 },
    #[error("readout_error has {got} entries for {n} qubits")]
    ReadoutLength { got: usize, n: usize },
    #[error("coupling graph is disconnected")]
    Disconnected,
    #[error("unknown device preset `{0}`")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub qubits: [usize; 2],
    pub infidelity_2q: f64,
}

impl Edge {
    pub fn new(u: usize, v: usize, infidelity_2q: f64) -> Self {
        Self {
            qubits: [u, v],
            infidelity_2q,
        }
    }

    pub fn touches(&self, q: usize) -> bool {
        self.qubits.contains(&q)
    }

    pub fn joins(&self, a: usize, b: usize) -> bool {
        (self.qubits[0] == a && self.qubits[1] == b) || (self.qubits[0] == b && self.qubits[1] == a)
    }
}

#[derive(Serialize, Deserialize)]
struct DeviceJson {
    name: String,
    num_qubits: usize,
    edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    readout_error: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    infidelity_1q: Option<f64>,
}

/// Undirected, connected coupling graph. Qubit 0 is physical qubit `v0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DeviceJson", into = "DeviceJson")]
pub struct DeviceModel {
    name: String,
    num_physical: usize,
    edges: Vec<Edge>,
    readout_error: Option<Vec<f64>>,
    infidelity_1q: Option<f64>,
    adjacency: Vec<Vec<usize>>,
    distances: Vec<Vec<usize>>,
}

impl TryFrom<DeviceJson> for DeviceModel {
    type Error = DeviceError;

    fn try_from(j: DeviceJson) -> Result<Self, DeviceError> {
        let mut dev = Self::new(j.name, j.num_qubits, j.edges)?;
        if let Some(r) = j.readout_error {
            dev = dev.with_readout_error(r)?;
        }
        if let Some(p) = j.infidelity_1q {
            dev = dev.with_infidelity_1q(p)?;
        }
        Ok(dev)
    }
}

impl From<DeviceModel> for DeviceJson {
    fn from(d: DeviceModel) -> Self {
        Self {
            name: d.name,
            num_qubits: d.num_physical,
            edges: d.edges,
            readout_error: d.readout_error,
            infidelity_1q: d.infidelity_1q,
        }
    }
}

fn check_probability(what: impl FnOnce() -> String, value: f64) -> Result<(), DeviceError> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(DeviceError::BadProbability {
            what: what(),
            value,
        })
    }
}

impl DeviceModel {
    pub fn new(
        name: impl Into<String>,
        num_physical: usize,
        edges: Vec<Edge>,
    ) -> Result<Self, DeviceError> {
        if num_physical == 0 {
            return Err(DeviceError::NoQubits);
        }
        let mut adjacency = vec![Vec::new(); num_physical];
        for (i, e) in edges.iter().enumerate() {
            let [u, v] = e.qubits;
            if u == v {
                return Err(DeviceError::SelfLoop(u));
            }
            if u >= num_physical || v >= num_physical {
                return Err(DeviceError::EdgeOutOfRange {
                    u,
                    v,
                    n: num_physical,
                });
            }
            if edges[..i].iter().any(|f| f.joins(u, v)) {
                return Err(DeviceError::DuplicateEdge(u, v));
            }
            check_probability(|| format!("edge ({u}, {v})"), e.infidelity_2q)?;
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        let distances: Vec<Vec<usize>> = (0..num_physical).map(|s| bfs(&adjacency, s)).collect();
        if distances[0].contains(&usize::MAX) {
            return Err(DeviceError::Disconnected);
        }
        Ok(Self {
            name: name.into(),
            num_physical,
            edges,
            readout_error: None,
            infidelity_1q: None,
            adjacency,
            distances,
        })
    }

    pub fn with_readout_error(mut self, r: Vec<f64>) -> Result<Self, DeviceError> {
        if r.len() != self.num_physical {
            return Err(DeviceError::ReadoutLength {
                got: r.len(),
                n: self.num_physical,
            });
        }
        for (q, &p) in r.iter().enumerate() {
            check_probability(|| format!("readout of qubit {q}"), p)?;
        }
        self.readout_error = Some(r);
        Ok(self)
    }

    pub fn with_infidelity_1q(mut self, p: f64) -> Result<Self, DeviceError> {
        check_probability(|| "infidelity_1q".to_string(), p)?;
        self.infidelity_1q = Some(p);
        Ok(self)
    }

    /// Same topology with every 2-qubit infidelity multiplied by `factor`
    /// (clamped below 1).
    pub fn scaled_noise(&self, factor: f64) -> Self {
        let mut d = self.clone();
        for e in &mut d.edges {
            e.infidelity_2q = (e.infidelity_2q * factor).clamp(0.0, 1.0 - 1e-12);
        }
        d
    }

    /// Same topology with one edge's infidelity replaced.
    pub fn with_edge_infidelity(&self, u: usize, v: usize, p: f64) -> Result<Self, DeviceError> {
        check_probability(|| format!("edge ({u}, {v})"), p)?;
        let mut d = self.clone();
        match d.edges.iter_mut().find(|e| e.joins(u, v)) {
            Some(e) => e.infidelity_2q = p,
            None => return Err(DeviceError::EdgeOutOfRange { u, v, n: d.num_physical }),
        }
        Ok(d)
    }

    /// Load from a JSON document.
    pub fn from_json(text: &str) -> Result<Self, DeviceError> {
        let raw: DeviceJson = serde_json::from_str(text)?;
        Self::try_from(raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("device serializes")
    }

    /// A preset name (`fakelagos`, `line:N`) or a path to a JSON file.
    pub fn load(path_or_preset: &str) -> Result<Self, DeviceError> {
        if let Some(d) = Self::preset(path_or_preset) {
            return Ok(d);
        }
        let p = Path::new(path_or_preset);
        if p.exists() {
            return Self::from_json(&std::fs::read_to_string(p)?);
        }
        Err(DeviceError::UnknownPreset(path_or_preset.to_string()))
    }

    pub fn preset(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        match lower.as_str() {
            "fakelagos" | "fake_lagos" | "lagos" => Some(fakelagos_preset()),
            _ => {
                let n: usize = lower.strip_prefix("line:")?.parse().ok()?;
                line_device(n, 0.01).ok()
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_physical(&self) -> usize {
        self.num_physical
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn degree(&self, q: usize) -> usize {
        self.adjacency[q].len()
    }

    pub fn are_coupled(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.iter().position(|e| e.joins(a, b))
    }

    pub fn infidelity_2q(&self, a: usize, b: usize) -> Option<f64> {
        self.edge_index(a, b).map(|i| self.edges[i].infidelity_2q)
    }

    pub fn infidelity_1q(&self) -> f64 {
        self.infidelity_1q.unwrap_or(0.0)
    }

    pub fn readout_error(&self, q: usize) -> f64 {
        self.readout_error.as_ref().map_or(0.0, |r| r[q])
    }

    /// Hop distance between two physical qubits.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        self.distances[a][b]
    }

    /// Whether the subgraph induced by `set` is connected. The empty set is
    /// not.
    pub fn is_connected_subset(&self, set: &[usize]) -> bool {
        let Some(&start) = set.first() else {
            return false;
        };
        if set.iter().any(|&q| q >= self.num_physical) {
            return false;
        }
        let mut seen = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(q) = queue.pop_front() {
            for &n in &self.adjacency[q] {
                if set.contains(&n) && !seen.contains(&n) {
                    seen.push(n);
                    queue.push_back(n);
                }
            }
        }
        seen.len() == set.iter().collect::<std::collections::BTreeSet<_>>().len()
    }

    /// Shortest path from `a` to `b`, both endpoints included; ties go to the
    /// lowest-index neighbour.
    pub fn shortest_path(&self, a: usize, b: usize) -> Vec<usize> {
        let mut path = vec![a];
        let mut cur = a;
        while cur != b {
            cur = *self.adjacency[cur]
                .iter()
                .find(|&&n| self.distances[n][b] + 1 == self.distances[cur][b])
                .expect("connected graph");
            path.push(cur);
        }
        path
    }

    /// Shortest path restricted to qubits in `within`, or `None` when `a` and
    /// `b` are not joined inside it.
    pub fn shortest_path_within(&self, a: usize, b: usize, within: &[usize]) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.num_physical];
        prev[a] = a;
        let mut queue = VecDeque::from([a]);
        while let Some(q) = queue.pop_front() {
            if q == b {
                break;
            }
            for &n in &self.adjacency[q] {
                if prev[n] == usize::MAX && within.contains(&n) {
                    prev[n] = q;
                    queue.push_back(n);
                }
            }
        }
        if prev[b] == usize::MAX {
            return None;
        }
        let mut path = vec![b];
        let mut cur = b;
        while cur != a {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// Non-identity permutations of the physical qubits that preserve the
    /// edge set, in lexicographic order. Brute force; fine up to 8 qubits.
    pub fn automorphisms(&self) -> Vec<Vec<usize>> {
        let n = self.num_physical;
        let mut out = Vec::new();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut used = vec![false; n];
        self.extend_automorphism(&mut perm, &mut used, 0, &mut out);
        out.retain(|p| p.iter().enumerate().any(|(i, &v)| i != v));
        out
    }

    fn extend_automorphism(
        &self,
        perm: &mut Vec<usize>,
        used: &mut [bool],
        k: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        let n = self.num_physical;
        if k == n {
            out.push(perm.clone());
            return;
        }
        for image in 0..n {
            if used[image] || self.degree(image) != self.degree(k) {
                continue;
            }
            let consistent = (0..k).all(|j| self.are_coupled(j, k) == self.are_coupled(perm[j], image));
            if !consistent {
                continue;
            }
            perm[k] = image;
            used[image] = true;
            self.extend_automorphism(perm, used, k + 1, out);
            used[image] = false;
        }
    }
}

fn bfs(adjacency: &[Vec<usize>], s: usize) -> Vec<usize> {
    let mut d = vec![usize::MAX; adjacency.len()];
    d[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(q) = queue.pop_front() {
        for &n in &adjacency[q] {
            if d[n] == usize::MAX {
                d[n] = d[q] + 1;
                queue.push_back(n);
            }
        }
    }
    d
}

/// Seven-qubit H-shaped device. Only the `(0, 1)` value is a published
/// calibration figure; the others are representative values picked so that
/// 4-qubit placements have a strict infidelity order.
pub fn fakelagos_preset() -> DeviceModel {
    DeviceModel::from_json(crate::benchmarks::FAKELAGOS_JSON).expect("bundled device is valid")
}

/// `n` qubits in a line with uniform infidelity.
pub fn line_device(n: usize, infidelity: f64) -> Result<DeviceModel, DeviceError> {
    let edges = (1..n).map(|i| Edge::new(i - 1, i, infidelity)).collect();
    DeviceModel::new(format!("line{n}"), n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fakelagos_shape() {
        let d = fakelagos_preset();
        assert_eq!(d.num_physical(), 7);
        assert_eq!(d.edges().len(), 6);
        assert_eq!(d.infidelity_2q(0, 1), Some(0.00805));
        let mut deg: Vec<usize> = (0..7).map(|q| d.degree(q)).collect();
        deg.sort_unstable();
        assert_eq!(deg, vec![1, 1, 1, 1, 2, 3, 3]);
        assert_eq!(d.degree(1), 3);
        assert_eq!(d.degree(5), 3);
        assert_eq!(d.distance(0, 6), 4);
        assert_eq!(d.shortest_path(0, 2), vec![0, 1, 2]);
    }

    #[test]
    fn rejects_bad_graphs() {
        let j = r#"{"name":"x","num_qubits":2,"edges":[{"qubits":[0,0],"infidelity_2q":0.01}]}"#;
        assert!(matches!(DeviceModel::from_json(j), Err(DeviceError::SelfLoop(0))));
        let j = r#"{"name":"x","num_qubits":3,"edges":[{"qubits":[0,1],"infidelity_2q":0.01}]}"#;
        assert!(matches!(DeviceModel::from_json(j), Err(DeviceError::Disconnected)));
        let j = r#"{"name":"x","num_qubits":2,"edges":[{"qubits":[0,1],"infidelity_2q":0.01},{"qubits":[1,0],"infidelity_2q":0.02}]}"#;
        assert!(matches!(DeviceModel::from_json(j), Err(DeviceError::DuplicateEdge(1, 0))));
        let j = r#"{"name":"x","num_qubits":2,"edges":[{"qubits":[0,1],"infidelity_2q":1.5}]}"#;
        assert!(matches!(DeviceModel::from_json(j), Err(DeviceError::BadProbability { .. })));
        let j = r#"{"name":"x","num_qubits":2}"#;
        assert!(matches!(DeviceModel::from_json(j), Err(DeviceError::Json(_))));
    }

    #[test]
    fn two_qubit_line_is_valid() {
        let d = line_device(2, 0.01).unwrap();
        assert!(d.are_coupled(0, 1));
        assert_eq!(DeviceModel::preset("line:2"), Some(d));
    }

    #[test]
    fn json_round_trip() {
        let d = fakelagos_preset()
            .with_readout_error(vec![0.01; 7])
            .unwrap()
            .with_infidelity_1q(0.0002)
            .unwrap();
        let back = DeviceModel::from_json(&d.to_json()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.readout_error(3), 0.01);
    }

    #[test]
    fn h_graph_automorphisms() {
        // swapping the two arms on each hub, and the mirror through the middle
        let autos = fakelagos_preset().automorphisms();
        assert!(!autos.is_empty());
        assert!(autos.contains(&vec![2, 1, 0, 3, 4, 5, 6]));
        for p in &autos {
            for e in fakelagos_preset().edges() {
                assert!(fakelagos_preset().are_coupled(p[e.qubits[0]], p[e.qubits[1]]));
            }
        }
    }

    #[test]
    fn restricted_paths() {
        let d = fakelagos_preset();
        assert_eq!(d.shortest_path_within(0, 5, &[0, 1, 3, 5]), Some(vec![0, 1, 3, 5]));
        assert_eq!(d.shortest_path_within(0, 5, &[0, 1, 5]), None);
        assert!(d.is_connected_subset(&[1, 3, 5, 6]));
        assert!(!d.is_connected_subset(&[0, 2, 4]));
    }
}
