//! SWAP routing, critical-path analysis and stage-3 X-pair insertion.

use thiserror::Error;

use crate::circuit::{Circuit, CircuitDag, CircuitError, Gate, GateKind, GateTag};
use crate::device::DeviceModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouteError {
    #[error("circuit uses {got} qubits but the device has {available}")]
    TooWide { got: usize, available: usize },
    #[error("qubits {0} and {1} are not connected inside the routing region")]
    Unreachable(usize, usize),
    #[error(
        "signature stage3 asks for {requested} X pairs but only {available} SWAPs lie off the critical path"
    )]
    SignatureTooLong { requested: usize, available: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutedCircuit {
    /// Circuit over physical qubits. Inserted SWAPs are tagged
    /// [`GateTag::RoutingSwap`].
    pub circuit: Circuit,
    pub swap_count: usize,
    /// Positions of SWAP gates that lie on no longest path, ascending.
    pub noncritical_swaps: Vec<usize>,
    /// `final_layout[q]` is where the state that started on qubit `q` ends.
    pub final_layout: Vec<usize>,
}

impl RoutedCircuit {
    pub fn depth(&self) -> usize {
        self.circuit.depth()
    }
}

/// Depth and per-gate membership in the union of all longest paths.
pub fn critical_path(c: &Circuit) -> (usize, Vec<bool>) {
    let dag = CircuitDag::build(c);
    (dag.depth(), dag.critical_nodes())
}

/// SWAP positions off every critical path.
pub fn noncritical_swaps(c: &Circuit) -> Vec<usize> {
    let (_, crit) = critical_path(c);
    c.gates()
        .iter()
        .enumerate()
        .filter(|(i, g)| matches!(g.kind, GateKind::Swap) && !crit[*i])
        .map(|(i, _)| i)
        .collect()
}

/// Routes over the whole device.
pub fn route(placed: &Circuit, dev: &DeviceModel) -> Result<RoutedCircuit, RouteError> {
    let all: Vec<usize> = (0..dev.num_physical()).collect();
    route_within(placed, dev, &all)
}

/// Greedy front-layer router confined to the physical qubits in `region`.
///
/// Each step picks the SWAP (over region edges, lowest edge index on ties)
/// that minimises the summed distance of the blocked front-layer 2-qubit
/// gates. When no SWAP strictly lowers that sum, the first blocked gate is
/// walked along a shortest path until it can run.
pub fn route_within(
    placed: &Circuit,
    dev: &DeviceModel,
    region: &[usize],
) -> Result<RoutedCircuit, RouteError> {
    let n = dev.num_physical();
    if placed.num_qubits() > n {
        return Err(RouteError::TooWide {
            got: placed.num_qubits(),
            available: n,
        });
    }
    let mut in_region = vec![false; n];
    for &q in region {
        in_region[q] = true;
    }
    let dist = region_distances(dev, &in_region);
    let mut out = Circuit::with_clbits(n, placed.num_clbits())?;
    out.name = placed.name.clone();
    // layout[v]: physical home of virtual qubit v; occupant is its inverse
    let mut layout: Vec<usize> = (0..n).collect();
    let mut occupant: Vec<usize> = (0..n).collect();

    let gates = placed.gates();
    let mut queues: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, g) in gates.iter().enumerate() {
        for &q in &g.qubits {
            queues[q].push(i);
        }
    }
    let mut head = vec![0usize; n];
    let mut done = vec![false; gates.len()];
    let mut remaining = gates.len();
    let mut swaps = 0;

    let ready = |i: usize, head: &[usize], queues: &[Vec<usize>]| {
        gates[i]
            .qubits
            .iter()
            .all(|&q| queues[q].get(head[q]) == Some(&i))
    };
    let edges: Vec<(usize, usize)> = dev
        .edges()
        .iter()
        .map(|e| (e.qubits[0], e.qubits[1]))
        .filter(|&(a, b)| in_region[a] && in_region[b])
        .collect();

    while remaining > 0 {
        let mut progressed = true;
        while progressed {
            progressed = false;
            for q in 0..n {
                let Some(&i) = queues[q].get(head[q]) else {
                    continue;
                };
                if done[i] || !ready(i, &head, &queues) {
                    continue;
                }
                let g = &gates[i];
                if g.is_two_qubit() && dist[layout[g.qubits[0]]][layout[g.qubits[1]]] != 1 {
                    continue;
                }
                out.push(g.remapped(|v| layout[v]))?;
                done[i] = true;
                remaining -= 1;
                for &v in &g.qubits {
                    head[v] += 1;
                }
                progressed = true;
            }
        }
        if remaining == 0 {
            break;
        }
        let mut front: Vec<usize> = (0..n)
            .filter_map(|q| queues[q].get(head[q]).copied())
            .filter(|&i| ready(i, &head, &queues))
            .collect();
        front.sort_unstable();
        front.dedup();
        let blocked: Vec<(usize, usize)> = front
            .iter()
            .map(|&i| (gates[i].qubits[0], gates[i].qubits[1]))
            .collect();
        for &(a, b) in &blocked {
            if dist[layout[a]][layout[b]] == usize::MAX {
                return Err(RouteError::Unreachable(layout[a], layout[b]));
            }
        }
        let cost = |layout: &[usize]| -> usize {
            blocked
                .iter()
                .map(|&(a, b)| dist[layout[a]][layout[b]])
                .sum()
        };
        let current = cost(&layout);
        let touched: Vec<usize> = blocked
            .iter()
            .flat_map(|&(a, b)| [layout[a], layout[b]])
            .collect();
        let mut best: Option<(usize, (usize, usize))> = None;
        for &(p, q) in &edges {
            if !touched.contains(&p) && !touched.contains(&q) {
                continue;
            }
            let mut trial = layout.clone();
            trial.swap(occupant[p], occupant[q]);
            let c = cost(&trial);
            if best.is_none_or(|(bc, _)| c < bc) {
                best = Some((c, (p, q)));
            }
        }
        let chosen: Vec<(usize, usize)> = match best {
            Some((c, pq)) if c < current => vec![pq],
            _ => {
                let (a, b) = blocked[0];
                let path = region_path(dev, &in_region, layout[a], layout[b])
                    .ok_or(RouteError::Unreachable(layout[a], layout[b]))?;
                path.windows(2)
                    .take(path.len() - 2)
                    .map(|w| (w[0], w[1]))
                    .collect()
            }
        };
        for (p, q) in chosen {
            out.push(Gate::swap(p, q).with_tag(GateTag::RoutingSwap))?;
            let (vp, vq) = (occupant[p], occupant[q]);
            layout.swap(vp, vq);
            occupant.swap(p, q);
            swaps += 1;
        }
    }
    let noncritical = noncritical_swaps(&out);
    Ok(RoutedCircuit {
        circuit: out,
        swap_count: swaps,
        noncritical_swaps: noncritical,
        final_layout: layout,
    })
}

fn region_distances(dev: &DeviceModel, in_region: &[bool]) -> Vec<Vec<usize>> {
    let n = dev.num_physical();
    let mut dist = vec![vec![usize::MAX; n]; n];
    for s in 0..n {
        dist[s][s] = 0;
        if !in_region[s] {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(q) = queue.pop_front() {
            for &m in dev.neighbors(q) {
                if in_region[m] && dist[s][m] == usize::MAX {
                    dist[s][m] = dist[s][q] + 1;
                    queue.push_back(m);
                }
            }
        }
    }
    dist
}

fn region_path(dev: &DeviceModel, in_region: &[bool], a: usize, b: usize) -> Option<Vec<usize>> {
    let region: Vec<usize> = (0..dev.num_physical()).filter(|&q| in_region[q]).collect();
    dev.shortest_path_within(a, b, &region)
}

/// Wraps the SWAP at `pos` with `X(a)` before and `X(b)` after, which
/// cancel through the exchange.
fn wrap_swap(c: &mut Circuit, pos: usize) -> Result<(), CircuitError> {
    let (a, b) = (c.gates()[pos].qubits[0], c.gates()[pos].qubits[1]);
    c.insert(pos + 1, Gate::x(b).with_tag(GateTag::WatermarkX))?;
    c.insert(pos, Gate::x(a).with_tag(GateTag::WatermarkX))?;
    Ok(())
}

/// Inserts `e_count` self-cancelling X pairs. Pairs go one at a time on the
/// first unused SWAP that is off the critical path of the circuit as it
/// stands; if none is left the original non-critical list is used.
pub fn embed_stage3(rc: &RoutedCircuit, e_count: usize) -> Result<Circuit, RouteError> {
    let available = rc.noncritical_swaps.len();
    if e_count > available {
        return Err(RouteError::SignatureTooLong {
            requested: e_count,
            available,
        });
    }
    let mut c = rc.circuit.clone();
    // origin[i]: index in rc.circuit of gate i, None for inserted X gates
    let mut origin: Vec<Option<usize>> = (0..c.len()).map(Some).collect();
    let mut used: Vec<usize> = Vec::new();
    for _ in 0..e_count {
        let (_, crit) = critical_path(&c);
        let pick = (0..c.len())
            .find(|&i| {
                matches!(c.gates()[i].kind, GateKind::Swap)
                    && !crit[i]
                    && origin[i].is_some_and(|o| !used.contains(&o))
            })
            .or_else(|| {
                let o = *rc.noncritical_swaps.iter().find(|o| !used.contains(o))?;
                origin.iter().position(|&x| x == Some(o))
            })
            .expect("e_count bounded by the non-critical list");
        used.push(origin[pick].unwrap());
        wrap_swap(&mut c, pick)?;
        origin.insert(pick + 1, None);
        origin.insert(pick, None);
    }
    Ok(c)
}

/// Number of SWAPs wrapped by a matching X pair: X on one SWAP qubit right
/// before it and X on the other right after it, on the per-qubit gate
/// chains. Gate tags are ignored and every X is used at most once.
pub fn extract_stage3(c: &Circuit) -> usize {
    let gates = c.gates();
    let mut chains: Vec<Vec<usize>> = vec![Vec::new(); c.num_qubits()];
    let mut pos_in_chain: Vec<Vec<usize>> = vec![Vec::new(); gates.len()];
    for (i, g) in gates.iter().enumerate() {
        for &q in &g.qubits {
            pos_in_chain[i].push(chains[q].len());
            chains[q].push(i);
        }
    }
    let neighbour = |i: usize, slot: usize, q: usize, step: isize| -> Option<usize> {
        let p = pos_in_chain[i][slot] as isize + step;
        if p < 0 {
            return None;
        }
        chains[q].get(p as usize).copied()
    };
    let mut consumed = vec![false; gates.len()];
    let mut count = 0;
    for (i, g) in gates.iter().enumerate() {
        if !matches!(g.kind, GateKind::Swap) {
            continue;
        }
        let is_free_x = |j: Option<usize>, consumed: &[bool]| {
            j.filter(|&j| matches!(gates[j].kind, GateKind::X) && !consumed[j])
        };
        let (a, b) = (g.qubits[0], g.qubits[1]);
        for (before_slot, before_q, after_slot, after_q) in [(0, a, 1, b), (1, b, 0, a)] {
            let pre = is_free_x(neighbour(i, before_slot, before_q, -1), &consumed);
            let post = is_free_x(neighbour(i, after_slot, after_q, 1), &consumed);
            if let (Some(x0), Some(x1)) = (pre, post) {
                consumed[x0] = true;
                consumed[x1] = true;
                count += 1;
                break;
            }
        }
    }
    count
}

/// Applies `final_layout` to a state index: the bit of qubit `q` moves to
/// `final_layout[q]`.
pub fn permute_index(index: usize, final_layout: &[usize]) -> usize {
    final_layout
        .iter()
        .enumerate()
        .filter(|(q, _)| index >> q & 1 == 1)
        .map(|(_, &p)| 1 << p)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{fakelagos_preset, line_device};
    use crate::linalg::circuit_unitary;

    #[test]
    fn coupled_gates_need_no_swaps() {
        let d = fakelagos_preset();
        let c = Circuit::from_gates(7, [Gate::cx(0, 1), Gate::cx(1, 3), Gate::cx(5, 6)]).unwrap();
        let rc = route(&c, &d).unwrap();
        assert_eq!(rc.swap_count, 0);
        assert_eq!(rc.circuit.gates(), c.gates());
    }

    #[test]
    fn distance_two_needs_one_swap() {
        let d = fakelagos_preset();
        let c = Circuit::from_gates(7, [Gate::cx(0, 2)]).unwrap();
        let rc = route(&c, &d).unwrap();
        assert_eq!(rc.swap_count, 1);
        assert_eq!(rc.circuit.len(), 2);
        assert!(matches!(rc.circuit.gates()[0].kind, GateKind::Swap));
        assert_eq!(rc.circuit.gates()[0].tag, GateTag::RoutingSwap);
        let g = &rc.circuit.gates()[1];
        assert!(d.are_coupled(g.qubits[0], g.qubits[1]));
    }

    #[test]
    fn routed_unitary_matches_up_to_layout() {
        let d = line_device(4, 0.01).unwrap();
        let c = Circuit::from_gates(
            4,
            [Gate::cx(0, 3), Gate::u3(1, 0.4, 0.1, 0.2), Gate::cx(3, 1), Gate::cx(2, 0)],
        )
        .unwrap();
        let rc = route(&c, &d).unwrap();
        for g in rc.circuit.gates() {
            if g.is_two_qubit() {
                assert!(d.are_coupled(g.qubits[0], g.qubits[1]));
            }
        }
        let ur = circuit_unitary(&rc.circuit).unwrap();
        let up = circuit_unitary(&c).unwrap();
        for col in 0..16 {
            for row in 0..16 {
                let expect = up.get(row, col);
                let got = ur.get(permute_index(row, &rc.final_layout), col);
                assert!((expect - got).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn restricted_routing_stays_in_region() {
        let d = fakelagos_preset();
        let region = [1, 3, 5, 6];
        let c = Circuit::from_gates(7, [Gate::cx(1, 6), Gate::cx(3, 6), Gate::cx(1, 5)]).unwrap();
        let rc = route_within(&c, &d, &region).unwrap();
        assert!(rc.circuit.active_qubits().iter().all(|q| region.contains(q)));
    }

    fn x_pair_fixture() -> RoutedCircuit {
        // swap on (1,2) has slack next to a long chain on qubit 0
        let mut gates = vec![Gate::x(0); 6];
        gates.push(Gate::swap(1, 2).with_tag(GateTag::RoutingSwap));
        gates.push(Gate::cx(0, 1));
        let c = Circuit::from_gates(3, gates).unwrap();
        let noncritical = noncritical_swaps(&c);
        RoutedCircuit {
            swap_count: 1,
            noncritical_swaps: noncritical,
            final_layout: vec![0, 2, 1],
            circuit: c,
        }
    }

    #[test]
    fn x_pair_keeps_unitary_and_depth() {
        let rc = x_pair_fixture();
        assert_eq!(rc.noncritical_swaps, vec![6]);
        let wm = embed_stage3(&rc, 1).unwrap();
        assert_eq!(wm.depth(), rc.depth());
        assert_eq!(wm.count_gates(crate::circuit::CountKind::X), 8);
        let a = circuit_unitary(&wm).unwrap();
        let b = circuit_unitary(&rc.circuit).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
        assert_eq!(extract_stage3(&wm), 1);
        assert_eq!(extract_stage3(&rc.circuit), 0);
        assert_eq!(embed_stage3(&rc, 0).unwrap(), rc.circuit);
        assert!(matches!(
            embed_stage3(&rc, 2),
            Err(RouteError::SignatureTooLong { requested: 2, available: 1 })
        ));
    }

    #[test]
    fn lone_x_is_not_a_pair() {
        let c = Circuit::from_gates(2, [Gate::x(0), Gate::swap(0, 1), Gate::u3(1, 0.1, 0.0, 0.0)])
            .unwrap();
        assert_eq!(extract_stage3(&c), 0);
        let flipped = Circuit::from_gates(2, [Gate::x(1), Gate::swap(0, 1), Gate::x(0)]).unwrap();
        assert_eq!(extract_stage3(&flipped), 1);
    }

    #[test]
    fn serial_chain_is_all_critical() {
        let c = Circuit::from_gates(1, vec![Gate::x(0); 4]).unwrap();
        let (len, crit) = critical_path(&c);
        assert_eq!(len, 4);
        assert!(crit.iter().all(|&b| b));
    }
}
