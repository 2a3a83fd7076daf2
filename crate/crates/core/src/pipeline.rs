//! The three embedding stages chained end to end.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, CountKind, Gate, GateKind};
use crate::device::DeviceModel;
use crate::mapper::{Mapping, MappingError, MappingTree};
use crate::metrics::{account_constraints, BlockReport, CoincidenceProbabilities, MetricsError, WatermarkReport};
use crate::noise::{ideal_output, pst_against, NoiseError, NoiseSpec};
use crate::partition::{assemble, scan_partition, Partition, PartitionError};
use crate::route::{embed_stage3, route_within, RouteError, RoutedCircuit};
use crate::signature::{SignatureMessage, Stage1Symbol};
use crate::synth::{
    embed_stage1_on, embed_stage1_within, synthesize_on, synthesize_within, BlockSynthesisResult, SynthError,
    SynthesisConfig, Template,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("partition: {0}")]
    Partition(#[from] PartitionError),
    #[error("stage 1, block {block}: {source}")]
    Synthesis { block: usize, source: SynthError },
    #[error(
        "stage 1: signature has {got} symbols but the circuit splits into {blocks} blocks; \
         give exactly {blocks} symbols or none"
    )]
    Stage1Length { got: usize, blocks: usize },
    #[error("stage 2: {0}")]
    Mapping(#[from] MappingError),
    #[error("stage 3: {0}")]
    Route(#[from] RouteError),
    #[error("simulation: {0}")]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("measurement on qubit {qubit} is followed by gate {index}; only terminal measures are supported")]
    MidCircuitMeasure { qubit: usize, index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub synthesis: SynthesisConfig,
    pub block_size: usize,
    /// Distance target for non-watermarked blocks.
    pub baseline_epsilon: f64,
    pub shots: usize,
    pub coincidence: CoincidenceProbabilities,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            synthesis: SynthesisConfig {
                prune: true,
                ..SynthesisConfig::default()
            },
            block_size: 3,
            baseline_epsilon: 1e-10,
            shots: NoiseSpec::DEFAULT_SHOTS,
            coincidence: CoincidenceProbabilities::default(),
        }
    }
}

impl PipelineConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.synthesis.seed = seed;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.synthesis.epsilon = epsilon;
        self
    }

    pub fn with_shots(mut self, shots: usize) -> Self {
        self.shots = shots;
        self
    }

    /// Synthesis settings of block `index`.
    pub fn block_config(&self, index: usize) -> SynthesisConfig {
        let mut c = self.synthesis.clone();
        c.seed = c.seed.wrapping_add(index as u64);
        c
    }
}

/// Stages 1 and 2 plus routing, before any X pair goes in.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub signature: SignatureMessage,
    pub blocks: Vec<BlockSynthesisResult>,
    /// Assembled logical circuit with seam barriers.
    pub logical: Circuit,
    pub mapping: Mapping,
    pub mapping_code: String,
    pub routed: RoutedCircuit,
    pub synthesis_ms: u64,
}

impl Prepared {
    /// Largest stage-3 count this routing can carry.
    pub fn stage3_capacity(&self) -> usize {
        self.routed.noncritical_swaps.len()
    }
}

#[derive(Debug, Clone)]
pub struct Embedded {
    /// Physical circuit with terminal measures.
    pub circuit: Circuit,
    pub report: WatermarkReport,
}

type CacheKey = (usize, Option<Stage1Symbol>, Option<Vec<(usize, usize)>>);

pub struct Pipeline {
    source: Circuit,
    partition: Partition,
    reads: Vec<(usize, usize)>,
    num_clbits: usize,
    device: DeviceModel,
    config: PipelineConfig,
    tree: MappingTree,
    expected: String,
    cache: Mutex<HashMap<CacheKey, (BlockSynthesisResult, Duration)>>,
}

/// Unitary body and terminal `(qubit, clbit)` reads. A circuit without
/// measures reads every qubit into the clbit of the same index.
fn split_measures(c: &Circuit) -> Result<(Circuit, Vec<(usize, usize)>, usize), PipelineError> {
    let mut measured: Vec<Option<usize>> = vec![None; c.num_qubits()];
    let mut reads = Vec::new();
    for (i, g) in c.gates().iter().enumerate() {
        if let GateKind::Measure { clbit } = g.kind {
            measured[g.qubits[0]] = Some(i);
            reads.push((g.qubits[0], clbit));
        } else if !g.is_barrier() {
            if let Some(&q) = g.qubits.iter().find(|&&q| measured[q].is_some()) {
                return Err(PipelineError::MidCircuitMeasure { qubit: q, index: i });
            }
        }
    }
    let body = c.filtered(|g| !matches!(g.kind, GateKind::Measure { .. }));
    if reads.is_empty() {
        let n = c.num_qubits();
        return Ok((body, (0..n).map(|q| (q, q)).collect(), n));
    }
    Ok((body, reads, c.num_clbits()))
}

impl Pipeline {
    pub fn new(source: &Circuit, device: &DeviceModel, config: PipelineConfig) -> Result<Self, PipelineError> {
        config
            .synthesis
            .validate()
            .map_err(|source| PipelineError::Synthesis { block: 0, source })?;
        let (body, reads, num_clbits) = split_measures(source)?;
        let partition = scan_partition(&body, config.block_size)?;
        let tree = MappingTree::for_device(source.num_qubits(), device)?;
        let mut measured = body.clone();
        measured.set_num_clbits(num_clbits);
        measured.extend(reads.iter().map(|&(q, cl)| Gate::measure(q, cl)))?;
        let expected = ideal_output(&measured)?;
        Ok(Self {
            source: source.clone(),
            partition,
            reads,
            num_clbits,
            device: device.clone(),
            config,
            tree,
            expected,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn source(&self) -> &Circuit {
        &self.source
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn device(&self) -> &DeviceModel {
        &self.device
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn tree(&self) -> &MappingTree {
        &self.tree
    }

    pub fn num_blocks(&self) -> usize {
        self.partition.len()
    }

    /// Noiseless output of the source circuit, highest clbit first.
    pub fn expected_output(&self) -> &str {
        &self.expected
    }

    /// Local pairs of block `index` that are coupled once `mapping` places
    /// it, or `None` when those qubits do not form a connected region.
    pub fn block_coupling(&self, index: usize, mapping: &Mapping) -> Option<Vec<(usize, usize)>> {
        let qubits = &self.partition.blocks[index].qubits;
        let physical: Vec<usize> = qubits.iter().map(|&q| mapping.assignment[q]).collect();
        if !self.device.is_connected_subset(&physical) {
            return None;
        }
        let mut out = Vec::new();
        for a in 0..physical.len() {
            for b in a + 1..physical.len() {
                if self.device.are_coupled(physical[a], physical[b]) {
                    out.push((a, b));
                }
            }
        }
        Some(out)
    }

    /// Synthesis of block `index`, watermarked with `symbol` or plain, for
    /// the placement `mapping`.
    pub fn block(
        &self,
        index: usize,
        symbol: Option<Stage1Symbol>,
        mapping: &Mapping,
    ) -> Result<(BlockSynthesisResult, Duration), PipelineError> {
        let key = (index, symbol, self.block_coupling(index, mapping));
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let start = Instant::now();
        let r = self
            .synthesize_block(index, symbol, key.2.clone())
            .map_err(|source| PipelineError::Synthesis { block: index, source })?;
        let entry = (r, start.elapsed());
        self.cache.lock().expect("cache lock").insert(key, entry.clone());
        Ok(entry)
    }

    fn synthesize_block(
        &self,
        index: usize,
        symbol: Option<Stage1Symbol>,
        coupling: Option<Vec<(usize, usize)>>,
    ) -> Result<BlockSynthesisResult, SynthError> {
        let block = &self.partition.blocks[index];
        let local = block
            .local_circuit()
            .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
        let u = block.target_unitary().map_err(|e| match e {
            PartitionError::Linalg(l) => SynthError::Linalg(l),
            other => SynthError::InvalidConfig(other.to_string()),
        })?;
        let mut cfg = self.config.block_config(index);
        cfg.coupling = coupling;
        let src_cnots = local.count_gates(CountKind::Cnot);
        let (template, params) =
            Template::from_circuit(&local).ok_or_else(|| SynthError::InvalidConfig("block is not U3/CNOT".into()))?;
        match symbol {
            None => {
                let budget = src_cnots.saturating_sub(1).min(cfg.max_cnot_layers);
                if src_cnots > 0 {
                    if let Ok(r) = synthesize_within(&u, &cfg, self.config.baseline_epsilon, budget) {
                        return Ok(r);
                    }
                }
                Ok(synthesize_on(&u, template, params, self.config.baseline_epsilon, &cfg)?)
            }
            Some(sym) => {
                let layers = src_cnots.min(cfg.max_cnot_layers);
                embed_stage1_within(&u, sym, &cfg, layers)
                    .or_else(|_| embed_stage1_on(&u, template, params, sym, &cfg))
            }
        }
    }

    /// Runs stage 1, stage 2 and routing for `signature` (its stage-3 count
    /// is ignored here).
    pub fn prepare(&self, signature: &SignatureMessage) -> Result<Prepared, PipelineError> {
        let symbols = signature.stage1_symbols();
        if !symbols.is_empty() && symbols.len() != self.num_blocks() {
            return Err(PipelineError::Stage1Length {
                got: symbols.len(),
                blocks: self.num_blocks(),
            });
        }
        let mapping = self.tree.lookup(&signature.stage2)?.clone();
        let mut blocks = Vec::with_capacity(self.num_blocks());
        let mut elapsed = Duration::ZERO;
        for i in 0..self.num_blocks() {
            let (r, t) = self.block(i, symbols.get(i).copied(), &mapping)?;
            elapsed += t;
            blocks.push(r);
        }
        let circuits: Vec<Circuit> = blocks.iter().map(|b| b.circuit.clone()).collect();
        let mut logical = assemble(&self.partition, &circuits)?;
        logical.name = self.source.name.clone();
        let mapping_code = self.tree.code_of_set(&mapping.physical_set())?.to_string();
        let placed = logical.relabeled(self.device.num_physical(), &mapping.assignment)?;
        let routed = route_within(&placed, &self.device, &mapping.physical_set())?;
        Ok(Prepared {
            signature: signature.clone(),
            blocks,
            logical,
            mapping,
            mapping_code,
            routed,
            synthesis_ms: elapsed.as_millis() as u64,
        })
    }

    /// Stage 3 with `e_count` pairs, terminal measures, PST and the report.
    pub fn finish(&self, prepared: &Prepared, e_count: usize) -> Result<Embedded, PipelineError> {
        let mut circuit = embed_stage3(&prepared.routed, e_count)?;
        circuit.set_num_clbits(self.num_clbits);
        for &(q, cl) in &self.reads {
            let physical = prepared.routed.final_layout[prepared.mapping.assignment[q]];
            circuit.push(Gate::measure(physical, cl))?;
        }
        let mut signature = prepared.signature.clone();
        signature.stage3_e = e_count;
        let noise = NoiseSpec::from_device(&self.device, self.config.shots, self.config.synthesis.seed);
        let pst = pst_against(&circuit, &noise, &self.expected)?;
        let ppa = account_constraints(&signature, [0; 3], self.config.coincidence).ppa()?;
        let watermarked = !signature.stage1.is_empty();
        let blocks = prepared
            .blocks
            .iter()
            .zip(signature.stage1_symbols().into_iter().map(Some).chain(std::iter::repeat(None)))
            .map(|(b, sym)| BlockReport {
                delta: b.delta,
                digit: b.leading_digit.unwrap_or(0),
                symbol: if watermarked { sym } else { None },
            })
            .collect();
        let report = WatermarkReport {
            benchmark: self.source.name.clone(),
            device: self.device.name().to_string(),
            signature,
            blocks,
            mapping_code: prepared.mapping_code.clone(),
            depth: circuit.depth(),
            cnot: circuit.cnot_count(true),
            pst,
            ppa,
            synthesis_ms: prepared.synthesis_ms,
            verification: None,
        };
        Ok(Embedded { circuit, report })
    }

    pub fn embed(&self, signature: &SignatureMessage) -> Result<Embedded, PipelineError> {
        let prepared = self.prepare(signature)?;
        self.finish(&prepared, signature.stage3_e)
    }

    /// Uniformly random feasible signature: one symbol per block, a random
    /// leaf code and an `e` count up to what the resulting routing offers.
    pub fn random_signature<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(SignatureMessage, Prepared), PipelineError> {
        let stage1: String = (0..self.num_blocks())
            .map(|_| if rng.random::<bool>() { 'a' } else { 'b' })
            .collect();
        let stage2 = self.tree.codes[rng.random_range(0..self.tree.codes.len())].clone();
        let mut sig = SignatureMessage::new(&stage1, &stage2, 0).expect("valid alphabet");
        let prepared = self.prepare(&sig)?;
        sig.stage3_e = rng.random_range(0..=prepared.stage3_capacity());
        Ok((sig, prepared))
    }

    /// The non-watermarked flow: plain synthesis, first mapping, no pairs.
    pub fn baseline(&self) -> Result<Embedded, PipelineError> {
        self.embed(&SignatureMessage::empty())
    }
}
