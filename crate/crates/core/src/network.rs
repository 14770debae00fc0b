//! Range-limited broadcast between robots and fusion of what they share.

use crate::error::CodecError;
use crate::geom::Point2;
use crate::grid::{Cell, OccupancyGrid};
use crate::partition::PowerPointSet;
use crate::topo_graph::{merge_graphs, Certainty, HybridTopoGraph, NodeId, NodeKind, TopoNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

const MAGIC: &[u8; 3] = b"TVM";
pub const CODEC_VERSION: u8 = 1;

const TAG_GRID: u8 = 1;
const TAG_GRAPH: u8 = 2;
const TAG_POWER: u8 = 3;
const TAG_LOAD: u8 = 4;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Payload {
    pub grid: Option<OccupancyGrid>,
    pub graph: Option<HybridTopoGraph>,
    pub power_points: Option<PowerPointSet>,
    pub load: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub sender: u32,
    pub tick: u64,
    pub payload: Payload,
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() < n {
            return Err(CodecError::Truncated);
        }
        let (a, b) = self.buf.split_at(n);
        self.buf = b;
        Ok(a)
    }
    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn done(&self) -> Result<(), CodecError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(CodecError::Malformed("trailing bytes in record".into()))
        }
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}
fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}
fn put_f64(out: &mut Vec<u8>, v: f64) {
    put_u64(out, v.to_bits());
}

fn record(out: &mut Vec<u8>, tag: u8, body: Vec<u8>) {
    out.push(tag);
    put_u32(out, body.len() as u32);
    out.extend_from_slice(&body);
}

fn encode_grid(g: &OccupancyGrid) -> Vec<u8> {
    let mut b = Vec::with_capacity(16 + g.len());
    put_u32(&mut b, g.width as u32);
    put_u32(&mut b, g.height as u32);
    put_f64(&mut b, g.resolution);
    b.extend(g.cells().iter().map(|c| match c {
        Cell::Free => 0u8,
        Cell::Occupied => 1,
        Cell::Unknown => 2,
    }));
    b
}

fn decode_grid(r: &mut Reader) -> Result<OccupancyGrid, CodecError> {
    let w = r.u32()? as usize;
    let h = r.u32()? as usize;
    let res = r.f64()?;
    let raw = r.take(
        w.checked_mul(h)
            .ok_or_else(|| CodecError::Malformed("grid size".into()))?,
    )?;
    let cells = raw
        .iter()
        .map(|b| match b {
            0 => Ok(Cell::Free),
            1 => Ok(Cell::Occupied),
            2 => Ok(Cell::Unknown),
            x => Err(CodecError::Malformed(format!("cell value {x}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    OccupancyGrid::from_cells(w, h, res, cells)
        .ok_or_else(|| CodecError::Malformed("grid size".into()))
}

fn encode_graph(g: &HybridTopoGraph) -> Vec<u8> {
    let mut b = Vec::new();
    put_u32(&mut b, g.node_count() as u32);
    for n in g.nodes() {
        put_u64(&mut b, n.id.0);
        b.push(match n.kind {
            NodeKind::Gv => 0,
            NodeKind::Frontier => 1,
            NodeKind::Coverage => 2,
        });
        b.push(u8::from(n.dual));
        put_f64(&mut b, n.pos.x);
        put_f64(&mut b, n.pos.y);
    }
    put_u32(&mut b, g.edge_count() as u32);
    for e in g.edges() {
        put_u64(&mut b, e.a.0);
        put_u64(&mut b, e.b.0);
        b.push(match e.certainty {
            Certainty::Deterministic => 0,
            Certainty::Uncertain => 1,
        });
    }
    b
}

fn decode_graph(r: &mut Reader) -> Result<HybridTopoGraph, CodecError> {
    let bad = |e: crate::error::GraphError| CodecError::Malformed(e.to_string());
    let mut g = HybridTopoGraph::new();
    for _ in 0..r.u32()? {
        let id = NodeId(r.u64()?);
        let kind = match r.u8()? {
            0 => NodeKind::Gv,
            1 => NodeKind::Frontier,
            2 => NodeKind::Coverage,
            k => return Err(CodecError::Malformed(format!("node kind {k}"))),
        };
        let dual = r.u8()? != 0;
        let pos = Point2::new(r.f64()?, r.f64()?);
        let mut n = TopoNode::new(id, kind, pos);
        n.dual = dual;
        g.add_node(n).map_err(bad)?;
    }
    for _ in 0..r.u32()? {
        let a = NodeId(r.u64()?);
        let b = NodeId(r.u64()?);
        let c = match r.u8()? {
            0 => Certainty::Deterministic,
            1 => Certainty::Uncertain,
            k => return Err(CodecError::Malformed(format!("certainty {k}"))),
        };
        g.add_edge(a, b, c).map_err(bad)?;
    }
    Ok(g)
}

fn encode_power(pp: &PowerPointSet) -> Vec<u8> {
    let mut b = Vec::new();
    put_u32(&mut b, pp.len() as u32);
    for &(robot, node) in &pp.centers {
        put_u32(&mut b, robot);
        put_u64(&mut b, node.0);
    }
    for row in pp.weights() {
        for &w in row {
            put_f64(&mut b, w);
        }
    }
    b
}

fn decode_power(r: &mut Reader) -> Result<PowerPointSet, CodecError> {
    let n = r.u32()? as usize;
    let mut centers = Vec::new();
    for _ in 0..n {
        centers.push((r.u32()?, NodeId(r.u64()?)));
    }
    let mut weights = vec![vec![0.0; n]; n];
    for row in &mut weights {
        for w in row.iter_mut() {
            *w = r.f64()?;
        }
    }
    PowerPointSet::with_weights(centers, weights).map_err(|e| CodecError::Malformed(e.to_string()))
}

impl Message {
    /// `TVM`, version byte, sender, tick, then `(tag, u32 length, body)` records.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(CODEC_VERSION);
        put_u32(&mut out, self.sender);
        put_u64(&mut out, self.tick);
        let p = &self.payload;
        if let Some(g) = &p.grid {
            record(&mut out, TAG_GRID, encode_grid(g));
        }
        if let Some(g) = &p.graph {
            record(&mut out, TAG_GRAPH, encode_graph(g));
        }
        if let Some(pp) = &p.power_points {
            record(&mut out, TAG_POWER, encode_power(pp));
        }
        if let Some(l) = p.load {
            record(&mut out, TAG_LOAD, l.to_bits().to_le_bytes().to_vec());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Message, CodecError> {
        let mut r = Reader { buf: bytes };
        if r.take(3)? != MAGIC {
            return Err(CodecError::Version(0));
        }
        let v = r.u8()?;
        if v != CODEC_VERSION {
            return Err(CodecError::Version(v));
        }
        let sender = r.u32()?;
        let tick = r.u64()?;
        let mut payload = Payload::default();
        while !r.buf.is_empty() {
            let tag = r.u8()?;
            let len = r.u32()? as usize;
            let mut body = Reader { buf: r.take(len)? };
            match tag {
                TAG_GRID => payload.grid = Some(decode_grid(&mut body)?),
                TAG_GRAPH => payload.graph = Some(decode_graph(&mut body)?),
                TAG_POWER => payload.power_points = Some(decode_power(&mut body)?),
                TAG_LOAD => payload.load = Some(body.f64()?),
                t => return Err(CodecError::Tag(t)),
            }
            body.done()?;
        }
        Ok(Message {
            sender,
            tick,
            payload,
        })
    }
}

/// Who can hear whom at one instant. Symmetric, no self loops.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommGraph {
    adj: BTreeMap<u32, BTreeSet<u32>>,
}

impl CommGraph {
    pub fn robots(&self) -> impl Iterator<Item = u32> + '_ {
        self.adj.keys().copied()
    }

    pub fn neighbors_of(&self, id: u32) -> impl Iterator<Item = u32> + '_ {
        self.adj.get(&id).into_iter().flatten().copied()
    }

    pub fn connected(&self, a: u32, b: u32) -> bool {
        self.adj.get(&a).is_some_and(|s| s.contains(&b))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Connected components, each sorted, ordered by lowest id.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &s in self.adj.keys() {
            if !seen.insert(s) {
                continue;
            }
            let mut comp = vec![s];
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for u in self.neighbors_of(v) {
                    if seen.insert(u) {
                        comp.push(u);
                        stack.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// Range graph over robot positions. With `multi_hop`, every robot hears
/// everyone in its connected component.
pub fn neighbors(poses: &[(u32, Point2)], comm_range: f64, multi_hop: bool) -> CommGraph {
    let mut g = CommGraph::default();
    for &(i, _) in poses {
        g.adj.entry(i).or_default();
    }
    for (k, &(i, p)) in poses.iter().enumerate() {
        for &(j, q) in &poses[k + 1..] {
            if i != j && p.dist(q) <= comm_range {
                g.adj.entry(i).or_default().insert(j);
                g.adj.entry(j).or_default().insert(i);
            }
        }
    }
    if multi_hop {
        for comp in g.components() {
            for &i in &comp {
                g.adj
                    .insert(i, comp.iter().copied().filter(|&j| j != i).collect());
            }
        }
    }
    g
}

/// What one robot broadcasts at a comm tick.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotShare {
    pub id: u32,
    pub belief: OccupancyGrid,
    pub graph: HybridTopoGraph,
    pub power_points: Option<PowerPointSet>,
    pub load: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fused {
    pub belief: OccupancyGrid,
    /// Cells that went from unknown to known during fusion.
    pub changed: Vec<usize>,
    pub graph: HybridTopoGraph,
    pub neighbor_power_points: BTreeMap<u32, PowerPointSet>,
    pub neighbor_loads: BTreeMap<u32, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExchangeConfig {
    pub merge_radius: f64,
    /// Chance that one directed delivery is lost. 0 by default.
    pub drop_probability: f64,
    pub seed: u64,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        Self {
            merge_radius: crate::topo_graph::DEFAULT_MERGE_RADIUS,
            drop_probability: 0.0,
            seed: 0,
        }
    }
}

/// Known cells of `theirs` fill unknown cells of `mine`. Returns the filled indices.
pub fn fuse_belief(mine: &mut OccupancyGrid, theirs: &OccupancyGrid) -> Vec<usize> {
    let mut changed = Vec::new();
    for i in 0..mine.len().min(theirs.len()) {
        if mine.at(i) == Cell::Unknown && theirs.at(i) != Cell::Unknown {
            mine.set_at(i, theirs.at(i));
            changed.push(i);
        }
    }
    changed
}

/// One synchronous round: every robot encodes its share, all deliveries
/// happen, then each robot fuses what it received. Returns the fused state
/// per robot (in input order) and the total bytes broadcast.
pub fn exchange_and_fuse(
    shares: &[RobotShare],
    comm: &CommGraph,
    tick: u64,
    cfg: &ExchangeConfig,
) -> (Vec<Fused>, usize) {
    let mut wire: BTreeMap<u32, Vec<u8>> = BTreeMap::new();
    let mut bytes = 0;
    for s in shares {
        if comm.neighbors_of(s.id).next().is_none() {
            continue;
        }
        let msg = Message {
            sender: s.id,
            tick,
            payload: Payload {
                grid: Some(s.belief.clone()),
                graph: Some(s.graph.clone()),
                power_points: s.power_points.clone(),
                load: Some(s.load),
            },
        };
        let enc = msg.encode();
        bytes += enc.len();
        wire.insert(s.id, enc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ tick.wrapping_mul(0x94D0_49BB_1331_11EB));
    let out = shares
        .iter()
        .map(|s| {
            let mut belief = s.belief.clone();
            let mut changed = BTreeSet::new();
            let mut graphs = Vec::new();
            let mut fused = Fused {
                belief: OccupancyGrid::unknown(0, 0, s.belief.resolution),
                changed: Vec::new(),
                graph: HybridTopoGraph::new(),
                neighbor_power_points: BTreeMap::new(),
                neighbor_loads: BTreeMap::new(),
            };
            for j in comm.neighbors_of(s.id) {
                let Some(bytes) = wire.get(&j) else { continue };
                if cfg.drop_probability > 0.0 && rng.gen::<f64>() < cfg.drop_probability {
                    log::debug!("message {j}->{} dropped", s.id);
                    continue;
                }
                let msg = match Message::decode(bytes) {
                    Ok(m) => m,
                    Err(e) => {
                        log::warn!("message from {j} dropped: {e}");
                        continue;
                    }
                };
                if let Some(g) = &msg.payload.grid {
                    changed.extend(fuse_belief(&mut belief, g));
                }
                if let Some(g) = msg.payload.graph {
                    graphs.push(g);
                }
                if let Some(pp) = msg.payload.power_points {
                    fused.neighbor_power_points.insert(j, pp);
                }
                if let Some(l) = msg.payload.load {
                    fused.neighbor_loads.insert(j, l);
                }
            }
            fused.graph = merge_graphs(&s.graph, &graphs, cfg.merge_radius);
            fused.belief = belief;
            fused.changed = changed.into_iter().collect();
            fused
        })
        .collect();
    (out, bytes)
}
