//! The D-level Poisson hierarchy: branching structure, rate trees,
//! observation designs `X(D')`, aggregation, and seeded sampling.
//!
//! Nodes live at depths `0..=D`; depth `d` holds `n_1 * ... * n_d` nodes laid
//! out as depth-indexed flat arrays with mixed-radix addressing, so lookups
//! and sweeps are O(1) and cache-friendly. The observation design `X(D')`
//! carries one independent Poisson count for every node at depth `>= D'`;
//! counts above are identically zero by convention.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poisson::{sample_poisson, stream_rng};

/// Branching structure `(n_1, ..., n_D)` of a depth-`D` hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchySpec {
    branching: Vec<usize>,
}

impl HierarchySpec {
    pub fn new(branching: Vec<usize>) -> Result<Self> {
        if branching.is_empty() {
            return Err(Error::Shape("hierarchy needs depth D >= 1".into()));
        }
        if branching.contains(&0) {
            return Err(Error::Shape("every branching factor must be >= 1".into()));
        }
        Ok(Self { branching })
    }

    /// Depth `D`.
    pub fn depth(&self) -> usize {
        self.branching.len()
    }

    pub fn branching(&self) -> &[usize] {
        &self.branching
    }

    /// Number of nodes at depth `d` (`= n_1 ... n_d`, 1 at the root).
    pub fn level_width(&self, d: usize) -> usize {
        self.branching[..d].iter().product()
    }

    pub fn leaf_count(&self) -> usize {
        self.level_width(self.depth())
    }

    /// Total node count over all depths 0..=D.
    pub fn node_count(&self) -> usize {
        (0..=self.depth()).map(|d| self.level_width(d)).sum()
    }

    /// Parent flat index of node `(d, idx)`, `d >= 1`.
    pub fn parent(&self, d: usize, idx: usize) -> usize {
        idx / self.branching[d - 1]
    }

    /// Flat index range of the children of `(d, idx)` at depth `d + 1`.
    pub fn children(&self, d: usize, idx: usize) -> std::ops::Range<usize> {
        let n = self.branching[d];
        idx * n..(idx + 1) * n
    }

    /// 1-based address digits of node `(d, idx)`.
    pub fn address(&self, d: usize, mut idx: usize) -> Vec<usize> {
        let mut digits = vec![0usize; d];
        for k in (0..d).rev() {
            let n = self.branching[k];
            digits[k] = idx % n + 1;
            idx /= n;
        }
        digits
    }

    /// Flat index of a 1-based address; its length fixes the depth.
    pub fn index_of(&self, address: &[usize]) -> Result<usize> {
        if address.len() > self.depth() {
            return Err(Error::Shape(format!(
                "address depth {} exceeds hierarchy depth {}",
                address.len(),
                self.depth()
            )));
        }
        let mut idx = 0usize;
        for (k, &digit) in address.iter().enumerate() {
            let n = self.branching[k];
            if digit == 0 || digit > n {
                return Err(Error::Shape(format!(
                    "address digit {digit} out of range 1..={n} at level {}",
                    k + 1
                )));
            }
            idx = idx * n + (digit - 1);
        }
        Ok(idx)
    }
}

/// Leaf rates plus all node aggregates `lambda_(i1..id)` and branch ratios
/// `theta_(i1..id) = lambda_node / lambda_parent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTree {
    spec: HierarchySpec,
    /// `levels[d][idx]` = aggregate rate of node `(d, idx)`; `levels[D]` are
    /// the leaf rates and `levels[0][0]` is the grand total.
    levels: Vec<Vec<f64>>,
}

/// Builds the aggregate tree from leaf rates.
pub fn build_param_tree(spec: &HierarchySpec, leaf_rates: &[f64]) -> Result<ParamTree> {
    let d_max = spec.depth();
    if leaf_rates.len() != spec.leaf_count() {
        return Err(Error::Shape(format!(
            "expected {} leaf rates, got {}",
            spec.leaf_count(),
            leaf_rates.len()
        )));
    }
    if let Some(bad) = leaf_rates.iter().find(|&&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain(format!(
            "leaf rates must be strictly positive, got {bad}"
        )));
    }
    let mut levels = vec![Vec::new(); d_max + 1];
    levels[d_max] = leaf_rates.to_vec();
    for d in (0..d_max).rev() {
        let width = spec.level_width(d);
        let mut row = vec![0.0; width];
        for (idx, slot) in row.iter_mut().enumerate() {
            *slot = spec.children(d, idx).map(|c| levels[d + 1][c]).sum();
        }
        levels[d] = row;
    }
    Ok(ParamTree {
        spec: spec.clone(),
        levels,
    })
}

impl ParamTree {
    pub fn spec(&self) -> &HierarchySpec {
        &self.spec
    }

    /// Aggregate rate of node `(d, idx)`.
    pub fn lambda(&self, d: usize, idx: usize) -> f64 {
        self.levels[d][idx]
    }

    /// Grand total `Lambda`.
    pub fn lambda_total(&self) -> f64 {
        self.levels[0][0]
    }

    pub fn leaves(&self) -> &[f64] {
        &self.levels[self.spec.depth()]
    }

    pub fn level(&self, d: usize) -> &[f64] {
        &self.levels[d]
    }

    /// Branch ratio `theta_(d, idx)` for `d >= 1`.
    pub fn theta(&self, d: usize, idx: usize) -> f64 {
        self.levels[d][idx] / self.levels[d - 1][self.spec.parent(d, idx)]
    }
}

/// Counts of the observation design `X(D')`: one count per node at depth
/// `>= start_depth`, zeros above.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSet {
    spec: HierarchySpec,
    start_depth: usize,
    counts: Vec<Vec<u64>>,
}

impl ObservationSet {
    pub fn new(spec: HierarchySpec, start_depth: usize, counts: Vec<Vec<u64>>) -> Result<Self> {
        let d_max = spec.depth();
        if start_depth > d_max {
            return Err(Error::Shape(format!(
                "start depth {start_depth} exceeds depth {d_max}"
            )));
        }
        if counts.len() != d_max + 1 {
            return Err(Error::Shape(format!(
                "expected {} count levels, got {}",
                d_max + 1,
                counts.len()
            )));
        }
        for (d, row) in counts.iter().enumerate() {
            if row.len() != spec.level_width(d) {
                return Err(Error::Shape(format!(
                    "level {d} expects {} counts, got {}",
                    spec.level_width(d),
                    row.len()
                )));
            }
            if d < start_depth && row.iter().any(|&c| c != 0) {
                return Err(Error::Shape(format!(
                    "counts above start depth {start_depth} must be zero (level {d})"
                )));
            }
        }
        Ok(Self {
            spec,
            start_depth,
            counts,
        })
    }

    pub fn spec(&self) -> &HierarchySpec {
        &self.spec
    }

    /// `D'` of the design.
    pub fn start_depth(&self) -> usize {
        self.start_depth
    }

    pub fn count(&self, d: usize, idx: usize) -> u64 {
        self.counts[d][idx]
    }

    pub fn level(&self, d: usize) -> &[u64] {
        &self.counts[d]
    }

    /// Reinterprets the design with a shallower observation front removed:
    /// the same counts, but everything above `new_start` zeroed. Used when a
    /// rule consumes a smaller design than was sampled (CRN pairing).
    pub fn restricted(&self, new_start: usize) -> Result<ObservationSet> {
        if new_start < self.start_depth {
            return Err(Error::Shape(format!(
                "cannot extend design {} to shallower start {new_start}",
                self.start_depth
            )));
        }
        let mut counts = self.counts.clone();
        for row in counts.iter_mut().take(new_start) {
            row.iter_mut().for_each(|c| *c = 0);
        }
        ObservationSet::new(self.spec.clone(), new_start, counts)
    }

    /// Basic-model view (D = 1): `Y` is the root count, `X` the leaf counts.
    pub fn basic_view(&self) -> Result<BasicObs> {
        if self.spec.depth() != 1 {
            return Err(Error::Shape(format!(
                "basic view requires depth 1, tree has depth {}",
                self.spec.depth()
            )));
        }
        Ok(BasicObs {
            x: self.counts[1].clone(),
            y: self.counts[0][0],
        })
    }

    /// Multi-set view (D = 2): per-group `X_{i,j}`, group totals `Y_i`, and
    /// the root count `Z` when the design starts at the root.
    pub fn multi_view(&self) -> Result<MultiObs> {
        if self.spec.depth() != 2 {
            return Err(Error::Shape(format!(
                "multi view requires depth 2, tree has depth {}",
                self.spec.depth()
            )));
        }
        let m = self.spec.level_width(1);
        let n = self.spec.branching()[1];
        let x = (0..m)
            .map(|i| self.counts[2][i * n..(i + 1) * n].to_vec())
            .collect();
        let z = if self.start_depth == 0 {
            Some(self.counts[0][0])
        } else {
            None
        };
        MultiObs::new(x, self.counts[1].clone(), z)
    }
}

/// Basic-model observations: leaf counts `X` plus the aggregate count `Y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicObs {
    pub x: Vec<u64>,
    pub y: u64,
}

impl BasicObs {
    pub fn x_total(&self) -> u64 {
        self.x.iter().sum()
    }
}

/// Multi-set observations: ragged groups `X_{i,j}`, group aggregates `Y_i`,
/// and optionally the top-level count `Z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiObs {
    x: Vec<Vec<u64>>,
    y: Vec<u64>,
    z: Option<u64>,
}

impl MultiObs {
    pub fn new(x: Vec<Vec<u64>>, y: Vec<u64>, z: Option<u64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Shape(
                "multi-set model needs at least one group".into(),
            ));
        }
        if x.len() != y.len() {
            return Err(Error::Shape(format!(
                "{} groups of counts but {} group totals",
                x.len(),
                y.len()
            )));
        }
        if x.iter().any(|g| g.is_empty()) {
            return Err(Error::Shape("every group needs at least one count".into()));
        }
        Ok(Self { x, y, z })
    }

    pub fn groups(&self) -> usize {
        self.x.len()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.x.iter().map(|g| g.len()).collect()
    }

    pub fn x(&self, i: usize) -> &[u64] {
        &self.x[i]
    }

    pub fn y(&self, i: usize) -> u64 {
        self.y[i]
    }

    pub fn z(&self) -> Option<u64> {
        self.z
    }

    /// `X_{i,.}`
    pub fn x_group_total(&self, i: usize) -> u64 {
        self.x[i].iter().sum()
    }

    /// `X_{.,.}`
    pub fn x_total(&self) -> u64 {
        self.x.iter().flatten().sum()
    }

    /// `Y_.`
    pub fn y_total(&self) -> u64 {
        self.y.iter().sum()
    }
}

/// Draws `X(D')` from the tree with the default stream 0.
pub fn sample_observations(
    tree: &ParamTree,
    start_depth: usize,
    seed: u64,
) -> Result<ObservationSet> {
    sample_observations_stream(tree, start_depth, seed, 0)
}

/// Draws `X(D')` using the generator for `(seed, stream)`. Identical inputs
/// reproduce identical outputs bit for bit; distinct streams are independent.
pub fn sample_observations_stream(
    tree: &ParamTree,
    start_depth: usize,
    seed: u64,
    stream: u64,
) -> Result<ObservationSet> {
    let spec = tree.spec();
    let d_max = spec.depth();
    if start_depth > d_max {
        return Err(Error::Shape(format!(
            "start depth {start_depth} exceeds depth {d_max}"
        )));
    }
    let mut rng = stream_rng(seed, stream);
    let mut counts: Vec<Vec<u64>> = (0..=d_max)
        .map(|d| vec![0u64; spec.level_width(d)])
        .collect();
    for (d, row) in counts.iter_mut().enumerate().skip(start_depth) {
        for (idx, slot) in row.iter_mut().enumerate() {
            *slot = sample_poisson(tree.lambda(d, idx), &mut rng);
        }
    }
    ObservationSet::new(spec.clone(), start_depth, counts)
}

/// Aggregated totals `X~_(i1..id,+)(D')` for every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateTotals {
    totals: Vec<Vec<u64>>,
}

impl AggregateTotals {
    pub fn total(&self, d: usize, idx: usize) -> u64 {
        self.totals[d][idx]
    }

    /// Root total `X~_(+)(D')`.
    pub fn root(&self) -> u64 {
        self.totals[0][0]
    }

    pub fn level(&self, d: usize) -> &[u64] {
        &self.totals[d]
    }
}

/// Sums each node's own count with everything observed below it.
pub fn aggregate(obs: &ObservationSet) -> AggregateTotals {
    let spec = obs.spec();
    let d_max = spec.depth();
    let mut totals: Vec<Vec<u64>> = (0..=d_max).map(|d| obs.level(d).to_vec()).collect();
    for d in (0..d_max).rev() {
        for idx in 0..spec.level_width(d) {
            let below: u64 = spec.children(d, idx).map(|c| totals[d + 1][c]).sum();
            totals[d][idx] += below;
        }
    }
    AggregateTotals { totals }
}

/// Writes an observation dump as CSV with columns `depth,address,count`,
/// one row per node at depth >= D', addresses dotted and 1-based.
pub fn write_observations_csv<W: Write>(obs: &ObservationSet, mut out: W) -> Result<()> {
    writeln!(out, "depth,address,count")?;
    let spec = obs.spec();
    for d in obs.start_depth()..=spec.depth() {
        for idx in 0..spec.level_width(d) {
            let addr = spec
                .address(d, idx)
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(".");
            writeln!(out, "{d},{addr},{}", obs.count(d, idx))?;
        }
    }
    Ok(())
}

/// Reads a `depth,address,count` dump back into an observation set. The
/// design depth `D'` is the shallowest depth present in the file.
pub fn read_observations_csv<R: BufRead>(spec: &HierarchySpec, input: R) -> Result<ObservationSet> {
    let d_max = spec.depth();
    let mut counts: Vec<Vec<u64>> = (0..=d_max)
        .map(|d| vec![0u64; spec.level_width(d)])
        .collect();
    let mut seen: Vec<Vec<bool>> = (0..=d_max)
        .map(|d| vec![false; spec.level_width(d)])
        .collect();
    let mut min_depth = usize::MAX;

    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if lineno == 0 && line.trim() == "depth,address,count" {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.splitn(3, ',').collect();
        if parts.len() != 3 {
            return Err(Error::Shape(format!(
                "line {}: expected depth,address,count",
                lineno + 1
            )));
        }
        let d: usize = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::Shape(format!("line {}: bad depth {:?}", lineno + 1, parts[0])))?;
        if d > d_max {
            return Err(Error::Shape(format!(
                "line {}: depth {d} exceeds {d_max}",
                lineno + 1
            )));
        }
        let addr: Vec<usize> = if parts[1].trim().is_empty() {
            Vec::new()
        } else {
            parts[1]
                .trim()
                .split('.')
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| {
                    Error::Shape(format!("line {}: bad address {:?}", lineno + 1, parts[1]))
                })?
        };
        if addr.len() != d {
            return Err(Error::Shape(format!(
                "line {}: address depth {} does not match column depth {d}",
                lineno + 1,
                addr.len()
            )));
        }
        let idx = spec.index_of(&addr)?;
        let count: u64 = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::Shape(format!("line {}: bad count {:?}", lineno + 1, parts[2])))?;
        counts[d][idx] = count;
        seen[d][idx] = true;
        min_depth = min_depth.min(d);
    }

    if min_depth == usize::MAX {
        return Err(Error::Shape("empty observation dump".into()));
    }
    for d in min_depth..=d_max {
        if let Some(idx) = seen[d].iter().position(|&s| !s) {
            return Err(Error::Shape(format!(
                "missing count for node (depth {d}, index {idx})"
            )));
        }
    }
    ObservationSet::new(spec.clone(), min_depth, counts)
}
