//! Leaf-wise (best-first) decision-tree growth over binned features.
//!
//! Split finding is histogram-based: per node, gradient/hessian/count
//! sums are accumulated into per-(feature, bin) histograms from the
//! node's nonzero cells only; the zero bin's statistics are recovered by
//! subtracting the nonzero sums from the node totals. Features with no
//! nonzero cell in the node are skipped — all their mass sits in the zero
//! bin, so no threshold can separate the rows.
//!
//! Determinism: rows are processed in ascending order, per-feature scans
//! run in parallel but are reduced in ascending feature order, and all
//! floating-point accumulation orders are fixed, so results do not depend
//! on thread count.

use rayon::prelude::*;

use super::binning::BinnedMatrix;
use super::TrainParams;

/// One tree node. `feature == -1` marks a leaf (children are -1, `value`
/// is the raw-score contribution); internal nodes carry `value = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub feature: i32,
    /// Highest bin id routed to the left child.
    pub bin: u16,
    pub left: i32,
    pub right: i32,
    pub value: f64,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.feature < 0
    }

    fn leaf(value: f64) -> TreeNode {
        TreeNode { feature: -1, bin: 0, left: -1, right: -1, value }
    }
}

/// A grown tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Maximum number of edges from the root to any node.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], idx: usize, d: usize) -> usize {
            let n = &nodes[idx];
            if n.is_leaf() {
                d
            } else {
                walk(nodes, n.left as usize, d + 1).max(walk(nodes, n.right as usize, d + 1))
            }
        }
        walk(&self.nodes, 0, 0)
    }

    /// Route to a leaf given a bin lookup per feature; returns the node
    /// index of the leaf.
    pub fn leaf_index_by<F: FnMut(u32) -> u8>(&self, mut bin_lookup: F) -> u16 {
        let mut idx = 0usize;
        loop {
            let node = &self.nodes[idx];
            if node.is_leaf() {
                return idx as u16;
            }
            let b = bin_lookup(node.feature as u32);
            idx = if u16::from(b) <= node.bin { node.left as usize } else { node.right as usize };
        }
    }

    pub fn leaf_value(&self, leaf: u16) -> f64 {
        self.nodes[leaf as usize].value
    }

    /// Multiply every leaf value by a factor (shrinkage).
    pub fn scale_leaves(&mut self, factor: f64) {
        for node in &mut self.nodes {
            if node.is_leaf() {
                node.value *= factor;
            }
        }
    }
}

/// G²/(H+λ) with the convention that an empty or hessian-free side
/// contributes nothing.
#[inline]
fn gain_term(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom <= 0.0 {
        0.0
    } else {
        g * g / denom
    }
}

/// Split gain: G_L²/(H_L+λ) + G_R²/(H_R+λ) − G_P²/(H_P+λ).
pub fn split_gain(g_left: f64, h_left: f64, g_right: f64, h_right: f64, lambda: f64) -> f64 {
    gain_term(g_left, h_left, lambda) + gain_term(g_right, h_right, lambda)
        - gain_term(g_left + g_right, h_left + h_right, lambda)
}

/// Optimal leaf value −G/(H+λ), or 0 when the denominator vanishes.
pub fn optimal_leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom <= 0.0 {
        0.0
    } else {
        -g / denom
    }
}

/// Reusable histogram buffers sized for one binned matrix.
pub struct HistScratch {
    /// Per-feature start offset into the flat bin arrays; len F+1.
    offsets: Vec<u32>,
    g: Vec<f64>,
    h: Vec<f64>,
    c: Vec<u32>,
    touched: Vec<u32>,
    touched_flag: Vec<bool>,
}

impl HistScratch {
    pub fn new(binned: &BinnedMatrix) -> HistScratch {
        let bins = binned.bins_per_feature();
        let mut offsets = Vec::with_capacity(bins.len() + 1);
        let mut acc = 0u32;
        offsets.push(0);
        for &b in bins {
            acc += b;
            offsets.push(acc);
        }
        HistScratch {
            offsets,
            g: vec![0.0; acc as usize],
            h: vec![0.0; acc as usize],
            c: vec![0; acc as usize],
            touched: Vec::new(),
            touched_flag: vec![false; bins.len()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: u32,
    pub bin: u8,
    pub gain: f64,
}

/// Best split of a node, or `None` when no split satisfies the
/// constraints. Ties break toward (lower feature index, lower bin id).
pub fn find_best_split(
    rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    binned: &BinnedMatrix,
    params: &TrainParams,
) -> Option<SplitCandidate> {
    let mut scratch = HistScratch::new(binned);
    let node_g: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
    let node_h: f64 = rows.iter().map(|&r| hess[r as usize]).sum();
    best_split_with(rows, grad, hess, node_g, node_h, binned, params, &mut scratch)
}

#[allow(clippy::too_many_arguments)]
fn best_split_with(
    rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    node_g: f64,
    node_h: f64,
    binned: &BinnedMatrix,
    params: &TrainParams,
    scratch: &mut HistScratch,
) -> Option<SplitCandidate> {
    if rows.len() < 2 * params.min_data_in_leaf {
        return None;
    }
    // Accumulate nonzero-cell histograms in ascending row order.
    for &r in rows {
        let (cols, bins) = binned.row(r as usize);
        let (gr, hr) = (grad[r as usize], hess[r as usize]);
        for (&f, &b) in cols.iter().zip(bins) {
            let off = (scratch.offsets[f as usize] + u32::from(b)) as usize;
            scratch.g[off] += gr;
            scratch.h[off] += hr;
            scratch.c[off] += 1;
            if !scratch.touched_flag[f as usize] {
                scratch.touched_flag[f as usize] = true;
                scratch.touched.push(f);
            }
        }
    }
    scratch.touched.sort_unstable();

    let node_count = rows.len();
    let candidates: Vec<Option<SplitCandidate>> = {
        let (offsets, g, h, c) = (&scratch.offsets, &scratch.g, &scratch.h, &scratch.c);
        scratch
            .touched
            .par_iter()
            .map(|&f| scan_feature(f, offsets, g, h, c, node_g, node_h, node_count, params))
            .collect()
    };

    // Clear only what this node dirtied.
    for &f in &scratch.touched {
        let lo = scratch.offsets[f as usize] as usize;
        let hi = scratch.offsets[f as usize + 1] as usize;
        scratch.g[lo..hi].fill(0.0);
        scratch.h[lo..hi].fill(0.0);
        scratch.c[lo..hi].fill(0);
        scratch.touched_flag[f as usize] = false;
    }
    scratch.touched.clear();

    // Sequential reduce in ascending feature order; strict improvement
    // keeps the lower feature on ties.
    let mut best: Option<SplitCandidate> = None;
    for cand in candidates.into_iter().flatten() {
        if best.map_or(true, |b| cand.gain > b.gain) {
            best = Some(cand);
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn scan_feature(
    feature: u32,
    offsets: &[u32],
    g: &[f64],
    h: &[f64],
    c: &[u32],
    node_g: f64,
    node_h: f64,
    node_count: usize,
    params: &TrainParams,
) -> Option<SplitCandidate> {
    let lo = offsets[feature as usize] as usize;
    let hi = offsets[feature as usize + 1] as usize;
    let n_bins = hi - lo;
    if n_bins < 2 {
        return None;
    }
    // Zero-bin statistics = node totals − nonzero sums (ascending order).
    let mut nz_g = 0.0;
    let mut nz_h = 0.0;
    let mut nz_c = 0usize;
    for i in lo..hi {
        nz_g += g[i];
        nz_h += h[i];
        nz_c += c[i] as usize;
    }
    let parent_term = gain_term(node_g, node_h, params.lambda_l2);
    let mut cum_g = node_g - nz_g;
    let mut cum_h = node_h - nz_h;
    let mut cum_c = node_count - nz_c;
    let mut best: Option<SplitCandidate> = None;
    // Threshold t routes bins 0..=t left; the last bin can never go left
    // alone-less, so t stops before it.
    for t in 0..n_bins - 1 {
        if t > 0 {
            cum_g += g[lo + t];
            cum_h += h[lo + t];
            cum_c += c[lo + t] as usize;
        }
        if cum_c < params.min_data_in_leaf || node_count - cum_c < params.min_data_in_leaf {
            continue;
        }
        let gain = gain_term(cum_g, cum_h, params.lambda_l2)
            + gain_term(node_g - cum_g, node_h - cum_h, params.lambda_l2)
            - parent_term;
        if gain > params.min_gain && best.map_or(true, |b| gain > b.gain) {
            best = Some(SplitCandidate { feature, bin: t as u8, gain });
        }
    }
    best
}

struct FrontierLeaf {
    node: usize,
    rows: Vec<u32>,
    depth: usize,
    g_sum: f64,
    h_sum: f64,
    best: Option<SplitCandidate>,
}

/// Grow one tree leaf-wise on the given row subset: repeatedly split the
/// frontier leaf with the highest gain (ties → earliest-created leaf)
/// until `num_leaves` is reached, the depth limit stops every leaf, or no
/// leaf has a valid split. Leaf values are the unscaled optimum −G/(H+λ).
pub fn grow_tree(
    grad: &[f64],
    hess: &[f64],
    rows: &[u32],
    binned: &BinnedMatrix,
    params: &TrainParams,
) -> Tree {
    let mut scratch = HistScratch::new(binned);
    grow_tree_with(grad, hess, rows, binned, params, &mut scratch)
}

pub(crate) fn grow_tree_with(
    grad: &[f64],
    hess: &[f64],
    rows: &[u32],
    binned: &BinnedMatrix,
    params: &TrainParams,
    scratch: &mut HistScratch,
) -> Tree {
    assert!(!rows.is_empty(), "cannot grow a tree on an empty subset");
    let mut nodes = vec![TreeNode::leaf(0.0)];
    let root_g: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
    let root_h: f64 = rows.iter().map(|&r| hess[r as usize]).sum();
    let root_best = if params.max_depth > 0 {
        best_split_with(rows, grad, hess, root_g, root_h, binned, params, scratch)
    } else {
        None
    };
    let mut frontier = vec![FrontierLeaf {
        node: 0,
        rows: rows.to_vec(),
        depth: 0,
        g_sum: root_g,
        h_sum: root_h,
        best: root_best,
    }];
    let mut leaves = 1usize;

    while leaves < params.num_leaves {
        // Highest gain; earliest-created frontier leaf wins ties.
        let mut pick: Option<(usize, f64)> = None;
        for (i, leaf) in frontier.iter().enumerate() {
            if let Some(cand) = &leaf.best {
                if pick.map_or(true, |(_, g)| cand.gain > g) {
                    pick = Some((i, cand.gain));
                }
            }
        }
        let Some((pos, _)) = pick else { break };
        let leaf = frontier.remove(pos);
        let cand = leaf.best.expect("picked leaf has a candidate");

        let mut left_rows = Vec::new();
        let mut right_rows = Vec::new();
        for &r in &leaf.rows {
            if u16::from(binned.bin_of(r as usize, cand.feature)) <= u16::from(cand.bin) {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

        let left_idx = nodes.len();
        nodes.push(TreeNode::leaf(0.0));
        let right_idx = nodes.len();
        nodes.push(TreeNode::leaf(0.0));
        nodes[leaf.node] = TreeNode {
            feature: cand.feature as i32,
            bin: u16::from(cand.bin),
            left: left_idx as i32,
            right: right_idx as i32,
            value: 0.0,
        };

        let child_depth = leaf.depth + 1;
        for (node, child_rows) in [(left_idx, left_rows), (right_idx, right_rows)] {
            let g_sum: f64 = child_rows.iter().map(|&r| grad[r as usize]).sum();
            let h_sum: f64 = child_rows.iter().map(|&r| hess[r as usize]).sum();
            let best = if child_depth < params.max_depth {
                best_split_with(&child_rows, grad, hess, g_sum, h_sum, binned, params, scratch)
            } else {
                None
            };
            frontier.push(FrontierLeaf { node, rows: child_rows, depth: child_depth, g_sum, h_sum, best });
        }
        leaves += 1;
    }

    for leaf in frontier {
        nodes[leaf.node].value = optimal_leaf_value(leaf.g_sum, leaf.h_sum, params.lambda_l2);
    }
    Tree { nodes }
}
