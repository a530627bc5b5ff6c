use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::split::{leaf_weight, scan_sorted_bins, BinStat, SplitCandidate, SplitRule};
use super::{grad_hess, BoostParams, FeatureMatrix, LossKind, Tree, TreeEnsemble, TreeNode};
use crate::error::{Error, Result};

trait Rank: Copy + Send + Sync {
    fn from_u32(v: u32) -> Self;
    fn idx(self) -> usize;
}

macro_rules! rank_impl {
    ($($t:ty),*) => {$(
        impl Rank for $t {
            #[inline]
            fn from_u32(v: u32) -> Self {
                v as $t
            }
            #[inline]
            fn idx(self) -> usize {
                self as usize
            }
        }
    )*};
}
rank_impl!(u8, u16, u32);

/// Row-major ranks of the columns that fit one integer width.
struct RankBlock<T> {
    cols: Vec<usize>,
    bases: Vec<usize>,
    ranks: Vec<T>,
}

impl<T: Rank> RankBlock<T> {
    fn new(cols: Vec<usize>, slot_base: &[usize], col_ranks: &[Vec<u32>], n_rows: usize) -> Self {
        let w = cols.len();
        let mut ranks = Vec::with_capacity(n_rows * w);
        #[allow(clippy::needless_range_loop)]
        for r in 0..n_rows {
            ranks.extend(cols.iter().map(|&f| T::from_u32(col_ranks[f][r])));
        }
        let bases = cols.iter().map(|&f| slot_base[f]).collect();
        Self { cols, bases, ranks }
    }

    #[inline]
    fn row(&self, r: u32) -> &[T] {
        let w = self.cols.len();
        &self.ranks[r as usize * w..(r as usize + 1) * w]
    }

    /// Adds every row into the slots of every column of the block.
    fn accumulate_all(&self, rows: &[u32], gh: &[[f64; 2]], slots: &mut [Slot]) {
        for (&r, p) in rows.iter().zip(gh) {
            for (&rank, &base) in self.row(r).iter().zip(&self.bases) {
                debug_assert!(base + rank.idx() < slots.len());
                // SAFETY: every rank is at most the column's level count and
                // each column owns `levels + 1` slots from its base
                let slot = unsafe { slots.get_unchecked_mut(base + rank.idx()) };
                slot.g += p[0];
                slot.h += p[1];
                slot.n += 1;
            }
        }
    }

    /// Adds every row into the slots of the block positions in `pos`.
    fn accumulate(&self, rows: &[u32], gh: &[[f64; 2]], slots: &mut [Slot], pos: &[usize]) {
        for (&r, p) in rows.iter().zip(gh) {
            let ranks = self.row(r);
            for &k in pos {
                let slot = &mut slots[self.bases[k] + ranks[k].idx()];
                slot.g += p[0];
                slot.h += p[1];
                slot.n += 1;
            }
        }
    }
}

/// Rank encoding of a feature matrix: every value is replaced by the index
/// of its distinct value within the column, and missing values by the number
/// of distinct values. Split search on ranks visits exactly the same cut
/// points as sorting raw values. Ranks are stored row-major in the narrowest
/// integer width each column allows, since histogram building is bound by
/// memory traffic.
struct RankedRows {
    n_cols: usize,
    /// Distinct non-missing values of each column, ascending.
    levels: Vec<Vec<f64>>,
    /// Offset of each column's slot block (levels plus a missing slot).
    slot_base: Vec<usize>,
    n_slots: usize,
    narrow: RankBlock<u8>,
    mid: RankBlock<u16>,
    wide: RankBlock<u32>,
    /// Block (0 narrow, 1 mid, 2 wide) and position of each column.
    place: Vec<(u8, usize)>,
}

impl RankedRows {
    fn new(x: &FeatureMatrix) -> Self {
        let (n_rows, n_cols) = (x.n_rows(), x.n_cols());
        let mut levels = Vec::with_capacity(n_cols);
        let mut slot_base = Vec::with_capacity(n_cols);
        let mut col_ranks = Vec::with_capacity(n_cols);
        let mut n_slots = 0;
        let mut col = Vec::with_capacity(n_rows);
        for f in 0..n_cols {
            col.clear();
            col.extend((0..n_rows).map(|r| x.get(r, f)).filter(|v| !v.is_nan()));
            col.sort_by(f64::total_cmp);
            col.dedup();
            let missing = col.len() as u32;
            let ranks: Vec<u32> = (0..n_rows)
                .map(|r| {
                    let v = x.get(r, f);
                    if v.is_nan() {
                        missing
                    } else {
                        col.partition_point(|&c| c < v) as u32
                    }
                })
                .collect();
            col_ranks.push(ranks);
            slot_base.push(n_slots);
            n_slots += col.len() + 1;
            levels.push(col.clone());
        }
        let mut tiers: [Vec<usize>; 3] = Default::default();
        let mut place = Vec::with_capacity(n_cols);
        for (f, l) in levels.iter().enumerate() {
            // the missing rank equals the level count and must fit too
            let t = if l.len() <= u8::MAX as usize {
                0
            } else if l.len() <= u16::MAX as usize {
                1
            } else {
                2
            };
            place.push((t as u8, tiers[t].len()));
            tiers[t].push(f);
        }
        let [t0, t1, t2] = tiers;
        Self {
            n_cols,
            narrow: RankBlock::new(t0, &slot_base, &col_ranks, n_rows),
            mid: RankBlock::new(t1, &slot_base, &col_ranks, n_rows),
            wide: RankBlock::new(t2, &slot_base, &col_ranks, n_rows),
            levels,
            slot_base,
            n_slots,
            place,
        }
    }

    #[inline]
    fn rank(&self, r: u32, f: usize) -> u32 {
        let (t, k) = self.place[f];
        match t {
            0 => self.narrow.row(r)[k] as u32,
            1 => self.mid.row(r)[k] as u32,
            _ => self.wide.row(r)[k],
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Slot {
    g: f64,
    h: f64,
    n: u32,
}

/// Per-value gradient statistics of one node. `dense[f]` marks the columns
/// whose slot block holds this node's totals.
struct Hist {
    slots: Vec<Slot>,
    dense: Vec<bool>,
}

/// Reusable buffers for split search.
struct Scratch {
    pool: Vec<Hist>,
    n_slots: usize,
    todo: Vec<usize>,
    pos: [Vec<usize>; 3],
    pairs: Vec<(u32, u32)>,
    bins: Vec<BinStat>,
    left: Vec<(u32, [f64; 2])>,
    right: Vec<(u32, [f64; 2])>,
}

impl Scratch {
    fn hist(&mut self, n_cols: usize) -> Hist {
        match self.pool.pop() {
            Some(mut h) => {
                h.slots.fill(Slot::default());
                h.dense.fill(false);
                h
            }
            None => Hist { slots: vec![Slot::default(); self.n_slots], dense: vec![false; n_cols] },
        }
    }
}

#[derive(Clone, Copy)]
struct NodeSplit {
    feature: usize,
    cand: SplitCandidate,
}

struct Pending {
    node: usize,
    start: usize,
    end: usize,
    depth: usize,
    varying: Vec<bool>,
}

/// Two children awaiting search, with their parent's statistics.
struct PendingPair {
    parent: Option<Hist>,
    pair: [Pending; 2],
}

struct TreeGrower<'a> {
    data: &'a RankedRows,
    params: &'a BoostParams,
    rule: SplitRule,
}

impl TreeGrower<'_> {
    /// Adds the node rows into the slot blocks of the columns in `todo`,
    /// in ascending row order.
    fn accumulate(&self, rows: &[u32], gh: &[[f64; 2]], hist: &mut Hist, todo: &[usize], pos: &mut [Vec<usize>; 3]) {
        let d = self.data;
        if todo.len() == d.n_cols {
            d.narrow.accumulate_all(rows, gh, &mut hist.slots);
            d.mid.accumulate_all(rows, gh, &mut hist.slots);
            d.wide.accumulate_all(rows, gh, &mut hist.slots);
        } else if !todo.is_empty() {
            for p in pos.iter_mut() {
                p.clear();
            }
            for &f in todo {
                let (t, k) = d.place[f];
                pos[t as usize].push(k);
            }
            d.narrow.accumulate(rows, gh, &mut hist.slots, &pos[0]);
            d.mid.accumulate(rows, gh, &mut hist.slots, &pos[1]);
            d.wide.accumulate(rows, gh, &mut hist.slots, &pos[2]);
        }
        for &f in todo {
            hist.dense[f] = true;
        }
    }

    /// Collects the non-empty slots of column `f` into `bins` and returns the
    /// missing-value totals.
    fn slot_bins(&self, f: usize, hist: &Hist, bins: &mut Vec<BinStat>) -> (f64, f64) {
        let levels = &self.data.levels[f];
        let base = self.data.slot_base[f];
        let slots = &hist.slots[base..=base + levels.len()];
        bins.clear();
        for (&value, slot) in levels.iter().zip(slots) {
            if slot.n > 0 {
                bins.push(BinStat { value, g: slot.g, h: slot.h });
            }
        }
        let m = slots[levels.len()];
        (m.g, m.h)
    }

    /// Per-value statistics of a column with many more levels than node
    /// rows, built by sorting the node's ranks.
    fn sorted_bins(&self, f: usize, rows: &[u32], gh: &[[f64; 2]], s: &mut Scratch) -> (f64, f64) {
        let levels = &self.data.levels[f];
        let nl = levels.len() as u32;
        let (mut mg, mut mh) = (0.0, 0.0);
        s.pairs.clear();
        s.bins.clear();
        for (k, (&r, p)) in rows.iter().zip(gh).enumerate() {
            let b = self.data.rank(r, f);
            if b == nl {
                mg += p[0];
                mh += p[1];
            } else {
                s.pairs.push((b, k as u32));
            }
        }
        // stable: rows stay ascending within a rank
        s.pairs.sort_by_key(|p| p.0);
        let mut last = u32::MAX;
        for &(b, k) in &s.pairs {
            let [g, h] = gh[k as usize];
            if b == last {
                let bin = s.bins.last_mut().expect("bin exists");
                bin.g += g;
                bin.h += h;
            } else {
                s.bins.push(BinStat { value: levels[b as usize], g, h });
                last = b;
            }
        }
        (mg, mh)
    }

    /// Best split over the columns flagged in `varying`. Columns found
    /// constant within the node are cleared from `varying`, since they stay
    /// constant in every descendant. Columns with few levels relative to the
    /// node go through `hist`, which may arrive partly filled.
    fn find_split(
        &self,
        rows: &[u32],
        gh: &[[f64; 2]],
        varying: &mut [bool],
        hist: &mut Hist,
        s: &mut Scratch,
    ) -> Option<NodeSplit> {
        let n_cols = self.data.n_cols;
        let dense_cap = 4 * rows.len();
        let mut todo = std::mem::take(&mut s.todo);
        todo.clear();
        todo.extend((0..n_cols).filter(|&f| varying[f] && !hist.dense[f] && self.data.levels[f].len() <= dense_cap));
        self.accumulate(rows, gh, hist, &todo, &mut s.pos);
        s.todo = todo;

        let mut best: Option<NodeSplit> = None;
        let mut bins = std::mem::take(&mut s.bins);
        #[allow(clippy::needless_range_loop)]
        for f in 0..n_cols {
            if !varying[f] {
                continue;
            }
            let (mg, mh) = if hist.dense[f] {
                self.slot_bins(f, hist, &mut bins)
            } else {
                s.bins = std::mem::take(&mut bins);
                let m = self.sorted_bins(f, rows, gh, s);
                bins = std::mem::take(&mut s.bins);
                m
            };
            if bins.len() < 2 {
                varying[f] = false;
                continue;
            }
            if let Some(cand) = scan_sorted_bins(&bins, mg, mh, self.rule) {
                // strict comparison keeps the lowest feature index on ties
                if best.map_or(true, |b| cand.gain > b.cand.gain) {
                    best = Some(NodeSplit { feature: f, cand });
                }
            }
        }
        s.bins = bins;
        best
    }

    fn leaf(&self, gh: &[[f64; 2]]) -> TreeNode {
        let (g, h) = gh.iter().fold((0.0, 0.0), |(g, h), p| (g + p[0], h + p[1]));
        // a node whose hessian vanished carries no curvature information
        let w = leaf_weight(g, h, self.params.reg_lambda).unwrap_or(0.0);
        TreeNode::Leaf { weight: self.params.learning_rate * w }
    }

    fn searched(&self, p: &Pending) -> bool {
        p.depth < self.params.max_depth && p.end - p.start >= 2
    }

    /// Searches one node, writes it into `nodes` and partitions its rows.
    /// Returns the children to search next together with this node's
    /// statistics, or hands the statistics back to the pool for a leaf.
    fn visit(
        &self,
        mut p: Pending,
        mut hist: Hist,
        rows: &mut [u32],
        gh: &mut [[f64; 2]],
        nodes: &mut Vec<TreeNode>,
        s: &mut Scratch,
    ) -> Option<(Hist, [Pending; 2])> {
        let split = if self.searched(&p) {
            let (node_rows, node_gh) = (&rows[p.start..p.end], &gh[p.start..p.end]);
            self.find_split(node_rows, node_gh, &mut p.varying, &mut hist, s)
        } else {
            None
        };
        let Some(split) = split else {
            nodes[p.node] = self.leaf(&gh[p.start..p.end]);
            s.pool.push(hist);
            return None;
        };

        let levels = &self.data.levels[split.feature];
        s.left.clear();
        s.right.clear();
        for (&r, &pair) in rows[p.start..p.end].iter().zip(&gh[p.start..p.end]) {
            let b = self.data.rank(r, split.feature) as usize;
            let left = if b == levels.len() {
                split.cand.default_left
            } else {
                levels[b] < split.cand.threshold
            };
            if left {
                s.left.push((r, pair));
            } else {
                s.right.push((r, pair));
            }
        }
        let mid = p.start + s.left.len();
        for (k, &(r, pair)) in s.left.iter().chain(&s.right).enumerate() {
            rows[p.start + k] = r;
            gh[p.start + k] = pair;
        }

        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(TreeNode::Leaf { weight: 0.0 });
        nodes.push(TreeNode::Leaf { weight: 0.0 });
        nodes[p.node] = TreeNode::Split {
            feature: split.feature,
            threshold: split.cand.threshold,
            default_left: split.cand.default_left,
            left: l,
            right: r,
        };
        let depth = p.depth + 1;
        let left = Pending { node: l, start: p.start, end: mid, depth, varying: p.varying.clone() };
        let right = Pending { node: r, start: mid, end: p.end, depth, varying: p.varying };
        Some((hist, [left, right]))
    }

    /// Grows one tree on `rows` (ascending) with their gradient pairs.
    ///
    /// Siblings are searched smaller first; the larger one inherits its
    /// parent's statistics minus the smaller one's wherever both were
    /// accumulated per value.
    fn grow(&self, mut rows: Vec<u32>, mut gh: Vec<[f64; 2]>, s: &mut Scratch) -> Tree {
        let n_cols = self.data.n_cols;
        let varying: Vec<bool> = self.data.levels.iter().map(|l| l.len() >= 2).collect();
        let mut nodes = vec![TreeNode::Leaf { weight: 0.0 }];
        let root = Pending { node: 0, start: 0, end: rows.len(), depth: 0, varying };
        let hist = s.hist(n_cols);
        let mut queue = VecDeque::new();
        if let Some((hist, pair)) = self.visit(root, hist, &mut rows, &mut gh, &mut nodes, s) {
            queue.push_back(PendingPair { parent: Some(hist), pair });
        }
        while let Some(PendingPair { parent, pair: [a, b] }) = queue.pop_front() {
            let (small, large) = if a.end - a.start <= b.end - b.start { (a, b) } else { (b, a) };
            let small_searched = self.searched(&small);
            let large_searched = self.searched(&large);

            let hist = s.hist(n_cols);
            let small_out = self.visit(small, hist, &mut rows, &mut gh, &mut nodes, s);

            let large_hist = match (parent, &small_out) {
                (Some(mut parent), Some((sh, _))) if small_searched && large_searched => {
                    for f in 0..n_cols {
                        let base = self.data.slot_base[f];
                        let end = base + self.data.levels[f].len() + 1;
                        if !(parent.dense[f] && sh.dense[f]) {
                            // the large child may accumulate this block afresh
                            if parent.dense[f] {
                                parent.slots[base..end].fill(Slot::default());
                            }
                            parent.dense[f] = false;
                            continue;
                        }
                        for (ps, cs) in parent.slots[base..end].iter_mut().zip(&sh.slots[base..end]) {
                            ps.g -= cs.g;
                            ps.h -= cs.h;
                            ps.n -= cs.n;
                        }
                    }
                    parent
                }
                (parent, _) => {
                    if let Some(p) = parent {
                        s.pool.push(p);
                    }
                    s.hist(n_cols)
                }
            };
            if let Some((hist, pair)) = small_out {
                queue.push_back(PendingPair { parent: Some(hist), pair });
            }
            if let Some((hist, pair)) = self.visit(large, large_hist, &mut rows, &mut gh, &mut nodes, s) {
                queue.push_back(PendingPair { parent: Some(hist), pair });
            }
        }
        Tree { nodes }
    }
}

/// A feature matrix rank-encoded for training. Building it costs a sort per
/// column; fits that share the same rows can reuse it.
pub struct TrainingData<'a> {
    x: &'a FeatureMatrix,
    ranked: RankedRows,
}

impl<'a> TrainingData<'a> {
    pub fn new(x: &'a FeatureMatrix) -> Self {
        Self { x, ranked: RankedRows::new(x) }
    }

    pub fn matrix(&self) -> &'a FeatureMatrix {
        self.x
    }
}

/// Fits a boosted ensemble. See [`fit_with_trace`].
pub fn fit(x: &FeatureMatrix, y: &[f64], params: &BoostParams, loss: LossKind) -> Result<TreeEnsemble> {
    fit_prepared(&TrainingData::new(x), y, params, loss)
}

/// [`fit`] on a matrix that is already rank-encoded.
pub fn fit_prepared(data: &TrainingData, y: &[f64], params: &BoostParams, loss: LossKind) -> Result<TreeEnsemble> {
    train(data, y, params, loss, false).map(|(e, _)| e)
}

/// Fits a boosted ensemble and also returns the total training loss after
/// each boosting round.
///
/// Trees are grown depth-wise to `max_depth` on a fresh row subsample per
/// round; the result is deterministic for a given `rng_seed`.
pub fn fit_with_trace(
    x: &FeatureMatrix,
    y: &[f64],
    params: &BoostParams,
    loss: LossKind,
) -> Result<(TreeEnsemble, Vec<f64>)> {
    train(&TrainingData::new(x), y, params, loss, true)
}

fn train(
    prepared: &TrainingData,
    y: &[f64],
    params: &BoostParams,
    loss: LossKind,
    with_trace: bool,
) -> Result<(TreeEnsemble, Vec<f64>)> {
    params.validate()?;
    let x = prepared.x;
    let n = x.n_rows();
    if n != y.len() {
        return Err(Error::invalid(format!("{n} rows but {} labels", y.len())));
    }
    if n < 2 {
        return Err(Error::invalid("need at least two training rows"));
    }
    if n > u32::MAX as usize {
        return Err(Error::invalid("too many rows"));
    }
    for &v in y {
        loss.check_label(v)?;
    }

    let base_score = match loss {
        LossKind::Logistic => 0.0,
        LossKind::SquaredError => y.iter().sum::<f64>() / n as f64,
    };
    let data = &prepared.ranked;
    let mut scratch = Scratch {
        pool: Vec::new(),
        n_slots: data.n_slots,
        todo: Vec::new(),
        pos: Default::default(),
        pairs: Vec::new(),
        bins: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
    };
    let rule = SplitRule {
        lambda: params.reg_lambda,
        gamma: params.min_split_loss,
        min_child_weight: params.min_child_weight,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut margin = vec![base_score; n];
    let mut grad = vec![[0.0; 2]; n];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut trace = Vec::with_capacity(params.n_estimators);
    let n_sub = ((params.subsample * n as f64).round() as usize).clamp(1, n);

    for _ in 0..params.n_estimators {
        for i in 0..n {
            let (g, h) = grad_hess(loss, y[i], margin[i])?;
            grad[i] = [g, h];
        }
        let rows: Vec<u32> = if n_sub == n {
            (0..n as u32).collect()
        } else {
            let mut idx: Vec<u32> = sample(&mut rng, n, n_sub).into_iter().map(|i| i as u32).collect();
            idx.sort_unstable();
            idx
        };
        let gh = rows.iter().map(|&r| grad[r as usize]).collect();
        let grower = TreeGrower { data, params, rule };
        let tree = grower.grow(rows, gh, &mut scratch);
        for (i, m) in margin.iter_mut().enumerate() {
            *m += tree.predict(x.row(i));
        }
        if with_trace {
            trace.push(margin.iter().zip(y).map(|(&m, &t)| loss.loss(t, m)).sum());
        }
        trees.push(tree);
    }

    let ensemble = TreeEnsemble {
        base_score,
        trees,
        loss,
        feature_names: x.names().to_vec(),
    };
    Ok((ensemble, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: &[&[f64]]) -> FeatureMatrix {
        let n = cols[0].len();
        let names = (0..cols.len()).map(|i| format!("f{i}")).collect();
        let mut values = Vec::new();
        for r in 0..n {
            for c in cols {
                values.push(c[r]);
            }
        }
        FeatureMatrix::new(names, values).unwrap()
    }

    #[test]
    fn constant_target_predicts_the_mean() {
        let x = matrix(&[&[1.0, 2.0, 3.0]]);
        let p = BoostParams { reg_lambda: 0.0, n_estimators: 5, ..Default::default() };
        let e = fit(&x, &[4.0, 4.0, 4.0], &p, LossKind::SquaredError).unwrap();
        for i in 0..3 {
            assert_eq!(e.predict_margin(x.row(i)), 4.0);
        }
        assert!(e.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn identical_logistic_labels_give_stumps_without_splits() {
        let x = matrix(&[&[1.0, 2.0, 3.0, 4.0]]);
        let p = BoostParams { n_estimators: 3, ..Default::default() };
        let e = fit(&x, &[1.0; 4], &p, LossKind::Logistic).unwrap();
        assert!(e.trees.iter().all(|t| t.nodes.len() == 1));
        // every row gets the same margin
        let m0 = e.predict_margin(x.row(0));
        assert!((1..4).all(|i| e.predict_margin(x.row(i)) == m0));
    }

    #[test]
    fn separable_column_ranks_perfectly() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..20).map(|i| if i >= 10 { 1.0 } else { 0.0 }).collect();
        let x = matrix(&[&xs]);
        let p = BoostParams {
            n_estimators: 10,
            learning_rate: 0.3,
            subsample: 1.0,
            min_child_weight: 0.0,
            ..Default::default()
        };
        let e = fit(&x, &y, &p, LossKind::Logistic).unwrap();
        let neg_max = (0..10).map(|i| e.predict_margin(x.row(i))).fold(f64::MIN, f64::max);
        let pos_min = (10..20).map(|i| e.predict_margin(x.row(i))).fold(f64::MAX, f64::min);
        assert!(pos_min > neg_max);
    }

    #[test]
    fn squared_error_training_loss_never_increases() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let zs: Vec<f64> = (0..40).map(|i| (i % 7) as f64).collect();
        let y: Vec<f64> = xs.iter().zip(&zs).map(|(a, b)| 3.0 * a + 0.2 * b).collect();
        let x = matrix(&[&xs, &zs]);
        let p = BoostParams {
            n_estimators: 50,
            learning_rate: 0.1,
            subsample: 1.0,
            reg_lambda: 1.0,
            ..Default::default()
        };
        let (_, trace) = fit_with_trace(&x, &y, &p, LossKind::SquaredError).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn subsampling_is_seeded() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 13) % 17) as f64).collect();
        let y: Vec<f64> = xs.iter().map(|v| v * 0.5 + (v * 3.0).cos()).collect();
        let x = matrix(&[&xs]);
        let p = BoostParams { subsample: 0.5, n_estimators: 20, rng_seed: 9, ..Default::default() };
        let a = fit(&x, &y, &p, LossKind::SquaredError).unwrap();
        let b = fit(&x, &y, &p, LossKind::SquaredError).unwrap();
        assert_eq!(a, b);
        let c = fit(&x, &y, &BoostParams { rng_seed: 10, ..p }, LossKind::SquaredError).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let x = matrix(&[&[1.0, 2.0]]);
        let p = BoostParams::default();
        assert!(fit(&x, &[1.0], &p, LossKind::SquaredError).is_err());
        assert!(fit(&x, &[0.0, 2.0], &p, LossKind::Logistic).is_err());
        let one = matrix(&[&[1.0]]);
        assert!(fit(&one, &[1.0], &p, LossKind::SquaredError).is_err());
    }

    #[test]
    fn rank_encoding_handles_missing() {
        let x = matrix(&[&[3.0, f64::NAN, 1.0, 3.0], &[0.0, 0.0, 0.0, 0.0]]);
        let r = RankedRows::new(&x);
        assert_eq!(r.levels[0], vec![1.0, 3.0]);
        assert_eq!((0..4).map(|i| r.rank(i, 0)).collect::<Vec<_>>(), vec![1, 2, 0, 1]);
        assert_eq!(r.slot_base, vec![0, 3]);
        assert_eq!(r.n_slots, 5);
    }
}
