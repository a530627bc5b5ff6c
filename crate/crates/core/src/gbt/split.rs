use crate::error::{Error, Result};

/// Best split found on one feature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    /// Rows with `x < threshold` go left.
    pub threshold: f64,
    pub gain: f64,
    /// Direction taken by rows whose value is missing.
    pub default_left: bool,
}

/// Optimal weight of a leaf with gradient sum `g` and hessian sum `h`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> Result<f64> {
    let denom = h + lambda;
    if denom > 0.0 {
        Ok(-g / denom)
    } else {
        Err(Error::DegenerateLeaf)
    }
}

/// Reduction of the regularised second-order objective obtained by
/// splitting a node into (left, right), net of the per-leaf penalty `gamma`.
#[inline]
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let g = gl + gr;
    let h = hl + hr;
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma
}

/// Gradient statistics of all rows sharing one distinct feature value.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct BinStat {
    pub value: f64,
    pub g: f64,
    pub h: f64,
}

/// Split-search settings shared by the trainer and [`best_split`].
#[derive(Clone, Copy, Debug)]
pub(crate) struct SplitRule {
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

/// Threshold strictly above `lo` and not above `hi`.
#[inline]
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo * 0.5 + hi * 0.5;
    if m > lo {
        m
    } else {
        hi
    }
}

/// Scans candidate cut points between consecutive distinct values (given
/// ascending in `bins`) and both default directions for the missing rows.
///
/// Ties go to the lowest threshold, then to `default_left = true`.
pub(crate) fn scan_sorted_bins(
    bins: &[BinStat],
    missing_g: f64,
    missing_h: f64,
    rule: SplitRule,
) -> Option<SplitCandidate> {
    if bins.len() < 2 {
        return None;
    }
    let (tot_g, tot_h) = bins.iter().fold((0.0, 0.0), |(g, h), b| (g + b.g, h + b.h));
    let (all_g, all_h) = (tot_g + missing_g, tot_h + missing_h);
    let parent = all_g * all_g / (all_h + rule.lambda);
    // without missing mass both directions score the same and left wins
    let directions: &[bool] = if missing_g == 0.0 && missing_h == 0.0 { &[true] } else { &[true, false] };
    let mut gl = 0.0;
    let mut hl = 0.0;
    let mut best: Option<SplitCandidate> = None;
    for i in 0..bins.len() - 1 {
        gl += bins[i].g;
        hl += bins[i].h;
        let gr = tot_g - gl;
        let hr = tot_h - hl;
        for &default_left in directions {
            let (lg, lh, rg, rh) = if default_left {
                (gl + missing_g, hl + missing_h, gr, hr)
            } else {
                (gl, hl, gr + missing_g, hr + missing_h)
            };
            if lh < rule.min_child_weight || rh < rule.min_child_weight {
                continue;
            }
            if !(lh + rule.lambda > 0.0 && rh + rule.lambda > 0.0) {
                continue;
            }
            let gain = 0.5 * (lg * lg / (lh + rule.lambda) + rg * rg / (rh + rule.lambda) - parent) - rule.gamma;
            if gain > 0.0 && best.map_or(true, |b| gain > b.gain) {
                best = Some(SplitCandidate {
                    threshold: midpoint(bins[i].value, bins[i + 1].value),
                    gain,
                    default_left,
                });
            }
        }
    }
    best
}

/// Exact greedy split search on one feature column.
///
/// `column`, `grad` and `hess` are aligned by row; NaN entries of `column`
/// are missing. Returns `None` when no split has positive gain, including
/// when fewer than two distinct non-missing values exist.
pub fn best_split(
    column: &[f64],
    grad: &[f64],
    hess: &[f64],
    lambda: f64,
    gamma: f64,
) -> Result<Option<SplitCandidate>> {
    if column.len() != grad.len() || column.len() != hess.len() {
        return Err(Error::invalid("column, gradients and hessians differ in length"));
    }
    let mut order: Vec<usize> = (0..column.len()).filter(|&i| !column[i].is_nan()).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));

    let (mut mg, mut mh) = (0.0, 0.0);
    for i in (0..column.len()).filter(|&i| column[i].is_nan()) {
        mg += grad[i];
        mh += hess[i];
    }

    let mut bins: Vec<BinStat> = Vec::new();
    for i in order {
        match bins.last_mut() {
            Some(b) if b.value == column[i] => {
                b.g += grad[i];
                b.h += hess[i];
            }
            _ => bins.push(BinStat { value: column[i], g: grad[i], h: hess[i] }),
        }
    }
    let rule = SplitRule { lambda, gamma, min_child_weight: 0.0 };
    Ok(scan_sorted_bins(&bins, mg, mh, rule))
}
