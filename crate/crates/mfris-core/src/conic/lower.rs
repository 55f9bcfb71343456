//! Lowering from the abstract program to the real conic standard form
//! `min c·x  s.t.  A_eq x = b_eq,  A_k x + s = b_k,  s ∈ NonNeg × SOC × PSD`,
//! including exponential-chain compilation, Hermitian real-embedding, svec
//! packing, and Ruiz equilibration.

use super::{ConicProgram, LinExpr, VarId};
use ndarray::{Array1, Array2};

pub(crate) const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum BlockKind {
    NonNeg,
    Soc,
    Psd { side: usize },
}

/// One cone block in `s = b - A x` form (note the sign: `a` already carries
/// the minus so that `s = b + a·x` never appears anywhere downstream).
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub kind: BlockKind,
    pub dim: usize,
    /// Global variable indices with nonzero coefficients in this block.
    pub active: Vec<usize>,
    /// dim × active.len(); `s = b - a_act · x_act`.
    pub a_act: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Lowered {
    pub n: usize,
    pub n_orig: usize,
    /// Minimize `c·x` (objective already negated and column-scaled).
    pub c: Vec<f64>,
    pub a_eq: Array2<f64>,
    pub b_eq: Array1<f64>,
    pub blocks: Vec<Block>,
    /// Column scales: `x_original = col_scale[i] * x_solved[i]`.
    pub col_scale: Vec<f64>,
    /// Objective scale: true max objective = -(c·x)/obj_scale + obj_offset.
    pub obj_scale: f64,
    pub obj_offset: f64,
}

/// svec length for a side-n symmetric matrix.
pub(crate) fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Pack a symmetric matrix column-by-column (lower triangle) with √2 scaling
/// on off-diagonals so that `⟨svec X, svec Y⟩ = Tr(XY)`.
pub(crate) fn svec(m: &Array2<f64>) -> Array1<f64> {
    let n = m.nrows();
    let mut out = Array1::zeros(svec_len(n));
    let mut k = 0;
    for j in 0..n {
        out[k] = m[(j, j)];
        k += 1;
        for i in (j + 1)..n {
            out[k] = SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)]);
            k += 1;
        }
    }
    out
}

pub(crate) fn unsvec(v: &[f64], n: usize) -> Array2<f64> {
    let mut out = Array2::zeros((n, n));
    let mut k = 0;
    for j in 0..n {
        out[(j, j)] = v[k];
        k += 1;
        for i in (j + 1)..n {
            let x = v[k] / SQRT2;
            out[(i, j)] = x;
            out[(j, i)] = x;
            k += 1;
        }
    }
    out
}

struct RowAccum {
    /// (variable, coefficient) with the `s = b - A x` sign already applied.
    cols: Vec<(usize, f64)>,
    b: f64,
}

fn expr_to_row(e: &LinExpr) -> RowAccum {
    // s = e  =>  s = b - A x with b = e.constant, A-coeff = -term.
    RowAccum {
        cols: e.terms.iter().map(|&(v, c)| (v.0, -c)).collect(),
        b: e.constant,
    }
}

pub(crate) fn lower(p: &ConicProgram) -> Lowered {
    // Working copies so exponential chains can append variables and rows.
    let mut nvars = p.nvars;
    let _ = &mut nvars;
    let mut ineqs: Vec<LinExpr> = p.ineqs.clone();
    let mut socs: Vec<(LinExpr, Vec<LinExpr>)> = p
        .socs
        .iter()
        .map(|s| (s.head.clone(), s.tail.clone()))
        .collect();

    let mut cut_blocks: Vec<Vec<LinExpr>> = Vec::new();
    for exp in &p.exps {
        let c = exp.approx.center;
        let delta = exp.approx.halfwidth;
        let nseg = exp.approx.segments.max(1) as usize;
        // Trust window: chord cuts majorize e^y only inside it.
        ineqs.push(LinExpr::constant(c + delta).minus(&exp.y));
        ineqs.push(exp.y.minus(&LinExpr::constant(c - delta)));
        // Work in shifted coordinates x' = x·e^{-c}, ŷ = y − c so every
        // coefficient is O(e^{±Δ}) regardless of where the window sits.
        let scale = (-c).exp();
        let h = 2.0 * delta / nseg as f64;
        let mut cuts = Vec::with_capacity(nseg);
        for i in 0..nseg {
            let a = -delta + h * i as f64;
            let ea = a.exp();
            let slope = ea * h.exp_m1() / h;
            // x·e^{-c} − e^a − slope·(ŷ − a) ≥ 0 with ŷ = y − c.
            let mut row = exp.x.scaled(scale);
            row.add_expr(&exp.y, -slope);
            row.constant += -ea + slope * (a + c);
            cuts.push(row);
        }
        cut_blocks.push(cuts);
    }

    // ---- equality rows ----
    let m_eq = p.eqs.len();
    let mut a_eq = Array2::zeros((m_eq, nvars));
    let mut b_eq = Array1::zeros(m_eq);
    for (r, e) in p.eqs.iter().enumerate() {
        let row = expr_to_row(e);
        for (c, v) in row.cols {
            a_eq[(r, c)] += v;
        }
        b_eq[r] = row.b;
    }

    // ---- cone blocks ----
    let mut blocks: Vec<Block> = Vec::new();

    if !ineqs.is_empty() {
        let rows: Vec<RowAccum> = ineqs.iter().map(expr_to_row).collect();
        blocks.push(build_block(BlockKind::NonNeg, &rows, nvars));
    }
    for cuts in &cut_blocks {
        // Exponential chord cuts get their own narrow blocks so the dense
        // per-block column storage stays small.
        let rows: Vec<RowAccum> = cuts.iter().map(expr_to_row).collect();
        blocks.push(build_block(BlockKind::NonNeg, &rows, nvars));
    }
    for (head, tail) in &socs {
        let mut rows = vec![expr_to_row(head)];
        rows.extend(tail.iter().map(expr_to_row));
        blocks.push(build_block(BlockKind::Soc, &rows, nvars));
    }
    for lmi in &p.lmis {
        let (side, cst, terms) = realize_lmi(lmi);
        let (cst, terms) = balance_lmi(side, cst, terms);
        // svec rows: s = svec(cst + Σ x_v M_v)  =>  b = svec(cst), A = -svec(M_v).
        let dim = svec_len(side);
        let mut per_var: std::collections::BTreeMap<usize, Array1<f64>> =
            std::collections::BTreeMap::new();
        for (v, m) in terms {
            let sv = svec(&m);
            per_var
                .entry(v)
                .and_modify(|acc| *acc += &sv)
                .or_insert(sv);
        }
        let active: Vec<usize> = per_var.keys().copied().collect();
        let mut a_act = Array2::zeros((dim, active.len()));
        for (k, (_, sv)) in per_var.iter().enumerate() {
            for r in 0..dim {
                a_act[(r, k)] = -sv[r];
            }
        }
        blocks.push(Block { kind: BlockKind::Psd { side }, dim, active, a_act, b: svec(&cst) });
    }

    // ---- objective: maximize p.objective == minimize -objective ----
    let mut c = vec![0.0; nvars];
    for &(v, coeff) in &p.objective.terms {
        c[v.0] -= coeff;
    }
    let obj_offset = p.objective.constant;

    let mut lowered = Lowered {
        n: nvars,
        n_orig: p.nvars,
        c,
        a_eq,
        b_eq,
        blocks,
        col_scale: vec![1.0; nvars],
        obj_scale: 1.0,
        obj_offset,
    };
    equilibrate(&mut lowered);
    lowered
}

fn rotated(u: LinExpr, v: LinExpr, w: Vec<LinExpr>) -> (LinExpr, Vec<LinExpr>) {
    let head = u.plus(&v);
    let mut tail = vec![u.minus(&v)];
    tail.extend(w.into_iter().map(|e| e.scaled(SQRT2)));
    (head, tail)
}

fn build_block(kind: BlockKind, rows: &[RowAccum], nvars: usize) -> Block {
    let dim = rows.len();
    let mut seen = vec![false; nvars];
    let mut active = Vec::new();
    for row in rows {
        for &(c, _) in &row.cols {
            if !seen[c] {
                seen[c] = true;
                active.push(c);
            }
        }
    }
    active.sort_unstable();
    let pos: std::collections::HashMap<usize, usize> =
        active.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut a_act = Array2::zeros((dim, active.len()));
    let mut b = Array1::zeros(dim);
    for (r, row) in rows.iter().enumerate() {
        b[r] = row.b;
        for &(c, v) in &row.cols {
            a_act[(r, pos[&c])] += v;
        }
    }
    Block { kind, dim, active, a_act, b }
}

/// Real symmetric realization of an LMI block: identity for real blocks,
/// complex-to-real embedding otherwise. Duplicate variable terms are merged.
fn realize_lmi(lmi: &super::LmiBlock) -> (usize, Array2<f64>, Vec<(usize, Array2<f64>)>) {
    if lmi.is_real() {
        let side = lmi.dim;
        let take_re = |m: &crate::linalg::CMatrix| {
            Array2::from_shape_fn((side, side), |(i, j)| {
                0.5 * (m[(i, j)].re + m[(j, i)].re)
            })
        };
        (
            side,
            take_re(&lmi.constant),
            lmi.terms.iter().map(|(v, m)| (v.0, take_re(m))).collect(),
        )
    } else {
        let side = 2 * lmi.dim;
        (
            side,
            lmi.constant.complex_to_real().expect("checked at insertion"),
            lmi.terms
                .iter()
                .map(|(v, m)| (v.0, m.complex_to_real().expect("checked at insertion")))
                .collect(),
        )
    }
}

/// Diagonal congruence balancing of one realized LMI: replaces the block
/// family `{C, M_v}` by `{D C D, D M_v D}` with `D` chosen so the aggregate
/// row magnitudes are near 1. A congruence preserves positive
/// semidefiniteness exactly, so feasibility is untouched while the internal
/// dynamic range (watt-scale corners against unit multiplier blocks) drops
/// to something an interior-point method can digest.
fn balance_lmi(
    side: usize,
    cst: Array2<f64>,
    terms: Vec<(usize, Array2<f64>)>,
) -> (Array2<f64>, Vec<(usize, Array2<f64>)>) {
    let mut rownorm = vec![0.0f64; side];
    let mut consider = |m: &Array2<f64>| {
        for i in 0..side {
            for j in 0..side {
                let a = m[(i, j)].abs();
                if a > rownorm[i] {
                    rownorm[i] = a;
                }
            }
        }
    };
    consider(&cst);
    for (_, m) in &terms {
        consider(m);
    }
    let mut d = vec![1.0f64; side];
    for i in 0..side {
        if rownorm[i] > 0.0 {
            d[i] = 1.0 / rownorm[i].sqrt();
        }
    }
    // Two more refinement sweeps against the scaled rows.
    for _ in 0..2 {
        let mut rn = vec![0.0f64; side];
        let mut consider = |m: &Array2<f64>| {
            for i in 0..side {
                for j in 0..side {
                    let a = (d[i] * m[(i, j)] * d[j]).abs();
                    if a > rn[i] {
                        rn[i] = a;
                    }
                }
            }
        };
        consider(&cst);
        for (_, m) in &terms {
            consider(m);
        }
        for i in 0..side {
            if rn[i] > 0.0 {
                d[i] /= rn[i].sqrt();
            }
        }
    }
    let apply = |m: &Array2<f64>| {
        Array2::from_shape_fn((side, side), |(i, j)| d[i] * m[(i, j)] * d[j])
    };
    (
        apply(&cst),
        terms.into_iter().map(|(v, m)| (v, apply(&m))).collect(),
    )
}

/// Ruiz equilibration: iteratively scale rows (uniformly inside SOC/PSD
/// blocks) and columns toward unit infinity norm, then scale the objective.
fn equilibrate(l: &mut Lowered) {
    let n = l.n;
    let mut col = vec![1.0f64; n];
    for _ in 0..10 {
        // Column norms across all rows.
        let mut cmax = vec![0.0f64; n];
        for r in 0..l.a_eq.nrows() {
            for j in 0..n {
                cmax[j] = cmax[j].max(l.a_eq[(r, j)].abs());
            }
        }
        for blk in &l.blocks {
            for (k, &j) in blk.active.iter().enumerate() {
                for r in 0..blk.dim {
                    cmax[j] = cmax[j].max(blk.a_act[(r, k)].abs());
                }
            }
        }
        let mut done = true;
        let mut dcol = vec![1.0f64; n];
        for j in 0..n {
            if cmax[j] > 0.0 {
                let s = 1.0 / cmax[j].sqrt();
                if (s - 1.0).abs() > 0.1 {
                    done = false;
                }
                dcol[j] = s;
                col[j] *= s;
            }
        }
        // Apply column scaling.
        for r in 0..l.a_eq.nrows() {
            for j in 0..n {
                l.a_eq[(r, j)] *= dcol[j];
            }
        }
        for blk in &mut l.blocks {
            for (k, &j) in blk.active.iter().enumerate() {
                for r in 0..blk.dim {
                    blk.a_act[(r, k)] *= dcol[j];
                }
            }
        }
        // Row scaling: per-row for eq/nonneg, per-block for soc/psd.
        for r in 0..l.a_eq.nrows() {
            let mut m = 0.0f64;
            for j in 0..n {
                m = m.max(l.a_eq[(r, j)].abs());
            }
            if m > 0.0 {
                let s = 1.0 / m.sqrt();
                if (s - 1.0).abs() > 0.1 {
                    done = false;
                }
                for j in 0..n {
                    l.a_eq[(r, j)] *= s;
                }
                l.b_eq[r] *= s;
            }
        }
        for blk in &mut l.blocks {
            match blk.kind {
                BlockKind::NonNeg => {
                    for r in 0..blk.dim {
                        let mut m = 0.0f64;
                        for k in 0..blk.active.len() {
                            m = m.max(blk.a_act[(r, k)].abs());
                        }
                        if m > 0.0 {
                            let s = 1.0 / m.sqrt();
                            if (s - 1.0).abs() > 0.1 {
                                done = false;
                            }
                            for k in 0..blk.active.len() {
                                blk.a_act[(r, k)] *= s;
                            }
                            blk.b[r] *= s;
                        }
                    }
                }
                BlockKind::Soc | BlockKind::Psd { .. } => {
                    let mut m = 0.0f64;
                    for r in 0..blk.dim {
                        for k in 0..blk.active.len() {
                            m = m.max(blk.a_act[(r, k)].abs());
                        }
                    }
                    if m > 0.0 {
                        let s = 1.0 / m.sqrt();
                        if (s - 1.0).abs() > 0.1 {
                            done = false;
                        }
                        for r in 0..blk.dim {
                            for k in 0..blk.active.len() {
                                blk.a_act[(r, k)] *= s;
                            }
                            blk.b[r] *= s;
                        }
                    }
                }
            }
        }
        if done {
            break;
        }
    }
    // Fold column scales into c; normalize objective magnitude.
    for j in 0..n {
        l.c[j] *= col[j];
    }
    let cmax = l.c.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
    let gamma = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
    for cj in &mut l.c {
        *cj *= gamma;
    }
    l.obj_scale = gamma;
    l.col_scale = col;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_round_trip_and_inner_product() {
        let a = ndarray::arr2(&[[2.0, 1.0, 0.5], [1.0, 3.0, -1.0], [0.5, -1.0, 4.0]]);
        let b = ndarray::arr2(&[[1.0, 0.0, 2.0], [0.0, 5.0, 1.0], [2.0, 1.0, -2.0]]);
        let sa = svec(&a);
        let sb = svec(&b);
        let dot: f64 = sa.iter().zip(sb.iter()).map(|(x, y)| x * y).sum();
        let tr = a.dot(&b).diag().sum();
        assert!((dot - tr).abs() < 1e-12);
        let back = unsvec(sa.as_slice().unwrap(), 3);
        assert!((&back - &a).iter().all(|x| x.abs() < 1e-14));
    }
}
