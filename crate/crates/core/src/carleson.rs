//! The variational Carleson operator over a bitile collection, its
//! linearization, the bilinear form `B_P`, the tree-estimate ratio, and
//! the major-subset construction.
//!
//! Sampling frequencies live on the integer grid `[0, 2^res)`: a real
//! frequency only matters through which dyadic interval it lies in, and
//! every such cell contains an integer at these resolutions. The supremum
//! over increasing sampling sequences is computed per cell by dynamic
//! programming over that grid, which is exact.

use crate::dyadic::{
    lp_norm_weighted, CellSet, DyadicFunction,
};
use crate::error::{Error, Result};
use crate::phase_plane::{density, size, Bitile, LinCell, Linearization};
use crate::variation::r_variation;
use crate::weights::{maximal_weighted, Weight};

/// Which limiting conditions activate a bitile for a block `(N_{j-1}, N_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `N_{j-1} not in omega_P` and `N_j in omega_{P_2}`.
    Standard,
    /// `N_{j-1} in omega_{P_1}` and `N_j not in omega_P`.
    Symmetric,
}

/// A bitile collection with a variation exponent and a variant choice.
#[derive(Debug, Clone)]
pub struct OperatorInstance {
    bitiles: Vec<Bitile>,
    r: f64,
    variant: Variant,
}

impl OperatorInstance {
    pub fn new(mut bitiles: Vec<Bitile>, r: f64, variant: Variant) -> Result<Self> {
        if !(r > 1.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "variation exponent r = {r} must lie in (1, infinity)"
            )));
        }
        bitiles.sort();
        bitiles.dedup();
        Ok(Self { bitiles, r, variant })
    }

    pub fn bitiles(&self) -> &[Bitile] {
        &self.bitiles
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    fn check_resolvable(&self, res: u32) -> Result<()> {
        for p in &self.bitiles {
            if !p.resolvable_at(res) {
                return Err(Error::Unresolvable(format!(
                    "bitile {p:?} not resolvable at resolution {res}"
                )));
            }
        }
        Ok(())
    }
}

/// Whether bitile `P` is active for the block `(n_prev, n)` under the
/// given variant. Conditions are the literal ones; for increasing
/// sequences they reduce to interval comparisons.
fn block_active(p: &Bitile, n_prev: u64, n: u64, variant: Variant) -> bool {
    let (lo, hi) = p.freq_bounds();
    let mid = lo + (hi - lo) / 2;
    match variant {
        Variant::Standard => {
            let prev_outside = n_prev < lo || n_prev >= hi;
            let n_in_upper = n >= mid && n < hi;
            prev_outside && n_in_upper
        }
        Variant::Symmetric => {
            let prev_in_lower = n_prev >= lo && n_prev < mid;
            let n_outside = n < lo || n >= hi;
            prev_in_lower && n_outside
        }
    }
}

/// Per-cell block evaluator: `v(n_prev, n)` is the sum of
/// `<f, phi_{P_1}> phi_{P_1}(x)` over bitiles activated by the pair.
struct BlockEvaluator {
    /// For the standard variant, indexed by `n`: `(lo_P, contribution)`
    /// sorted by `lo_P`, with suffix sums. For the symmetric variant,
    /// indexed by `n_prev`: `(hi_P, contribution)` sorted by `hi_P`, with
    /// prefix sums.
    per_point: Vec<(Vec<u64>, Vec<f64>)>,
    variant: Variant,
}

impl BlockEvaluator {
    fn new(
        cell: usize,
        res: u32,
        bitiles: &[Bitile],
        contribs: &[f64],
        variant: Variant,
    ) -> Self {
        let grid = 1usize << res;
        let mut per_point: Vec<Vec<(u64, f64)>> = vec![Vec::new(); grid];
        for (p, &contrib) in bitiles.iter().zip(contribs) {
            if contrib == 0.0 {
                continue;
            }
            if !p.time_interval().cell_range(res).expect("resolvable").contains(&cell) {
                continue;
            }
            let (lo, hi) = p.freq_bounds();
            let mid = lo + (hi - lo) / 2;
            match variant {
                Variant::Standard => {
                    for n in mid..hi {
                        per_point[n as usize].push((lo, contrib));
                    }
                }
                Variant::Symmetric => {
                    for np in lo..mid {
                        per_point[np as usize].push((hi, contrib));
                    }
                }
            }
        }
        let per_point = per_point
            .into_iter()
            .map(|mut list| {
                list.sort_by_key(|&(key, _)| key);
                let keys: Vec<u64> = list.iter().map(|&(k, _)| k).collect();
                let mut sums = Vec::with_capacity(list.len() + 1);
                sums.push(0.0);
                let mut acc = 0.0;
                for &(_, c) in &list {
                    acc += c;
                    sums.push(acc);
                }
                (keys, sums)
            })
            .collect();
        Self { per_point, variant }
    }

    /// Block value for the increasing pair `n_prev < n`.
    fn value(&self, n_prev: u64, n: u64) -> f64 {
        match self.variant {
            Variant::Standard => {
                // active iff lo_P > n_prev (given n in omega_{P_2})
                let (keys, sums) = &self.per_point[n as usize];
                let start = keys.partition_point(|&lo| lo <= n_prev);
                sums[sums.len() - 1] - sums[start]
            }
            Variant::Symmetric => {
                // active iff hi_P <= n (given n_prev in omega_{P_1})
                let (keys, sums) = &self.per_point[n_prev as usize];
                let end = keys.partition_point(|&hi| hi <= n);
                sums[end]
            }
        }
    }
}

struct CellMaximizer {
    /// best r-th power total for sequences ending at each grid point
    best: Vec<f64>,
    /// predecessor grid point, usize::MAX for a sequence start
    pred: Vec<usize>,
    /// grid point where the overall maximum ends
    argmax: usize,
}

fn maximize_cell(eval: &BlockEvaluator, grid: usize, r: f64) -> CellMaximizer {
    let mut best = vec![0.0f64; grid];
    let mut pred = vec![usize::MAX; grid];
    let mut overall = 0.0f64;
    let mut argmax = 0usize;
    for n in 0..grid {
        for n_prev in 0..n {
            let v = eval.value(n_prev as u64, n as u64);
            let cand = best[n_prev] + if v == 0.0 { 0.0 } else { v.abs().powf(r) };
            if cand > best[n] {
                best[n] = cand;
                pred[n] = n_prev;
            }
        }
        if best[n] > overall {
            overall = best[n];
            argmax = n;
        }
    }
    CellMaximizer { best, pred, argmax }
}

/// The variational operator field
/// `C_{r,P} f(x) = sup over increasing sequences of
/// (sum_j |block_j(x)|^r)^{1/r}`.
pub fn carleson_variation(inst: &OperatorInstance, f: &DyadicFunction) -> Result<DyadicFunction> {
    let res = f.res();
    inst.check_resolvable(res)?;
    let contribs = per_bitile_coefficients(inst, f)?;
    let grid = 1usize << res;
    let mut out = vec![0.0f64; f.num_cells()];
    for (cell, slot) in out.iter_mut().enumerate() {
        let scaled: Vec<f64> = inst
            .bitiles
            .iter()
            .zip(&contribs)
            .map(|(p, &c)| c * packet_value(p, cell, res))
            .collect();
        let eval = BlockEvaluator::new(cell, res, &inst.bitiles, &scaled, inst.variant);
        let m = maximize_cell(&eval, grid, inst.r);
        *slot = m.best[m.argmax].powf(1.0 / inst.r);
    }
    DyadicFunction::from_values(res, out)
}

/// `<f, phi_{P_1}>` for every bitile of the instance.
fn per_bitile_coefficients(inst: &OperatorInstance, f: &DyadicFunction) -> Result<Vec<f64>> {
    crate::phase_plane::lower_coefficients(&inst.bitiles, f)
}

/// Value of `phi_{P_1}` at a single cell.
fn packet_value(p: &Bitile, cell: usize, res: u32) -> f64 {
    let range = p.time_interval().cell_range(res).expect("resolvable");
    if !range.contains(&cell) {
        return 0.0;
    }
    let inner_res = res - p.scale();
    let local = (cell - range.start) as u64;
    let amp = 2f64.powi(p.scale() as i32).sqrt();
    amp * crate::walsh::walsh_sign(2 * p.freq_index(), local, inner_res)
}

/// The maximizing sampling sequence and normalized coefficients per cell:
/// `a_j = sgn(v_j) |v_j|^{r-1} / (sum |v_j|^r)^{(r-1)/r}`, so that
/// `sum_j |a_j|^{r'} = 1` and `sum_j a_j v_j = C_{r,P} f(x)`.
pub fn linearize(inst: &OperatorInstance, f: &DyadicFunction) -> Result<Linearization> {
    let res = f.res();
    inst.check_resolvable(res)?;
    let contribs = per_bitile_coefficients(inst, f)?;
    let grid = 1usize << res;
    let r = inst.r;
    let mut cells = Vec::with_capacity(f.num_cells());
    for cell in 0..f.num_cells() {
        let scaled: Vec<f64> = inst
            .bitiles
            .iter()
            .zip(&contribs)
            .map(|(p, &c)| c * packet_value(p, cell, res))
            .collect();
        let eval = BlockEvaluator::new(cell, res, &inst.bitiles, &scaled, inst.variant);
        let m = maximize_cell(&eval, grid, r);
        if m.best[m.argmax] == 0.0 {
            cells.push(LinCell::default());
            continue;
        }
        // walk predecessors back to the sequence start
        let mut path = vec![m.argmax];
        let mut cur = m.argmax;
        while m.pred[cur] != usize::MAX {
            cur = m.pred[cur];
            path.push(cur);
        }
        path.reverse();
        let freqs: Vec<u64> = path.iter().map(|&n| n as u64).collect();
        let blocks: Vec<f64> = path
            .windows(2)
            .map(|w| eval.value(w[0] as u64, w[1] as u64))
            .collect();
        let total: f64 = blocks.iter().map(|v| v.abs().powf(r)).sum();
        let denom = total.powf((r - 1.0) / r);
        let coeffs: Vec<f64> = blocks
            .iter()
            .map(|&v| {
                if v == 0.0 {
                    0.0
                } else {
                    v.signum() * v.abs().powf(r - 1.0) / denom
                }
            })
            .collect();
        cells.push(LinCell { freqs, coeffs });
    }
    Linearization::new(res, cells)
}

/// `a_P(x)`: the sum of `a_j(x)` over blocks that activate `P`.
fn a_p_at_cell(p: &Bitile, lc: &LinCell, variant: Variant) -> f64 {
    let mut acc = 0.0;
    for j in 0..lc.coeffs.len() {
        if block_active(p, lc.freqs[j], lc.freqs[j + 1], variant) {
            acc += lc.coeffs[j];
        }
    }
    acc
}

/// The bilinear form
/// `B_P(f,g) = sum_P <f, phi_{P_1}> <phi_{P_1} a_P, g w>`,
/// summed in bitile sort order so results are reproducible.
pub fn bilinear_form(
    inst: &OperatorInstance,
    f: &DyadicFunction,
    g: &DyadicFunction,
    lin: &Linearization,
    w: &Weight,
) -> Result<f64> {
    let res = f.res();
    inst.check_resolvable(res)?;
    if g.res() != res || lin.res() != res || w.res() != res {
        return Err(Error::ResolutionMismatch(res, g.res().min(lin.res()).min(w.res())));
    }
    let contribs = per_bitile_coefficients(inst, f)?;
    let cw = f.cell_width();
    let mut total = 0.0;
    for (p, &c) in inst.bitiles.iter().zip(&contribs) {
        if c == 0.0 {
            continue;
        }
        let mut pairing = 0.0;
        for cell in p.time_interval().cell_range(res)? {
            let lc = lin.cell(cell);
            if lc.coeffs.is_empty() {
                continue;
            }
            let gw = g.values()[cell] * w.values()[cell];
            if gw == 0.0 {
                continue;
            }
            let a = a_p_at_cell(p, lc, inst.variant);
            if a != 0.0 {
                pairing += packet_value(p, cell, res) * a * gw;
            }
        }
        total += c * pairing * cw;
    }
    Ok(total)
}

/// The linearized operator restricted to one tree, evaluated pointwise:
/// `sum_{P in T} <f, phi_{P_1}> phi_{P_1}(x) a_P(x)`.
fn linearized_tree_field(
    members: &[Bitile],
    f: &DyadicFunction,
    lin: &Linearization,
    variant: Variant,
) -> Result<DyadicFunction> {
    let res = f.res();
    let coeffs = crate::phase_plane::lower_coefficients(members, f)?;
    let mut out = vec![0.0f64; f.num_cells()];
    for (p, &c) in members.iter().zip(&coeffs) {
        if c == 0.0 {
            continue;
        }
        for cell in p.time_interval().cell_range(res)? {
            let lc = lin.cell(cell);
            if lc.coeffs.is_empty() {
                continue;
            }
            let a = a_p_at_cell(p, lc, variant);
            if a != 0.0 {
                out[cell] += c * packet_value(p, cell, res) * a;
            }
        }
    }
    DyadicFunction::from_values(res, out)
}

/// Empirical tree-estimate constant:
/// `||g C_T f||_{L^s(w)} / (w(I_T)^{1/s} size(T) density(T))`.
/// Returns `0` when the numerator vanishes; errors on an empty tree or a
/// vanishing denominator with nonzero numerator.
#[allow(clippy::too_many_arguments)]
pub fn tree_ratio(
    tree: &crate::phase_plane::Tree,
    f: &DyadicFunction,
    g: &DyadicFunction,
    lin: &Linearization,
    w: &Weight,
    r: f64,
    s: f64,
) -> Result<f64> {
    let rp = r / (r - 1.0);
    if !(s >= 1.0 && s <= rp) {
        return Err(Error::InvalidArgument(format!(
            "tree estimate exponent s = {s} outside [1, r'] = [1, {rp}]"
        )));
    }
    if tree.is_empty() {
        return Err(Error::DegenerateTree);
    }
    let field = linearized_tree_field(tree.members(), f, lin, Variant::Standard)?;
    let numer = lp_norm_weighted(&field.mul_pointwise(g)?, w, s)?;
    if numer == 0.0 {
        return Ok(0.0);
    }
    let sz = size(tree.members(), f, w)?;
    let dens = density(tree.members(), lin, g, w, r)?;
    let denom = w.measure(&tree.interval())?.powf(1.0 / s) * sz * dens;
    if denom == 0.0 {
        return Err(Error::DegenerateTree);
    }
    Ok(numer / denom)
}

/// Outcome of the major-subset construction: one side keeps full measure,
/// the other is trimmed where the weighted maximal function of the
/// opposite indicator is large.
#[derive(Debug, Clone)]
pub struct MajorSubsets {
    pub f_major: CellSet,
    pub g_major: CellSet,
    /// 1: `w(F) <= w(G)` (F untouched); 2: otherwise (G untouched).
    pub case: u8,
    /// The smallest power of two making the trimmed side major.
    pub c0: f64,
}

/// Build major subsets of `F` and `G`. With the weight rescaled so the
/// larger of the two masses is one, the trimmed set removes
/// `{M_w 1 > C_0 * (smaller mass)}`, scanning `C_0` over powers of two;
/// the weak-(1,1) bound of `M_w` with norm one guarantees `C_0 = 4`
/// suffices.
pub fn major_subsets(
    f_set: &CellSet,
    g_set: &CellSet,
    w: &Weight,
) -> Result<MajorSubsets> {
    let wf = w.measure_set(f_set)?;
    let wg = w.measure_set(g_set)?;
    if wf == 0.0 || wg == 0.0 {
        return Err(Error::InvalidArgument(
            "major subsets need sets of positive measure".into(),
        ));
    }
    // thresholds use mass ratios, which are invariant under rescaling w;
    // this realizes the normalization max(w(F), w(G)) = 1
    let (case, base, trimmed, kept) = if wf <= wg {
        (1u8, wf / wg, g_set, f_set)
    } else {
        (2u8, wg / wf, f_set, g_set)
    };
    let m = maximal_weighted(&DyadicFunction::indicator(kept), w)?;
    let trimmed_mass = w.measure_set(trimmed)?;
    let mut c0 = 1.0f64;
    loop {
        let cut = m.values().iter().map(|&v| v > c0 * base).collect::<Vec<bool>>();
        let candidate = trimmed.minus_where(|cell| cut[cell]);
        if w.measure_set(&candidate)? > trimmed_mass / 2.0 {
            let (f_major, g_major) = if case == 1 {
                (f_set.clone(), candidate)
            } else {
                (candidate, g_set.clone())
            };
            return Ok(MajorSubsets { f_major, g_major, case, c0 });
        }
        c0 *= 2.0;
        assert!(c0 <= 2f64.powi(40), "major-subset scan failed to terminate");
    }
}

/// Pointwise r-variation of the Walsh partial-sum ladder
/// `0, S_0 f(x), S_1 f(x), ..., S_{2^res - 1} f(x)` (the leading zero is
/// `S_{-1} = 0`).
pub fn partial_sum_variation_field(f: &DyadicFunction, r: f64) -> Result<DyadicFunction> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "variation exponent {r} < 1"
        )));
    }
    let res = f.res();
    let coeffs = crate::walsh::fwht(f);
    let grid = 1usize << res;
    let mut out = vec![0.0f64; grid];
    let mut ladder = vec![0.0f64; grid + 1];
    for (cell, slot) in out.iter_mut().enumerate() {
        ladder[0] = 0.0;
        let mut acc = 0.0;
        for n in 0..grid {
            acc += coeffs.coeffs()[n]
                * crate::walsh::walsh_sign(n as u64, cell as u64, res);
            ladder[n + 1] = acc;
        }
        *slot = r_variation(&ladder, r)?;
    }
    DyadicFunction::from_values(res, out)
}
