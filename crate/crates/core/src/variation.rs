//! r-variation norms, jump counting, and stopped martingale transforms
//! over the dyadic martingale ladder `E_0 f, E_1 f, ..., E_res f`.
//!
//! On a finite grid the supremum over sampling sequences is attained, so
//! the per-cell dynamic program computes it exactly; exhaustive
//! subsequence enumeration serves as the oracle in tests.

use crate::dyadic::{conditional_expectation, lp_norm_weighted, DyadicFunction};
use crate::error::{Error, Result};
use crate::weights::Weight;

/// Exact r-variation of a finite sequence: the sup over increasing index
/// subsequences `i_0 < ... < i_M` of `(sum_k |a_{i_k} - a_{i_{k-1}}|^r)^{1/r}`,
/// by dynamic programming over index pairs in O(K^2). `r = infinity`
/// returns the largest forward gap `max_{i<j} |a_j - a_i|`.
pub fn r_variation(seq: &[f64], r: f64) -> Result<f64> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "variation exponent {r} < 1"
        )));
    }
    if seq.len() < 2 {
        return Ok(0.0);
    }
    if r.is_infinite() {
        let mut lo = seq[0];
        let mut hi = seq[0];
        let mut best = 0.0f64;
        for &a in &seq[1..] {
            best = best.max(a - lo).max(hi - a);
            lo = lo.min(a);
            hi = hi.max(a);
        }
        return Ok(best);
    }
    // best[j]: largest sum of r-th power increments over subsequences ending at j
    let mut best = vec![0.0f64; seq.len()];
    let mut overall = 0.0f64;
    for j in 1..seq.len() {
        for i in 0..j {
            let cand = best[i] + (seq[j] - seq[i]).abs().powf(r);
            if cand > best[j] {
                best[j] = cand;
            }
        }
        if best[j] > overall {
            overall = best[j];
        }
    }
    Ok(overall.powf(1.0 / r))
}

/// Maximal number of increments exceeding `lambda` over increasing
/// subsequences, computed exactly by the same O(K^2) recursion
/// (`jumps[j] = max over i<j with |a_j - a_i| > lambda of jumps[i] + 1`).
pub fn jump_count(seq: &[f64], lambda: f64) -> Result<usize> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "jump threshold {lambda} must be positive"
        )));
    }
    if seq.len() < 2 {
        return Ok(0);
    }
    let mut jumps = vec![0usize; seq.len()];
    let mut best = 0usize;
    for j in 1..seq.len() {
        for i in 0..j {
            if (seq[j] - seq[i]).abs() > lambda && jumps[i] + 1 > jumps[j] {
                jumps[j] = jumps[i] + 1;
            }
        }
        best = best.max(jumps[j]);
    }
    Ok(best)
}

/// The full martingale ladder `E_0 f, ..., E_res f`.
pub(crate) fn martingale_ladder(f: &DyadicFunction) -> Vec<DyadicFunction> {
    (0..=f.res())
        .map(|k| conditional_expectation(f, k).expect("scale in range"))
        .collect()
}

/// Pointwise r-variation of the martingale averages: at each cell the
/// r-variation of `(E_0 f(x), ..., E_res f(x))`, equivalently of partial
/// sums of the Haar bands.
pub fn martingale_variation_field(f: &DyadicFunction, r: f64) -> Result<DyadicFunction> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "variation exponent {r} < 1"
        )));
    }
    let ladder = martingale_ladder(f);
    let mut out = vec![0.0; f.num_cells()];
    let mut seq = vec![0.0; ladder.len()];
    for (cell, slot) in out.iter_mut().enumerate() {
        for (k, e) in ladder.iter().enumerate() {
            seq[k] = e.values()[cell];
        }
        *slot = r_variation(&seq, r)?;
    }
    DyadicFunction::from_values(f.res(), out)
}

/// Empirical constant of the weighted variational inequality:
/// `||V_r(f)||_{L^p(w)} / ||f||_{L^p(w)}`.
pub fn lepingle_ratio(f: &DyadicFunction, w: &Weight, p: f64, r: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("exponent p = {p} must exceed 1")));
    }
    if !(r > 2.0) {
        return Err(Error::InvalidArgument(format!("variation exponent r = {r} must exceed 2")));
    }
    if f.sup_norm() == 0.0 {
        return Err(Error::InvalidArgument("zero function".into()));
    }
    let field = martingale_variation_field(f, r)?;
    Ok(lp_norm_weighted(&field, w, p)? / lp_norm_weighted(f, w, p)?)
}

/// Empirical constant of the endpoint jump inequality:
/// `||lambda (M_lambda)^{1/2}||_{L^p(w)} / ||f||_{L^p(w)}` where
/// `M_lambda` counts lambda-jumps of the martingale averages cell-wise.
pub fn jump_ratio(f: &DyadicFunction, w: &Weight, p: f64, lambda: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("exponent p = {p} must exceed 1")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "jump threshold {lambda} must be positive"
        )));
    }
    if f.sup_norm() == 0.0 {
        return Err(Error::InvalidArgument("zero function".into()));
    }
    let ladder = martingale_ladder(f);
    let mut field = vec![0.0; f.num_cells()];
    let mut seq = vec![0.0; ladder.len()];
    for (cell, slot) in field.iter_mut().enumerate() {
        for (k, e) in ladder.iter().enumerate() {
            seq[k] = e.values()[cell];
        }
        *slot = lambda * (jump_count(&seq, lambda)? as f64).sqrt();
    }
    let field = DyadicFunction::from_values(f.res(), field)?;
    Ok(lp_norm_weighted(&field, w, p)? / lp_norm_weighted(f, w, p)?)
}

/// A scale-valued stopping time: `N(x) = k` on level sets that are unions
/// of dyadic intervals of length `2^-k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoppingTime {
    res: u32,
    levels: Vec<u32>,
}

impl StoppingTime {
    pub fn new(res: u32, levels: Vec<u32>) -> Result<Self> {
        if levels.len() != 1usize << res {
            return Err(Error::NotStoppingTime(format!(
                "expected 2^{res} level entries, got {}",
                levels.len()
            )));
        }
        let n = levels.len();
        let mut x = 0usize;
        while x < n {
            let k = levels[x];
            if k > res {
                return Err(Error::NotStoppingTime(format!(
                    "scale {k} exceeds resolution {res}"
                )));
            }
            let block = 1usize << (res - k);
            if x % block != 0 {
                return Err(Error::NotStoppingTime(format!(
                    "level set of scale {k} not aligned at cell {x}"
                )));
            }
            if levels[x..x + block].iter().any(|&v| v != k) {
                return Err(Error::NotStoppingTime(format!(
                    "level set of scale {k} is not a union of dyadic intervals of length 2^-{k}"
                )));
            }
            x += block;
        }
        Ok(Self { res, levels })
    }

    /// The constant stopping time `N = k`.
    pub fn constant(res: u32, k: u32) -> Result<Self> {
        if k > res {
            return Err(Error::NotStoppingTime(format!(
                "scale {k} exceeds resolution {res}"
            )));
        }
        Ok(Self { res, levels: vec![k; 1usize << res] })
    }

    pub fn res(&self) -> u32 {
        self.res
    }

    pub fn scale_at(&self, cell: usize) -> u32 {
        self.levels[cell]
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }
}

/// Signed sum of stopped martingale blocks:
/// `sum_k eps_k (E_{N_k(x)} f(x) - E_{N_{k-1}(x)} f(x))` for the chain
/// `stops = [N_0, ..., N_K]` and `signs = [eps_1, ..., eps_K]`.
pub fn stopping_transform(
    f: &DyadicFunction,
    stops: &[StoppingTime],
    signs: &[i8],
) -> Result<DyadicFunction> {
    if stops.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two stopping times (one block)".into(),
        ));
    }
    if signs.len() + 1 != stops.len() {
        return Err(Error::InvalidArgument(format!(
            "{} signs for {} blocks",
            signs.len(),
            stops.len() - 1
        )));
    }
    if let Some(s) = signs.iter().find(|&&s| s != 1 && s != -1) {
        return Err(Error::InvalidArgument(format!("sign {s} not +-1")));
    }
    for st in stops {
        if st.res() != f.res() {
            return Err(Error::ResolutionMismatch(st.res(), f.res()));
        }
    }
    for pair in stops.windows(2) {
        for cell in 0..f.num_cells() {
            if pair[0].scale_at(cell) >= pair[1].scale_at(cell) {
                return Err(Error::InvalidArgument(format!(
                    "stopping times not strictly increasing at cell {cell}"
                )));
            }
        }
    }
    let ladder = martingale_ladder(f);
    let mut out = vec![0.0; f.num_cells()];
    for (cell, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &sign) in signs.iter().enumerate() {
            let lo = stops[j].scale_at(cell) as usize;
            let hi = stops[j + 1].scale_at(cell) as usize;
            acc += sign as f64 * (ladder[hi].values()[cell] - ladder[lo].values()[cell]);
        }
        *slot = acc;
    }
    DyadicFunction::from_values(f.res(), out)
}
