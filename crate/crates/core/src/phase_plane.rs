//! Bitiles, the bitile order, trees and overlapping splits, the tree
//! square function, and the size / density functionals.
//!
//! Size and density are suprema over trees with arbitrary dominating tops;
//! we enumerate every bitile dominating some member's relevant tile within
//! the ambient resolution, which is finite and exhaustive at desk scale.
//! The maximizing tree for a fixed top is always the full set of dominated
//! members, since adding members never decreases the numerator.

use std::collections::BTreeSet;

use crate::dyadic::{inner, DyadicFunction, DyadicInterval};
use crate::error::{Error, Result};
use crate::walsh::{packet, tile_less, Tile};
use crate::weights::Weight;

/// Resolution cap for the size/density suprema and tree selection; keeps
/// the O(|P| 2^res) candidate enumeration interactive.
pub const MAX_PHASE_PLANE_RES: u32 = 8;

/// A dyadic time-frequency rectangle of area two:
/// `I_P = [m 2^-k, (m+1) 2^-k)`, `omega_P = [n 2^{k+1}, (n+1) 2^{k+1})`.
/// Splits into a lower tile `P_1` and an upper tile `P_2` of area one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitile {
    k: u32,
    m: u64,
    n: u64,
}

impl Bitile {
    pub fn new(k: u32, m: u64, n: u64) -> Result<Self> {
        if k > crate::dyadic::MAX_RES {
            return Err(Error::InvalidArgument(format!(
                "bitile scale {k} exceeds resolution cap"
            )));
        }
        if m >= 1u64 << k {
            return Err(Error::InvalidArgument(format!(
                "bitile time position {m} out of range at scale {k}"
            )));
        }
        Ok(Self { k, m, n })
    }

    pub fn scale(&self) -> u32 {
        self.k
    }

    pub fn time_position(&self) -> u64 {
        self.m
    }

    pub fn freq_index(&self) -> u64 {
        self.n
    }

    pub fn time_interval(&self) -> DyadicInterval {
        DyadicInterval::new(self.k, self.m).expect("bitile invariant")
    }

    /// `[n 2^{k+1}, (n+1) 2^{k+1})` as integer endpoints.
    pub fn freq_bounds(&self) -> (u64, u64) {
        (self.n << (self.k + 1), (self.n + 1) << (self.k + 1))
    }

    /// Lower tile `P_1` (bottom frequency half).
    pub fn lower(&self) -> Tile {
        Tile::new(self.k, self.m, 2 * self.n).expect("bitile invariant")
    }

    /// Upper tile `P_2` (top frequency half).
    pub fn upper(&self) -> Tile {
        Tile::new(self.k, self.m, 2 * self.n + 1).expect("bitile invariant")
    }

    pub fn resolvable_at(&self, res: u32) -> bool {
        self.k < res && (self.n + 1) << (self.k + 1) <= 1u64 << res
    }
}

/// Bitile order: rectangles intersect and `I_P` is contained in `I_Q`.
pub fn bitile_less(p: &Bitile, q: &Bitile) -> bool {
    let (a_lo, a_hi) = p.freq_bounds();
    let (b_lo, b_hi) = q.freq_bounds();
    q.time_interval().contains(&p.time_interval()) && a_lo < b_hi && b_lo < a_hi
}

/// A finite set of bitiles dominated by a common top (the top need not be
/// a member).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    top: Bitile,
    members: Vec<Bitile>,
}

impl Tree {
    pub fn new(top: Bitile, mut members: Vec<Bitile>) -> Result<Self> {
        members.sort();
        members.dedup();
        if let Some(bad) = members.iter().find(|p| !bitile_less(p, &top)) {
            return Err(Error::InvalidArgument(format!(
                "bitile {bad:?} is not dominated by the tree top {top:?}"
            )));
        }
        Ok(Self { top, members })
    }

    pub fn top(&self) -> &Bitile {
        &self.top
    }

    pub fn members(&self) -> &[Bitile] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Top interval `I_T`.
    pub fn interval(&self) -> DyadicInterval {
        self.top.time_interval()
    }

    /// Members whose upper tile is dominated by the top's upper tile.
    /// A member with the top's full frequency interval lands here.
    pub fn t2_members(&self) -> Vec<Bitile> {
        self.members
            .iter()
            .copied()
            .filter(|p| tile_less(&p.upper(), &self.top.upper()))
            .collect()
    }

    pub fn t1_members(&self) -> Vec<Bitile> {
        self.members
            .iter()
            .copied()
            .filter(|p| !tile_less(&p.upper(), &self.top.upper()))
            .collect()
    }
}

/// Split into a 1-overlapping and a 2-overlapping tree over the same top.
pub fn split_tree(tree: &Tree) -> (Tree, Tree) {
    let t1 = Tree { top: tree.top, members: tree.t1_members() };
    let t2 = Tree { top: tree.top, members: tree.t2_members() };
    (t1, t2)
}

/// Lower-tile coefficients `<f, phi_{P_1}>` for each member.
pub(crate) fn lower_coefficients(bitiles: &[Bitile], f: &DyadicFunction) -> Result<Vec<f64>> {
    bitiles
        .iter()
        .map(|p| {
            if !p.resolvable_at(f.res()) {
                return Err(Error::Unresolvable(format!(
                    "bitile {p:?} not resolvable at resolution {}",
                    f.res()
                )));
            }
            inner(f, &packet(&p.lower(), f.res())?)
        })
        .collect()
}

/// Square function over a set of area-one tiles:
/// `(sum_p |<f,phi_p>|^2 1_{I_p} / |I_p|)^{1/2}`.
pub fn tile_square_function(tiles: &[Tile], f: &DyadicFunction) -> Result<DyadicFunction> {
    let res = f.res();
    let mut acc = vec![0.0f64; f.num_cells()];
    for t in tiles {
        if !t.resolvable_at(res) {
            return Err(Error::Unresolvable(format!(
                "tile {t:?} not resolvable at resolution {res}"
            )));
        }
        let c = inner(f, &packet(t, res)?)?;
        let weight = c * c / t.time_interval().len();
        for cell in t.time_interval().cell_range(res)? {
            acc[cell] += weight;
        }
    }
    DyadicFunction::from_values(res, acc.into_iter().map(f64::sqrt).collect())
}

/// The tree square function
/// `S_T f = (sum_{P in T} |<f,phi_{P_1}>|^2 1_{I_P} / |I_P|)^{1/2}`,
/// supported in the top interval.
pub fn tree_square_function(tree: &Tree, f: &DyadicFunction) -> Result<DyadicFunction> {
    let tiles: Vec<Tile> = tree.members.iter().map(|p| p.lower()).collect();
    tile_square_function(&tiles, f)
}

fn check_phase_plane_res(res: u32) -> Result<()> {
    if res > MAX_PHASE_PLANE_RES {
        return Err(Error::InvalidArgument(format!(
            "resolution {res} exceeds the phase-plane cap {MAX_PHASE_PLANE_RES}"
        )));
    }
    Ok(())
}

/// All bitiles `Q` whose upper tile dominates some member's upper tile:
/// the candidate tops of 2-overlapping trees.
pub(crate) fn size_candidate_tops(bitiles: &[Bitile]) -> BTreeSet<Bitile> {
    let mut out = BTreeSet::new();
    for p in bitiles {
        let (lo2, hi2) = {
            let (lo, hi) = p.freq_bounds();
            (lo + (hi - lo) / 2, hi)
        };
        for kq in 0..=p.k {
            let step = 1u64 << kq;
            let mq = p.m >> (p.k - kq);
            let mut a = lo2 / step;
            while a * step < hi2 {
                if a % 2 == 1 {
                    // [a*step, (a+1)*step) is the upper half of a bitile
                    out.insert(Bitile { k: kq, m: mq, n: (a - 1) / 2 });
                }
                a += 1;
            }
        }
    }
    out
}

/// All bitiles `Q > P` for some member `P`: the candidate suprema of the
/// density functional.
pub(crate) fn density_candidate_tops(bitiles: &[Bitile]) -> BTreeSet<Bitile> {
    let mut out = BTreeSet::new();
    for p in bitiles {
        for kq in 0..=p.k {
            let mq = p.m >> (p.k - kq);
            let shift = p.k - kq;
            let n_lo = p.n << shift;
            let n_hi = (p.n + 1) << shift;
            for nq in n_lo..n_hi {
                out.insert(Bitile { k: kq, m: mq, n: nq });
            }
        }
    }
    out
}

/// Energy of the maximal 2-overlapping tree with top `q`:
/// `||S_T f||_{L^2(w)}^2` for `T = {P : P_2 < Q_2}`.
pub(crate) fn t2_energy(
    bitiles: &[Bitile],
    coeffs: &[f64],
    mass_over_len: &[f64],
    q: &Bitile,
) -> f64 {
    let q2 = q.upper();
    bitiles
        .iter()
        .zip(coeffs)
        .zip(mass_over_len)
        .filter(|((p, _), _)| tile_less(&p.upper(), &q2))
        .map(|((_, c), ml)| c * c * ml)
        .sum()
}

/// Size of a bitile collection: the best constant over 2-overlapping trees
/// `T` with arbitrary top `Q` of `||S_T f||_{L^2(w)} / w(I_Q)^{1/2}`.
pub fn size(bitiles: &[Bitile], f: &DyadicFunction, w: &Weight) -> Result<f64> {
    check_phase_plane_res(f.res())?;
    if f.res() != w.res() {
        return Err(Error::ResolutionMismatch(f.res(), w.res()));
    }
    if bitiles.is_empty() {
        return Ok(0.0);
    }
    let coeffs = lower_coefficients(bitiles, f)?;
    let mass_over_len: Vec<f64> = bitiles
        .iter()
        .map(|p| {
            let iv = p.time_interval();
            Ok(w.measure(&iv)? / iv.len())
        })
        .collect::<Result<_>>()?;
    let mut best = 0.0f64;
    for q in size_candidate_tops(bitiles) {
        let energy = t2_energy(bitiles, &coeffs, &mass_over_len, &q);
        let ratio = energy / w.measure(&q.time_interval())?;
        if ratio > best {
            best = ratio;
        }
    }
    Ok(best.sqrt())
}

/// Exact weak-L1 norm `sup_t t * w({|g| > t})`, by sweeping the finite
/// value set of `|g|`.
pub fn weak_l1_norm(g: &DyadicFunction, w: &Weight) -> Result<f64> {
    if g.res() != w.res() {
        return Err(Error::ResolutionMismatch(g.res(), w.res()));
    }
    let mut vals: Vec<f64> = g.values().iter().map(|v| v.abs()).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup();
    let mut best = 0.0f64;
    for &v in &vals {
        if v == 0.0 {
            continue;
        }
        // t -> v from below: w({|g| > t}) -> w({|g| >= v})
        let mass: f64 = g
            .values()
            .iter()
            .zip(w.values())
            .filter(|(gv, _)| gv.abs() >= v)
            .map(|(_, &wv)| wv)
            .sum::<f64>()
            * g.cell_width();
        best = best.max(v * mass);
    }
    Ok(best)
}

/// `L^p`-normalized size: sup over 2-overlapping trees of
/// `||S_T f||_{L^p(w)} / w(I_Q)^{1/p}`. At `p = 2` this equals [`size`].
pub fn size_lp(bitiles: &[Bitile], f: &DyadicFunction, w: &Weight, p: f64) -> Result<f64> {
    check_phase_plane_res(f.res())?;
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("size exponent {p} < 1")));
    }
    if bitiles.is_empty() {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    for q in size_candidate_tops(bitiles) {
        let q2 = q.upper();
        let members: Vec<Bitile> = bitiles
            .iter()
            .copied()
            .filter(|p| tile_less(&p.upper(), &q2))
            .collect();
        let tree = Tree { top: q, members };
        let s = tree_square_function(&tree, f)?;
        let ratio = crate::dyadic::lp_norm_weighted(&s, w, p)?
            / w.measure(&q.time_interval())?.powf(1.0 / p);
        best = best.max(ratio);
    }
    Ok(best)
}

/// Weak-(1,infinity)-normalized size: sup over 2-overlapping trees of
/// `||S_T f||_{L^{1,infty}(w)} / w(I_Q)`.
pub fn size_weak1(bitiles: &[Bitile], f: &DyadicFunction, w: &Weight) -> Result<f64> {
    check_phase_plane_res(f.res())?;
    if bitiles.is_empty() {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    for q in size_candidate_tops(bitiles) {
        let q2 = q.upper();
        let members: Vec<Bitile> = bitiles
            .iter()
            .copied()
            .filter(|p| tile_less(&p.upper(), &q2))
            .collect();
        let tree = Tree { top: q, members };
        let s = tree_square_function(&tree, f)?;
        let ratio = weak_l1_norm(&s, w)? / w.measure(&q.time_interval())?;
        best = best.max(ratio);
    }
    Ok(best)
}

/// Per-cell sampling sequence with normalized block coefficients: at cell
/// `x`, increasing frequencies `N_0 < ... < N_M` and coefficients
/// `a_1, ..., a_M` with `sum |a_k|^{r'} = 1` whenever `M >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    res: u32,
    cells: Vec<LinCell>,
}

/// One cell of a [`Linearization`]: `freqs` has length `M+1` (or 0 when
/// empty) and `coeffs` length `M`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinCell {
    pub freqs: Vec<u64>,
    pub coeffs: Vec<f64>,
}

impl Linearization {
    pub fn new(res: u32, cells: Vec<LinCell>) -> Result<Self> {
        if cells.len() != 1usize << res {
            return Err(Error::InvalidArgument(format!(
                "expected 2^{res} linearization cells, got {}",
                cells.len()
            )));
        }
        for (i, c) in cells.iter().enumerate() {
            if c.freqs.is_empty() {
                if !c.coeffs.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "cell {i}: coefficients without frequencies"
                    )));
                }
                continue;
            }
            if c.freqs.len() != c.coeffs.len() + 1 {
                return Err(Error::InvalidArgument(format!(
                    "cell {i}: {} frequencies need {} coefficients",
                    c.freqs.len(),
                    c.freqs.len() - 1
                )));
            }
            if c.freqs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "cell {i}: frequencies not strictly increasing"
                )));
            }
            if *c.freqs.last().unwrap() >= 1u64 << res {
                return Err(Error::InvalidArgument(format!(
                    "cell {i}: frequency beyond 2^{res}"
                )));
            }
        }
        Ok(Self { res, cells })
    }

    /// Empty linearization (`M = 0` everywhere).
    pub fn trivial(res: u32) -> Self {
        Self { res, cells: vec![LinCell::default(); 1usize << res] }
    }

    pub fn res(&self) -> u32 {
        self.res
    }

    pub fn cells(&self) -> &[LinCell] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &LinCell {
        &self.cells[i]
    }

    /// Check the Hoelder normalization `sum_k |a_k|^{r'} = 1` on every
    /// nonempty cell.
    pub fn check_normalization(&self, r: f64) -> Result<()> {
        let rp = r / (r - 1.0);
        for (i, c) in self.cells.iter().enumerate() {
            if c.coeffs.is_empty() {
                continue;
            }
            let s: f64 = c.coeffs.iter().map(|a| a.abs().powf(rp)).sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "cell {i}: coefficient normalization is {s}, want 1"
                )));
            }
        }
        Ok(())
    }
}

/// Precomputed per-cell data for scoring density candidate tops; shared
/// between [`density`] and the density-driven tree selection.
pub(crate) struct DensityEvaluator<'a> {
    res: u32,
    cell_width: f64,
    rp: f64,
    /// |g(x)|^{r'} w(x) per cell
    gw: Vec<f64>,
    /// per cell: block frequencies N_1..N_M and prefix sums of |a_k|^{r'}
    per_cell: Vec<(Vec<u64>, Vec<f64>)>,
    w: &'a Weight,
}

impl<'a> DensityEvaluator<'a> {
    pub(crate) fn new(
        lin: &Linearization,
        g: &DyadicFunction,
        w: &'a Weight,
        r: f64,
    ) -> Result<Self> {
        if !(r > 2.0) {
            return Err(Error::InvalidArgument(format!(
                "density exponent r = {r} must exceed 2"
            )));
        }
        check_phase_plane_res(g.res())?;
        if g.res() != w.res() {
            return Err(Error::ResolutionMismatch(g.res(), w.res()));
        }
        if lin.res() != g.res() {
            return Err(Error::ResolutionMismatch(lin.res(), g.res()));
        }
        let rp = r / (r - 1.0);
        let gw: Vec<f64> = g
            .values()
            .iter()
            .zip(w.values())
            .map(|(&gv, &wv)| gv.abs().powf(rp) * wv)
            .collect();
        let per_cell: Vec<(Vec<u64>, Vec<f64>)> = lin
            .cells()
            .iter()
            .map(|c| {
                let freqs: Vec<u64> = c.freqs.iter().skip(1).copied().collect();
                let mut pref = Vec::with_capacity(freqs.len() + 1);
                pref.push(0.0);
                let mut acc = 0.0;
                for a in &c.coeffs {
                    acc += a.abs().powf(rp);
                    pref.push(acc);
                }
                (freqs, pref)
            })
            .collect();
        Ok(Self { res: g.res(), cell_width: g.cell_width(), rp, gw, per_cell, w })
    }

    /// The density value contributed by one candidate top.
    pub(crate) fn eval(&self, q: &Bitile) -> Result<f64> {
        let (lo, hi) = q.freq_bounds();
        let mut integral = 0.0;
        for cell in q.time_interval().cell_range(self.res)? {
            if self.gw[cell] != 0.0 {
                let (freqs, pref) = &self.per_cell[cell];
                let start = freqs.partition_point(|&f| f < lo);
                let end = freqs.partition_point(|&f| f < hi);
                integral += self.gw[cell] * (pref[end] - pref[start]);
            }
        }
        integral *= self.cell_width;
        Ok((integral / self.w.measure(&q.time_interval())?).powf(1.0 / self.rp))
    }
}

/// Density of a collection against a linearization: the sup over members
/// `P` and bitiles `Q > P` of
/// `((1/w(I_Q)) int_{I_Q} |g|^{r'} sum_{k: N_k in omega_Q} |a_k|^{r'} w)^{1/r'}`.
pub fn density(
    bitiles: &[Bitile],
    lin: &Linearization,
    g: &DyadicFunction,
    w: &Weight,
    r: f64,
) -> Result<f64> {
    let eval = DensityEvaluator::new(lin, g, w, r)?;
    if bitiles.is_empty() {
        return Ok(0.0);
    }
    for p in bitiles {
        if !p.resolvable_at(g.res()) {
            return Err(Error::Unresolvable(format!(
                "bitile {p:?} not resolvable at resolution {}",
                g.res()
            )));
        }
    }
    let mut best = 0.0f64;
    for q in density_candidate_tops(bitiles) {
        best = best.max(eval.eval(&q)?);
    }
    Ok(best)
}

/// `N(x)`: the number of trees whose top interval contains `x`.
pub fn counting_function(trees: &[Tree], res: u32) -> Result<DyadicFunction> {
    let mut acc = vec![0.0f64; 1usize << res];
    for t in trees {
        for cell in t.interval().cell_range(res)? {
            acc[cell] += 1.0;
        }
    }
    DyadicFunction::from_values(res, acc)
}

/// Parse a line-oriented bitile list: one `k m n` triple per line,
/// `#` starts a comment.
pub fn parse_bitiles(text: &str) -> Result<Vec<Bitile>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected `k m n`, got {} fields", fields.len()),
            });
        }
        let parse = |s: &str, name: &str| -> Result<u64> {
            s.parse::<u64>().map_err(|e| Error::Parse {
                line,
                msg: format!("bad {name} `{s}`: {e}"),
            })
        };
        let k = parse(fields[0], "scale")?;
        let m = parse(fields[1], "time position")?;
        let n = parse(fields[2], "frequency index")?;
        if k > crate::dyadic::MAX_RES as u64 {
            return Err(Error::Parse { line, msg: format!("scale {k} too large") });
        }
        out.push(Bitile::new(k as u32, m, n).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Inverse of [`parse_bitiles`]: `k m n` lines, LF endings.
pub fn write_bitiles(bitiles: &[Bitile]) -> String {
    let mut s = String::new();
    for b in bitiles {
        s.push_str(&format!("{} {} {}\n", b.k, b.m, b.n));
    }
    s
}

/// All bitiles resolvable on a grid of resolution `res`.
pub fn all_bitiles(res: u32) -> Vec<Bitile> {
    let mut out = Vec::new();
    for k in 0..res {
        for m in 0..(1u64 << k) {
            for n in 0..(1u64 << (res - k - 1)) {
                out.push(Bitile { k, m, n });
            }
        }
    }
    out
}
