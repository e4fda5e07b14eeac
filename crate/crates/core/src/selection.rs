//! Size- and density-driven tree selection and the two-index level
//! decomposition.
//!
//! Selection extracts one tree per iteration, removing the full dominated
//! set `{P : P < Q}` under the chosen top, so every iteration strictly
//! shrinks the collection; the iteration cap `|P|` is a hard guarantee.
//!
//! Size selection orders candidate tops by the left endpoint of the top's
//! **upper-half** frequency interval (then by larger top interval, then by
//! time position). This ordering makes the extracted lower tiles pairwise
//! disjoint: if `P'_1 < P_1` for members of distinct trees, the later
//! member would already have been absorbed by the earlier tree, and if
//! `P_1 < P'_1`, the later top's upper half sits strictly below the
//! earlier one's, so it would have been preferred at the earlier round.
//! Ordering by the left endpoint of the full interval `omega_Q` admits
//! counterexamples to disjointness; disjointness is also enforced as a
//! tested postcondition.

use std::collections::{BTreeMap, BTreeSet};

use crate::dyadic::DyadicFunction;
use crate::error::{Error, Result};
use crate::phase_plane::{
    bitile_less, density_candidate_tops, size, size_candidate_tops, t2_energy, Bitile,
    DensityEvaluator, Linearization, Tree,
};
use crate::walsh::{tiles_disjoint, Tile};
use crate::weights::Weight;

/// Trees in extraction order; `selection_order[i]` is the round at which
/// `trees[i]` was extracted.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    selection_order: Vec<usize>,
}

impl Forest {
    pub fn new(trees: Vec<Tree>) -> Self {
        let selection_order = (0..trees.len()).collect();
        Self { trees, selection_order }
    }

    pub fn empty() -> Self {
        Self { trees: Vec::new(), selection_order: Vec::new() }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn selection_order(&self) -> &[usize] {
        &self.selection_order
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// `sum_T w(I_T)`.
    pub fn mass(&self, w: &Weight) -> Result<f64> {
        let mut s = 0.0;
        for t in &self.trees {
            s += w.measure(&t.interval())?;
        }
        Ok(s)
    }

    /// Union of all members across trees.
    pub fn members_union(&self) -> BTreeSet<Bitile> {
        self.trees
            .iter()
            .flat_map(|t| t.members().iter().copied())
            .collect()
    }

    /// The tile set `D`: lower tiles of all 2-overlapping parts.
    pub fn t2_lower_tiles(&self) -> Vec<Tile> {
        self.trees
            .iter()
            .flat_map(|t| t.t2_members().into_iter().map(|p| p.lower()))
            .collect()
    }

    /// Exhaustive pairwise disjointness of the extracted lower tiles.
    pub fn t2_lower_tiles_disjoint(&self) -> bool {
        let tiles = self.t2_lower_tiles();
        for (i, a) in tiles.iter().enumerate() {
            for b in &tiles[i + 1..] {
                if !tiles_disjoint(a, b) {
                    return false;
                }
            }
        }
        true
    }
}

fn dedup_sorted(bitiles: &[Bitile]) -> Vec<Bitile> {
    let set: BTreeSet<Bitile> = bitiles.iter().copied().collect();
    set.into_iter().collect()
}

/// Sort key for size-selection candidates: left endpoint of the upper-half
/// frequency interval, then coarser time scale, then time position.
fn size_candidate_key(q: &Bitile) -> (u64, u32, u64) {
    let (lo, hi) = q.freq_bounds();
    let upper_lo = lo + (hi - lo) / 2;
    (upper_lo, q.scale(), q.time_position())
}

/// Extract trees of large 2-overlapping energy until
/// `size(residual) < sigma/2`.
///
/// Every extracted tree `T` contains a 2-overlapping part with
/// `||S_{T_2} f||_{L^2(w)} >= (sigma/2) w(I_T)^{1/2}`, the extracted
/// lower tiles are pairwise disjoint, and residual plus tree members
/// partition the (deduplicated) input.
pub fn select_by_size(
    bitiles: &[Bitile],
    f: &DyadicFunction,
    w: &Weight,
    sigma: f64,
) -> Result<(Vec<Bitile>, Forest)> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "size threshold {sigma} must be positive"
        )));
    }
    let all = dedup_sorted(bitiles);
    if all.is_empty() {
        return Ok((Vec::new(), Forest::empty()));
    }
    // per-bitile coefficient and w(I_P)/|I_P|, fixed for the whole run
    let coeffs = crate::phase_plane::lower_coefficients(&all, f)?;
    if f.res() != w.res() {
        return Err(Error::ResolutionMismatch(f.res(), w.res()));
    }
    if f.res() > crate::phase_plane::MAX_PHASE_PLANE_RES {
        return Err(Error::InvalidArgument(format!(
            "resolution {} exceeds the phase-plane cap",
            f.res()
        )));
    }
    let mut info: BTreeMap<Bitile, (f64, f64)> = BTreeMap::new();
    for (p, &c) in all.iter().zip(&coeffs) {
        let iv = p.time_interval();
        info.insert(*p, (c, w.measure(&iv)? / iv.len()));
    }

    let threshold_sq = (sigma / 2.0) * (sigma / 2.0);
    let mut current: BTreeSet<Bitile> = all.iter().copied().collect();
    let mut trees = Vec::new();
    let cap = all.len();

    for _round in 0..=cap {
        if current.is_empty() {
            break;
        }
        let members: Vec<Bitile> = current.iter().copied().collect();
        let cs: Vec<f64> = members.iter().map(|p| info[p].0).collect();
        let mls: Vec<f64> = members.iter().map(|p| info[p].1).collect();
        let mut chosen: Option<Bitile> = None;
        for q in size_candidate_tops(&members) {
            let energy = t2_energy(&members, &cs, &mls, &q);
            if energy >= threshold_sq * w.measure(&q.time_interval())? {
                let better = match &chosen {
                    None => true,
                    Some(c) => size_candidate_key(&q) < size_candidate_key(c),
                };
                if better {
                    chosen = Some(q);
                }
            }
        }
        let Some(top) = chosen else { break };
        let extracted: Vec<Bitile> = members
            .iter()
            .copied()
            .filter(|p| bitile_less(p, &top))
            .collect();
        assert!(
            !extracted.is_empty(),
            "selection invariant: a violating top dominates at least one member"
        );
        for p in &extracted {
            current.remove(p);
        }
        trees.push(Tree::new(top, extracted)?);
    }
    if !current.is_empty() {
        // unreachable: each round removes at least one bitile
        let members: Vec<Bitile> = current.iter().copied().collect();
        let cs: Vec<f64> = members.iter().map(|p| info[p].0).collect();
        let mls: Vec<f64> = members.iter().map(|p| info[p].1).collect();
        let still_violating = size_candidate_tops(&members).into_iter().any(|q| {
            t2_energy(&members, &cs, &mls, &q)
                >= threshold_sq * w.measure(&q.time_interval()).unwrap_or(f64::INFINITY)
        });
        assert!(
            !still_violating,
            "selection exceeded its iteration cap without converging"
        );
    }
    Ok((current.into_iter().collect(), Forest::new(trees)))
}

/// Extract trees under density-violating tops until
/// `density(residual) < lambda/2`.
///
/// Candidate densities depend only on the linearization, `g` and `w`, so
/// they are scored once; coarser tops are preferred, which keeps the
/// extracted mass small.
pub fn select_by_density(
    bitiles: &[Bitile],
    lin: &Linearization,
    g: &DyadicFunction,
    w: &Weight,
    r: f64,
    lambda: f64,
) -> Result<(Vec<Bitile>, Forest)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "density threshold {lambda} must be positive"
        )));
    }
    let all = dedup_sorted(bitiles);
    if all.is_empty() {
        return Ok((Vec::new(), Forest::empty()));
    }
    for p in &all {
        if !p.resolvable_at(g.res()) {
            return Err(Error::Unresolvable(format!(
                "bitile {p:?} not resolvable at resolution {}",
                g.res()
            )));
        }
    }
    let eval = DensityEvaluator::new(lin, g, w, r)?;
    let mut dens: BTreeMap<Bitile, f64> = BTreeMap::new();
    for q in density_candidate_tops(&all) {
        dens.insert(q, eval.eval(&q)?);
    }

    let mut current: BTreeSet<Bitile> = all.iter().copied().collect();
    let mut trees = Vec::new();
    let cap = all.len();

    for _round in 0..=cap {
        if current.is_empty() {
            break;
        }
        let members: Vec<Bitile> = current.iter().copied().collect();
        let mut chosen: Option<Bitile> = None;
        for q in density_candidate_tops(&members) {
            if dens[&q] >= lambda / 2.0 {
                let better = match &chosen {
                    None => true,
                    Some(c) => {
                        (q.scale(), q.time_position(), q.freq_index())
                            < (c.scale(), c.time_position(), c.freq_index())
                    }
                };
                if better {
                    chosen = Some(q);
                }
            }
        }
        let Some(top) = chosen else { break };
        let extracted: Vec<Bitile> = members
            .iter()
            .copied()
            .filter(|p| bitile_less(p, &top))
            .collect();
        assert!(
            !extracted.is_empty(),
            "selection invariant: a candidate top dominates at least one member"
        );
        for p in &extracted {
            current.remove(p);
        }
        trees.push(Tree::new(top, extracted)?);
    }
    if !current.is_empty() {
        let members: Vec<Bitile> = current.iter().copied().collect();
        let still_violating = density_candidate_tops(&members)
            .into_iter()
            .any(|q| dens[&q] >= lambda / 2.0);
        assert!(
            !still_violating,
            "selection exceeded its iteration cap without converging"
        );
    }
    Ok((current.into_iter().collect(), Forest::new(trees)))
}

/// Case split of the two-index decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecompositionMode {
    /// Level decomposition `P_n` only.
    Case1,
    /// Levels `P_n` refined by size into sublevels `P_{n,k}`.
    Case2,
}

/// One recorded level (or sublevel) of a decomposition.
#[derive(Debug, Clone)]
pub struct LevelRow {
    pub n: i64,
    pub k: Option<u32>,
    pub trees: Vec<Tree>,
    pub mass_w: f64,
    pub mass_target: f64,
    pub size_achieved: f64,
    pub size_target: f64,
    pub density_achieved: f64,
    pub density_target: f64,
}

impl LevelRow {
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn members(&self) -> impl Iterator<Item = &Bitile> {
        self.trees.iter().flat_map(|t| t.members().iter())
    }
}

/// Report of a level decomposition; rows partition the input collection.
#[derive(Debug, Clone)]
pub struct DecompositionReport {
    pub mode: DecompositionMode,
    pub rows: Vec<LevelRow>,
}

impl DecompositionReport {
    /// Union of all rows' members.
    pub fn members_union(&self) -> BTreeSet<Bitile> {
        self.rows
            .iter()
            .flat_map(|r| r.members().copied())
            .collect()
    }

    pub fn total_members(&self) -> usize {
        self.rows.iter().map(|r| r.members().count()).sum()
    }

    /// CSV serialization: header plus one row per level, LF endings.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "level_n,level_k,tree_count,mass_w,size_achieved,size_target,density_achieved,density_target\n",
        );
        for row in &self.rows {
            let k = row.k.map(|k| k.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.n,
                k,
                row.tree_count(),
                row.mass_w,
                row.size_achieved,
                row.size_target,
                row.density_achieved,
                row.density_target
            ));
        }
        s
    }
}

const MAX_LEVELS: i64 = 200;
const MAX_SUBLEVELS: u32 = 64;

/// Alternate size- and density-selection at geometric thresholds, dividing
/// the collection into levels `P_n` (and sublevels `P_{n,k}` in
/// [`DecompositionMode::Case2`]). Level `n` targets size
/// `min(sigma, 2^{-n/(2q)} tau)` with `tau = w(F)^{1/(2q)}`,
/// `F = supp f`, and density `min(1, 2^{-n/r'})`; achieved values are
/// recorded next to the targets. The rows partition the input exactly;
/// leftovers of zero size and density become a final singleton-tree level.
pub fn level_decomposition(
    bitiles: &[Bitile],
    f: &DyadicFunction,
    g: &DyadicFunction,
    lin: &Linearization,
    w: &Weight,
    q_exp: f64,
    r: f64,
    mode: DecompositionMode,
) -> Result<DecompositionReport> {
    if !(q_exp > 1.0) {
        return Err(Error::InvalidArgument(format!("q = {q_exp} must exceed 1")));
    }
    if !(r > 2.0 * q_exp) {
        return Err(Error::InvalidArgument(format!(
            "r = {r} must exceed 2q = {}",
            2.0 * q_exp
        )));
    }
    let all = dedup_sorted(bitiles);
    let mut report = DecompositionReport { mode, rows: Vec::new() };
    if all.is_empty() {
        return Ok(report);
    }
    let rp = r / (r - 1.0);
    let sigma0 = size(&all, f, w)?;

    let tau = w.measure_set(&f.support())?.powf(1.0 / (2.0 * q_exp));

    let mut stock = all.clone();
    let mut n = if sigma0 > 0.0 && tau > 0.0 {
        // first level where the size threshold still sits at its plateau
        (2.0 * q_exp * (tau / sigma0).log2()).floor().min(0.0) as i64
    } else {
        0
    };
    let n_end = n + MAX_LEVELS;

    while !stock.is_empty() && n < n_end {
        let remaining_size = size(&stock, f, w)?;
        let remaining_density = crate::phase_plane::density(&stock, lin, g, w, r)?;
        if remaining_size == 0.0 && remaining_density == 0.0 {
            break;
        }
        let s_n = sigma0.min(2f64.powf(-(n as f64) / (2.0 * q_exp)) * tau);
        let d_n = 1f64.min(2f64.powf(-(n as f64) / rp));
        let mut level_trees: Vec<Tree> = Vec::new();
        if s_n > 0.0 {
            let (rest, forest) = select_by_size(&stock, f, w, 2.0 * s_n)?;
            stock = rest;
            level_trees.extend(forest.trees.iter().cloned());
        }
        if d_n > 0.0 {
            let (rest, forest) = select_by_density(&stock, lin, g, w, r, 2.0 * d_n)?;
            stock = rest;
            level_trees.extend(forest.trees.iter().cloned());
        }
        if !level_trees.is_empty() {
            push_level_rows(
                &mut report, f, g, lin, w, q_exp, r, mode, n, level_trees, s_n, d_n, tau,
            )?;
        }
        n += 1;
    }

    if !stock.is_empty() {
        // zero-size, zero-density leftovers: singleton trees
        let trees: Vec<Tree> = stock
            .iter()
            .map(|p| Tree::new(*p, vec![*p]))
            .collect::<Result<_>>()?;
        let members: Vec<Bitile> = stock.clone();
        let row = LevelRow {
            n,
            k: None,
            mass_w: Forest::new(trees.clone()).mass(w)?,
            mass_target: 2f64.powi(n as i32),
            size_achieved: size(&members, f, w)?,
            size_target: 0.0,
            density_achieved: crate::phase_plane::density(&members, lin, g, w, r)?,
            density_target: 0.0,
            trees,
        };
        report.rows.push(row);
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn push_level_rows(
    report: &mut DecompositionReport,
    f: &DyadicFunction,
    g: &DyadicFunction,
    lin: &Linearization,
    w: &Weight,
    q_exp: f64,
    r: f64,
    mode: DecompositionMode,
    n: i64,
    level_trees: Vec<Tree>,
    s_n: f64,
    d_n: f64,
    tau: f64,
) -> Result<()> {
    match mode {
        DecompositionMode::Case1 => {
            let members: Vec<Bitile> =
                level_trees.iter().flat_map(|t| t.members().iter().copied()).collect();
            report.rows.push(LevelRow {
                n,
                k: None,
                mass_w: Forest::new(level_trees.clone()).mass(w)?,
                mass_target: 2f64.powi(n as i32),
                size_achieved: size(&members, f, w)?,
                size_target: s_n,
                density_achieved: crate::phase_plane::density(&members, lin, g, w, r)?,
                density_target: d_n,
                trees: level_trees,
            });
        }
        DecompositionMode::Case2 => {
            // refine the level by size into sublevels P_{n,k}
            let mut stock_n: Vec<Bitile> =
                level_trees.iter().flat_map(|t| t.members().iter().copied()).collect();
            stock_n = dedup_sorted(&stock_n);
            let mut k = 0u32;
            while !stock_n.is_empty() && k < MAX_SUBLEVELS {
                let t_next =
                    2f64.powf(-((n + k as i64 + 1) as f64) / (2.0 * q_exp)) * tau;
                let t_here = 2f64.powf(-((n + k as i64) as f64) / (2.0 * q_exp)) * tau;
                if t_next == 0.0 || size(&stock_n, f, w)? == 0.0 {
                    break;
                }
                let (rest, forest) = select_by_size(&stock_n, f, w, 2.0 * t_next)?;
                stock_n = rest;
                if !forest.is_empty() {
                    let members: Vec<Bitile> = forest.members_union().into_iter().collect();
                    report.rows.push(LevelRow {
                        n,
                        k: Some(k),
                        mass_w: forest.mass(w)?,
                        mass_target: 2f64.powi(n as i32),
                        size_achieved: size(&members, f, w)?,
                        size_target: t_here,
                        density_achieved: crate::phase_plane::density(
                            &members, lin, g, w, r,
                        )?,
                        density_target: d_n,
                        trees: forest.trees,
                    });
                }
                k += 1;
            }
            if !stock_n.is_empty() {
                let trees: Vec<Tree> = stock_n
                    .iter()
                    .map(|p| Tree::new(*p, vec![*p]))
                    .collect::<Result<_>>()?;
                report.rows.push(LevelRow {
                    n,
                    k: Some(k),
                    mass_w: Forest::new(trees.clone()).mass(w)?,
                    mass_target: 2f64.powi(n as i32),
                    size_achieved: size(&stock_n, f, w)?,
                    size_target: 2f64.powf(-((n + k as i64) as f64) / (2.0 * q_exp)) * tau,
                    density_achieved: crate::phase_plane::density(&stock_n, lin, g, w, r)?,
                    density_target: d_n,
                    trees,
                });
            }
        }
    }
    Ok(())
}

/// Mass ratio of two tree covers of the same collection:
/// `sum_{T in selected} w(I_T) / sum_{S in other} w(I_S)`; `1` for two
/// empty covers.
pub fn compare_decompositions(
    selected: &Forest,
    other: &Forest,
    w: &Weight,
) -> Result<f64> {
    if selected.members_union() != other.members_union() {
        return Err(Error::CoverageMismatch);
    }
    if selected.is_empty() && other.is_empty() {
        return Ok(1.0);
    }
    Ok(selected.mass(w)? / other.mass(w)?)
}

/// The trivial cover: every bitile is its own singleton tree.
pub fn singleton_cover(bitiles: &[Bitile]) -> Result<Forest> {
    let trees: Vec<Tree> = dedup_sorted(bitiles)
        .into_iter()
        .map(|p| Tree::new(p, vec![p]))
        .collect::<Result<_>>()?;
    Ok(Forest::new(trees))
}
