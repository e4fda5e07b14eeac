//! Dyadic intervals, step functions on `[0,1)`, the Haar system, and
//! martingale averages.
//!
//! A `DyadicFunction` is a real step function at resolution `2^-res`; cell
//! `i` covers `[i*2^-res, (i+1)*2^-res)`. Refinement duplicates values
//! (step-function semantics), it never interpolates.

use crate::error::{Error, Result};
use crate::weights::Weight;

/// Hard cap on the grid resolution. Keeps all-pairs enumerations and
/// brute-force oracles fast enough to run exhaustively.
pub const MAX_RES: u32 = 12;

/// A dyadic subinterval `[m*2^-k, (m+1)*2^-k)` of `[0,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicInterval {
    scale: u32,
    position: u64,
}

impl DyadicInterval {
    pub fn new(scale: u32, position: u64) -> Result<Self> {
        if scale > MAX_RES {
            return Err(Error::InvalidArgument(format!(
                "interval scale {scale} exceeds resolution cap {MAX_RES}"
            )));
        }
        if position >= 1u64 << scale {
            return Err(Error::InvalidArgument(format!(
                "interval position {position} out of range at scale {scale}"
            )));
        }
        Ok(Self { scale, position })
    }

    pub fn unit() -> Self {
        Self { scale: 0, position: 0 }
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    /// Interval length `2^-scale`.
    pub fn len(&self) -> f64 {
        0.5f64.powi(self.scale as i32)
    }

    pub fn left_endpoint(&self) -> f64 {
        self.position as f64 * self.len()
    }

    /// The dyadic ancestor at a coarser (or equal) scale.
    pub fn ancestor_at(&self, scale: u32) -> Result<Self> {
        if scale > self.scale {
            return Err(Error::InvalidArgument(format!(
                "ancestor scale {scale} finer than interval scale {}",
                self.scale
            )));
        }
        Ok(Self { scale, position: self.position >> (self.scale - scale) })
    }

    pub fn contains(&self, other: &DyadicInterval) -> bool {
        other.scale >= self.scale && (other.position >> (other.scale - self.scale)) == self.position
    }

    /// Dyadic intervals are nested or disjoint; intersect means one holds
    /// the other.
    pub fn intersects(&self, other: &DyadicInterval) -> bool {
        self.contains(other) || other.contains(self)
    }

    /// Range of grid cells covered at ambient resolution `res`.
    pub fn cell_range(&self, res: u32) -> Result<std::ops::Range<usize>> {
        if res < self.scale {
            return Err(Error::Unresolvable(format!(
                "interval at scale {} needs resolution >= {}, got {res}",
                self.scale, self.scale
            )));
        }
        let width = 1usize << (res - self.scale);
        let start = self.position as usize * width;
        Ok(start..start + width)
    }
}

/// A real-valued step function on `[0,1)` at dyadic resolution `2^-res`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicFunction {
    res: u32,
    values: Vec<f64>,
}

impl DyadicFunction {
    pub fn from_values(res: u32, values: Vec<f64>) -> Result<Self> {
        if res > MAX_RES {
            return Err(Error::InvalidArgument(format!(
                "resolution {res} exceeds cap {MAX_RES}"
            )));
        }
        if values.len() != 1usize << res {
            return Err(Error::InvalidArgument(format!(
                "expected 2^{res} = {} values, got {}",
                1usize << res,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value {bad}")));
        }
        Ok(Self { res, values })
    }

    pub fn constant(res: u32, value: f64) -> Result<Self> {
        Self::from_values(res, vec![value; 1usize << res])
    }

    pub fn zero(res: u32) -> Result<Self> {
        Self::constant(res, 0.0)
    }

    /// Indicator function `1_E` of a cell set.
    pub fn indicator(set: &CellSet) -> Self {
        let values = set.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Self { res: set.res, values }
    }

    pub fn res(&self) -> u32 {
        self.res
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    /// Width of one grid cell, `2^-res`.
    pub fn cell_width(&self) -> f64 {
        0.5f64.powi(self.res as i32)
    }

    /// Re-sample on a finer grid by duplicating values.
    pub fn refine(&self, res: u32) -> Result<Self> {
        if res < self.res {
            return Err(Error::InvalidArgument(format!(
                "refine target {res} coarser than {}",
                self.res
            )));
        }
        if res > MAX_RES {
            return Err(Error::InvalidArgument(format!(
                "resolution {res} exceeds cap {MAX_RES}"
            )));
        }
        let dup = 1usize << (res - self.res);
        let mut values = Vec::with_capacity(self.values.len() * dup);
        for &v in &self.values {
            values.extend(std::iter::repeat(v).take(dup));
        }
        Ok(Self { res, values })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Integral over `[0,1)` (Lebesgue).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_width()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn abs(&self) -> Self {
        Self { res: self.res, values: self.values.iter().map(|v| v.abs()).collect() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { res: self.res, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul_pointwise(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.res != other.res {
            return Err(Error::ResolutionMismatch(self.res, other.res));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self { res: self.res, values })
    }

    /// Cells where the function is nonzero.
    pub fn support(&self) -> CellSet {
        CellSet { res: self.res, mask: self.values.iter().map(|&v| v != 0.0).collect() }
    }
}

/// A finite union of grid cells at a fixed resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet {
    res: u32,
    mask: Vec<bool>,
}

impl CellSet {
    pub fn empty(res: u32) -> Self {
        Self { res, mask: vec![false; 1usize << res] }
    }

    pub fn full(res: u32) -> Self {
        Self { res, mask: vec![true; 1usize << res] }
    }

    pub fn from_mask(res: u32, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != 1usize << res {
            return Err(Error::InvalidArgument(format!(
                "cell mask length {} does not match resolution {res}",
                mask.len()
            )));
        }
        Ok(Self { res, mask })
    }

    pub fn from_intervals(res: u32, intervals: &[DyadicInterval]) -> Result<Self> {
        let mut set = Self::empty(res);
        for iv in intervals {
            for c in iv.cell_range(res)? {
                set.mask[c] = true;
            }
        }
        Ok(set)
    }

    pub fn res(&self) -> u32 {
        self.res
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains_cell(&self, cell: usize) -> bool {
        self.mask[cell]
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Cells of `self` minus cells where `drop` holds.
    pub fn minus_where(&self, drop: impl Fn(usize) -> bool) -> Self {
        let mask = self
            .mask
            .iter()
            .enumerate()
            .map(|(i, &b)| b && !drop(i))
            .collect();
        Self { res: self.res, mask }
    }

    pub fn intersect(&self, other: &Self) -> Result<Self> {
        if self.res != other.res {
            return Err(Error::ResolutionMismatch(self.res, other.res));
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(&a, &b)| a && b).collect();
        Ok(Self { res: self.res, mask })
    }
}

/// Unweighted L2 pairing `sum_i f_i g_i 2^-res`.
///
/// Both functions must live at the same resolution; refine first otherwise.
pub fn inner(f: &DyadicFunction, g: &DyadicFunction) -> Result<f64> {
    if f.res != g.res {
        return Err(Error::ResolutionMismatch(f.res, g.res));
    }
    let s: f64 = f.values.iter().zip(&g.values).map(|(&a, &b)| a * b).sum();
    Ok(s * f.cell_width())
}

/// The Haar function `h_I`: `+|I|^{-1/2}` on the left half of `I`,
/// `-|I|^{-1/2}` on the right half, `0` outside. `int h_I^2 = 1`.
pub fn haar(interval: &DyadicInterval, res: u32) -> Result<DyadicFunction> {
    if res < interval.scale() + 1 {
        return Err(Error::Unresolvable(format!(
            "resolution {res} too coarse to resolve both halves of a scale-{} interval",
            interval.scale()
        )));
    }
    let mut f = DyadicFunction::zero(res)?;
    let range = interval.cell_range(res)?;
    let half = (range.end - range.start) / 2;
    let amp = (1.0 / interval.len()).sqrt();
    for c in range.start..range.start + half {
        f.values[c] = amp;
    }
    for c in range.start + half..range.end {
        f.values[c] = -amp;
    }
    Ok(f)
}

/// Conditional expectation `E_k f`: constant on each interval of length
/// `2^-k`, equal to the average of `f` there.
pub fn conditional_expectation(f: &DyadicFunction, k: u32) -> Result<DyadicFunction> {
    if k > f.res {
        return Err(Error::InvalidArgument(format!(
            "conditional expectation scale {k} out of range 0..={}",
            f.res
        )));
    }
    let block = 1usize << (f.res - k);
    let mut values = vec![0.0; f.values.len()];
    for chunk in 0..(1usize << k) {
        let start = chunk * block;
        let avg: f64 =
            f.values[start..start + block].iter().sum::<f64>() / block as f64;
        for v in &mut values[start..start + block] {
            *v = avg;
        }
    }
    Ok(DyadicFunction { res: f.res, values })
}

/// Martingale difference `Delta_j f = E_j f - E_{j-1} f`, the projection
/// onto Haar functions over intervals of length `2^{1-j}`.
pub fn delta_project(f: &DyadicFunction, j: u32) -> Result<DyadicFunction> {
    if j < 1 || j > f.res {
        return Err(Error::InvalidArgument(format!(
            "Haar band index {j} out of range 1..={}",
            f.res
        )));
    }
    let fine = conditional_expectation(f, j)?;
    let coarse = conditional_expectation(f, j - 1)?;
    fine.sub(&coarse)
}

/// Weighted norm `||f||_{L^p(w)}`; `p = infinity` returns the essential sup
/// over cells of positive weight.
pub fn lp_norm_weighted(f: &DyadicFunction, w: &Weight, p: f64) -> Result<f64> {
    if f.res != w.res() {
        return Err(Error::ResolutionMismatch(f.res, w.res()));
    }
    if p < 1.0 || p.is_nan() {
        return Err(Error::InvalidArgument(format!("norm exponent {p} < 1")));
    }
    if p.is_infinite() {
        let m = f
            .values
            .iter()
            .zip(w.values())
            .filter(|(_, &wv)| wv > 0.0)
            .fold(0.0f64, |m, (&v, _)| m.max(v.abs()));
        return Ok(m);
    }
    let s: f64 = f
        .values
        .iter()
        .zip(w.values())
        .map(|(&v, &wv)| v.abs().powf(p) * wv)
        .sum::<f64>()
        * f.cell_width();
    Ok(s.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn interval_geometry() {
        let i = DyadicInterval::new(2, 3).unwrap();
        assert_eq!(i.len(), 0.25);
        assert_eq!(i.left_endpoint(), 0.75);
        assert_eq!(i.cell_range(4).unwrap(), 12..16);
        assert!(DyadicInterval::new(2, 4).is_err());
        assert!(DyadicInterval::new(13, 0).is_err());
    }

    #[test]
    fn nesting_dichotomy_all_pairs() {
        // any two dyadic intervals are nested or disjoint
        let res = 4;
        let mut all = Vec::new();
        for k in 0..=res {
            for m in 0..(1u64 << k) {
                all.push(DyadicInterval::new(k, m).unwrap());
            }
        }
        for a in &all {
            for b in &all {
                let ra = a.cell_range(res).unwrap();
                let rb = b.cell_range(res).unwrap();
                let inter = ra.start.max(rb.start)..ra.end.min(rb.end);
                let overlap = inter.start < inter.end;
                if overlap {
                    assert!(a.contains(b) || b.contains(a), "{a:?} {b:?}");
                    assert!(a.intersects(b));
                } else {
                    assert!(!a.intersects(b));
                }
            }
        }
    }

    #[test]
    fn haar_unit_interval() {
        let h = haar(&DyadicInterval::unit(), 1).unwrap();
        assert_eq!(h.values(), &[1.0, -1.0]);
    }

    #[test]
    fn haar_scaling() {
        let h = haar(&DyadicInterval::new(1, 0).unwrap(), 2).unwrap();
        let s = 2.0f64.sqrt();
        assert_eq!(h.values(), &[s, -s, 0.0, 0.0]);
        assert_close(inner(&h, &h).unwrap(), 1.0, 1e-12);
    }

    #[test]
    fn haar_orthogonality_and_unresolvable() {
        let res = 4;
        let mut haars = Vec::new();
        for k in 0..res {
            for m in 0..(1u64 << k) {
                haars.push(haar(&DyadicInterval::new(k, m).unwrap(), res).unwrap());
            }
        }
        for (i, a) in haars.iter().enumerate() {
            for (j, b) in haars.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_close(inner(a, b).unwrap(), want, 1e-10);
            }
        }
        assert!(matches!(
            haar(&DyadicInterval::new(2, 1).unwrap(), 2),
            Err(Error::Unresolvable(_))
        ));
    }

    #[test]
    fn haar_gram_with_constant_is_identity() {
        // {h_I : |I| >= 2^{1-res}} plus the constant is an orthonormal basis
        let res = 5;
        let mut basis = vec![DyadicFunction::constant(res, 1.0).unwrap()];
        for k in 0..res {
            for m in 0..(1u64 << k) {
                basis.push(haar(&DyadicInterval::new(k, m).unwrap(), res).unwrap());
            }
        }
        assert_eq!(basis.len(), 1 << res);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_close(inner(a, b).unwrap(), want, 1e-10);
            }
        }
    }

    #[test]
    fn inner_examples() {
        let one = DyadicFunction::constant(3, 1.0).unwrap();
        assert_close(inner(&one, &one).unwrap(), 1.0, 1e-12);
        let f = DyadicFunction::from_values(1, vec![1.0, 2.0]).unwrap();
        let g = DyadicFunction::from_values(1, vec![3.0, 4.0]).unwrap();
        assert_close(inner(&f, &g).unwrap(), 5.5, 1e-12);
        let h = DyadicFunction::constant(2, 1.0).unwrap();
        assert!(matches!(inner(&f, &h), Err(Error::ResolutionMismatch(1, 2))));
    }

    #[test]
    fn conditional_expectation_examples() {
        let f = DyadicFunction::from_values(1, vec![1.0, 3.0]).unwrap();
        assert_eq!(conditional_expectation(&f, 0).unwrap().values(), &[2.0, 2.0]);
        assert_eq!(conditional_expectation(&f, 1).unwrap(), f);
        assert!(conditional_expectation(&f, 2).is_err());
    }

    #[test]
    fn delta_project_examples() {
        let res = 4;
        let c = DyadicFunction::constant(res, 3.25).unwrap();
        for j in 1..=res {
            assert_close(delta_project(&c, j).unwrap().sup_norm(), 0.0, 1e-12);
        }
        let h = haar(&DyadicInterval::unit(), res).unwrap();
        assert!(delta_project(&h, 1)
            .unwrap()
            .sub(&h)
            .unwrap()
            .sup_norm()
            .abs()
            < 1e-12);
        for j in 2..=res {
            assert_close(delta_project(&h, j).unwrap().sup_norm(), 0.0, 1e-12);
        }
        assert!(delta_project(&h, 0).is_err());
        assert!(delta_project(&h, res + 1).is_err());
    }

    #[test]
    fn delta_matches_explicit_haar_expansion() {
        // oracle: project onto the scale-j Haar functions one by one
        let res = 5;
        let mut rng = generate::rng_for(11);
        let f = generate::random_function(&mut rng, res).unwrap();
        for j in 1..=res {
            let mut oracle = DyadicFunction::zero(res).unwrap();
            for m in 0..(1u64 << (j - 1)) {
                let h = haar(&DyadicInterval::new(j - 1, m).unwrap(), res).unwrap();
                let c = inner(&f, &h).unwrap();
                oracle = oracle.add(&h.scaled(c)).unwrap();
            }
            let got = delta_project(&f, j).unwrap();
            assert!(got.sub(&oracle).unwrap().sup_norm() < 1e-10);
        }
    }

    #[test]
    fn haar_completeness_and_telescoping() {
        let res = 6;
        let mut rng = generate::rng_for(5);
        let f = generate::random_function(&mut rng, res).unwrap();
        // mean + sum of bands reconstructs f
        let mut acc = DyadicFunction::constant(res, f.mean()).unwrap();
        for j in 1..=res {
            acc = acc.add(&delta_project(&f, j).unwrap()).unwrap();
        }
        assert!(acc.sub(&f).unwrap().sup_norm() < 1e-10);
        // E_k = E_0 + sum_{j<=k} Delta_j
        for k in 0..=res {
            let mut acc = conditional_expectation(&f, 0).unwrap();
            for j in 1..=k {
                acc = acc.add(&delta_project(&f, j).unwrap()).unwrap();
            }
            let want = conditional_expectation(&f, k).unwrap();
            assert!(acc.sub(&want).unwrap().sup_norm() < 1e-10);
        }
    }

    #[test]
    fn projection_idempotence_and_orthogonality() {
        let res = 5;
        let mut rng = generate::rng_for(17);
        let f = generate::random_function(&mut rng, res).unwrap();
        for j in 1..=res {
            let dj = delta_project(&f, j).unwrap();
            let djj = delta_project(&dj, j).unwrap();
            assert!(djj.sub(&dj).unwrap().sup_norm() < 1e-10);
            for i in 1..=res {
                if i != j {
                    assert!(delta_project(&dj, i).unwrap().sup_norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn lp_norm_examples() {
        let res = 3;
        let w = Weight::ones(res).unwrap();
        let one = DyadicFunction::constant(res, 1.0).unwrap();
        for p in [1.0, 1.5, 2.0, 4.0] {
            assert_close(lp_norm_weighted(&one, &w, p).unwrap(), 1.0, 1e-12);
        }
        let z = DyadicFunction::zero(res).unwrap();
        assert_close(lp_norm_weighted(&z, &w, 2.0).unwrap(), 0.0, 1e-12);

        let f = DyadicFunction::from_values(1, vec![1.0, 2.0]).unwrap();
        let w1 = Weight::ones(1).unwrap();
        assert_close(lp_norm_weighted(&f, &w1, 2.0).unwrap(), 2.5f64.sqrt(), 1e-7);
        assert_close(lp_norm_weighted(&f, &w1, f64::INFINITY).unwrap(), 2.0, 1e-12);
        assert!(lp_norm_weighted(&f, &w1, 0.5).is_err());
    }

    #[test]
    fn refine_duplicates() {
        let f = DyadicFunction::from_values(1, vec![1.0, 2.0]).unwrap();
        let g = f.refine(3).unwrap();
        assert_eq!(g.values(), &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        assert!(f.refine(0).is_err());
    }

    #[test]
    fn function_validation() {
        assert!(DyadicFunction::from_values(1, vec![1.0]).is_err());
        assert!(DyadicFunction::from_values(1, vec![f64::NAN, 0.0]).is_err());
        assert!(DyadicFunction::constant(13, 1.0).is_err());
    }

    #[test]
    fn cell_set_basics() {
        let s = CellSet::from_intervals(
            2,
            &[DyadicInterval::new(1, 0).unwrap(), DyadicInterval::new(2, 3).unwrap()],
        )
        .unwrap();
        assert_eq!(s.mask(), &[true, true, false, true]);
        assert_eq!(s.cell_count(), 3);
        let ind = DyadicFunction::indicator(&s);
        assert_eq!(ind.values(), &[1.0, 1.0, 0.0, 1.0]);
        assert_eq!(ind.support(), s);
    }
}
