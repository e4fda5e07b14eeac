//! Muckenhoupt `A_p` weights on the dyadic grid and the four maximal /
//! sharp operators built from dyadic averages.
//!
//! A `Weight` is a strictly positive step function with cached prefix sums,
//! so `w(I)` for any dyadic interval costs O(1). Every supremum here runs
//! over dyadic intervals only.

use crate::dyadic::{CellSet, DyadicFunction, DyadicInterval};
use crate::error::{Error, Result};

/// A strictly positive step function with O(1) dyadic-interval masses.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    f: DyadicFunction,
    /// prefix[i] = sum of the first i cell values (unscaled by cell width)
    prefix: Vec<f64>,
}

impl Weight {
    pub fn new(f: DyadicFunction) -> Result<Self> {
        if let Some(bad) = f.values().iter().find(|&&v| v <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight must be strictly positive, found {bad}"
            )));
        }
        let mut prefix = Vec::with_capacity(f.num_cells() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &v in f.values() {
            acc += v;
            prefix.push(acc);
        }
        Ok(Self { f, prefix })
    }

    /// Lebesgue measure as a weight.
    pub fn ones(res: u32) -> Result<Self> {
        Self::new(DyadicFunction::constant(res, 1.0)?)
    }

    pub fn res(&self) -> u32 {
        self.f.res()
    }

    pub fn values(&self) -> &[f64] {
        self.f.values()
    }

    pub fn function(&self) -> &DyadicFunction {
        &self.f
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight scale factor {c} must be positive"
            )));
        }
        Self::new(self.f.scaled(c))
    }

    /// Mass of a cell range, `int_E w dx` with `E` the union of the cells.
    fn mass_cells(&self, range: std::ops::Range<usize>) -> f64 {
        (self.prefix[range.end] - self.prefix[range.start]) * self.f.cell_width()
    }

    /// `w(I) = int_I w dx`.
    pub fn measure(&self, interval: &DyadicInterval) -> Result<f64> {
        Ok(self.mass_cells(interval.cell_range(self.res())?))
    }

    /// `w(E)` for a finite union of cells.
    pub fn measure_set(&self, set: &CellSet) -> Result<f64> {
        if set.res() != self.res() {
            return Err(Error::ResolutionMismatch(set.res(), self.res()));
        }
        let s: f64 = set
            .mask()
            .iter()
            .zip(self.values())
            .filter(|(&b, _)| b)
            .map(|(_, &w)| w)
            .sum();
        Ok(s * self.f.cell_width())
    }

    /// Total mass `w([0,1))`.
    pub fn total(&self) -> f64 {
        self.mass_cells(0..self.f.num_cells())
    }
}

/// `[w]_{A_p}`: the sup over all dyadic intervals of
/// `avg_I(w) * avg_I(w^{-1/(p-1)})^{p-1}`, computed in one pass over the
/// dyadic tree.
pub fn ap_characteristic(w: &Weight, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "A_p characteristic needs p > 1, got {p}"
        )));
    }
    let res = w.res();
    let n = 1usize << res;
    let dual_exp = -1.0 / (p - 1.0);
    // per-cell sums of w and w^{-1/(p-1)}, folded up scale by scale
    let mut sums_w: Vec<f64> = w.values().to_vec();
    let mut sums_dual: Vec<f64> = w.values().iter().map(|&v| v.powf(dual_exp)).collect();
    let mut best = 0.0f64;
    let mut cells_per_interval = 1.0f64;
    let mut level_len = n;
    loop {
        for i in 0..level_len {
            let avg_w = sums_w[i] / cells_per_interval;
            let avg_dual = sums_dual[i] / cells_per_interval;
            let cand = avg_w * avg_dual.powf(p - 1.0);
            if cand > best {
                best = cand;
            }
        }
        if level_len == 1 {
            break;
        }
        for i in 0..level_len / 2 {
            sums_w[i] = sums_w[2 * i] + sums_w[2 * i + 1];
            sums_dual[i] = sums_dual[2 * i] + sums_dual[2 * i + 1];
        }
        level_len /= 2;
        cells_per_interval *= 2.0;
    }
    Ok(best)
}

/// The power weight `x^alpha` with exact cell averages
/// (antiderivative differences, not midpoint samples).
pub fn power_weight(alpha: f64, res: u32) -> Result<Weight> {
    if !(alpha > -1.0) {
        return Err(Error::InvalidArgument(format!(
            "power weight exponent {alpha} <= -1 is non-integrable"
        )));
    }
    let n = 1usize << res;
    let beta = alpha + 1.0;
    let scale = 2f64.powf(-(res as f64) * alpha);
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let i = i as f64;
            scale * ((i + 1.0).powf(beta) - i.powf(beta)) / beta
        })
        .collect();
    Weight::new(DyadicFunction::from_values(res, values)?)
}

/// Applies `combine` to the per-scale dyadic averages of `numer` (and
/// `denom` when weighted), taking the max over scales pointwise.
fn fold_dyadic_max(
    res: u32,
    numer: Vec<f64>,
    denom: Option<Vec<f64>>,
) -> Vec<f64> {
    let n = 1usize << res;
    let mut num = numer;
    let mut den = denom;
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut level_len = n;
    loop {
        let width = n / level_len;
        for i in 0..level_len {
            let avg = match &den {
                Some(d) => num[i] / d[i],
                None => num[i] / width as f64,
            };
            for cell in i * width..(i + 1) * width {
                if avg > best[cell] {
                    best[cell] = avg;
                }
            }
        }
        if level_len == 1 {
            break;
        }
        for i in 0..level_len / 2 {
            num[i] = num[2 * i] + num[2 * i + 1];
            if let Some(d) = &mut den {
                d[i] = d[2 * i] + d[2 * i + 1];
            }
        }
        level_len /= 2;
    }
    best
}

/// Dyadic maximal function `Mf(x) = max_{I dyadic, x in I} avg_I |f|`.
pub fn maximal_dyadic(f: &DyadicFunction) -> DyadicFunction {
    let numer: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let best = fold_dyadic_max(f.res(), numer, None);
    DyadicFunction::from_values(f.res(), best).expect("finite by construction")
}

/// `M_2 f(x) = max_I (avg_I |f|^2)^{1/2}`.
pub fn maximal_l2(f: &DyadicFunction) -> DyadicFunction {
    let numer: Vec<f64> = f.values().iter().map(|v| v * v).collect();
    let best = fold_dyadic_max(f.res(), numer, None);
    DyadicFunction::from_values(f.res(), best.into_iter().map(f64::sqrt).collect())
        .expect("finite by construction")
}

/// Weighted dyadic maximal function
/// `M_w f(x) = max_I w(I)^{-1} int_I |f| w`.
pub fn maximal_weighted(f: &DyadicFunction, w: &Weight) -> Result<DyadicFunction> {
    if f.res() != w.res() {
        return Err(Error::ResolutionMismatch(f.res(), w.res()));
    }
    let numer: Vec<f64> = f
        .values()
        .iter()
        .zip(w.values())
        .map(|(&v, &wv)| v.abs() * wv)
        .collect();
    let denom = w.values().to_vec();
    let best = fold_dyadic_max(f.res(), numer, Some(denom));
    Ok(DyadicFunction::from_values(f.res(), best).expect("finite by construction"))
}

/// Dyadic sharp maximal function, mean-oscillation version:
/// `f#(x) = max_I avg_I |f - avg_I f|`.
pub fn sharp_dyadic(f: &DyadicFunction) -> DyadicFunction {
    let res = f.res();
    let n = 1usize << res;
    let mut best = vec![0.0f64; n];
    for k in (0..=res).rev() {
        let width = 1usize << (res - k);
        for i in 0..(1usize << k) {
            let range = i * width..(i + 1) * width;
            let mean: f64 = f.values()[range.clone()].iter().sum::<f64>() / width as f64;
            let osc: f64 = f.values()[range.clone()]
                .iter()
                .map(|v| (v - mean).abs())
                .sum::<f64>()
                / width as f64;
            for cell in range {
                if osc > best[cell] {
                    best[cell] = osc;
                }
            }
        }
    }
    DyadicFunction::from_values(res, best).expect("finite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn weight_rejects_nonpositive() {
        let f = DyadicFunction::from_values(1, vec![1.0, 0.0]).unwrap();
        assert!(Weight::new(f).is_err());
    }

    #[test]
    fn weight_mass_additivity() {
        let res = 6;
        let mut rng = generate::rng_for(9);
        let w = generate::random_doubling_weight(&mut rng, res, 4.0).unwrap();
        for k in 0..res {
            for m in 0..(1u64 << k) {
                let parent = DyadicInterval::new(k, m).unwrap();
                let left = DyadicInterval::new(k + 1, 2 * m).unwrap();
                let right = DyadicInterval::new(k + 1, 2 * m + 1).unwrap();
                let s = w.measure(&left).unwrap() + w.measure(&right).unwrap();
                let p = w.measure(&parent).unwrap();
                assert!((s - p).abs() <= 1e-12 * p.abs().max(1.0));
            }
        }
    }

    #[test]
    fn ap_characteristic_examples() {
        let w = Weight::ones(3).unwrap();
        assert_eq!(ap_characteristic(&w, 2.0).unwrap(), 1.0);

        let w = Weight::new(DyadicFunction::from_values(1, vec![0.5, 1.5]).unwrap()).unwrap();
        // three dyadic intervals: [0,1) gives 1*(2+2/3)/2 = 4/3, halves give 1
        assert!(close(ap_characteristic(&w, 2.0).unwrap(), 4.0 / 3.0, 1e-12));

        assert!(ap_characteristic(&w, 1.0).is_err());
        assert!(ap_characteristic(&w, 0.5).is_err());
    }

    #[test]
    fn ap_characteristic_at_least_one_and_monotone_in_p() {
        let res = 6;
        for seed in 0..10u64 {
            let mut rng = generate::rng_for(seed);
            let w = generate::random_doubling_weight(&mut rng, res, 8.0).unwrap();
            let ps = [1.5, 2.0, 3.0, 4.0];
            let chars: Vec<f64> = ps
                .iter()
                .map(|&p| ap_characteristic(&w, p).unwrap())
                .collect();
            for &c in &chars {
                assert!(c >= 1.0 - 1e-12);
            }
            for pair in chars.windows(2) {
                assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "{chars:?}");
            }
        }
    }

    #[test]
    fn power_weight_examples() {
        let w = power_weight(0.0, 4).unwrap();
        for &v in w.values() {
            assert!(close(v, 1.0, 1e-12));
        }
        let w = power_weight(1.0, 1).unwrap();
        assert!(close(w.values()[0], 0.25, 1e-12));
        assert!(close(w.values()[1], 0.75, 1e-12));
        assert!(power_weight(-1.0, 3).is_err());
    }

    #[test]
    fn power_weight_a2_trend() {
        // alpha in (-1,1): characteristic stays bounded as res grows;
        // alpha = 1.5: grows without bound
        for alpha in [-0.5, 0.5] {
            let chars: Vec<f64> = (4..=12)
                .map(|res| ap_characteristic(&power_weight(alpha, res).unwrap(), 2.0).unwrap())
                .collect();
            for &c in &chars {
                assert!(c < 3.0, "alpha {alpha}: {chars:?}");
            }
        }
        let chars: Vec<f64> = (4..=12)
            .map(|res| ap_characteristic(&power_weight(1.5, res).unwrap(), 2.0).unwrap())
            .collect();
        for pair in chars.windows(2) {
            assert!(pair[1] > pair[0] * 1.1, "not blowing up: {chars:?}");
        }
    }

    #[test]
    fn maximal_dyadic_examples() {
        let c = DyadicFunction::constant(3, -2.5).unwrap();
        for &v in maximal_dyadic(&c).values() {
            assert!(close(v, 2.5, 1e-12));
        }
        let f = DyadicFunction::from_values(1, vec![1.0, 0.0]).unwrap();
        assert_eq!(maximal_dyadic(&f).values(), &[1.0, 0.5]);
        // Mf >= |f|
        let mut rng = generate::rng_for(21);
        let f = generate::random_function(&mut rng, 6).unwrap();
        let m = maximal_dyadic(&f);
        for (v, mv) in f.values().iter().zip(m.values()) {
            assert!(*mv >= v.abs() - 1e-12);
        }
    }

    #[test]
    fn maximal_l2_examples() {
        let f = DyadicFunction::from_values(1, vec![1.0, 0.0]).unwrap();
        let m2 = maximal_l2(&f);
        assert!(close(m2.values()[0], 1.0, 1e-12));
        assert!(close(m2.values()[1], 0.5f64.sqrt(), 1e-12));
        // M_2 >= M by Cauchy-Schwarz
        let mut rng = generate::rng_for(22);
        let f = generate::random_function(&mut rng, 6).unwrap();
        let m = maximal_dyadic(&f);
        let m2 = maximal_l2(&f);
        for (a, b) in m.values().iter().zip(m2.values()) {
            assert!(*b >= *a - 1e-12);
        }
    }

    #[test]
    fn maximal_weighted_examples() {
        let res = 5;
        let mut rng = generate::rng_for(23);
        let f = generate::random_function(&mut rng, res).unwrap();
        let ones = Weight::ones(res).unwrap();
        let mw = maximal_weighted(&f, &ones).unwrap();
        let m = maximal_dyadic(&f);
        assert!(mw.sub(&m).unwrap().sup_norm() < 1e-12);

        let w = generate::random_doubling_weight(&mut rng, res, 4.0).unwrap();
        let c = DyadicFunction::constant(res, 1.75).unwrap();
        for &v in maximal_weighted(&c, &w).unwrap().values() {
            assert!(close(v, 1.75, 1e-12));
        }
        // indicator averages never exceed 1; M_w 1 = 1 exactly
        let set = generate::random_cell_set(&mut rng, res, 3).unwrap();
        let ind = DyadicFunction::indicator(&set);
        for &v in maximal_weighted(&ind, &w).unwrap().values() {
            assert!(v <= 1.0 + 1e-12);
        }
        let one = DyadicFunction::constant(res, 1.0).unwrap();
        for &v in maximal_weighted(&one, &w).unwrap().values() {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn sharp_examples() {
        let c = DyadicFunction::constant(4, 7.0).unwrap();
        assert_eq!(sharp_dyadic(&c).sup_norm(), 0.0);
        let f = DyadicFunction::from_values(1, vec![1.0, 0.0]).unwrap();
        assert_eq!(sharp_dyadic(&f).values(), &[0.5, 0.5]);
        // sharp <= 2 M by the triangle inequality
        let mut rng = generate::rng_for(24);
        let f = generate::random_function(&mut rng, 6).unwrap();
        let sh = sharp_dyadic(&f);
        let m = maximal_dyadic(&f);
        for (s, mv) in sh.values().iter().zip(m.values()) {
            assert!(*s <= 2.0 * mv + 1e-12);
        }
    }

    #[test]
    fn maximal_monotone_in_argument() {
        let mut rng = generate::rng_for(25);
        let res = 6;
        let f = generate::random_function(&mut rng, res).unwrap();
        let g_vals: Vec<f64> = f.values().iter().map(|v| v.abs() + 0.3).collect();
        let g = DyadicFunction::from_values(res, g_vals).unwrap();
        let (mf, mg) = (maximal_dyadic(&f), maximal_dyadic(&g));
        for (a, b) in mf.values().iter().zip(mg.values()) {
            assert!(a <= b);
        }
    }
}
