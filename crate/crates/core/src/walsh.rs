//! Walsh functions, tiles and Walsh packets, the fast Walsh-Hadamard
//! transform, partial sums, and the Walsh-to-Haar factorization.
//!
//! Walsh functions follow the doubling recursion
//! `W_2n = W_n(2x) 1_[0,1/2) + W_n(2x-1) 1_[1/2,1)` and
//! `W_2n+1 = W_n(2x) 1_[0,1/2) - W_n(2x-1) 1_[1/2,1)` with `W_0 = 1`.
//! The transform kernel is an in-place butterfly plus a bit-reversal
//! permutation; ordering conventions are the classic bug source here, so
//! the tests pin the butterfly against a direct inner-product transform
//! built from the recursion itself.

use crate::dyadic::{haar, DyadicFunction, DyadicInterval};
use crate::error::{Error, Result};

/// A dyadic time-frequency rectangle of area one:
/// `I_p = [m 2^-k, (m+1) 2^-k)`, `omega_p = [n 2^k, (n+1) 2^k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tile {
    k: u32,
    m: u64,
    n: u64,
}

impl Tile {
    pub fn new(k: u32, m: u64, n: u64) -> Result<Self> {
        if k > crate::dyadic::MAX_RES {
            return Err(Error::InvalidArgument(format!(
                "tile scale {k} exceeds resolution cap"
            )));
        }
        if m >= 1u64 << k {
            return Err(Error::InvalidArgument(format!(
                "tile time position {m} out of range at scale {k}"
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
        DyadicInterval::new(self.k, self.m).expect("tile invariant")
    }

    /// Frequency interval `[n 2^k, (n+1) 2^k)` as integer endpoints.
    pub fn freq_bounds(&self) -> (u64, u64) {
        (self.n << self.k, (self.n + 1) << self.k)
    }

    /// The packet fits on a grid of resolution `res`:
    /// `(n+1) 2^k <= 2^res`.
    pub fn resolvable_at(&self, res: u32) -> bool {
        self.k <= res && (self.n + 1) << self.k <= 1u64 << res
    }
}

/// Tile order: `p1 < p2` iff the rectangles intersect and
/// `I_p1` is contained in `I_p2`. Reflexive by construction.
pub fn tile_less(p1: &Tile, p2: &Tile) -> bool {
    let (a_lo, a_hi) = p1.freq_bounds();
    let (b_lo, b_hi) = p2.freq_bounds();
    p2.time_interval().contains(&p1.time_interval()) && a_lo < b_hi && b_lo < a_hi
}

pub fn tiles_disjoint(p1: &Tile, p2: &Tile) -> bool {
    let (a_lo, a_hi) = p1.freq_bounds();
    let (b_lo, b_hi) = p2.freq_bounds();
    let freq_overlap = a_lo < b_hi && b_lo < a_hi;
    let time_overlap = p1.time_interval().intersects(&p2.time_interval());
    !(freq_overlap && time_overlap)
}

/// Walsh coefficients `coeffs[k] = <f, W_k>` of a function at resolution
/// `res`; Parseval holds for the normalized transform.
#[derive(Debug, Clone, PartialEq)]
pub struct WalshCoefficients {
    res: u32,
    coeffs: Vec<f64>,
}

impl WalshCoefficients {
    pub fn from_coeffs(res: u32, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != 1usize << res {
            return Err(Error::InvalidArgument(format!(
                "expected 2^{res} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self { res, coeffs })
    }

    pub fn res(&self) -> u32 {
        self.res
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }
}

/// The Walsh function `W_n` sampled at resolution `res`, built by the
/// doubling recursion. All values are `+1` or `-1`.
pub fn walsh(n: u64, res: u32) -> Result<DyadicFunction> {
    if res > crate::dyadic::MAX_RES {
        return Err(Error::InvalidArgument(format!(
            "resolution {res} exceeds cap"
        )));
    }
    if n >= 1u64 << res {
        return Err(Error::Unresolvable(format!(
            "unresolvable frequency: W_{n} needs more than 2^{res} cells"
        )));
    }
    DyadicFunction::from_values(res, walsh_values(n, res))
}

fn walsh_values(n: u64, res: u32) -> Vec<f64> {
    if n == 0 {
        return vec![1.0; 1usize << res];
    }
    let half = walsh_values(n >> 1, res - 1);
    let mut out = Vec::with_capacity(half.len() * 2);
    out.extend_from_slice(&half);
    if n & 1 == 0 {
        out.extend_from_slice(&half);
    } else {
        out.extend(half.iter().map(|v| -v));
    }
    out
}

/// Sign of `W_n` on grid cell `cell`: `(-1)^{popcount(n & reverse(cell))}`.
/// Equivalent to the recursion (tested against it); O(1) per evaluation.
pub(crate) fn walsh_sign(n: u64, cell: u64, res: u32) -> f64 {
    if res == 0 {
        return 1.0;
    }
    let rev = cell.reverse_bits() >> (64 - res);
    if (n & rev).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn bit_reverse_permute<T: Copy>(v: &mut [T]) {
    if v.len() <= 2 {
        return;
    }
    let bits = v.len().trailing_zeros();
    for i in 0..v.len() {
        let j = ((i as u64).reverse_bits() >> (64 - bits)) as usize;
        if i < j {
            v.swap(i, j);
        }
    }
}

fn butterfly_f64(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        let mut block = 0;
        while block < n {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
            block += h * 2;
        }
        h *= 2;
    }
}

fn butterfly_i64(v: &mut [i64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        let mut block = 0;
        while block < n {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
            block += h * 2;
        }
        h *= 2;
    }
}

/// Fast Walsh-Hadamard transform: `coeffs[k] = <f, W_k>` in
/// `O(res 2^res)`.
pub fn fwht(f: &DyadicFunction) -> WalshCoefficients {
    let mut buf = f.values().to_vec();
    bit_reverse_permute(&mut buf);
    butterfly_f64(&mut buf);
    let scale = f.cell_width();
    for c in &mut buf {
        *c *= scale;
    }
    WalshCoefficients { res: f.res(), coeffs: buf }
}

/// Synthesis `f = sum_k coeffs[k] W_k`; exact inverse of [`fwht`] up to
/// rounding.
pub fn inverse_fwht(c: &WalshCoefficients) -> DyadicFunction {
    let mut buf = c.coeffs.clone();
    butterfly_f64(&mut buf);
    bit_reverse_permute(&mut buf);
    DyadicFunction::from_values(c.res, buf).expect("coefficient invariant")
}

/// Exact integer transform: returns the unnormalized sums
/// `y[k] = sum_i f_i W_k(cell i)`. With `+-1` inputs every intermediate
/// stays an integer, so Walsh orthonormality can be checked exactly.
pub fn fwht_i64(values: &[i64]) -> Result<Vec<i64>> {
    if !values.len().is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "integer transform needs a power-of-two length, got {}",
            values.len()
        )));
    }
    let mut buf = values.to_vec();
    bit_reverse_permute(&mut buf);
    butterfly_i64(&mut buf);
    Ok(buf)
}

/// The Walsh packet `phi_p = 2^{k/2} W_n(2^k x - m)` on `I_p`, zero
/// elsewhere; L2-normalized.
pub fn packet(p: &Tile, res: u32) -> Result<DyadicFunction> {
    if !p.resolvable_at(res) {
        return Err(Error::Unresolvable(format!(
            "tile (k={}, m={}, n={}) not resolvable at resolution {res}",
            p.k, p.m, p.n
        )));
    }
    let inner_res = res - p.k;
    let w = walsh_values(p.n, inner_res);
    let amp = 2f64.powi(p.k as i32).sqrt();
    let range = p.time_interval().cell_range(res)?;
    let mut vals = vec![0.0; 1usize << res];
    for (t, cell) in range.enumerate() {
        vals[cell] = amp * w[t];
    }
    DyadicFunction::from_values(res, vals)
}

/// The Walsh-Fourier partial sum `S_N f = sum_{0<=k<=N} <f,W_k> W_k`;
/// `N = -1` returns the zero function.
pub fn partial_sum(f: &DyadicFunction, n: i64) -> Result<DyadicFunction> {
    if n < -1 || n >= (1i64 << f.res()) {
        return Err(Error::InvalidArgument(format!(
            "partial sum index {n} out of range -1..2^{}",
            f.res()
        )));
    }
    if n == -1 {
        return DyadicFunction::zero(f.res());
    }
    let mut c = fwht(f);
    for k in (n + 1) as usize..c.coeffs.len() {
        c.coeffs[k] = 0.0;
    }
    Ok(inverse_fwht(&c))
}

/// Factorization constants of a sibling pair against a dominating tile:
/// `phi_p = c_pq 1_I phi_q` and `phi_p' = c_p'q |I|^{1/2} h_I phi_q`,
/// where `p` is the lower sibling and `I` the common time interval.
/// Both identities are verified cell-wise before returning; the signs are
/// computed, not assumed.
pub fn haar_factorization(
    p: &Tile,
    p_sib: &Tile,
    q: &Tile,
    res: u32,
) -> Result<(f64, f64)> {
    if p.k != p_sib.k || p.m != p_sib.m {
        return Err(Error::NotSiblingConfiguration(
            "time intervals differ".into(),
        ));
    }
    if p.n % 2 != 0 || p_sib.n != p.n + 1 {
        return Err(Error::NotSiblingConfiguration(format!(
            "frequencies {} and {} are not a lower/upper sibling pair",
            p.n, p_sib.n
        )));
    }
    if !tile_less(p, q) {
        return Err(Error::NotSiblingConfiguration(
            "third tile does not dominate the lower sibling".into(),
        ));
    }
    if !p_sib.resolvable_at(res) || !q.resolvable_at(res) || res < p.k + 1 {
        return Err(Error::Unresolvable(format!(
            "configuration not resolvable at resolution {res}"
        )));
    }

    let interval = p.time_interval();
    let phi_p = packet(p, res)?;
    let phi_sib = packet(p_sib, res)?;
    let phi_q = packet(q, res)?;
    let h = haar(&interval, res)?;
    let sqrt_len = interval.len().sqrt();

    let range = interval.cell_range(res)?;
    let first = range.start;
    let c_pq = phi_p.values()[first] / phi_q.values()[first];
    let c_sq = phi_sib.values()[first] / (sqrt_len * h.values()[first] * phi_q.values()[first]);

    for cell in 0..phi_p.num_cells() {
        let on_i = range.contains(&cell);
        let lhs1 = phi_p.values()[cell];
        let rhs1 = if on_i { c_pq * phi_q.values()[cell] } else { 0.0 };
        let lhs2 = phi_sib.values()[cell];
        let rhs2 = c_sq * sqrt_len * h.values()[cell] * phi_q.values()[cell];
        if (lhs1 - rhs1).abs() > 1e-10 || (lhs2 - rhs2).abs() > 1e-10 {
            return Err(Error::NotSiblingConfiguration(
                "factorization identity failed cell-wise".into(),
            ));
        }
    }
    Ok((c_pq, c_sq))
}

/// All tiles resolvable on a grid of resolution `res`.
pub fn all_tiles(res: u32) -> Vec<Tile> {
    let mut out = Vec::new();
    for k in 0..=res {
        for m in 0..(1u64 << k) {
            for n in 0..(1u64 << (res - k)) {
                out.push(Tile { k, m, n });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::conditional_expectation;
    use crate::generate;

    /// Direct O(4^res) transform from the recursion; the ordering oracle.
    fn fwht_direct(f: &DyadicFunction) -> Vec<f64> {
        (0..1u64 << f.res())
            .map(|k| inner(f, &walsh(k, f.res()).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn walsh_base_cases() {
        assert_eq!(walsh(0, 1).unwrap().values(), &[1.0, 1.0]);
        assert_eq!(walsh(1, 1).unwrap().values(), &[1.0, -1.0]);
        // hand-unrolled recursion: W_3 = W_1(2x) - W_1(2x-1)
        assert_eq!(walsh(3, 2).unwrap().values(), &[1.0, -1.0, -1.0, 1.0]);
        assert!(matches!(walsh(4, 2), Err(Error::Unresolvable(_))));
    }

    #[test]
    fn walsh_sign_matches_recursion() {
        for res in 0..=6u32 {
            for n in 0..1u64 << res {
                let w = walsh(n, res).unwrap();
                for cell in 0..1u64 << res {
                    assert_eq!(w.values()[cell as usize], walsh_sign(n, cell, res));
                }
            }
        }
    }

    #[test]
    fn fwht_picks_out_walsh_functions() {
        let f = walsh(3, 2).unwrap();
        let c = fwht(&f);
        assert_eq!(c.coeffs(), &[0.0, 0.0, 0.0, 1.0]);
        let one = DyadicFunction::constant(3, 1.0).unwrap();
        let c = fwht(&one);
        assert_eq!(c.coeffs()[0], 1.0);
        assert!(c.coeffs()[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fwht_matches_direct_oracle() {
        for res in 0..=5u32 {
            let mut rng = generate::rng_for(100 + res as u64);
            let f = generate::random_function(&mut rng, res).unwrap();
            let fast = fwht(&f);
            let direct = fwht_direct(&f);
            for (a, b) in fast.coeffs().iter().zip(&direct) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b} at res {res}");
            }
        }
    }

    #[test]
    fn fwht_roundtrip_and_parseval() {
        let res = 7;
        let mut rng = generate::rng_for(2);
        let f = generate::random_function(&mut rng, res).unwrap();
        let c = fwht(&f);
        let back = inverse_fwht(&c);
        assert!(back.sub(&f).unwrap().sup_norm() < 1e-10);
        let l2sq = inner(&f, &f).unwrap();
        assert!((c.energy() - l2sq).abs() < 1e-9);
    }

    #[test]
    fn integer_mode_orthonormality_small() {
        let res = 6;
        for j in 0..1u64 << res {
            let w: Vec<i64> = walsh(j, res)
                .unwrap()
                .values()
                .iter()
                .map(|&v| v as i64)
                .collect();
            let y = fwht_i64(&w).unwrap();
            for (k, &yk) in y.iter().enumerate() {
                let want = if k as u64 == j { 1i64 << res } else { 0 };
                assert_eq!(yk, want);
            }
        }
        assert!(fwht_i64(&[1, 2, 3]).is_err());
    }

    #[test]
    fn packet_examples() {
        let p = Tile::new(0, 0, 0).unwrap();
        let phi = packet(&p, 2).unwrap();
        assert_eq!(phi.values(), &[1.0, 1.0, 1.0, 1.0]);

        // I=[0,1/2), omega=[2,4): k=1, m=0, n=1
        let p = Tile::new(1, 0, 1).unwrap();
        let phi = packet(&p, 2).unwrap();
        let s = 2f64.sqrt();
        assert_eq!(phi.values(), &[s, -s, 0.0, 0.0]);
        assert!((inner(&phi, &phi).unwrap() - 1.0).abs() < 1e-10);

        assert!(packet(&Tile::new(1, 0, 2).unwrap(), 2).is_err());
    }

    #[test]
    fn packet_norms_are_one() {
        let res = 5;
        for p in all_tiles(res) {
            let phi = packet(&p, res).unwrap();
            assert!((inner(&phi, &phi).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn tile_order_examples() {
        let p = Tile::new(1, 0, 1).unwrap();
        assert!(tile_less(&p, &p));
        let a = Tile::new(1, 0, 0).unwrap(); // [0,1/2) x [0,2)
        let b = Tile::new(0, 0, 0).unwrap(); // [0,1) x [0,1)
        assert!(tile_less(&a, &b));
        assert!(!tile_less(&b, &a));
        let c = Tile::new(1, 0, 1).unwrap(); // [0,1/2) x [2,4)
        let d = Tile::new(1, 1, 0).unwrap(); // [1/2,1) x [0,2)
        assert!(!tile_less(&c, &d) && !tile_less(&d, &c));
    }

    #[test]
    fn orthogonality_iff_unordered() {
        let res = 4;
        let tiles = all_tiles(res);
        let packets: Vec<_> = tiles.iter().map(|p| packet(p, res).unwrap()).collect();
        for (i, p1) in tiles.iter().enumerate() {
            for (j, p2) in tiles.iter().enumerate() {
                let ip = inner(&packets[i], &packets[j]).unwrap();
                let ordered = tile_less(p1, p2) || tile_less(p2, p1);
                assert_eq!(ip.abs() > 1e-10, ordered, "{p1:?} {p2:?} -> {ip}");
                assert_eq!(!tiles_disjoint(p1, p2), ordered);
            }
        }
    }

    #[test]
    fn partial_sum_examples() {
        let res = 4;
        let mut rng = generate::rng_for(3);
        let f = generate::random_function(&mut rng, res).unwrap();
        assert_eq!(partial_sum(&f, -1).unwrap().sup_norm(), 0.0);
        let s0 = partial_sum(&f, 0).unwrap();
        assert!((s0.values()[0] - f.mean()).abs() < 1e-12);
        assert!(s0.sub(&DyadicFunction::constant(res, f.mean()).unwrap()).unwrap().sup_norm() < 1e-12);
        assert!(partial_sum(&f, 1 << res).is_err());
        assert!(partial_sum(&f, -2).is_err());
    }

    #[test]
    fn dyadic_partial_sums_are_conditional_expectations() {
        // S_{2^k - 1} f = E_k f, checked by summing coefficients directly
        for res in 1..=6u32 {
            let mut rng = generate::rng_for(40 + res as u64);
            let f = generate::random_function(&mut rng, res).unwrap();
            for k in 0..=res {
                let s = partial_sum(&f, (1i64 << k) - 1).unwrap();
                let e = conditional_expectation(&f, k).unwrap();
                assert!(s.sub(&e).unwrap().sup_norm() < 1e-10);
            }
        }
    }

    #[test]
    fn haar_factorization_examples() {
        // |I_q| = 1, |I| = 1/4 -> |c| = 2
        let p = Tile::new(2, 1, 0).unwrap();
        let sib = Tile::new(2, 1, 1).unwrap();
        let q = Tile::new(0, 0, 0).unwrap();
        let (c_pq, c_sq) = haar_factorization(&p, &sib, &q, 4).unwrap();
        assert!((c_pq.abs() - 2.0).abs() < 1e-12);
        assert!((c_sq.abs() - 2.0).abs() < 1e-12);

        // q = p -> c_pq = 1
        let (c_pq, c_sq) = haar_factorization(&p, &sib, &p, 4).unwrap();
        assert!((c_pq - 1.0).abs() < 1e-12);
        assert!((c_sq.abs() - 1.0).abs() < 1e-12);

        // not siblings
        let bad = Tile::new(2, 0, 1).unwrap();
        assert!(matches!(
            haar_factorization(&p, &bad, &q, 4),
            Err(Error::NotSiblingConfiguration(_))
        ));
        // q does not dominate
        let far = Tile::new(2, 2, 0).unwrap();
        assert!(haar_factorization(&p, &sib, &far, 4).is_err());
    }

    #[test]
    fn haar_factorization_all_admissible_triples() {
        let res = 5;
        for k in 0..res {
            for m in 0..(1u64 << k) {
                for half in 0..(1u64 << (res - k - 1)) {
                    let p = Tile::new(k, m, 2 * half).unwrap();
                    let sib = Tile::new(k, m, 2 * half + 1).unwrap();
                    for kq in 0..=k {
                        let mq = m >> (k - kq);
                        let (plo, phi_) = p.freq_bounds();
                        let step = 1u64 << kq;
                        let mut nq = plo / step;
                        while nq * step < phi_ {
                            let q = Tile::new(kq, mq, nq).unwrap();
                            if tile_less(&p, &q) {
                                let (c1, c2) = haar_factorization(&p, &sib, &q, res).unwrap();
                                let expect =
                                    (q.time_interval().len() / p.time_interval().len()).sqrt();
                                assert!((c1.abs() - expect).abs() < 1e-10);
                                assert!((c2.abs() - expect).abs() < 1e-10);
                            }
                            nq += 1;
                        }
                    }
                }
            }
        }
    }
}
