//! Noise-expanded local evolution operators along one branch segment.
//!
//! In a polynomial basis centered on an orbit point, one step of the
//! noisy dynamics acts (to a given order in the noise strength σ) through
//! two ingredients:
//!
//! * the noise kernel, entering only through its scaled moments
//!   `a_n / n!` — for a Gaussian, `a_{2n} = (2n-1)!!` and the odd moments
//!   vanish;
//! * the inverse-branch jet `F` between consecutive orbit points, entering
//!   through the derivative matrix
//!   `B_{k,k'} = sgn(f') · (k+1)!/(k'+1)! · [F^{k'+1}]_{k+1}`,
//!   where `[·]_j` takes the j-th Taylor coefficient.
//!
//! The operator truncated to an `m × m` block is then a polynomial in σ
//! whose σ^n plane is `a_n/n!` times the `B` rows shifted down by `n`:
//! the n-th kernel moment couples basis function `k'` to derivatives `n`
//! rows deeper. [`LMatrix`] stores these planes and multiplies them as
//! truncated power series in σ, which is all the trace pipeline needs.

use crate::error::{Error, Result};
use crate::maps::Map;
use crate::series::SigmaSeries;

/// Noise kernel reduced to the data the expansion consumes: its moments
/// `a_n` and the scaled weights `a_n / n!`.
#[derive(Debug, Clone)]
pub struct NoiseKernel {
    name: String,
    moments: Vec<f64>,
    weights: Vec<f64>,
}

impl NoiseKernel {
    /// Gaussian kernel through σ^sigma_order: `a_{2n} = (2n-1)!!`, odd
    /// moments zero, so the weights are `1/(2^n n!)`.
    pub fn gaussian(sigma_order: usize) -> NoiseKernel {
        let mut moments = vec![0.0; sigma_order + 1];
        moments[0] = 1.0;
        let mut m = 1.0;
        for n in (2..=sigma_order).step_by(2) {
            m *= (n - 1) as f64;
            moments[n] = m;
        }
        Self::from_moments("gaussian", moments).expect("Gaussian moments are valid")
    }

    /// A kernel given by raw moments `a_0, a_1, …`; the noise must be a
    /// normalized, zero-mean distribution, i.e. `a_0 = 1` and `a_1 = 0`.
    pub fn from_moments(name: &str, moments: Vec<f64>) -> Result<NoiseKernel> {
        if moments.is_empty() || moments[0] != 1.0 {
            return Err(Error::InvalidKernel(
                "kernel moments must start with a_0 = 1".into(),
            ));
        }
        if moments.len() > 1 && moments[1] != 0.0 {
            return Err(Error::InvalidKernel(
                "kernel must have zero mean (a_1 = 0)".into(),
            ));
        }
        if moments.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidKernel("kernel moments must be finite".into()));
        }
        let mut weights = Vec::with_capacity(moments.len());
        let mut factorial = 1.0;
        for (n, &a) in moments.iter().enumerate() {
            if n > 0 {
                factorial *= n as f64;
            }
            weights.push(a / factorial);
        }
        Ok(NoiseKernel {
            name: name.to_string(),
            moments,
            weights,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Highest power of σ the kernel carries.
    pub fn sigma_order(&self) -> usize {
        self.moments.len() - 1
    }

    pub fn moment(&self, n: usize) -> f64 {
        self.moments[n]
    }

    /// `a_n / n!`, the coefficient the σ^n operator plane is scaled by.
    pub fn weight(&self, n: usize) -> f64 {
        self.weights[n]
    }
}

/// The derivative matrix of one inverse-branch segment:
/// `B_{k,k'} = sgn(f') · (k+1)!/(k'+1)! · [F^{k'+1}]_{k+1}`, strictly
/// lower-triangular above nothing — `F` has no constant term, so entries
/// with `k < k'` vanish. Stored row-major with `rows ≥ cols` so the
/// down-shifted planes of the σ expansion can be sliced out of it.
#[derive(Debug, Clone)]
pub struct BMatrix {
    rows: usize,
    cols: usize,
    sign: f64,
    data: Vec<f64>,
}

impl BMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Orientation `sgn(f')` of the branch the matrix was built from.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn entry(&self, k: usize, kp: usize) -> f64 {
        self.data[k * self.cols + kp]
    }
}

/// Builds the derivative matrix for the inverse branch of `map` centered
/// at image point `y_center`.
///
/// Column `k'` holds the Taylor coefficients of `F^{k'+1}` shifted up by
/// one and rescaled by the factorial ratio; the powers are accumulated
/// incrementally by one Cauchy product per column.
pub fn build_b(
    map: &dyn Map,
    branch: usize,
    y_center: f64,
    rows: usize,
    cols: usize,
) -> Result<BMatrix> {
    assert!(rows >= cols, "need rows >= cols to slice σ planes");
    let jet = map.inverse_jet(branch, y_center, rows)?;
    let sign = if jet.coeff(1) < 0.0 { -1.0 } else { 1.0 };
    let mut data = vec![0.0; rows * cols];
    // power[j] = [F^{k'+1}]_j, updated in place column by column
    let mut power = vec![0.0; rows + 1];
    power[0] = 1.0;
    let mut next = vec![0.0; rows + 1];
    for kp in 0..cols {
        next.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..=rows {
            let p = power[j];
            if p == 0.0 {
                continue;
            }
            for l in 1..=rows - j {
                next[j + l] += p * jet.coeff(l);
            }
        }
        std::mem::swap(&mut power, &mut next);
        let mut fac = 1.0;
        for k in kp..rows {
            if k > kp {
                fac *= (k + 1) as f64;
            }
            data[k * cols + kp] = sign * fac * power[k + 1];
        }
    }
    Ok(BMatrix {
        rows,
        cols,
        sign,
        data,
    })
}

/// An `m × m` operator block whose entries are truncated power series in
/// σ: `data[n]` is the matrix multiplying σ^n.
#[derive(Debug, Clone)]
pub struct LMatrix {
    m: usize,
    sigma_order: usize,
    data: Vec<f64>, // plane-major: [n][i][j] at n*m*m + i*m + j
}

impl LMatrix {
    pub fn zeros(m: usize, sigma_order: usize) -> LMatrix {
        LMatrix {
            m,
            sigma_order,
            data: vec![0.0; (sigma_order + 1) * m * m],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma_order(&self) -> usize {
        self.sigma_order
    }

    pub fn plane(&self, n: usize) -> &[f64] {
        &self.data[n * self.m * self.m..(n + 1) * self.m * self.m]
    }

    pub fn entry(&self, n: usize, i: usize, j: usize) -> f64 {
        self.data[n * self.m * self.m + i * self.m + j]
    }

    /// σ-series matrix product: the σ^s plane of the result sums
    /// `self[a] · other[s-a]` over ascending `a`, a fixed order that keeps
    /// repeated runs bit-identical.
    pub fn mul(&self, other: &LMatrix) -> LMatrix {
        assert_eq!(self.m, other.m, "operator blocks of different size");
        assert_eq!(self.sigma_order, other.sigma_order);
        let m = self.m;
        let mut out = LMatrix::zeros(m, self.sigma_order);
        for s in 0..=self.sigma_order {
            for a in 0..=s {
                let pa = self.plane(a);
                let pb = other.plane(s - a);
                let pc = &mut out.data[s * m * m..(s + 1) * m * m];
                for i in 0..m {
                    for k in 0..m {
                        let v = pa[i * m + k];
                        if v == 0.0 {
                            continue;
                        }
                        for j in 0..m {
                            pc[i * m + j] += v * pb[k * m + j];
                        }
                    }
                }
            }
        }
        out
    }

    /// `r`-th power by repeated multiplication (`r ≥ 1`); cycle repeats
    /// stay small, so no exponentiation tricks are needed.
    pub fn pow(&self, r: usize) -> LMatrix {
        assert!(r >= 1);
        let mut out = self.clone();
        for _ in 1..r {
            out = out.mul(self);
        }
        out
    }

    /// Trace of each σ plane.
    pub fn trace(&self) -> SigmaSeries {
        let mut t = SigmaSeries::new(self.sigma_order);
        for n in 0..=self.sigma_order {
            let p = self.plane(n);
            let mut acc = 0.0;
            for i in 0..self.m {
                acc += p[i * self.m + i];
            }
            t.set_coeff(n, acc);
        }
        t
    }

    /// Leading principal `mr × mr` block of every plane — the truncation
    /// used when a long trace needs fewer basis functions.
    pub fn leading_block(&self, mr: usize) -> LMatrix {
        assert!(mr <= self.m);
        let mut out = LMatrix::zeros(mr, self.sigma_order);
        for n in 0..=self.sigma_order {
            let p = self.plane(n);
            let q = &mut out.data[n * mr * mr..(n + 1) * mr * mr];
            for i in 0..mr {
                for j in 0..mr {
                    q[i * mr + j] = p[i * self.m + j];
                }
            }
        }
        out
    }
}

/// Assembles the σ-expanded operator block from a derivative matrix: the
/// σ^n plane is `weight(n)` times rows `n..n+m` of `B`.
pub fn build_l(b: &BMatrix, kernel: &NoiseKernel, m: usize) -> Result<LMatrix> {
    let so = kernel.sigma_order();
    if b.cols() < m || b.rows() < m + so {
        return Err(Error::Dimension(format!(
            "derivative matrix {}x{} too small for m = {m} at σ order {so}",
            b.rows(),
            b.cols()
        )));
    }
    let mut out = LMatrix::zeros(m, so);
    for n in 0..=so {
        let w = kernel.weight(n);
        if w == 0.0 {
            continue;
        }
        let plane = &mut out.data[n * m * m..(n + 1) * m * m];
        for i in 0..m {
            for j in 0..m {
                plane[i * m + j] = w * b.entry(n + i, j);
            }
        }
    }
    Ok(out)
}

/// One-call segment operator: derivative matrix at `y_center` on `branch`,
/// then the σ expansion at block size `m`.
pub fn segment_operator(
    map: &dyn Map,
    branch: usize,
    y_center: f64,
    m: usize,
    kernel: &NoiseKernel,
) -> Result<LMatrix> {
    let b = build_b(map, branch, y_center, m + kernel.sigma_order(), m)?;
    build_l(&b, kernel, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::locate_cycle;
    use crate::maps::{linear_map, quartic_map, Map};
    use crate::series::Jet;

    #[test]
    fn gaussian_moments_are_double_factorials() {
        let k = NoiseKernel::gaussian(10);
        let expect = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0, 0.0, 945.0];
        for (n, &a) in expect.iter().enumerate() {
            assert_eq!(k.moment(n), a, "moment {n}");
        }
        // weights 1/(2^n n!) for the even orders
        let mut half_fac = 1.0;
        for n in 0..=5usize {
            if n > 0 {
                half_fac *= 2.0 * n as f64;
            }
            assert!((k.weight(2 * n) - 1.0 / half_fac).abs() < 1e-16 / half_fac);
        }
    }

    #[test]
    fn kernel_validation() {
        assert!(NoiseKernel::from_moments("bad", vec![2.0]).is_err());
        assert!(NoiseKernel::from_moments("drift", vec![1.0, 0.5]).is_err());
        assert!(NoiseKernel::from_moments("nan", vec![1.0, 0.0, f64::NAN]).is_err());
        let uniform = NoiseKernel::from_moments("uniform", vec![1.0, 0.0, 1.0 / 3.0]).unwrap();
        assert_eq!(uniform.sigma_order(), 2);
        assert!((uniform.weight(2) - 1.0 / 6.0).abs() < 1e-18);
    }

    #[test]
    fn b_diagonal_is_reciprocal_multiplier_power() {
        let map = quartic_map();
        for word in [vec![0u8], vec![1u8]] {
            let c = locate_cycle(&map, &word, 1e-12).unwrap();
            let b = build_b(&map, word[0] as usize, c.points[0], 20, 12).unwrap();
            let s = c.multiplier.signum();
            for m in 0..12 {
                let expect = s / c.multiplier.powi(m as i32 + 1);
                assert!(
                    (b.entry(m, m) - expect).abs() < 1e-12 * expect.abs(),
                    "diagonal {m}: {} vs {expect}",
                    b.entry(m, m)
                );
            }
            // everything above the diagonal vanishes identically
            for k in 0..12 {
                for kp in k + 1..12 {
                    assert_eq!(b.entry(k, kp), 0.0);
                }
            }
        }
    }

    #[test]
    fn first_subdiagonal_matches_finite_difference_of_the_inverse() {
        // B_{1,0} = sgn(f') · 2 · c₂ with c₂ the curvature coefficient of
        // the inverse branch; measure c₂ by finite differences so the
        // check does not reuse the jet machinery
        let map = quartic_map();
        let y = 0.37;
        let b = build_b(&map, 1, y, 12, 6).unwrap();
        let g = |dy: f64| map.inverse_point(1, y + dy).unwrap();
        let h = 1e-3;
        let c2 = (-g(2.0 * h) + 16.0 * g(h) - 30.0 * g(0.0) + 16.0 * g(-h) - g(-2.0 * h))
            / (24.0 * h * h);
        let s = map.deriv(g(0.0)).signum();
        assert!(
            (b.entry(1, 0) - s * 2.0 * c2).abs() < 1e-7 * c2.abs(),
            "{} vs {}",
            b.entry(1, 0),
            s * 2.0 * c2
        );
    }

    #[test]
    fn second_superdiagonal_closed_form() {
        // B_{m+2,m} = sgn · (m+3)!/(m+1)! · [ (m+1)m/2 · c₂² c₁^{m-1}
        //                                    + (m+1) · c₃ c₁^{m} ]
        // — the two ways to spend two extra powers of y among m+1 factors
        let map = quartic_map();
        let y = 0.52;
        let jet = map.inverse_jet(1, y, 12).unwrap();
        let (c1, c2, c3) = (jet.coeff(1), jet.coeff(2), jet.coeff(3));
        let s = c1.signum();
        let b = build_b(&map, 1, y, 12, 8).unwrap();
        for m in 1..=5usize {
            let mut ratio = 1.0; // (m+3)!/(m+1)!
            for k in m + 2..=m + 3 {
                ratio *= k as f64;
            }
            let mf = m as f64;
            let expect = s
                * ratio
                * ((mf + 1.0) * mf / 2.0 * c2 * c2 * c1.powi(m as i32 - 1)
                    + (mf + 1.0) * c3 * c1.powi(m as i32));
            assert!(
                (b.entry(m + 2, m) - expect).abs() < 1e-11 * expect.abs().max(1e-6),
                "m = {m}: {} vs {expect}",
                b.entry(m + 2, m)
            );
        }
    }

    #[test]
    fn b_columns_match_repeated_jet_multiplication() {
        // the incremental convolution must agree with powers formed by
        // the (independently property-tested) jet product
        let map = quartic_map();
        let y = 0.8;
        let rows = 14;
        let b = build_b(&map, 0, y, rows, 6).unwrap();
        let jet = map.inverse_jet(0, y, rows).unwrap();
        let s = jet.coeff(1).signum();
        let mut power = Jet::one(rows);
        for kp in 0..6usize {
            power = power.mul(&jet);
            let mut fac = 1.0;
            for k in kp..rows {
                if k > kp {
                    fac *= (k + 1) as f64;
                }
                let expect = s * fac * power.coeff(k + 1);
                let got = b.entry(k, kp);
                assert!(
                    (got - expect).abs() <= 1e-13 * expect.abs().max(1e-300),
                    "entry ({k},{kp})"
                );
            }
        }
    }

    #[test]
    fn sigma_planes_are_shifted_scaled_b_rows() {
        let map = quartic_map();
        let kernel = NoiseKernel::gaussian(10);
        let m = 8;
        let b = build_b(&map, 1, 0.6, m + 10, m).unwrap();
        let l = build_l(&b, &kernel, m).unwrap();
        for n in 0..=10usize {
            for i in 0..m {
                for j in 0..m {
                    let expect = kernel.weight(n) * b.entry(n + i, j);
                    assert_eq!(l.entry(n, i, j), expect, "plane {n} entry ({i},{j})");
                }
            }
        }
        // Gaussian: odd planes vanish identically
        for n in (1..=9usize).step_by(2) {
            assert!(l.plane(n).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn linear_map_operator_is_diagonal_with_shifted_noise_planes() {
        let map = linear_map(2.0).unwrap();
        let kernel = NoiseKernel::gaussian(6);
        let l = segment_operator(&map, 0, 0.0, 6, &kernel).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j {
                    2.0f64.powi(-(i as i32) - 1)
                } else {
                    0.0
                };
                assert!((l.entry(0, i, j) - expect).abs() < 1e-15);
            }
        }
        // σ² plane couples basis function j to row j-2: the only nonzero
        // entries are L[2][j-2][j] = (1/2) Λ^{-(j+1)}
        for i in 0..6 {
            for j in 0..6 {
                let expect = if j == i + 2 {
                    0.5 * 2.0f64.powi(-(j as i32) - 1)
                } else {
                    0.0
                };
                assert!((l.entry(2, i, j) - expect).abs() < 1e-15);
            }
        }
        assert!((l.entry(2, 0, 2) - 0.0625).abs() < 1e-16); // (1/2)·2^{-3}
    }

    #[test]
    fn series_product_and_trace() {
        // for the linear map the noise planes are strictly upper
        // triangular, so traces are σ-independent: Σ_i s Λ^{-(i+1)}
        for lambda in [2.0, -3.0] {
            let map = linear_map(lambda).unwrap();
            let kernel = NoiseKernel::gaussian(8);
            let m = 20;
            let l = segment_operator(&map, 0, 0.0, m, &kernel).unwrap();
            let t2 = l.mul(&l).trace();
            let s = lambda.signum();
            let expect: f64 = (0..m)
                .map(|i| (s / lambda.powi(i as i32 + 1)).powi(2))
                .sum();
            assert!((t2.coeff(0) - expect).abs() < 1e-14 * expect.abs());
            for n in 1..=8usize {
                assert!(
                    t2.coeff(n).abs() < 1e-14,
                    "σ^{n} trace leak {}",
                    t2.coeff(n)
                );
            }
        }
    }

    #[test]
    fn power_and_leading_block_agree_with_direct_products() {
        let map = quartic_map();
        let kernel = NoiseKernel::gaussian(6);
        let l = segment_operator(&map, 1, 0.55, 10, &kernel).unwrap();
        let p3 = l.pow(3);
        let q3 = l.mul(&l).mul(&l);
        for n in 0..=6usize {
            for (a, b) in p3.plane(n).iter().zip(q3.plane(n)) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
        let small = l.leading_block(4);
        for n in 0..=6usize {
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(small.entry(n, i, j), l.entry(n, i, j));
                }
            }
        }
    }
}
