//! Truncated power-series arithmetic in one formal variable.
//!
//! Two closely related types live here:
//!
//! * [`Jet`] — a truncated Taylor expansion about a point, stored as the
//!   coefficients `c_l` (the l-th derivative divided by `l!`). All the
//!   multinomial bookkeeping of the expansion machinery reduces to ring
//!   operations on jets: Cauchy products, powers, composition, reversion.
//! * [`SigmaSeries`] — a polynomial in the noise amplitude σ, truncated at
//!   a fixed order. Matrix entries, traces and cumulants of the noisy
//!   evolution operator are values of this type.
//!
//! Every operation is exact through the truncation order: the output
//! coefficient at index `l` depends only on input coefficients of index
//! `<= l`, so truncation commutes with the arithmetic. Storing `c_l`
//! rather than raw derivatives avoids factorial overflow at the orders
//! (~36) this crate works at.

use crate::error::{Error, Result};

/// Truncated Taylor series `c_0 + c_1 y + ... + c_N y^N`.
///
/// `c_l` is the l-th Taylor *coefficient* (derivative over `l!`). The
/// truncation order `N` is `coeffs.len() - 1` and is preserved by all
/// arithmetic; binary operations panic on mismatched orders, since mixing
/// truncation orders silently is always a bug in this code base.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<f64>,
}

impl Jet {
    /// Jet with the given coefficients; the truncation order is `coeffs.len() - 1`.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least a constant term");
        Jet { coeffs }
    }

    /// The zero series at truncation order `order`.
    pub fn zeros(order: usize) -> Self {
        Jet {
            coeffs: vec![0.0; order + 1],
        }
    }

    /// The constant series `c`.
    pub fn constant(c: f64, order: usize) -> Self {
        let mut j = Jet::zeros(order);
        j.coeffs[0] = c;
        j
    }

    /// The multiplicative unit `1`.
    pub fn one(order: usize) -> Self {
        Jet::constant(1.0, order)
    }

    /// The identity series `y`.
    pub fn identity(order: usize) -> Self {
        assert!(order >= 1, "the identity jet needs order >= 1");
        let mut j = Jet::zeros(order);
        j.coeffs[1] = 1.0;
        j
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `y^l`. Panics if `l` exceeds the truncation order.
    pub fn coeff(&self, l: usize) -> f64 {
        self.coeffs[l]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, l: usize, value: f64) {
        self.coeffs[l] = value;
    }

    fn assert_same_order(&self, other: &Jet) {
        assert_eq!(
            self.order(),
            other.order(),
            "jet truncation orders must match"
        );
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.assert_same_order(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Jet { coeffs }
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.assert_same_order(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Jet { coeffs }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Cauchy product truncated at the common order.
    pub fn mul(&self, other: &Jet) -> Jet {
        self.assert_same_order(other);
        let n = self.order();
        let mut coeffs = vec![0.0; n + 1];
        for (l, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..=l {
                acc += self.coeffs[a] * other.coeffs[l - a];
            }
            *c = acc;
        }
        Jet { coeffs }
    }

    /// `self^m` by binary exponentiation of the truncated product.
    ///
    /// `m = 0` gives the unit jet. For a jet with zero constant term the
    /// coefficients below index `m` come out exactly zero, matching the
    /// valuation of the exact power.
    pub fn pow(&self, m: usize) -> Jet {
        let mut result = Jet::one(self.order());
        let mut base = self.clone();
        let mut e = m;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Taylor coefficients of `self ∘ inner`, truncated at the common order.
    ///
    /// `inner` must have zero constant term — composition of truncated
    /// series is only exact when the inner series has positive valuation.
    pub fn compose(&self, inner: &Jet) -> Jet {
        self.assert_same_order(inner);
        assert_eq!(
            inner.coeffs[0], 0.0,
            "compose requires a zero constant term in the inner jet"
        );
        let n = self.order();
        // Horner evaluation: acc = c_N, then acc = acc*inner + c_l downwards.
        let mut acc = Jet::constant(self.coeffs[n], n);
        for l in (0..n).rev() {
            acc = acc.mul(inner);
            acc.coeffs[0] += self.coeffs[l];
        }
        acc
    }

    /// Derivative as a jet of the *same* order (the top coefficient,
    /// which truncation cannot determine, is set to zero).
    fn derivative_padded(&self) -> Jet {
        let n = self.order();
        let mut coeffs = vec![0.0; n + 1];
        for l in 0..n {
            coeffs[l] = (l as f64 + 1.0) * self.coeffs[l + 1];
        }
        Jet { coeffs }
    }

    /// Multiplicative inverse `1/self`, requiring a nonzero constant term.
    ///
    /// Newton iteration `r <- r (2 - a r)` doubles the number of correct
    /// coefficients per step, so `ceil(log2(N+1)) + 1` steps suffice.
    pub fn reciprocal(&self) -> Result<Jet> {
        let c0 = self.coeffs[0];
        if c0 == 0.0 || !c0.is_finite() {
            return Err(Error::ZeroConstantTerm(c0));
        }
        let n = self.order();
        let mut r = Jet::constant(1.0 / c0, n);
        let two = Jet::constant(2.0, n);
        for _ in 0..=usize::BITS - ((n + 1) as u32).leading_zeros() {
            r = r.mul(&two.sub(&self.mul(&r)));
        }
        Ok(r)
    }

    /// Series reversion: the jet `b` with `self ∘ b = y` through the
    /// truncation order.
    ///
    /// Requires zero constant term (panic — contract) and a nonzero linear
    /// term (error — the reversion is genuinely singular there).
    pub fn invert(&self) -> Result<Jet> {
        assert_eq!(
            self.coeffs[0], 0.0,
            "series reversion requires a zero constant term"
        );
        let c1 = self.coeffs[1];
        if c1.abs() < 1e-300 {
            return Err(Error::SingularReversion(c1));
        }
        let n = self.order();
        let id = Jet::identity(n);
        let da = self.derivative_padded();
        // Start from the linearization; Newton on b ↦ a∘b - y doubles the
        // valuation of the defect each step.
        let mut b = id.scale(1.0 / c1);
        for _ in 0..=usize::BITS - ((n + 1) as u32).leading_zeros() {
            let defect = self.compose(&b).sub(&id);
            let slope = da.compose(&b);
            b = b.sub(&defect.mul(&slope.reciprocal()?));
            // The constant term is exactly zero in exact arithmetic; pin it.
            b.coeffs[0] = 0.0;
        }
        Ok(b)
    }

    /// Binomial-series expansion of `self^p` for real `p`.
    ///
    /// The constant term must be positive (principal branch). Exact through
    /// the truncation order: with `a = c_0 (1 + u)`, the result is
    /// `c_0^p · Σ_k binom(p, k) u^k`, evaluated by Horner.
    pub fn fractional_power(&self, p: f64) -> Result<Jet> {
        let c0 = self.coeffs[0];
        if !(c0 > 0.0) {
            return Err(Error::BranchPoint(c0));
        }
        let n = self.order();
        let mut u = self.scale(1.0 / c0);
        u.coeffs[0] = 0.0;
        // binom(p, k) by the downward recurrence t_{k} = t_{k-1} (p-k+1)/k.
        let mut binom = vec![0.0; n + 1];
        binom[0] = 1.0;
        for k in 1..=n {
            binom[k] = binom[k - 1] * (p - k as f64 + 1.0) / k as f64;
        }
        let mut acc = Jet::constant(binom[n], n);
        for k in (0..n).rev() {
            acc = acc.mul(&u);
            acc.coeffs[0] += binom[k];
        }
        Ok(acc.scale(c0.powf(p)))
    }

    /// Series exponential `exp(self)`.
    ///
    /// Uses the standard derivative recurrence
    /// `e_l = (1/l) Σ_{k=1..l} k c_k e_{l-k}` seeded with `e_0 = exp(c_0)`.
    pub fn exp(&self) -> Jet {
        let n = self.order();
        let mut e = vec![0.0; n + 1];
        e[0] = self.coeffs[0].exp();
        for l in 1..=n {
            let mut acc = 0.0;
            for k in 1..=l {
                acc += k as f64 * self.coeffs[k] * e[l - k];
            }
            e[l] = acc / l as f64;
        }
        Jet { coeffs: e }
    }

    /// Largest absolute coefficient; handy for tolerances in tests.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Truncated polynomial in the noise amplitude σ.
///
/// `coeffs[j]` multiplies `σ^j`; the length is `n_max + 1`. For a Gaussian
/// kernel every odd-index coefficient stays exactly zero through the whole
/// pipeline (the zero planes propagate exactly through products), which the
/// tests use as a structural invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSeries {
    coeffs: Vec<f64>,
}

impl SigmaSeries {
    /// The zero series truncated at `σ^n_max`.
    pub fn new(n_max: usize) -> Self {
        SigmaSeries {
            coeffs: vec![0.0; n_max + 1],
        }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a sigma series needs at least σ^0");
        SigmaSeries { coeffs }
    }

    pub fn one(n_max: usize) -> Self {
        let mut s = SigmaSeries::new(n_max);
        s.coeffs[0] = 1.0;
        s
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `σ^j`.
    pub fn coeff(&self, j: usize) -> f64 {
        self.coeffs[j]
    }

    pub fn set_coeff(&mut self, j: usize, value: f64) {
        self.coeffs[j] = value;
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn assert_same_order(&self, other: &SigmaSeries) {
        assert_eq!(
            self.n_max(),
            other.n_max(),
            "sigma-series truncation orders must match"
        );
    }

    pub fn add(&self, other: &SigmaSeries) -> SigmaSeries {
        self.assert_same_order(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        SigmaSeries { coeffs }
    }

    pub fn add_assign(&mut self, other: &SigmaSeries) {
        self.assert_same_order(other);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    pub fn sub(&self, other: &SigmaSeries) -> SigmaSeries {
        self.assert_same_order(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        SigmaSeries { coeffs }
    }

    pub fn scale(&self, s: f64) -> SigmaSeries {
        SigmaSeries {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Truncated product. The inner sum runs in fixed ascending index
    /// order so results are bit-reproducible across runs and thread counts.
    pub fn mul(&self, other: &SigmaSeries) -> SigmaSeries {
        self.assert_same_order(other);
        let n = self.n_max();
        let mut coeffs = vec![0.0; n + 1];
        for (s, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..=s {
                acc += self.coeffs[a] * other.coeffs[s - a];
            }
            *c = acc;
        }
        SigmaSeries { coeffs }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Largest |coefficient| at odd σ powers — exactly zero for even
    /// (e.g. Gaussian) kernels, which tests assert.
    pub fn max_abs_odd(&self) -> f64 {
        self.coeffs
            .iter()
            .skip(1)
            .step_by(2)
            .fold(0.0, |m, c: &f64| m.max(c.abs()))
    }

    /// Even-σ coefficients reinterpreted as a series in ε = σ², as a jet
    /// of truncation order `n_max/2` — the variable in which the
    /// eigenvalue expansion is solved.
    pub fn to_eps_jet(&self) -> Jet {
        let k = self.n_max() / 2;
        let mut j = Jet::zeros(k);
        for i in 0..=k {
            j.set_coeff(i, self.coeffs[2 * i]);
        }
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_jet_close(a: &Jet, b: &Jet, tol: f64) {
        assert_eq!(a.order(), b.order());
        for l in 0..=a.order() {
            assert!(
                (a.coeff(l) - b.coeff(l)).abs() <= tol,
                "coefficient {} differs: {} vs {}",
                l,
                a.coeff(l),
                b.coeff(l)
            );
        }
    }

    #[test]
    fn mul_binomial_square() {
        // (1 + y)^2 = 1 + 2y + y^2
        let a = Jet::from_coeffs(vec![1.0, 1.0, 0.0]);
        let sq = a.mul(&a);
        assert_eq!(sq.coeffs(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn mul_by_unit_is_identity() {
        let a = Jet::from_coeffs(vec![0.3, -1.2, 4.5, 0.07]);
        assert_eq!(a.mul(&Jet::one(3)), a);
    }

    #[test]
    fn mul_truncates_cauchy_product() {
        // (y/2 + y^2)^2 = y^2/4 + y^3 + (y^4, dropped at order 3)
        let a = Jet::from_coeffs(vec![0.0, 0.5, 1.0, 0.0]);
        let sq = a.mul(&a);
        assert_eq!(sq.coeffs(), &[0.0, 0.0, 0.25, 1.0]);
    }

    #[test]
    fn pow_zero_is_unit() {
        let a = Jet::from_coeffs(vec![0.0, 3.0, -2.0]);
        assert_eq!(a.pow(0), Jet::one(2));
    }

    #[test]
    fn pow_of_monomial() {
        // (y/2)^3 at order 4 -> 1/8 at y^3 only
        let a = Jet::from_coeffs(vec![0.0, 0.5, 0.0, 0.0, 0.0]);
        let p = a.pow(3);
        assert_eq!(p.coeffs(), &[0.0, 0.0, 0.0, 0.125, 0.0]);
    }

    #[test]
    fn pow_matches_hand_multinomial() {
        // (y/2 + y^2/2)^3 = y^3/8 + 3 y^4/8 + ...
        let a = Jet::from_coeffs(vec![0.0, 0.5, 0.5, 0.0, 0.0]);
        let p = a.pow(3);
        assert_eq!(p.coeffs(), &[0.0, 0.0, 0.0, 0.125, 0.375]);
    }

    #[test]
    fn compose_applies_inner_series() {
        // (1 + w)^2 with w = y + y^2: 1 + 2y + 3y^2 + 2y^3 + (y^4 dropped)
        let outer = Jet::from_coeffs(vec![1.0, 2.0, 1.0, 0.0]);
        let inner = Jet::from_coeffs(vec![0.0, 1.0, 1.0, 0.0]);
        let c = outer.compose(&inner);
        assert_eq!(c.coeffs(), &[1.0, 2.0, 3.0, 2.0]);
    }

    #[test]
    #[should_panic(expected = "zero constant term")]
    fn compose_rejects_shifted_inner() {
        let outer = Jet::one(2);
        let inner = Jet::constant(1.0, 2);
        let _ = outer.compose(&inner);
    }

    #[test]
    fn invert_linear() {
        let a = Jet::from_coeffs(vec![0.0, 2.0, 0.0]);
        let b = a.invert().unwrap();
        assert_jet_close(&b, &Jet::from_coeffs(vec![0.0, 0.5, 0.0]), 1e-15);
    }

    #[test]
    fn invert_matches_lagrange_inversion() {
        // invert(y + y^2) = y - y^2 + 2y^3 - ...
        let a = Jet::from_coeffs(vec![0.0, 1.0, 1.0, 0.0]);
        let b = a.invert().unwrap();
        assert_jet_close(&b, &Jet::from_coeffs(vec![0.0, 1.0, -1.0, 2.0]), 1e-14);
    }

    #[test]
    fn invert_rejects_vanishing_linear_term() {
        let a = Jet::from_coeffs(vec![0.0, 0.0, 1.0]);
        assert!(matches!(a.invert(), Err(Error::SingularReversion(_))));
    }

    #[test]
    fn reciprocal_of_geometric() {
        // 1/(1 - y) = 1 + y + y^2 + y^3
        let a = Jet::from_coeffs(vec![1.0, -1.0, 0.0, 0.0]);
        let r = a.reciprocal().unwrap();
        assert_jet_close(&r, &Jet::from_coeffs(vec![1.0, 1.0, 1.0, 1.0]), 1e-15);
    }

    #[test]
    fn fractional_power_square_root() {
        // (1 + y)^{1/2} = 1 + y/2 - y^2/8 + y^3/16
        let a = Jet::from_coeffs(vec![1.0, 1.0, 0.0, 0.0]);
        let r = a.fractional_power(0.5).unwrap();
        assert_jet_close(&r, &Jet::from_coeffs(vec![1.0, 0.5, -0.125, 0.0625]), 1e-15);
    }

    #[test]
    fn fractional_power_roundtrip() {
        let a = Jet::from_coeffs(vec![2.0, -0.7, 0.31, 0.05, -0.02]);
        let r = a.fractional_power(1.0 / 3.0).unwrap();
        assert_jet_close(&r.pow(3), &a, 1e-13);
    }

    #[test]
    fn fractional_power_rejects_nonpositive_constant() {
        let a = Jet::from_coeffs(vec![-1.0, 1.0]);
        assert!(matches!(
            a.fractional_power(0.25),
            Err(Error::BranchPoint(_))
        ));
    }

    #[test]
    fn exp_matches_scalar_series() {
        let a = Jet::from_coeffs(vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        let e = a.exp();
        let expect = Jet::from_coeffs(vec![1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0]);
        assert_jet_close(&e, &expect, 1e-15);
    }

    #[test]
    fn exp_of_log_of_geometric() {
        // exp(-Σ y^n / n) = 1 - y exactly, a miniature of the
        // trace-to-cumulant determinant identity.
        let n = 8;
        let mut log = Jet::zeros(n);
        for l in 1..=n {
            log.set_coeff(l, -1.0 / l as f64);
        }
        let e = log.exp();
        let mut expect = Jet::zeros(n);
        expect.set_coeff(0, 1.0);
        expect.set_coeff(1, -1.0);
        assert_jet_close(&e, &expect, 1e-15);
    }

    #[test]
    fn eps_jet_takes_even_coefficients() {
        let s = SigmaSeries::from_coeffs(vec![1.0, 0.0, 3.0, 0.0, 5.0]);
        let j = s.to_eps_jet();
        assert_eq!(j.coeffs(), &[1.0, 3.0, 5.0]);
    }

    /// Coefficient of y^n in a^m by explicit enumeration of the partition
    /// sum: over all (a_1, ..., a_n) with Σ a_l = m and Σ l·a_l = n the
    /// term m!/Π a_l! · Π c_l^{a_l}. Brute-force oracle for `pow` on jets
    /// with zero constant term.
    fn partition_sum_coeff(c: &[f64], m: usize, n: usize) -> f64 {
        fn rec(c: &[f64], l: usize, parts_left: usize, weight_left: usize, m: usize) -> f64 {
            if parts_left == 0 {
                return if weight_left == 0 { factorial(m) } else { 0.0 };
            }
            if l > weight_left {
                return 0.0;
            }
            let mut total = 0.0;
            // a_l = how many of the remaining factors pick the y^l term
            let max_a = (weight_left / l).min(parts_left);
            for a in 0..=max_a {
                let tail = rec(c, l + 1, parts_left - a, weight_left - l * a, m);
                if tail != 0.0 {
                    total += tail / factorial(a) * c[l].powi(a as i32);
                }
            }
            total
        }
        fn factorial(k: usize) -> f64 {
            (1..=k).map(|i| i as f64).product()
        }
        if m == 0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        rec(c, 1, m, n, m)
    }

    proptest! {
        #[test]
        fn pow_agrees_with_partition_sum(
            coeffs in proptest::collection::vec(-2.0f64..2.0, 4..=13),
            m in 1usize..=6,
        ) {
            let mut coeffs = coeffs;
            coeffs[0] = 0.0;
            let a = Jet::from_coeffs(coeffs.clone());
            let p = a.pow(m);
            for n in 0..=a.order() {
                let oracle = partition_sum_coeff(&coeffs, m, n);
                let tol = 1e-12 * oracle.abs().max(1.0);
                prop_assert!(
                    (p.coeff(n) - oracle).abs() <= tol,
                    "power {} coefficient {}: {} vs oracle {}",
                    m, n, p.coeff(n), oracle
                );
            }
        }

        #[test]
        fn compose_after_invert_is_identity(
            units in proptest::collection::vec(-1.0f64..1.0, 4..=10),
            c1_mag in 0.1f64..10.0,
            c1_neg in proptest::bool::ANY,
            decay in 0.05f64..0.6,
        ) {
            // analytic-style test jets: |c_l| <= |c1| decay^{l-1}, so the
            // reverted series has controlled coefficient growth
            let c1 = if c1_neg { -c1_mag } else { c1_mag };
            let mut coeffs = vec![0.0, c1];
            for (l, u) in units.iter().enumerate().skip(2) {
                coeffs.push(c1 * u * decay.powi(l as i32 - 1));
            }
            coeffs.resize(units.len().max(4), 0.0);
            let a = Jet::from_coeffs(coeffs);
            let b = a.invert().unwrap();
            let comp = a.compose(&b);
            let id = Jet::identity(a.order());
            // roundoff enters through products of a- and b-sized terms, so
            // the defect bound carries those magnitudes
            let scale = (1.0 + a.max_abs()) * (1.0 + b.max_abs());
            for l in 0..=a.order() {
                prop_assert!(
                    (comp.coeff(l) - id.coeff(l)).abs() <= 1e-13 * scale,
                    "coefficient {} of a∘a⁻¹: {} (scale {})",
                    l, comp.coeff(l), scale
                );
            }
        }

        #[test]
        fn sigma_ring_is_commutative_and_associative(
            a in proptest::collection::vec(-5.0f64..5.0, 6),
            b in proptest::collection::vec(-5.0f64..5.0, 6),
            c in proptest::collection::vec(-5.0f64..5.0, 6),
        ) {
            let a = SigmaSeries::from_coeffs(a);
            let b = SigmaSeries::from_coeffs(b);
            let c = SigmaSeries::from_coeffs(c);
            let ab = a.mul(&b);
            let ba = b.mul(&a);
            let ab_c = ab.mul(&c);
            let a_bc = a.mul(&b.mul(&c));
            // tolerances follow the size of the products actually summed,
            // not the (possibly cancelled) result
            let tol2 = 1e-15 * (a.max_abs() * b.max_abs()).max(1.0);
            let tol3 = 1e-14 * (a.max_abs() * b.max_abs() * c.max_abs()).max(1.0);
            for j in 0..=a.n_max() {
                prop_assert!((ab.coeff(j) - ba.coeff(j)).abs() <= tol2);
                prop_assert!((ab_c.coeff(j) - a_bc.coeff(j)).abs() <= tol3);
            }
        }

        #[test]
        fn jet_mul_is_commutative(
            a in proptest::collection::vec(-5.0f64..5.0, 7),
            b in proptest::collection::vec(-5.0f64..5.0, 7),
        ) {
            let a = Jet::from_coeffs(a);
            let b = Jet::from_coeffs(b);
            let ab = a.mul(&b);
            let ba = b.mul(&a);
            // same products, opposite summation order: equal to roundoff
            let tol = 1e-15 * (a.max_abs() * b.max_abs()).max(1.0);
            for l in 0..=a.order() {
                prop_assert!((ab.coeff(l) - ba.coeff(l)).abs() <= tol);
            }
        }
    }
}
