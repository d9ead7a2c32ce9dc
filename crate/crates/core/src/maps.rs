//! The dynamical systems under study: forward map, Markov partition, and
//! inverse branches with jet expansions about arbitrary image points.
//!
//! Everything downstream needs only the [`Map`] trait: the cycle finder
//! composes inverse branches, the local-operator builder expands them as
//! jets about orbit points, and the direct solver evaluates the forward
//! map under a quadrature rule. Three models are provided:
//!
//! * [`QuarticMap`] — the bimodal degree-4 repeller
//!   `f(x) = 20 (1/16 - (1/2 - x)^4)` on `[0, 1]` with closed-form inverse
//!   branches `1/2 ∓ (1/16 - y/20)^{1/4}`,
//! * [`LinearMap`] — a single expanding linear branch `f(x) = Λx`,
//! * [`PolyMap`] — a user-supplied polynomial with a user-supplied
//!   partition into monotone branches; its inverse jets come from series
//!   reversion of the forward expansion, so no closed-form inverse is
//!   needed.

use crate::error::{Error, Result};
use crate::series::Jet;

/// A piecewise-monotone analytic expanding map of an interval.
///
/// Branch `b` is the restriction of `f` to the `b`-th partition element;
/// inverse branches are indexed the same way. `inverse_jet` returns the
/// expansion of `y' ↦ f_b⁻¹(y_center + y') − f_b⁻¹(y_center)`, so its
/// constant term is exactly zero and its linear term is the reciprocal of
/// the (signed) slope at the preimage.
pub trait Map: Send + Sync {
    fn name(&self) -> &str;

    fn branch_count(&self) -> usize;

    /// The interval the symbolic dynamics lives on.
    fn domain(&self) -> (f64, f64);

    fn eval(&self, x: f64) -> f64;

    fn deriv(&self, x: f64) -> f64;

    /// The sub-interval of the domain owning branch `b`.
    fn partition_element(&self, b: usize) -> (f64, f64);

    /// Which branch owns `x`. Ties on an interior boundary go to the
    /// right element, so every point has exactly one label.
    fn branch_of(&self, x: f64) -> usize {
        for b in 0..self.branch_count() - 1 {
            if x < self.partition_element(b).1 {
                return b;
            }
        }
        self.branch_count() - 1
    }

    /// Preimage of `y` on branch `b`.
    fn inverse_point(&self, branch: usize, y: f64) -> Result<f64>;

    /// Jet of `y' ↦ f_b⁻¹(y_center + y') − f_b⁻¹(y_center)` to the given
    /// truncation order.
    fn inverse_jet(&self, branch: usize, y_center: f64, order: usize) -> Result<Jet>;

    /// Jet of `x' ↦ f(x_center + x') − f(x_center)` (zero constant term).
    fn forward_jet(&self, x_center: f64, order: usize) -> Jet;

    /// Distance from `y = 0` to the nearest singularity of the inverse
    /// branches (the critical value of `f`), if there is one. The direct
    /// solver uses it to bound the growth of inverse-branch Taylor
    /// coefficients; `None` means the inverse branches are entire.
    fn singularity_distance(&self) -> Option<f64>;

    /// Interval on which the finite-σ operator is discretized so that no
    /// probability mass the leading eigenfunction feeds on is cut off:
    /// wide enough that everything leaving it has already escaped for
    /// good, with `tail` standard deviations of noise padding and an
    /// extra `margin`. The default pads the domain symmetrically, which
    /// is a safe (if generous) choice for maps whose escape happens
    /// within one step of leaving the domain.
    fn collocation_window(&self, sigma: f64, tail: f64, margin: f64) -> (f64, f64) {
        let (lo, hi) = self.domain();
        (lo - tail * sigma - margin, hi + tail * sigma + margin)
    }
}

/// Samples every partition element and checks `|f'| > 1 + 1e-9` at all
/// interior points that do not escape the domain in one step.
///
/// Points whose image already left the domain never return to the
/// invariant set, so the expansion condition is irrelevant there; the
/// quartic map, for instance, has a critical point inside its partition
/// whose whole neighbourhood escapes immediately.
pub fn check_hyperbolicity(map: &dyn Map, samples_per_branch: usize) -> Result<()> {
    let (d_lo, d_hi) = map.domain();
    let mut checked = 0usize;
    for b in 0..map.branch_count() {
        let (lo, hi) = map.partition_element(b);
        let h = (hi - lo) / samples_per_branch as f64;
        for i in 0..samples_per_branch {
            let x = lo + (i as f64 + 0.5) * h;
            let y = map.eval(x);
            if !(d_lo..=d_hi).contains(&y) {
                continue;
            }
            checked += 1;
            if map.deriv(x).abs() <= 1.0 + 1e-9 {
                return Err(Error::Domain(format!(
                    "map {} is not expanding at x = {} (|f'| = {})",
                    map.name(),
                    x,
                    map.deriv(x).abs()
                )));
            }
        }
    }
    if checked == 0 {
        return Err(Error::Domain(format!(
            "map {} has no non-escaping sample points",
            map.name()
        )));
    }
    Ok(())
}

/// Jet of a polynomial `Σ c_k x^k` about `x_center`, with the value at the
/// center subtracted (zero constant term), by Horner evaluation on jets.
fn polynomial_centered_jet(coeffs: &[f64], x_center: f64, order: usize) -> Jet {
    let mut x = Jet::zeros(order);
    x.set_coeff(0, x_center);
    if order >= 1 {
        x.set_coeff(1, 1.0);
    }
    let mut acc = Jet::constant(*coeffs.last().unwrap_or(&0.0), order);
    for &c in coeffs.iter().rev().skip(1) {
        acc = acc.mul(&x);
        acc.set_coeff(0, acc.coeff(0) + c);
    }
    // the constant term equals f(x_center) up to roundoff; composition
    // contracts require it to be exactly zero
    acc.set_coeff(0, 0.0);
    acc
}

/// The bimodal quartic repeller `f(x) = 20 (1/16 - (1/2 - x)^4)`.
///
/// Both branches are expanding wherever orbits can stay in `[0, 1]`
/// (`|f'| ≥ 80^{1/4} ≈ 2.99` on the non-escaping set), the two inverse
/// branches `1/2 ∓ (1/16 - y/20)^{1/4}` share a square-root-type
/// singularity at the critical value `y = 5/4`, and the slopes at
/// symmetric points have equal magnitude and opposite sign.
#[derive(Debug, Clone)]
pub struct QuarticMap;

/// Critical value of the quartic map, where its inverse branches meet.
const QUARTIC_CRITICAL_VALUE: f64 = 1.25;

pub fn quartic_map() -> QuarticMap {
    QuarticMap
}

impl QuarticMap {
    /// Radicand `1/16 - y/20` of the inverse branches, positive below the
    /// critical value.
    fn radicand(y: f64) -> f64 {
        1.0 / 16.0 - y / 20.0
    }
}

impl Map for QuarticMap {
    fn name(&self) -> &str {
        "quartic"
    }

    fn branch_count(&self) -> usize {
        2
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn eval(&self, x: f64) -> f64 {
        let u = 0.5 - x;
        20.0 * (1.0 / 16.0 - u * u * u * u)
    }

    fn deriv(&self, x: f64) -> f64 {
        let u = 0.5 - x;
        80.0 * u * u * u
    }

    fn partition_element(&self, b: usize) -> (f64, f64) {
        match b {
            0 => (0.0, 0.5),
            1 => (0.5, 1.0),
            _ => panic!("quartic map has two branches"),
        }
    }

    fn inverse_point(&self, branch: usize, y: f64) -> Result<f64> {
        let c = Self::radicand(y);
        if c <= 0.0 {
            return Err(Error::Domain(format!(
                "y = {y} is at or above the critical value {QUARTIC_CRITICAL_VALUE}"
            )));
        }
        let r = c.sqrt().sqrt();
        Ok(match branch {
            0 => 0.5 - r,
            1 => 0.5 + r,
            _ => panic!("quartic map has two branches"),
        })
    }

    fn inverse_jet(&self, branch: usize, y_center: f64, order: usize) -> Result<Jet> {
        let c = Self::radicand(y_center);
        if c <= 1e-12 {
            return Err(Error::BranchPoint(c));
        }
        // (c - y'/20)^{1/4} as a binomial series, then the branch sign
        let mut radicand = Jet::zeros(order);
        radicand.set_coeff(0, c);
        if order >= 1 {
            radicand.set_coeff(1, -1.0 / 20.0);
        }
        let root = radicand.fractional_power(0.25)?;
        let mut jet = if branch == 0 { root.scale(-1.0) } else { root };
        // constant: 1/2 ∓ c^{1/4} minus the preimage itself — zero by
        // construction, up to roundoff
        let x_center = self.inverse_point(branch, y_center)?;
        let residue = jet.coeff(0) + 0.5 - x_center;
        debug_assert!(residue.abs() < 1e-12, "inverse-jet constant {residue}");
        jet.set_coeff(0, 0.0);
        let _ = residue;
        Ok(jet)
    }

    fn forward_jet(&self, x_center: f64, order: usize) -> Jet {
        // f(x_c + x') - f(x_c) = -20 [ (u - x')^4 - u^4 ], u = 1/2 - x_c
        let u = 0.5 - x_center;
        let mut base = Jet::zeros(order);
        base.set_coeff(0, u);
        if order >= 1 {
            base.set_coeff(1, -1.0);
        }
        let mut jet = base.pow(4).scale(-20.0);
        jet.set_coeff(0, 0.0);
        jet
    }

    fn singularity_distance(&self) -> Option<f64> {
        Some(QUARTIC_CRITICAL_VALUE)
    }

    /// Upper edge: critical value plus noise padding — nothing is ever
    /// mapped higher. Lower edge: fixed-point iteration of
    /// `lo ← f₀⁻¹(lo − tail·σ) − margin`, which converges to a level the
    /// dynamics can only leave for good; everything the eigenfunction
    /// feeds on lies above it, and the steep escaping tail (where kernel
    /// features become narrower than the quadrature resolves) is cut off.
    fn collocation_window(&self, sigma: f64, tail: f64, margin: f64) -> (f64, f64) {
        let hi = QUARTIC_CRITICAL_VALUE + tail * sigma;
        let mut lo = 0.0;
        for _ in 0..20 {
            lo = self
                .inverse_point(0, lo - tail * sigma)
                .expect("quartic left branch extends below the domain")
                - margin;
        }
        (lo, hi)
    }
}

/// A single expanding linear branch `f(x) = Λx` on `[-1, 1]`, `|Λ| > 1`.
///
/// Its evolution operator is solvable in closed form (the monomial basis
/// diagonalizes the noiseless operator, and Gaussian noise leaves the
/// leading eigenvalue at `1/|Λ|` exactly), which makes it the analytic
/// yardstick for every pipeline stage. The domain is symmetric about the
/// fixed point at the origin so that orientation-reversing slopes still
/// have a neighbourhood that survives one step.
#[derive(Debug, Clone)]
pub struct LinearMap {
    lambda: f64,
}

pub fn linear_map(lambda: f64) -> Result<LinearMap> {
    if !(lambda.abs() > 1.0) {
        return Err(Error::InvalidConfig(format!(
            "linear map slope {lambda} is not expanding (need |Λ| > 1)"
        )));
    }
    Ok(LinearMap { lambda })
}

impl LinearMap {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Map for LinearMap {
    fn name(&self) -> &str {
        "linear"
    }

    fn branch_count(&self) -> usize {
        1
    }

    fn domain(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn eval(&self, x: f64) -> f64 {
        self.lambda * x
    }

    fn deriv(&self, _x: f64) -> f64 {
        self.lambda
    }

    fn partition_element(&self, b: usize) -> (f64, f64) {
        assert_eq!(b, 0, "linear map has a single branch");
        (-1.0, 1.0)
    }

    fn inverse_point(&self, branch: usize, y: f64) -> Result<f64> {
        assert_eq!(branch, 0, "linear map has a single branch");
        Ok(y / self.lambda)
    }

    fn inverse_jet(&self, branch: usize, _y_center: f64, order: usize) -> Result<Jet> {
        assert_eq!(branch, 0, "linear map has a single branch");
        let mut jet = Jet::zeros(order);
        if order >= 1 {
            jet.set_coeff(1, 1.0 / self.lambda);
        }
        Ok(jet)
    }

    fn forward_jet(&self, _x_center: f64, order: usize) -> Jet {
        let mut jet = Jet::zeros(order);
        if order >= 1 {
            jet.set_coeff(1, self.lambda);
        }
        jet
    }

    fn singularity_distance(&self) -> Option<f64> {
        None
    }

    /// Symmetric window about the fixed point at the origin, sized so the
    /// window's image covers the window plus `tail` standard deviations:
    /// `|Λ| b ≥ b + tail·σ` with a factor-|Λ| safety margin.
    fn collocation_window(&self, sigma: f64, tail: f64, margin: f64) -> (f64, f64) {
        let a = self.lambda.abs();
        let b = tail * sigma * a / (a - 1.0) + margin;
        (-b, b)
    }
}

/// A polynomial map `f(x) = Σ coeffs[k] x^k` with an explicit partition of
/// its domain into monotone branches.
///
/// Inverse points come from bisection + Newton on the branch, and inverse
/// jets from series reversion of the forward expansion — the generic path
/// for maps without closed-form inverses.
#[derive(Debug, Clone)]
pub struct PolyMap {
    name: String,
    coeffs: Vec<f64>,
    deriv_coeffs: Vec<f64>,
    partition: Vec<f64>,
    domain: (f64, f64),
    singularity: Option<f64>,
}

pub fn poly_map(
    name: &str,
    coeffs: Vec<f64>,
    partition: Vec<f64>,
    domain: (f64, f64),
) -> Result<PolyMap> {
    if coeffs.len() < 2 {
        return Err(Error::InvalidConfig(
            "a polynomial map needs degree at least 1".into(),
        ));
    }
    if partition.len() < 2 || partition.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "partition boundaries must be strictly ascending".into(),
        ));
    }
    if !(domain.0 < domain.1) {
        return Err(Error::InvalidConfig("empty domain".into()));
    }
    let deriv_coeffs = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect();
    let mut map = PolyMap {
        name: name.to_string(),
        coeffs,
        deriv_coeffs,
        partition,
        domain,
        singularity: None,
    };
    map.singularity = map.nearest_critical_value();
    check_hyperbolicity(&map, 1000)?;
    Ok(map)
}

impl PolyMap {
    fn horner(coeffs: &[f64], x: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Smallest |critical value| of `f` with the critical point near the
    /// domain — the inverse branches are singular at those values.
    fn nearest_critical_value(&self) -> Option<f64> {
        let (lo, hi) = self.domain;
        let pad = hi - lo;
        let (a, b) = (lo - pad, hi + pad);
        let n = 4000;
        let h = (b - a) / n as f64;
        let mut best: Option<f64> = None;
        let mut prev_x = a;
        let mut prev_d = Self::horner(&self.deriv_coeffs, a);
        for i in 1..=n {
            let x = a + i as f64 * h;
            let d = Self::horner(&self.deriv_coeffs, x);
            if prev_d == 0.0 || prev_d * d < 0.0 {
                // bisect the critical point and record |f| there
                let (mut xa, mut xb) = (prev_x, x);
                for _ in 0..80 {
                    let xm = 0.5 * (xa + xb);
                    let dm = Self::horner(&self.deriv_coeffs, xm);
                    if prev_d * dm <= 0.0 {
                        xb = xm;
                    } else {
                        xa = xm;
                    }
                }
                let v = Self::horner(&self.coeffs, 0.5 * (xa + xb)).abs();
                best = Some(best.map_or(v, |m: f64| m.min(v)));
            }
            prev_x = x;
            prev_d = d;
        }
        best
    }
}

impl Map for PolyMap {
    fn name(&self) -> &str {
        &self.name
    }

    fn branch_count(&self) -> usize {
        self.partition.len() - 1
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn eval(&self, x: f64) -> f64 {
        Self::horner(&self.coeffs, x)
    }

    fn deriv(&self, x: f64) -> f64 {
        Self::horner(&self.deriv_coeffs, x)
    }

    fn partition_element(&self, b: usize) -> (f64, f64) {
        (self.partition[b], self.partition[b + 1])
    }

    fn inverse_point(&self, branch: usize, y: f64) -> Result<f64> {
        let (lo, hi) = self.partition_element(branch);
        let (flo, fhi) = (self.eval(lo), self.eval(hi));
        let (mut a, mut b, target_in) = if flo <= fhi {
            (lo, hi, (flo..=fhi).contains(&y))
        } else {
            (hi, lo, (fhi..=flo).contains(&y))
        };
        if !target_in {
            return Err(Error::Domain(format!(
                "y = {y} outside the image of branch {branch} of {}",
                self.name
            )));
        }
        // bisection to a safe bracket, then Newton
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if self.eval(m) < y {
                a = m;
            } else {
                b = m;
            }
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..4 {
            let d = self.deriv(x);
            if d != 0.0 {
                x -= (self.eval(x) - y) / d;
            }
        }
        Ok(x)
    }

    fn inverse_jet(&self, branch: usize, y_center: f64, order: usize) -> Result<Jet> {
        let x_center = self.inverse_point(branch, y_center)?;
        self.forward_jet(x_center, order).invert()
    }

    fn forward_jet(&self, x_center: f64, order: usize) -> Jet {
        polynomial_centered_jet(&self.coeffs, x_center, order)
    }

    fn singularity_distance(&self) -> Option<f64> {
        self.singularity
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bisection oracle for the fixed point of `f` on `[0.5, 1]`.
    fn quartic_right_fixed_point() -> f64 {
        let m = quartic_map();
        let (mut a, mut b) = (0.6, 0.95);
        assert!((m.eval(a) - a) > 0.0 && (m.eval(b) - b) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if m.eval(mid) - mid > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn quartic_fixed_point_at_origin() {
        let m = quartic_map();
        assert_eq!(m.eval(0.0), 0.0);
        assert_eq!(m.deriv(0.0), 10.0);
        assert_eq!(m.eval(0.5), 1.25);
    }

    #[test]
    fn quartic_right_branch_fixed_point_has_negative_slope() {
        let m = quartic_map();
        let x = quartic_right_fixed_point();
        assert!((m.eval(x) - x).abs() < 1e-13);
        assert!((0.85..0.9).contains(&x));
        assert!(m.deriv(x) < -1.0);
    }

    #[test]
    fn quartic_slope_symmetry_about_half() {
        let m = quartic_map();
        for i in 0..100 {
            let x = (i as f64 + 0.5) / 100.0;
            let a = m.deriv(x);
            let b = m.deriv(1.0 - x);
            assert!((a.abs() - b.abs()).abs() < 1e-12 * a.abs().max(1.0));
            assert!(a * b <= 0.0);
        }
    }

    #[test]
    fn quartic_inverse_point_roundtrip() {
        let m = quartic_map();
        for b in 0..2 {
            for i in 0..=50 {
                let y = i as f64 / 50.0;
                let x = m.inverse_point(b, y).unwrap();
                assert!((m.eval(x) - y).abs() < 1e-13);
                assert_eq!(m.branch_of(x), b, "preimage lands on its own branch");
            }
        }
    }

    #[test]
    fn quartic_inverse_point_rejects_above_critical_value() {
        let m = quartic_map();
        assert!(m.inverse_point(0, 1.3).is_err());
        assert!(m.inverse_jet(1, 1.2499, 5).is_ok()); // radicand still positive here
        assert!(m.inverse_jet(1, 1.25, 5).is_err());
    }

    #[test]
    fn branch_assignment_is_right_inclusive_on_ties() {
        let m = quartic_map();
        assert_eq!(m.branch_of(0.4999999), 0);
        assert_eq!(m.branch_of(0.5), 1);
        assert_eq!(m.branch_of(0.0), 0);
        assert_eq!(m.branch_of(1.0), 1);
    }

    #[test]
    fn inverse_jet_linear_coefficient_is_reciprocal_slope() {
        let m = quartic_map();
        for b in 0..2 {
            for &y in &[0.05, 0.3, 0.5, 0.8, 0.95] {
                let x = m.inverse_point(b, y).unwrap();
                let jet = m.inverse_jet(b, y, 8).unwrap();
                assert_eq!(jet.coeff(0), 0.0);
                let expect = 1.0 / m.deriv(x);
                assert!(
                    (jet.coeff(1) - expect).abs() < 1e-12 * expect.abs(),
                    "branch {b} at y = {y}"
                );
            }
        }
    }

    #[test]
    fn forward_jet_matches_map_values() {
        let m = quartic_map();
        for &x0 in &[0.1, 0.35, 0.62, 0.9] {
            let jet = m.forward_jet(x0, 4);
            for &dx in &[-0.05, 0.02, 0.07] {
                let horner: f64 = (0..=4).rev().fold(0.0, |acc, l| acc * dx + jet.coeff(l));
                let exact = m.eval(x0 + dx) - m.eval(x0);
                assert!((horner - exact).abs() < 1e-13, "x0 = {x0}, dx = {dx}");
            }
        }
    }

    #[test]
    fn inverse_jet_composes_to_identity_with_forward_jet() {
        let m = quartic_map();
        for b in 0..2 {
            for &y in &[0.1, 0.45, 0.9] {
                let x = m.inverse_point(b, y).unwrap();
                let inv = m.inverse_jet(b, y, 10).unwrap();
                let fwd = m.forward_jet(x, 10);
                let comp = fwd.compose(&inv);
                let id = Jet::identity(10);
                for l in 0..=10 {
                    assert!(
                        (comp.coeff(l) - id.coeff(l)).abs() < 1e-12,
                        "branch {b}, y = {y}, coefficient {l}: {}",
                        comp.coeff(l)
                    );
                }
            }
        }
    }

    /// The quartic map written as a plain polynomial; its inverse jets
    /// then come from series reversion instead of the closed-form branch,
    /// giving an independent oracle for every coefficient.
    fn quartic_as_poly() -> PolyMap {
        poly_map(
            "quartic-poly",
            vec![0.0, 10.0, -30.0, 40.0, -20.0],
            vec![0.0, 0.5, 1.0],
            (0.0, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn poly_form_of_quartic_matches_closed_form() {
        let q = quartic_map();
        let p = quartic_as_poly();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((q.eval(x) - p.eval(x)).abs() < 1e-13);
            assert!((q.deriv(x) - p.deriv(x)).abs() < 1e-12);
        }
        assert!((p.singularity_distance().unwrap() - 1.25).abs() < 1e-9);
    }

    #[test]
    fn closed_form_inverse_jet_agrees_with_series_reversion() {
        let q = quartic_map();
        let p = quartic_as_poly();
        for b in 0..2 {
            for &y in &[0.1, 0.4, 0.75] {
                let a = q.inverse_jet(b, y, 9).unwrap();
                let o = p.inverse_jet(b, y, 9).unwrap();
                for l in 0..=9 {
                    let tol = 1e-11 * a.coeff(l).abs().max(1e-3);
                    assert!(
                        (a.coeff(l) - o.coeff(l)).abs() < tol,
                        "branch {b}, y = {y}, coefficient {l}: {} vs {}",
                        a.coeff(l),
                        o.coeff(l)
                    );
                }
            }
        }
    }

    #[test]
    fn inverse_jet_low_orders_match_finite_differences() {
        // finite differences of the inverse point as an oracle for the
        // first Taylor coefficients; fourth-order stencils at h = 1e-3
        // reach ~1e-12 / ~1e-9 relative for c1 / c2, the second-order c3
        // stencil ~4e-6, and the tolerances leave roughly 50x headroom
        let m = quartic_map();
        let (b, y) = (1, 0.4);
        let jet = m.inverse_jet(b, y, 6).unwrap();
        let g = |dy: f64| m.inverse_point(b, y + dy).unwrap();
        let h = 1e-3;
        let c1 = (-g(2.0 * h) + 8.0 * g(h) - 8.0 * g(-h) + g(-2.0 * h)) / (12.0 * h);
        let c2 = (-g(2.0 * h) + 16.0 * g(h) - 30.0 * g(0.0) + 16.0 * g(-h) - g(-2.0 * h))
            / (24.0 * h * h);
        let c3 = (g(2.0 * h) - 2.0 * g(h) + 2.0 * g(-h) - g(-2.0 * h)) / (12.0 * h * h * h);
        assert!((jet.coeff(1) - c1).abs() < 1e-10 * c1.abs());
        assert!((jet.coeff(2) - c2).abs() < 1e-7 * c2.abs());
        assert!((jet.coeff(3) - c3).abs() < 1e-4 * c3.abs());
    }

    #[test]
    fn linear_map_basics() {
        let m = linear_map(2.0).unwrap();
        assert_eq!(m.eval(0.3), 0.6);
        let jet = m.inverse_jet(0, 0.7, 4).unwrap();
        assert_eq!(jet.coeffs(), &[0.0, 0.5, 0.0, 0.0, 0.0]);
        assert!(linear_map(1.0).is_err());
        assert!(linear_map(-0.5).is_err());
        assert!(linear_map(-3.0).is_ok());
    }

    #[test]
    fn hyperbolicity_gate() {
        assert!(check_hyperbolicity(&quartic_map(), 1000).is_ok());
        assert!(check_hyperbolicity(&linear_map(2.0).unwrap(), 1000).is_ok());
        assert!(check_hyperbolicity(&linear_map(-3.0).unwrap(), 1000).is_ok());
        // a contracting polynomial map must be rejected at construction
        assert!(poly_map("slow", vec![0.0, 0.8], vec![0.0, 1.0], (0.0, 1.0)).is_err());
    }

    #[test]
    fn collocation_windows_cover_the_dynamics() {
        let q = quartic_map();
        let (lo, hi) = q.collocation_window(0.05, 10.0, 0.05);
        assert!(hi > 1.25 + 0.49);
        assert!(lo < 0.0 && lo > -1.0);
        // self-consistency: the left preimage of anything reachable from
        // inside stays inside
        let back = q.inverse_point(0, lo - 0.5).unwrap();
        assert!(back > lo);

        let m = linear_map(2.0).unwrap();
        let (llo, lhi) = m.collocation_window(0.2, 10.0, 0.05);
        assert!((llo + lhi).abs() < 1e-12);
        assert!(m.lambda() * lhi >= lhi + 10.0 * 0.2);
    }
}
