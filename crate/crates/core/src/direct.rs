//! Finite-noise references for the weak-noise expansion: the leading
//! eigenvalue of the σ-noise evolution operator computed directly, with
//! no periodic orbits involved.
//!
//! Three independent discretizations are provided. [`quadrature_matrix`]
//! builds the operator in the derivative/monomial dual basis by one of
//! two quadrature routes, chosen from a singularity bound. For checks
//! that need nothing from the map beyond forward evaluation there are a
//! dense kernel collocation ([`collocation_eigenvalue`]) and an
//! Ulam-style bin matrix ([`lattice_eigenvalue`]). [`compare_curves`]
//! lines the direct eigenvalues up against the weak-noise partial sums
//! on a σ grid, and [`asymptotic_ratio_fit`] summarizes how fast the
//! series coefficients grow.
//!
//! None of this shares numerics with the perturbative pipeline, so
//! agreement between the two sides is a genuine cross-check rather than
//! a tautology.

use crate::error::{Error, Result};
use crate::maps::Map;
use crate::pipeline::EigenExpansion;
use crate::series::Jet;
use rayon::prelude::*;
use statrs::function::erf::erf;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Largest basis size [`quadrature_matrix`] accepts. Monomial-basis
/// matrices beyond this are too ill-conditioned in double precision to
/// be trusted; refuse rather than degrade silently.
pub const MAX_BASIS: usize = 40;

/// Node doubling must move no matrix entry by more than this, relative
/// to the entry (plus the entry's own roundoff floor), before a
/// quadrature is accepted. This is the accuracy level every direct
/// eigenvalue is built to; requests for tighter cannot be honored.
pub const REFINE_TOL: f64 = 1e-10;

/// The parts route is trusted when its truncation bound falls below this.
const PARTS_BOUND_THRESHOLD: f64 = 1e-12;

/// Hard cap on the Gaussian u-integral cutoff of the parts route;
/// `e^{-u²/2}` at the cap is ~2e-37, far below any tolerance in play.
const PARTS_U_CAP: f64 = 13.0;

/// Integrand magnitude below which the Hermite route truncates its
/// z-interval.
const HERMITE_CUTOFF: f64 = 1e-18;

/// Collocation window padding in noise widths, and the extra margin fed
/// to [`Map::collocation_window`].
const WINDOW_TAIL: f64 = 10.0;
const WINDOW_MARGIN: f64 = 0.05;

/// Collocation panel width in units of σ, and points per panel.
const PANEL_FRACTION: f64 = 0.5;
const PANEL_POINTS: usize = 12;

/// Iteration cap for the power method.
const POWER_CAP: usize = 100_000;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// by Newton iteration on `P_n` from the Chebyshev-angle seeds.
///
/// Nodes come out ascending and exactly antisymmetric; the rule is exact
/// for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a quadrature rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..64 {
            let (p, d) = legendre_with_derivative(n, x);
            let step = p / d;
            x -= step;
            if step.abs() <= 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * d * d);
        // seeds walk down from +1; mirror onto the ascending lower half
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence; `|x| < 1`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut below = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * below) / kf;
        below = p;
        p = next;
    }
    let d = n as f64 * (x * p - below) / (x * x - 1.0);
    (p, d)
}

/// The `n`-point rule scaled onto `[a, b]`.
fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| half * w).collect(),
    )
}

/// Composite rule: `panels` equal panels of `p` points each on `[lo, hi]`.
fn composite_gauss_legendre(lo: f64, hi: f64, panels: usize, p: usize) -> (Vec<f64>, Vec<f64>) {
    let width = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * p);
    let mut weights = Vec::with_capacity(panels * p);
    for i in 0..panels {
        let a = lo + i as f64 * width;
        let (xs, ws) = gauss_legendre_on(p, a, a + width);
        nodes.extend(xs);
        weights.extend(ws);
    }
    (nodes, weights)
}

/// Which quadrature strategy produced a [`DirectMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRoute {
    /// Substitution `w = f(z)` per branch and `l`-fold integration by
    /// parts onto the inverse branches: one Gaussian-weighted u-integral
    /// of inverse-branch jets. Exact for linear maps; for maps with a
    /// branch-point singularity it is trusted only while the truncation
    /// bound of [`quadrature_matrix`] is tiny, which in practice means
    /// small σ.
    Parts,
    /// Analytic y-derivatives of the Gaussian kernel — Hermite-polynomial
    /// multiples of the Gaussian at `f(z)/σ` — and one z-quadrature per
    /// entry. Needs only forward evaluations, so it covers the large-σ
    /// regime the parts route cannot reach.
    Hermite,
}

/// The σ-noise evolution operator in the derivative/monomial dual basis,
///
/// ```text
/// L_{l,k} = ∂_y^l [ (1/(√(2π)σ k!)) ∫ dz e^{-(y-f(z))²/2σ²} z^k ] at y = 0,
/// ```
///
/// evaluated by [`quadrature_matrix`]. Its leading eigenvalue is the
/// finite-σ counterpart of the weak-noise expansion's ν(σ).
#[derive(Debug, Clone)]
pub struct DirectMatrix {
    m: usize,
    sigma: f64,
    route: QuadratureRoute,
    nodes: usize,
    data: Vec<f64>,
}

impl DirectMatrix {
    pub fn basis_size(&self) -> usize {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn route(&self) -> QuadratureRoute {
        self.route
    }

    /// Node count of the accepted (finest) quadrature.
    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// `L_{l,k}`: row `l` differentiates, column `k` is the monomial.
    pub fn entry(&self, l: usize, k: usize) -> f64 {
        assert!(
            l < self.m && k < self.m,
            "entry ({l}, {k}) outside {}×{0}",
            self.m
        );
        self.data[l * self.m + k]
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }
}

/// Builds the operator matrix at fixed σ, refining the quadrature by
/// node doubling until every entry is stable to 1e-10 relative.
///
/// The route is picked from a truncation bound: cutting the parts
/// route's Gaussian u-integral at `±u` discards at most
/// `e^{-u²/2} (ρ/(ρ - σu))^m` — the Gaussian tail times the growth that
/// order-`m` inverse-branch jets pick up as the expansion point nears
/// the branch singularity at distance ρ. If some cutoff pushes the bound
/// below 1e-12 the parts route is used; otherwise the Hermite route
/// takes over. Maps with entire inverse branches (no singularity) always
/// qualify for the parts route.
///
/// The parts route needs inverse branches that extend a few noise widths
/// beyond the branch image, which the built-in maps provide; the
/// collocation and lattice references need only forward evaluation.
pub fn quadrature_matrix(map: &dyn Map, sigma: f64, m: usize) -> Result<DirectMatrix> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise amplitude {sigma} must be positive"
        )));
    }
    if m < 2 {
        return Err(Error::Dimension(format!(
            "direct matrix needs basis size at least 2, got {m}"
        )));
    }
    if m > MAX_BASIS {
        return Err(Error::SizeTooLarge(m, MAX_BASIS));
    }
    let (u_max, bound) = parts_truncation(map.singularity_distance(), sigma, m);
    if bound <= PARTS_BOUND_THRESHOLD {
        let (data, nodes) = refine(|n| parts_entries(map, sigma, m, u_max, n), 240, 4)?;
        Ok(DirectMatrix {
            m,
            sigma,
            route: QuadratureRoute::Parts,
            nodes,
            data,
        })
    } else {
        let (zlo, zhi) = hermite_support(map, sigma, m)?;
        let (data, nodes) = refine(|n| Ok(hermite_entries(map, sigma, m, zlo, zhi, n)), 200, 6)?;
        Ok(DirectMatrix {
            m,
            sigma,
            route: QuadratureRoute::Hermite,
            nodes,
            data,
        })
    }
}

/// Best u-integral cutoff for the parts route and the truncation bound
/// it achieves (see [`quadrature_matrix`]).
fn parts_truncation(singularity: Option<f64>, sigma: f64, m: usize) -> (f64, f64) {
    let cap = match singularity {
        None => PARTS_U_CAP,
        Some(rho) => (0.99 * rho / sigma).min(PARTS_U_CAP),
    };
    let mut best = (cap, f64::INFINITY);
    for i in 1..=600 {
        let u = cap * i as f64 / 600.0;
        let tail = (-0.5 * u * u).exp();
        let growth = match singularity {
            None => 1.0,
            Some(rho) => (rho / (rho - sigma * u)).powi(m as i32),
        };
        let bound = tail * growth;
        if bound < best.1 {
            best = (u, bound);
        }
    }
    best
}

/// A quadrature-evaluated matrix together with each entry's roundoff
/// budget: the total absolute mass that flowed through the entry's
/// floating-point sums (across nodes, and through the truncated jet
/// products on the parts route), whose product with machine epsilon
/// bounds the noise floor the entry cannot beat. The refinement gate
/// treats movement below that floor as converged — entries killed by
/// cancellation (odd Gaussian moments, oscillatory Hermite integrals,
/// high-order Cauchy products) would otherwise never stabilize in
/// relative terms.
struct QuadratureSums {
    values: Vec<f64>,
    budgets: Vec<f64>,
}

/// Parts-route entries before acceptance: for each Gaussian node
/// `w = σu`, expand every inverse branch as a jet about `w`, form
/// `g_{b,k} = (f_b⁻¹)^k |(f_b⁻¹)'|` by repeated truncated products, and
/// accumulate its Taylor coefficients under the weight `e^{-u²/2}/√(2π)`.
/// The l-fold integration by parts leaves the factorial ratio `l!/k!`.
fn parts_entries(
    map: &dyn Map,
    sigma: f64,
    m: usize,
    u_max: f64,
    nodes: usize,
) -> Result<QuadratureSums> {
    let (us, ws) = gauss_legendre_on(nodes, -u_max, u_max);
    let norm = 1.0 / (2.0 * PI).sqrt();
    let per_node: Vec<(Vec<f64>, Vec<f64>)> = us
        .par_iter()
        .zip(ws.par_iter())
        .map(|(&u, &w)| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut local = vec![0.0; m * m];
            let mut absolute = vec![0.0; m * m];
            let weight = w * (-0.5 * u * u).exp() * norm;
            let y0 = sigma * u;
            for b in 0..map.branch_count() {
                let mut inv = map.inverse_jet(b, y0, m)?;
                inv.set_coeff(0, map.inverse_point(b, y0)?);
                // |(f_b⁻¹)'| as a jet: termwise derivative, with the
                // branch's constant sign folded in
                let mut dinv = Jet::zeros(m - 1);
                for l in 0..m {
                    dinv.set_coeff(l, (l as f64 + 1.0) * inv.coeff(l + 1));
                }
                if dinv.coeff(0) < 0.0 {
                    dinv = dinv.scale(-1.0);
                }
                let inv = Jet::from_coeffs(inv.coeffs()[..m].to_vec());
                // shadow the product chain with coefficient magnitudes:
                // the Cauchy products cancel heavily at high order, and
                // the roundoff budget has to see that internal mass, not
                // just the final coefficient
                let abs_jet =
                    |jet: &Jet| Jet::from_coeffs(jet.coeffs().iter().map(|c| c.abs()).collect());
                let inv_mag = abs_jet(&inv);
                let mut power = dinv.clone();
                let mut power_mag = abs_jet(&dinv);
                for k in 0..m {
                    if k > 0 {
                        power = power.mul(&inv);
                        power_mag = power_mag.mul(&inv_mag);
                    }
                    for l in 0..m {
                        local[l * m + k] += weight * power.coeff(l);
                        absolute[l * m + k] += weight * power_mag.coeff(l);
                    }
                }
            }
            Ok((local, absolute))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; m * m];
    let mut budgets = vec![0.0; m * m];
    for (local, absolute) in &per_node {
        for i in 0..m * m {
            values[i] += local[i];
            budgets[i] += absolute[i];
        }
    }
    let mut factorial = vec![1.0; m];
    for l in 1..m {
        factorial[l] = factorial[l - 1] * l as f64;
    }
    for l in 0..m {
        for k in 0..m {
            values[l * m + k] *= factorial[l] / factorial[k];
            budgets[l * m + k] *= factorial[l] / factorial[k];
        }
    }
    Ok(QuadratureSums { values, budgets })
}

/// Interval outside which `e^{-f(z)²/2σ²} max(1,|z|)^{m-1}` stays below
/// the truncation cutoff: the map's domain grown outward in quarter-σ
/// steps. Errs if the integrand refuses to decay within a generous
/// multiple of the domain width (a map whose image stays bounded).
fn hermite_support(map: &dyn Map, sigma: f64, m: usize) -> Result<(f64, f64)> {
    let magnitude = |z: f64| {
        let t = map.eval(z) / sigma;
        (-0.5 * t * t).exp() * z.abs().max(1.0).powi(m as i32 - 1)
    };
    let (dlo, dhi) = map.domain();
    let step = 0.25 * sigma;
    let budget = 50.0 * (dhi - dlo).max(1.0);
    let mut lo = dlo;
    while magnitude(lo) >= HERMITE_CUTOFF {
        lo -= step;
        if dlo - lo > budget {
            return Err(Error::Accuracy(format!(
                "σ = {sigma} operator integrand does not decay left of the domain"
            )));
        }
    }
    let mut hi = dhi;
    while magnitude(hi) >= HERMITE_CUTOFF {
        hi += step;
        if hi - dhi > budget {
            return Err(Error::Accuracy(format!(
                "σ = {sigma} operator integrand does not decay right of the domain"
            )));
        }
    }
    Ok((lo, hi))
}

/// Hermite-route entries before acceptance: the l-th y-derivative of the
/// Gaussian kernel at `y = 0` is `σ^{-l} He_l(f(z)/σ) e^{-f(z)²/2σ²}`, so
/// each entry is a single z-quadrature of that times `z^k/k!`. The
/// damped products `He_l·e^{-t²/2}` are built by the probabilists'
/// recurrence directly, so large arguments never overflow.
fn hermite_entries(
    map: &dyn Map,
    sigma: f64,
    m: usize,
    zlo: f64,
    zhi: f64,
    nodes: usize,
) -> QuadratureSums {
    let (zs, ws) = gauss_legendre_on(nodes, zlo, zhi);
    let count = zs.len();
    let t: Vec<f64> = zs.iter().map(|&z| map.eval(z) / sigma).collect();
    let mut damped = vec![vec![0.0; count]; m];
    for j in 0..count {
        damped[0][j] = (-0.5 * t[j] * t[j]).exp();
    }
    if m > 1 {
        for j in 0..count {
            damped[1][j] = t[j] * damped[0][j];
        }
    }
    for l in 2..m {
        for j in 0..count {
            damped[l][j] = t[j] * damped[l - 1][j] - (l as f64 - 1.0) * damped[l - 2][j];
        }
    }
    let norm = 1.0 / ((2.0 * PI).sqrt() * sigma);
    let mut values = vec![0.0; m * m];
    let mut budgets = vec![0.0; m * m];
    values
        .par_chunks_mut(m)
        .zip(budgets.par_chunks_mut(m))
        .enumerate()
        .for_each(|(l, (row, row_budget))| {
            let scale = norm * sigma.powi(-(l as i32));
            let mut monomial = vec![1.0; count];
            let mut k_factorial = 1.0;
            for k in 0..m {
                if k > 0 {
                    k_factorial *= k as f64;
                    for (mono, z) in monomial.iter_mut().zip(&zs) {
                        *mono *= z;
                    }
                }
                let mut acc = 0.0;
                let mut magnitude = 0.0;
                for j in 0..count {
                    let term = ws[j] * damped[l][j] * monomial[j];
                    acc += term;
                    magnitude += term.abs();
                }
                row[k] = scale * acc / k_factorial;
                row_budget[k] = (scale / k_factorial).abs() * magnitude;
            }
        });
    QuadratureSums { values, budgets }
}

/// Runs `build` at doubling node counts until every entry settles to
/// [`REFINE_TOL`] relative or moves by less than its own roundoff floor
/// (a small multiple of machine epsilon times the entry's absolute-value
/// budget — cancellation-dominated entries cannot do better in doubles).
/// Returns the finest matrix and its node count; failing to settle
/// within the doubling allowance is an accuracy error, never a silently
/// degraded matrix.
fn refine(
    build: impl Fn(usize) -> Result<QuadratureSums>,
    base: usize,
    doublings: usize,
) -> Result<(Vec<f64>, usize)> {
    let mut nodes = base;
    let mut coarse = build(nodes)?.values;
    for _ in 0..doublings {
        let fine = build(2 * nodes)?;
        let settled =
            coarse
                .iter()
                .zip(&fine.values)
                .zip(&fine.budgets)
                .all(|((&c, &f), &budget)| {
                    (c - f).abs() <= REFINE_TOL * f.abs() + 32.0 * f64::EPSILON * budget
                });
        nodes *= 2;
        if settled {
            return Ok((fine.values, nodes));
        }
        coarse = fine.values;
    }
    Err(Error::Accuracy(format!(
        "matrix entries still moving by more than {REFINE_TOL:e} at {nodes} quadrature nodes"
    )))
}

/// Dominant eigenvalue of the operator matrix by power iteration with
/// Rayleigh-quotient estimates (relative tolerance 1e-12, cap 10⁵).
///
/// The iteration starts from the constant vector, which overlaps the
/// leading eigenfunction of every operator in scope; a single basis
/// vector can sit in an invariant subspace and stall.
pub fn leading_eigenvalue(matrix: &DirectMatrix) -> Result<f64> {
    power_iteration(matrix.m, &matrix.data, 1e-12)
}

fn power_iteration(n: usize, data: &[f64], tol: f64) -> Result<f64> {
    assert_eq!(data.len(), n * n, "power iteration needs a square matrix");
    let mut v = vec![1.0; n];
    let mut previous = f64::INFINITY;
    for _ in 0..POWER_CAP {
        let w = mat_vec(n, data, &v);
        let num: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|a| a * a).sum();
        let estimate = num / den;
        let scale = w.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
        if !(scale > 0.0) || !estimate.is_finite() {
            return Err(Error::Convergence(
                "power iteration collapsed onto the zero vector".into(),
            ));
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / scale;
        }
        // strict comparison: a Rayleigh quotient pinned at exactly zero
        // (tied-modulus pair, oscillating vector) must not pass
        if (estimate - previous).abs() < tol * estimate.abs() {
            return Ok(estimate);
        }
        previous = estimate;
    }
    Err(Error::Convergence(format!(
        "power iteration has not settled to {tol:e} within {POWER_CAP} steps \
         (dominant eigenvalues of equal modulus?)"
    )))
}

fn mat_vec(n: usize, data: &[f64], v: &[f64]) -> Vec<f64> {
    let dot = |row: &[f64]| row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    if n >= 128 {
        data.par_chunks(n).map(dot).collect()
    } else {
        data.chunks(n).map(dot).collect()
    }
}

/// Leading eigenvalue from a dense collocation of the kernel
/// `e^{-(y-f(z))²/2σ²}/(√(2π)σ)` on the map's collocation window, with
/// composite Gauss–Legendre panels half a noise width wide (at least
/// four panels) and 12 points per panel.
///
/// This is the workhorse finite-σ reference: it needs nothing from the
/// map beyond forward evaluation and stays well-conditioned at every σ
/// the comparison grids use, because the kernel itself — not a
/// polynomial basis — carries the σ dependence.
pub fn collocation_eigenvalue(map: &dyn Map, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise amplitude {sigma} must be positive"
        )));
    }
    let (lo, hi) = map.collocation_window(sigma, WINDOW_TAIL, WINDOW_MARGIN);
    let panels = (((hi - lo) / (PANEL_FRACTION * sigma)).ceil() as usize).max(4);
    let (zs, ws) = composite_gauss_legendre(lo, hi, panels, PANEL_POINTS);
    let n = zs.len();
    let fz: Vec<f64> = zs.iter().map(|&z| map.eval(z)).collect();
    let norm = 1.0 / ((2.0 * PI).sqrt() * sigma);
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for j in 0..n {
            let t = (zs[i] - fz[j]) / sigma;
            row[j] = norm * (-0.5 * t * t).exp() * ws[j];
        }
    });
    power_iteration(n, &data, 1e-14)
}

/// Leading eigenvalue of the Ulam-with-noise bin matrix
/// `P_{ij} = (1/w_bin) ∫_{bin j} dx ∫_{bin i} dy δ_σ(y - f(x))` on the
/// map's domain padded by `padding` on both sides.
///
/// The y-integral is the exact Gaussian cell mass (a difference of
/// normal CDFs); the x-integral uses a 4-point Gauss–Legendre rule per
/// source bin. A deliberately coarse, alien discretization: it shares
/// neither basis nor quadrature with the other routes, so mutual
/// agreement means something.
pub fn lattice_eigenvalue(map: &dyn Map, sigma: f64, bins: usize, padding: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise amplitude {sigma} must be positive"
        )));
    }
    if bins < 32 {
        return Err(Error::InvalidConfig(format!(
            "lattice needs at least 32 bins, got {bins}"
        )));
    }
    if padding < 4.0 * sigma {
        return Err(Error::InvalidConfig(format!(
            "lattice padding {padding} must cover four noise widths ({})",
            4.0 * sigma
        )));
    }
    let (dlo, dhi) = map.domain();
    let lo = dlo - padding;
    let hi = dhi + padding;
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let (xg, wg) = gauss_legendre(4);
    let columns: Vec<Vec<f64>> = (0..bins)
        .into_par_iter()
        .map(|j| {
            let mut column = vec![0.0; bins];
            for (x, w) in xg.iter().zip(&wg) {
                let xs = edges[j] + 0.5 * width * (x + 1.0);
                let wx = 0.5 * width * w / width;
                let fx = map.eval(xs);
                let mut below = normal_cdf((edges[0] - fx) / sigma);
                for (i, slot) in column.iter_mut().enumerate() {
                    let above = normal_cdf((edges[i + 1] - fx) / sigma);
                    *slot += wx * (above - below);
                    below = above;
                }
            }
            column
        })
        .collect();
    let mut data = vec![0.0; bins * bins];
    for (j, column) in columns.iter().enumerate() {
        for i in 0..bins {
            data[i * bins + j] = column[i];
        }
    }
    power_iteration(bins, &data, 1e-12)
}

fn normal_cdf(t: f64) -> f64 {
    0.5 * (1.0 + erf(t / std::f64::consts::SQRT_2))
}

/// One σ row of [`compare_curves`]: both direct eigenvalues, the
/// weak-noise partial sums `Σ_{k≤K} ν_{2k} σ^{2k}` for K = 0…5, and the
/// signed differences `λ_direct − sum_K`.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub sigma: f64,
    pub lambda_direct: f64,
    pub lambda_lattice: f64,
    pub partial_sums: [f64; 6],
    pub differences: [f64; 6],
}

/// Direct-versus-perturbative comparison over a σ grid.
#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Evaluates the direct references and the weak-noise partial sums on a
/// strictly ascending positive σ grid.
///
/// `λ_direct` is the collocation eigenvalue; `λ_lattice` uses `bins`
/// bins with padding `max(4σ, 1/2)`. Partial-sum truncations beyond the
/// expansion's order saturate at the full sum, so the six K columns are
/// always present.
pub fn compare_curves(
    map: &dyn Map,
    sigma_grid: &[f64],
    expansion: &EigenExpansion,
    bins: usize,
) -> Result<ComparisonTable> {
    if sigma_grid.is_empty() {
        return Err(Error::InvalidConfig("empty σ grid".into()));
    }
    if sigma_grid[0] <= 0.0 || sigma_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "σ grid must be positive and strictly ascending".into(),
        ));
    }
    let mut rows = Vec::with_capacity(sigma_grid.len());
    for &sigma in sigma_grid {
        let lambda_direct = collocation_eigenvalue(map, sigma)?;
        let lambda_lattice = lattice_eigenvalue(map, sigma, bins, (4.0 * sigma).max(0.5))?;
        let mut partial_sums = [0.0; 6];
        let mut differences = [0.0; 6];
        for (k, (sum, diff)) in partial_sums.iter_mut().zip(&mut differences).enumerate() {
            *sum = expansion.nu_partial_sum(sigma, k);
            *diff = lambda_direct - *sum;
        }
        rows.push(ComparisonRow {
            sigma,
            lambda_direct,
            lambda_lattice,
            partial_sums,
            differences,
        });
    }
    Ok(ComparisonTable { rows })
}

/// Fitted parameters of the growth law `|ν_{2k}| ≈ amplitude · k! · aᵏ · k^b`,
/// with the per-point residuals of the log-linear fit. Purely
/// descriptive: the factorial growth of the series coefficients has no
/// closed form to assert against.
#[derive(Debug, Clone)]
pub struct GrowthFit {
    pub a: f64,
    pub b: f64,
    pub amplitude: f64,
    /// `(k, ln|ν_{2k}| − ln k! − fit(k))` per fitted point.
    pub residuals: Vec<(usize, f64)>,
}

/// Least-squares fit of `ln|ν_{2k}| − ln k!` against `k ln a + b ln k +
/// ln amplitude` over every nonzero coefficient with k ≥ 1 (ν₀ carries
/// no growth information). Three parameters need at least four points.
pub fn asymptotic_ratio_fit(nu: &[f64]) -> Result<GrowthFit> {
    let points: Vec<(f64, f64)> = nu
        .iter()
        .enumerate()
        .skip(1)
        .filter(|&(_, &v)| v != 0.0)
        .map(|(k, &v)| (k as f64, v.abs().ln() - ln_gamma(k as f64 + 1.0)))
        .collect();
    if points.len() < 4 {
        return Err(Error::InvalidConfig(format!(
            "growth fit needs at least 4 nonzero σ² coefficients, got {}",
            points.len()
        )));
    }
    let mut normal = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for &(k, y) in &points {
        let row = [1.0, k, k.ln()];
        for i in 0..3 {
            for j in 0..3 {
                normal[i][j] += row[i] * row[j];
            }
            rhs[i] += row[i] * y;
        }
    }
    let c = solve3(normal, rhs)
        .ok_or_else(|| Error::Convergence("singular normal equations in growth fit".into()))?;
    let residuals = points
        .iter()
        .map(|&(k, y)| (k as usize, y - (c[0] + c[1] * k + c[2] * k.ln())))
        .collect();
    Ok(GrowthFit {
        a: c[1].exp(),
        b: c[2],
        amplitude: c[0].exp(),
        residuals,
    })
}

/// 3×3 Gaussian elimination with partial pivoting; `None` on a singular
/// system.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for j in col..3 {
                a[row][j] -= f * a[col][j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for j in row + 1..3 {
            acc -= a[row][j] * x[j];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
