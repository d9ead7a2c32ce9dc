//! From prime cycles to the weak-noise eigenvalue expansion.
//!
//! The chain is: per-cycle operator traces as σ-series → traces of the
//! full operator power `tr Lⁿ` (grouped by prime cycles and repeats) →
//! spectral-determinant cumulants `Q_n` → noiseless root `z₀` of
//! `1 − Σ Q_{n,0} zⁿ` → the root as a power series in ε = σ², solved by
//! Newton iteration on truncated ε-jets → the leading eigenvalue
//! ν(σ) = 1/z(σ²) term by term. Closed-form expressions for the low
//! orders (in the determinant's mixed derivatives `F_ij`) are carried
//! along purely as cross-checks of the series solution.

use crate::cycles::{prime_cycle_count, Cycle};
use crate::error::{Error, Result};
use crate::local_op::{segment_operator, LMatrix, NoiseKernel};
use crate::maps::Map;
use crate::series::{Jet, SigmaSeries};
use rayon::prelude::*;

/// Basis truncation per trace length: `m_of(n)` basis functions are kept
/// when assembling `tr Lⁿ`. Longer products self-average harder, so the
/// sizes may only shrink with `n`; the last entry covers all longer
/// traces.
#[derive(Debug, Clone)]
pub struct TruncationSizes {
    sizes: Vec<usize>,
}

impl TruncationSizes {
    pub fn new(sizes: Vec<usize>) -> Result<TruncationSizes> {
        if sizes.is_empty() || sizes.iter().any(|&m| m == 0) {
            return Err(Error::InvalidConfig(
                "truncation sizes must be nonempty and positive".into(),
            ));
        }
        if sizes.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "truncation sizes must be non-ascending so repeated cycles fit in the base blocks"
                    .into(),
            ));
        }
        Ok(TruncationSizes { sizes })
    }

    /// The sizes used for the reference computations: 26 basis functions
    /// for period-1 traces, 20 for period 2, 16 beyond.
    pub fn standard() -> TruncationSizes {
        TruncationSizes {
            sizes: vec![26, 20, 16],
        }
    }

    /// Same size for every trace length.
    pub fn uniform(m: usize) -> TruncationSizes {
        TruncationSizes { sizes: vec![m] }
    }

    /// Block size for traces of length `n ≥ 1`.
    pub fn m_of(&self, n: usize) -> usize {
        assert!(n >= 1);
        self.sizes[(n - 1).min(self.sizes.len() - 1)]
    }

    pub fn largest(&self) -> usize {
        self.sizes[0]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.sizes
    }
}

/// Builds the σ-series operators of each segment of a cycle at block size
/// `m`, in orbit order: `segments[i]` maps the neighbourhood of point `i`
/// to that of point `i+1`, expanded about the image point.
fn cycle_segments(
    map: &dyn Map,
    cycle: &Cycle,
    m: usize,
    kernel: &NoiseKernel,
) -> Result<Vec<LMatrix>> {
    let n = cycle.len();
    (0..n)
        .map(|i| {
            segment_operator(
                map,
                cycle.itinerary[i] as usize,
                cycle.points[(i + 1) % n],
                m,
                kernel,
            )
        })
        .collect()
}

/// Product of a cycle's segment operators in descending order
/// (`L^{(n_p)} ⋯ L^{(1)}`), raised to the `r`-th power.
fn cycle_power(segments: &[LMatrix], r: usize) -> LMatrix {
    let n = segments.len();
    let mut p = segments[n - 1].clone();
    for i in (0..n - 1).rev() {
        p = p.mul(&segments[i]);
    }
    p.pow(r)
}

/// σ-series trace of the `r`-th power of one prime cycle's operator, at
/// the block size configured for trace length `n_p · r`.
///
/// The noiseless coefficient approximates `1/|1 − Λ_p^r|`; the truncation
/// remainder is the tail of the geometric eigenvalue sum, bounded by
/// `2 |Λ_p|^{-(m+1) r}`.
pub fn cycle_trace(
    map: &dyn Map,
    cycle: &Cycle,
    r: usize,
    sizes: &TruncationSizes,
    kernel: &NoiseKernel,
) -> Result<SigmaSeries> {
    assert!(r >= 1);
    let m = sizes.m_of(cycle.len() * r);
    let segments = cycle_segments(map, cycle, m, kernel)?;
    Ok(cycle_power(&segments, r).trace())
}

/// The assembled traces `C[n] = tr Lⁿ` as σ-series, `n = 1..=n_max`.
#[derive(Debug, Clone)]
pub struct TraceTable {
    n_max: usize,
    c: Vec<SigmaSeries>, // index n; c[0] unused
}

impl TraceTable {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn trace(&self, n: usize) -> &SigmaSeries {
        assert!((1..=self.n_max).contains(&n));
        &self.c[n]
    }
}

/// Sums the prime-cycle traces into `tr Lⁿ = Σ_p n_p Σ_r δ_{n, n_p r}
/// tr(L_p)^r`.
///
/// The cycle set must contain every prime up to `n_max` (checked against
/// the necklace count), in any order; contributions are accumulated in
/// the given order so a canonically sorted input yields bit-identical
/// tables run after run. Each cycle's segments are built once at the
/// size of its shortest trace and sliced down for repeats, which gives
/// exactly the same entries as building at the smaller size directly.
pub fn assemble_traces(
    map: &dyn Map,
    cycles: &[Cycle],
    n_max: usize,
    sizes: &TruncationSizes,
    kernel: &NoiseKernel,
) -> Result<TraceTable> {
    for n in 1..=n_max {
        let expected = prime_cycle_count(n, map.branch_count());
        let got = cycles.iter().filter(|c| c.len() == n).count();
        if got != expected {
            return Err(Error::Dimension(format!(
                "cycle set has {got} primes of length {n}, need {expected}"
            )));
        }
    }
    let so = kernel.sigma_order();
    let per_cycle: Vec<Vec<(usize, SigmaSeries)>> = cycles
        .par_iter()
        .filter(|c| c.len() <= n_max)
        .map(|cycle| -> Result<Vec<(usize, SigmaSeries)>> {
            let np = cycle.len();
            let segments = cycle_segments(map, cycle, sizes.m_of(np), kernel)?;
            let mut out = Vec::new();
            let mut r = 1;
            while np * r <= n_max {
                let mr = sizes.m_of(np * r);
                let blocks: Vec<LMatrix> = segments.iter().map(|s| s.leading_block(mr)).collect();
                let trace = cycle_power(&blocks, r).trace().scale(np as f64);
                out.push((np * r, trace));
                r += 1;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut c = vec![SigmaSeries::new(so); n_max + 1];
    for contributions in per_cycle {
        for (n, t) in contributions {
            c[n].add_assign(&t);
        }
    }
    Ok(TraceTable { n_max, c })
}

/// Cumulants of the spectral determinant: `det(1 − zL) = 1 − Σ Q_n zⁿ`,
/// each `Q_n` a σ-series.
#[derive(Debug, Clone)]
pub struct CumulantTable {
    n_max: usize,
    q: Vec<SigmaSeries>, // index n; q[0] unused
}

impl CumulantTable {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn cumulant(&self, n: usize) -> &SigmaSeries {
        assert!((1..=self.n_max).contains(&n));
        &self.q[n]
    }

    pub fn sigma_order(&self) -> usize {
        self.q[0].n_max()
    }

    /// The table restricted to cycle order `n ≤ n_max` — `Q_n` depends
    /// only on traces up to length `n`, so truncation is exact.
    pub fn truncated(&self, n_max: usize) -> CumulantTable {
        assert!(n_max <= self.n_max);
        CumulantTable {
            n_max,
            q: self.q[..=n_max].to_vec(),
        }
    }
}

/// Expands `exp(−Σ zⁿ/n · tr Lⁿ)` into determinant cumulants by the
/// recursion `Q_n = (C_n − Σ_{k=1}^{n-1} Q_k ∗ C_{n-k}) / n`, with `∗` the
/// σ-series product.
pub fn cumulants(traces: &TraceTable) -> CumulantTable {
    let n_max = traces.n_max();
    let so = traces.trace(1).n_max();
    let mut q = vec![SigmaSeries::new(so); n_max + 1];
    for n in 1..=n_max {
        let mut acc = traces.trace(n).clone();
        for k in 1..n {
            acc = acc.sub(&q[k].mul(traces.trace(n - k)));
        }
        q[n] = acc.scale(1.0 / n as f64);
    }
    CumulantTable { n_max, q }
}

/// Exact determinant cumulants of a single linear branch `f(x) = Λx` in
/// the Euler-product variable `t = −z/|Λ|`:
/// `E_k = Π_{j=1}^k Λ^{-(j-1)} / (1 − Λ^{-j})`, with `E_0 = 1`.
///
/// The noiseless determinant is `Π_{k≥0} (1 − z·sgn(Λ)/Λ^{k+1})
/// = Σ_k (−1)^k E_k (z/|Λ|)^k`, so in the z-convention used by
/// [`cumulants`] these correspond to `Q_n = (−1)^{n+1} E_n / |Λ|ⁿ`. The
/// products decay super-exponentially, like `Λ^{-k(k-1)/2}`.
pub fn euler_cumulants(lambda: f64, k_max: usize) -> Vec<f64> {
    assert!(lambda.abs() > 1.0, "Euler cumulants need an expanding map");
    let q = 1.0 / lambda;
    let mut e = Vec::with_capacity(k_max + 1);
    e.push(1.0);
    let mut acc = 1.0;
    let mut qpow = 1.0; // Λ^{-(j-1)}
    let mut qj = 1.0; // Λ^{-j}
    for _j in 1..=k_max {
        qj *= q;
        acc *= qpow / (1.0 - qj);
        qpow *= q;
        e.push(acc);
    }
    e
}

/// Noiseless determinant `1 − Σ Q_{n,0} zⁿ` evaluated at `z`.
fn noiseless_det(q: &CumulantTable, z: f64) -> f64 {
    let mut acc = 1.0;
    let mut zp = 1.0;
    for n in 1..=q.n_max() {
        zp *= z;
        acc -= q.cumulant(n).coeff(0) * zp;
    }
    acc
}

/// Smallest positive root `z₀` of the noiseless determinant, found by a
/// sign-change scan starting on `[1e-9, 10]`, bisection, and Newton
/// polish; the residual must reach 1e-13.
///
/// If the determinant holds its sign across the whole window the window
/// is doubled and rescanned: strongly expanding maps put the root
/// arbitrarily far out, and a root sitting exactly on the cap (`f = Λx`
/// has `z₀ = |Λ|`) can land a roundoff's width past it.
pub fn find_z0(q: &CumulantTable) -> Result<f64> {
    let h = |z: f64| noiseless_det(q, z);
    let n_grid = 20_000;
    let z_lo = 1e-9;
    let mut z_hi = 10.0;
    let mut bracket = None;
    while bracket.is_none() && z_hi <= 1e9 {
        let step = (z_hi - z_lo) / n_grid as f64;
        let mut za = z_lo;
        let mut ha = h(za);
        for i in 1..=n_grid {
            let zb = z_lo + i as f64 * step;
            let hb = h(zb);
            if ha * hb <= 0.0 {
                bracket = Some((za, zb));
                break;
            }
            za = zb;
            ha = hb;
        }
        if bracket.is_none() {
            z_hi *= 2.0;
        }
    }
    let (mut a, mut b) = bracket.ok_or_else(|| {
        Error::RootNotFound(format!(
            "noiseless determinant has no sign change on [{z_lo}, 1e9]"
        ))
    })?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if h(a) * h(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    let mut z0 = 0.5 * (a + b);
    for _ in 0..50 {
        let mut hp = 0.0;
        let mut zp = 1.0;
        for n in 1..=q.n_max() {
            hp -= n as f64 * q.cumulant(n).coeff(0) * zp;
            zp *= z0;
        }
        if hp == 0.0 {
            break;
        }
        z0 -= h(z0) / hp;
    }
    if !(h(z0).abs() < 1e-13) {
        return Err(Error::RootNotFound(format!(
            "Newton polish stalled at residual {:.3e}",
            h(z0).abs()
        )));
    }
    Ok(z0)
}

/// Mixed expansion coefficients of the determinant about `(z₀, σ = 0)`:
/// `F_ij = Σ_m binom(m, i) Q_{m,j} z₀^{m-i}` for `i + j/2 ≤ k_max` (only
/// even `j` is stored; odd planes vanish for even kernels and never enter
/// the closed forms).
#[derive(Debug, Clone)]
pub struct DetCoeffs {
    z0: f64,
    k_max: usize,
    f: Vec<Vec<f64>>, // f[i][k] = F_{i, 2k}
}

impl DetCoeffs {
    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `F_ij` with `j` the σ power (even).
    pub fn f(&self, i: usize, j: usize) -> f64 {
        assert!(j % 2 == 0, "only even σ indices are defined");
        assert!(
            i + j / 2 <= self.k_max,
            "F_{{{i},{j}}} outside the computed order {}",
            self.k_max
        );
        self.f[i][j / 2]
    }
}

/// Tabulates the determinant's mixed derivatives at the noiseless root.
pub fn det_coeffs(q: &CumulantTable, z0: f64, k_max: usize) -> Result<DetCoeffs> {
    if 2 * k_max > q.sigma_order() {
        return Err(Error::Dimension(format!(
            "determinant coefficients to ε^{k_max} need σ order {}, have {}",
            2 * k_max,
            q.sigma_order()
        )));
    }
    let mut f = Vec::with_capacity(k_max + 1);
    for i in 0..=k_max {
        let mut row = Vec::with_capacity(k_max - i + 1);
        for k in 0..=k_max - i {
            let mut acc = 0.0;
            for m in i.max(1)..=q.n_max() {
                // binom(m, i) z0^{m-i}
                let mut w = 1.0;
                for t in 0..i {
                    w *= (m - t) as f64 / (i - t) as f64;
                }
                acc += w * q.cumulant(m).coeff(2 * k) * z0.powi((m - i) as i32);
            }
            row.push(acc);
        }
        f.push(row);
    }
    Ok(DetCoeffs { z0, k_max, f })
}

/// The weak-noise expansion of the leading eigenvalue: the determinant
/// root `z(ε) = z₀ + Σ z_{2k} ε^k` and its reciprocal
/// `ν(ε) = Σ ν_{2k} ε^k`, with ε = σ².
#[derive(Debug, Clone)]
pub struct EigenExpansion {
    z: Vec<f64>,
    nu: Vec<f64>,
}

impl EigenExpansion {
    pub fn z0(&self) -> f64 {
        self.z[0]
    }

    /// Highest ε power carried.
    pub fn k_max(&self) -> usize {
        self.z.len() - 1
    }

    /// `z_{2k}` coefficient (`k = 0` gives z₀).
    pub fn z_coeff(&self, k: usize) -> f64 {
        self.z[k]
    }

    /// `ν_{2k}` coefficient (`k = 0` gives the noiseless eigenvalue).
    pub fn nu_coeff(&self, k: usize) -> f64 {
        self.nu[k]
    }

    pub fn nu_coeffs(&self) -> &[f64] {
        &self.nu
    }

    /// Partial sum `Σ_{k≤terms} ν_{2k} σ^{2k}` — the order-`terms`
    /// perturbative eigenvalue at noise strength σ.
    pub fn nu_partial_sum(&self, sigma: f64, terms: usize) -> f64 {
        let eps = sigma * sigma;
        let top = terms.min(self.k_max());
        let mut acc = 0.0;
        for k in (0..=top).rev() {
            acc = acc * eps + self.nu[k];
        }
        acc
    }
}

/// Solves `1 − Σ Q_n(ε) z(ε)ⁿ = 0` for the root near `z₀` as a truncated
/// ε-series, by Newton iteration on jets: each sweep doubles the number
/// of correct ε orders, so a handful of sweeps saturate any practical
/// truncation.
pub fn solve_z_series(q: &CumulantTable, z0: f64, k_eps: usize) -> Result<Vec<f64>> {
    if 2 * k_eps > q.sigma_order() {
        return Err(Error::Dimension(format!(
            "ε order {k_eps} needs σ order {}, have {}",
            2 * k_eps,
            q.sigma_order()
        )));
    }
    // cumulants as ε-jets (even σ coefficients only; the odd ones cannot
    // enter an even observable)
    let n_max = q.n_max();
    let qe: Vec<Jet> = (0..=n_max)
        .map(|n| {
            let mut jet = Jet::zeros(k_eps);
            if n >= 1 {
                for k in 0..=k_eps {
                    jet.set_coeff(k, q.cumulant(n).coeff(2 * k));
                }
            }
            jet
        })
        .collect();

    let mut z = Jet::constant(z0, k_eps);
    for _ in 0..5 {
        // D(z) = 1 − Σ Q_n zⁿ and its z-derivative, accumulated together
        let mut d = Jet::one(k_eps);
        let mut dz = Jet::zeros(k_eps);
        let mut zp = Jet::one(k_eps); // z^{n-1} enters dz before the update
        for n in 1..=n_max {
            dz = dz.sub(&qe[n].scale(n as f64).mul(&zp));
            zp = zp.mul(&z);
            d = d.sub(&qe[n].mul(&zp));
        }
        if dz.coeff(0).abs() < 1e-12 {
            return Err(Error::DegenerateRoot(z0));
        }
        let inv_dz = dz.reciprocal().map_err(|_| Error::DegenerateRoot(z0))?;
        z = z.sub(&d.mul(&inv_dz));
    }
    Ok(z.coeffs().to_vec())
}

/// Reciprocates the root series into eigenvalue coefficients:
/// `ν(ε) = 1/z(ε)` truncated at the same order.
pub fn nu_expansion(z: &[f64]) -> Result<EigenExpansion> {
    if z.is_empty() || !(z[0] > 0.0) {
        return Err(Error::Domain(
            "root series must start from a positive z₀".into(),
        ));
    }
    let jet = Jet::from_coeffs(z.to_vec());
    let nu = jet.reciprocal()?;
    Ok(EigenExpansion {
        z: z.to_vec(),
        nu: nu.coeffs().to_vec(),
    })
}

/// Closed forms for the root coefficients `z₂ … z₈` in terms of the
/// determinant derivatives, used as an independent cross-check of the
/// series Newton solution.
pub fn closed_form_z(f: &DetCoeffs) -> Result<[f64; 4]> {
    if f.k_max() < 4 {
        return Err(Error::Dimension(
            "closed forms need determinant coefficients through ε^4".into(),
        ));
    }
    let f10 = f.f(1, 0);
    if f10 == 0.0 {
        return Err(Error::DegenerateRoot(f.z0()));
    }
    let (f02, f20, f12, f04) = (f.f(0, 2), f.f(2, 0), f.f(1, 2), f.f(0, 4));
    let (f30, f22, f14, f06) = (f.f(3, 0), f.f(2, 2), f.f(1, 4), f.f(0, 6));
    let (f40, f32, f24, f16, f08) = (f.f(4, 0), f.f(3, 2), f.f(2, 4), f.f(1, 6), f.f(0, 8));
    let z2 = -f02 / f10;
    let z4 = -(f20 * z2 * z2 + f12 * z2 + f04) / f10;
    let z6 =
        -(2.0 * f20 * z2 * z4 + f12 * z4 + f30 * z2.powi(3) + f22 * z2 * z2 + f14 * z2 + f06) / f10;
    let z8 = -(f20 * (2.0 * z2 * z6 + z4 * z4)
        + f12 * z6
        + 3.0 * f30 * z2 * z2 * z4
        + 2.0 * f22 * z2 * z4
        + f14 * z4
        + f40 * z2.powi(4)
        + f32 * z2.powi(3)
        + f24 * z2 * z2
        + f16 * z2
        + f08)
        / f10;
    Ok([z2, z4, z6, z8])
}

/// Closed forms for `ν₂ … ν₈` directly in the determinant derivatives and
/// ν₀ — the fully substituted counterparts of [`closed_form_z`] plus
/// reciprocation, again purely for cross-checking the series solution.
pub fn closed_form_nu(f: &DetCoeffs, nu0: f64) -> Result<[f64; 4]> {
    if f.k_max() < 4 {
        return Err(Error::Dimension(
            "closed forms need determinant coefficients through ε^4".into(),
        ));
    }
    let f10 = f.f(1, 0);
    if f10 == 0.0 {
        return Err(Error::DegenerateRoot(f.z0()));
    }
    let (f02, f20, f12, f04) = (f.f(0, 2), f.f(2, 0), f.f(1, 2), f.f(0, 4));
    let (f30, f22, f14, f06) = (f.f(3, 0), f.f(2, 2), f.f(1, 4), f.f(0, 6));
    let (f40, f32, f24, f16, f08) = (f.f(4, 0), f.f(3, 2), f.f(2, 4), f.f(1, 6), f.f(0, 8));

    let nu2 = f02 / f10 * nu0 * nu0;
    let nu4 =
        (f20 * f02 * f02 - f12 * f02 * f10 + f04 * f10 * f10 + f02 * f02 * f10 * nu0) * nu0 * nu0
            / f10.powi(3);
    let nu6 = (2.0 * f02.powi(3) * f20 * f20 - 3.0 * f02 * f02 * f10 * f12 * f20
        + 2.0 * f02 * f04 * f10 * f10 * f20
        + f02 * f10 * f10 * f12 * f12
        - f04 * f10.powi(3) * f12
        - f30 * f02.powi(3) * f10
        + f22 * f02 * f02 * f10 * f10
        - f02 * f10.powi(3) * f14
        + f06 * f10.powi(4)
        + 2.0
            * (f02.powi(3) * f10 * f20 - f02 * f02 * f10 * f10 * f12 + f02 * f04 * f10.powi(3))
            * nu0
        + f02.powi(3) * f10 * f10 * nu0 * nu0)
        * nu0
        * nu0
        / f10.powi(5);
    let nu8 = (f10.powi(4)
        * (f08 * f10 * f10 - f06 * f10 * f12 + f04 * f12 * f12 - f04 * f10 * f14
            + f04 * f04 * f20
            + f04 * f04 * f10 * nu0)
        + f02.powi(4)
            * (f40 * f10 * f10 + 5.0 * f20.powi(3) - 5.0 * f10 * f20 * f30
                + 5.0 * f10 * f20 * f20 * nu0
                - 2.0 * f10 * f10 * f30 * nu0
                + 3.0 * f10 * f10 * f20 * nu0 * nu0
                + f10.powi(3) * nu0.powi(3))
        + f02
            * f02
            * f10
            * f10
            * (-3.0 * f10 * f14 * f20 + 6.0 * f04 * f20 * f20 - 3.0 * f10 * f12 * f22
                + f10 * f10 * f24
                - 3.0 * f04 * f10 * f30
                - 2.0 * f10 * f10 * f14 * nu0
                + 6.0 * f04 * f10 * f20 * nu0
                + 3.0 * f04 * f10 * f10 * nu0 * nu0
                + 6.0 * f12 * f12 * f20
                + 3.0 * f12 * f12 * f10 * nu0)
        - f02
            * f10.powi(3)
            * (f12.powi(3)
                + f12 * (-2.0 * f10 * f14 + 6.0 * f04 * f20 + 4.0 * f04 * f10 * nu0)
                + f10 * (f10 * f16 - 2.0 * f06 * f20 - 2.0 * f04 * f22 - 2.0 * f06 * f10 * nu0))
        - f02.powi(3)
            * f10
            * (f10 * (-4.0 * f20 * f22 + f10 * f32 - 2.0 * f10 * f22 * nu0)
                + f12
                    * (10.0 * f20 * f20 - 4.0 * f10 * f30
                        + 8.0 * f10 * f20 * nu0
                        + 3.0 * f10 * f10 * nu0 * nu0)))
        * nu0
        * nu0
        / f10.powi(7);
    Ok([nu2, nu4, nu6, nu8])
}

/// Consistency of the two determinant representations: the cumulant
/// polynomial `1 − Σ Q_n zⁿ` against the cycle product
/// `Π_p exp(−Σ_r z^{n_p r} tr(L_p^r)/r)`, both truncated at `z^{n_max}`.
/// Returns the largest normalized coefficient discrepancy over all powers
/// of z and σ — an identity in exact arithmetic, so the result measures
/// pure floating-point drift of the assembly.
pub fn product_formula_check(
    map: &dyn Map,
    cycles: &[Cycle],
    n_max: usize,
    sizes: &TruncationSizes,
    kernel: &NoiseKernel,
) -> Result<f64> {
    let so = kernel.sigma_order();
    // u[n] = Σ_p Σ_r δ_{n, n_p r} tr(L_p^r)/r, so det = exp(−Σ u_n zⁿ)
    let mut u = vec![SigmaSeries::new(so); n_max + 1];
    for cycle in cycles.iter().filter(|c| c.len() <= n_max) {
        let np = cycle.len();
        let segments = cycle_segments(map, cycle, sizes.m_of(np), kernel)?;
        let mut r = 1;
        while np * r <= n_max {
            let mr = sizes.m_of(np * r);
            let blocks: Vec<LMatrix> = segments.iter().map(|s| s.leading_block(mr)).collect();
            let t = cycle_power(&blocks, r).trace().scale(1.0 / r as f64);
            u[np * r].add_assign(&t);
            r += 1;
        }
    }
    // exp(−U) over the ring of σ-series, via e' = −U'·e
    let mut e = vec![SigmaSeries::new(so); n_max + 1];
    e[0] = SigmaSeries::one(so);
    for l in 1..=n_max {
        let mut acc = SigmaSeries::new(so);
        for k in 1..=l {
            acc.add_assign(&u[k].mul(&e[l - k]).scale(-(k as f64)));
        }
        e[l] = acc.scale(1.0 / l as f64);
    }
    // cumulant side from the same cycle set; coefficients at high σ order
    // grow to ~1e4, so the discrepancy is normalized per coefficient
    let q = cumulants(&assemble_traces(map, cycles, n_max, sizes, kernel)?);
    let mut worst: f64 = (e[0].coeff(0) - 1.0).abs();
    for j in 1..=so {
        worst = worst.max(e[0].coeff(j).abs());
    }
    for n in 1..=n_max {
        for j in 0..=so {
            let qc = q.cumulant(n).coeff(j);
            worst = worst.max((e[n].coeff(j) + qc).abs() / (1.0 + qc.abs()));
        }
    }
    Ok(worst)
}

/// Everything one run of the perturbative pipeline produces: the located
/// cycles, assembled traces and cumulants at the full truncation, and one
/// eigenvalue expansion per cycle order `n = 1..=n_max` (the cumulant
/// recursion is triangular, so the shorter rows are exact restrictions,
/// not re-runs). A row is `None` when that truncation has no real
/// determinant root — low even-order truncations of maps with alternating
/// cumulants can briefly lose the root to a complex pair — but the final
/// row is always present.
#[derive(Debug, Clone)]
pub struct ExpansionRun {
    pub cycles: Vec<Cycle>,
    pub traces: TraceTable,
    pub cumulants: CumulantTable,
    pub rows: Vec<Option<EigenExpansion>>,
}

impl ExpansionRun {
    /// The expansion at the full cycle order.
    pub fn final_expansion(&self) -> &EigenExpansion {
        self.rows
            .last()
            .and_then(|r| r.as_ref())
            .expect("run_expansion verified the final row")
    }

    /// The expansion truncated at cycle order `n`, if that truncation has
    /// a real root.
    pub fn row(&self, n: usize) -> Option<&EigenExpansion> {
        self.rows[n - 1].as_ref()
    }
}

/// Runs the full perturbative pipeline on a map. Intermediate truncation
/// rows without a real root are recorded as `None`; a rootless or
/// degenerate *final* truncation is an error.
pub fn run_expansion(
    map: &dyn Map,
    kernel: &NoiseKernel,
    n_max: usize,
    sizes: &TruncationSizes,
    residual_tol: f64,
) -> Result<ExpansionRun> {
    let cycles = crate::cycles::locate_all(map, n_max, residual_tol)?;
    let traces = assemble_traces(map, &cycles, n_max, sizes, kernel)?;
    let q = cumulants(&traces);
    let k_eps = kernel.sigma_order() / 2;
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let qn = q.truncated(n);
        let row = find_z0(&qn)
            .and_then(|z0| solve_z_series(&qn, z0, k_eps))
            .and_then(|z| nu_expansion(&z));
        match row {
            Ok(exp) => rows.push(Some(exp)),
            Err(e @ (Error::RootNotFound(_) | Error::DegenerateRoot(_))) if n < n_max => {
                let _ = e;
                rows.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ExpansionRun {
        cycles,
        traces,
        cumulants: q,
        rows,
    })
}
