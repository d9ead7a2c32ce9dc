//! Prime periodic orbits of the map: itinerary enumeration and numerically
//! polished orbit location.
//!
//! For a complete shift on `k` symbols the prime cycles of period `n` are
//! in bijection with the aperiodic necklaces of length `n`, one canonical
//! representative each (the lexicographically least rotation, a Lyndon
//! word). [`enumerate_prime_itineraries`] generates them with Duval's
//! algorithm; [`locate_cycle`] turns an itinerary into orbit points by
//! contracting backward sweeps through the inverse branches, then polishes
//! all points at once with a multipoint Newton step so the orbit condition
//! holds to near machine precision even for long, strongly unstable
//! cycles.

use crate::error::{Error, Result};
use crate::maps::Map;
use rayon::prelude::*;

/// A located prime periodic orbit.
#[derive(Debug, Clone)]
pub struct Cycle {
    /// Symbol sequence; `points[i]` lies in partition element
    /// `itinerary[i]`.
    pub itinerary: Vec<u8>,
    /// Orbit points with `f(points[i]) = points[(i+1) % n]`.
    pub points: Vec<f64>,
    /// Stability multiplier `Λ_p = Π f'(points[i])`.
    pub multiplier: f64,
    /// Largest orbit-condition defect `max_i |f(points[i]) - points[i+1]|`
    /// actually achieved.
    pub residual: f64,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.itinerary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.itinerary.is_empty()
    }
}

/// All Lyndon words over `{0, …, alphabet-1}` of length `1..=n_max`,
/// sorted by length and then lexicographically.
///
/// These label exactly one representative per prime cycle of the complete
/// shift. Lengths are capped at 24: beyond that the number of words (and
/// of trace evaluations downstream) grows into the millions.
pub fn enumerate_prime_itineraries(n_max: usize, alphabet: usize) -> Vec<Vec<u8>> {
    assert!(
        (1..=24).contains(&n_max),
        "cycle length {n_max} out of range"
    );
    assert!(alphabet >= 1, "need at least one symbol");
    let top = (alphabet - 1) as u8;
    let mut out: Vec<Vec<u8>> = Vec::new();
    let mut w: Vec<u8> = vec![0];
    while !w.is_empty() {
        out.push(w.clone());
        // Duval: extend periodically to the maximum length, then strip
        // trailing top symbols and increment
        let head = w.clone();
        w = (0..n_max).map(|i| head[i % head.len()]).collect();
        while w.last() == Some(&top) {
            w.pop();
        }
        if let Some(last) = w.last_mut() {
            *last += 1;
        }
    }
    out.sort_by(|a, b| (a.len(), a.as_slice()).cmp(&(b.len(), b.as_slice())));
    out
}

/// Number of prime cycles of period `n` on a complete shift over
/// `alphabet` symbols — the aperiodic necklace count
/// `(1/n) Σ_{d|n} μ(d) alphabet^{n/d}`.
pub fn prime_cycle_count(n: usize, alphabet: usize) -> usize {
    assert!(n >= 1 && alphabet >= 1);
    let moebius = |mut m: usize| -> i64 {
        let mut mu = 1i64;
        let mut p = 2;
        while p * p <= m {
            if m % p == 0 {
                m /= p;
                if m % p == 0 {
                    return 0;
                }
                mu = -mu;
            }
            p += 1;
        }
        if m > 1 {
            mu = -mu;
        }
        mu
    };
    let mut acc = 0i64;
    for d in 1..=n {
        if n % d == 0 {
            acc += moebius(d) * (alphabet as i64).pow((n / d) as u32);
        }
    }
    (acc / n as i64) as usize
}

fn is_primitive(word: &[u8]) -> bool {
    let n = word.len();
    for d in 1..n {
        if n % d == 0 && (0..n).all(|i| word[i] == word[i % d]) {
            return false;
        }
    }
    true
}

/// Solves a small dense linear system in place by Gaussian elimination
/// with partial pivoting. The Newton systems here are at most 24×24, so
/// nothing fancier is warranted.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-300 {
            return Err(Error::Convergence(
                "singular Jacobian in multipoint Newton".into(),
            ));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let m = a[row][col] / a[col][col];
            if m == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Locates the periodic orbit with the given primitive itinerary.
///
/// Strategy: because the inverse branches contract, sweeping a point
/// backward through the composed inverse `f⁻¹_{s_0} ∘ … ∘ f⁻¹_{s_{n-1}}`
/// converges geometrically to the orbit. Eighty sweeps put every point
/// within a factor `|Λ_p|^{-80/n}` of the truth; a multipoint Newton
/// iteration on the full orbit condition `f(x_i) = x_{i+1}` then polishes
/// all points simultaneously to the requested residual. The located
/// points must actually carry the requested itinerary and the orbit must
/// be unstable, otherwise an error is returned.
pub fn locate_cycle(map: &dyn Map, itinerary: &[u8], residual_tol: f64) -> Result<Cycle> {
    let n = itinerary.len();
    if n == 0 {
        return Err(Error::Domain("empty itinerary".into()));
    }
    if let Some(&s) = itinerary
        .iter()
        .find(|&&s| (s as usize) >= map.branch_count())
    {
        return Err(Error::Domain(format!(
            "symbol {s} out of range for map {} with {} branches",
            map.name(),
            map.branch_count()
        )));
    }
    if !is_primitive(itinerary) {
        return Err(Error::Domain(format!(
            "itinerary {itinerary:?} is a repetition of a shorter word"
        )));
    }

    let context =
        |e: Error| Error::RootNotFound(format!("cycle {itinerary:?} on map {}: {e}", map.name()));

    // backward sweeps from the midpoint of the last symbol's element
    let (lo, hi) = map.partition_element(itinerary[n - 1] as usize);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..80 {
        for &s in itinerary.iter().rev() {
            x = map.inverse_point(s as usize, x).map_err(context)?;
        }
    }
    // one recorded sweep gives the whole orbit
    let mut points = vec![0.0; n];
    for i in (0..n).rev() {
        x = map
            .inverse_point(itinerary[i] as usize, x)
            .map_err(context)?;
        points[i] = x;
    }

    // multipoint Newton on g_i = f(x_i) - x_{i+1}; the Jacobian is
    // f'(x_i) on the diagonal and -1 on the cyclic superdiagonal
    let defect = |pts: &[f64]| -> f64 {
        (0..n)
            .map(|i| (map.eval(pts[i]) - pts[(i + 1) % n]).abs())
            .fold(0.0, f64::max)
    };
    for _ in 0..40 {
        if defect(&points) < 1e-14 {
            break;
        }
        let g: Vec<f64> = (0..n)
            .map(|i| map.eval(points[i]) - points[(i + 1) % n])
            .collect();
        let mut jac = vec![vec![0.0; n]; n];
        for i in 0..n {
            jac[i][i] = map.deriv(points[i]);
            jac[i][(i + 1) % n] -= 1.0;
        }
        let step = solve_dense(jac, g).map_err(context)?;
        for i in 0..n {
            points[i] -= step[i];
        }
    }

    let residual = defect(&points);
    if !(residual < residual_tol) {
        return Err(Error::RootNotFound(format!(
            "cycle {itinerary:?} did not converge: residual {residual:.3e} (tolerance {residual_tol:.1e})"
        )));
    }
    for (i, &s) in itinerary.iter().enumerate() {
        if map.branch_of(points[i]) != s as usize {
            return Err(Error::RootNotFound(format!(
                "cycle {itinerary:?} converged onto the wrong branch at point {i} (x = {})",
                points[i]
            )));
        }
    }
    let multiplier: f64 = points.iter().map(|&x| map.deriv(x)).product();
    if multiplier.abs() <= 1.0 {
        return Err(Error::Domain(format!(
            "cycle {itinerary:?} is not unstable: |Λ| = {}",
            multiplier.abs()
        )));
    }

    Ok(Cycle {
        itinerary: itinerary.to_vec(),
        points,
        multiplier,
        residual,
    })
}

/// Locates every prime cycle up to period `n_max`, in the canonical
/// (length, lexicographic) order. Orbits are independent, so the work is
/// spread across threads; the first failure aborts the lot.
pub fn locate_all(map: &dyn Map, n_max: usize, residual_tol: f64) -> Result<Vec<Cycle>> {
    enumerate_prime_itineraries(n_max, map.branch_count())
        .par_iter()
        .map(|word| locate_cycle(map, word, residual_tol))
        .collect()
}
