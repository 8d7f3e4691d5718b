//! Dressing functions: integer-order Bessel functions, generalized Laguerre
//! polynomials, the oscillator dressing Ξ, the drive dressing Δ_m and
//! displaced Fock-state overlaps.
//!
//! Everything here is a pure function of its arguments.

use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Largest |order| accepted by [`bessel_j`] and [`BesselTable`].
pub const BESSEL_MAX_ORDER: usize = 10_000;

/// First zero of J_0; a drive with A/ω_ex at this value freezes tunneling.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// Arguments shared by the two dressings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressingArgs {
    /// α = (2g/Ω)².
    pub alpha: f64,
    /// A/ω_ex.
    pub drive_ratio: f64,
}

impl DressingArgs {
    pub fn new(alpha: f64, drive_ratio: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                reason: "must be finite and non-negative",
            });
        }
        if !(drive_ratio >= 0.0) || !drive_ratio.is_finite() {
            return Err(Error::InvalidParameter {
                name: "drive_ratio",
                value: drive_ratio,
                reason: "must be finite and non-negative",
            });
        }
        Ok(Self { alpha, drive_ratio })
    }
}

/// J_n(x) for n = 0..=n_max at a fixed argument.
///
/// Miller's downward recurrence normalised with J_0 + 2 Σ J_2k = 1. The
/// recurrence starts far enough above max(n_max, |x|) that the minimal
/// solution dominates; values that would overflow are rescaled on the fly.
fn miller(n_max: usize, ax: f64) -> Vec<f64> {
    debug_assert!(ax > 0.0);
    let top = (n_max as f64).max(ax);
    let mut start = (top + 20.0 + (40.0 * top).sqrt()).ceil() as usize;
    start += start & 1;
    let mut j = vec![0.0; start + 2];
    j[start] = 1.0;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / ax * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j[2..=start].iter().step_by(2).sum::<f64>();
    j.truncate(n_max + 1);
    for v in &mut j {
        *v /= norm;
    }
    j
}

/// Leading two terms of the power series, used when x is so small that
/// the recurrence coefficients 2k/x would overflow.
fn small_argument(n_max: usize, x: f64) -> Vec<f64> {
    let h = 0.5 * x;
    let mut out = Vec::with_capacity(n_max + 1);
    let mut lead = 1.0; // (x/2)^n / n!
    for n in 0..=n_max {
        if n > 0 {
            lead *= h / n as f64;
        }
        out.push(lead * (1.0 - h * h / (n as f64 + 1.0)));
    }
    out
}

fn check_argument(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("Bessel argument must be finite, got {x}")))
    }
}

/// Table of J_k(x) for |k| ≤ n_max at one argument x.
#[derive(Debug, Clone)]
pub struct BesselTable {
    x: f64,
    values: Vec<f64>,
}

impl BesselTable {
    pub fn new(n_max: usize, x: f64) -> Result<Self> {
        check_argument(x)?;
        if n_max > BESSEL_MAX_ORDER {
            return Err(Error::Domain(format!(
                "Bessel order {n_max} above the supported limit {BESSEL_MAX_ORDER}"
            )));
        }
        let ax = x.abs();
        let mut values = if ax == 0.0 {
            let mut v = vec![0.0; n_max + 1];
            v[0] = 1.0;
            v
        } else if ax < 1e-8 {
            small_argument(n_max, ax)
        } else {
            miller(n_max, ax)
        };
        if x < 0.0 {
            for (n, v) in values.iter_mut().enumerate() {
                if n % 2 == 1 {
                    *v = -*v;
                }
            }
        }
        Ok(Self { x, values })
    }

    pub fn argument(&self) -> f64 {
        self.x
    }

    pub fn max_order(&self) -> usize {
        self.values.len() - 1
    }

    /// J_k(x); orders beyond the table are treated as zero.
    pub fn get(&self, k: i64) -> f64 {
        let n = k.unsigned_abs() as usize;
        match self.values.get(n) {
            Some(&v) if k < 0 && n % 2 == 1 => -v,
            Some(&v) => v,
            None => 0.0,
        }
    }
}

/// Integer-order Bessel function of the first kind, J_order(x).
///
/// Supported for |order| ≤ [`BESSEL_MAX_ORDER`]; absolute accuracy is
/// better than 1e-12 for |x| ≤ 50.
pub fn bessel_j(order: i64, x: f64) -> Result<f64> {
    let table = BesselTable::new(order.unsigned_abs() as usize, x)?;
    Ok(table.get(order))
}

/// Generalized Laguerre polynomial L_k^{(l)}(x) by the three-term
/// recurrence in k.
pub fn laguerre(k: usize, l: usize, x: f64) -> f64 {
    let a = l as f64;
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for n in 1..k {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + a - x) * cur - (nf + a) * prev) / (nf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// The k zeros of L_k^{(l)}, ascending.
///
/// All zeros are real, simple and below 2k + l + 2 + 2√(k(k + l)); sign
/// changes on a fine grid are refined by bisection.
pub fn laguerre_zeros(k: usize, l: usize) -> Vec<f64> {
    let upper = 2.0 * k as f64 + l as f64 + 2.0 + 2.0 * ((k * (k + l)) as f64).sqrt();
    let cells = 200 * (k + 1) * (k + 1);
    let h = upper / cells as f64;
    let mut zeros = Vec::with_capacity(k);
    let mut prev = laguerre(k, l, 0.0);
    for i in 1..=cells {
        let x = i as f64 * h;
        let cur = laguerre(k, l, x);
        if cur == 0.0 {
            zeros.push(x);
        } else if prev != 0.0 && prev.signum() != cur.signum() {
            let (mut lo, mut hi) = (x - h, x);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if laguerre(k, l, mid).signum() == prev.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    zeros
}

/// Oscillator dressing Ξ_K^L(α) = α^{L/2} √(K!/(K+L)!) L_K^{(L)}(α) e^{−α/2}.
///
/// The magnitude is assembled in log space so factorial ratios never
/// overflow.
pub fn xi(k: usize, l: usize, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must be finite and non-negative",
        });
    }
    Ok(xi_unchecked(k, l, alpha))
}

pub(crate) fn xi_unchecked(k: usize, l: usize, alpha: f64) -> f64 {
    if l > 0 && alpha == 0.0 {
        return 0.0;
    }
    let lag = laguerre(k, l, alpha);
    if lag == 0.0 {
        return 0.0;
    }
    let mut ln = 0.5 * (ln_factorial(k as u64) - ln_factorial((k + l) as u64)) - 0.5 * alpha + lag.abs().ln();
    if l > 0 {
        ln += 0.5 * l as f64 * alpha.ln();
    }
    lag.signum() * ln.exp()
}

/// Drive dressing Δ_m = Δ J_m(A/ω_ex).
pub fn dressed_delta(m: i64, delta: f64, amplitude: f64, omega_ex: f64) -> Result<f64> {
    if !(omega_ex > 0.0) {
        return Err(Error::InvalidParameter {
            name: "omega_ex",
            value: omega_ex,
            reason: "must be positive",
        });
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "must be non-negative",
        });
    }
    Ok(delta * bessel_j(m, amplitude / omega_ex)?)
}

/// ⟨row| exp{λ(B† − B)} |col⟩ for Fock states |row⟩, |col⟩ and real λ.
///
/// For row ≥ col this is √(col!/row!) λ^{row−col} e^{−λ²/2} L_col^{(row−col)}(λ²);
/// the transposed element picks up (−1)^{row−col}, so the matrix over all
/// Fock states is orthogonal.
pub fn displacement_overlap(row: usize, col: usize, lambda: f64) -> f64 {
    let (lo, diff) = if row >= col { (col, row - col) } else { (row, col - row) };
    let magnitude = xi_unchecked(lo, diff, lambda * lambda);
    let odd = diff % 2 == 1;
    let negative = odd && ((lambda < 0.0) != (row < col));
    if negative {
        -magnitude
    } else {
        magnitude
    }
}
