//! Parameter and index types shared by the analytic and numeric layers.
//!
//! Units: ħ = 1 and every parameter is an angular frequency in one common,
//! caller-chosen unit.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};

/// Qubit basis state (σ_z eigenstate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    /// Eigenvalue of σ_z.
    pub fn sigma_z(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }

    /// Position in (spin, ...) basis orderings: ↑ first.
    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }
}

/// Physical parameters of
/// H(t) = −½[(ε + A cos ω_ex t) σ_z + Δ σ_x] + g σ_z (B† + B) + Ω B†B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Static bias ε (any sign).
    pub epsilon: f64,
    /// Tunneling splitting Δ ≥ 0.
    pub delta: f64,
    /// Qubit-oscillator coupling g ≥ 0.
    pub g: f64,
    /// Oscillator frequency Ω > 0.
    pub omega: f64,
    /// Drive amplitude A ≥ 0.
    pub amplitude: f64,
    /// Drive frequency ω_ex > 0.
    pub omega_ex: f64,
}

impl SystemParams {
    pub fn new(epsilon: f64, delta: f64, g: f64, omega: f64, amplitude: f64, omega_ex: f64) -> Result<Self> {
        let p = Self {
            epsilon,
            delta,
            g,
            omega,
            amplitude,
            omega_ex,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool, &'static str); 6] = [
            ("epsilon", self.epsilon, true, "must be finite"),
            ("delta", self.delta, self.delta >= 0.0, "must be non-negative"),
            ("g", self.g, self.g >= 0.0, "must be non-negative"),
            ("omega", self.omega, self.omega > 0.0, "must be positive"),
            (
                "amplitude",
                self.amplitude,
                self.amplitude >= 0.0,
                "must be non-negative",
            ),
            ("omega_ex", self.omega_ex, self.omega_ex > 0.0, "must be positive"),
        ];
        for (name, value, ok, reason) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value, reason });
            }
        }
        Ok(())
    }

    /// α = (2g/Ω)².
    pub fn alpha(&self) -> f64 {
        let r = 2.0 * self.g / self.omega;
        r * r
    }

    /// Polaron displacement g/Ω.
    pub fn displacement(&self) -> f64 {
        self.g / self.omega
    }

    /// A/ω_ex, the argument of the tunneling dressing Δ_m.
    pub fn drive_ratio(&self) -> f64 {
        self.amplitude / self.omega_ex
    }

    /// Polaron energy shift g²/Ω.
    pub fn polaron_shift(&self) -> f64 {
        self.g * self.g / self.omega
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// All frequencies divided by `unit`.
    pub fn scaled(&self, unit: f64) -> Self {
        Self {
            epsilon: self.epsilon / unit,
            delta: self.delta / unit,
            g: self.g / unit,
            omega: self.omega / unit,
            amplitude: self.amplitude / unit,
            omega_ex: self.omega_ex / unit,
        }
    }

    /// The same system seen after σ_z → −σ_z: only the bias changes sign
    /// in the quasienergy problem.
    pub(crate) fn spin_flipped(&self) -> Self {
        self.with_epsilon(-self.epsilon)
    }
}

/// Labels of a resonant doublet: ↑ at (n, K) degenerate with ↓ at
/// (n + m, K + L) when ε = mω_ex − LΩ.
///
/// A normalized index always has `l ≥ 0`. Indices with L < 0 are rewritten
/// with the spin labels exchanged (and ε mirrored); `flipped` records that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResonanceIndex {
    pub m: i64,
    pub l: i64,
    pub n: i64,
    pub k: usize,
    pub flipped: bool,
}

impl ResonanceIndex {
    pub fn new(m: i64, l: i64, n: i64, k: usize) -> Self {
        Self {
            m,
            l,
            n,
            k,
            flipped: false,
        }
    }

    /// Rewrite an L < 0 doublet in the L ≥ 0 form by exchanging the spin
    /// labels. Fails when the ↑ state has no partner (K < |L|).
    pub fn normalized(self) -> Result<Self> {
        if self.l >= 0 {
            return Ok(self);
        }
        let shift = self.l.unsigned_abs() as usize;
        if self.k < shift {
            return Err(Error::Configuration(format!(
                "K = {} has no partner at L = {}",
                self.k, self.l
            )));
        }
        Ok(Self {
            m: -self.m,
            l: -self.l,
            n: self.n + self.m,
            k: self.k - shift,
            flipped: !self.flipped,
        })
    }

    pub fn l_usize(&self) -> usize {
        debug_assert!(self.l >= 0, "index not normalized");
        self.l.max(0) as usize
    }
}

/// Cutoffs for the infinite sums and bases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Highest Fock state kept.
    pub k_max: usize,
    /// Fourier index range [−l_max, l_max].
    pub l_max: usize,
    /// Photon shift range of the second-order sum.
    pub p_max: usize,
    /// Upper oscillator shift of the second-order sum.
    pub big_p_max: usize,
    /// Smallest admissible energy denominator.
    pub denom_tol: f64,
}

impl Truncation {
    /// Defaults: k_max = 20, l_max = 40, p_max = P_max = 30,
    /// denom_tol = 1e-6 ω_ex.
    pub fn for_params(params: &SystemParams) -> Self {
        Self {
            k_max: 20,
            l_max: 40,
            p_max: 30,
            big_p_max: 30,
            denom_tol: 1e-6 * params.omega_ex,
        }
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn with_l_max(mut self, l_max: usize) -> Self {
        self.l_max = l_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k_max", self.k_max),
            ("l_max", self.l_max),
            ("p_max", self.p_max),
            ("P_max", self.big_p_max),
        ] {
            if v < 1 {
                return Err(Error::InvalidParameter {
                    name,
                    value: v as f64,
                    reason: "cutoff must be at least 1",
                });
            }
        }
        if !(self.denom_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "denom_tol",
                value: self.denom_tol,
                reason: "must be positive",
            });
        }
        Ok(())
    }
}

/// ε − mω_ex + LΩ.
pub fn resonance_detuning(params: &SystemParams, m: i64, l: i64) -> f64 {
    params.epsilon - m as f64 * params.omega_ex + l as f64 * params.omega
}

/// A crossing of the Δ = 0 spectrum at bias `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub m: i64,
    pub l: i64,
    pub epsilon: f64,
}

/// All crossings ε* = mω_ex − LΩ with 0 ≤ L ≤ `l_max`, m in `m_range` and
/// ε* inside `eps_range` widened by `window` on both sides, sorted by ε*
/// (ties by L, then m).
pub fn find_resonances(
    params: &SystemParams,
    eps_range: (f64, f64),
    m_range: RangeInclusive<i64>,
    l_max: usize,
    window: f64,
) -> Result<Vec<Resonance>> {
    if !(window > 0.0) {
        return Err(Error::InvalidParameter {
            name: "window",
            value: window,
            reason: "must be positive",
        });
    }
    let (lo, hi) = (eps_range.0 - window, eps_range.1 + window);
    let mut out = Vec::new();
    for l in 0..=l_max as i64 {
        for m in m_range.clone() {
            let eps = m as f64 * params.omega_ex - l as f64 * params.omega;
            if eps >= lo && eps <= hi {
                out.push(Resonance { m, l, epsilon: eps });
            }
        }
    }
    out.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon).then(a.l.cmp(&b.l)).then(a.m.cmp(&b.m)));
    Ok(out)
}

/// Smallest (j, N), N ≤ `max_denominator`, with |Ω/ω_ex − j/N| < 1e-9.
pub fn commensurability_check(omega: f64, omega_ex: f64, max_denominator: u64) -> Option<(u64, u64)> {
    if !(omega > 0.0 && omega_ex > 0.0) {
        return None;
    }
    let ratio = omega / omega_ex;
    (1..=max_denominator).find_map(|den| {
        let num = (ratio * den as f64).round();
        (num >= 1.0 && (ratio - num / den as f64).abs() < 1e-9).then_some((num as u64, den))
    })
}
