//! Analytic Floquet spectrum to second order in the tunneling element.
//!
//! At Δ = 0 the polaron-displaced, drive-dressed product states
//! |↑/↓, n, K⟩ diagonalise the Floquet Hamiltonian exactly. Finite Δ couples
//! them through the dressed elements Δ̃; near a crossing ε = mω_ex − LΩ the
//! two degenerate states form a 2×2 block, and every other coupling enters
//! as a second-order energy shift.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ResonanceIndex, Spin, SystemParams, Truncation};
use crate::specialfns::{displacement_overlap, xi_unchecked, BesselTable};

/// How the oscillator shift P enters the second-order denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftConvention {
    /// ↑ states use ε + pω_ex + PΩ, ↓ states ε + pω_ex − PΩ. This is what
    /// the exact Floquet spectrum selects.
    #[default]
    SpinTied,
    /// The opposite pairing; kept for the regression comparison only.
    SpinReversed,
}

/// Whether second-order shifts are included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Order {
    First,
    #[default]
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Minus,
    Plus,
    /// A state without a degenerate partner (the first L ↓ states of the
    /// manifold, or ↑ states for L < 0).
    Uncoupled,
}

/// Quasienergy E_{n,K} at Δ = 0: ∓ε/2 − nω_ex + KΩ − g²/Ω.
pub fn delta0_quasienergy(spin: Spin, n: i64, k: usize, params: &SystemParams) -> f64 {
    -0.5 * spin.sigma_z() * params.epsilon - n as f64 * params.omega_ex + k as f64 * params.omega
        - params.polaron_shift()
}

/// ⟨↓, n, K| Δσ_x |↑, n', K'⟩ between the Δ = 0 eigenstates:
/// [sign(K' − K)]^{|K'−K|} Δ_{n'−n} Ξ^{|K'−K|}_{min(K,K')}(α).
pub fn dressed_coupling(n: i64, k: usize, n_p: i64, k_p: usize, params: &SystemParams) -> f64 {
    let (lo, diff) = if k_p >= k { (k, k_p - k) } else { (k_p, k - k_p) };
    let sign = if k_p < k && diff % 2 == 1 { -1.0 } else { 1.0 };
    let bessel = BesselTable::new((n_p - n).unsigned_abs() as usize, params.drive_ratio())
        .map(|t| t.get(n_p - n))
        .unwrap_or(f64::NAN);
    sign * params.delta * bessel * xi_unchecked(lo, diff, params.alpha())
}

/// Second-order correction ε⁽²⁾ for the state (spin, n, K) of the doublet
/// labelled (m, L):
/// Σ_{p,P} (Δ̃)² / (ε + pω_ex ± PΩ), leaving out the term that reaches the
/// doublet partner. P runs over [−K, P_max] and p over [−p_max, p_max].
#[allow(clippy::too_many_arguments)]
pub fn second_order_shift(
    spin: Spin,
    k: usize,
    m: i64,
    l: i64,
    params: &SystemParams,
    trunc: &Truncation,
    convention: ShiftConvention,
) -> Result<f64> {
    if params.delta == 0.0 {
        return Ok(0.0);
    }
    let bessel = BesselTable::new(trunc.p_max, params.drive_ratio())?;
    let alpha = params.alpha();
    let sign_p = match (spin, convention) {
        (Spin::Up, ShiftConvention::SpinTied) | (Spin::Down, ShiftConvention::SpinReversed) => 1.0,
        _ => -1.0,
    };
    let excluded = match spin {
        Spin::Up => (-m, l),
        Spin::Down => (-m, -l),
    };
    let delta2 = params.delta * params.delta;
    let p_max = trunc.p_max as i64;
    let mut sum = 0.0;
    for big_p in -(k as i64)..=trunc.big_p_max as i64 {
        let lo = if big_p >= 0 { k } else { (k as i64 + big_p) as usize };
        let osc = xi_unchecked(lo, big_p.unsigned_abs() as usize, alpha);
        let osc2 = osc * osc;
        for p in -p_max..=p_max {
            if (p, big_p) == excluded {
                continue;
            }
            let num = delta2 * bessel.get(p).powi(2) * osc2;
            let den = params.epsilon + p as f64 * params.omega_ex + sign_p * big_p as f64 * params.omega;
            if den.abs() < trunc.denom_tol {
                if num == 0.0 {
                    continue;
                }
                return Err(Error::SmallDenominator {
                    p,
                    big_p,
                    denominator: den,
                });
            }
            sum += num / den;
        }
    }
    Ok(sum)
}

/// The 2×2 effective Hamiltonian of one doublet,
/// [[e_up, coupling], [coupling, e_down]].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveBlock {
    pub e_up: f64,
    pub e_down: f64,
    pub coupling: f64,
    /// ε⁽²⁾ of the ↑ member.
    pub shift_up: f64,
    /// ε⁽²⁾ of the ↓ member.
    pub shift_down: f64,
    /// Normalized index (L ≥ 0) in the frame the block is written in.
    pub index: ResonanceIndex,
}

impl EffectiveBlock {
    /// Mixing angle θ ∈ [0, π/2] with tan 2θ = 2|coupling| / (e_up − e_down).
    pub fn mixing_angle(&self) -> f64 {
        0.5 * (2.0 * self.coupling.abs()).atan2(self.e_up - self.e_down)
    }

    /// (↑, ↓) amplitudes of the requested eigenvector. The plus branch is
    /// the ↑ state far below the resonance, the minus branch the ↓ state.
    pub fn eigenvector(&self, branch: Branch) -> (f64, f64) {
        let theta = self.mixing_angle();
        let s = if self.coupling < 0.0 { -1.0 } else { 1.0 };
        match branch {
            Branch::Plus => (theta.cos(), s * theta.sin()),
            Branch::Minus => (-s * theta.sin(), theta.cos()),
            Branch::Uncoupled => (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasienergyLevel {
    pub value: f64,
    pub branch: Branch,
    /// For coupled levels the doublet index; for uncoupled ones `k` is the
    /// oscillator number of the lone state.
    pub index: ResonanceIndex,
}

/// Floquet mode in the bare (spin, Fock K', Fourier l) basis.
///
/// Coefficients are ordered lexicographically in (spin, K', l), ↑ first and
/// l ascending from −l_max. At time t each coefficient carries its factor
/// e^{−ilω_ex t}; [`FloquetState::physical`] sums the Fourier components.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetState {
    pub k_max: usize,
    pub l_max: usize,
    pub coeffs: Vec<Complex64>,
    pub index: ResonanceIndex,
    pub branch: Branch,
    pub quasienergy: f64,
}

impl FloquetState {
    pub fn offset(k_max: usize, l_max: usize, spin: Spin, k: usize, l: i64) -> usize {
        let nl = 2 * l_max + 1;
        (spin.index() * (k_max + 1) + k) * nl + (l + l_max as i64) as usize
    }

    pub fn get(&self, spin: Spin, k: usize, l: i64) -> Complex64 {
        self.coeffs[Self::offset(self.k_max, self.l_max, spin, k, l)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Σ_l coefficients: the state vector in the (spin, K') basis.
    pub fn physical(&self) -> Vec<Complex64> {
        self.coeffs
            .chunks(2 * self.l_max + 1)
            .map(|chunk| chunk.iter().sum())
            .collect()
    }
}

/// Analytic solver bound to one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct VanVleck {
    pub params: SystemParams,
    pub trunc: Truncation,
    pub convention: ShiftConvention,
    pub order: Order,
}

impl VanVleck {
    pub fn new(params: SystemParams, trunc: Truncation) -> Result<Self> {
        params.validate()?;
        trunc.validate()?;
        Ok(Self {
            params,
            trunc,
            convention: ShiftConvention::default(),
            order: Order::default(),
        })
    }

    pub fn with_convention(mut self, convention: ShiftConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_order(mut self, order: Order) -> Self {
        self.order = order;
        self
    }

    fn frame(&self, index: ResonanceIndex) -> Result<(ResonanceIndex, SystemParams)> {
        let index = index.normalized()?;
        let params = if index.flipped {
            self.params.spin_flipped()
        } else {
            self.params
        };
        Ok((index, params))
    }

    fn shift(&self, spin: Spin, k: usize, m: i64, l: i64, params: &SystemParams) -> Result<f64> {
        match self.order {
            Order::First => Ok(0.0),
            Order::Second => second_order_shift(spin, k, m, l, params, &self.trunc, self.convention),
        }
    }

    pub fn effective_block(&self, index: ResonanceIndex) -> Result<EffectiveBlock> {
        let (idx, p) = self.frame(index)?;
        let l = idx.l_usize();
        let shift_up = self.shift(Spin::Up, idx.k, idx.m, idx.l, &p)?;
        let shift_down = self.shift(Spin::Down, idx.k + l, idx.m, idx.l, &p)?;
        let sign = if l % 2 == 0 { -1.0 } else { 1.0 };
        let delta_m = p.delta * BesselTable::new(idx.m.unsigned_abs() as usize, p.drive_ratio())?.get(-idx.m);
        let coupling = 0.5 * sign * delta_m * xi_unchecked(idx.k, l, p.alpha());
        Ok(EffectiveBlock {
            e_up: delta0_quasienergy(Spin::Up, idx.n, idx.k, &p) - 0.25 * shift_up,
            e_down: delta0_quasienergy(Spin::Down, idx.n + idx.m, idx.k + l, &p) + 0.25 * shift_down,
            coupling,
            shift_up,
            shift_down,
            index: idx,
        })
    }

    /// Width Ω^{n,K}_{m,L} of the avoided crossing:
    /// √{[ε − mω_ex + LΩ + (ε⁽²⁾_↓ + ε⁽²⁾_↑)/4]² + [Δ_{−m} Ξ_K^L(α)]²}.
    pub fn dressed_gap(&self, index: ResonanceIndex, order: Order) -> Result<f64> {
        let solver = self.with_order(order);
        let b = solver.effective_block(index)?;
        let (idx, p) = self.frame(index)?;
        let detuning =
            p.epsilon - idx.m as f64 * p.omega_ex + idx.l as f64 * p.omega + 0.25 * (b.shift_down + b.shift_up);
        Ok(detuning.hypot(2.0 * b.coupling))
    }

    /// The two quasienergies of the doublet, minus first.
    pub fn quasienergies(&self, index: ResonanceIndex) -> Result<(QuasienergyLevel, QuasienergyLevel)> {
        let b = self.effective_block(index)?;
        let (minus, plus) = if b.coupling == 0.0 {
            (b.e_up.min(b.e_down), b.e_up.max(b.e_down))
        } else {
            let (idx, p) = self.frame(index)?;
            let gap = self.dressed_gap(index, self.order)?;
            let mean = 0.5
                * (-(2 * idx.n + idx.m) as f64 * p.omega_ex
                    + (2 * idx.k as i64 + idx.l) as f64 * p.omega
                    + 0.25 * (b.shift_down - b.shift_up)
                    - 2.0 * p.polaron_shift());
            (mean - 0.5 * gap, mean + 0.5 * gap)
        };
        let level = |value, branch| QuasienergyLevel {
            value,
            branch,
            index: b.index,
        };
        Ok((level(minus, Branch::Minus), level(plus, Branch::Plus)))
    }

    /// Quasienergies E⁰_{↓,n+m,K'} + ε⁽²⁾/4 of the L lone ↓ states
    /// (K' < L) that accompany a doublet family with L > 0.
    pub fn uncoupled_levels(&self, index: ResonanceIndex) -> Result<Vec<QuasienergyLevel>> {
        let (idx, p) = self.frame(index)?;
        (0..idx.l_usize())
            .map(|k| {
                let shift = self.shift(Spin::Down, k, idx.m, idx.l, &p)?;
                Ok(QuasienergyLevel {
                    value: delta0_quasienergy(Spin::Down, idx.n + idx.m, k, &p) + 0.25 * shift,
                    branch: Branch::Uncoupled,
                    index: ResonanceIndex { k, ..idx },
                })
            })
            .collect()
    }

    /// Every quasienergy of the manifold (m, L, n) whose Δ = 0 label lies
    /// inside the Fock cutoff: 2(k_max + 1) values in ascending order.
    ///
    /// Doublets with both members inside the cutoff give two levels; when
    /// the partner lies above the cutoff only the branch connected to the
    /// state inside it is kept.
    pub fn manifold_levels(&self, m: i64, l: i64, n: i64) -> Result<Vec<QuasienergyLevel>> {
        let k_max = self.trunc.k_max;
        let base = ResonanceIndex::new(m, l, n, l.unsigned_abs() as usize).normalized()?;
        let shift = base.l_usize();
        let mut out = self.uncoupled_levels(base)?;
        for k in 0..=k_max {
            let idx = ResonanceIndex { k, ..base };
            let (minus, plus) = self.quasienergies(idx)?;
            if k + shift <= k_max {
                out.push(minus);
                out.push(plus);
            } else {
                let b = self.effective_block(idx)?;
                let (up_plus, _) = b.eigenvector(Branch::Plus);
                out.push(if up_plus.abs() >= std::f64::consts::FRAC_1_SQRT_2 {
                    plus
                } else {
                    minus
                });
            }
        }
        out.sort_by(|a, b| a.value.total_cmp(&b.value));
        Ok(out)
    }

    /// Floquet mode of a doublet branch (or a lone state) at time t, built
    /// from the 2×2 eigenvector and the Bessel/displacement expansions of
    /// the two Δ = 0 states.
    pub fn floquet_mode(&self, index: ResonanceIndex, branch: Branch, t: f64) -> Result<FloquetState> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("time must be finite, got {t}")));
        }
        let (idx, p) = self.frame(index)?;
        let l = idx.l_usize();
        let (amp_up, amp_down, k_up, k_down, energy) = match branch {
            Branch::Uncoupled => {
                if idx.k >= l {
                    return Err(Error::Configuration(format!(
                        "state K = {} has a partner at L = {}",
                        idx.k, l
                    )));
                }
                let shift = self.shift(Spin::Down, idx.k, idx.m, idx.l, &p)?;
                let e = delta0_quasienergy(Spin::Down, idx.n + idx.m, idx.k, &p) + 0.25 * shift;
                (0.0, 1.0, idx.k, idx.k, e)
            }
            _ => {
                let b = self.effective_block(idx)?;
                let (lo, hi) = self.quasienergies(idx)?;
                let (u, d) = b.eigenvector(branch);
                let e = if branch == Branch::Minus { lo.value } else { hi.value };
                (u, d, idx.k, idx.k + l, e)
            }
        };

        let (k_max, l_max) = (self.trunc.k_max, self.trunc.l_max);
        let nl = 2 * l_max + 1;
        let half_drive = 0.5 * p.drive_ratio();
        let reach = idx.n.unsigned_abs().max((idx.n + idx.m).unsigned_abs()) as usize + l_max;
        let bessel = BesselTable::new(reach, half_drive)?;
        let lambda = p.displacement();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * (k_max + 1) * nl];

        let mut fourier_kept = [0.0f64; 2];
        let mut fock_kept = [0.0f64; 2];
        let components = [
            (Spin::Up, amp_up, k_up, idx.n, -lambda, 1i64),
            (Spin::Down, amp_down, k_down, idx.n + idx.m, lambda, -1i64),
        ];
        for (slot, &(spin, amp, k_lab, n_lab, disp, sgn)) in components.iter().enumerate() {
            if amp == 0.0 {
                fourier_kept[slot] = 1.0;
                fock_kept[slot] = 1.0;
                continue;
            }
            let fourier: Vec<f64> = (-(l_max as i64)..=l_max as i64)
                .map(|lf| bessel.get(sgn * (n_lab - lf)))
                .collect();
            let fock: Vec<f64> = (0..=k_max).map(|kp| displacement_overlap(kp, k_lab, disp)).collect();
            fourier_kept[slot] = fourier.iter().map(|v| v * v).sum();
            fock_kept[slot] = fock.iter().map(|v| v * v).sum();
            for (kp, &f) in fock.iter().enumerate() {
                for (li, &c) in fourier.iter().enumerate() {
                    let lf = li as i64 - l_max as i64;
                    let phase = Complex64::from_polar(1.0, -(lf as f64) * p.omega_ex * t);
                    coeffs[(spin.index() * (k_max + 1) + kp) * nl + li] = phase * (amp * f * c);
                }
            }
        }

        let mut state = FloquetState {
            k_max,
            l_max,
            coeffs,
            index: idx,
            branch,
            quasienergy: energy,
        };
        let norm = state.norm_sqr();
        if norm < 1.0 - 1e-6 {
            let fourier_loss = 1.0 - fourier_kept[0].min(fourier_kept[1]);
            let fock_loss = 1.0 - fock_kept[0].min(fock_kept[1]);
            let cutoff = if fourier_loss >= fock_loss { "l_max" } else { "k_max" };
            return Err(Error::Truncation { cutoff, norm });
        }
        if idx.flipped {
            state.coeffs = unflip(&state.coeffs, k_max, l_max);
        }
        Ok(state)
    }
}

/// Map coefficients computed in the spin-exchanged frame back to the lab
/// frame: exchange the spin blocks and multiply by (−1)^{K'+l}.
fn unflip(coeffs: &[Complex64], k_max: usize, l_max: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); coeffs.len()];
    for spin in [Spin::Up, Spin::Down] {
        for k in 0..=k_max {
            for l in -(l_max as i64)..=l_max as i64 {
                let src = FloquetState::offset(k_max, l_max, spin.flipped(), k, l);
                let dst = FloquetState::offset(k_max, l_max, spin, k, l);
                let odd = (k as i64 + l).rem_euclid(2) == 1;
                out[dst] = if odd { -coeffs[src] } else { coeffs[src] };
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specialfns::{bessel_j, laguerre};
    use nalgebra::{DMatrix, Matrix2};
    use proptest::prelude::*;

    fn fig1(eps: f64) -> SystemParams {
        SystemParams::new(eps, 0.2, 0.05, 2f64.sqrt(), 2.0, 1.0).unwrap()
    }

    fn fig3(g: f64) -> SystemParams {
        SystemParams::new(0.0, 0.4, g, 1.0, 8.0, 5.3).unwrap()
    }

    fn solver(p: SystemParams) -> VanVleck {
        VanVleck::new(p, Truncation::for_params(&p)).unwrap()
    }

    #[test]
    fn delta0_examples() {
        let p = SystemParams::new(0.0, 0.3, 0.0, 1.7, 0.5, 1.0).unwrap();
        assert_eq!(delta0_quasienergy(Spin::Up, 0, 0, &p), 0.0);
        assert_eq!(delta0_quasienergy(Spin::Down, 0, 1, &p), 1.7);
        let q = fig1(3.0 - 2f64.sqrt());
        let d = delta0_quasienergy(Spin::Up, 2, 4, &q) - delta0_quasienergy(Spin::Down, 5, 5, &q);
        assert!(d.abs() < 1e-14);
    }

    #[test]
    fn coupling_collapses_without_dressing() {
        let p = SystemParams::new(0.0, 0.3, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(dressed_coupling(2, 3, 2, 3, &p), 0.3);
        let q = fig3(0.5);
        let want = 0.4 * bessel_j(0, 8.0 / 5.3).unwrap() * laguerre(2, 0, 1.0) * (-0.5f64).exp();
        assert!((dressed_coupling(1, 2, 1, 2, &q) - want).abs() < 1e-15);
    }

    /// Expands both displaced states in a 120-level Fock space through a
    /// matrix exponential of the displacement generator, and the drive part
    /// through the explicit Fourier sum Σ_l J_{l−n}(a) J_{n'−l}(a).
    #[test]
    fn coupling_matches_brute_force_expansion() {
        let dim = 120;
        let disp = |lam: f64| {
            let mut gen = DMatrix::<f64>::zeros(dim, dim);
            for k in 0..dim - 1 {
                let s = ((k + 1) as f64).sqrt();
                gen[(k + 1, k)] = lam * s;
                gen[(k, k + 1)] = -lam * s;
            }
            gen.exp()
        };
        let p = SystemParams::new(0.0, 0.7, 0.5, 1.0, 3.1, 1.3).unwrap(); // α = 1
        let lam = p.displacement();
        let d_down = disp(lam);
        let d_up = disp(-lam);
        let a = 0.5 * p.drive_ratio();
        for &(n, k, n_p, k_p) in &[(0, 2, 0, 0), (0, 0, 0, 2), (1, 3, -1, 1), (0, 1, 2, 4), (-2, 5, 1, 0)] {
            let osc: f64 = (0..dim).map(|j| d_down[(j, k)] * d_up[(j, k_p)]).sum();
            let drive: f64 = (-60i64..=60)
                .map(|l| bessel_j(l - n, a).unwrap() * bessel_j(n_p - l, a).unwrap())
                .sum();
            let brute = p.delta * drive * osc;
            let got = dressed_coupling(n, k, n_p, k_p, &p);
            assert!((got - brute).abs() < 1e-10, "({n},{k},{n_p},{k_p}): {got} vs {brute}");
        }
    }

    #[test]
    fn shift_vanishes_without_tunneling() {
        let p = fig1(0.3).with_delta(0.0);
        let t = Truncation::for_params(&p);
        for spin in [Spin::Up, Spin::Down] {
            assert_eq!(
                second_order_shift(spin, 3, 0, 0, &p, &t, ShiftConvention::SpinTied).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn shifts_cancel_at_zero_bias() {
        for g in [0.1, 0.5, 1.0] {
            let p = fig3(g);
            let t = Truncation::for_params(&p);
            let d0 = (p.delta * bessel_j(0, p.drive_ratio()).unwrap()).abs();
            for k in 0..6 {
                let up = second_order_shift(Spin::Up, k, 0, 0, &p, &t, ShiftConvention::SpinTied).unwrap();
                let down = second_order_shift(Spin::Down, k, 0, 0, &p, &t, ShiftConvention::SpinTied).unwrap();
                assert!((up + down).abs() < 1e-3 * d0, "g={g} K={k}: {up} {down}");
            }
        }
    }

    #[test]
    fn shift_converges_in_cutoffs() {
        let p = fig1(0.37);
        let t = Truncation::for_params(&p);
        let t2 = Truncation {
            p_max: 60,
            big_p_max: 60,
            ..t
        };
        for spin in [Spin::Up, Spin::Down] {
            for k in 0..6 {
                let a = second_order_shift(spin, k, 0, 0, &p, &t, ShiftConvention::SpinTied).unwrap();
                let b = second_order_shift(spin, k, 0, 0, &p, &t2, ShiftConvention::SpinTied).unwrap();
                assert!((a - b).abs() < 1e-8 * p.delta);
            }
        }
    }

    #[test]
    fn small_denominator_is_reported() {
        // ε = 1 − √2 is the (m, L) = (1, 1) crossing; the (0, 0) block keeps
        // that term in its sum.
        let p = fig1(1.0 - 2f64.sqrt());
        let t = Truncation::for_params(&p);
        let err = second_order_shift(Spin::Up, 0, 0, 0, &p, &t, ShiftConvention::SpinTied).unwrap_err();
        assert!(matches!(
            err,
            Error::SmallDenominator { p: 1, big_p: -1, .. } | Error::SmallDenominator { .. }
        ));
    }

    #[test]
    fn block_without_tunneling_is_diagonal() {
        let p = fig1(0.8).with_delta(0.0);
        let vv = solver(p);
        let idx = ResonanceIndex::new(1, 0, 0, 2);
        let b = vv.effective_block(idx).unwrap();
        assert_eq!(b.coupling, 0.0);
        assert_eq!(b.e_up, delta0_quasienergy(Spin::Up, 0, 2, &p));
        assert_eq!(b.e_down, delta0_quasienergy(Spin::Down, 1, 2, &p));
        let (lo, hi) = vv.quasienergies(idx).unwrap();
        assert_eq!(lo.value, b.e_down.min(b.e_up));
        assert_eq!(hi.value, b.e_down.max(b.e_up));
    }

    #[test]
    fn first_order_splitting_at_resonance() {
        let p = fig1(2.0 - 2f64.sqrt());
        let vv = solver(p).with_order(Order::First);
        let idx = ResonanceIndex::new(2, 1, 0, 1);
        let (lo, hi) = vv.quasienergies(idx).unwrap();
        let want = (p.delta * bessel_j(-2, 2.0).unwrap() * crate::specialfns::xi(1, 1, p.alpha()).unwrap()).abs();
        assert!((hi.value - lo.value - want).abs() < 1e-14);
    }

    #[test]
    fn gap_examples_at_zero_bias() {
        let d0 = 0.4 * bessel_j(0, 8.0 / 5.3).unwrap();
        for g in [0.0, 0.1, 0.37, 0.5, 1.0] {
            let p = fig3(g);
            let vv = solver(p);
            for k in 0..6 {
                let gap = vv.dressed_gap(ResonanceIndex::new(0, 0, 0, k), Order::First).unwrap();
                let want = (d0 * laguerre(k, 0, p.alpha()) * (-0.5 * p.alpha()).exp()).abs();
                assert!((gap - want).abs() < 1e-15);
            }
            let k0 = vv.dressed_gap(ResonanceIndex::new(0, 0, 0, 0), Order::First).unwrap();
            assert!((k0 - d0.abs() * (-0.5 * p.alpha()).exp()).abs() < 1e-15);
        }
        let vv = solver(fig3(0.5));
        assert_eq!(
            vv.dressed_gap(ResonanceIndex::new(0, 0, 0, 1), Order::First).unwrap(),
            0.0
        );
        let vv = solver(fig3(1.0));
        let g: Vec<f64> = [0, 2, 4]
            .iter()
            .map(|&k| vv.dressed_gap(ResonanceIndex::new(0, 0, 0, k), Order::First).unwrap())
            .collect();
        assert!((g[0] - g[1]).abs() <= 1e-12 * g[0] && (g[0] - g[2]).abs() <= 1e-12 * g[0]);
    }

    #[test]
    fn gap_closes_for_first_excited_doublet_at_half_coupling() {
        let p = SystemParams::new(0.0, 1.0, 0.5, 1.0, 8.0, 5.3).unwrap();
        let vv = solver(p);
        let (lo, hi) = vv.quasienergies(ResonanceIndex::new(0, 0, 0, 1)).unwrap();
        assert!((hi.value - lo.value).abs() < 1e-12);
    }

    #[test]
    fn manifold_has_one_level_per_bare_state() {
        let p = fig1(1.0 - 2f64.sqrt() + 0.01);
        let vv = VanVleck::new(p, Truncation::for_params(&p).with_k_max(6)).unwrap();
        for &(m, l) in &[(0, 0), (1, 1), (3, 2), (-1, -1), (2, -2)] {
            let levels = vv.manifold_levels(m, l, 0).unwrap();
            assert_eq!(levels.len(), 14, "(m, L) = ({m}, {l})");
        }
        let zero = vv.with_order(Order::First);
        let levels = zero.manifold_levels(1, 1, 0).unwrap();
        assert_eq!(levels.iter().filter(|l| l.branch == Branch::Uncoupled).count(), 1);
    }

    #[test]
    fn flipped_index_matches_mirror_crossing() {
        // L = −1: ↑(n, K) meets ↓(n + m, K − 1) at ε = mω_ex + Ω.
        let p = fig1(-1.0 + 2f64.sqrt() + 0.003);
        let vv = solver(p);
        let (lo, hi) = vv.quasienergies(ResonanceIndex::new(-1, -1, 0, 3)).unwrap();
        let e_up = delta0_quasienergy(Spin::Up, 0, 3, &p);
        let e_down = delta0_quasienergy(Spin::Down, -1, 2, &p);
        assert!((0.5 * (lo.value + hi.value) - 0.5 * (e_up + e_down)).abs() < 0.02);
        let first = vv.with_order(Order::First);
        let (a, b) = first.quasienergies(ResonanceIndex::new(-1, -1, 0, 3)).unwrap();
        let width =
            2.0 * p.delta * bessel_j(-1, 2.0).unwrap().abs() * crate::specialfns::xi(2, 1, p.alpha()).unwrap().abs()
                / 2.0;
        let want = (0.003f64).hypot(width);
        assert!((b.value - a.value - want).abs() < 1e-14);
        assert!((0.5 * (a.value + b.value) - 0.5 * (e_up + e_down)).abs() < 1e-14);
    }

    #[test]
    fn mode_without_tunneling_is_pure() {
        let p = fig3(0.5).with_delta(0.0).with_epsilon(0.3);
        let vv = solver(p);
        let s = vv
            .floquet_mode(ResonanceIndex::new(0, 0, 0, 1), Branch::Minus, 0.0)
            .unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-8);
        let up: f64 = (0..=20)
            .flat_map(|k| (-40..=40).map(move |l| (k, l)))
            .map(|(k, l)| s.get(Spin::Up, k, l).norm_sqr())
            .sum();
        assert!(!(1e-15..=1.0 - 1e-8).contains(&up));
    }

    #[test]
    fn mode_without_dressing_is_bare_vector() {
        let p = SystemParams::new(0.4, 0.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let vv = solver(p);
        // ε > 0 puts ↑ below ↓, so the minus branch is the ↑ state.
        let s = vv
            .floquet_mode(ResonanceIndex::new(0, 0, 0, 3), Branch::Minus, 0.7)
            .unwrap();
        let phys = s.physical();
        for (i, c) in phys.iter().enumerate() {
            let want = if i == 3 { 1.0 } else { 0.0 };
            assert!((c.norm() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn mode_pair_is_orthonormal() {
        let p = SystemParams::new(0.0, 0.4, 0.1, 1.0, 8.0, 5.3).unwrap();
        let vv = solver(p);
        for k in 0..4 {
            let idx = ResonanceIndex::new(0, 0, 0, k);
            let a = vv.floquet_mode(idx, Branch::Minus, 0.0).unwrap();
            let b = vv.floquet_mode(idx, Branch::Plus, 0.0).unwrap();
            let dot: Complex64 = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x.conj() * y).sum();
            assert!(dot.norm() < 1e-8);
            assert!((a.norm_sqr() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn flipped_mode_is_the_mirror_state() {
        // Δ = 0: the flipped doublet (−1, −1) at K = 2 contains ↑(0, 2) and
        // ↓(−1, 1); each branch must be one of them up to a phase.
        let p = fig1(0.2).with_delta(0.0);
        let vv = solver(p);
        let idx = ResonanceIndex::new(-1, -1, 0, 2);
        let up_weight = |s: &FloquetState| -> f64 {
            (0..=s.k_max)
                .flat_map(|k| (-(s.l_max as i64)..=s.l_max as i64).map(move |l| (k, l)))
                .map(|(k, l)| s.get(Spin::Up, k, l).norm_sqr())
                .sum()
        };
        let direct_up = [Branch::Minus, Branch::Plus]
            .into_iter()
            .map(|br| vv.floquet_mode(ResonanceIndex::new(0, 0, 0, 2), br, 0.3).unwrap())
            .find(|s| up_weight(s) > 0.5)
            .unwrap();
        let mut matched = false;
        for br in [Branch::Minus, Branch::Plus] {
            let s = vv.floquet_mode(idx, br, 0.3).unwrap();
            if up_weight(&s) > 0.5 {
                let dot: Complex64 = s.coeffs.iter().zip(&direct_up.coeffs).map(|(x, y)| x.conj() * y).sum();
                assert!((dot.norm() - 1.0).abs() < 1e-10);
                matched = true;
            }
        }
        assert!(matched);
    }

    #[test]
    fn truncation_leakage_is_reported() {
        let p = fig3(1.0);
        let t = Truncation::for_params(&p).with_k_max(3);
        let vv = VanVleck::new(p, t).unwrap();
        let err = vv
            .floquet_mode(ResonanceIndex::new(0, 0, 0, 2), Branch::Plus, 0.0)
            .unwrap_err();
        assert!(matches!(err, Error::Truncation { cutoff: "k_max", .. }));
    }

    proptest! {
        #[test]
        fn closed_form_matches_block_eigenvalues(
            eps in -3.0f64..3.0, g in 0.0f64..1.2, amp in 0.0f64..6.0, k in 0usize..6, m in -3i64..=3, l in -2i64..=2,
        ) {
            let p = SystemParams::new(eps, 0.3, g, 2f64.sqrt(), amp, 1.0).unwrap();
            let vv = solver(p);
            let idx = ResonanceIndex::new(m, l, 0, k + 2);
            let (Ok(b), Ok((lo, hi))) = (vv.effective_block(idx), vv.quasienergies(idx)) else {
                return Ok(());
            };
            let eig = Matrix2::new(b.e_up, b.coupling, b.coupling, b.e_down).symmetric_eigenvalues();
            let (e0, e1) = (eig[0].min(eig[1]), eig[0].max(eig[1]));
            let scale = e0.abs().max(e1.abs()).max(1.0);
            prop_assert!((lo.value - e0).abs() <= 1e-12 * scale);
            prop_assert!((hi.value - e1).abs() <= 1e-12 * scale);
            let gap = vv.dressed_gap(idx, Order::Second).unwrap();
            prop_assert!((gap - (e1 - e0)).abs() <= 1e-12 * scale);
            prop_assert!(hi.value >= lo.value);
        }

        #[test]
        fn coupling_magnitude_is_symmetric(n in -4i64..4, k in 0usize..8, np in -4i64..4, kp in 0usize..8, g in 0.0f64..1.5) {
            let p = SystemParams::new(0.1, 0.5, g, 1.0, 2.5, 1.1).unwrap();
            let a = dressed_coupling(n, k, np, kp, &p).abs();
            let b = dressed_coupling(np, kp, n, k, &p).abs();
            prop_assert!((a - b).abs() <= 1e-14 * a.max(1e-300));
        }
    }
}
