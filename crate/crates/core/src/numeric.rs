//! Brute-force reference: truncated Sambe-space diagonalization and direct
//! propagation of the Schrödinger equation in the bare (spin, Fock) basis.
//!
//! Nothing here relies on the polaron or Van Vleck machinery, so it serves as
//! an independent check of the analytic layer.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::dynamics::{thermal_cutoff, thermal_weights, TimeSeries};
use crate::error::{Error, Result};
use crate::model::{Spin, SystemParams, Truncation};
use crate::par::{self, Execution};

/// Largest Sambe dimension built unless a caller raises it.
pub const DEFAULT_DIMENSION_LIMIT: usize = 5000;

/// Default boundary-weight threshold of the truncation-artifact filter.
pub const DEFAULT_BOUNDARY_THRESHOLD: f64 = 0.1;

/// Real symmetric Floquet Hamiltonian on (spin, K, l), ordered
/// lexicographically with ↑ first, K ascending and l ascending from −l_max.
#[derive(Debug, Clone)]
pub struct SambeMatrix {
    pub k_max: usize,
    pub l_max: usize,
    pub matrix: DMatrix<f64>,
}

impl SambeMatrix {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn offset(&self, spin: Spin, k: usize, l: i64) -> usize {
        sambe_offset(self.k_max, self.l_max, spin, k, l)
    }

    /// Largest |H_ij − H_ji|.
    pub fn asymmetry(&self) -> f64 {
        let m = &self.matrix;
        (0..m.nrows())
            .flat_map(|i| (0..i).map(move |j| (m[(i, j)] - m[(j, i)]).abs()))
            .fold(0.0, f64::max)
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn eigen(&self) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
        SymmetricEigen::try_new(self.matrix.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolver(format!("no convergence at dimension {}", self.dimension())))
    }
}

fn sambe_offset(k_max: usize, l_max: usize, spin: Spin, k: usize, l: i64) -> usize {
    (spin.index() * (k_max + 1) + k) * (2 * l_max + 1) + (l + l_max as i64) as usize
}

pub fn build_sambe_matrix(params: &SystemParams, trunc: &Truncation) -> Result<SambeMatrix> {
    build_sambe_matrix_with_limit(params, trunc, DEFAULT_DIMENSION_LIMIT)
}

pub fn build_sambe_matrix_with_limit(params: &SystemParams, trunc: &Truncation, limit: usize) -> Result<SambeMatrix> {
    params.validate()?;
    trunc.validate()?;
    let (k_max, l_max) = (trunc.k_max, trunc.l_max);
    let dimension = 2 * (k_max + 1) * (2 * l_max + 1);
    if dimension > limit {
        return Err(Error::DimensionOverflow { dimension, limit });
    }
    let mut h = DMatrix::<f64>::zeros(dimension, dimension);
    let idx = |s, k, l| sambe_offset(k_max, l_max, s, k, l);
    let ls = -(l_max as i64)..=l_max as i64;
    for spin in [Spin::Up, Spin::Down] {
        let sz = spin.sigma_z();
        for k in 0..=k_max {
            for l in ls.clone() {
                let i = idx(spin, k, l);
                h[(i, i)] = -0.5 * sz * params.epsilon + k as f64 * params.omega - l as f64 * params.omega_ex;
                if l < l_max as i64 {
                    let j = idx(spin, k, l + 1);
                    h[(i, j)] = -0.25 * sz * params.amplitude;
                    h[(j, i)] = h[(i, j)];
                }
                if k < k_max {
                    let j = idx(spin, k + 1, l);
                    h[(i, j)] = sz * params.g * ((k + 1) as f64).sqrt();
                    h[(j, i)] = h[(i, j)];
                }
                if spin == Spin::Up {
                    let j = idx(Spin::Down, k, l);
                    h[(i, j)] = -0.5 * params.delta;
                    h[(j, i)] = h[(i, j)];
                }
            }
        }
    }
    Ok(SambeMatrix {
        k_max,
        l_max,
        matrix: h,
    })
}

/// One Floquet state of the Sambe spectrum with its basis statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericLevel {
    /// Quasienergy folded into the requested zone.
    pub value: f64,
    /// Mean Fourier index ⟨l⟩.
    pub mean_l: f64,
    /// Mean Fock number ⟨K⟩.
    pub mean_k: f64,
    /// Weight on ↑.
    pub up_weight: f64,
    /// Weight on the outermost l or K slices.
    pub boundary_weight: f64,
}

/// Maps `value` into [center − ω_ex/2, center + ω_ex/2).
pub fn fold(value: f64, center: f64, omega_ex: f64) -> f64 {
    value - omega_ex * ((value - center + 0.5 * omega_ex) / omega_ex).floor()
}

/// Distance between two quasienergies modulo ω_ex.
pub fn zone_distance(a: f64, b: f64, omega_ex: f64) -> f64 {
    fold(a - b, 0.0, omega_ex).abs()
}

pub fn quasienergy_spectrum(params: &SystemParams, trunc: &Truncation, zone_center: f64) -> Result<Vec<NumericLevel>> {
    quasienergy_spectrum_with(params, trunc, zone_center, DEFAULT_BOUNDARY_THRESHOLD)
}

/// Quasienergies of one Floquet zone, ascending.
///
/// Every Floquet state appears in the Sambe spectrum as a ladder of replicas
/// whose ⟨l⟩ differ by integers; the replica with ⟨l⟩ ∈ [−½, ½) is kept, so
/// each physical state is counted once even where levels are degenerate.
/// States with more than `boundary_threshold` weight on the outermost slices
/// are truncation artifacts and dropped.
pub fn quasienergy_spectrum_with(
    params: &SystemParams,
    trunc: &Truncation,
    zone_center: f64,
    boundary_threshold: f64,
) -> Result<Vec<NumericLevel>> {
    let sambe = build_sambe_matrix(params, trunc)?;
    let eig = sambe.eigen()?;
    let (k_max, l_max) = (trunc.k_max, trunc.l_max);
    let nl = 2 * l_max + 1;
    let mut out = Vec::new();
    for (col, &value) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(col);
        let (mut mean_l, mut mean_k, mut up, mut boundary) = (0.0, 0.0, 0.0, 0.0);
        for (i, c) in v.iter().enumerate() {
            let w = c * c;
            let l = (i % nl) as i64 - l_max as i64;
            let k = (i / nl) % (k_max + 1);
            mean_l += w * l as f64;
            mean_k += w * k as f64;
            if i < nl * (k_max + 1) {
                up += w;
            }
            if l.unsigned_abs() as usize == l_max || k == k_max {
                boundary += w;
            }
        }
        if !(-0.5..0.5).contains(&mean_l) || boundary > boundary_threshold {
            continue;
        }
        out.push(NumericLevel {
            value: fold(value, zone_center, params.omega_ex),
            mean_l,
            mean_k,
            up_weight: up,
            boundary_weight: boundary,
        });
    }
    out.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(out)
}

/// Result of a direct propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub state_norms: Vec<f64>,
    /// Probability of ↓ (traced over the oscillator).
    pub survival: Vec<f64>,
}

/// Propagation controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Upper bound on the internal step; `None` picks 2π/(100 ω_max) with
    /// ω_max the fastest scale that does not commute with σ_x.
    pub max_step: Option<f64>,
    /// Allowed |‖ψ‖² − 1| at any grid point.
    pub drift_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            max_step: None,
            drift_tol: 1e-8,
        }
    }
}

type Matrix = Vec<Complex64>;

/// Second-order split-operator propagator for the bare (spin, Fock) basis.
///
/// For fixed σ_z the Hamiltonian is an oscillator term ΩB†B + σg(B + B†),
/// propagated exactly through its eigendecomposition, plus a scalar
/// −σ(ε + A cos ω_ex t)/2 whose phase is integrated in closed form. The
/// tunneling term −Δσ_x/2 is an exact spin rotation. Alternating the two
/// symmetrically (Strang) keeps every step unitary.
#[derive(Debug, Clone)]
pub struct Propagator {
    params: SystemParams,
    k_max: usize,
    max_step: f64,
    drift_tol: f64,
    /// Oscillator eigenbasis per spin (↑, ↓): vectors (row-major) and energies.
    modes: [(Vec<f64>, Vec<f64>); 2],
}

impl Propagator {
    pub fn new(params: &SystemParams, k_max: usize, options: EvolveOptions) -> Result<Self> {
        params.validate()?;
        if k_max == 0 {
            return Err(Error::InvalidParameter {
                name: "k_max",
                value: 0.0,
                reason: "cutoff must be at least 1",
            });
        }
        let fastest = params
            .omega_ex
            .max(params.epsilon.abs() + params.amplitude + 2.0 * params.g * ((k_max + 1) as f64).sqrt())
            .max(params.delta);
        let max_step = options.max_step.unwrap_or(std::f64::consts::TAU / (100.0 * fastest));
        if !(max_step > 0.0 && max_step.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "max_step",
                value: max_step,
                reason: "must be positive and finite",
            });
        }
        let dim = k_max + 1;
        let modes = [Spin::Up, Spin::Down].map(|spin| {
            let mut h = DMatrix::<f64>::zeros(dim, dim);
            for k in 0..dim {
                h[(k, k)] = k as f64 * params.omega;
                if k + 1 < dim {
                    let c = spin.sigma_z() * params.g * ((k + 1) as f64).sqrt();
                    h[(k, k + 1)] = c;
                    h[(k + 1, k)] = c;
                }
            }
            let eig = h.symmetric_eigen();
            let vecs = (0..dim)
                .flat_map(|r| (0..dim).map(move |c| (r, c)))
                .map(|(r, c)| eig.eigenvectors[(r, c)])
                .collect();
            (vecs, eig.eigenvalues.iter().copied().collect())
        });
        Ok(Self {
            params: *params,
            k_max,
            max_step,
            drift_tol: options.drift_tol,
            modes,
        })
    }

    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    /// e^{−i h_σ τ} for both spins, as dense row-major matrices.
    fn oscillator_steps(&self, tau: f64) -> [Matrix; 2] {
        let dim = self.k_max + 1;
        [0, 1].map(|s| {
            let (v, e) = &self.modes[s];
            let phases: Vec<Complex64> = e.iter().map(|&x| Complex64::from_polar(1.0, -x * tau)).collect();
            let mut u = vec![Complex64::new(0.0, 0.0); dim * dim];
            for r in 0..dim {
                for c in 0..dim {
                    u[r * dim + c] = (0..dim).map(|q| phases[q] * (v[r * dim + q] * v[c * dim + q])).sum();
                }
            }
            u
        })
    }

    /// Diagonal part from `ta` to `tb` using the precomputed oscillator step.
    fn z_step(&self, psi: &mut [Complex64], scratch: &mut [Complex64], u: &[Matrix; 2], ta: f64, tb: f64) {
        let dim = self.k_max + 1;
        let p = &self.params;
        let drive = p.amplitude / p.omega_ex * ((p.omega_ex * tb).sin() - (p.omega_ex * ta).sin());
        for (s, spin) in [Spin::Up, Spin::Down].into_iter().enumerate() {
            let phase = Complex64::from_polar(1.0, 0.5 * spin.sigma_z() * (p.epsilon * (tb - ta) + drive));
            let block = &mut psi[s * dim..(s + 1) * dim];
            let m = &u[s];
            for (r, out) in scratch.iter_mut().enumerate().take(dim) {
                let row = &m[r * dim..(r + 1) * dim];
                *out = phase * row.iter().zip(block.iter()).map(|(a, b)| a * b).sum::<Complex64>();
            }
            block.copy_from_slice(&scratch[..dim]);
        }
    }

    /// e^{iΔτσ_x/2}.
    fn x_step(&self, psi: &mut [Complex64], tau: f64) {
        let dim = self.k_max + 1;
        let (c, s) = (
            (0.5 * self.params.delta * tau).cos(),
            (0.5 * self.params.delta * tau).sin(),
        );
        let is = Complex64::new(0.0, s);
        let (up, down) = psi.split_at_mut(dim);
        for (a, b) in up.iter_mut().zip(down.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = x * c + is * y;
            *b = is * x + y * c;
        }
    }

    /// Propagates `initial` (ordered (spin, K), ↑ first) over `t_grid`.
    pub fn run(&self, initial: &[Complex64], t_grid: &[f64]) -> Result<EvolutionResult> {
        let dim = self.k_max + 1;
        if initial.len() != 2 * dim {
            return Err(Error::Domain(format!(
                "initial state has {} components, expected {}",
                initial.len(),
                2 * dim
            )));
        }
        let norm0: f64 = initial.iter().map(|c| c.norm_sqr()).sum();
        if (norm0 - 1.0).abs() > self.drift_tol {
            return Err(Error::Domain(format!("initial state not normalized: ‖ψ‖² = {norm0}")));
        }
        check_grid(t_grid)?;

        let mut psi = initial.to_vec();
        let mut scratch = vec![Complex64::new(0.0, 0.0); dim];
        let mut cached: Option<(u64, [Matrix; 2], [Matrix; 2])> = None;
        let mut out = EvolutionResult {
            times: Vec::with_capacity(t_grid.len()),
            state_norms: Vec::with_capacity(t_grid.len()),
            survival: Vec::with_capacity(t_grid.len()),
        };
        let record = |psi: &[Complex64], t: f64, out: &mut EvolutionResult| -> Result<()> {
            let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
            if (norm - 1.0).abs() > self.drift_tol {
                return Err(Error::StepSize { drift: norm - 1.0 });
            }
            out.times.push(t);
            out.state_norms.push(norm);
            out.survival.push(psi[dim..].iter().map(|c| c.norm_sqr()).sum());
            Ok(())
        };
        record(&psi, t_grid[0], &mut out)?;

        for w in t_grid.windows(2) {
            let (ta, tb) = (w[0], w[1]);
            let steps = ((tb - ta) / self.max_step).ceil().max(1.0) as usize;
            let h = (tb - ta) / steps as f64;
            let fresh = !matches!(&cached, Some((bits, _, _)) if *bits == h.to_bits());
            if fresh {
                cached = Some((h.to_bits(), self.oscillator_steps(0.5 * h), self.oscillator_steps(h)));
            }
            let (_, half, full) = cached.as_ref().expect("propagators cached above");
            // Adjacent half steps of the diagonal part are merged.
            self.z_step(&mut psi, &mut scratch, half, ta, ta + 0.5 * h);
            for j in 0..steps {
                self.x_step(&mut psi, h);
                let t0 = ta + (j as f64 + 0.5) * h;
                if j + 1 < steps {
                    self.z_step(&mut psi, &mut scratch, full, t0, t0 + h);
                } else {
                    self.z_step(&mut psi, &mut scratch, half, t0, tb);
                }
            }
            record(&psi, tb, &mut out)?;
        }
        Ok(out)
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid[0] != 0.0 {
        return Err(Error::Domain("time grid must start at 0".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::Domain("time grid must be strictly increasing and finite".into()));
    }
    Ok(())
}

/// Propagates one initial state with default step control.
pub fn evolve(
    params: &SystemParams,
    initial: &[Complex64],
    t_grid: &[f64],
    trunc: &Truncation,
) -> Result<EvolutionResult> {
    Propagator::new(params, trunc.k_max, EvolveOptions::default())?.run(initial, t_grid)
}

/// ↓ ⊗ |K⟩ in the (spin, Fock) basis.
pub fn fock_down(k: usize, k_max: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); 2 * (k_max + 1)];
    v[k_max + 1 + k] = Complex64::new(1.0, 0.0);
    v
}

pub fn survival_numeric(params: &SystemParams, theta: f64, t_grid: &[f64], trunc: &Truncation) -> Result<TimeSeries> {
    survival_numeric_with(
        params,
        theta,
        t_grid,
        trunc,
        EvolveOptions::default(),
        Execution::default(),
    )
}

/// Thermally averaged survival probability: ↓ ⊗ |K⟩ propagated for every K
/// up to the thermal cutoff and averaged with the (renormalized) Boltzmann
/// weights in fixed order.
pub fn survival_numeric_with(
    params: &SystemParams,
    theta: f64,
    t_grid: &[f64],
    trunc: &Truncation,
    options: EvolveOptions,
    exec: Execution,
) -> Result<TimeSeries> {
    let weights = thermal_weights(theta, trunc.k_max)?;
    let count = thermal_cutoff(&weights);
    let kept: f64 = weights[..count].iter().sum();
    let prop = Propagator::new(params, trunc.k_max, options)?;
    let fock: Vec<usize> = (0..count).collect();
    let runs = par::try_map(exec, &fock, |&k| prop.run(&fock_down(k, trunc.k_max), t_grid))?;
    let mut values = vec![0.0; t_grid.len()];
    for (run, w) in runs.iter().zip(&weights) {
        for (v, s) in values.iter_mut().zip(&run.survival) {
            *v += w / kept * s;
        }
    }
    Ok(TimeSeries {
        times: t_grid.to_vec(),
        values,
    })
}
