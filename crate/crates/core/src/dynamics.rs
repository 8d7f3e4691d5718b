//! Qubit dynamics from the analytic Floquet modes: thermal initial states,
//! survival probability, Fourier spectra and predicted peak positions.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{resonance_detuning, ResonanceIndex, Spin, SystemParams, Truncation};
use crate::specialfns::displacement_overlap;
use crate::vanvleck::{Branch, FloquetState, Order, VanVleck};

/// Thermal states are cut once the neglected Boltzmann weight drops below this.
pub const THERMAL_TAIL: f64 = 1e-10;

/// Samples of the default time grid.
pub const DEFAULT_SAMPLES: usize = 4096;

/// Periods of the slowest predicted frequency spanned by the default grid.
pub const DEFAULT_PERIODS: f64 = 50.0;

/// Leakage of the initial state out of the kept manifold that is tolerated.
const MAX_LEAKAGE: f64 = 0.05;

/// Completeness demanded of the displaced-Fock expansions.
const EXPANSION_TAIL: f64 = 1e-13;

const FOCK_CAP: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    /// Sampling step; fails unless the grid is uniform with at least two points.
    pub fn spacing(&self) -> Result<f64> {
        if self.times.len() != self.values.len() {
            return Err(Error::Domain("times and values differ in length".into()));
        }
        if self.times.len() < 2 {
            return Err(Error::Domain("need at least two samples".into()));
        }
        let n = self.times.len();
        let dt = (self.times[n - 1] - self.times[0]) / (n - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Domain("time grid is not increasing".into()));
        }
        let uniform = self
            .times
            .iter()
            .enumerate()
            .all(|(i, &t)| (t - self.times[0] - i as f64 * dt).abs() <= 1e-9 * dt * n as f64);
        if !uniform {
            return Err(Error::Domain("time grid is not uniform".into()));
        }
        Ok(dt)
    }
}

/// `samples` points t_j = j·duration/samples, so that `duration` is the
/// span the discrete Fourier transform treats as one period.
pub fn uniform_grid(duration: f64, samples: usize) -> Result<Vec<f64>> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::Domain(format!("duration must be positive, got {duration}")));
    }
    if samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let dt = duration / samples as f64;
    Ok((0..samples).map(|j| j as f64 * dt).collect())
}

/// Boltzmann weights p_K ∝ e^{−Kθ} for K = 0..=k_max with θ = Ω/(k_B T).
pub fn thermal_weights(theta: f64, k_max: usize) -> Result<Vec<f64>> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!(
            "inverse temperature must be positive, got {theta}"
        )));
    }
    let raw: Vec<f64> = (0..=k_max)
        .map(|k| if k == 0 { 1.0 } else { (-(k as f64) * theta).exp() })
        .collect();
    let z: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / z).collect())
}

/// Number of leading weights needed to reach 1 − [`THERMAL_TAIL`].
pub fn thermal_cutoff(weights: &[f64]) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= 1.0 - THERMAL_TAIL {
            return i + 1;
        }
    }
    weights.len()
}

/// Doublet (m, L) closest to resonance at the current bias, |L| ≤ `l_max`;
/// ties go to the smaller |L|.
pub fn nearest_resonance(params: &SystemParams, l_max: usize) -> (i64, i64) {
    let mut best = (0, 0, f64::INFINITY);
    for l in (0..=l_max as i64).flat_map(|l| if l == 0 { vec![0] } else { vec![l, -l] }) {
        let m = ((params.epsilon + l as f64 * params.omega) / params.omega_ex).round() as i64;
        let d = resonance_detuning(params, m, l).abs();
        if d < best.2 - 1e-12 * params.omega_ex {
            best = (m, l, d);
        }
    }
    (best.0, best.1)
}

/// Rejects a manifold whose resonance lies more than a quarter of the
/// smaller frequency away from the bias.
fn check_manifold(params: &SystemParams, m: i64, l: i64) -> Result<()> {
    let detuning = resonance_detuning(params, m, l);
    let limit = 0.25 * params.omega_ex.min(params.omega);
    if detuning.abs() > limit {
        return Err(Error::Configuration(format!(
            "bias is {detuning} away from the (m, L) = ({m}, {l}) resonance; pick the resonant manifold"
        )));
    }
    Ok(())
}

/// Analytic survival probability restricted to one resonant manifold.
///
/// The initial state ↓ ⊗ ρ_osc is expanded in the Floquet modes of the
/// (m, L) family at t = 0; each mode then only acquires its quasienergy
/// phase. All ↓ components of the family share one Fourier profile, which
/// therefore factors out of the ↓ projection.
#[derive(Debug, Clone)]
pub struct AnalyticDynamics {
    params: SystemParams,
    weights: Vec<f64>,
    energies: Vec<f64>,
    /// Physical ↓ components of every mode at t = 0, one row per mode.
    down: Vec<Vec<Complex64>>,
    /// Expansion coefficients per initial Fock state, one row per state.
    amplitudes: Vec<Vec<Complex64>>,
    /// Fourier profile of the ↓ components, normalised to unit sum.
    profile: Vec<Complex64>,
    l_max: usize,
}

impl AnalyticDynamics {
    pub fn new(params: &SystemParams, theta: f64, trunc: &Truncation, m: i64, l: i64) -> Result<Self> {
        params.validate()?;
        trunc.validate()?;
        check_manifold(params, m, l)?;
        let all = thermal_weights(theta, trunc.k_max)?;
        let count = thermal_cutoff(&all);
        let kept: f64 = all[..count].iter().sum();
        let weights: Vec<f64> = all[..count].iter().map(|w| w / kept).collect();

        let lambda = params.displacement();
        let base = ResonanceIndex::new(m, l, 0, l.unsigned_abs() as usize).normalized()?;
        let shift = base.l_usize();
        let k_label = label_cutoff(&weights, lambda)?;
        let k_fock = fock_cutoff(k_label + shift, lambda)?;
        let vv = VanVleck::new(*params, trunc.with_k_max(k_fock))?;

        let mut modes: Vec<(ResonanceIndex, Branch)> = (0..shift)
            .map(|k| (ResonanceIndex { k, ..base }, Branch::Uncoupled))
            .collect();
        for k in 0..=k_label {
            for br in [Branch::Minus, Branch::Plus] {
                modes.push((ResonanceIndex { k, ..base }, br));
            }
        }
        let states: Vec<FloquetState> = modes
            .iter()
            .map(|&(idx, br)| vv.floquet_mode(idx, br, 0.0))
            .collect::<Result<_>>()?;

        let nl = 2 * trunc.l_max + 1;
        let down_rows = |s: &FloquetState| -> Vec<Vec<Complex64>> {
            (0..=k_fock)
                .map(|k| {
                    let at = FloquetState::offset(k_fock, trunc.l_max, Spin::Down, k, -(trunc.l_max as i64));
                    s.coeffs[at..at + nl].to_vec()
                })
                .collect()
        };
        let mut profile = None;
        let mut down = Vec::with_capacity(states.len());
        for s in &states {
            let rows = down_rows(s);
            let phys: Vec<Complex64> = rows.iter().map(|r| r.iter().sum()).collect();
            if profile.is_none() {
                if let Some((k, sum)) = phys
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                    .filter(|(_, c)| c.norm() > 1e-3)
                {
                    profile = Some(rows[k].iter().map(|c| c / sum).collect::<Vec<_>>());
                }
            }
            down.push(phys);
        }
        let profile = profile.ok_or_else(|| Error::Configuration("manifold has no spin-down component".into()))?;

        let mut amplitudes = Vec::with_capacity(weights.len());
        for j in 0..weights.len() {
            let a: Vec<Complex64> = down.iter().map(|d| d[j].conj()).collect();
            let captured: f64 = a.iter().map(|c| c.norm_sqr()).sum();
            if captured < 1.0 - MAX_LEAKAGE {
                return Err(Error::Truncation {
                    cutoff: "k_max",
                    norm: captured,
                });
            }
            amplitudes.push(a);
        }
        Ok(Self {
            params: *params,
            weights,
            energies: states.iter().map(|s| s.quasienergy).collect(),
            down,
            amplitudes,
            profile,
            l_max: trunc.l_max,
        })
    }

    /// Number of Floquet modes in the expansion.
    pub fn mode_count(&self) -> usize {
        self.energies.len()
    }

    pub fn probability(&self, t: f64) -> f64 {
        let w = self.params.omega_ex;
        let fourier: Complex64 = self
            .profile
            .iter()
            .enumerate()
            .map(|(i, h)| h * Complex64::from_polar(1.0, -((i as i64 - self.l_max as i64) as f64) * w * t))
            .sum();
        let phases: Vec<Complex64> = self
            .energies
            .iter()
            .map(|e| Complex64::from_polar(1.0, -e * t))
            .collect();
        let dim = self.down[0].len();
        let mut total = 0.0;
        for (p, a) in self.weights.iter().zip(&self.amplitudes) {
            let mut acc = 0.0;
            for k in 0..dim {
                let psi: Complex64 = a
                    .iter()
                    .zip(&phases)
                    .zip(&self.down)
                    .map(|((a, ph), d)| a * ph * d[k])
                    .sum();
                acc += psi.norm_sqr();
            }
            total += p * acc;
        }
        total * fourier.norm_sqr()
    }

    pub fn survival(&self, t_grid: &[f64]) -> Result<TimeSeries> {
        let mut values = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            let p = self.probability(t);
            if !(-1e-6..=1.0 + 1e-6).contains(&p) {
                return Err(Error::ProbabilityRange { time: t, value: p });
            }
            values.push(p);
        }
        Ok(TimeSeries {
            times: t_grid.to_vec(),
            values,
        })
    }
}

/// Smallest label range capturing all but [`EXPANSION_TAIL`] of the thermal
/// initial state in the ↓ displaced basis.
fn label_cutoff(weights: &[f64], lambda: f64) -> Result<usize> {
    let mut captured = 0.0;
    for k in 0..=FOCK_CAP {
        captured += weights
            .iter()
            .enumerate()
            .map(|(j, p)| p * displacement_overlap(j, k, lambda).powi(2))
            .sum::<f64>();
        if k + 1 >= weights.len() && captured >= 1.0 - EXPANSION_TAIL {
            return Ok(k);
        }
    }
    Err(Error::Truncation {
        cutoff: "k_max",
        norm: captured,
    })
}

/// Smallest Fock cutoff that holds the displaced state with label `top`.
fn fock_cutoff(top: usize, lambda: f64) -> Result<usize> {
    let mut captured = 0.0;
    for k in 0..=FOCK_CAP {
        captured += displacement_overlap(k, top, lambda).powi(2);
        if k >= top && captured >= 1.0 - EXPANSION_TAIL {
            return Ok(k.max(1));
        }
    }
    Err(Error::Truncation {
        cutoff: "k_max",
        norm: captured,
    })
}

/// P_{↓→↓}(t) from the Floquet modes of the (m, L) manifold.
pub fn survival_analytic(
    params: &SystemParams,
    theta: f64,
    t_grid: &[f64],
    trunc: &Truncation,
    m: i64,
    l: i64,
) -> Result<TimeSeries> {
    AnalyticDynamics::new(params, theta, trunc, m, l)?.survival(t_grid)
}

/// Taper applied before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
    Blackman,
}

impl Window {
    fn weights(self, n: usize) -> Vec<f64> {
        let x = |j: usize| TAU * j as f64 / n as f64;
        (0..n)
            .map(|j| match self {
                Window::Rectangular => 1.0,
                Window::Hann => 0.5 - 0.5 * x(j).cos(),
                Window::Blackman => 0.42 - 0.5 * x(j).cos() + 0.08 * (2.0 * x(j)).cos(),
            })
            .collect()
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
            Window::Blackman => "blackman",
        })
    }
}

/// One-sided amplitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub amps: Vec<f64>,
    pub window: Window,
    /// Bin width 2π/(N Δt).
    pub resolution: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub frequency: f64,
    pub amplitude: f64,
    pub bin: usize,
}

impl Spectrum {
    pub fn max_amplitude(&self) -> f64 {
        self.amps.iter().copied().fold(0.0, f64::max)
    }

    /// Index of the bin closest to `freq`.
    pub fn bin_of(&self, freq: f64) -> usize {
        ((freq / self.resolution).round().max(0.0) as usize).min(self.amps.len() - 1)
    }

    /// Local maxima above `relative` times the largest amplitude,
    /// strongest first.
    pub fn peaks(&self, relative: f64) -> Vec<Peak> {
        let floor = relative * self.max_amplitude();
        let a = &self.amps;
        let mut out: Vec<Peak> = (1..a.len())
            .filter(|&k| a[k] > floor && a[k] > a[k - 1] && (k + 1 == a.len() || a[k] >= a[k + 1]))
            .map(|k| Peak {
                frequency: self.freqs[k],
                amplitude: a[k],
                bin: k,
            })
            .collect();
        out.sort_by(|x, y| y.amplitude.total_cmp(&x.amplitude));
        out
    }
}

pub fn fourier_spectrum(series: &TimeSeries) -> Result<Spectrum> {
    fourier_spectrum_with(series, Window::Rectangular)
}

/// Amplitude spectrum of the mean-subtracted series: a component
/// a·cos(νt) sitting on a bin shows up with height a.
pub fn fourier_spectrum_with(series: &TimeSeries, window: Window) -> Result<Spectrum> {
    let dt = series.spacing()?;
    let n = series.values.len();
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let w = window.weights(n);
    let norm: f64 = w.iter().sum();
    let mut buf: Vec<Complex64> = series
        .values
        .iter()
        .zip(&w)
        .map(|(v, w)| Complex64::new((v - mean) * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let resolution = TAU / (n as f64 * dt);
    let bins = n / 2 + 1;
    let amps = buf[..bins]
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let twice = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
            c.norm() / norm * if twice { 2.0 } else { 1.0 }
        })
        .collect();
    Ok(Spectrum {
        freqs: (0..bins).map(|k| k as f64 * resolution).collect(),
        amps,
        window,
        resolution,
    })
}

/// A frequency expected in the survival spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedPeak {
    pub frequency: f64,
    /// Predicted cosine amplitude where the theory gives one.
    pub amplitude: Option<f64>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    /// Gap frequencies Ω^K are kept when their amplitude reaches this
    /// fraction of the strongest one.
    pub relative_threshold: f64,
    /// (K − K')Ω terms need both Boltzmann weights above this.
    pub thermal_threshold: f64,
    /// Relative tolerance for merging equal frequencies.
    pub merge_tol: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            relative_threshold: 0.02,
            thermal_threshold: 0.02,
            merge_tol: 1e-9,
        }
    }
}

/// Peak frequencies at the nearest resonance (|L| ≤ 2) with default options.
pub fn predict_peaks(
    params: &SystemParams,
    trunc: &Truncation,
    theta: f64,
    k_max: usize,
) -> Result<Vec<PredictedPeak>> {
    let (m, l) = nearest_resonance(params, 2);
    predict_peaks_with(params, trunc, theta, k_max, (m, l), PeakOptions::default())
}

/// Frequencies of the survival probability: the doublet gaps Ω^K weighted by
/// ½ w_K' sin²2θ_K, where w_K' is the thermal weight of the ↓ displaced state
/// the doublet contains, plus (K − K')Ω and its sums with Ω^K for pairs of
/// thermally populated states. Equal frequencies are merged into one entry
/// labelled e.g. `Omega^0=Omega^2`; the list is sorted by frequency.
pub fn predict_peaks_with(
    params: &SystemParams,
    trunc: &Truncation,
    theta: f64,
    k_max: usize,
    (m, l): (i64, i64),
    options: PeakOptions,
) -> Result<Vec<PredictedPeak>> {
    check_manifold(params, m, l)?;
    let weights = thermal_weights(theta, trunc.k_max.max(k_max))?;
    let lambda = params.displacement();
    let vv = VanVleck::new(*params, *trunc)?;
    let mut raw: Vec<(f64, Option<f64>, String)> = Vec::new();
    for k_down in 0..=k_max {
        let k = k_down as i64 - l;
        if k < 0 {
            continue;
        }
        let idx = ResonanceIndex::new(m, l, 0, k as usize);
        let block = vv.effective_block(idx)?;
        let gap = vv.dressed_gap(idx, Order::Second)?;
        let mix = if gap > 0.0 {
            (2.0 * block.coupling / gap).powi(2)
        } else {
            0.0
        };
        let w: f64 = weights
            .iter()
            .enumerate()
            .map(|(j, p)| p * displacement_overlap(j, k_down, lambda).powi(2))
            .sum();
        raw.push((gap, Some(0.5 * w * mix), format!("Omega^{k}")));
    }

    let populated: Vec<usize> = (0..weights.len())
        .filter(|&k| weights[k] > options.thermal_threshold)
        .collect();
    for (i, &a) in populated.iter().enumerate() {
        for &b in &populated[i + 1..] {
            let f = (b - a) as f64 * params.omega;
            raw.push((f, None, format!("({b}-{a})Omega")));
            for &k in &[a, b] {
                if let Some((gap, _, label)) = raw.iter().find(|r| r.2 == format!("Omega^{k}")).cloned() {
                    raw.push((gap + f, None, format!("{label}+({b}-{a})Omega")));
                }
            }
        }
    }

    let scale = params.omega.max(params.omega_ex);
    raw.retain(|r| r.0 > options.merge_tol * scale);
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<PredictedPeak> = Vec::new();
    for (f, amp, label) in raw {
        match merged.last_mut() {
            Some(last) if (f - last.frequency).abs() <= options.merge_tol * f.max(last.frequency) => {
                last.label = format!("{}={}", last.label, label);
                last.amplitude = match (last.amplitude, amp) {
                    (Some(x), Some(y)) => Some(x + y),
                    (x, y) => x.or(y),
                };
            }
            _ => merged.push(PredictedPeak {
                frequency: f,
                amplitude: amp,
                label,
            }),
        }
    }
    let strongest = merged.iter().filter_map(|p| p.amplitude).fold(0.0, f64::max);
    merged.retain(|p| {
        p.amplitude
            .is_none_or(|a| a >= options.relative_threshold * strongest && a > 0.0)
    });
    Ok(merged)
}

/// Default grid: [`DEFAULT_SAMPLES`] points over [`DEFAULT_PERIODS`] periods of
/// the slowest predicted frequency, or 500/Ω when nothing oscillates.
pub fn default_time_grid(
    params: &SystemParams,
    trunc: &Truncation,
    theta: f64,
    (m, l): (i64, i64),
) -> Result<Vec<f64>> {
    let peaks = predict_peaks_with(params, trunc, theta, 8, (m, l), PeakOptions::default())?;
    let slowest = peaks.iter().map(|p| p.frequency).fold(f64::INFINITY, f64::min);
    let duration = if slowest.is_finite() {
        DEFAULT_PERIODS * TAU / slowest
    } else {
        500.0 / params.omega
    };
    uniform_grid(duration, DEFAULT_SAMPLES)
}

/// Centred moving average over `width` samples (shrinking at the edges).
pub fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}
