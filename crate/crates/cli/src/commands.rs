use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qosc_core::dynamics::{
    default_time_grid, fourier_spectrum_with, nearest_resonance, predict_peaks_with, survival_analytic, uniform_grid,
    PeakOptions,
};
use qosc_core::model::commensurability_check;
use qosc_core::numeric::{fold, quasienergy_spectrum_with, survival_numeric_with, EvolveOptions};
use qosc_core::specialfns::{dressed_delta, laguerre_zeros};
use qosc_core::vanvleck::{delta0_quasienergy, VanVleck};
use qosc_core::{par, Execution, ResonanceIndex, Spin, SystemParams};

use crate::config::ScenarioConfig;
use crate::output::{Table, BUILD_ID};
use crate::CliError;

/// Largest denominator tried when testing Ω/ω_ex for rationality.
const COMMENSURABILITY_DENOMINATOR: u64 = 1000;

fn commensurability_note(p: &SystemParams) -> Option<String> {
    commensurability_check(p.omega, p.omega_ex, COMMENSURABILITY_DENOMINATOR).map(|(j, n)| {
        format!(
            "warning: Omega/omega_ex = {j}/{n} is commensurate; exact degeneracies p*omega_ex = P*Omega \
             enter the second-order sums only at |p| >= {j}, |P| >= {n} (orders >= {})",
            j.min(n)
        )
    })
}

/// One row of levels: analytic, numeric, Δ = 0 reference, each folded into
/// the zone centred at 0 and sorted. Analytic failures become NaN with a
/// warning.
fn level_row(cfg: &ScenarioConfig, p: &SystemParams) -> Result<(Vec<f64>, Option<String>), CliError> {
    let width = 2 * (cfg.trunc.k_max + 1);
    let w = p.omega_ex;
    let (m, l) = nearest_resonance(p, cfg.resonance_l_max);

    let analytic = VanVleck::new(*p, cfg.trunc)
        .map(|vv| vv.with_order(cfg.order))
        .and_then(|vv| vv.manifold_levels(m, l, 0));
    let (mut analytic, warning) = match analytic {
        Ok(levels) => (levels.iter().map(|x| fold(x.value, 0.0, w)).collect(), None),
        Err(e) => (
            vec![f64::NAN; width],
            Some(format!(
                "analytic levels unavailable at epsilon = {}, g = {}: {e}",
                p.epsilon, p.g
            )),
        ),
    };
    analytic.sort_by(f64::total_cmp);

    let mut numeric = vec![f64::NAN; width];
    if cfg.numeric {
        let mut levels = quasienergy_spectrum_with(p, &cfg.numeric_trunc, 0.0, cfg.boundary_threshold)?;
        levels.retain(|x| x.mean_k < cfg.trunc.k_max as f64 + 0.5);
        levels.sort_by(|a, b| a.mean_k.total_cmp(&b.mean_k));
        levels.truncate(width);
        let mut values: Vec<f64> = levels.iter().map(|x| x.value).collect();
        values.sort_by(f64::total_cmp);
        numeric[..values.len()].copy_from_slice(&values);
    }

    let mut reference: Vec<f64> = (0..=cfg.trunc.k_max)
        .flat_map(|k| {
            [
                delta0_quasienergy(Spin::Up, 0, k, p),
                delta0_quasienergy(Spin::Down, m, k, p),
            ]
        })
        .map(|x| fold(x, 0.0, w))
        .collect();
    reference.sort_by(f64::total_cmp);

    let mut row = analytic;
    row.extend(numeric);
    row.extend(reference);
    Ok((row, warning))
}

fn level_columns(k_max: usize) -> Vec<String> {
    let width = 2 * (k_max + 1);
    ["analytic", "numeric", "reference"]
        .iter()
        .flat_map(|kind| (0..width).map(move |i| format!("{kind}_{i}")))
        .collect()
}

fn collect_rows(
    cfg: &ScenarioConfig,
    exec: Execution,
    points: &[SystemParams],
    lead: impl Fn(&SystemParams) -> Vec<f64>,
    table: &mut Table,
) -> Result<usize, CliError> {
    let rows = par::try_map(exec, points, |p| level_row(cfg, p))?;
    let mut warnings = 0;
    for (p, (levels, warning)) in points.iter().zip(rows) {
        if let Some(w) = warning {
            eprintln!("warning: {w}");
            warnings += 1;
        }
        let mut row = lead(p);
        row.extend(levels);
        table.push(row);
    }
    Ok(warnings)
}

pub fn spectrum_eps(cfg: &ScenarioConfig, exec: Execution, out: &Path) -> Result<(), CliError> {
    let mut columns = vec!["epsilon".to_string()];
    columns.extend(level_columns(cfg.trunc.k_max));
    let mut table = Table::new(columns);
    if let Some(note) = commensurability_note(&cfg.params) {
        eprintln!("{note}");
        table.meta.push(note);
    }
    table
        .meta
        .push("levels folded into [-omega_ex/2, omega_ex/2) and sorted per row".into());
    let points: Vec<SystemParams> = cfg
        .sweep
        .points()
        .into_iter()
        .map(|e| cfg.params.with_epsilon(e))
        .collect();
    let warnings = collect_rows(cfg, exec, &points, |p| vec![p.epsilon], &mut table)?;
    table.meta.push(format!("rows_with_analytic_failures: {warnings}"));
    table.write("spectrum-eps", cfg, out)?;
    Ok(())
}

pub fn spectrum_g(cfg: &ScenarioConfig, exec: Execution, out: &Path) -> Result<(), CliError> {
    let mut columns = vec!["amplitude".to_string(), "g".to_string()];
    columns.extend(level_columns(cfg.trunc.k_max));
    let mut table = Table::new(columns);
    if let Some(note) = commensurability_note(&cfg.params) {
        eprintln!("{note}");
        table.meta.push(note);
    }
    table
        .meta
        .push("levels folded into [-omega_ex/2, omega_ex/2) and sorted per row".into());
    let mut warnings = 0;
    for &a in &cfg.amplitudes {
        let delta0 = dressed_delta(0, cfg.params.delta, a, cfg.params.omega_ex)?;
        table.meta.push(format!("amplitude {}: Delta_0 = {}", a, delta0));
        let points: Vec<SystemParams> = cfg
            .sweep
            .points()
            .into_iter()
            .map(|g| cfg.params.with_amplitude(a).with_g(g))
            .collect();
        warnings += collect_rows(cfg, exec, &points, |p| vec![p.amplitude, p.g], &mut table)?;
    }
    table.meta.push(format!("rows_with_analytic_failures: {warnings}"));
    table.write("spectrum-g", cfg, out)?;
    Ok(())
}

pub fn gaps(cfg: &ScenarioConfig, exec: Execution, out: &Path) -> Result<(), CliError> {
    let (m, l) = nearest_resonance(&cfg.params, cfg.resonance_l_max);
    // Labels start where the ↑ state has a partner; the Laguerre index is
    // the lower of the two oscillator numbers.
    let k0 = if l < 0 { l.unsigned_abs() as usize } else { 0 };
    let mut columns = vec!["g".to_string()];
    columns.extend((0..=cfg.k_plot).map(|k| format!("Omega^{}", k + k0)));
    let mut table = Table::new(columns);
    table.meta.push(format!("manifold: m = {m}, L = {l}"));
    let omega = cfg.params.omega;
    for k in 0..=cfg.k_plot {
        for alpha in laguerre_zeros(k, l.unsigned_abs() as usize) {
            let g = 0.5 * omega * alpha.sqrt();
            if g >= cfg.sweep.start && g <= cfg.sweep.stop {
                table.meta.push(format!(
                    "laguerre_zero: K = {} alpha = {alpha:.16e} g = {g:.16e}",
                    k + k0
                ));
            }
        }
    }
    let points = cfg.sweep.points();
    let rows = par::try_map(exec, &points, |&g| -> Result<Vec<f64>, CliError> {
        let vv = VanVleck::new(cfg.params.with_g(g), cfg.trunc)?;
        let mut row = vec![g];
        for k in 0..=cfg.k_plot {
            row.push(vv.dressed_gap(ResonanceIndex::new(m, l, 0, k + k0), cfg.order)?);
        }
        Ok(row)
    })?;
    for row in rows {
        table.push(row);
    }
    table.write("gaps", cfg, out)?;
    Ok(())
}

fn spectrum_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("dynamics");
    out.with_file_name(format!("{stem}_spectrum.csv"))
}

pub fn dynamics(cfg: &ScenarioConfig, exec: Execution, out: &Path) -> Result<(), CliError> {
    let p = &cfg.params;
    let (m, l) = cfg
        .manifold
        .unwrap_or_else(|| nearest_resonance(p, cfg.resonance_l_max));
    let grid = match cfg.duration {
        Some(d) => uniform_grid(d, cfg.samples)?,
        None => default_time_grid(p, &cfg.trunc, cfg.theta, (m, l))?,
    };
    let analytic = survival_analytic(p, cfg.theta, &grid, &cfg.trunc, m, l)?;
    let numeric = if cfg.numeric {
        Some(survival_numeric_with(
            p,
            cfg.theta,
            &grid,
            &cfg.numeric_trunc,
            EvolveOptions::default(),
            exec,
        )?)
    } else {
        None
    };
    let peaks = predict_peaks_with(
        p,
        &cfg.trunc,
        cfg.theta,
        cfg.trunc.k_max,
        (m, l),
        PeakOptions::default(),
    )?;

    let mut columns = vec!["t".to_string(), "P_analytic".to_string()];
    if numeric.is_some() {
        columns.push("P_numeric".into());
    }
    let mut series = Table::new(columns);
    let mut meta = vec![format!("manifold: m = {m}, L = {l}"), format!("theta: {}", cfg.theta)];
    for peak in &peaks {
        let amp = peak.amplitude.map_or("NaN".to_string(), |a| format!("{a:.16e}"));
        meta.push(format!(
            "predicted_peak: {} frequency = {:.16e} amplitude = {amp}",
            peak.label, peak.frequency
        ));
    }
    series.meta = meta.clone();
    for (i, t) in grid.iter().enumerate() {
        let mut row = vec![*t, analytic.values[i]];
        if let Some(n) = &numeric {
            row.push(n.values[i]);
        }
        series.push(row);
    }

    let spec_a = fourier_spectrum_with(&analytic, cfg.window)?;
    let spec_n = numeric
        .as_ref()
        .map(|n| fourier_spectrum_with(n, cfg.window))
        .transpose()?;
    let mut columns = vec!["nu".to_string(), "F_analytic".to_string()];
    if spec_n.is_some() {
        columns.push("F_numeric".into());
    }
    let mut spectrum = Table::new(columns);
    spectrum.meta = meta;
    spectrum.meta.push(format!("window: {}", cfg.window));
    spectrum.meta.push(format!("resolution: {:.16e}", spec_a.resolution));
    for (name, s) in [("analytic", Some(&spec_a)), ("numeric", spec_n.as_ref())] {
        if let Some(s) = s {
            for pk in s.peaks(0.02).iter().take(8) {
                spectrum.meta.push(format!(
                    "{name}_peak: frequency = {:.16e} amplitude = {:.16e}",
                    pk.frequency, pk.amplitude
                ));
            }
        }
    }
    for k in 0..spec_a.freqs.len() {
        let mut row = vec![spec_a.freqs[k], spec_a.amps[k]];
        if let Some(s) = &spec_n {
            row.push(s.amps[k]);
        }
        spectrum.push(row);
    }
    series.write("dynamics", cfg, out)?;
    spectrum.write("dynamics", cfg, &spectrum_path(out))?;
    Ok(())
}

fn max_delta(a: &[f64], b: &[f64], omega_ex: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| qosc_core::numeric::zone_distance(*x, *y, omega_ex))
        .fold(0.0, f64::max)
}

/// Human-readable report on units, commensurability and cutoff convergence.
pub fn validate(cfg: &ScenarioConfig) -> Result<String, CliError> {
    let p = &cfg.params;
    let mut r = String::new();
    let _ = writeln!(r, "qosc validate (build {BUILD_ID})");
    let _ = writeln!(r, "units: frequencies in {u}, times in 1/{u}", u = cfg.units);
    let _ = writeln!(
        r,
        "parameters: epsilon = {}, delta = {}, g = {}, Omega = {}, A = {}, omega_ex = {}",
        p.epsilon, p.delta, p.g, p.omega, p.amplitude, p.omega_ex
    );
    let delta0 = dressed_delta(0, p.delta, p.amplitude, p.omega_ex)?;
    let _ = writeln!(
        r,
        "derived: alpha = {}, A/omega_ex = {}, Delta_0 = {}",
        p.alpha(),
        p.drive_ratio(),
        delta0
    );
    match commensurability_note(p) {
        Some(note) => {
            let _ = writeln!(r, "commensurability: {note}");
        }
        None => {
            let _ = writeln!(
                r,
                "commensurability: ok (Omega/omega_ex has no rational form with denominator <= {COMMENSURABILITY_DENOMINATOR})"
            );
        }
    }

    let (m, l) = nearest_resonance(p, cfg.resonance_l_max);
    let _ = writeln!(r, "manifold: m = {m}, L = {l}");
    let levels = |trunc| -> Result<Vec<f64>, CliError> {
        let vv = VanVleck::new(*p, trunc)?.with_order(cfg.order);
        Ok(vv.manifold_levels(m, l, 0)?.iter().map(|x| x.value).collect())
    };
    let base = cfg.trunc;
    let doubled = qosc_core::Truncation {
        p_max: 2 * base.p_max,
        big_p_max: 2 * base.big_p_max,
        ..base
    };
    match (levels(base), levels(doubled)) {
        (Ok(a), Ok(b)) => {
            let _ = writeln!(
                r,
                "convergence: analytic levels, p_max and P_max doubled: max change {:e}",
                max_delta(&a, &b, p.omega_ex)
            );
        }
        (Err(e), _) | (_, Err(e)) => {
            let _ = writeln!(r, "convergence: analytic levels unavailable: {e}");
        }
    }

    if cfg.numeric {
        let nt = cfg.numeric_trunc;
        let a = quasienergy_spectrum_with(p, &nt, 0.0, cfg.boundary_threshold)?;
        let b = quasienergy_spectrum_with(p, &nt.with_l_max(2 * nt.l_max), 0.0, cfg.boundary_threshold)?;
        let worst = a
            .iter()
            .map(|x| {
                b.iter()
                    .map(|y| qosc_core::numeric::zone_distance(x.value, y.value, p.omega_ex))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        let _ = writeln!(
            r,
            "convergence: numeric levels, l_max_numeric {} -> {}: max change {:e} ({} interior levels)",
            nt.l_max,
            2 * nt.l_max,
            worst,
            a.len()
        );
    }
    Ok(r)
}
