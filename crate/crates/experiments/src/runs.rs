//! The experiment implementations behind the CLI subcommands.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use stdmap_core::classical::{
    find_primary_homoclinic, k_break, lobe_area, lobe_area_estimate, stability_exponent,
    trace_manifold, Branch, ClassicalError, HomoclinicFixtures, HomoclinicSearchConfig,
    ManifoldConfig, MapParams, PhasePoint, Side, TWO_PI,
};
use stdmap_core::quantum::{
    build_propagator, diagonalize, husimi, ipr, ipr_integrable_limit, resonance_state,
    spectral_decomposition, QuantumError, SpectralDecomposition, TorusHilbert,
};
use stdmap_core::semiclassics::special::{eta, eta_oracle, ftilde, ftilde_oracle, ETA_ORACLE_MAX_X};
use stdmap_core::semiclassics::{
    bohr_sommerfeld_phase, solve_quantization, unwrap_near, HomoclinicInvariants,
    SemiclassicsError,
};

use crate::config::{running_average, ScanConfig};
use crate::manifest::RunManifest;
use crate::plot::{heatmap_png, SvgPlot};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Semiclassics(#[from] SemiclassicsError),
    #[error(transparent)]
    Special(#[from] stdmap_core::semiclassics::special::SpecialError),
    #[error("image encoding failed: {0}")]
    Image(#[from] image::ImageError),
    #[error("only {found} states exceed the intensity floor {floor:.1e}; need at least 5")]
    TooFewStates { found: usize, floor: f64 },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Diagonalizes (N, k) and attaches resonance-state intensities.
fn spectrum_at(n: usize, k: f64) -> Result<SpectralDecomposition, RunError> {
    let space = TorusHilbert::new(n)?;
    let u = build_propagator(space, k);
    let mut decomp = diagonalize(&u)?;
    let z0 = resonance_state(space, k)?;
    spectral_decomposition(&mut decomp, &z0)?;
    Ok(decomp)
}

fn write_spectrum_rows(
    w: &mut csv::Writer<std::fs::File>,
    k: f64,
    n: usize,
    decomp: &SpectralDecomposition,
) -> Result<(), RunError> {
    let intensities = decomp.intensities.as_ref().expect("intensities attached");
    for (i, (&phi, &c2)) in decomp.eigenphases.iter().zip(intensities).enumerate() {
        w.write_record(&[
            format!("{k:.10}"),
            n.to_string(),
            i.to_string(),
            format!("{phi:.12}"),
            format!("{c2:.6e}"),
        ])
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    }
    Ok(())
}

/// Correlation diagram: eigenphases vs k with resonance intensities.
pub fn correlation_scan(
    cfg: &ScanConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<(), RunError> {
    let n = cfg.n;
    let grid = cfg.k_grid();
    let results: Vec<(f64, Result<SpectralDecomposition, String>)> = grid
        .par_iter()
        .map(|&k| (k, spectrum_at(n, k).map_err(|e| e.to_string())))
        .collect();

    let csv_path = out.join("correlation.csv");
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    writer
        .write_record(["k", "N", "index", "eigenphase", "intensity"])
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;

    let mut gray = Vec::new();
    let mut bright = Vec::new();
    for (k, outcome) in &results {
        match outcome {
            Ok(decomp) => {
                manifest.task(&format!("correlation k={k:.4}"), || Ok::<_, RunError>(()));
                write_spectrum_rows(&mut writer, *k, n, decomp)?;
                let intensities = decomp.intensities.as_ref().unwrap();
                for (&phi, &c2) in decomp.eigenphases.iter().zip(intensities) {
                    if c2 > cfg.plot_threshold {
                        bright.push((*k, phi));
                    } else if c2 > 1e-12 {
                        gray.push((*k, phi));
                    }
                }
            }
            Err(e) => {
                manifest.task(&format!("correlation k={k:.4}"), || {
                    Err::<(), _>(e.clone())
                });
            }
        }
    }
    writer
        .flush()
        .map_err(RunError::Io)?;
    manifest.add_output(&csv_path)?;

    let mut plot = SvgPlot::new(
        &format!("Eigenphase correlation diagram, N = {n}"),
        "k",
        "eigenphase",
    )
    .with_ranges((cfg.k_min, cfg.k_max), (0.0, TWO_PI));
    // Thin the background cloud for a tractable file.
    let thinned: Vec<(f64, f64)> = gray.iter().step_by(23).copied().collect();
    plot.scatter(&thinned, "#c8c8c8", 0.7);
    plot.scatter(&bright, "#cc2222", 1.6);
    let bs: Vec<(f64, f64)> = grid
        .iter()
        .map(|&k| (k, bohr_sommerfeld_phase(n, k)))
        .collect();
    // Split the phi_BS line at its 2 pi wraps.
    let mut segment: Vec<(f64, f64)> = Vec::new();
    for &point in &bs {
        if let Some(&(_, prev)) = segment.last() {
            if (point.1 - prev).abs() > std::f64::consts::PI {
                plot.line(&segment, "#2244cc", 1.0);
                segment.clear();
            }
        }
        segment.push(point);
    }
    plot.line(&segment, "#2244cc", 1.0);
    let svg_path = out.join("correlation.svg");
    plot.save(&svg_path)?;
    manifest.add_output(&svg_path)?;
    Ok(())
}

/// Single-(N,k) spectrum dump.
pub fn spectrum(
    cfg: &ScanConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<(), RunError> {
    let decomp = spectrum_at(cfg.n, cfg.k)?;
    let csv_path = out.join(format!("spectrum_N{}_k{:.4}.csv", cfg.n, cfg.k));
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    writer
        .write_record(["k", "N", "index", "eigenphase", "intensity"])
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    write_spectrum_rows(&mut writer, cfg.k, cfg.n, &decomp)?;
    writer.flush().map_err(RunError::Io)?;
    manifest.add_output(&csv_path)?;
    Ok(())
}

/// High-intensity states with unwrapped phases, sorted; returns
/// (unwrapped phase, intensity) pairs.
pub fn ladder_states(
    decomp: &SpectralDecomposition,
    n: usize,
    k: f64,
    floor: f64,
) -> Result<Vec<(f64, f64)>, RunError> {
    let intensities = decomp.intensities.as_ref().expect("intensities attached");
    let phi_bs = bohr_sommerfeld_phase(n, k);
    let mut states: Vec<(f64, f64)> = decomp
        .eigenphases
        .iter()
        .zip(intensities)
        .filter(|(_, &c2)| c2 > floor)
        .map(|(&phi, &c2)| (unwrap_near(phi, phi_bs), c2))
        .collect();
    if states.len() < 5 {
        return Err(RunError::TooFewStates {
            found: states.len(),
            floor,
        });
    }
    states.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(states)
}

/// Structure core of the ladder: background states far below the peak
/// intensity produce spurious small gaps, so restrict to states within a
/// factor 100 of the peak before merging residual doublets.
pub fn structure_core(states: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let peak = states.iter().map(|s| s.1).fold(0.0, f64::max);
    let core: Vec<(f64, f64)> = states
        .iter()
        .filter(|s| s.1 >= 1e-2 * peak)
        .copied()
        .collect();
    merge_doublets(&core)
}

/// Collapses quasi-degenerate Demkov doublets (two states straddling an
/// avoided crossing, splitting far below the ladder spacing) into their
/// intensity-weighted mean phase.
fn merge_doublets(states: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if states.len() < 3 {
        return states.to_vec();
    }
    let mut gaps: Vec<f64> = states.windows(2).map(|w| w[1].0 - w[0].0).collect();
    gaps.sort_by(f64::total_cmp);
    let median = gaps[gaps.len() / 2];
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(states.len());
    for &(phi, c2) in states {
        match merged.last_mut() {
            Some(prev) if phi - prev.0 < 0.25 * median => {
                let w = prev.1 + c2;
                prev.0 = (prev.0 * prev.1 + phi * c2) / w;
                prev.1 = w;
            }
            _ => merged.push((phi, c2)),
        }
    }
    merged
}

/// Nearest-neighbor spacings of the ladder: (midpoint phase, spacing).
pub fn ladder_spacings(states: &[(f64, f64)]) -> Vec<(f64, f64)> {
    states
        .windows(2)
        .map(|w| (0.5 * (w[0].0 + w[1].0), w[1].0 - w[0].0))
        .collect()
}

/// Parabolic interpolation of the spacing minimum through the smallest
/// point and its neighbors.
pub fn spacing_minimum(spacings: &[(f64, f64)]) -> f64 {
    let i = spacings
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap();
    if i == 0 || i + 1 >= spacings.len() {
        return spacings[i].0;
    }
    let (x0, y0) = spacings[i - 1];
    let (x1, y1) = spacings[i];
    let (x2, y2) = spacings[i + 1];
    // Vertex of the parabola through three points.
    let d0 = (x1 - x0) * (y1 - y2);
    let d2 = (x1 - x2) * (y1 - y0);
    let denom = 2.0 * (d0 - d2);
    if denom.abs() < 1e-300 {
        return x1;
    }
    x1 - ((x1 - x0) * d0 - (x1 - x2) * d2) / denom
}

/// Semiclassical quantization roots for the mean orbit at (n, k).
pub fn semiclassical_solutions(
    n: usize,
    k: f64,
    fixtures: &HomoclinicFixtures,
) -> Result<Vec<stdmap_core::semiclassics::QuantizationSolution>, RunError> {
    let params = MapParams::new(k)?;
    let (first, second) =
        find_primary_homoclinic(params, &HomoclinicSearchConfig::default(), Some(fixtures))?;
    let mean = HomoclinicInvariants::mean_pair(
        &HomoclinicInvariants::from(&first),
        &HomoclinicInvariants::from(&second),
    );
    Ok(solve_quantization(n, k, &mean, (-4.5, 4.5))?)
}

/// Spacing singularity at (N, k): unfolded spacings of the high-intensity
/// ladder with semiclassical solutions overlaid.
pub fn spacing_singularity(
    cfg: &ScanConfig,
    fixtures: &HomoclinicFixtures,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<(), RunError> {
    let (n, k) = (cfg.n, cfg.k);
    let decomp = spectrum_at(n, k)?;
    let states = structure_core(&ladder_states(&decomp, n, k, cfg.intensity_floor)?);
    let spacings = ladder_spacings(&states);

    let csv_path = out.join(format!("spacing_N{n}_k{k:.4}.csv"));
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    writer
        .write_record(["phi", "spacing"])
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    for &(phi, spacing) in &spacings {
        writer
            .write_record(&[format!("{phi:.12}"), format!("{spacing:.12}")])
            .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    }
    writer.flush().map_err(RunError::Io)?;
    manifest.add_output(&csv_path)?;

    let solutions = semiclassical_solutions(n, k, fixtures)?;
    manifest.note_provenance(
        "relevance",
        &format!("fixture values measured at k = {}", fixtures.k),
    );
    let sol_path = out.join(format!("quantization_N{n}_k{k:.4}.csv"));
    let mut writer = csv::Writer::from_path(&sol_path)
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    writer
        .write_record(["n", "label", "x", "phi"])
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    for s in &solutions {
        writer
            .write_record(&[
                s.n.to_string(),
                s.label.to_string(),
                format!("{:.12}", s.x),
                format!("{:.12}", s.phi),
            ])
            .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    }
    writer.flush().map_err(RunError::Io)?;
    manifest.add_output(&sol_path)?;

    let phi_bs = bohr_sommerfeld_phase(n, k);
    let y_max = spacings.iter().map(|s| s.1).fold(0.0, f64::max);
    let mut plot = SvgPlot::new(
        &format!("Level spacing singularity, N = {n}, k = {k}"),
        "eigenphase (unfolded)",
        "neighbor spacing",
    )
    .with_ranges(
        (states[0].0, states[states.len() - 1].0),
        (0.0, 1.1 * y_max),
    );
    plot.scatter(&spacings, "#cc2222", 2.5);
    // Semiclassical spacings from consecutive unfolded roots.
    let mut semi: Vec<(f64, f64)> = solutions
        .windows(2)
        .map(|w| {
            (
                0.5 * (w[0].phi_unfolded + w[1].phi_unfolded),
                (w[1].phi_unfolded - w[0].phi_unfolded).abs(),
            )
        })
        .collect();
    semi.sort_by(|a, b| a.0.total_cmp(&b.0));
    plot.scatter(&semi, "#2244cc", 2.0);
    plot.vline(phi_bs, "gray");
    let svg_path = out.join(format!("spacing_N{n}_k{k:.4}.svg"));
    plot.save(&svg_path)?;
    manifest.add_output(&svg_path)?;
    Ok(())
}

/// Normalized IPR collapse across N with the PR overlay.
pub fn ipr_scan(
    cfg: &ScanConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<(), RunError> {
    let grid = cfg.k_grid();
    let mut plot = SvgPlot::new(
        "IPR collapse",
        "k / k_break(N)",
        "running-averaged xi / xi_N",
    )
    .with_ranges((0.0, 1.6), (0.0, 1.6));
    let colors = ["#cc2222", "#2244cc", "#118833", "#885511"];

    for (ni, &n) in cfg.n_list.iter().enumerate() {
        let kb = k_break(n)?;
        let xis: Vec<(f64, Result<f64, String>)> = grid
            .par_iter()
            .map(|&k| {
                let xi = spectrum_at(n, k)
                    .map(|d| ipr(d.intensities.as_ref().unwrap()))
                    .map_err(|e| e.to_string());
                (k, xi)
            })
            .collect();
        let mut ks = Vec::new();
        let mut values = Vec::new();
        for (k, outcome) in xis {
            match outcome {
                Ok(xi) => {
                    ks.push(k);
                    values.push(xi);
                }
                Err(e) => {
                    manifest.task(&format!("ipr N={n} k={k:.4}"), || Err::<(), _>(e));
                }
            }
        }
        manifest.task(&format!("ipr N={n}"), || Ok::<_, RunError>(()));
        let averaged = running_average(&values, cfg.window);
        let xi_n = ipr_integrable_limit(n);
        let lambda_of = |k: f64| stability_exponent(k);

        let csv_path = out.join(format!("ipr_N{n}.csv"));
        let mut writer = csv::Writer::from_path(&csv_path)
            .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
        writer
            .write_record([
                "k",
                "k_over_kbreak",
                "xi",
                "xi_avg",
                "xi_norm",
                "pr_over_n",
                "pr_overlay",
            ])
            .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
        let mut curve = Vec::new();
        for ((&k, &xi), &avg) in ks.iter().zip(&values).zip(&averaged) {
            let overlay = if k > 0.0 {
                14.0 * lobe_area_estimate(k) / lambda_of(k)
            } else {
                0.0
            };
            writer
                .write_record(&[
                    format!("{k:.10}"),
                    format!("{:.8}", k / kb),
                    format!("{xi:.8e}"),
                    format!("{avg:.8e}"),
                    format!("{:.8}", avg / xi_n),
                    format!("{:.8e}", 1.0 / xi / n as f64),
                    format!("{overlay:.8e}"),
                ])
                .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
            curve.push((k / kb, avg / xi_n));
        }
        writer.flush().map_err(RunError::Io)?;
        manifest.add_output(&csv_path)?;
        plot.line(&curve, colors[ni % colors.len()], 1.5);
    }
    let svg_path = out.join("ipr_collapse.svg");
    plot.save(&svg_path)?;
    manifest.add_output(&svg_path)?;
    Ok(())
}

/// k_break vs N table and log-x plot.
pub fn phase_diagram(
    cfg: &ScanConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<(), RunError> {
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        rows.push((n, k_break(n)?));
    }
    let csv_path = out.join("phase_diagram.csv");
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    writer
        .write_record(["N", "k_break"])
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    for &(n, kb) in &rows {
        writer
            .write_record(&[n.to_string(), format!("{kb:.8}")])
            .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    }
    writer.flush().map_err(RunError::Io)?;
    manifest.add_output(&csv_path)?;

    let pts: Vec<(f64, f64)> = rows.iter().map(|&(n, kb)| (n as f64, kb)).collect();
    let y_hi = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut plot = SvgPlot::new("ESQPT precursor breakdown", "N", "k_break")
        .with_ranges((pts[0].0 * 0.8, pts[pts.len() - 1].0 * 1.2), (0.0, 1.2 * y_hi))
        .with_log_x();
    plot.line(&pts, "#2244cc", 1.5);
    plot.scatter(&pts, "#cc2222", 3.0);
    let svg_path = out.join("phase_diagram.svg");
    plot.save(&svg_path)?;
    manifest.add_output(&svg_path)?;
    Ok(())
}

/// Chaotic-layer scatter: seeds near the unstable manifold iterated long
/// enough to fill the layer.
pub fn chaotic_layer(params: MapParams, seeds: usize, steps: usize) -> Vec<(f64, f64)> {
    let config = ManifoldConfig::default();
    let manifold =
        stdmap_core::classical::Manifold::new(params, Branch::Unstable, Side::Plus, &config)
            .expect("k > 0");
    let mut points = Vec::with_capacity(seeds * steps / 10);
    for i in 0..seeds {
        let s = 0.02 + 0.9 * i as f64 / seeds as f64;
        let base = manifold.point(s);
        // Displace slightly off the manifold into the layer.
        let mut z = PhasePoint::reduced(base.q + 1e-3 * (i as f64 + 1.0) / seeds as f64, base.p);
        for step in 0..steps {
            z = stdmap_core::classical::advance(z, params, 1);
            if step % 10 == 0 {
                points.push((z.q, z.p));
            }
        }
    }
    points
}

/// Husimi maps of the top-intensity states with manifold overlays.
pub fn husimi_gallery(
    cfg: &ScanConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<(), RunError> {
    let (n, k) = (cfg.n, cfg.k);
    let space = TorusHilbert::new(n)?;
    let decomp = spectrum_at(n, k)?;
    let intensities = decomp.intensities.as_ref().unwrap();
    let phi_bs = bohr_sommerfeld_phase(n, k);

    // Top-m states by intensity, labeled by unfolded-phase order relative
    // to the most intense one (ladder labels: positive below phi_BS).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| intensities[b].total_cmp(&intensities[a]));
    let chosen = &order[..cfg.top_m.min(12)];
    let mut by_phase: Vec<(usize, f64)> = chosen
        .iter()
        .map(|&i| (i, unwrap_near(decomp.eigenphases[i], phi_bs)))
        .collect();
    by_phase.sort_by(|a, b| a.1.total_cmp(&b.1));
    let anchor = by_phase
        .iter()
        .position(|&(i, _)| i == chosen[0])
        .unwrap() as i64;

    let params = MapParams::new(k)?;
    let manifold_cfg = ManifoldConfig::default();
    let mut overlay_points: Vec<(f64, f64)> = Vec::new();
    for (branch, side) in [
        (Branch::Unstable, Side::Plus),
        (Branch::Unstable, Side::Minus),
        (Branch::Stable, Side::Plus),
        (Branch::Stable, Side::Minus),
    ] {
        let curve = trace_manifold(params, branch, side, cfg.arc_length, &manifold_cfg)?;
        overlay_points.extend(curve.points.iter().map(|p| (p.q, p.p)));
    }
    let layer = chaotic_layer(params, 20, 10_000);

    for (rank, &(state_idx, phi)) in by_phase.iter().enumerate() {
        // Ladder convention: the most intense state is 0; states at larger
        // unfolded phase carry negative labels.
        let label = anchor - rank as i64;
        let grid = husimi(&decomp.eigenstate(state_idx), space, cfg.grid);
        let png_path = out.join(format!("husimi_N{n}_k{k:.4}_label{label}.png"));
        heatmap_png(
            &grid.values,
            grid.nq,
            grid.np,
            4,
            &[
                (&overlay_points, [255, 255, 255]),
                (&layer, [120, 200, 120]),
            ],
            &png_path,
        )?;
        manifest.add_output(&png_path)?;
        manifest.task(
            &format!("husimi label {label} (phi = {phi:.6}, index {state_idx})"),
            || Ok::<_, RunError>(()),
        );
    }
    Ok(())
}

/// Manifold polylines as CSV + SVG.
pub fn manifolds(
    cfg: &ScanConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<(), RunError> {
    let params = MapParams::new(cfg.k)?;
    let manifold_cfg = ManifoldConfig::default();
    let csv_path = out.join(format!("manifolds_k{:.4}.csv", cfg.k));
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    writer
        .write_record(["branch", "arc_param", "q", "p"])
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    let mut plot = SvgPlot::new(
        &format!("Invariant manifolds, k = {}", cfg.k),
        "q",
        "p",
    )
    .with_ranges((0.0, 1.0), (-0.5, 0.5));
    for (branch, side, name, color) in [
        (Branch::Unstable, Side::Plus, "unstable+", "#cc2222"),
        (Branch::Unstable, Side::Minus, "unstable-", "#dd7777"),
        (Branch::Stable, Side::Plus, "stable+", "#2244cc"),
        (Branch::Stable, Side::Minus, "stable-", "#7788dd"),
    ] {
        let curve = trace_manifold(params, branch, side, cfg.arc_length, &manifold_cfg)?;
        for (s, z) in curve.arc_params.iter().zip(&curve.points_lift) {
            writer
                .write_record(&[
                    name.to_string(),
                    format!("{s:.10e}"),
                    format!("{:.12}", z[0]),
                    format!("{:.12}", z[1]),
                ])
                .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
        }
        let pts: Vec<(f64, f64)> = curve
            .points_lift
            .iter()
            .map(|z| {
                let q = z[0].rem_euclid(1.0);
                let mut p = z[1].rem_euclid(1.0);
                if p > 0.5 {
                    p -= 1.0;
                }
                (q, p)
            })
            .collect();
        plot.scatter(&pts, color, 0.8);
        manifest.task(&format!("manifold {name}"), || Ok::<_, RunError>(()));
    }
    writer.flush().map_err(RunError::Io)?;
    manifest.add_output(&csv_path)?;
    let svg_path = out.join(format!("manifolds_k{:.4}.svg", cfg.k));
    plot.save(&svg_path)?;
    manifest.add_output(&svg_path)?;
    Ok(())
}

/// Primary homoclinic pair as JSON records with provenance flags.
pub fn homoclinic_run(
    cfg: &ScanConfig,
    fixtures: &HomoclinicFixtures,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<(), RunError> {
    let params = MapParams::new(cfg.k)?;
    let search = HomoclinicSearchConfig::default();
    let (first, second) = find_primary_homoclinic(params, &search, Some(fixtures))?;
    let area = lobe_area(params, &search)?;
    let estimate = lobe_area_estimate(cfg.k);

    manifest.note_provenance(
        "invariants",
        if (fixtures.k - cfg.k).abs() < 1e-12 {
            "fixtures measured at the requested k"
        } else {
            "fixtures borrowed from a different k; A and L are approximate"
        },
    );

    let json_path = out.join(format!("homoclinic_k{:.4}.json", cfg.k));
    let payload = serde_json::json!({
        "k": cfg.k,
        "records": [first, second],
        "action_difference": second.action - first.action,
        "lobe_area": area,
        "lobe_area_estimate": estimate,
    });
    let mut file = std::fs::File::create(&json_path)?;
    writeln!(file, "{}", serde_json::to_string_pretty(&payload)?)?;
    manifest.add_output(&json_path)?;
    Ok(())
}

/// Interpolation-vs-oracle tables for eta and F~.
pub fn special_functions(
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<(), RunError> {
    let csv_path = out.join("special_functions.csv");
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    writer
        .write_record(["x", "eta", "eta_oracle", "ftilde", "ftilde_oracle"])
        .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    let steps = 320;
    for i in 0..=steps {
        let x = -8.0 + 16.0 * i as f64 / steps as f64;
        let eta_o = if x.abs() <= ETA_ORACLE_MAX_X {
            format!("{:.10}", eta_oracle(x)?)
        } else {
            String::new()
        };
        writer
            .write_record(&[
                format!("{x:.6}"),
                format!("{:.10}", eta(x)),
                eta_o,
                format!("{:.10e}", ftilde(x)),
                format!("{:.10e}", ftilde_oracle(x)?),
            ])
            .map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    }
    writer.flush().map_err(RunError::Io)?;
    manifest.add_output(&csv_path)?;
    Ok(())
}

/// Ensures the output directory exists and returns it.
pub fn prepare_out_dir(out: &Path) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    Ok(out.to_path_buf())
}
