//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sagnac_im::drift::{ensemble_normalized_std, DriftSpec, StabilitySampling};
use sagnac_im::drive::{SampleGrid, Symbol, VoltageWaveform};
use sagnac_im::interference::{coupling_from_extinction_db, max_extinction_ratio_db, CouplingRatio, ExtinctionRatioDb};
use sagnac_im::pattern::{
    classify_transitions, effective_half_wave_voltage, max_abs_decoy_deviation, max_abs_deviation,
    quadrature_decoy_baseline, simulate_pattern, CouplingSpec, Device, ExperimentConfig,
};
use sagnac_im::traveling_wave::{
    accumulated_phase, anti_parallel_overlap_count, max_clock_rate, net_sagnac_phase, required_offset,
    simulated_overlap_count, Direction, LoopPlacement, ModulatorGeometry,
};
use sagnac_im_cli::StabilityConfig;

type Check = Result<String, String>;
type Criterion = (u32, &'static str, Duration, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load<T: serde::de::DeserializeOwned>(name: &str) -> T {
    serde_json::from_str(&fs::read_to_string(configs().join(name)).unwrap()).unwrap()
}

fn extinction_ratio(r: f64) -> f64 {
    max_extinction_ratio_db(CouplingRatio::new(r).unwrap()).db().unwrap()
}

fn criterion_1() -> Check {
    let oracle = |r: f64| -20.0 * (2.0 * r - 1.0f64).abs().log10();
    let mut notes = Vec::new();
    for (r, quoted) in [(0.75, 6.0206), (0.8, 4.4370)] {
        let er = extinction_ratio(r);
        ensure(
            (er - oracle(r)).abs() <= 1e-6,
            format!("ER({r}) = {er}, closed form {}", oracle(r)),
        )?;
        ensure(
            (er - quoted).abs() <= 5e-5,
            format!("ER({r}) = {er} does not round to {quoted}"),
        )?;
        notes.push(format!("ER({r}) = {er:.7}"));
    }
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let r = 0.500001 + (0.999999 - 0.500001) * i as f64 / 999.0;
        let er = max_extinction_ratio_db(CouplingRatio::new(r).unwrap());
        let back = coupling_from_extinction_db(er).map_err(|e| e.to_string())?.r();
        worst = worst.max((back - r).abs());
    }
    ensure(worst <= 1e-9, format!("round-trip error {worst:e}"))?;
    notes.push(format!("round-trip max error {worst:.1e}"));
    Ok(notes.join(", "))
}

/// Ideal Sagnac whose anti-parallel window sits half a slot from every pulse.
fn quiet_sagnac(extinction_db: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(Device::SagnacTwoLevel, CouplingSpec::Extinction { extinction_db }).ideal();
    c.clock_rate_hz = 1e9;
    c.geometry = ModulatorGeometry::new(0.01, 2.2, 2.2, 3.5).unwrap();
    c.placement = LoopPlacement::new(500e-12).unwrap();
    c
}

fn criterion_2() -> Check {
    let mut notes = Vec::new();
    for (db, expected_r) in [(30.48, 0.5150), (5.83, 0.7555), (3.94, 0.8174)] {
        let r = coupling_from_extinction_db(ExtinctionRatioDb::finite(db).unwrap()).unwrap();
        ensure((r.r() - expected_r).abs() <= 1e-3, format!("{db} dB -> r = {}", r.r()))?;
        let records = simulate_pattern(&quiet_sagnac(db)).map_err(|e| e.to_string())?;
        let mean = |sym| {
            let v: Vec<f64> = records
                .iter()
                .filter(|x| x.symbol == sym)
                .map(|x| x.intensity)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let ratio = mean(Symbol::Decoy) / mean(Symbol::Signal);
        ensure(
            (ratio - r.contrast_floor()).abs() <= 1e-9,
            format!("{db} dB: v/s {ratio} vs (R-T)^2 {}", r.contrast_floor()),
        )?;
        if db == 3.94 {
            ensure(
                (ratio - 0.403).abs() <= 0.005 && (ratio - 0.404).abs() <= 0.005,
                format!("v/s {ratio}"),
            )?;
        }
        notes.push(format!("{db} dB: r = {:.4}, v/s = {ratio:.6}", r.r()));
    }
    Ok(notes.join("; "))
}

fn criterion_3() -> Check {
    let sagnac: ExperimentConfig = load("table1_8020.json");
    let quadrature: ExperimentConfig = load("quadrature_mzm.json");
    let err = |e: sagnac_im::Error| e.to_string();
    let s_stats = classify_transitions(&simulate_pattern(&sagnac).map_err(err)?).map_err(err)?;
    ensure(
        s_stats.len() == 4,
        format!("expected 4 Sagnac rows, got {}", s_stats.len()),
    )?;
    let s = max_abs_deviation(&s_stats);
    let q = max_abs_decoy_deviation(&quadrature_decoy_baseline(&quadrature).map_err(err)?);
    ensure(s <= 0.3, format!("Sagnac max |dev| {s:.4}%"))?;
    ensure(q >= 3.0, format!("quadrature v-state |dev| {q:.4}%"))?;
    ensure(q >= 10.0 * s, format!("ratio {:.2}", q / s))?;
    Ok(format!(
        "Sagnac max |dev| {s:.4}%, quadrature v |dev| {q:.3}%, ratio {:.1}x",
        q / s
    ))
}

fn criterion_4() -> Check {
    let cfg: StabilityConfig = load("fig1d.json");
    let coupling = |c: &CouplingSpec| c.ratio().unwrap();
    let sagnac = sagnac_im::drift::StabilityDevice::Sagnac {
        coupling: coupling(&cfg.sagnac_coupling),
        mixing: sagnac_im::drift::PolarizationMixing::new(cfg.epsilon).unwrap(),
    };
    let mzm = sagnac_im::drift::StabilityDevice::Mzm {
        coupling: coupling(&cfg.mzm_coupling),
        bias_phase_rad: cfg.mzm_bias_phase_rad,
    };
    let drift = DriftSpec::new(cfg.sigma_rad_per_sqrt_s, cfg.seed).unwrap();
    let sampling = StabilitySampling {
        duration_s: 3600.0,
        dt_s: cfg.dt_s,
        meter_window_s: cfg.meter_window_s,
    };
    let seeds: Vec<u64> = (0..cfg.ensemble_runs as u64).map(|k| cfg.seed + k).collect();
    let ens = |dev, s: &StabilitySampling, seeds: &[u64]| ensemble_normalized_std(dev, drift, s, seeds).unwrap();

    let (_, mzm_single) = mzm.measure(drift, &sampling).unwrap();
    let (_, sag_single) = sagnac.measure(drift, &sampling).unwrap();
    let (mzm_mean, sag_mean) = (ens(&mzm, &sampling, &seeds), ens(&sagnac, &sampling, &seeds));
    for (name, v, target) in [
        ("MZM", mzm_single, 61.2),
        ("MZM ensemble", mzm_mean, 61.2),
        ("Sagnac", sag_single, 1.4),
        ("Sagnac ensemble", sag_mean, 1.4),
    ] {
        ensure(
            (v / target - 1.0).abs() <= 0.5,
            format!("{name} std {v:.3}% vs {target}%"),
        )?;
    }

    let at = |d: f64| StabilitySampling {
        duration_s: d,
        ..sampling
    };
    let short = ens(&sagnac, &at(100.0), &seeds);
    let long = ens(&sagnac, &at(10_000.0), &seeds);
    let sag_ratio = (long / short).max(short / long);
    ensure(
        sag_ratio < 2.0,
        format!("Sagnac 100 s {short:.3}% vs 10000 s {long:.3}%"),
    )?;

    let many: Vec<u64> = (0..32).map(|k| cfg.seed + k).collect();
    let plateau = ens(&mzm, &at(10_000.0), &many);
    let mut prev = 0.0;
    let mut saturated_at = None;
    for d in [2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 32.0, 64.0] {
        let v = ens(&mzm, &at(d), &many);
        ensure(
            v > prev,
            format!("MZM std fell from {prev:.2}% to {v:.2}% at {d} s before saturating"),
        )?;
        prev = v;
        if v >= 0.9 * plateau {
            saturated_at = Some(d);
            break;
        }
    }
    let sat = saturated_at.ok_or("MZM std never reached 90% of its 10000 s value")?;
    Ok(format!(
        "MZM {mzm_single:.2}% (ensemble {mzm_mean:.2}%), Sagnac {sag_single:.3}% (ensemble {sag_mean:.3}%); \
         Sagnac 10000 s/100 s ratio {sag_ratio:.3}; MZM rises strictly until saturating at {sat} s"
    ))
}

fn random_waveform(rng: &mut ChaCha8Rng) -> VoltageWaveform {
    let grid = SampleGrid::covering(-3e-9, 3e-9, 1e-12).unwrap();
    let samples = (0..grid.n).map(|_| rng.random_range(-4.0..4.0)).collect();
    VoltageWaveform::new(grid, samples).unwrap()
}

fn random_geometry(rng: &mut ChaCha8Rng) -> ModulatorGeometry {
    ModulatorGeometry::new(
        rng.random_range(0.005..0.06),
        rng.random_range(1.0..3.5),
        rng.random_range(1.0..3.5),
        rng.random_range(1.0..8.0),
    )
    .unwrap()
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_local: f64 = 0.0;
    for _ in 0..100 {
        let mut g = random_geometry(&mut rng);
        g.n_rf = g.n_optical;
        let w = random_waveform(&mut rng);
        let t = rng.random_range(-1e-9..1e-9);
        let phi = accumulated_phase(&w, t, Direction::Parallel, &g).unwrap();
        let expected = PI * w.value_at(t).unwrap() / g.v_pi;
        let rel = (phi - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        worst_local = worst_local.max(rel);
    }
    ensure(
        worst_local <= 1e-9,
        format!("velocity-matched relative error {worst_local:e}"),
    )?;

    let mut worst_dc: f64 = 0.0;
    for _ in 0..100 {
        let g = random_geometry(&mut rng);
        let w = random_waveform(&mut rng);
        let v0 = rng.random_range(-10.0..10.0);
        let t = rng.random_range(-5e-10..5e-10);
        let placement = LoopPlacement::new(rng.random_range(-1e-9..1e-9)).unwrap();
        let a = net_sagnac_phase(&w, t, &g, placement).unwrap().radians();
        let b = net_sagnac_phase(&w.offset(v0), t, &g, placement).unwrap().radians();
        worst_dc = worst_dc.max((a - b).abs());
    }
    ensure(worst_dc <= 1e-9, format!("DC invariance error {worst_dc:e} rad"))?;

    for _ in 0..20 {
        let g = random_geometry(&mut rng);
        let f = max_clock_rate(&g).unwrap();
        let at = simulated_overlap_count(&g, f, 1024, 64).unwrap();
        let above = simulated_overlap_count(&g, 1.5 * f, 1024, 64).unwrap();
        ensure(at == 1 && above >= 2, format!("{g:?}: oracle counts {at}, {above}"))?;
        ensure(
            anti_parallel_overlap_count(&g, f).unwrap() == at
                && anti_parallel_overlap_count(&g, 1.5 * f).unwrap() == above,
            format!("{g:?}: formula disagrees with oracle"),
        )?;
    }
    let f5 = max_clock_rate(&ModulatorGeometry::default()).unwrap();
    Ok(format!(
        "velocity-matched error {worst_local:.1e}, DC error {worst_dc:.1e} rad, 20 geometries agree; \
         5 cm limit {:.3} GHz (quoted 3 GHz is order-of-magnitude only)",
        f5 / 1e9
    ))
}

fn criterion_6() -> Check {
    let mut cfg = ExperimentConfig::new(Device::SagnacTwoLevel, CouplingRatio::new(0.8).unwrap()).ideal();
    let v_pi = cfg.geometry.v_pi;
    let centered = effective_half_wave_voltage(&cfg).map_err(|e| e.to_string())?;
    ensure(centered > v_pi, format!("center placement {centered} V <= {v_pi} V"))?;
    cfg.placement = required_offset(&cfg.geometry, cfg.electrical_fwhm_s, cfg.electrical_fwhm_s).unwrap();
    let offset = effective_half_wave_voltage(&cfg).map_err(|e| e.to_string())?;
    ensure(
        (offset / v_pi - 1.0).abs() <= 5e-3,
        format!("offset placement {offset} V vs {v_pi} V"),
    )?;
    Ok(format!("center {centered:.4} V > {v_pi} V; offset {offset:.6} V"))
}

fn run_cli(args: &[&str], out: &Path, threads: Option<usize>) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sagnac-im"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n.to_string());
    }
    let status = cmd.output().map_err(|e| e.to_string())?;
    ensure(
        status.status.success(),
        format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)),
    )
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_7() -> Check {
    let cfg = |name: &str| configs().join(name).to_string_lossy().into_owned();
    let (t8020, quad, fig1d, fig1b, maxclock) = (
        cfg("table1_8020.json"),
        cfg("quadrature_mzm.json"),
        cfg("fig1d.json"),
        cfg("fig1b.json"),
        cfg("maxclock.json"),
    );
    let runs: Vec<(&str, Vec<&str>, bool)> = vec![
        (
            "er-curve",
            vec!["er-curve", "--r-min", "0.5", "--r-max", "0.99", "--steps", "50"],
            false,
        ),
        (
            "patterning",
            vec!["patterning", "--config", &t8020, "--seed", "7"],
            false,
        ),
        (
            "patterning-mzm",
            vec!["patterning", "--config", &quad, "--seed", "7"],
            false,
        ),
        ("stability", vec!["stability", "--config", &fig1d, "--seed", "3"], true),
        ("max-clock", vec!["max-clock", "--config", &maxclock], false),
        (
            "transfer-curve",
            vec!["transfer-curve", "--config", &fig1b, "--steps", "101"],
            false,
        ),
        (
            "calibrate",
            vec!["calibrate", "--config", &fig1d, "--duration", "600"],
            true,
        ),
    ];
    let root = tempfile::tempdir().unwrap();
    let mut checked = 0;
    for (name, args, parallel) in &runs {
        let variants: Vec<Option<usize>> = if *parallel {
            vec![None, Some(1), Some(4)]
        } else {
            vec![None, None]
        };
        let mut reference = None;
        for (i, threads) in variants.iter().enumerate() {
            let out = root.path().join(format!("{name}-{i}"));
            run_cli(args, &out, *threads)?;
            let files = dir_contents(&out);
            ensure(!files.is_empty(), format!("{name}: no output files"))?;
            match &reference {
                None => reference = Some(files),
                Some(r) => ensure(
                    *r == files,
                    format!("{name}: outputs differ on run {i} (threads {threads:?})"),
                )?,
            }
            checked += 1;
        }
    }

    let device = sagnac_im::drift::StabilityDevice::Mzm {
        coupling: CouplingRatio::balanced(),
        bias_phase_rad: std::f64::consts::FRAC_PI_2,
    };
    let drift = DriftSpec::new(1.4, 0).unwrap();
    let seeds: Vec<u64> = (0..16).collect();
    let in_pool = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| ensemble_normalized_std(&device, drift, &StabilitySampling::new(600.0), &seeds).unwrap())
    };
    let (one, four) = (in_pool(1), in_pool(4));
    ensure(
        one.to_bits() == four.to_bits(),
        format!("ensemble std {one} (1 thread) vs {four} (4 threads)"),
    )?;
    Ok(format!(
        "{checked} CLI runs byte-identical per command incl. 1/4 threads; library ensemble bit-identical"
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        (1, "extinction ratio closed form", Duration::from_secs(1), criterion_1),
        (
            2,
            "extinction inversion and decoy level",
            Duration::from_secs(1),
            criterion_2,
        ),
        (3, "patterning suppression", Duration::from_secs(10), criterion_3),
        (4, "stability separation", Duration::from_secs(30), criterion_4),
        (5, "traveling-wave correctness", Duration::from_secs(10), criterion_5),
        (6, "effective half-wave voltage", Duration::from_secs(10), criterion_6),
        (7, "determinism", Duration::from_secs(60), criterion_7),
    ];
    let mut failed = 0;
    for (n, title, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; runtime {elapsed:.2?} exceeds {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {n} PASS [{elapsed:.2?}] {title}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} FAIL [{elapsed:.2?}] {title}: {why}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
