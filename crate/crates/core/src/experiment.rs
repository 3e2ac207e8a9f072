//! End-to-end experiment: source and SLM, 50/50 split into two
//! discriminator paths, an optional memory, photon counting and metrics.
//!
//! Each case is run twice, once without atoms (reference) and once through
//! the memory. The memory response depends only on the ensemble and the
//! schedule, so it is computed once per configuration and shared by all
//! cases.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex;

use crate::analysis::{
    case_metrics, emit_report, expected_metrics, CaseMetrics, ExpectedMetrics, MeanHistogram, MetricsReport, WindowSpec,
};
use crate::config::{ExperimentConfig, PulseShape};
use crate::counting::{expected_counts, simulate, CountHistogram, DetectorParams, IntensityTrace, CHANNEL_LABELS};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PolarGrid};
use crate::memory::{run_memory, ControlSchedule, EnsembleParams, MemoryOutput, Numerics, PulseEnvelope};
use crate::modes::{synthesize_slm, ModeCoefficients};
use crate::optics::{
    attenuate, beam_split, ChannelState, DetectionKernel, Discriminator, FiberProjector, ForkHologram,
};

/// Execution options that do not change results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Caps the number of worker threads; `None` uses all cores.
    pub workers: Option<usize>,
}

/// Shared time grid of a configuration: `n_bins·per_bin` samples from
/// `t0` with step `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub per_bin: usize,
    pub n_bins: usize,
}

impl TimeGrid {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        let dt = cfg.numerics.dt_ns * 1e-9;
        let bw = cfg.detectors.bin_width_ns * 1e-9;
        let per_bin = (bw / dt).round() as usize;
        let span = (cfg.numerics.t_end_us - cfg.numerics.t_start_us) * 1e-6;
        Self {
            t0: cfg.numerics.t_start_us * 1e-6,
            dt,
            per_bin,
            n_bins: (span / bw + 1e-9).floor() as usize,
        }
    }

    pub fn len(&self) -> usize {
        self.n_bins * self.per_bin
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }
}

pub fn ensemble_params(cfg: &ExperimentConfig) -> EnsembleParams<f64> {
    EnsembleParams {
        optical_depth: cfg.ensemble.optical_depth,
        gamma: cfg.gamma(),
        gamma_s: cfg.gamma_s(),
        length: cfg.ensemble.length_mm * 1e-3,
        control_waist: cfg.ensemble.control_waist_um,
        signal_waist: cfg.ensemble.signal_waist_um,
    }
}

pub fn control_schedule(cfg: &ExperimentConfig) -> ControlSchedule<f64> {
    let s = &cfg.schedule;
    ControlSchedule {
        omega0: cfg.omega0(),
        off_time: s.off_time_us * 1e-6,
        on_time: cfg.on_time_us() * 1e-6,
        switch_duration: s.switch_us * 1e-6,
        shape: s.shape,
    }
}

pub fn input_pulse(cfg: &ExperimentConfig) -> Result<PulseEnvelope<f64>> {
    let tg = TimeGrid::of(cfg);
    let w = cfg.source.pulse.width_us * 1e-6;
    let n = cfg.source.mean_photons;
    match cfg.source.pulse.shape {
        PulseShape::HalfGaussian => PulseEnvelope::half_gaussian(w, n, tg.t0, tg.dt, tg.len()),
        PulseShape::Gaussian => PulseEnvelope::gaussian(w, n, tg.t0, tg.dt, tg.len()),
    }
}

pub fn detector_params(cfg: &ExperimentConfig) -> DetectorParams {
    DetectorParams {
        quantum_efficiency: cfg.detectors.quantum_efficiency,
        dark_rate: cfg.detectors.dark_rate_hz,
        bin_width: cfg.detectors.bin_width_ns * 1e-9,
    }
}

pub fn windows(cfg: &ExperimentConfig) -> WindowSpec {
    let r = cfg.retrieval_window_us();
    WindowSpec {
        input: (cfg.windows.input_us[0] * 1e-6, cfg.windows.input_us[1] * 1e-6),
        retrieval: (r[0] * 1e-6, r[1] * 1e-6),
    }
}

pub fn polar_grid(cfg: &ExperimentConfig) -> Result<Arc<PolarGrid<f64>>> {
    let b = &cfg.basis;
    let spec = GridSpec {
        n_r: b.n_r,
        n_theta: b.n_theta,
        extent_waists: b.extent_waists,
    };
    Ok(Arc::new(PolarGrid::new(b.waist_um, spec)?))
}

/// The two discriminators, plus path first.
pub fn discriminators(cfg: &ExperimentConfig) -> Result<[Discriminator<f64>; 2]> {
    let mk = |d: &crate::config::DiscriminatorConfig| -> Result<Discriminator<f64>> {
        let fiber = FiberProjector {
            mode_waist: d.fiber_waist_um,
            crosstalk_floor: d.crosstalk,
            radial_acceptance: d.radial_acceptance.clone(),
        };
        fiber.validate()?;
        Ok(Discriminator {
            fork: ForkHologram::new(d.l_shift, d.efficiency)?,
            fiber,
        })
    };
    Ok([mk(&cfg.discriminators.plus)?, mk(&cfg.discriminators.minus)?])
}

/// Target mode coefficients of a case, normalized to unit power.
pub fn case_target(cfg: &ExperimentConfig, case: usize) -> Result<ModeCoefficients<f64>> {
    let c = &cfg.cases[case];
    let mut t = ModeCoefficients::new(cfg.basis.waist_um);
    for (m, re, im) in cfg.case_modes(c) {
        t = t.with(m, Complex::new(re, im));
    }
    t.normalized()
}

/// Transverse state leaving the SLM for a case, unit power.
pub fn case_state(cfg: &ExperimentConfig, grid: &Arc<PolarGrid<f64>>, case: usize) -> Result<ChannelState<f64>> {
    let target = case_target(cfg, case)?;
    let c = &cfg.cases[case];
    let field = synthesize_slm(grid.clone(), &target, c.phase_only, c.slm_input_waist_um)?;
    Ok(ChannelState::new(field, cfg.source.mean_photons))
}

/// Channel whose fork brings the dominant input winding to zero, if the
/// target carries at least 90 % of its power in a single winding.
pub fn matched_channel(cfg: &ExperimentConfig, case: usize) -> Result<Option<usize>> {
    let t = case_target(cfg, case)?;
    let l_max = t.l_max() as i32;
    let best = (-l_max..=l_max)
        .map(|l| (l, t.winding_power(l)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let shifts = [cfg.discriminators.plus.l_shift, cfg.discriminators.minus.l_shift];
    Ok(best
        .filter(|(_, p)| *p >= 0.9 * t.power())
        .and_then(|(l, _)| shifts.iter().position(|s| l + s == 0)))
}

/// Detected photon flux (photons/s) of both channels with and without the
/// memory, before quantum efficiency and dark counts.
#[derive(Debug, Clone)]
pub struct CaseIntensities {
    pub reference: [IntensityTrace; 2],
    pub memory: [IntensityTrace; 2],
}

fn background(cfg: &ExperimentConfig, tg: &TimeGrid, schedule: &ControlSchedule<f64>) -> Result<Vec<f64>> {
    let rate = attenuate(cfg.background.control_photon_rate_hz, cfg.background.attenuation_db)?;
    Ok((0..tg.len())
        .map(|n| rate * schedule.profile(tg.time(n)).powi(2))
        .collect())
}

fn trace(tg: &TimeGrid, values: Vec<f64>) -> IntensityTrace {
    IntensityTrace {
        t0: tg.t0,
        dt: tg.dt,
        values,
    }
}

/// Deterministic part of a run: the memory response and every case's
/// detection kernels.
pub struct Prepared {
    pub time: TimeGrid,
    pub pulse: PulseEnvelope<f64>,
    pub memory: MemoryOutput<f64>,
    pub kernels: Vec<[DetectionKernel<f64>; 2]>,
    pub cases: Vec<CaseIntensities>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let tg = TimeGrid::of(cfg);
    let pulse = input_pulse(cfg)?;
    let schedule = control_schedule(cfg);
    let memory = run_memory(
        &pulse,
        &ensemble_params(cfg),
        &schedule,
        Numerics { n_z: cfg.numerics.n_z },
        cfg.ensemble.n_shells,
        tg.time(tg.len() - 1),
    )?;
    if memory.len() != tg.len() {
        return Err(Error::Numerical(format!(
            "memory produced {} samples, expected {}",
            memory.len(),
            tg.len()
        )));
    }
    let bg = background(cfg, &tg, &schedule)?;
    let grid = polar_grid(cfg)?;
    let discs = discriminators(cfg)?;
    let gains: Vec<Vec<Complex<f64>>> = (0..tg.len()).map(|n| memory.field_at(n, grid.radii())).collect();

    let mut kernels = Vec::with_capacity(cfg.cases.len());
    let mut cases = Vec::with_capacity(cfg.cases.len());
    for k in 0..cfg.cases.len() {
        let (a, b) = beam_split(&case_state(cfg, &grid, k)?);
        let kern = [discs[0].kernel(&a)?, discs[1].kernel(&b)?];
        let unit = vec![Complex::new(1.0, 0.0); grid.n_r()];
        let per_channel = |kk: &DetectionKernel<f64>| {
            let through = kk.coupled(&unit);
            let reference = pulse
                .samples
                .iter()
                .zip(&bg)
                .map(|(e, b)| through * e.norm_sqr() + b)
                .collect();
            let memory = gains.iter().zip(&bg).map(|(g, b)| kk.coupled(g) + b).collect();
            (trace(&tg, reference), trace(&tg, memory))
        };
        let (r0, m0) = per_channel(&kern[0]);
        let (r1, m1) = per_channel(&kern[1]);
        cases.push(CaseIntensities {
            reference: [r0, r1],
            memory: [m0, m1],
        });
        kernels.push(kern);
    }
    Ok(Prepared {
        time: tg,
        pulse,
        memory,
        kernels,
        cases,
    })
}

/// Expected counts per bin of both channels.
pub fn mean_histogram(traces: &[IntensityTrace; 2], det: &DetectorParams, trials: u64) -> Result<MeanHistogram> {
    let m0 = expected_counts(&traces[0], det)?;
    let m1 = expected_counts(&traces[1], det)?;
    let mut layout = CountHistogram::empty(traces[0].t0, det.bin_width, m0.len());
    layout.trials = trials;
    let t = trials as f64;
    Ok(MeanHistogram {
        layout,
        means: [m0.iter().map(|m| m * t).collect(), m1.iter().map(|m| m * t).collect()],
    })
}

/// Noise-free metrics of every case, without Monte Carlo.
pub fn expected(cfg: &ExperimentConfig) -> Result<Vec<ExpectedMetrics>> {
    let prep = prepare(cfg)?;
    let det = detector_params(cfg);
    let win = windows(cfg);
    (0..cfg.cases.len())
        .map(|k| {
            let er = mean_histogram(&prep.cases[k].reference, &det, 1)?;
            let em = mean_histogram(&prep.cases[k].memory, &det, 1)?;
            expected_metrics(&er, &em, &win, matched_channel(cfg, k)?)
        })
        .collect()
}

/// Histograms and expectations of one case.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub name: String,
    pub reference: CountHistogram,
    pub memory: CountHistogram,
    pub expected_reference: MeanHistogram,
    pub expected_memory: MeanHistogram,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub cases: Vec<CaseRun>,
}

/// Runs `f` on a pool capped at `opts.workers` threads.
pub fn with_workers<R: Send>(opts: RunOptions, f: impl FnOnce() -> R + Send) -> Result<R> {
    match opts.workers {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidArgument("worker count must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs the reference and memory experiments of every case.
pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunOutput> {
    with_workers(opts, || run_inner(cfg))?
}

fn run_inner(cfg: &ExperimentConfig) -> Result<RunOutput> {
    sample(cfg, &prepare(cfg)?)
}

/// Monte Carlo and metrics on top of a prepared configuration. Reusing
/// one [`Prepared`] across seeds skips the memory integration.
pub fn sample(cfg: &ExperimentConfig, prep: &Prepared) -> Result<RunOutput> {
    let det = detector_params(cfg);
    let win = windows(cfg);
    win.validate(cfg.on_time_us() * 1e-6)?;
    let mut report = MetricsReport::new(cfg.hash(), cfg.master_seed, win);
    let mut runs = Vec::with_capacity(cfg.cases.len());
    for (k, (case, ints)) in cfg.cases.iter().zip(&prep.cases).enumerate() {
        let er = mean_histogram(&ints.reference, &det, cfg.trials)?;
        let em = mean_histogram(&ints.memory, &det, cfg.trials)?;
        let per_trial = |h: &MeanHistogram| -> [Vec<f64>; 2] {
            let t = cfg.trials as f64;
            [0, 1].map(|ch| h.means[ch].iter().map(|m| m / t).collect())
        };
        // distinct seeds for the two runs and for every case
        let seed = |run: u64| cfg.master_seed ^ ((k as u64) << 33) ^ (run << 32);
        let pr = per_trial(&er);
        let pm = per_trial(&em);
        let reference = simulate([&pr[0], &pr[1]], prep.time.t0, det.bin_width, cfg.trials, seed(0))?;
        let memory = simulate([&pm[0], &pm[1]], prep.time.t0, det.bin_width, cfg.trials, seed(1))?;
        let metrics: CaseMetrics = case_metrics(
            &case.name,
            &reference,
            &memory,
            &er,
            &em,
            &win,
            matched_channel(cfg, k)?,
        )?;
        report.cases.push(metrics);
        runs.push(CaseRun {
            name: case.name.clone(),
            reference,
            memory,
            expected_reference: er,
            expected_memory: em,
        });
    }
    Ok(RunOutput { report, cases: runs })
}

/// Writes CSVs and the metrics document, then reads them back and checks
/// row counts, headers and the config hash.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let hists: Vec<_> = out
        .cases
        .iter()
        .map(|c| (c.name.clone(), c.reference.clone(), c.memory.clone()))
        .collect();
    emit_report(&out.report, &hists, dir)?;
    verify_outputs(out, dir)
}

pub fn verify_outputs(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for c in &out.cases {
        for (suffix, h) in [("reference", &c.reference), ("memory", &c.memory)] {
            let path = dir.join(format!("{}_{suffix}.csv", c.name));
            let fail = |m: String| Error::Verify {
                path: path.clone(),
                message: m,
            };
            let mut rd = csv::Reader::from_path(&path).map_err(|e| fail(e.to_string()))?;
            let header = rd.headers().map_err(|e| fail(e.to_string()))?.clone();
            if header.iter().collect::<Vec<_>>() != ["time_s", "channel", "counts"] {
                return Err(fail(format!("unexpected header {header:?}")));
            }
            let mut rows = 0usize;
            let mut total = 0u64;
            for rec in rd.records() {
                let rec = rec.map_err(|e| fail(e.to_string()))?;
                let ch: i32 = rec[1].parse().map_err(|_| fail("bad channel".into()))?;
                if !CHANNEL_LABELS.contains(&ch) {
                    return Err(fail(format!("unknown channel {ch}")));
                }
                total += rec[2].parse::<u64>().map_err(|_| fail("bad count".into()))?;
                rows += 1;
            }
            if rows != 2 * h.n_bins() {
                return Err(fail(format!("{rows} rows, expected {}", 2 * h.n_bins())));
            }
            if total != h.total(0) + h.total(1) {
                return Err(fail("count total differs from the histogram".into()));
            }
            files.push(path);
        }
    }
    let path = dir.join("metrics.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Verify {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if doc["config_hash"] != out.report.config_hash.as_str()
        || doc["cases"].as_array().map(Vec::len) != Some(out.cases.len())
    {
        return Err(Error::Verify {
            path,
            message: "metrics document does not match the run".into(),
        });
    }
    files.push(path);
    Ok(files)
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: serde_json::Value,
    pub metrics: CaseMetrics,
}

/// Runs the experiment once per value of the scalar at `path`.
pub fn sweep(
    cfg: &ExperimentConfig,
    path: &str,
    values: &[serde_json::Value],
    opts: RunOptions,
) -> Result<Vec<SweepRow>> {
    let base = serde_json::to_value(cfg).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut rows = Vec::new();
    for v in values {
        let mut doc = base.clone();
        crate::config::set_path(&mut doc, path, v.clone())?;
        let c = ExperimentConfig::from_json(&doc.to_string())?;
        let out = run(&c, opts)?;
        rows.extend(out.report.cases.into_iter().map(|metrics| SweepRow {
            value: v.clone(),
            metrics,
        }));
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record([
        "value",
        "case",
        "efficiency",
        "err",
        "expected_efficiency",
        "distinction_ratio_reference_db",
        "distinction_ratio_retrieval_db",
        "imbalance_reference",
        "imbalance_retrieval",
    ])
    .map_err(io)?;
    let num = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for r in rows {
        let m = &r.metrics;
        let value = match &r.value {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        w.write_record([
            value,
            m.case.clone(),
            m.efficiency.value.to_string(),
            m.efficiency.stderr.to_string(),
            m.expected.efficiency.to_string(),
            num(m.distinction_ratio.map(|d| d.reference_db)),
            num(m.distinction_ratio.map(|d| d.retrieval_db)),
            num(m.imbalance.reference),
            num(m.imbalance.retrieval),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
