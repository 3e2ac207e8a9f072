//! Figures of merit from count histograms and report emission.

use std::fs;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::counting::{CountHistogram, CHANNEL_LABELS};
use crate::error::{Error, Result};

/// Semantic version of the metrics document layout.
pub const METRICS_SCHEMA_VERSION: &str = "1.0.0";

pub const IMBALANCE_FORMULA: &str = "2*(N_plus - N_minus)/(N_plus + N_minus)";

/// Counting windows in s; a bin belongs to a window when its centre does.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSpec {
    pub input: (f64, f64),
    pub retrieval: (f64, f64),
}

impl WindowSpec {
    pub fn validate(&self, on_time: f64) -> Result<()> {
        for (name, w) in [("input", self.input), ("retrieval", self.retrieval)] {
            if !(w.0 < w.1 && w.0.is_finite() && w.1.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} window must have start < end")));
            }
        }
        if self.input.1 > self.retrieval.0 && self.retrieval.1 > self.input.0 {
            return Err(Error::InvalidArgument("input and retrieval windows overlap".into()));
        }
        if self.retrieval.0 < on_time - 1e-12 {
            return Err(Error::InvalidArgument(
                "retrieval window opens before the control is switched on".into(),
            ));
        }
        Ok(())
    }
}

/// A value with its one-sigma statistical error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// `(retrieval-window counts of the memory run, both channels) / (input-window
/// counts of the reference run, both channels)`, each normalized by its
/// trial count, with Poisson errors propagated.
pub fn efficiency(memory: &CountHistogram, reference: &CountHistogram, win: &WindowSpec) -> Result<Estimate> {
    if memory.trials == 0 || reference.trials == 0 {
        return Err(Error::InvalidArgument(
            "histograms must contain at least one trial".into(),
        ));
    }
    let m = (memory.window_sum(0, win.retrieval) + memory.window_sum(1, win.retrieval)) as f64;
    let r = (reference.window_sum(0, win.input) + reference.window_sum(1, win.input)) as f64;
    if r == 0.0 {
        return Err(Error::ZeroReference);
    }
    let value = (m / memory.trials as f64) / (r / reference.trials as f64);
    let rel = if m > 0.0 { (1.0 / m + 1.0 / r).sqrt() } else { 0.0 };
    Ok(Estimate {
        value,
        stderr: value * rel,
    })
}

/// `10·log10(matched/crossed)` in dB; `+∞` when nothing leaks into the
/// crossed channel and NaN when neither channel has counts. Negative inputs
/// (after background subtraction) are floored at zero.
pub fn distinction_ratio(matched: f64, crossed: f64) -> f64 {
    let (m, c) = (matched.max(0.0), crossed.max(0.0));
    if m == 0.0 && c == 0.0 {
        return f64::NAN;
    }
    if c == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (m / c).log10()
}

/// Normalized difference `2(a − b)/(a + b)`.
pub fn imbalance(plus: f64, minus: f64) -> Result<f64> {
    let s = plus + minus;
    if !(s > 0.0) {
        return Err(Error::InvalidArgument("imbalance of an empty window".into()));
    }
    Ok(2.0 * (plus - minus) / s)
}

/// Serializes non-finite dB values as `"+inf"`, `"-inf"` or `null`.
fn db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_nan() {
        s.serialize_none()
    } else if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "+inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

fn opt<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_finite() => s.serialize_f64(*x),
        _ => s.serialize_none(),
    }
}

/// Raw counts of one channel in both windows of both runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelCounts {
    pub channel: i32,
    pub reference_input: u64,
    pub reference_input_stderr: f64,
    pub memory_retrieval: u64,
    pub memory_retrieval_stderr: f64,
    pub memory_input: u64,
    pub memory_input_stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistinctionRatios {
    /// Channel whose fork maps the input winding to zero, if any.
    pub matched_channel: i32,
    #[serde(serialize_with = "db")]
    pub reference_db: f64,
    #[serde(serialize_with = "db")]
    pub retrieval_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Imbalance {
    #[serde(serialize_with = "opt")]
    pub reference: Option<f64>,
    #[serde(serialize_with = "opt")]
    pub retrieval: Option<f64>,
    /// `N_plus / N_minus` of the same windows.
    #[serde(serialize_with = "opt")]
    pub reference_ratio: Option<f64>,
    #[serde(serialize_with = "opt")]
    pub retrieval_ratio: Option<f64>,
}

/// Noise-free predictions of the same figures from the analytic means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedMetrics {
    pub efficiency: f64,
    pub distinction_ratio: Option<DistinctionRatios>,
    pub imbalance: Imbalance,
}

/// Metrics of one input case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseMetrics {
    pub case: String,
    pub trials: u64,
    pub efficiency: Estimate,
    pub distinction_ratio: Option<DistinctionRatios>,
    pub imbalance: Imbalance,
    pub counts: [ChannelCounts; 2],
    /// Channel with the most retrieval-window counts.
    pub retrieval_argmax_channel: Option<i32>,
    pub expected: ExpectedMetrics,
}

/// The full metrics document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub schema_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub windows: WindowSpec,
    pub imbalance_formula: String,
    pub distinction_ratio_formula: String,
    pub efficiency_formula: String,
    pub cases: Vec<CaseMetrics>,
}

impl MetricsReport {
    pub fn new(config_hash: String, master_seed: u64, windows: WindowSpec) -> Self {
        Self {
            schema_version: METRICS_SCHEMA_VERSION.into(),
            config_hash,
            master_seed,
            windows,
            imbalance_formula: IMBALANCE_FORMULA.into(),
            distinction_ratio_formula: "10*log10(N_matched / N_crossed)".into(),
            efficiency_formula:
                "(N_memory[retrieval] / trials_memory) / (N_reference[input] / trials_reference), both channels".into(),
            cases: Vec::new(),
        }
    }
}

fn imbalance_pair(plus: f64, minus: f64) -> (Option<f64>, Option<f64>) {
    let ratio = if minus > 0.0 { Some(plus / minus) } else { None };
    (imbalance(plus, minus).ok(), ratio)
}

/// Per-window channel sums `[plus, minus]` of any per-bin series.
pub trait WindowSums {
    fn sums(&self, window: (f64, f64)) -> [f64; 2];
}

impl WindowSums for CountHistogram {
    fn sums(&self, window: (f64, f64)) -> [f64; 2] {
        [self.window_sum(0, window) as f64, self.window_sum(1, window) as f64]
    }
}

/// Per-bin means laid out like a histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanHistogram {
    pub layout: CountHistogram,
    pub means: [Vec<f64>; 2],
}

impl WindowSums for MeanHistogram {
    fn sums(&self, window: (f64, f64)) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (ch, o) in out.iter_mut().enumerate() {
            *o = self.means[ch]
                .iter()
                .enumerate()
                .filter(|(k, _)| {
                    let c = self.layout.bin_center(*k);
                    c >= window.0 && c <= window.1
                })
                .map(|(_, m)| m)
                .sum();
        }
        out
    }
}

fn ratios(matched: Option<usize>, r: [f64; 2], m: [f64; 2]) -> Option<DistinctionRatios> {
    matched.map(|k| DistinctionRatios {
        matched_channel: CHANNEL_LABELS[k],
        reference_db: distinction_ratio(r[k], r[1 - k]),
        retrieval_db: distinction_ratio(m[k], m[1 - k]),
    })
}

fn imbalances(r: [f64; 2], m: [f64; 2]) -> Imbalance {
    let (reference, reference_ratio) = imbalance_pair(r[0], r[1]);
    let (retrieval, retrieval_ratio) = imbalance_pair(m[0], m[1]);
    Imbalance {
        reference,
        retrieval,
        reference_ratio,
        retrieval_ratio,
    }
}

/// Computes the metrics of one case. `matched` is the index of the channel
/// whose discriminator is matched to the input winding, when the input has
/// one.
pub fn case_metrics(
    case: &str,
    reference: &CountHistogram,
    memory: &CountHistogram,
    expected_reference: &MeanHistogram,
    expected_memory: &MeanHistogram,
    win: &WindowSpec,
    matched: Option<usize>,
) -> Result<CaseMetrics> {
    let eff = efficiency(memory, reference, win)?;
    let r = reference.sums(win.input);
    let m = memory.sums(win.retrieval);
    let counts = [0, 1].map(|ch| {
        let ri = reference.window_sum(ch, win.input);
        let mr = memory.window_sum(ch, win.retrieval);
        let mi = memory.window_sum(ch, win.input);
        ChannelCounts {
            channel: CHANNEL_LABELS[ch],
            reference_input: ri,
            reference_input_stderr: (ri as f64).sqrt(),
            memory_retrieval: mr,
            memory_retrieval_stderr: (mr as f64).sqrt(),
            memory_input: mi,
            memory_input_stderr: (mi as f64).sqrt(),
        }
    });
    let argmax = match m[0].partial_cmp(&m[1]) {
        Some(std::cmp::Ordering::Greater) => Some(CHANNEL_LABELS[0]),
        Some(std::cmp::Ordering::Less) => Some(CHANNEL_LABELS[1]),
        _ => None,
    };
    let expected = expected_metrics(expected_reference, expected_memory, win, matched)?;
    Ok(CaseMetrics {
        case: case.to_string(),
        trials: memory.trials,
        efficiency: eff,
        distinction_ratio: ratios(matched, r, m),
        imbalance: imbalances(r, m),
        counts,
        retrieval_argmax_channel: argmax,
        expected,
    })
}

/// Noise-free metrics from per-bin means.
pub fn expected_metrics(
    reference: &MeanHistogram,
    memory: &MeanHistogram,
    win: &WindowSpec,
    matched: Option<usize>,
) -> Result<ExpectedMetrics> {
    let er = reference.sums(win.input);
    let em = memory.sums(win.retrieval);
    let er_total = er[0] + er[1];
    if !(er_total > 0.0) {
        return Err(Error::ZeroReference);
    }
    Ok(ExpectedMetrics {
        efficiency: (em[0] + em[1]) / er_total,
        distinction_ratio: ratios(matched, er, em),
        imbalance: imbalances(er, em),
    })
}

/// Writes a histogram as `time_s,channel,counts`, one row per bin and
/// channel; `time_s` is the bin start.
pub fn write_histogram_csv(hist: &CountHistogram, path: &Path) -> Result<()> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["time_s", "channel", "counts"]).map_err(io)?;
    for (ch, label) in CHANNEL_LABELS.iter().enumerate() {
        for (k, n) in hist.counts[ch].iter().enumerate() {
            w.write_record([format!("{:e}", hist.bin_start(k)), label.to_string(), n.to_string()])
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_metrics_json(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Numerical(e.to_string()))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Writes `<case>_reference.csv` and `<case>_memory.csv` for every case
/// plus `metrics.json` into `dir`.
pub fn emit_report(
    report: &MetricsReport,
    hists: &[(String, CountHistogram, CountHistogram)],
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (case, reference, memory) in hists {
        write_histogram_csv(reference, &dir.join(format!("{case}_reference.csv")))?;
        write_histogram_csv(memory, &dir.join(format!("{case}_memory.csv")))?;
    }
    write_metrics_json(report, &dir.join("metrics.json"))
}
