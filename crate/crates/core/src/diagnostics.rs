//! Energy diagnostics, empirical total variation, batch-means variance,
//! normality and KS checks, and CSV/JSON export of runs.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anneal::{Parity, Scheme};
use crate::engine::{PtTrace, RunSummary, SwapOutcome};
use crate::error::{ensure, Error, Result};
use crate::models::DiscreteDist;

/// Energy series of one chain with a burn-in marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub chain: usize,
    pub values: Vec<f64>,
    pub burn_in: usize,
}

impl EnergyTrace {
    /// Trace with the default 20% burn-in.
    pub fn new(chain: usize, values: Vec<f64>) -> Self {
        let burn_in = values.len() / 5;
        Self { chain, values, burn_in }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn kept(&self) -> &[f64] {
        &self.values[self.burn_in.min(self.values.len())..]
    }

    pub fn from_trace<S>(trace: &PtTrace<S>, chain: usize) -> Result<Self> {
        let v = trace
            .energy_series(chain)
            .ok_or_else(|| Error::invalid("trace has no energies recorded"))?;
        Ok(Self::new(chain, v))
    }
}

/// Pearson correlation of (V_t, V_{t+1}) after burn-in.
pub fn lag1_energy_autocorr(trace: &EnergyTrace) -> Result<f64> {
    let v = trace.kept();
    ensure(v.len() >= 30, || {
        format!("need at least 30 post burn-in points, got {}", v.len())
    })?;
    ensure(v.iter().all(|x| x.is_finite()), || {
        "non-finite energy after burn-in".into()
    })?;
    let (a, b) = (&v[..v.len() - 1], &v[1..]);
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Numerical("correlation undefined for a constant trace".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// The 3/√T band reported next to a lag-1 autocorrelation.
pub fn lag1_band(trace: &EnergyTrace) -> f64 {
    3.0 / (trace.kept().len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvEstimate {
    pub tv: f64,
    /// Expected TV of an exact sample of the same size.
    pub noise_floor: f64,
    /// Delta-method standard error of the estimate.
    pub stderr: f64,
    pub samples: usize,
}

/// ½ Σ_s |p̂(s) − p(s)| for state codes indexing `exact`.
pub fn empirical_tv_discrete(samples: &[usize], exact: &DiscreteDist) -> Result<TvEstimate> {
    ensure(!samples.is_empty(), || "no samples".into())?;
    let mut counts = vec![0u64; exact.len()];
    for &s in samples {
        ensure(s < exact.len(), || format!("state {s} outside the support table"))?;
        counts[s] += 1;
    }
    let n = samples.len() as f64;
    let (mut tv, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (&c, &p) in counts.iter().zip(&exact.probs) {
        let q = c as f64 / n;
        tv += (q - p).abs();
        // Delta method: ∂TV/∂q_s = ½ sgn(q_s − p_s).
        let g = if q > p {
            0.5
        } else if q < p {
            -0.5
        } else {
            0.0
        };
        m1 += g * q;
        m2 += g * g * q;
    }
    Ok(TvEstimate {
        tv: (0.5 * tv).clamp(0.0, 1.0),
        noise_floor: tv_noise_floor(exact, samples.len()),
        stderr: ((m2 - m1 * m1).max(0.0) / n).sqrt(),
        samples: samples.len(),
    })
}

/// Expected TV of n exact draws: ½ Σ_s E|X_s/n − p_s| with X_s ~ Bin(n, p_s),
/// using the closed form E|X − np| = 2m C(n, m) p^m (1 − p)^{n−m+1}, m = ⌊np⌋ + 1.
pub fn tv_noise_floor(exact: &DiscreteDist, n: usize) -> f64 {
    let nf = n as f64;
    let lg = |x: f64| libm::lgamma(x);
    0.5 * exact
        .probs
        .iter()
        .filter(|&&p| p > 0.0 && p < 1.0)
        .map(|&p| {
            let m = (nf * p).floor() + 1.0;
            if m > nf {
                return 0.0;
            }
            let log_mad = (2.0 * m).ln() + lg(nf + 1.0) - lg(m + 1.0) - lg(nf - m + 1.0)
                + m * p.ln()
                + (nf - m + 1.0) * (-p).ln_1p();
            log_mad.exp() / nf
        })
        .sum::<f64>()
}

/// Batch-means estimate of the asymptotic variance σ²(f).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    pub mean: f64,
    pub sigma2: f64,
    pub batches: usize,
    pub batch_size: usize,
}

impl BatchMeans {
    /// √T (mean − μ) / σ̂.
    pub fn standardized(&self, mu: f64) -> f64 {
        let t = (self.batches * self.batch_size) as f64;
        t.sqrt() * (self.mean - mu) / self.sigma2.sqrt()
    }
}

/// √T batches of size √T; the tail that does not fill a batch is dropped.
pub fn asymptotic_variance(f: &[f64]) -> Result<BatchMeans> {
    ensure(f.len() >= 1000, || {
        format!("need at least 1000 points for batch means, got {}", f.len())
    })?;
    let b = (f.len() as f64).sqrt().floor() as usize;
    let k = f.len() / b;
    let used = &f[..k * b];
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    let ss: f64 = used
        .chunks_exact(b)
        .map(|c| (c.iter().sum::<f64>() / b as f64 - mean).powi(2))
        .sum();
    let sigma2 = b as f64 * ss / (k - 1) as f64;
    if !(sigma2 > 0.0) {
        return Err(Error::Numerical("batch means have zero spread".into()));
    }
    Ok(BatchMeans {
        mean,
        sigma2,
        batches: k,
        batch_size: b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AndersonDarling {
    pub a2: f64,
    /// Small-sample modified statistic A²(1 + 0.75/n + 2.25/n²).
    pub a2_star: f64,
    pub p_value: f64,
}

/// Critical value of the modified statistic at level 0.01 for a normal with
/// estimated mean and variance.
pub const AD_CRITICAL_1PCT: f64 = 1.035;

impl AndersonDarling {
    pub fn passes_at_1pct(&self) -> bool {
        self.a2_star < AD_CRITICAL_1PCT
    }
}

/// Anderson–Darling test of normality with estimated mean and variance.
pub fn anderson_darling_normal(x: &[f64]) -> Result<AndersonDarling> {
    ensure(x.len() >= 8, || "need at least 8 observations".into())?;
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    ensure(sd > 0.0, || "constant sample".into())?;
    let mut z: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(|a, b| a.total_cmp(b));
    let log_cdf = |v: f64| (0.5 * libm::erfc(-v / std::f64::consts::SQRT_2)).ln();
    let s: f64 = (0..z.len())
        .map(|i| (2.0 * i as f64 + 1.0) * (log_cdf(z[i]) + log_cdf(-z[z.len() - 1 - i])))
        .sum();
    let a2 = -n - s / n;
    let a2_star = a2 * (1.0 + 0.75 / n + 2.25 / (n * n));
    let a = a2_star;
    let p_value = if a < 0.2 {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    } else if a < 0.34 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else if a < 0.6 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    };
    Ok(AndersonDarling {
        a2,
        a2_star,
        p_value: p_value.clamp(0.0, 1.0),
    })
}

/// 99% one-sample KS band for n observations (asymptotic, conservative for
/// discrete laws).
pub fn ks_band_99(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// 99% two-sample KS band.
pub fn ks_band_99_two_sample(n: usize, m: usize) -> f64 {
    1.628 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// sup_t |Pr̂(τ > t) − tail(t)| over integer t in 0..=t_max.
pub fn ks_against_tail(samples: &[f64], tail: impl Fn(usize) -> f64, t_max: usize) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    (0..=t_max)
        .map(|t| {
            let emp = (sorted.len() - sorted.partition_point(|&s| s <= t as f64)) as f64 / n;
            (emp - tail(t)).abs()
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS distance between empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / x.len() as f64 - j as f64 / y.len() as f64).abs());
    }
    d
}

// ---------------------------------------------------------------------------
// Export

/// The recorded series of a trace in tabular form (one row per t = 0..=T).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTable {
    pub chains: usize,
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    /// None for the initial row.
    pub parity: Option<Parity>,
    pub energies: Vec<f64>,
    pub indices: Vec<usize>,
    pub directions: Vec<i8>,
    /// None for idle pairs and for the initial row.
    pub accepted: Vec<Option<bool>>,
}

impl TraceTable {
    pub fn empty(chains: usize) -> Self {
        Self {
            chains,
            rows: Vec::new(),
        }
    }

    pub fn from_trace<S>(trace: &PtTrace<S>) -> Result<Self> {
        let energies = trace
            .energies
            .as_ref()
            .ok_or_else(|| Error::invalid("trace has no energies recorded"))?;
        let indices = trace
            .indices
            .as_ref()
            .ok_or_else(|| Error::invalid("trace has no index process recorded"))?;
        let dirs = trace.directions.as_ref().expect("directions recorded with indices");
        let chains = trace.n() + 1;
        let rows = (0..energies.len())
            .map(|t| TraceRow {
                t,
                parity: (t > 0).then(|| trace.parities[t - 1]),
                energies: energies[t].clone(),
                indices: indices[t].clone(),
                directions: dirs[t].clone(),
                accepted: if t == 0 {
                    vec![None; chains - 1]
                } else {
                    trace.outcomes[t - 1]
                        .iter()
                        .map(|o| match o {
                            SwapOutcome::Idle => None,
                            SwapOutcome::Rejected => Some(false),
                            SwapOutcome::Accepted => Some(true),
                        })
                        .collect()
                },
            })
            .collect();
        Ok(Self { chains, rows })
    }

    pub fn header(chains: usize) -> Vec<String> {
        let mut h = vec!["t".to_string(), "parity".to_string()];
        h.extend((0..chains).map(|n| format!("V_{n}")));
        h.extend((0..chains).map(|m| format!("I_{m}")));
        h.extend((0..chains).map(|m| format!("eps_{m}")));
        h.extend((0..chains.saturating_sub(1)).map(|n| format!("acc_{n}")));
        h
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(Self::header(self.chains))
            .map_err(|e| csv_err(path, e))?;
        for row in &self.rows {
            let mut rec = vec![row.t.to_string(), row.parity.map_or("init", |p| p.as_str()).to_string()];
            rec.extend(row.energies.iter().map(|v| v.to_string()));
            rec.extend(row.indices.iter().map(|v| v.to_string()));
            rec.extend(row.directions.iter().map(|v| v.to_string()));
            rec.extend(row.accepted.iter().map(|a| match a {
                None => String::new(),
                Some(true) => "1".into(),
                Some(false) => "0".into(),
            }));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut r = csv::Reader::from_reader(file);
        let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
        let chains = header.iter().filter(|h| h.starts_with("V_")).count();
        ensure(
            header.iter().eq(Self::header(chains).iter().map(String::as_str)),
            || format!("unexpected header in {}", path.display()),
        )?;
        let bad = |what: &str| Error::Model(format!("{}: malformed {what}", path.display()));
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let f: Vec<&str> = rec.iter().collect();
            let parity = match f[1] {
                "init" => None,
                "even" => Some(Parity::Even),
                "odd" => Some(Parity::Odd),
                _ => return Err(bad("parity")),
            };
            let c = chains;
            let parse_f = |s: &str| s.parse::<f64>().map_err(|_| bad("energy"));
            rows.push(TraceRow {
                t: f[0].parse().map_err(|_| bad("time"))?,
                parity,
                energies: f[2..2 + c].iter().map(|s| parse_f(s)).collect::<Result<_>>()?,
                indices: f[2 + c..2 + 2 * c]
                    .iter()
                    .map(|s| s.parse().map_err(|_| bad("index")))
                    .collect::<Result<_>>()?,
                directions: f[2 + 2 * c..2 + 3 * c]
                    .iter()
                    .map(|s| s.parse().map_err(|_| bad("direction")))
                    .collect::<Result<_>>()?,
                accepted: f[2 + 3 * c..]
                    .iter()
                    .map(|s| match *s {
                        "" => Ok(None),
                        "1" => Ok(Some(true)),
                        "0" => Ok(Some(false)),
                        _ => Err(bad("accept bit")),
                    })
                    .collect::<Result<_>>()?,
            });
        }
        Ok(Self { chains, rows })
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `header` then `rows` as CSV.
pub fn write_csv_rows<R: AsRef<[String]>>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.as_ref()).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f).map_err(|e| io_err(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Writes trace.csv (first replica), energy_pairs.csv ((V_t, V_{t+1}) per
/// chain after burn-in), index_paths.csv (all replicas, long format) and
/// summary.json into `dir`.
pub fn export_run<S>(traces: &[PtTrace<S>], dir: &Path, burn_in: usize) -> Result<Vec<PathBuf>> {
    ensure(!traces.is_empty(), || "no traces to export".into())?;
    create_dir(dir)?;
    let first = &traces[0];
    let chains = first.n() + 1;
    let trace_path = dir.join("trace.csv");
    TraceTable::from_trace(first)?.write_csv(&trace_path)?;

    let pairs_path = dir.join("energy_pairs.csv");
    let energies = first.energies.as_ref().expect("checked by TraceTable");
    let pair_rows = (0..chains).flat_map(|n| {
        energies
            .windows(2)
            .enumerate()
            .skip(burn_in)
            .map(move |(t, w)| vec![n.to_string(), t.to_string(), w[0][n].to_string(), w[1][n].to_string()])
    });
    write_csv_rows(&pairs_path, &["chain", "t", "v_t", "v_next"], pair_rows)?;

    let paths_path = dir.join("index_paths.csv");
    export_index_paths(traces, &paths_path, usize::MAX)?;

    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &RunSummary::from_traces(traces, burn_in)?)?;
    Ok(vec![trace_path, pairs_path, paths_path, summary_path])
}

/// Long-format index trajectories (replica, machine, t, index) up to `cutoff`.
pub fn export_index_paths<S>(traces: &[PtTrace<S>], path: &Path, cutoff: usize) -> Result<()> {
    let mut rows = Vec::new();
    for (rep, tr) in traces.iter().enumerate() {
        let ix = tr
            .indices
            .as_ref()
            .ok_or_else(|| Error::invalid("trace has no index process recorded"))?;
        for (t, row) in ix.iter().enumerate().take(cutoff.saturating_add(1)) {
            for (m, i) in row.iter().enumerate() {
                rows.push(vec![rep.to_string(), m.to_string(), t.to_string(), i.to_string()]);
            }
        }
    }
    write_csv_rows(path, &["replica", "machine", "t", "index"], rows)
}

/// Index trajectories of a standalone walk (replica, t, index).
pub fn export_walk_paths(paths: &[Vec<usize>], path: &Path) -> Result<()> {
    let rows = paths.iter().enumerate().flat_map(|(rep, p)| {
        p.iter()
            .enumerate()
            .map(move |(t, i)| vec![rep.to_string(), t.to_string(), i.to_string()])
    });
    write_csv_rows(path, &["replica", "t", "index"], rows)
}

/// Scheme tag used in file names.
pub fn scheme_tag(s: Scheme) -> &'static str {
    match s {
        Scheme::Nrpt => "nrpt",
        Scheme::Rpt => "rpt",
    }
}
