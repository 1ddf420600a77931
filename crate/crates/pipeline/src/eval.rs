use std::path::Path;

use actgen_core::{combine_distribution, EmojiDistribution, Epa, SentenceToEpa};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dialogue::{SessionState, Speaker};
use crate::triples::TrainingTriple;
use crate::PipelineError;

pub const RATING_HEADER: [&str; 6] = [
    "prompt",
    "response",
    "setting",
    "syntactic_coherence",
    "naturalness",
    "emotional_appropriateness",
];

/// Largest sample scored by full enumeration.
pub const EXACT_MAX_N: usize = 12;
pub const MIN_N: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    pub distances: Vec<f64>,
    pub mean: f64,
    pub baseline_distances: Vec<f64>,
    pub baseline_mean: f64,
    /// `(baseline_mean - mean) / baseline_mean`.
    pub relative_improvement: f64,
    pub failures: usize,
    pub baseline_failures: usize,
}

/// Sentence EPA of a generated response. An empty response is scored as
/// text without any affect cue.
fn response_epa(s2epa: &SentenceToEpa<f64>, text: &str) -> Result<Epa, PipelineError> {
    if text.trim().is_empty() {
        Ok(combine_distribution(
            &EmojiDistribution::uniform(),
            &s2epa.table,
        )?)
    } else {
        Ok(s2epa.epa(text)?)
    }
}

fn score_all<G>(
    mut generate: G,
    test: &[TrainingTriple],
    s2epa: &SentenceToEpa<f64>,
) -> (Vec<f64>, usize)
where
    G: FnMut(&TrainingTriple) -> Result<String, PipelineError>,
{
    let mut out = Vec::with_capacity(test.len());
    let mut failures = 0;
    for t in test {
        match generate(t).and_then(|r| response_epa(s2epa, &r)) {
            Ok(epa) => out.push(epa.distance(t.alpha)),
            Err(_) => failures += 1,
        }
    }
    (out, failures)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Distance between the sentence EPA of each generated response and its
/// target α, for a generator and an α-blind baseline. Failed generations are
/// counted and left out of the means.
pub fn round_trip_alignment<G, B>(
    generate: G,
    baseline: B,
    test: &[TrainingTriple],
    s2epa: &SentenceToEpa<f64>,
) -> Result<AlignmentReport, PipelineError>
where
    G: FnMut(&TrainingTriple) -> Result<String, PipelineError>,
    B: FnMut(&TrainingTriple) -> Result<String, PipelineError>,
{
    if test.is_empty() {
        return Err(PipelineError::Input("test set is empty".into()));
    }
    let (distances, failures) = score_all(generate, test, s2epa);
    let (baseline_distances, baseline_failures) = score_all(baseline, test, s2epa);
    let (m, b) = (mean(&distances), mean(&baseline_distances));
    let relative_improvement = if b > 0.0 { (b - m) / b } else { 0.0 };
    Ok(AlignmentReport {
        distances,
        mean: m,
        baseline_distances,
        baseline_mean: b,
        relative_improvement,
        failures,
        baseline_failures,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatingPair {
    pub prompt: String,
    pub response: String,
    pub setting: String,
}

impl RatingPair {
    /// Every (human text, agent reply) exchange of each session, in order.
    pub fn from_sessions<'a>(sessions: impl IntoIterator<Item = &'a SessionState>) -> Vec<Self> {
        let mut out = Vec::new();
        for s in sessions {
            for pair in s.transcript.chunks_exact(2) {
                if pair[0].speaker == Speaker::Human && pair[1].speaker == Speaker::Agent {
                    out.push(RatingPair {
                        prompt: pair[0].text.clone(),
                        response: pair[1].text.clone(),
                        setting: s.setting.to_string(),
                    });
                }
            }
        }
        out
    }
}

/// Writes a rating sheet with blank score columns; returns the data row count.
pub fn export_rating_sheet(pairs: &[RatingPair], path: &Path) -> Result<usize, PipelineError> {
    if pairs.is_empty() {
        return Err(PipelineError::Input("no pairs to export".into()));
    }
    let file = std::fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(RATING_HEADER)?;
    for p in pairs {
        w.write_record([
            p.prompt.as_str(),
            p.response.as_str(),
            p.setting.as_str(),
            "",
            "",
            "",
        ])?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))?;
    Ok(pairs.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonResult {
    /// Non-zero differences used.
    pub n: usize,
    /// Rank sum of positive differences `a - b`.
    pub w_plus: f64,
    pub w_minus: f64,
    /// `w_plus` for one-tailed tests, `min(w_plus, w_minus)` for two-tailed.
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    pub method: WilcoxonMethod,
}

/// Average ranks of `values` (1-based) doubled so they stay integral.
fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start+1 ..= end, doubled average = start + 1 + end
        for &i in &idx[start..end] {
            ranks[i] = (start + 1 + end) as u64;
        }
        start = end;
    }
    ranks
}

/// Null distribution counts of doubled W+ over all 2^n sign assignments.
fn exact_counts(ranks: &[u64]) -> Vec<u64> {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    for &r in ranks {
        for s in (r as usize..counts.len()).rev() {
            counts[s] += counts[s - r as usize];
        }
    }
    counts
}

/// Signed-rank test of `a` against `b`. The one-tailed alternative is that
/// `a` tends to exceed `b`. Zero differences are dropped and tied magnitudes
/// share their average rank. Uses the exact null distribution up to
/// [`EXACT_MAX_N`] pairs and a tie- and continuity-corrected normal
/// approximation beyond.
pub fn wilcoxon_signed_rank(
    a: &[f64],
    b: &[f64],
    one_tailed: bool,
    alpha_level: f64,
) -> Result<WilcoxonResult, PipelineError> {
    let n = nonzero_differences(a, b)?.len();
    let method = if n <= EXACT_MAX_N {
        WilcoxonMethod::Exact
    } else {
        WilcoxonMethod::Normal
    };
    wilcoxon_with_method(a, b, one_tailed, alpha_level, method)
}

fn nonzero_differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>, PipelineError> {
    if a.len() != b.len() {
        return Err(PipelineError::Input(format!(
            "score lists differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(PipelineError::Input("scores must be finite".into()));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if d.is_empty() {
        return Err(PipelineError::Degenerate);
    }
    if d.len() < MIN_N {
        return Err(PipelineError::Input(format!(
            "{} non-zero differences, at least {MIN_N} required",
            d.len()
        )));
    }
    Ok(d)
}

pub fn wilcoxon_with_method(
    a: &[f64],
    b: &[f64],
    one_tailed: bool,
    alpha_level: f64,
    method: WilcoxonMethod,
) -> Result<WilcoxonResult, PipelineError> {
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(PipelineError::Config(format!(
            "significance level {alpha_level} outside (0, 1)"
        )));
    }
    let d = nonzero_differences(a, b)?;
    let n = d.len();
    let ranks = doubled_ranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let w2_plus: u64 = d
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();
    let w2_total: u64 = ranks.iter().sum();
    let w2_minus = w2_total - w2_plus;

    let p_value = match method {
        WilcoxonMethod::Exact => {
            let counts = exact_counts(&ranks);
            let all = (1u64 << n) as f64;
            let upper = |w: u64| counts[w as usize..].iter().sum::<u64>() as f64 / all;
            if one_tailed {
                upper(w2_plus)
            } else {
                (2.0 * upper(w2_plus.max(w2_minus))).min(1.0)
            }
        }
        WilcoxonMethod::Normal => {
            let nf = n as f64;
            let mean = nf * (nf + 1.0) / 4.0;
            let tie_term: f64 = tie_sizes(&d).map(|t| t * t * t - t).sum::<f64>() / 48.0;
            let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
            let sd = var.sqrt();
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            let w_plus = w2_plus as f64 / 2.0;
            if one_tailed {
                normal.sf((w_plus - mean - 0.5) / sd)
            } else {
                let z = ((w_plus - mean).abs() - 0.5).max(0.0) / sd;
                (2.0 * normal.sf(z)).min(1.0)
            }
        }
    }
    .max(f64::MIN_POSITIVE);

    let (w_plus, w_minus) = (w2_plus as f64 / 2.0, w2_minus as f64 / 2.0);
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        statistic: if one_tailed {
            w_plus
        } else {
            w_plus.min(w_minus)
        },
        p_value,
        significant: p_value < alpha_level,
        method,
    })
}

/// Sizes of groups of equal magnitudes.
fn tie_sizes(d: &[f64]) -> impl Iterator<Item = f64> {
    let mut mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < mags.len() {
        let mut j = i + 1;
        while j < mags.len() && mags[j] == mags[i] {
            j += 1;
        }
        sizes.push((j - i) as f64);
        i = j;
    }
    sizes.into_iter()
}
