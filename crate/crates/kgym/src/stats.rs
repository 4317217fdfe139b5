//! Scalar metrics and the statistics layer: Wilson score intervals,
//! McNemar paired tests, the unbiased pass@k estimator, Spearman rank
//! correlation, and aggregate run reports.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::classify::{classify, entity_in_answer, strict_em, Category};
use crate::gold::GoldSet;
use crate::kg::KnowledgeGraph;
use crate::reward::{self, RewardBreakdown, RewardError, Rung};
use crate::trajectory::{FormatFlag, ToolVerb, Trajectory};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("n must be >= 1")]
    EmptySample,
    #[error("successes {successes} exceed n {n}")]
    TooManySuccesses { successes: usize, n: usize },
    #[error("confidence must lie strictly between 0 and 1")]
    BadConfidence,
    #[error("k = {k} exceeds the sample count {n} for some question")]
    KTooLarge { k: usize, n: usize },
    #[error("inputs must have equal length >= 2")]
    BadCorrelationInput,
    #[error("rank correlation undefined: an input has zero rank variance")]
    ZeroVariance,
    #[error("run contains no trajectories")]
    EmptyRun,
    #[error("unresolved qid {0:?}")]
    UnresolvedQid(String),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// A two-sided confidence interval on a rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ci {
    pub low: f64,
    pub high: f64,
}

/// Wilson score interval for a binomial rate at the given confidence level.
pub fn wilson_ci(successes: usize, n: usize, confidence: f64) -> Result<Ci, StatsError> {
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    if successes > n {
        return Err(StatsError::TooManySuccesses { successes, n });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::BadConfidence);
    }
    let z = Normal::new(0.0, 1.0)
        .expect("unit normal")
        .inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    Ok(Ci {
        low: (center - half).max(0.0),
        high: (center + half).min(1.0),
    })
}

/// McNemar's test on the discordant-pair counts `b` and `c`: exact
/// two-sided binomial when `b + c < 25`, continuity-corrected chi-squared
/// with one degree of freedom otherwise. `b + c = 0` yields p = 1.
pub fn mcnemar_p(b: usize, c: usize) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    if n < 25 {
        let m = b.min(c);
        // two-sided exact binomial at p = 1/2
        let mut tail = 0.0f64;
        let mut coeff = 1.0f64; // C(n, 0)
        for i in 0..=m {
            if i > 0 {
                coeff *= (n - i + 1) as f64 / i as f64;
            }
            tail += coeff;
        }
        (2.0 * tail * 0.5f64.powi(n as i32)).min(1.0)
    } else {
        let diff = b.abs_diff(c) as f64;
        let stat = (diff - 1.0).powi(2) / n as f64;
        // survival function of chi-squared with 1 dof
        erfc((stat / 2.0).sqrt())
    }
}

/// Unbiased pass@k over per-question (correct, samples) counts:
/// `mean(1 - C(n - c, k) / C(n, k))`. Degenerates to any-correct at k = n.
pub fn pass_at_k(per_question: &[(usize, usize)], k: usize) -> Result<f64, StatsError> {
    if per_question.is_empty() {
        return Err(StatsError::EmptyRun);
    }
    let mut sum = 0.0;
    for &(c, n) in per_question {
        if k > n {
            return Err(StatsError::KTooLarge { k, n });
        }
        let misses = n - c.min(n);
        // C(misses, k) / C(n, k) as a stable running product
        let frac = if misses < k {
            0.0
        } else {
            (0..k).fold(1.0f64, |acc, i| acc * (misses - i) as f64 / (n - i) as f64)
        };
        sum += 1.0 - frac;
    }
    Ok(sum / per_question.len() as f64)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties (Pearson on the
/// rank vectors).
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(StatsError::BadCorrelationInput);
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mean_x = rx.iter().sum::<f64>() / n;
    let mean_y = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..rx.len() {
        let dx = rx[i] - mean_x;
        let dy = ry[i] - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// First parsed call of a trajectory, recorded for behavioral diffing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirstCall {
    pub verb: ToolVerb,
    pub entity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
}

/// Per-trajectory scoring output: category, flags, reward breakdown, and
/// the match predicates the aggregate metrics are built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub qid: String,
    pub category: Category,
    pub em: bool,
    pub strict_em: bool,
    pub contem: bool,
    pub entity_in_answer: bool,
    pub n_calls: usize,
    pub flags: Vec<FormatFlag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_call: Option<FirstCall>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub breakdown: RewardBreakdown,
}

/// Aggregate metrics over one scored run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rung: String,
    pub n: usize,
    pub em_rate: f64,
    pub em_ci: Ci,
    pub contem_rate: f64,
    pub contem_ci: Ci,
    pub strict_em_count: usize,
    pub cvt_count: usize,
    pub cvt_rate: f64,
    pub cvt_ci: Ci,
    pub tools_per_q: f64,
    pub category_histogram: BTreeMap<Category, usize>,
    pub mean_breakdown: RewardBreakdown,
}

impl RunReport {
    /// One aligned text row per report, Table-style: label, EM, CvT count,
    /// CvT %, Wilson CI, Tools/Q.
    pub fn table(rows: &[(&str, &RunReport)]) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>7} {:>12} {:>8} {:>16} {:>8}\n",
            "run", "EM", "CvT count", "CvT %", "Wilson 95% CI", "Tools/Q"
        ));
        for (label, r) in rows {
            out.push_str(&format!(
                "{:<24} {:>7.3} {:>12} {:>7.2}% [{:>5.2}, {:>5.2}] {:>8.2}\n",
                label,
                r.em_rate,
                format!("{}/{}", r.cvt_count, r.n),
                r.cvt_rate * 100.0,
                r.cvt_ci.low * 100.0,
                r.cvt_ci.high * 100.0,
                r.tools_per_q,
            ));
        }
        out
    }
}

/// Correct-via-tool count restricted to a caller-supplied qid subset (for
/// hard-partition reporting against a frozen question list). Returns
/// (cvt count in subset, subset size seen in the run).
pub fn cvt_on_subset<'a, Q>(records: &[ScoredRecord], subset: Q) -> (usize, usize)
where
    Q: IntoIterator<Item = &'a str>,
{
    let wanted: std::collections::HashSet<&str> = subset.into_iter().collect();
    let mut n = 0usize;
    let mut cvt = 0usize;
    for r in records {
        if wanted.contains(r.qid.as_str()) {
            n += 1;
            cvt += (r.category == Category::CorrectViaTool) as usize;
        }
    }
    (cvt, n)
}

/// Containment EM: some normalized gold answer is a substring of the
/// normalized prediction (equality when the gold normalizes to empty, so
/// containment can never be stricter than exact match).
pub fn contains_em(normalized_answer: &str, normalized_golds: &[String]) -> bool {
    normalized_golds.iter().any(|g| {
        if g.is_empty() {
            normalized_answer.is_empty()
        } else {
            normalized_answer.contains(g.as_str())
        }
    })
}

/// Scores one trajectory against its gold record.
pub fn score_one(
    traj: &Trajectory,
    golds: &GoldSet,
    g: &KnowledgeGraph,
    rung: Rung,
) -> Result<ScoredRecord, StatsError> {
    let gold = golds
        .get(&traj.question_id)
        .ok_or_else(|| StatsError::UnresolvedQid(traj.question_id.clone()))?;
    let answer = traj.normalized_answer();
    let norm_golds = gold.normalized_answers();
    let em =
        !norm_golds.is_empty() && reward::exact_match(&answer, &norm_golds).unwrap_or(0.0) == 1.0;
    let breakdown = reward::score(rung, traj, gold)?;
    let first_call = traj.parsed_calls().next().map(|args| FirstCall {
        verb: args.verb,
        entity: args.entity.clone(),
        relation: args.relation.clone(),
    });
    Ok(ScoredRecord {
        qid: traj.question_id.clone(),
        category: classify(traj, gold, g),
        em,
        strict_em: strict_em(traj, gold),
        contem: contains_em(&answer, &norm_golds),
        entity_in_answer: entity_in_answer(traj),
        n_calls: traj.call_count(),
        flags: traj.flags.iter().copied().collect(),
        first_call,
        answer: traj.final_answer_raw.clone(),
        breakdown,
    })
}

/// Scores, classifies, and aggregates a run: a parallel per-trajectory map
/// with an order-preserving collect, then a sequential reduce, so output
/// is deterministic regardless of thread count.
pub fn score_run(
    trajs: &[Trajectory],
    golds: &GoldSet,
    g: &KnowledgeGraph,
    rung: Rung,
) -> Result<(RunReport, Vec<ScoredRecord>), StatsError> {
    if trajs.is_empty() {
        return Err(StatsError::EmptyRun);
    }
    let records: Vec<ScoredRecord> = trajs
        .par_iter()
        .map(|traj| score_one(traj, golds, g, rung))
        .collect::<Result<_, _>>()?;

    let n = records.len();
    let mut histogram: BTreeMap<Category, usize> =
        Category::ALL.into_iter().map(|c| (c, 0)).collect();
    for r in &records {
        *histogram.get_mut(&r.category).expect("all categories") += 1;
    }
    let em_count = records.iter().filter(|r| r.em).count();
    let contem_count = records.iter().filter(|r| r.contem).count();
    let strict_em_count = records.iter().filter(|r| r.strict_em).count();
    let cvt_count = histogram[&Category::CorrectViaTool];
    let total_calls: usize = records.iter().map(|r| r.n_calls).sum();
    let breakdowns: Vec<RewardBreakdown> = records.iter().map(|r| r.breakdown.clone()).collect();
    let report = RunReport {
        rung: rung.name().to_string(),
        n,
        em_rate: em_count as f64 / n as f64,
        em_ci: wilson_ci(em_count, n, 0.95)?,
        contem_rate: contem_count as f64 / n as f64,
        contem_ci: wilson_ci(contem_count, n, 0.95)?,
        strict_em_count,
        cvt_count,
        cvt_rate: cvt_count as f64 / n as f64,
        cvt_ci: wilson_ci(cvt_count, n, 0.95)?,
        tools_per_q: total_calls as f64 / n as f64,
        category_histogram: histogram,
        mean_breakdown: RewardBreakdown::mean_of(&breakdowns).expect("non-empty"),
    };
    Ok((report, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::trajectory::parse_transcript;
    use proptest::prelude::*;

    const TOL: f64 = 1e-9;

    #[test]
    fn wilson_matches_published_rows() {
        let pct = |ci: Ci| (ci.low * 100.0, ci.high * 100.0);
        let (lo, hi) = pct(wilson_ci(133, 3531, 0.95).unwrap());
        assert!((lo - 3.19).abs() < 0.005 && (hi - 4.45).abs() < 0.005);
        let (lo, hi) = pct(wilson_ci(338, 3531, 0.95).unwrap());
        assert!((lo - 8.65).abs() < 0.005 && (hi - 10.59).abs() < 0.005);
        let (lo, hi) = pct(wilson_ci(0, 3531, 0.95).unwrap());
        assert!(lo.abs() < 0.005 && (hi - 0.11).abs() < 0.005);
    }

    #[test]
    fn wilson_rejects_bad_input() {
        assert!(wilson_ci(1, 0, 0.95).is_err());
        assert!(wilson_ci(5, 3, 0.95).is_err());
        assert!(wilson_ci(1, 3, 1.5).is_err());
    }

    #[test]
    fn mcnemar_fixtures() {
        assert_eq!(mcnemar_p(0, 0), 1.0);
        assert!((mcnemar_p(10, 0) - 2.0 / 1024.0).abs() < 1e-12);
        // chi2 = (|30-10|-1)^2/40 = 9.025
        assert!((mcnemar_p(30, 10) - 0.00266).abs() < 5e-5);
    }

    #[test]
    fn pass_at_k_fixtures() {
        assert_eq!(pass_at_k(&[(16, 16), (16, 16)], 1).unwrap(), 1.0);
        assert_eq!(pass_at_k(&[(1, 16)], 16).unwrap(), 1.0);
        assert!((pass_at_k(&[(8, 16)], 1).unwrap() - 0.5).abs() < TOL);
        assert!(matches!(
            pass_at_k(&[(1, 4)], 5),
            Err(StatsError::KTooLarge { .. })
        ));
    }

    #[test]
    fn spearman_fixtures() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman_rho(&xs, &xs).unwrap() - 1.0).abs() < TOL);
        let rev = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman_rho(&xs, &rev).unwrap() + 1.0).abs() < TOL);
        let ys = [1.0, 2.0, 4.0, 3.0];
        assert!((spearman_rho(&xs, &ys).unwrap() - 0.8).abs() < TOL);
        assert!(spearman_rho(&xs, &[1.0]).is_err());
        assert!(spearman_rho(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn spearman_handles_ties_with_average_ranks() {
        let xs = [1.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 2.0, 3.0, 4.0];
        let rho = spearman_rho(&xs, &ys).unwrap();
        assert!(rho > 0.9 && rho < 1.0);
    }

    #[test]
    fn report_on_all_correct_run() {
        let g = fixtures::g0();
        let golds = GoldSet::new(fixtures::g0_gold_records()).unwrap();
        let t1 = parse_transcript("<answer>judaism</answer>").with_qid("g0-religion");
        let t2 = parse_transcript("<answer>William Wyler</answer>").with_qid("g0-director");
        let (report, records) = score_run(&[t1, t2], &golds, &g, Rung::Binary).unwrap();
        assert_eq!(report.n, 2);
        assert_eq!(report.em_rate, 1.0);
        assert_eq!(report.tools_per_q, 0.0);
        assert_eq!(report.category_histogram[&Category::CorrectNoTool], 2);
        assert!(records.iter().all(|r| r.em && r.contem));
    }

    #[test]
    fn contem_never_below_em_and_cvt_never_above() {
        let g = fixtures::g0();
        let golds = GoldSet::new(fixtures::g0_gold_records()).unwrap();
        let trajs = vec![
            parse_transcript("<answer>judaism</answer>").with_qid("g0-religion"),
            parse_transcript(
                "<search>get_tail_entities(m.05, film.film.directed_by)</search><tool_response>william wyler</tool_response><answer>maybe william wyler himself</answer>",
            )
            .with_qid("g0-director"),
        ];
        let (report, records) = score_run(&trajs, &golds, &g, Rung::SelfV).unwrap();
        assert!(report.contem_rate >= report.em_rate);
        let em_count = records.iter().filter(|r| r.em).count();
        assert!(report.cvt_count <= em_count);
        // the second answer contains the gold but is not an exact match
        assert!(records[1].contem && !records[1].em);
    }

    #[test]
    fn cvt_subset_restriction() {
        let g = fixtures::g0();
        let golds = GoldSet::new(fixtures::g0_gold_records()).unwrap();
        let grounded = parse_transcript(
            "<search>get_tail_entities(m.01, people.person.religion)</search><tool_response>judaism</tool_response><answer>judaism</answer>",
        )
        .with_qid("g0-religion");
        let memory = parse_transcript("<answer>william wyler</answer>").with_qid("g0-director");
        let (_, records) = score_run(&[grounded, memory], &golds, &g, Rung::SelfV).unwrap();
        assert_eq!(cvt_on_subset(&records, ["g0-religion"]), (1, 1));
        assert_eq!(cvt_on_subset(&records, ["g0-director"]), (0, 1));
        assert_eq!(cvt_on_subset(&records, ["g0-religion", "g0-director"]), (1, 2));
        assert_eq!(cvt_on_subset(&records, []), (0, 0));
    }

    #[test]
    fn report_errors() {
        let g = fixtures::g0();
        let golds = GoldSet::new(fixtures::g0_gold_records()).unwrap();
        assert!(matches!(
            score_run(&[], &golds, &g, Rung::Binary),
            Err(StatsError::EmptyRun)
        ));
        let stray = parse_transcript("<answer>x</answer>").with_qid("missing");
        assert!(matches!(
            score_run(&[stray], &golds, &g, Rung::Binary),
            Err(StatsError::UnresolvedQid(_))
        ));
    }

    proptest! {
        #[test]
        fn wilson_contains_point_estimate(s in 0usize..500, extra in 1usize..500) {
            let n = s + extra;
            let ci = wilson_ci(s, n, 0.95).unwrap();
            let p = s as f64 / n as f64;
            prop_assert!(ci.low <= p + 1e-12 && p <= ci.high + 1e-12);
        }

        #[test]
        fn wilson_width_shrinks_with_n(s in 1usize..50, n in 51usize..200) {
            let ci1 = wilson_ci(s, n, 0.95).unwrap();
            let ci2 = wilson_ci(s * 4, n * 4, 0.95).unwrap();
            prop_assert!(ci2.high - ci2.low <= ci1.high - ci1.low + 1e-12);
        }

        #[test]
        fn mcnemar_is_symmetric(b in 0usize..60, c in 0usize..60) {
            prop_assert!((mcnemar_p(b, c) - mcnemar_p(c, b)).abs() < 1e-12);
        }

        #[test]
        fn pass_at_k_nondecreasing_in_k(
            counts in proptest::collection::vec((0usize..=8, 8usize..=8), 1..12),
        ) {
            let mut prev = 0.0;
            for k in 1..=8 {
                let v = pass_at_k(&counts, k).unwrap();
                prop_assert!(v + 1e-12 >= prev, "k={k}: {v} < {prev}");
                prev = v;
            }
        }
    }
}
