use std::collections::BTreeMap;

use super::ExperimentRecord;

/// Per-config aggregate over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub config_hash: String,
    pub env_kind: String,
    pub n: Option<usize>,
    pub agent: String,
    pub k: Option<usize>,
    pub beta: Option<f64>,
    pub lambda_reg: Option<f64>,
    pub eps0: Option<f64>,
    pub seeds: usize,
    pub solved: usize,
    pub errors: usize,
    /// Median over seeds with unsolved seeds counted as infinitely slow;
    /// `None` unless more than half the seeds solved.
    pub median_time_to_learn: Option<f64>,
}

/// Scaling of one agent configuration across problem sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub env_kind: String,
    pub agent: String,
    pub k: Option<usize>,
    pub beta: Option<f64>,
    pub lambda_reg: Option<f64>,
    pub eps0: Option<f64>,
    pub sizes_solved: usize,
    pub largest_solved: Option<usize>,
    /// Least-squares slope of ln(median T_learn) against ln N over solved sizes.
    pub slope: Option<f64>,
}

pub fn median_with_unsolved(times: &[Option<usize>]) -> Option<f64> {
    if times.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = times
        .iter()
        .map(|t| t.map_or(f64::INFINITY, |t| t as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    m.is_finite().then_some(m)
}

pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// One row per config hash, in order of first appearance.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        let g = groups.entry(r.config_hash.clone()).or_default();
        if g.is_empty() {
            order.push(r.config_hash.clone());
        }
        g.push(r);
    }
    order
        .iter()
        .map(|h| {
            let g = &groups[h];
            let first = g[0];
            let ok: Vec<&&ExperimentRecord> = g.iter().filter(|r| r.error.is_none()).collect();
            let times: Vec<Option<usize>> = ok.iter().map(|r| r.time_to_learn).collect();
            SummaryRow {
                config_hash: h.clone(),
                env_kind: first.env_kind.clone(),
                n: first.n,
                agent: first.agent.clone(),
                k: first.k,
                beta: first.beta,
                lambda_reg: first.lambda_reg,
                eps0: first.eps0,
                seeds: g.len(),
                solved: times.iter().filter(|t| t.is_some()).count(),
                errors: g.len() - ok.len(),
                median_time_to_learn: median_with_unsolved(&times),
            }
        })
        .collect()
}

fn scaling_key(r: &SummaryRow) -> String {
    format!(
        "{}|{}|{:?}|{:?}|{:?}|{:?}",
        r.env_kind, r.agent, r.k, r.beta, r.lambda_reg, r.eps0
    )
}

/// Group summary rows that differ only in size, in order of first appearance.
pub fn scaling(summary: &[SummaryRow]) -> Vec<ScalingRow> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<&SummaryRow>> = BTreeMap::new();
    for r in summary {
        let key = scaling_key(r);
        let g = groups.entry(key.clone()).or_default();
        if g.is_empty() {
            order.push(key);
        }
        g.push(r);
    }
    order
        .iter()
        .map(|key| {
            let g = &groups[key];
            let solved: Vec<(f64, f64)> = g
                .iter()
                .filter_map(|r| Some((r.n? as f64, r.median_time_to_learn?)))
                .collect();
            let first = g[0];
            ScalingRow {
                env_kind: first.env_kind.clone(),
                agent: first.agent.clone(),
                k: first.k,
                beta: first.beta,
                lambda_reg: first.lambda_reg,
                eps0: first.eps0,
                sizes_solved: solved.len(),
                largest_solved: g
                    .iter()
                    .filter(|r| r.median_time_to_learn.is_some())
                    .filter_map(|r| r.n)
                    .max(),
                slope: loglog_slope(&solved),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_counts_unsolved_as_infinite() {
        assert_eq!(median_with_unsolved(&[Some(3), None, Some(1)]), Some(3.0));
        assert_eq!(median_with_unsolved(&[Some(3), None, None]), None);
        assert_eq!(median_with_unsolved(&[Some(2), Some(4)]), Some(3.0));
        assert_eq!(median_with_unsolved(&[Some(2), None]), None);
        assert_eq!(median_with_unsolved(&[]), None);
    }

    #[test]
    fn slope_recovers_cubic_scaling() {
        let pts: Vec<(f64, f64)> = [5.0, 10.0, 15.0, 20.0]
            .iter()
            .map(|&n: &f64| (n, n.powi(3)))
            .collect();
        assert!((loglog_slope(&pts).unwrap() - 3.0).abs() < 0.01);
        assert_eq!(loglog_slope(&pts[..1]), None);
        assert_eq!(loglog_slope(&[(5.0, 1.0), (5.0, 2.0)]), None);
    }
}
