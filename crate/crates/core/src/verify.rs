//! The invariant suite run by `chanent verify` and the acceptance tests.
//!
//! Every criterion draws its instances from its own ChaCha stream of the
//! configured seed, so criteria can run alone or together with identical
//! results. Reports carry no timing, which keeps them byte-identical across runs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accinfo::{benatti_bracket, holevo_check};
use crate::channel::{coordinate_projection, ReductionChannel};
use crate::ensemble::{mutual_entropy, mutual_entropy_relative};
use crate::io::to_report_json;
use crate::oracle::{block_example_analyze, block_example_decomposition, qubit_r, qubit_r_series};
use crate::random;
use crate::roof::{affinity_certificate, solve_r, SolverConfig};
use crate::state::{max_abs_diff, DensityOperator};
use crate::{Result, Tolerances, C64};

pub const QUBIT_TOL: f64 = 1e-5;
pub const SERIES_TOL: f64 = 1e-8;
pub const PURE_ZERO_TOL: f64 = 1e-6;
pub const MUTUAL_IDENTITY_TOL: f64 = 1e-10;
pub const RECONSTRUCTION_TOL: f64 = 1e-9;
pub const PURITY_TOL: f64 = 1e-9;
pub const CANDIDATE_TOL: f64 = 1e-4;
pub const CONCAVITY_TOL: f64 = 2e-4;
pub const HOLEVO_TOL: f64 = 1e-6;
pub const BRACKET_TOL: f64 = 1e-6;
pub const COLLAPSE_TOL: f64 = 1e-5;
pub const AFFINITY_TOL: f64 = 1e-4;

/// Criteria in suite order.
pub const CRITERIA: [(u8, &str); 10] = [
    (1, "qubit oracle equivalence"),
    (2, "series consistency"),
    (3, "pure-state zero law"),
    (4, "mutual-entropy identity"),
    (5, "block example decomposition"),
    (6, "concavity of H"),
    (7, "Holevo bound"),
    (8, "accessible-information bracket"),
    (9, "affinity certificate"),
    (10, "determinism"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Solver restarts per roof evaluation.
    pub restarts: usize,
    pub qubit_instances: usize,
    pub series_terms: usize,
    pub pure_states: usize,
    pub mutual_pairs: usize,
    pub block_instances: usize,
    /// Ginibre states per dimension used to measure how often the block construction applies.
    pub block_survey: usize,
    pub concavity_triples: usize,
    pub holevo_pairs: usize,
    pub bracket_instances: usize,
    pub commuting_instances: usize,
    pub measurement_samples: usize,
    pub affinity_instances: usize,
    pub affinity_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 16,
            qubit_instances: 100,
            series_terms: 200,
            pure_states: 50,
            mutual_pairs: 200,
            block_instances: 50,
            block_survey: 200,
            concavity_triples: 100,
            holevo_pairs: 100,
            bracket_instances: 20,
            commuting_instances: 10,
            measurement_samples: 64,
            affinity_instances: 5,
            affinity_samples: 20,
        }
    }
}

impl VerifyConfig {
    /// Caps every per-criterion instance count at `cap` (terms and samples excepted).
    pub fn capped(mut self, cap: usize) -> Self {
        for count in [
            &mut self.qubit_instances,
            &mut self.pure_states,
            &mut self.mutual_pairs,
            &mut self.block_instances,
            &mut self.block_survey,
            &mut self.concavity_triples,
            &mut self.holevo_pairs,
            &mut self.bracket_instances,
            &mut self.commuting_instances,
            &mut self.affinity_instances,
        ] {
            *count = (*count).min(cap);
        }
        self
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig::default().with_restarts(self.restarts).with_seed(self.seed)
    }

    fn rng(&self, criterion: u8) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(criterion as u64);
        rng
    }
}

/// One thresholded quantity: passes when every case has `value ≤ threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Largest recorded value; `None` before any case ran.
    pub worst: Option<f64>,
    pub threshold: f64,
    pub failures: usize,
}

impl Check {
    fn new(name: &str, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            worst: None,
            threshold,
            failures: 0,
        }
    }

    fn record(&mut self, value: f64) {
        if value.is_nan() || value > self.threshold {
            self.failures += 1;
        }
        match self.worst {
            Some(w) if w.is_nan() || value <= w => {}
            _ => self.worst = Some(value),
        }
    }

    fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub checks: Vec<Check>,
    /// Informational statistics; never asserted.
    pub stats: BTreeMap<String, f64>,
    pub error: Option<String>,
}

impl CriterionReport {
    fn new(id: u8, cases: usize, checks: Vec<Check>, stats: BTreeMap<String, f64>) -> Self {
        Self {
            id,
            name: criterion_name(id).to_string(),
            passed: checks.iter().all(Check::passed),
            cases,
            checks,
            stats,
            error: None,
        }
    }

    fn failed(id: u8, err: crate::Error) -> Self {
        Self {
            id,
            name: criterion_name(id).to_string(),
            passed: false,
            cases: 0,
            checks: Vec::new(),
            stats: BTreeMap::new(),
            error: Some(err.to_string()),
        }
    }

    /// One line per criterion: `PASS [1] qubit oracle equivalence: ...`.
    pub fn summary_line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut line = format!("{verdict} [{}] {} ({} cases)", self.id, self.name, self.cases);
        for c in &self.checks {
            let worst = c.worst.map_or("n/a".to_string(), |w| format!("{w:.3e}"));
            line.push_str(&format!(
                "; {}: worst {worst} vs {:.0e}, {} failing",
                c.name, c.threshold, c.failures
            ));
        }
        if let Some(e) = &self.error {
            line.push_str(&format!("; error: {e}"));
        }
        line
    }
}

/// JUnit-style counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub tests: usize,
    pub failures: usize,
    pub errors: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub config: VerifyConfig,
    pub criteria: Vec<CriterionReport>,
    pub summary: Summary,
}

impl SuiteReport {
    pub fn from_criteria(config: &VerifyConfig, criteria: Vec<CriterionReport>) -> Self {
        let errors = criteria.iter().filter(|c| c.error.is_some()).count();
        let failures = criteria.iter().filter(|c| !c.passed && c.error.is_none()).count();
        let summary = Summary {
            tests: criteria.len(),
            failures,
            errors,
            skipped: CRITERIA.len() - criteria.len(),
        };
        Self {
            seed: config.seed,
            config: config.clone(),
            criteria,
            summary,
        }
    }

    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        to_report_json(self)
    }
}

pub fn criterion_name(id: u8) -> &'static str {
    CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .unwrap_or("unknown")
}

/// Runs a single criterion. Criterion 10 reruns the other nine twice.
pub fn run_criterion(id: u8, cfg: &VerifyConfig) -> CriterionReport {
    let outcome = match id {
        1 => qubit_oracle(cfg),
        2 => series_consistency(cfg),
        3 => pure_state_zero(cfg),
        4 => mutual_identity(cfg),
        5 => block_example(cfg),
        6 => concavity(cfg),
        7 => holevo(cfg),
        8 => bracket(cfg),
        9 => affinity(cfg),
        10 => {
            let ids: Vec<u8> = (1..=9).collect();
            let a = run_suite(cfg, &ids);
            let b = run_suite(cfg, &ids);
            determinism(&a, &b)
        }
        _ => Err(crate::Error::OutOfRange {
            what: "criterion id",
            value: id as f64,
        }),
    };
    outcome.unwrap_or_else(|e| CriterionReport::failed(id, e))
}

/// Runs the listed criteria in order (all ten when `ids` is empty).
pub fn run_suite(cfg: &VerifyConfig, ids: &[u8]) -> SuiteReport {
    let all: Vec<u8> = CRITERIA.iter().map(|(i, _)| *i).collect();
    let ids = if ids.is_empty() { &all[..] } else { ids };
    let criteria = ids.iter().map(|&id| run_criterion(id, cfg)).collect();
    SuiteReport::from_criteria(cfg, criteria)
}

/// Compares two suite reports byte for byte.
pub fn determinism(a: &SuiteReport, b: &SuiteReport) -> Result<CriterionReport> {
    let (ja, jb) = (a.to_json()?, b.to_json()?);
    let mut check = Check::new("differing bytes", 0.0);
    let differing = ja.bytes().zip(jb.bytes()).filter(|(x, y)| x != y).count() + ja.len().abs_diff(jb.len());
    check.record(differing as f64);
    let mut stats = BTreeMap::new();
    stats.insert("report_bytes".to_string(), ja.len() as f64);
    Ok(CriterionReport::new(10, 2, vec![check], stats))
}

fn random_qubit(rng: &mut ChaCha8Rng) -> DensityOperator {
    // mix Ginibre draws with pure states and near-diagonal states to cover |z| ∈ [0, 1/2]
    match rng.random_range(0..4u8) {
        0 => random::haar_pure(rng, 2).density(),
        1 => {
            let rho = random::ginibre_state(rng, 2, None);
            let t: f64 = rng.random();
            rho.mix(&DensityOperator::maximally_mixed(2), t).expect("same dimension")
        }
        _ => random::ginibre_state(rng, 2, None),
    }
}

fn qubit_oracle(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let mut rng = cfg.rng(1);
    let solver = cfg.solver();
    let channel = ReductionChannel::diagonal_pinching(2)?;
    let mut check = Check::new("|solver R - closed form|", QUBIT_TOL);
    let mut non_converged = 0;
    for _ in 0..cfg.qubit_instances {
        let rho = random_qubit(&mut rng);
        let z: C64 = rho.matrix()[(0, 1)];
        let result = solve_r(&rho, &channel, &solver)?;
        if !result.converged {
            non_converged += 1;
        }
        check.record((result.value_r - qubit_r(z)?).abs());
    }
    let mut stats = BTreeMap::new();
    stats.insert("non_converged".to_string(), non_converged as f64);
    Ok(CriterionReport::new(1, cfg.qubit_instances, vec![check], stats))
}

/// Grid `0, 0.01, …, 0.49` of `|z|`.
pub fn series_grid() -> Vec<f64> {
    (0..50).map(|i| i as f64 / 100.0).collect()
}

fn series_consistency(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let mut error = Check::new("|series - closed form|", SERIES_TOL);
    let mut monotone = Check::new("largest increase between truncations", 0.0);
    let mut stats = BTreeMap::new();
    let grid = series_grid();
    for &a in &grid {
        let z = C64::new(a, 0.0);
        let exact = qubit_r(z)?;
        let mut prev = f64::INFINITY;
        let mut rise = f64::NEG_INFINITY;
        for terms in 1..=cfg.series_terms {
            let v = qubit_r_series(z, terms)?;
            if prev.is_finite() {
                rise = rise.max(v - prev);
            }
            prev = v;
        }
        monotone.record(if rise.is_finite() { rise } else { 0.0 });
        let err = (prev - exact).abs();
        if err > SERIES_TOL {
            stats.insert(format!("error_at_{a:.2}"), err);
        }
        error.record(err);
    }
    Ok(CriterionReport::new(2, grid.len(), vec![error, monotone], stats))
}

fn pure_state_zero(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let mut rng = cfg.rng(3);
    let solver = cfg.solver();
    let mut check = Check::new("solver H", PURE_ZERO_TOL);
    for i in 0..cfg.pure_states {
        let n = 2 + i % 3;
        let psi = random::haar_pure(&mut rng, n);
        let channel = random::random_pinching(&mut rng, n);
        check.record(solve_r(&psi.density(), &channel, &solver)?.value_h);
    }
    Ok(CriterionReport::new(3, cfg.pure_states, vec![check], BTreeMap::new()))
}

fn mutual_identity(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let mut rng = cfg.rng(4);
    let tol = Tolerances::default();
    let mut check = Check::new("|relative form - Holevo form|", MUTUAL_IDENTITY_TOL);
    for _ in 0..cfg.mutual_pairs {
        let n = rng.random_range(2..=4usize);
        let len = rng.random_range(1..=5usize);
        let e = random::random_ensemble(&mut rng, n, len);
        let channel = random::random_channel(&mut rng, n);
        let holevo = mutual_entropy(&e, &channel, &tol)?;
        let relative = mutual_entropy_relative(&e, &channel, &tol)?;
        check.record((holevo - relative).abs());
    }
    Ok(CriterionReport::new(4, cfg.mutual_pairs, vec![check], BTreeMap::new()))
}

fn summarize(values: &[f64], prefix: &str, stats: &mut BTreeMap<String, f64>) {
    if values.is_empty() {
        return;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    stats.insert(format!("{prefix}_min"), sorted[0]);
    stats.insert(format!("{prefix}_median"), sorted[sorted.len() / 2]);
    stats.insert(format!("{prefix}_mean"), mean);
    stats.insert(format!("{prefix}_max"), sorted[sorted.len() - 1]);
}

fn block_example(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let mut rng = cfg.rng(5);
    let solver = cfg.solver();
    let tol = Tolerances::default();
    let mut reconstruction = Check::new("reconstruction error", RECONSTRUCTION_TOL);
    let mut purity = Check::new("1 - member purity", PURITY_TOL);
    let mut candidate = Check::new("solver R - candidate", CANDIDATE_TOL);
    let mut gaps = Vec::with_capacity(cfg.block_instances);
    for i in 0..cfg.block_instances {
        let n = 2 + i % 2;
        let (rho, psi) = random::block_example_state(&mut rng, n);
        let data = block_example_analyze(&rho, &psi)?;
        let dec = block_example_decomposition(&data, &rho, &tol)?;
        reconstruction.record(max_abs_diff(dec.ensemble.convex_sum().matrix(), rho.matrix()));
        purity.record(1.0 - dec.ensemble.min_purity());
        let channel = ReductionChannel::block_compression(&psi)?;
        let solved = solve_r(&rho, &channel, &solver)?.value_r;
        candidate.record(solved - dec.candidate);
        gaps.push((dec.candidate - solved).abs());
    }
    let mut stats = BTreeMap::new();
    summarize(&gaps, "gap", &mut stats);

    // how often a generic state admits the construction at all
    for n in [2usize, 3] {
        let mut applicable = 0;
        let mut failed = 0;
        for _ in 0..cfg.block_survey {
            let rho = random::ginibre_state(&mut rng, n + 1, None);
            let psi = random::haar_pure(&mut rng, n + 1);
            let data = block_example_analyze(&rho, &psi)?;
            if data.z > 0.5 {
                continue;
            }
            applicable += 1;
            if block_example_decomposition(&data, &rho, &tol).is_err() {
                failed += 1;
            }
        }
        stats.insert(format!("survey_n{n}_z_at_most_half"), applicable as f64);
        stats.insert(format!("survey_n{n}_negative_weights"), failed as f64);
    }
    Ok(CriterionReport::new(
        5,
        cfg.block_instances,
        vec![reconstruction, purity, candidate],
        stats,
    ))
}

fn concavity(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let mut rng = cfg.rng(6);
    let solver = cfg.solver();
    let mut check = Check::new("chord - H(mixture)", CONCAVITY_TOL);
    for i in 0..cfg.concavity_triples {
        let n = 2 + i % 2;
        let a = random::ginibre_state(&mut rng, n, None);
        let rank = rng.random_range(1..=n);
        let b = random::ginibre_state(&mut rng, n, Some(rank));
        let t: f64 = rng.random();
        let channel = random::random_channel(&mut rng, n);
        let mixture = a.mix(&b, t)?;
        let ha = solve_r(&a, &channel, &solver)?.value_h;
        let hb = solve_r(&b, &channel, &solver)?.value_h;
        let hm = solve_r(&mixture, &channel, &solver)?.value_h;
        check.record(t * ha + (1.0 - t) * hb - hm);
    }
    Ok(CriterionReport::new(6, cfg.concavity_triples, vec![check], BTreeMap::new()))
}

fn holevo(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let mut rng = cfg.rng(7);
    let solver = cfg.solver();
    let mut check = Check::new("H - S(ω)", HOLEVO_TOL);
    let mut gaps = Vec::with_capacity(cfg.holevo_pairs);
    for i in 0..cfg.holevo_pairs {
        let n = 2 + i % 3;
        let rho = random::ginibre_state(&mut rng, n, None);
        let qs = random::random_projections(&mut rng, n);
        let r = holevo_check(&rho, &qs, &solver)?;
        check.record(r.h - r.entropy);
        gaps.push(r.gap);
    }
    let mut stats = BTreeMap::new();
    summarize(&gaps, "gap", &mut stats);
    Ok(CriterionReport::new(7, cfg.holevo_pairs, vec![check], stats))
}

fn bracket(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let mut rng = cfg.rng(8);
    let solver = cfg.solver();
    let mut bound = Check::new("best measurement - H", BRACKET_TOL);
    let mut collapse = Check::new("commuting gap", COLLAPSE_TOL);
    let mut gaps = Vec::new();
    for i in 0..cfg.bracket_instances {
        let n = 2 + i % 3;
        let rho = random::ginibre_state(&mut rng, n, None);
        let qs = random::random_projections(&mut rng, n);
        let r = benatti_bracket(&rho, &qs, &solver, cfg.measurement_samples)?;
        bound.record(r.lower - r.upper);
        gaps.push(r.gap);
    }
    for i in 0..cfg.commuting_instances {
        let n = 2 + i % 3;
        let probs = random::simplex_point(&mut rng, n);
        let rho = DensityOperator::diagonal(&probs, &Tolerances::default())?;
        let mut order: Vec<usize> = (0..n).collect();
        for k in (1..n).rev() {
            order.swap(k, rng.random_range(0..=k));
        }
        let mut qs = Vec::new();
        let mut off = 0;
        for d in random::random_partition(&mut rng, n) {
            qs.push(coordinate_projection(n, &order[off..off + d]));
            off += d;
        }
        let r = benatti_bracket(&rho, &qs, &solver, cfg.measurement_samples)?;
        bound.record(r.lower - r.upper);
        collapse.record(r.gap.abs());
    }
    let mut stats = BTreeMap::new();
    summarize(&gaps, "generic_gap", &mut stats);
    Ok(CriterionReport::new(
        8,
        cfg.bracket_instances + cfg.commuting_instances,
        vec![bound, collapse],
        stats,
    ))
}

fn affinity(cfg: &VerifyConfig) -> Result<CriterionReport> {
    let mut rng = cfg.rng(9);
    let solver = cfg.solver();
    let channel = ReductionChannel::diagonal_pinching(2)?;
    let mut check = Check::new("affinity discrepancy", AFFINITY_TOL);
    let mut members = Vec::new();
    for _ in 0..cfg.affinity_instances {
        let rho = random::ginibre_state(&mut rng, 2, None);
        let result = solve_r(&rho, &channel, &solver)?;
        let report = affinity_certificate(&result, &channel, cfg.affinity_samples, &solver)?;
        for s in &report.samples {
            check.record(s.discrepancy);
        }
        members.push(report.members as f64);
    }
    let mut stats = BTreeMap::new();
    summarize(&members, "optimal_members", &mut stats);
    Ok(CriterionReport::new(
        9,
        cfg.affinity_instances * cfg.affinity_samples,
        vec![check],
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> VerifyConfig {
        VerifyConfig {
            restarts: 4,
            measurement_samples: 4,
            affinity_samples: 3,
            ..VerifyConfig::default().capped(3)
        }
    }

    #[test]
    fn check_counts_failures() {
        let mut c = Check::new("x", 1.0);
        c.record(0.5);
        assert!(c.passed());
        c.record(2.0);
        c.record(f64::NAN);
        assert_eq!(c.failures, 2);
        assert!(c.worst.unwrap().is_nan());
    }

    #[test]
    fn series_grid_matches_requested_points() {
        let g = series_grid();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.0);
        assert!((g[10] - 0.1).abs() < 1e-15);
        assert!((g[49] - 0.49).abs() < 1e-15);
    }

    #[test]
    fn unknown_criterion_is_an_error() {
        let r = run_criterion(11, &tiny());
        assert!(!r.passed);
        assert!(r.error.is_some());
    }

    #[test]
    fn small_suite_runs_and_repeats() {
        let cfg = tiny();
        let ids = [1, 3, 4, 7, 9];
        let a = run_suite(&cfg, &ids);
        let b = run_suite(&cfg, &ids);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.summary.tests, 5);
        assert_eq!(a.summary.skipped, 5);
        for c in &a.criteria {
            assert!(c.passed, "{}", c.summary_line());
        }
        assert!(determinism(&a, &b).unwrap().passed);
    }

    #[test]
    fn config_json_rejects_unknown_fields() {
        assert!(serde_json::from_str::<VerifyConfig>(r#"{"seed": 1}"#).is_ok());
        assert!(serde_json::from_str::<VerifyConfig>(r#"{"sead": 1}"#).is_err());
    }
}
