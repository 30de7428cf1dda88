//! Hidden-label storage and query answering: LABEL and SEED with exact
//! accounting, pluggable seed tie-breaking, and the adversarial staircase
//! oracle with version-space tracking.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("class {class} out of range for k = {k}")]
    InvalidClass { class: usize, k: usize },
    #[error("point index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("query budget exhausted after {labels} labels and {seeds} seeds")]
    Exhausted { labels: usize, seeds: usize },
}

pub type OracleResult<T> = Result<T, OracleError>;

/// Hidden ground truth: a labeling of indices 0..n into classes 0..k.
/// Learners never touch it directly; they go through [`OracleSuite`].
#[derive(Debug, Clone)]
pub struct TargetPartition {
    labels: Vec<usize>,
    k: usize,
}

impl TargetPartition {
    pub fn new(labels: Vec<usize>, k: usize) -> Self {
        assert!(k >= 1);
        assert!(
            labels.iter().all(|&l| l < k),
            "every label must lie in 0..{k}"
        );
        TargetPartition { labels, k }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn label_of(&self, idx: usize) -> usize {
        self.labels[idx]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn members(&self, class: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == class)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Seed,
    Label,
}

/// One transcript row. For seed queries `class` is the queried class and
/// `answer` the returned index (None = NIL). For label queries `class` is the
/// returned label, `set_size` is 1, and `answer` is the queried index.
#[derive(Debug, Clone, Serialize)]
pub struct TranscriptEntry {
    pub t: usize,
    pub kind: QueryKind,
    pub class: usize,
    pub set_size: usize,
    pub answer: Option<usize>,
}

/// Query accounting: counts per kind plus the full ordered transcript.
#[derive(Debug, Clone, Default)]
pub struct QueryLedger {
    label_count: usize,
    seed_count: usize,
    transcript: Vec<TranscriptEntry>,
}

impl QueryLedger {
    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn seed_count(&self) -> usize {
        self.seed_count
    }

    pub fn total(&self) -> usize {
        self.label_count + self.seed_count
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    fn record_label(&mut self, point: usize, class: usize) {
        self.label_count += 1;
        self.transcript.push(TranscriptEntry {
            t: self.transcript.len() + 1,
            kind: QueryKind::Label,
            class,
            set_size: 1,
            answer: Some(point),
        });
    }

    fn record_seed(&mut self, class: usize, set_size: usize, answer: Option<usize>) {
        self.seed_count += 1;
        self.transcript.push(TranscriptEntry {
            t: self.transcript.len() + 1,
            kind: QueryKind::Seed,
            class,
            set_size,
            answer,
        });
    }

    /// One JSON object per line: {"t":..,"kind":..,"class":..,"set_size":..,"answer":..}.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.transcript {
            out.push_str(&serde_json::to_string(e).expect("transcript entries serialize"));
            out.push('\n');
        }
        out
    }
}

/// How SEED resolves its "arbitrary element" freedom.
#[derive(Debug)]
#[allow(clippy::large_enum_variant)] // one suite per run; the inline RNG is fine
pub enum SeedPolicy {
    /// Smallest point index among the valid answers.
    SmallestIndex,
    /// Uniform among the valid answers, from an owned deterministic stream.
    Random(ChaCha12Rng),
    /// The staircase lower-bound strategy: inferable points first, then the
    /// lowest-indexed column, then the extreme row facing the agreement
    /// region. Requires the suite to carry staircase structure.
    StaircaseAdversarial,
}

/// Staircase instance layout: `bands` independent binary sub-instances, each
/// with `p` columns of `ell` points. Point index = band·(p·ell) + col·ell +
/// (row−1), rows 1-based. Within band s the prefix class is 2s (rows
/// 1..=threshold) and the suffix class 2s+1; with odd k class k−1 is empty.
#[derive(Debug, Clone)]
pub struct StaircaseDescriptor {
    pub ell: usize,
    pub p: usize,
    pub k: usize,
    /// thresholds[band][col] in 1..=ell.
    pub thresholds: Vec<Vec<usize>>,
}

impl StaircaseDescriptor {
    pub fn new(ell: usize, p: usize, k: usize, thresholds: Vec<Vec<usize>>) -> Self {
        assert!(ell >= 1 && p >= 1 && k >= 2);
        assert_eq!(thresholds.len(), k / 2);
        for band in &thresholds {
            assert_eq!(band.len(), p);
            assert!(band.iter().all(|&t| (1..=ell).contains(&t)));
        }
        StaircaseDescriptor { ell, p, k, thresholds }
    }

    pub fn bands(&self) -> usize {
        self.k / 2
    }

    pub fn n_points(&self) -> usize {
        self.bands() * self.p * self.ell
    }

    pub fn index(&self, band: usize, col: usize, row: usize) -> usize {
        debug_assert!((1..=self.ell).contains(&row));
        band * self.p * self.ell + col * self.ell + (row - 1)
    }

    /// (band, col, row) of a point index; rows 1-based.
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let per_band = self.p * self.ell;
        let band = idx / per_band;
        let rem = idx % per_band;
        (band, rem / self.ell, rem % self.ell + 1)
    }

    /// Class of an index under given per-band thresholds.
    pub fn class_under(&self, thresholds: &[Vec<usize>], idx: usize) -> usize {
        let (s, i, j) = self.unindex(idx);
        if j <= thresholds[s][i] {
            2 * s
        } else {
            2 * s + 1
        }
    }

    /// Hidden labeling induced by this descriptor's own thresholds.
    pub fn hidden_labels(&self) -> Vec<usize> {
        (0..self.n_points())
            .map(|idx| self.class_under(&self.thresholds, idx))
            .collect()
    }
}

/// Per-column candidate-threshold intervals: the set of targets consistent
/// with every answer given so far factors as a product over columns, so the
/// version-space size is the product of interval lengths.
#[derive(Debug, Clone)]
pub struct StaircaseState {
    /// intervals[band][col] = (lo, hi): candidate thresholds lo..=hi.
    pub intervals: Vec<Vec<(usize, usize)>>,
}

impl StaircaseState {
    pub fn fresh(desc: &StaircaseDescriptor) -> Self {
        StaircaseState {
            intervals: vec![vec![(1, desc.ell); desc.p]; desc.bands()],
        }
    }

    pub fn version_space_size(&self) -> u128 {
        let mut size: u128 = 1;
        for band in &self.intervals {
            for &(lo, hi) in band {
                size = size.saturating_mul((hi - lo + 1) as u128);
            }
        }
        size
    }
}

/// One interaction with a staircase-tracking suite, kept verbatim so audits
/// can recount the version space without trusting the interval tracker.
#[derive(Debug, Clone)]
pub enum StairFact {
    Label { point: usize, answer: usize },
    SeedHit { class: usize, member: usize },
    SeedNil { class: usize, set: Vec<usize> },
}

/// Answers LABEL and SEED truthfully against a hidden target, accounting
/// every query. Optional staircase structure activates version-space
/// tracking and the adversarial seed policy.
#[derive(Debug)]
pub struct OracleSuite {
    target: TargetPartition,
    policy: SeedPolicy,
    ledger: QueryLedger,
    label_budget: Option<usize>,
    seed_budget: Option<usize>,
    staircase: Option<(StaircaseDescriptor, StaircaseState)>,
    facts: Vec<StairFact>,
}

impl OracleSuite {
    pub fn new(target: TargetPartition, policy: SeedPolicy) -> Self {
        assert!(
            !matches!(policy, SeedPolicy::StaircaseAdversarial),
            "the adversarial policy needs staircase structure; use for_staircase"
        );
        OracleSuite {
            target,
            policy,
            ledger: QueryLedger::default(),
            label_budget: Some(1_000_000),
            seed_budget: None,
            staircase: None,
            facts: Vec::new(),
        }
    }

    /// Suite over a staircase instance: truthful answers with the lower-bound
    /// tie-breaking, plus interval tracking of the version space.
    pub fn for_staircase(desc: StaircaseDescriptor) -> Self {
        let target = TargetPartition::new(desc.hidden_labels(), desc.k);
        let state = StaircaseState::fresh(&desc);
        OracleSuite {
            target,
            policy: SeedPolicy::StaircaseAdversarial,
            ledger: QueryLedger::default(),
            label_budget: Some(1_000_000),
            seed_budget: None,
            staircase: Some((desc, state)),
            facts: Vec::new(),
        }
    }

    pub fn with_label_budget(mut self, budget: Option<usize>) -> Self {
        self.label_budget = budget;
        self
    }

    pub fn with_seed_budget(mut self, budget: Option<usize>) -> Self {
        self.seed_budget = budget;
        self
    }

    /// Track staircase version space while answering with a non-adversarial
    /// policy (the state updates encode only the per-query facts, so they are
    /// policy independent).
    pub fn with_staircase_tracking(mut self, desc: StaircaseDescriptor) -> Self {
        let state = StaircaseState::fresh(&desc);
        self.staircase = Some((desc, state));
        self
    }

    pub fn k(&self) -> usize {
        self.target.k()
    }

    pub fn n(&self) -> usize {
        self.target.n()
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    /// Raw query/answer history, recorded only while staircase tracking is on.
    pub fn stair_facts(&self) -> &[StairFact] {
        &self.facts
    }

    pub fn staircase_state(&self) -> Option<&StaircaseState> {
        self.staircase.as_ref().map(|(_, s)| s)
    }

    /// Test-harness access to the hidden labels (verification only).
    pub fn hidden(&self) -> &TargetPartition {
        &self.target
    }

    pub fn label(&mut self, x: usize) -> OracleResult<usize> {
        if x >= self.target.n() {
            return Err(OracleError::IndexOutOfRange { index: x, n: self.target.n() });
        }
        if let Some(b) = self.label_budget {
            if self.ledger.label_count >= b {
                return Err(self.exhausted());
            }
        }
        let class = self.target.label_of(x);
        if let Some((desc, state)) = &mut self.staircase {
            apply_label_fact(desc, state, x, class);
            self.facts.push(StairFact::Label { point: x, answer: class });
        }
        self.ledger.record_label(x, class);
        Ok(class)
    }

    pub fn seed(&mut self, u: &[usize], class: usize) -> OracleResult<Option<usize>> {
        if class >= self.target.k() {
            return Err(OracleError::InvalidClass { class, k: self.target.k() });
        }
        if let Some(&bad) = u.iter().find(|&&i| i >= self.target.n()) {
            return Err(OracleError::IndexOutOfRange { index: bad, n: self.target.n() });
        }
        if let Some(b) = self.seed_budget {
            if self.ledger.seed_count >= b {
                return Err(self.exhausted());
            }
        }
        let mut u: Vec<usize> = u.to_vec();
        u.sort_unstable();
        u.dedup();

        let answer = match &mut self.policy {
            SeedPolicy::SmallestIndex => u
                .iter()
                .copied()
                .find(|&i| self.target.label_of(i) == class),
            SeedPolicy::Random(rng) => {
                let members: Vec<usize> = u
                    .iter()
                    .copied()
                    .filter(|&i| self.target.label_of(i) == class)
                    .collect();
                if members.is_empty() {
                    None
                } else {
                    Some(members[rng.gen_range(0..members.len())])
                }
            }
            SeedPolicy::StaircaseAdversarial => {
                let (desc, state) = self
                    .staircase
                    .as_ref()
                    .expect("adversarial policy carries staircase structure");
                adversarial_answer(desc, state, &u, class)
            }
        };
        debug_assert!(
            answer.map_or(
                !u.iter().any(|&i| self.target.label_of(i) == class),
                |x| self.target.label_of(x) == class
            ),
            "seed answers must be truthful"
        );
        if let Some((desc, state)) = &mut self.staircase {
            apply_seed_fact(desc, state, &u, class, answer);
            self.facts.push(match answer {
                Some(x) => StairFact::SeedHit { class, member: x },
                None => StairFact::SeedNil { class, set: u.clone() },
            });
        }
        self.ledger.record_seed(class, u.len(), answer);
        Ok(answer)
    }

    fn exhausted(&self) -> OracleError {
        OracleError::Exhausted {
            labels: self.ledger.label_count,
            seeds: self.ledger.seed_count,
        }
    }
}

/// The lower-bound seed strategy. `class` in band s = class/2 asks for the
/// prefix class (class even) or suffix class (class odd). Points whose label
/// is already inferable from the tracked intervals are returned first
/// (lowest column, then the row nearest the agreement anchor); otherwise the
/// answer is the extreme row of the lowest-indexed column that intersects the
/// queried class, or NIL.
fn adversarial_answer(
    desc: &StaircaseDescriptor,
    state: &StaircaseState,
    u: &[usize],
    class: usize,
) -> Option<usize> {
    if class / 2 >= desc.bands() {
        return None; // odd k: the last class is empty by construction
    }
    let s = class / 2;
    let prefix = class.is_multiple_of(2);
    // Rows of u per column of band s, ascending (u is sorted).
    let mut per_col: Vec<Vec<usize>> = vec![Vec::new(); desc.p];
    for &idx in u {
        let (band, col, row) = desc.unindex(idx);
        if band == s {
            per_col[col].push(row);
        }
    }
    // Inferable points first: members of the queried class in the agreement
    // region of the version space.
    for (col, rows) in per_col.iter().enumerate() {
        let (lo, hi) = state.intervals[s][col];
        if prefix {
            if let Some(&row) = rows.iter().find(|&&j| j <= lo) {
                return Some(desc.index(s, col, row));
            }
        } else if let Some(&row) = rows.iter().rev().find(|&&j| j > hi) {
            return Some(desc.index(s, col, row));
        }
    }
    // Disagreement region: lowest column whose queried-class slice is hit,
    // answered at the extreme row facing the agreement side.
    for (col, rows) in per_col.iter().enumerate() {
        let (lo, hi) = state.intervals[s][col];
        let t = desc.thresholds[s][col];
        let in_region: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&j| j > lo && j <= hi)
            .collect();
        if in_region.is_empty() {
            continue;
        }
        if prefix {
            let min_row = in_region[0];
            if min_row <= t {
                return Some(desc.index(s, col, min_row));
            }
        } else {
            let max_row = *in_region.last().unwrap();
            if max_row > t {
                return Some(desc.index(s, col, max_row));
            }
        }
    }
    None
}

/// Shrink the intervals by exactly the fact a seed answer reveals:
/// NIL ⇒ no point of `u`'s disagreement slice belongs to the class;
/// a hit ⇒ the returned point belongs to the class.
fn apply_seed_fact(
    desc: &StaircaseDescriptor,
    state: &mut StaircaseState,
    u: &[usize],
    class: usize,
    answer: Option<usize>,
) {
    if class / 2 >= desc.bands() {
        return; // the empty class: NIL carries no information
    }
    let s = class / 2;
    let prefix = class.is_multiple_of(2);
    match answer {
        Some(idx) => {
            let (band, col, row) = desc.unindex(idx);
            debug_assert_eq!(band, s);
            let (lo, hi) = state.intervals[s][col];
            if prefix {
                state.intervals[s][col] = (lo.max(row), hi);
            } else {
                state.intervals[s][col] = (lo, hi.min(row - 1));
            }
        }
        None => {
            for &idx in u {
                let (band, col, row) = desc.unindex(idx);
                if band != s {
                    continue;
                }
                let (lo, hi) = state.intervals[s][col];
                if prefix {
                    // row not in the prefix class: threshold < row.
                    if row <= hi {
                        state.intervals[s][col] = (lo, hi.min(row.saturating_sub(1)));
                    }
                } else if row > lo {
                    // row not in the suffix class: threshold >= row.
                    state.intervals[s][col] = (lo.max(row), hi);
                }
            }
        }
    }
    debug_assert_intervals(state);
}

fn apply_label_fact(
    desc: &StaircaseDescriptor,
    state: &mut StaircaseState,
    idx: usize,
    class: usize,
) {
    let (s, col, row) = desc.unindex(idx);
    let (lo, hi) = state.intervals[s][col];
    if class == 2 * s {
        state.intervals[s][col] = (lo.max(row), hi);
    } else {
        state.intervals[s][col] = (lo, hi.min(row - 1));
    }
    debug_assert_intervals(state);
}

fn debug_assert_intervals(state: &StaircaseState) {
    debug_assert!(
        state
            .intervals
            .iter()
            .flatten()
            .all(|&(lo, hi)| lo >= 1 && lo <= hi),
        "truthful answers keep every interval nonempty: {:?}",
        state.intervals
    );
}
