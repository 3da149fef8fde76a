//! Self-organizing maps of categorical data.
//!
//! KORRESP crosses two variables: the rows of a contingency table and its
//! columns are both turned into profile vectors and trained on one map.
//! KACM handles any number of questions through the Burt table, the
//! symmetric matrix of all pairwise cross-tabulations.
//!
//! Both use the χ² distance `d²(u, v) = Σ_t (u_t - v_t)² / w_t`, with `w` the
//! marginal frequencies of the coordinates being compared.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::som_engine::{GainSchedule, Metric, Som};
use crate::state::NetworkState;
use crate::topology::{Lattice, Neighborhood};

/// A `p x q` table of counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    p: usize,
    q: usize,
    counts: Vec<u64>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl ContingencyTable {
    pub fn new(p: usize, q: usize, counts: Vec<u64>) -> Result<Self> {
        let row_labels = (1..=p).map(|i| format!("r{i}")).collect();
        let col_labels = (1..=q).map(|j| format!("c{j}")).collect();
        Self::with_labels(counts, row_labels, col_labels)
    }

    pub fn with_labels(counts: Vec<u64>, row_labels: Vec<String>, col_labels: Vec<String>) -> Result<Self> {
        let (p, q) = (row_labels.len(), col_labels.len());
        if counts.len() != p * q {
            return Err(Error::Dimension {
                expected: p * q,
                got: counts.len(),
            });
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::Empty("contingency table has no individuals".into()));
        }
        Ok(Self {
            p,
            q,
            counts,
            row_labels,
            col_labels,
        })
    }

    /// Header row of column labels (first cell ignored), then one labelled
    /// row of integer counts per row modality.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col_labels: Vec<String> = headers.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let mut row_labels = Vec::new();
        let mut counts = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != col_labels.len() + 1 {
                return Err(Error::Ingest {
                    row: r + 1,
                    column: String::new(),
                    message: format!("expected {} fields, found {}", col_labels.len() + 1, rec.len()),
                });
            }
            row_labels.push(rec[0].trim().to_string());
            for (c, cell) in rec.iter().skip(1).enumerate() {
                let v = cell.trim().parse::<u64>().map_err(|_| Error::Ingest {
                    row: r + 1,
                    column: col_labels[c].clone(),
                    message: format!("'{cell}' is not a non-negative integer count"),
                })?;
                counts.push(v);
            }
        }
        Self::with_labels(counts, row_labels, col_labels)
    }

    /// Cross-tabulates two questions of a response set.
    pub fn from_responses(responses: &Responses, first: usize, second: usize) -> Result<Self> {
        let k = responses.questions.len();
        for q in [first, second] {
            if q >= k {
                return Err(Error::Index { index: q, len: k });
            }
        }
        let (p, qn) = (responses.modalities[first].len(), responses.modalities[second].len());
        let mut counts = vec![0; p * qn];
        for a in &responses.answers {
            counts[a[first] * qn + a[second]] += 1;
        }
        Self::with_labels(
            counts,
            responses.modalities[first].clone(),
            responses.modalities[second].clone(),
        )
    }

    pub fn rows(&self) -> usize {
        self.p
    }

    pub fn cols(&self) -> usize {
        self.q
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.q + j]
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn frequency(&self, i: usize, j: usize) -> f64 {
        self.count(i, j) as f64 / self.total() as f64
    }

    fn row_total(&self, i: usize) -> u64 {
        (0..self.q).map(|j| self.count(i, j)).sum()
    }

    fn col_total(&self, j: usize) -> u64 {
        (0..self.p).map(|i| self.count(i, j)).sum()
    }

    /// `f_i.`
    pub fn row_masses(&self) -> Vec<f64> {
        let n = self.total() as f64;
        (0..self.p).map(|i| self.row_total(i) as f64 / n).collect()
    }

    /// `f_.j`
    pub fn col_masses(&self) -> Vec<f64> {
        let n = self.total() as f64;
        (0..self.q).map(|j| self.col_total(j) as f64 / n).collect()
    }

    /// `r(i)`: row `i` divided by its total, over the `q` columns.
    pub fn row_profile(&self, i: usize) -> Vec<f64> {
        let t = self.row_total(i) as f64;
        (0..self.q).map(|j| self.count(i, j) as f64 / t).collect()
    }

    /// `c(j)`: column `j` divided by its total, over the `p` rows.
    pub fn col_profile(&self, j: usize) -> Vec<f64> {
        let t = self.col_total(j) as f64;
        (0..self.p).map(|i| self.count(i, j) as f64 / t).collect()
    }

    fn check_margins(&self) -> Result<()> {
        if let Some(i) = (0..self.p).find(|&i| self.row_total(i) == 0) {
            return Err(Error::Empty(format!("row modality {} is never observed", self.row_labels[i])));
        }
        if let Some(j) = (0..self.q).find(|&j| self.col_total(j) == 0) {
            return Err(Error::Empty(format!("column modality {} is never observed", self.col_labels[j])));
        }
        Ok(())
    }
}

fn argmax_lowest(values: impl Iterator<Item = u64>) -> usize {
    let mut best = 0;
    let mut best_v = None;
    for (k, v) in values.enumerate() {
        if best_v.is_none_or(|b| v > b) {
            best = k;
            best_v = Some(v);
        }
    }
    best
}

/// `d(u, v) = sqrt(Σ_t (u_t - v_t)² / w_t)`.
pub fn chi2_distance(u: &[f64], v: &[f64], masses: &[f64]) -> Result<f64> {
    if u.len() != v.len() || u.len() != masses.len() {
        return Err(Error::Dimension {
            expected: masses.len(),
            got: if u.len() != masses.len() { u.len() } else { v.len() },
        });
    }
    if let Some(t) = masses.iter().position(|&w| !(w > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "reference mass of coordinate {t} is {}; the modality is never observed",
            masses[t]
        )));
    }
    Ok(u.iter()
        .zip(v)
        .zip(masses)
        .map(|((a, b), w)| (a - b) * (a - b) / w)
        .sum::<f64>()
        .sqrt())
}

/// The `(p + q) x (q + p)` KORRESP data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KorrespData {
    pub p: usize,
    pub q: usize,
    /// Row-major; row `i < p` is `(r(i), c(j(i)))`, row `p + j` is `(r(i(j)), c(j))`.
    pub values: Vec<f64>,
    /// Most probable column given each row, `j(i)`.
    pub row_partner: Vec<usize>,
    /// Most probable row given each column, `i(j)`.
    pub col_partner: Vec<usize>,
}

impl KorrespData {
    pub fn width(&self) -> usize {
        self.p + self.q
    }

    pub fn height(&self) -> usize {
        self.p + self.q
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.width();
        &self.values[r * w..(r + 1) * w]
    }
}

/// Builds the KORRESP matrix; argmax ties go to the lowest index.
pub fn korresp_build_d(table: &ContingencyTable) -> Result<KorrespData> {
    table.check_margins()?;
    let (p, q) = (table.p, table.q);
    let row_partner: Vec<usize> = (0..p).map(|i| argmax_lowest((0..q).map(|j| table.count(i, j)))).collect();
    let col_partner: Vec<usize> = (0..q).map(|j| argmax_lowest((0..p).map(|i| table.count(i, j)))).collect();
    let mut values = Vec::with_capacity((p + q) * (p + q));
    for (i, &j) in row_partner.iter().enumerate() {
        values.extend(table.row_profile(i));
        values.extend(table.col_profile(j));
    }
    for (j, &i) in col_partner.iter().enumerate() {
        values.extend(table.row_profile(i));
        values.extend(table.col_profile(j));
    }
    Ok(KorrespData {
        p,
        q,
        values,
        row_partner,
        col_partner,
    })
}

/// How the KORRESP winner is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WinnerMode {
    /// Only the input's own profile block: the first `q` coordinates for a
    /// row modality, the last `p` for a column modality.
    Block,
    /// The whole vector, masses halved so that they sum to one.
    Full,
}

#[derive(Debug, Clone)]
pub struct MapOptions {
    pub lattice: Lattice,
    pub neighborhood: Neighborhood,
    pub schedule: GainSchedule,
    pub steps: u64,
    pub seed: u64,
    pub winner: WinnerMode,
}

impl Default for MapOptions {
    /// A 7x7 grid with 8 neighbors; the gain starts at 0.1 and decays like `1/t`.
    fn default() -> Self {
        Self {
            lattice: Lattice::grid(7, 7).expect("7x7 grid"),
            neighborhood: Neighborhood::step(1),
            schedule: GainSchedule::power(100.0, 1000.0, 1.0).expect("valid schedule"),
            steps: 20_000,
            seed: 0,
            winner: WinnerMode::Block,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModalityEntry {
    pub label: String,
    pub variable: String,
    pub unit: usize,
}

/// The unit each modality is classified into.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityMap {
    pub lattice: Lattice,
    pub entries: Vec<ModalityEntry>,
    pub weights: NetworkState,
}

impl ModalityMap {
    pub fn unit_of(&self, variable: &str, label: &str) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.variable == variable && e.label == label)
            .map(|e| e.unit)
    }

    /// Same unit or lattice neighbors.
    pub fn colocated(&self, a: usize, b: usize) -> bool {
        self.lattice.unit_distance(a, b).is_ok_and(|d| d <= 1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["modality", "variable", "unit", "unit_row", "unit_col"])?;
        for e in &self.entries {
            let (r, c) = self.lattice.coords(e.unit);
            w.write_record([
                e.label.clone(),
                e.variable.clone(),
                e.unit.to_string(),
                r.to_string(),
                c.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One line per non-empty unit listing its modalities.
    pub fn class_report(&self) -> String {
        let mut out = String::new();
        for unit in 0..self.lattice.len() {
            let members: Vec<String> = self
                .entries
                .iter()
                .filter(|e| e.unit == unit)
                .map(|e| format!("{}={}", e.variable, e.label))
                .collect();
            if !members.is_empty() {
                let (r, c) = self.lattice.coords(unit);
                let _ = writeln!(out, "unit {unit} ({r},{c}): {}", members.join(", "));
            }
        }
        out
    }
}

/// Weights start near the centroid of the data rows, with a small seeded jitter.
fn initial_weights<R: Rng>(n: usize, rows: &[&[f64]], rng: &mut R) -> Result<NetworkState> {
    let d = rows[0].len();
    let mut center = vec![0.0; d];
    for r in rows {
        for (c, v) in center.iter_mut().zip(r.iter()) {
            *c += v / rows.len() as f64;
        }
    }
    let mut w = Vec::with_capacity(n * d);
    for _ in 0..n {
        for c in &center {
            w.push(c + 0.02 * (rng.random::<f64>() - 0.5));
        }
    }
    NetworkState::new(d, w)
}

fn block_winner(state: &NetworkState, x: &[f64], range: std::ops::Range<usize>, masses: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, m) in state.units().enumerate() {
        let d: f64 = range
            .clone()
            .zip(masses)
            .map(|(t, w)| (x[t] - m[t]) * (x[t] - m[t]) / w)
            .sum();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Trains a map on the KORRESP matrix, alternating row and column inputs.
pub fn korresp_run(table: &ContingencyTable, options: &MapOptions) -> Result<ModalityMap> {
    let data = korresp_build_d(table)?;
    let (p, q) = (data.p, data.q);
    let row_masses = table.row_masses();
    let col_masses = table.col_masses();
    let som = Som::new(options.lattice.clone(), options.neighborhood.clone());
    let full_masses: Vec<f64> = col_masses.iter().chain(&row_masses).map(|w| w / 2.0).collect();
    let full = Metric::chi2(full_masses)?;
    let winner = |state: &NetworkState, r: usize| -> usize {
        let x = data.row(r);
        match options.winner {
            WinnerMode::Full => crate::som_engine::winner(state, x, &full),
            WinnerMode::Block if r < p => block_winner(state, x, 0..q, &col_masses),
            WinnerMode::Block => block_winner(state, x, q..q + p, &row_masses),
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let rows: Vec<&[f64]> = (0..p + q).map(|r| data.row(r)).collect();
    let mut state = initial_weights(som.lattice().len(), &rows, &mut rng)?;
    for t in 0..options.steps {
        let r = if t % 2 == 0 {
            rng.random_range(0..p)
        } else {
            p + rng.random_range(0..q)
        };
        let i0 = winner(&state, r);
        let eps = options.schedule.gain(state.time());
        som.update(&mut state, i0, data.row(r), eps);
    }
    let mut entries = Vec::with_capacity(p + q);
    for (i, label) in table.row_labels.iter().enumerate() {
        entries.push(ModalityEntry {
            label: label.clone(),
            variable: "row".into(),
            unit: winner(&state, i),
        });
    }
    for (j, label) in table.col_labels.iter().enumerate() {
        entries.push(ModalityEntry {
            label: label.clone(),
            variable: "column".into(),
            unit: winner(&state, p + j),
        });
    }
    Ok(ModalityMap {
        lattice: options.lattice.clone(),
        entries,
        weights: state,
    })
}

/// Whether every row modality shares a unit, or neighbors one, with its most
/// associated column modality.
pub fn korresp_structure_recovered(table: &ContingencyTable, map: &ModalityMap) -> Result<bool> {
    let data = korresp_build_d(table)?;
    Ok(data.row_partner.iter().enumerate().all(|(i, &j)| {
        match (
            map.unit_of("row", &table.row_labels[i]),
            map.unit_of("column", &table.col_labels[j]),
        ) {
            (Some(a), Some(b)) => map.colocated(a, b),
            _ => false,
        }
    }))
}

/// Answers of `N` individuals to `K` questions, as modality indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Responses {
    pub questions: Vec<String>,
    pub modalities: Vec<Vec<String>>,
    pub answers: Vec<Vec<usize>>,
}

impl Responses {
    pub fn new(questions: Vec<String>, modalities: Vec<Vec<String>>, answers: Vec<Vec<usize>>) -> Result<Self> {
        if questions.len() != modalities.len() {
            return Err(Error::Dimension {
                expected: questions.len(),
                got: modalities.len(),
            });
        }
        for (r, a) in answers.iter().enumerate() {
            if a.len() != questions.len() {
                return Err(Error::Ingest {
                    row: r + 1,
                    column: String::new(),
                    message: format!("{} answers for {} questions", a.len(), questions.len()),
                });
            }
            for (k, &v) in a.iter().enumerate() {
                if v >= modalities[k].len() {
                    return Err(Error::Ingest {
                        row: r + 1,
                        column: questions[k].clone(),
                        message: format!("modality {v} does not exist ({} declared)", modalities[k].len()),
                    });
                }
            }
        }
        Ok(Self {
            questions,
            modalities,
            answers,
        })
    }

    /// Header of question names, one individual per row, cells holding
    /// modality labels. Modalities are the sorted distinct labels seen.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let questions: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let mut raw = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != questions.len() {
                return Err(Error::Ingest {
                    row: r + 1,
                    column: String::new(),
                    message: format!("expected {} answers, found {}", questions.len(), rec.len()),
                });
            }
            let row: Vec<String> = rec.iter().map(|s| s.trim().to_string()).collect();
            if let Some(k) = row.iter().position(|s| s.is_empty()) {
                return Err(Error::Ingest {
                    row: r + 1,
                    column: questions[k].clone(),
                    message: "missing answer".into(),
                });
            }
            raw.push(row);
        }
        let modalities: Vec<Vec<String>> = (0..questions.len())
            .map(|k| {
                raw.iter()
                    .map(|row| row[k].clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect()
            })
            .collect();
        let answers = raw
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(k, v)| modalities[k].binary_search(v).expect("label collected above"))
                    .collect()
            })
            .collect();
        Self::new(questions, modalities, answers)
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

/// `B = Zᵀ Z` over all `M = Σ_k m_k` modalities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BurtTable {
    pub questions: Vec<String>,
    pub modality_counts: Vec<usize>,
    pub labels: Vec<String>,
    /// Question of each modality.
    pub owner: Vec<usize>,
    pub counts: Vec<u64>,
}

pub fn build_burt(responses: &Responses) -> Result<BurtTable> {
    if responses.is_empty() {
        return Err(Error::Empty("no individuals to tabulate".into()));
    }
    let offsets: Vec<usize> = responses
        .modalities
        .iter()
        .scan(0, |acc, m| {
            let o = *acc;
            *acc += m.len();
            Some(o)
        })
        .collect();
    let m: usize = responses.modalities.iter().map(Vec::len).sum();
    let mut counts = vec![0u64; m * m];
    let mut ones = Vec::with_capacity(responses.questions.len());
    for a in &responses.answers {
        ones.clear();
        ones.extend(a.iter().zip(&offsets).map(|(v, o)| v + o));
        for &s in &ones {
            for &t in &ones {
                counts[s * m + t] += 1;
            }
        }
    }
    let mut labels = Vec::with_capacity(m);
    let mut owner = Vec::with_capacity(m);
    for (k, mods) in responses.modalities.iter().enumerate() {
        for l in mods {
            labels.push(l.clone());
            owner.push(k);
        }
    }
    Ok(BurtTable {
        questions: responses.questions.clone(),
        modality_counts: responses.modalities.iter().map(Vec::len).collect(),
        labels,
        owner,
        counts,
    })
}

impl BurtTable {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, s: usize, t: usize) -> u64 {
        self.counts[s * self.size() + t]
    }

    /// Symmetry, diagonal diagonal blocks, and row sums of each off-diagonal
    /// block equal to the matching modality count. Exact integer checks.
    pub fn check_invariants(&self) -> Result<()> {
        let m = self.size();
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        for s in 0..m {
            for t in 0..m {
                if self.get(s, t) != self.get(t, s) {
                    return bad(format!("not symmetric at ({s}, {t})"));
                }
                if s != t && self.owner[s] == self.owner[t] && self.get(s, t) != 0 {
                    return bad(format!("diagonal block of question {} is not diagonal", self.owner[s]));
                }
            }
            for l in 0..self.questions.len() {
                if l == self.owner[s] {
                    continue;
                }
                let row_sum: u64 = (0..m).filter(|&t| self.owner[t] == l).map(|t| self.get(s, t)).sum();
                if row_sum != self.get(s, s) {
                    return bad(format!("row {s} of block ({}, {l}) sums to {row_sum}", self.owner[s]));
                }
            }
        }
        Ok(())
    }

    /// Each row divided by its total `K · B_tt`.
    pub fn normalized_row(&self, s: usize) -> Vec<f64> {
        let total: u64 = (0..self.size()).map(|t| self.get(s, t)).sum();
        (0..self.size()).map(|t| self.get(s, t) as f64 / total as f64).collect()
    }
}

#[derive(Debug, Clone)]
pub struct KacmOutcome {
    pub map: ModalityMap,
    /// Modalities left out because nobody chose them.
    pub warnings: Vec<String>,
}

/// KACM: SOM on the normalized Burt rows, each drawn with probability
/// proportional to its modality count, winner under χ² with the overall
/// modality frequencies.
pub fn kacm_run(burt: &BurtTable, options: &MapOptions) -> Result<KacmOutcome> {
    let mut warnings = Vec::new();
    let active: Vec<usize> = (0..burt.size())
        .filter(|&t| {
            let keep = burt.get(t, t) > 0;
            if !keep {
                warnings.push(format!(
                    "modality {} of question {} is never chosen and is left out",
                    burt.labels[t], burt.questions[burt.owner[t]]
                ));
            }
            keep
        })
        .collect();
    if active.is_empty() {
        return Err(Error::Empty("Burt table has no observed modality".into()));
    }
    let diag: Vec<f64> = active.iter().map(|&t| burt.get(t, t) as f64).collect();
    let total: f64 = diag.iter().sum();
    let metric = Metric::chi2(diag.iter().map(|v| v / total).collect())?;
    let rows: Vec<Vec<f64>> = active
        .iter()
        .map(|&s| {
            let full = burt.normalized_row(s);
            active.iter().map(|&t| full[t]).collect()
        })
        .collect();
    let som = Som::new(options.lattice.clone(), options.neighborhood.clone()).with_metric(metric);
    let pick = WeightedIndex::new(&diag).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let views: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let mut state = initial_weights(som.lattice().len(), &views, &mut rng)?;
    for _ in 0..options.steps {
        let r = pick.sample(&mut rng);
        let eps = options.schedule.gain(state.time());
        som.step(&mut state, &rows[r], eps);
    }
    let entries = active
        .iter()
        .zip(&rows)
        .map(|(&t, row)| ModalityEntry {
            label: burt.labels[t].clone(),
            variable: burt.questions[burt.owner[t]].clone(),
            unit: som.winner(&state, row),
        })
        .collect();
    Ok(KacmOutcome {
        map: ModalityMap {
            lattice: options.lattice.clone(),
            entries,
            weights: state,
        },
        warnings,
    })
}

/// Synthetic table with two diagonal blocks of associated modalities.
pub fn block_table(block: usize, within: u64, across: u64) -> ContingencyTable {
    let n = 2 * block;
    let counts = (0..n * n)
        .map(|k| if (k / n) / block == (k % n) / block { within } else { across })
        .collect();
    ContingencyTable::new(n, n, counts).expect("positive counts")
}
