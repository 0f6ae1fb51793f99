//! Two-objective nondominated sorting (fewer MACs, higher accuracy) and
//! NSGA-style selection of the best fraction of a model population.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cost_model::ArchFactors;
use crate::{Error, Result};

/// One trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub id: String,
    pub factors: ArchFactors,
    pub macs: f64,
    /// Top-1 accuracy as a fraction.
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top5: Option<f64>,
}

impl ModelRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.macs > 0.0) || !self.macs.is_finite() {
            return Err(Error::Input(format!("record {:?}: MACs must be positive, got {}", self.id, self.macs)));
        }
        let frac = |v: f64| v > 0.0 && v < 1.0;
        if !frac(self.accuracy) {
            return Err(Error::Input(format!(
                "record {:?}: accuracy must lie in (0, 1), got {}",
                self.id, self.accuracy
            )));
        }
        if let Some(t5) = self.top5 {
            if !(0.0..=1.0).contains(&t5) {
                return Err(Error::Input(format!("record {:?}: top-5 accuracy {t5} outside [0, 1]", self.id)));
            }
        }
        self.factors.validate()
    }
}

/// `a` is no worse than `b` in both objectives and strictly better in one.
pub fn dominates(a: &ModelRecord, b: &ModelRecord) -> bool {
    a.macs <= b.macs && a.accuracy >= b.accuracy && (a.macs < b.macs || a.accuracy > b.accuracy)
}

/// Keeps records with `0.2·m0 < macs < 1.1·m0` and `0.5 < accuracy < 1`.
pub fn apply_constraints(records: &[ModelRecord], m0: f64) -> Vec<ModelRecord> {
    constrained_indices(records, m0).into_iter().map(|i| records[i].clone()).collect()
}

fn passes(r: &ModelRecord, m0: f64) -> bool {
    0.2 * m0 < r.macs && r.macs < 1.1 * m0 && 0.5 < r.accuracy && r.accuracy < 1.0
}

fn constrained_indices(records: &[ModelRecord], m0: f64) -> Vec<usize> {
    (0..records.len()).filter(|&i| passes(&records[i], m0)).collect()
}

fn display_order(a: &ModelRecord, b: &ModelRecord) -> Ordering {
    a.macs.total_cmp(&b.macs).then_with(|| b.accuracy.total_cmp(&a.accuracy)).then_with(|| a.id.cmp(&b.id))
}

/// Front decomposition. Indices refer to the input slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParetoFront {
    /// `fronts[0]` is the nondominated set. Each front is ordered by MACs
    /// ascending, accuracy descending, then id.
    pub fronts: Vec<Vec<usize>>,
    /// Front index of each record.
    pub rank: Vec<usize>,
}

impl ParetoFront {
    pub fn front_sizes(&self) -> Vec<usize> {
        self.fronts.iter().map(Vec::len).collect()
    }
}

/// Fast nondominated sort.
pub fn nondominated_sort(records: &[ModelRecord]) -> Result<ParetoFront> {
    let n = records.len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&records[i], &records[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates(&records[j], &records[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut rank = vec![usize::MAX; n];
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let k = fronts.len();
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = k;
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        current.sort_by(|&a, &b| display_order(&records[a], &records[b]));
        fronts.push(current);
        current = next;
    }
    Ok(ParetoFront { fronts, rank })
}

/// Crowding distance of each member of one front, in the front's order.
/// Boundary members get `+inf`.
pub fn crowding_distance(records: &[ModelRecord], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut dist = vec![0.0; n];
    let objectives: [fn(&ModelRecord) -> f64; 2] = [|r| r.macs, |r| r.accuracy];
    for obj in objectives {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| obj(&records[front[a]]).total_cmp(&obj(&records[front[b]])).then_with(|| a.cmp(&b)));
        let lo = obj(&records[front[order[0]]]);
        let hi = obj(&records[front[order[n - 1]]]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..n - 1 {
                let gap = obj(&records[front[order[w + 1]]]) - obj(&records[front[order[w - 1]]]);
                dist[order[w]] += gap / (hi - lo);
            }
        }
    }
    dist
}

/// Population that the selected fraction is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FractionBase {
    /// Records that pass the constraints.
    #[default]
    Constrained,
    /// Every input record.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    pub fraction: f64,
    pub fraction_base: FractionBase,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self { fraction: 0.2, fraction_base: FractionBase::Constrained }
    }
}

/// Outcome of [`select_top`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Chosen records in rank order.
    pub records: Vec<ModelRecord>,
    /// Position of each chosen record in the input slice.
    pub indices: Vec<usize>,
    /// Front of each chosen record.
    pub ranks: Vec<usize>,
    pub input_count: usize,
    pub constrained_count: usize,
    /// Sizes of all fronts among the constrained records.
    pub front_sizes: Vec<usize>,
    /// Number of records the fraction asked for.
    pub quota: usize,
}

impl Selection {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Filters by the constraints, then takes whole fronts until
/// `ceil(fraction · n)` records are in. The last front is cut by crowding
/// distance: its two boundary records first, then the most isolated ones,
/// ties by id. Returns an empty selection when nothing passes the filter.
pub fn select_top(records: &[ModelRecord], m0: f64, config: &SelectConfig) -> Result<Selection> {
    if !(m0 > 0.0) || !m0.is_finite() {
        return Err(Error::InvalidConfig(format!("baseline MACs must be positive, got {m0}")));
    }
    if !(config.fraction > 0.0 && config.fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("fraction must lie in (0, 1], got {}", config.fraction)));
    }
    let kept = constrained_indices(records, m0);
    let base = match config.fraction_base {
        FractionBase::Constrained => kept.len(),
        FractionBase::All => records.len(),
    };
    let quota = (libm::ceil(config.fraction * base as f64 - 1e-9) as usize).min(kept.len());
    let mut out = Selection {
        records: Vec::new(),
        indices: Vec::new(),
        ranks: Vec::new(),
        input_count: records.len(),
        constrained_count: kept.len(),
        front_sizes: Vec::new(),
        quota,
    };
    if kept.is_empty() {
        return Ok(out);
    }
    let pool: Vec<ModelRecord> = kept.iter().map(|&i| records[i].clone()).collect();
    let sorted = nondominated_sort(&pool)?;
    out.front_sizes = sorted.front_sizes();

    let push = |out: &mut Selection, local: usize, rank: usize| {
        out.records.push(pool[local].clone());
        out.indices.push(kept[local]);
        out.ranks.push(rank);
    };
    for (rank, front) in sorted.fronts.iter().enumerate() {
        let room = quota - out.records.len();
        if room == 0 {
            break;
        }
        if front.len() <= room {
            for &i in front {
                push(&mut out, i, rank);
            }
            continue;
        }
        let dist = crowding_distance(&pool, front);
        let last = front.len() - 1;
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| {
            let boundary = |p: usize| p == 0 || p == last;
            boundary(b)
                .cmp(&boundary(a))
                .then_with(|| dist[b].total_cmp(&dist[a]))
                .then_with(|| pool[front[a]].id.cmp(&pool[front[b]].id))
        });
        let mut chosen: Vec<usize> = order[..room].to_vec();
        chosen.sort_unstable();
        for p in chosen {
            push(&mut out, front[p], rank);
        }
        break;
    }
    Ok(out)
}
