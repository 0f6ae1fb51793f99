//! The efficiency rule: one GP per architecture factor as a function of the
//! MACs reduction factor `c = m / m0`, fitted on Pareto-selected models, and
//! its use to pick a factor tuple for a MACs budget.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cost_model::{
    macs_of, resolve_arch_with, ArchFactors, BaseConfig, ConcreteArch, Factor, SamplingEnvelope, SnapUnits,
};
use crate::gp::{fit, FitConfig, GpDataset, GpModel};
use crate::pareto::ModelRecord;
use crate::{Error, Result};

/// Reduction factors the rule is meant for, as `(lo, hi]`.
pub const C_DOMAIN: (f64, f64) = (0.2, 1.1);

/// Resolution multipliers searched during refinement.
pub const R_SEARCH: (f64, f64) = (0.25, 3.0);

/// Width multipliers searched when resolution alone cannot meet the budget.
pub const W_SEARCH: (f64, f64) = (0.25, 3.0);

/// Accepted relative gap between achieved and target MACs.
pub const MACS_TOLERANCE: f64 = 0.01;

const MAX_BISECTIONS: usize = 60;

/// Smallest factor handed to the cost model when a GP extrapolates below zero.
const FACTOR_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionPoint {
    pub c: f64,
    pub factors: ArchFactors,
}

impl ReductionPoint {
    pub fn from_record(record: &ModelRecord, m0: f64) -> Result<Self> {
        let c = record.macs / m0;
        if !(c > 0.0 && c <= C_DOMAIN.1) || !c.is_finite() {
            return Err(Error::Input(format!(
                "record {:?}: reduction factor {c} outside (0, {}]",
                record.id, C_DOMAIN.1
            )));
        }
        record.factors.validate()?;
        Ok(Self { c, factors: record.factors })
    }
}

/// The four per-factor GPs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModels {
    pub r: GpModel,
    pub d_i: GpModel,
    pub d_m: GpModel,
    pub w: GpModel,
}

impl FactorModels {
    pub fn get(&self, factor: Factor) -> &GpModel {
        match factor {
            Factor::Resolution => &self.r,
            Factor::InvertedResidualDepth => &self.d_i,
            Factor::VitDepth => &self.d_m,
            Factor::Width => &self.w,
        }
    }
}

/// Where a rule's training data came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleProvenance {
    pub record_ids: Vec<String>,
    /// Smallest and largest training `c`.
    pub c_range: (f64, f64),
    pub fit: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRule {
    pub m0: f64,
    pub models: FactorModels,
    pub provenance: RuleProvenance,
}

/// Fits the rule on selected records. Each factor gets its own GP over `c`.
pub fn fit_rule(selected: &[ModelRecord], m0: f64, config: &FitConfig) -> Result<EfficiencyRule> {
    if !(m0 > 0.0) || !m0.is_finite() {
        return Err(Error::InvalidConfig(format!("baseline MACs must be positive, got {m0}")));
    }
    if selected.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: selected.len() });
    }
    let points = selected.iter().map(|r| ReductionPoint::from_record(r, m0)).collect::<Result<Vec<_>>>()?;
    let cs: Vec<f64> = points.iter().map(|p| p.c).collect();
    let fit_factor = |f: Factor| {
        let ys: Vec<f64> = points.iter().map(|p| p.factors.get(f)).collect();
        fit(&GpDataset::from_1d(&cs, &ys)?, config)
    };
    let models = FactorModels {
        r: fit_factor(Factor::Resolution)?,
        d_i: fit_factor(Factor::InvertedResidualDepth)?,
        d_m: fit_factor(Factor::VitDepth)?,
        w: fit_factor(Factor::Width)?,
    };
    let c_range = cs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| (lo.min(c), hi.max(c)));
    Ok(EfficiencyRule {
        m0,
        models,
        provenance: RuleProvenance {
            record_ids: selected.iter().map(|r| r.id.clone()).collect(),
            c_range,
            fit: config.clone(),
        },
    })
}

/// GP mean and 95% interval for one factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorEstimate {
    pub mean: f64,
    pub std_dev: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorEstimates {
    pub r: FactorEstimate,
    pub d_i: FactorEstimate,
    pub d_m: FactorEstimate,
    pub w: FactorEstimate,
}

impl FactorEstimates {
    pub fn get(&self, factor: Factor) -> &FactorEstimate {
        match factor {
            Factor::Resolution => &self.r,
            Factor::InvertedResidualDepth => &self.d_i,
            Factor::VitDepth => &self.d_m,
            Factor::Width => &self.w,
        }
    }

    pub fn means(&self) -> ArchFactors {
        ArchFactors { r: self.r.mean, d_i: self.d_i.mean, d_m: self.d_m.mean, w: self.w.mean }
    }
}

/// Caveats attached to a recommendation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Warning {
    /// `c` lies outside [`C_DOMAIN`].
    OutOfDomain { c: f64 },
    /// `c` lies outside the range covered by the training records.
    Extrapolation { c: f64, min: f64, max: f64 },
    /// A GP mean was not positive and was raised to a small floor.
    FactorFloored { factor: Factor, predicted: f64 },
    /// The recommended factor lies outside the usual sampling box.
    OutsideEnvelope { factor: Factor, value: f64 },
    /// The snap lattice left a gap larger than [`MACS_TOLERANCE`].
    Residual { relative_error: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub target_macs: f64,
    pub c: f64,
    pub predicted: FactorEstimates,
    /// Factor tuple after refinement against the cost model.
    pub factors: ArchFactors,
    /// Factors that refinement moved away from the GP means.
    pub adjusted: Vec<Factor>,
    pub arch: ConcreteArch,
    pub achieved_macs: u64,
    pub params: u64,
    /// `(achieved - target) / target`.
    pub relative_error: f64,
    pub warnings: Vec<Warning>,
}

fn estimate(model: &GpModel, c: f64) -> Result<FactorEstimate> {
    let p = model.predict(&[c])?;
    let (lower, upper) = p.ci95();
    Ok(FactorEstimate { mean: p.mean, std_dev: p.std_dev(), lower, upper })
}

struct Probe<'a> {
    base: &'a BaseConfig,
    snap: SnapUnits,
}

impl Probe<'_> {
    fn resolve(&self, f: &ArchFactors) -> Result<ConcreteArch> {
        resolve_arch_with(f, self.base, self.snap)
    }

    fn macs(&self, f: &ArchFactors) -> Result<u64> {
        Ok(macs_of(&self.resolve(f)?, self.base)?.total)
    }
}

/// Lattice points around `target` along one factor: the largest value in
/// `range` whose MACs do not exceed the target and the smallest whose MACs do.
/// Either side is `None` when the whole range lies on the other side.
fn bracket(
    probe: &Probe,
    start: ArchFactors,
    factor: Factor,
    range: (f64, f64),
    target: f64,
) -> Result<(Option<(f64, u64)>, Option<(f64, u64)>)> {
    let at = |v: f64| probe.macs(&start.with(factor, v));
    let (mut lo, mut hi) = range;
    let (m_lo, m_hi) = (at(lo)?, at(hi)?);
    if m_lo as f64 > target {
        return Ok((None, Some((lo, m_lo))));
    }
    if (m_hi as f64) <= target {
        return Ok((Some((hi, m_hi)), None));
    }
    let (mut below, mut above) = (m_lo, m_hi);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let m = at(mid)?;
        if m as f64 <= target {
            lo = mid;
            below = m;
        } else {
            hi = mid;
            above = m;
        }
    }
    Ok((Some((lo, below)), Some((hi, above))))
}

fn rel_err(m: u64, target: f64) -> f64 {
    (m as f64 - target) / target
}

/// Closest of the two bracket ends; ties go to the cheaper side.
fn nearest(pair: (Option<(f64, u64)>, Option<(f64, u64)>), target: f64) -> Option<(f64, u64)> {
    match pair {
        (Some(a), Some(b)) => {
            if libm::fabs(rel_err(b.1, target)) < libm::fabs(rel_err(a.1, target)) {
                Some(b)
            } else {
                Some(a)
            }
        }
        (a, b) => a.or(b),
    }
}

/// Predicts factors at `c = target / m0`, then moves resolution (and, if the
/// resolution lattice is too coarse, width) until the exact MACs land within
/// [`MACS_TOLERANCE`] of the target or on the nearest reachable value.
pub fn recommend(rule: &EfficiencyRule, target_macs: f64, base: &BaseConfig) -> Result<Recommendation> {
    recommend_with(rule, target_macs, base, SnapUnits::default())
}

pub fn recommend_with(
    rule: &EfficiencyRule,
    target_macs: f64,
    base: &BaseConfig,
    snap: SnapUnits,
) -> Result<Recommendation> {
    if !(target_macs > 0.0) || !target_macs.is_finite() {
        return Err(Error::Input(format!("target MACs must be positive, got {target_macs}")));
    }
    base.validate()?;
    let c = target_macs / rule.m0;
    let mut warnings = Vec::new();
    if !(c > C_DOMAIN.0 && c <= C_DOMAIN.1) {
        warnings.push(Warning::OutOfDomain { c });
    }
    let (cmin, cmax) = rule.provenance.c_range;
    if c < cmin || c > cmax {
        warnings.push(Warning::Extrapolation { c, min: cmin, max: cmax });
    }

    let m = &rule.models;
    let predicted = FactorEstimates {
        r: estimate(&m.r, c)?,
        d_i: estimate(&m.d_i, c)?,
        d_m: estimate(&m.d_m, c)?,
        w: estimate(&m.w, c)?,
    };
    let mut start = predicted.means();
    for f in Factor::ALL {
        let v = start.get(f);
        if !(v >= FACTOR_FLOOR) {
            warnings.push(Warning::FactorFloored { factor: f, predicted: v });
            start.set(f, FACTOR_FLOOR);
        }
    }

    let probe = Probe { base, snap };
    let by_r = bracket(&probe, start, Factor::Resolution, R_SEARCH, target_macs)?;
    let (r, mut macs) = match by_r {
        (None, Some((_, min))) => {
            let max = probe.macs(&start.with(Factor::Resolution, R_SEARCH.1))?;
            return Err(Error::InfeasibleTarget { target: target_macs, min: min as f64, max: max as f64 });
        }
        (Some((_, max)), None) => {
            let min = probe.macs(&start.with(Factor::Resolution, R_SEARCH.0))?;
            return Err(Error::InfeasibleTarget { target: target_macs, min: min as f64, max: max as f64 });
        }
        pair => nearest(pair, target_macs).expect("bracket has both ends"),
    };
    let mut factors = start.with(Factor::Resolution, r);
    let mut adjusted = alloc::vec![Factor::Resolution];

    if libm::fabs(rel_err(macs, target_macs)) > MACS_TOLERANCE {
        // Resolution moves in coarse steps. Try width on the neighbouring
        // resolutions and keep the in-tolerance candidate closest to the
        // prediction, or failing that the one closest to the target.
        let unit = f64::from(snap.resolution);
        let base_res = f64::from(base.base_resolution);
        let mut resolutions: Vec<f64> = Vec::new();
        for (rv, _) in [by_r.0, by_r.1].into_iter().flatten() {
            let res = f64::from(probe.resolve(&start.with(Factor::Resolution, rv))?.input_resolution);
            for cand in [res - unit, res, res + unit] {
                let rv = cand / base_res;
                if cand >= unit && rv >= R_SEARCH.0 && rv <= R_SEARCH.1 && !resolutions.contains(&rv) {
                    resolutions.push(rv);
                }
            }
        }
        let deviation = |f: &ArchFactors| libm::fabs(libm::log(f.r / start.r)) + libm::fabs(libm::log(f.w / start.w));
        let mut best = (factors, macs);
        for rv in resolutions {
            let at_r = start.with(Factor::Resolution, rv);
            let (below, above) = bracket(&probe, at_r, Factor::Width, W_SEARCH, target_macs)?;
            for (wv, mv) in [below, above].into_iter().flatten() {
                let cand = at_r.with(Factor::Width, wv);
                let (e_new, e_old) = (libm::fabs(rel_err(mv, target_macs)), libm::fabs(rel_err(best.1, target_macs)));
                let better = match (e_new <= MACS_TOLERANCE, e_old <= MACS_TOLERANCE) {
                    (true, true) => deviation(&cand) < deviation(&best.0),
                    (true, false) => true,
                    (false, true) => false,
                    (false, false) => e_new < e_old,
                };
                if better {
                    best = (cand, mv);
                }
            }
        }
        if best.0.w != factors.w {
            adjusted.push(Factor::Width);
        }
        (factors, macs) = best;
    }

    let relative_error = rel_err(macs, target_macs);
    if libm::fabs(relative_error) > MACS_TOLERANCE {
        warnings.push(Warning::Residual { relative_error });
    }
    for f in factors.outside_envelope(&SamplingEnvelope::default()) {
        warnings.push(Warning::OutsideEnvelope { factor: f, value: factors.get(f) });
    }
    let arch = probe.resolve(&factors)?;
    let breakdown = macs_of(&arch, base)?;
    Ok(Recommendation {
        target_macs,
        c,
        predicted,
        factors,
        adjusted,
        arch,
        achieved_macs: breakdown.total,
        params: breakdown.parameter_total,
        relative_error,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn rec(id: &str, macs: f64, f: ArchFactors) -> ModelRecord {
        ModelRecord { id: id.to_string(), factors: f, macs, accuracy: 0.8, top5: None }
    }

    #[test]
    fn needs_three_records() {
        let r = vec![rec("a", 1.0, ArchFactors::IDENTITY), rec("b", 0.5, ArchFactors::IDENTITY)];
        assert!(matches!(fit_rule(&r, 1.0, &FitConfig::default()), Err(Error::InsufficientData { needed: 3, got: 2 })));
    }

    #[test]
    fn rejects_c_above_domain() {
        let r = vec![
            rec("a", 1.0, ArchFactors::IDENTITY),
            rec("b", 0.5, ArchFactors::IDENTITY),
            rec("c", 1.2, ArchFactors::IDENTITY),
        ];
        assert!(matches!(fit_rule(&r, 1.0, &FitConfig::default()), Err(Error::Input(_))));
    }

    #[test]
    fn nearest_prefers_cheaper_on_ties() {
        let pick = nearest((Some((1.0, 90)), Some((2.0, 110))), 100.0).unwrap();
        assert_eq!(pick, (1.0, 90));
        let pick = nearest((Some((1.0, 90)), Some((2.0, 105))), 100.0).unwrap();
        assert_eq!(pick, (2.0, 105));
    }
}
