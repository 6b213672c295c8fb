//! Feature-based retention with bounds relative to cohort averages.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scene::SceneInstance;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("cannot average an empty cohort")]
    EmptyCohort,
    #[error("invalid interval for {0}: need 0 <= lo <= hi")]
    InvalidInterval(&'static str),
}

/// Closed interval `[lo, hi]` of multipliers; `hi = None` is unbounded.
/// Serialized as `[lo, hi]` with `null` for an open upper end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: Option<f64>,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi: Some(hi) }
    }

    pub const fn at_least(lo: f64) -> Self {
        Self { lo, hi: None }
    }

    pub fn is_valid(&self) -> bool {
        self.lo >= 0.0 && self.hi.is_none_or(|h| h >= self.lo)
    }

    /// Inclusive test of `value` against the interval scaled by `avg`.
    pub fn admits(&self, value: f64, avg: f64) -> bool {
        value >= self.lo * avg && self.hi.is_none_or(|h| value <= h * avg)
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (self.lo, self.hi).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (lo, hi) = <(f64, Option<f64>)>::deserialize(d)?;
        let iv = Interval { lo, hi };
        if !iv.is_valid() {
            return Err(D::Error::custom("interval needs 0 <= lo <= hi"));
        }
        Ok(iv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub size: Interval,
    pub perimeter: Interval,
    pub eccentricity: Interval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_score: Option<f64>,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            size: Interval::new(0.001, 6.0),
            perimeter: Interval::new(0.5, 4.0),
            eccentricity: Interval::new(0.2, 1.5),
            min_score: None,
        }
    }
}

impl FilterSpec {
    /// Retains everything.
    pub fn open() -> Self {
        let all = Interval::at_least(0.0);
        Self { size: all, perimeter: all, eccentricity: all, min_score: None }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        for (name, iv) in [("size", self.size), ("perimeter", self.perimeter), ("eccentricity", self.eccentricity)] {
            if !iv.is_valid() {
                return Err(FilterError::InvalidInterval(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortAverages {
    pub size: f64,
    pub perimeter: f64,
    pub eccentricity: f64,
}

pub fn cohort_averages(instances: &[SceneInstance]) -> Result<CohortAverages, FilterError> {
    if instances.is_empty() {
        return Err(FilterError::EmptyCohort);
    }
    let n = instances.len() as f64;
    let sum = |f: &dyn Fn(&SceneInstance) -> f64| instances.iter().map(f).sum::<f64>() / n;
    Ok(CohortAverages {
        size: sum(&|i| i.features.area_px as f64),
        perimeter: sum(&|i| i.features.perimeter_px as f64),
        eccentricity: sum(&|i| i.features.eccentricity),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Size,
    Perimeter,
    Eccentricity,
    Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discarded {
    pub instance: SceneInstance,
    pub reasons: Vec<RejectReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub retained: Vec<SceneInstance>,
    pub discarded: Vec<Discarded>,
    /// Averages the bounds were scaled by; absent for an empty input.
    pub averages: Option<CohortAverages>,
}

/// Every violated criterion for one instance, empty when it is retained.
pub fn rejection_reasons(inst: &SceneInstance, spec: &FilterSpec, avg: &CohortAverages) -> Vec<RejectReason> {
    let f = &inst.features;
    let mut r = Vec::new();
    if !spec.size.admits(f.area_px as f64, avg.size) {
        r.push(RejectReason::Size);
    }
    if !spec.perimeter.admits(f.perimeter_px as f64, avg.perimeter) {
        r.push(RejectReason::Perimeter);
    }
    if !spec.eccentricity.admits(f.eccentricity, avg.eccentricity) {
        r.push(RejectReason::Eccentricity);
    }
    if spec.min_score.is_some_and(|m| inst.score < m) {
        r.push(RejectReason::Score);
    }
    r
}

/// Filters with averages taken over the input itself.
pub fn apply_filter(instances: &[SceneInstance], spec: &FilterSpec) -> FilterOutcome {
    match cohort_averages(instances) {
        Ok(avg) => apply_filter_frozen(instances, spec, &avg),
        Err(_) => FilterOutcome { retained: Vec::new(), discarded: Vec::new(), averages: None },
    }
}

/// Filters with externally fixed averages, so refiltering a retained set
/// gives the same set.
pub fn apply_filter_frozen(instances: &[SceneInstance], spec: &FilterSpec, avg: &CohortAverages) -> FilterOutcome {
    let mut out = FilterOutcome { retained: Vec::new(), discarded: Vec::new(), averages: Some(*avg) };
    for inst in instances {
        let reasons = rejection_reasons(inst, spec, avg);
        if reasons.is_empty() {
            out.retained.push(inst.clone());
        } else {
            out.discarded.push(Discarded { instance: inst.clone(), reasons });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl FeatureStats {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Option<Self> {
        let n = values.clone().count();
        if n == 0 {
            return None;
        }
        Some(Self {
            min: values.clone().fold(f64::INFINITY, f64::min),
            mean: values.clone().sum::<f64>() / n as f64,
            max: values.fold(f64::NEG_INFINITY, f64::max),
        })
    }

    fn scaled(self, k: f64) -> Self {
        Self { min: self.min * k, mean: self.mean * k, max: self.max * k }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetainedStats {
    pub size: FeatureStats,
    pub perimeter: FeatureStats,
    pub eccentricity: FeatureStats,
    /// Physical units, present when a pixel scale was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size_um2: Option<FeatureStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perimeter_um: Option<FeatureStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphologyReport {
    pub retained: usize,
    pub discarded: usize,
    /// Absent when nothing was retained.
    pub stats: Option<RetainedStats>,
}

/// Counts and per-feature min/mean/max of the retained set. `um_per_px`
/// only adds physical-unit copies of the size and perimeter statistics.
pub fn morphology_report(outcome: &FilterOutcome, um_per_px: Option<f64>) -> MorphologyReport {
    let r = &outcome.retained;
    let stats = FeatureStats::of(r.iter().map(|i| i.features.area_px as f64)).map(|size| {
        let perimeter = FeatureStats::of(r.iter().map(|i| i.features.perimeter_px as f64)).expect("non-empty");
        let eccentricity = FeatureStats::of(r.iter().map(|i| i.features.eccentricity)).expect("non-empty");
        RetainedStats {
            size,
            perimeter,
            eccentricity,
            size_um2: um_per_px.map(|s| size.scaled(s * s)),
            perimeter_um: um_per_px.map(|s| perimeter.scaled(s)),
        }
    });
    MorphologyReport { retained: r.len(), discarded: outcome.discarded.len(), stats }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::InstanceFeatures;

    fn inst(id: u32, area: usize, perimeter: usize, ecc: f64) -> SceneInstance {
        SceneInstance {
            id,
            bbox: [0, 0, 1, 1],
            rle: vec![0, 1],
            score: 0.9,
            features: InstanceFeatures { area_px: area, perimeter_px: perimeter, eccentricity: ecc },
            tile: 0,
            flags: Vec::new(),
        }
    }

    #[test]
    fn averages() {
        assert_eq!(cohort_averages(&[]), Err(FilterError::EmptyCohort));
        let a = cohort_averages(&[inst(1, 100, 40, 0.5)]).unwrap();
        assert_eq!((a.size, a.perimeter, a.eccentricity), (100.0, 40.0, 0.5));
        let a = cohort_averages(&[inst(1, 100, 40, 0.5), inst(2, 300, 40, 0.5)]).unwrap();
        assert_eq!(a.size, 200.0);
    }

    #[test]
    fn default_spec_rejects_oversized() {
        // 11 instances of area 10 and one of area 1000: mean ~ 92.5, 1000 > 6 * mean
        let mut v: Vec<_> = (0..11).map(|i| inst(i, 10, 12, 0.5)).collect();
        v.push(inst(11, 1000, 12, 0.5));
        let out = apply_filter(&v, &FilterSpec::default());
        assert_eq!(out.discarded.len(), 1);
        assert_eq!(out.discarded[0].reasons, vec![RejectReason::Size]);
        let rep = morphology_report(&out, Some(0.5));
        assert_eq!((rep.retained, rep.discarded), (11, 1));
        let s = rep.stats.unwrap();
        assert_eq!(s.size.max, 10.0);
        assert_eq!(s.size_um2.unwrap().max, 2.5);
    }

    #[test]
    fn open_spec_and_inclusive_bounds() {
        let v = vec![inst(1, 50, 20, 0.1), inst(2, 150, 60, 0.9)];
        assert_eq!(apply_filter(&v, &FilterSpec::open()).retained.len(), 2);
        // lo = 0.5 of mean size 100 is exactly 50
        let spec = FilterSpec { size: Interval::new(0.5, 1.0), ..FilterSpec::open() };
        let out = apply_filter(&v, &spec);
        assert_eq!(out.retained.iter().map(|i| i.id).collect::<Vec<_>>(), vec![1]);
        let rep = morphology_report(&apply_filter(&[], &spec), None);
        assert_eq!((rep.retained, rep.discarded, rep.stats), (0, 0, None));
    }

    #[test]
    fn spec_json_contract() {
        let spec: FilterSpec =
            serde_json::from_str(r#"{"size":[0.001,6],"perimeter":[0.5,null],"eccentricity":[0.2,1.5],"min_score":0.3}"#)
                .unwrap();
        assert_eq!(spec.perimeter.hi, None);
        assert_eq!(spec.min_score, Some(0.3));
        let back: FilterSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<FilterSpec>(r#"{"size":[2,1],"perimeter":[0,1],"eccentricity":[0,1]}"#).is_err());
        assert!(serde_json::from_str::<FilterSpec>(r#"{"size":[0,1],"perimeter":[0,1],"eccentricity":[0,1],"x":1}"#).is_err());
    }

    #[test]
    fn score_threshold() {
        let mut a = inst(1, 10, 10, 0.5);
        a.score = 0.2;
        let spec = FilterSpec { min_score: Some(0.5), ..FilterSpec::open() };
        assert_eq!(apply_filter(&[a], &spec).discarded[0].reasons, vec![RejectReason::Score]);
    }
}
