//! Segmentation scores: per-sample IoU, pooled IoU, mean IoU and Pr@X.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

pub const DEFAULT_THRESHOLDS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub intersection: u64,
    pub union: u64,
    pub iou: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl EvalRecord {
    /// Both counts empty means both masks were empty: perfect agreement.
    pub fn from_counts(id: impl Into<String>, intersection: u64, union: u64) -> Self {
        debug_assert!(intersection <= union);
        let iou = if union == 0 {
            1.0
        } else {
            intersection as f64 / union as f64
        };
        Self {
            id: id.into(),
            intersection,
            union,
            iou,
            category: None,
        }
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }
}

pub fn iou(pred: &BinaryMask, gt: &BinaryMask) -> Result<EvalRecord> {
    iou_with_id("", pred, gt)
}

pub fn iou_with_id(
    id: impl Into<String>,
    pred: &BinaryMask,
    gt: &BinaryMask,
) -> Result<EvalRecord> {
    pred.ensure_dims(gt.width(), gt.height())?;
    let (mut inter, mut union) = (0u64, 0u64);
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        inter += u64::from(p && g);
        union += u64::from(p || g);
    }
    Ok(EvalRecord::from_counts(id, inter, union))
}

/// `(threshold, fraction of samples whose IoU exceeds it)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionAt(pub Vec<(f64, f64)>);

impl Serialize for PrecisionAt {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (t, v) in &self.0 {
            map.serialize_entry(&format!("pr@{t}"), v)?;
        }
        map.end()
    }
}

impl PrecisionAt {
    pub fn get(&self, threshold: f64) -> Option<f64> {
        self.0
            .iter()
            .find(|(t, _)| *t == threshold)
            .map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryScore {
    pub miou: f64,
    pub n_samples: usize,
}

/// All fractions lie in `[0, 1]`; multiply by 100 for percentages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub oiou: f64,
    pub miou: f64,
    #[serde(flatten)]
    pub precision: PrecisionAt,
    pub n_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_category: Option<BTreeMap<String, CategoryScore>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category_miou: Option<f64>,
}

pub fn aggregate(records: &[EvalRecord], thresholds: &[f64]) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no evaluation records".into()));
    }
    let n = records.len();
    let inter: u64 = records.iter().map(|r| r.intersection).sum();
    let union: u64 = records.iter().map(|r| r.union).sum();
    let oiou = if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    };
    let miou = records.iter().map(|r| r.iou).sum::<f64>() / n as f64;

    let mut ts = thresholds.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let precision = PrecisionAt(
        ts.into_iter()
            .map(|t| {
                (
                    t,
                    records.iter().filter(|r| r.iou > t).count() as f64 / n as f64,
                )
            })
            .collect(),
    );

    let (per_category, category_miou) = if records.iter().all(|r| r.category.is_some()) {
        let mut groups: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in records {
            let e = groups.entry(r.category.clone().unwrap()).or_default();
            e.0 += r.iou;
            e.1 += 1;
        }
        let table: BTreeMap<String, CategoryScore> = groups
            .into_iter()
            .map(|(k, (s, c))| {
                (
                    k,
                    CategoryScore {
                        miou: s / c as f64,
                        n_samples: c,
                    },
                )
            })
            .collect();
        let mean = table.values().map(|c| c.miou).sum::<f64>() / table.len() as f64;
        (Some(table), Some(mean))
    } else {
        (None, None)
    };

    Ok(MetricsReport {
        oiou,
        miou,
        precision,
        n_samples: n,
        per_category,
        category_miou,
    })
}
