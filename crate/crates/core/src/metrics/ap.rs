use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

use super::iou::{iou3d, OrientedBox};

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub category: String,
    pub score: f64,
    pub bbox: OrientedBox,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub category: String,
    pub bbox: OrientedBox,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectionSet {
    pub predictions: Vec<Detection>,
    pub ground_truth: Vec<GroundTruth>,
}

impl DetectionSet {
    pub fn new(predictions: Vec<Detection>, ground_truth: Vec<GroundTruth>) -> Result<Self> {
        if let Some(d) = predictions.iter().find(|d| !d.score.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite score {} for a '{}' prediction",
                d.score, d.category
            )));
        }
        Ok(DetectionSet {
            predictions,
            ground_truth,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CategoryAp {
    pub category: String,
    /// `None` when the category has no ground truth.
    pub ap: Option<f64>,
    pub ground_truth: usize,
    pub predictions: usize,
    pub true_positives: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApReport {
    pub iou_threshold: f64,
    pub categories: Vec<CategoryAp>,
    /// Mean over categories with ground truth; `None` if there are none.
    pub mean_ap: Option<f64>,
    /// Categories predicted but absent from the ground truth.
    pub excluded: Vec<String>,
}

/// Per-category average precision at an IoU threshold.
///
/// Predictions are matched greedily in descending score order (ties keep
/// input order) to the unmatched ground truth box of highest IoU. AP is the
/// area under the precision-recall curve after making precision
/// monotonically non-increasing in recall.
pub fn average_precision(set: &DetectionSet, iou_threshold: f64) -> Result<ApReport> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::invalid(format!(
            "IoU threshold must lie in (0, 1), got {iou_threshold}"
        )));
    }
    let mut by_category: BTreeMap<&str, (Vec<&Detection>, Vec<&GroundTruth>)> = BTreeMap::new();
    for d in &set.predictions {
        by_category.entry(&d.category).or_default().0.push(d);
    }
    for g in &set.ground_truth {
        by_category.entry(&g.category).or_default().1.push(g);
    }

    let mut categories = Vec::new();
    let mut excluded = Vec::new();
    for (name, (mut preds, gts)) in by_category {
        preds.sort_by(|a, b| b.score.total_cmp(&a.score));
        if gts.is_empty() {
            excluded.push(name.to_string());
            categories.push(CategoryAp {
                category: name.to_string(),
                ap: None,
                ground_truth: 0,
                predictions: preds.len(),
                true_positives: 0,
            });
            continue;
        }
        let mut matched = vec![false; gts.len()];
        let mut hits = Vec::with_capacity(preds.len());
        for p in &preds {
            let best = gts
                .iter()
                .enumerate()
                .filter(|(i, _)| !matched[*i])
                .map(|(i, g)| (i, iou3d(&p.bbox, &g.bbox)))
                .filter(|(_, iou)| *iou >= iou_threshold)
                .fold(None, |acc: Option<(usize, f64)>, cur| match acc {
                    Some(a) if a.1 >= cur.1 => Some(a),
                    _ => Some(cur),
                });
            match best {
                Some((i, _)) => {
                    matched[i] = true;
                    hits.push(true);
                }
                None => hits.push(false),
            }
        }
        let tp = hits.iter().filter(|h| **h).count();
        categories.push(CategoryAp {
            category: name.to_string(),
            ap: Some(interpolated_ap(&hits, gts.len())),
            ground_truth: gts.len(),
            predictions: preds.len(),
            true_positives: tp,
        });
    }
    let scored: Vec<f64> = categories.iter().filter_map(|c| c.ap).collect();
    let mean_ap = (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64);
    Ok(ApReport {
        iou_threshold,
        categories,
        mean_ap,
        excluded,
    })
}

/// All-points interpolated AP of a ranked hit list against `positives`.
fn interpolated_ap(hits: &[bool], positives: usize) -> f64 {
    let mut recall = vec![0.0];
    let mut precision = vec![1.0];
    let mut tp = 0usize;
    for (k, &h) in hits.iter().enumerate() {
        if h {
            tp += 1;
        }
        recall.push(tp as f64 / positives as f64);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    (1..recall.len())
        .map(|i| (recall[i] - recall[i - 1]) * precision[i])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point3, Rotation, Vector3};

    fn cube(x: f64) -> OrientedBox {
        OrientedBox::new(
            Point3::new(x, 0.0, 0.0),
            Vector3::new(0.5, 0.5, 0.5),
            Rotation::identity(),
        )
        .unwrap()
    }

    fn gt(cat: &str, x: f64) -> GroundTruth {
        GroundTruth {
            category: cat.into(),
            bbox: cube(x),
        }
    }

    fn det(cat: &str, x: f64, score: f64) -> Detection {
        Detection {
            category: cat.into(),
            score,
            bbox: cube(x),
        }
    }

    #[test]
    fn perfect_predictions() {
        let g = vec![gt("cup", 0.0), gt("cup", 5.0), gt("can", 10.0)];
        let p = g.iter().map(|g| det(&g.category, g.bbox.center.x, 1.0)).collect();
        let r = average_precision(&DetectionSet::new(p, g).unwrap(), 0.5).unwrap();
        assert_eq!(r.mean_ap, Some(1.0));
        assert!(r.categories.iter().all(|c| c.ap == Some(1.0)));
    }

    #[test]
    fn no_predictions() {
        let r = average_precision(&DetectionSet::new(vec![], vec![gt("cup", 0.0)]).unwrap(), 0.25).unwrap();
        assert_eq!(r.mean_ap, Some(0.0));
    }

    #[test]
    fn half_recall() {
        // hand-enumerated PR curve: (R, P) = (0.5, 1), (0.5, 0.5) → AP 0.5
        for threshold in [0.05, 0.25, 0.5, 0.95] {
            let g = vec![gt("box", 0.0), gt("box", 5.0)];
            let p = vec![det("box", 0.0, 0.9), det("box", 40.0, 0.4)];
            let r = average_precision(&DetectionSet::new(p, g).unwrap(), threshold).unwrap();
            assert_eq!(r.mean_ap, Some(0.5));
        }
    }

    #[test]
    fn threshold_decides_match() {
        // IoU of cubes offset by 0.5 is 1/3
        let set = DetectionSet::new(vec![det("can", 0.5, 1.0)], vec![gt("can", 0.0)]).unwrap();
        assert_eq!(average_precision(&set, 0.25).unwrap().mean_ap, Some(1.0));
        assert_eq!(average_precision(&set, 0.5).unwrap().mean_ap, Some(0.0));
    }

    #[test]
    fn ground_truth_matched_once() {
        let set = DetectionSet::new(vec![det("cup", 0.0, 0.9), det("cup", 0.0, 0.8)], vec![gt("cup", 0.0)]).unwrap();
        let r = average_precision(&set, 0.5).unwrap();
        assert_eq!(r.categories[0].true_positives, 1);
        assert_eq!(r.mean_ap, Some(1.0));
    }

    #[test]
    fn categories_without_ground_truth_are_excluded() {
        let set = DetectionSet::new(
            vec![det("teapot", 0.0, 1.0), det("cup", 0.0, 1.0)],
            vec![gt("cup", 0.0)],
        )
        .unwrap();
        let r = average_precision(&set, 0.5).unwrap();
        assert_eq!(r.excluded, vec!["teapot".to_string()]);
        assert_eq!(r.mean_ap, Some(1.0));
        let only = DetectionSet::new(vec![det("teapot", 0.0, 1.0)], vec![]).unwrap();
        assert_eq!(average_precision(&only, 0.5).unwrap().mean_ap, None);
    }

    #[test]
    fn monotone_rescoring_invariant() {
        let g = vec![gt("box", 0.0), gt("box", 5.0), gt("box", 10.0)];
        let p = vec![
            det("box", 0.2, 0.3),
            det("box", 30.0, 0.9),
            det("box", 5.1, 0.5),
            det("box", 10.6, 0.7),
        ];
        let a = average_precision(&DetectionSet::new(p.clone(), g.clone()).unwrap(), 0.25).unwrap();
        let rescored = p
            .into_iter()
            .map(|d| Detection {
                score: (3.0 * d.score).exp() - 1.0,
                ..d
            })
            .collect();
        let b = average_precision(&DetectionSet::new(rescored, g).unwrap(), 0.25).unwrap();
        assert_eq!(a.mean_ap, b.mean_ap);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(average_precision(&DetectionSet::default(), 0.0).is_err());
        assert!(average_precision(&DetectionSet::default(), 1.0).is_err());
        assert!(DetectionSet::new(vec![det("cup", 0.0, f64::NAN)], vec![]).is_err());
    }
}
