use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("no predictions")]
    EmptyInput,
    #[error("{what}: expected {expected} entries, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("pair id {0} does not occur exactly twice")]
    UnpairedSample(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Accuracy,
    ErrorRate,
    Pairwise,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::ErrorRate => "error-rate",
            Metric::Pairwise => "pairwise",
        }
    }

    pub fn from_name(s: &str) -> Option<Metric> {
        [Metric::Accuracy, Metric::ErrorRate, Metric::Pairwise]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

fn check(preds: &[usize], labels: &[usize]) -> Result<(), MetricError> {
    if preds.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if labels.len() != preds.len() {
        return Err(MetricError::LengthMismatch {
            what: "labels",
            expected: preds.len(),
            found: labels.len(),
        });
    }
    Ok(())
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64, MetricError> {
    check(preds, labels)?;
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / preds.len() as f64)
}

pub fn error_rate(preds: &[usize], labels: &[usize]) -> Result<f64, MetricError> {
    Ok(1.0 - accuracy(preds, labels)?)
}

/// Fraction of pairs whose two members are both classified correctly.
pub fn pairwise_accuracy(preds: &[usize], labels: &[usize], pair_ids: &[u64]) -> Result<f64, MetricError> {
    check(preds, labels)?;
    if pair_ids.len() != preds.len() {
        return Err(MetricError::LengthMismatch {
            what: "pair ids",
            expected: preds.len(),
            found: pair_ids.len(),
        });
    }
    let mut pairs: BTreeMap<u64, (usize, bool)> = BTreeMap::new();
    for ((p, l), &id) in preds.iter().zip(labels).zip(pair_ids) {
        let e = pairs.entry(id).or_insert((0, true));
        e.0 += 1;
        e.1 &= p == l;
    }
    if let Some((&id, _)) = pairs.iter().find(|(_, (n, _))| *n != 2) {
        return Err(MetricError::UnpairedSample(id));
    }
    let correct = pairs.values().filter(|(_, ok)| *ok).count();
    Ok(correct as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_accuracy() {
        assert_eq!(accuracy(&[1, 0, 1], &[1, 0, 1]), Ok(1.0));
        assert_eq!(accuracy(&[0, 1], &[1, 0]), Ok(0.0));
        let preds = [1, 1, 1, 1, 1, 1, 1, 0, 0, 0];
        assert_eq!(accuracy(&preds, &[1; 10]), Ok(0.7));
        assert!((error_rate(&preds, &[1; 10]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(accuracy(&[], &[]), Err(MetricError::EmptyInput));
        assert!(matches!(
            accuracy(&[1], &[1, 0]),
            Err(MetricError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn pairwise_cases() {
        // Vulnerable (label 1) always right, safe (label 0) always wrong.
        let labels = [1, 0, 1, 0];
        assert_eq!(pairwise_accuracy(&[1, 1, 1, 1], &labels, &[0, 0, 1, 1]), Ok(0.0));
        assert_eq!(pairwise_accuracy(&labels, &labels, &[0, 0, 1, 1]), Ok(1.0));
        // 10 pairs: 4 fully right, 3 half right, 3 fully wrong.
        let mut preds = Vec::new();
        let mut labels = Vec::new();
        let mut ids = Vec::new();
        for k in 0..10u64 {
            labels.extend([1, 0]);
            ids.extend([k, k]);
            preds.extend(match k {
                0..=3 => [1, 0],
                4..=6 => [1, 1],
                _ => [0, 1],
            });
        }
        assert_eq!(pairwise_accuracy(&preds, &labels, &ids), Ok(0.4));
        assert_eq!(
            pairwise_accuracy(&[1, 0, 1], &[1, 0, 1], &[0, 0, 1]),
            Err(MetricError::UnpairedSample(1))
        );
    }
}
