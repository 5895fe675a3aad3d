//! Probabilistic baselines: the same trend/backcast estimators trained five
//! times under pinball losses at q = 10/25/50/75/90%, giving quantile tracks
//! instead of a single point estimate. Independent quantile models can
//! cross, so each timestamp's five values are sorted into order (monotone
//! rearrangement) before release.

use super::{BaselineError, EnsembleSpec};
use crate::frame::Timestamp;
use crate::learners::{fit, FeatureMatrix, LearnerSpec, LossKind};
use serde::{Deserialize, Serialize};

/// The five indexed quantile levels of the probabilistic estimators.
pub const QUANTILE_LEVELS: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 0.90];

/// Which estimator family the quantile models come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbFamily {
    Trend,
    Backcast,
}

/// Five non-crossing quantile tracks over a shared horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilisticBaseline {
    pub family: ProbFamily,
    timestamps: Vec<Timestamp>,
    /// tracks[k][t] is the q = QUANTILE_LEVELS[k] baseline at timestamp t.
    tracks: [Vec<f64>; 5],
}

impl ProbabilisticBaseline {
    pub fn new(
        family: ProbFamily,
        timestamps: Vec<Timestamp>,
        mut tracks: [Vec<f64>; 5],
    ) -> Result<Self, BaselineError> {
        for track in &tracks {
            if track.len() != timestamps.len() {
                return Err(BaselineError::Misaligned(
                    "quantile track length differs from the horizon".into(),
                ));
            }
        }
        rearrange_monotone(&mut tracks);
        Ok(Self {
            family,
            timestamps,
            tracks,
        })
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Track for one of the five supported levels.
    pub fn track(&self, q: f64) -> Option<&[f64]> {
        QUANTILE_LEVELS
            .iter()
            .position(|lvl| (lvl - q).abs() < 1e-9)
            .map(|i| self.tracks[i].as_slice())
    }

    pub fn tracks(&self) -> &[Vec<f64>; 5] {
        &self.tracks
    }
}

/// Per-timestamp sort across the five tracks; the minimal change that
/// enforces non-crossing.
fn rearrange_monotone(tracks: &mut [Vec<f64>; 5]) {
    let n = tracks[0].len();
    for t in 0..n {
        let mut column = [
            tracks[0][t], tracks[1][t], tracks[2][t], tracks[3][t], tracks[4][t],
        ];
        column.sort_by(f64::total_cmp);
        for (k, v) in column.into_iter().enumerate() {
            tracks[k][t] = v;
        }
    }
}

/// Trains one model per quantile level (members of `spec` re-lossed with
/// pinball(q)) and predicts the horizon.
pub fn probabilistic_baseline(
    train_features: &FeatureMatrix,
    train_target: &[f64],
    spec: &EnsembleSpec,
    horizon_features: &FeatureMatrix,
    horizon: &[Timestamp],
    family: ProbFamily,
) -> Result<ProbabilisticBaseline, BaselineError> {
    if spec.members.is_empty() {
        return Err(BaselineError::EmptyEnsemble);
    }
    if train_features.n_rows() != train_target.len() {
        return Err(BaselineError::Misaligned(format!(
            "{} training rows vs {} targets",
            train_features.n_rows(),
            train_target.len()
        )));
    }
    if horizon_features.n_rows() != horizon.len() {
        return Err(BaselineError::Misaligned(format!(
            "{} horizon rows vs {} horizon timestamps",
            horizon_features.n_rows(),
            horizon.len()
        )));
    }
    let mut tracks: [Vec<f64>; 5] = Default::default();
    for (k, q) in QUANTILE_LEVELS.iter().enumerate() {
        let mut acc = vec![0.0; horizon.len()];
        for member in &spec.members {
            let qspec = LearnerSpec {
                kind: member.kind.clone(),
                loss: LossKind::Pinball(*q),
            };
            let model = fit(&qspec, train_features, train_target)?;
            for (a, p) in acc.iter_mut().zip(model.predict(horizon_features)?) {
                *a += p;
            }
        }
        let m = spec.members.len() as f64;
        for a in acc.iter_mut() {
            *a /= m;
        }
        tracks[k] = acc;
    }
    ProbabilisticBaseline::new(family, horizon.to_vec(), tracks)
}

/// 50% interval -> (q25, q75); 80% -> (q10, q90).
pub fn confidence_interval(
    pb: &ProbabilisticBaseline,
    level: u32,
) -> Result<(Vec<f64>, Vec<f64>), BaselineError> {
    let (lo, hi) = match level {
        50 => (0.25, 0.75),
        80 => (0.10, 0.90),
        other => return Err(BaselineError::UnsupportedLevel(other)),
    };
    Ok((
        pb.track(lo).expect("supported level").to_vec(),
        pb.track(hi).expect("supported level").to_vec(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::tests::{date, gauss};
    use chrono::Duration;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn horizon(n: usize) -> Vec<Timestamp> {
        (0..n)
            .map(|i| Timestamp::new(date(2020, 4, 1) + Duration::days(i as i64 / 24), (i % 24) as u8).unwrap())
            .collect()
    }

    fn ridge_spec() -> EnsembleSpec {
        EnsembleSpec::single(LearnerSpec::ridge(0.0))
    }

    #[test]
    fn degenerate_target_collapses_all_tracks() {
        let xs: Vec<f64> = (0..60).map(|i| i as f64 / 6.0).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        let x = FeatureMatrix::from_columns(vec![("x".into(), xs.clone())]).unwrap();
        let pb = probabilistic_baseline(&x, &y, &ridge_spec(), &x, &horizon(60), ProbFamily::Trend)
            .unwrap();
        for t in 0..pb.len() {
            let lo = pb.tracks()[0][t];
            let hi = pb.tracks()[4][t];
            assert!((hi - lo).abs() < 1e-6, "tracks spread {} at {t}", hi - lo);
        }
        // Degenerate intervals have zero width.
        let (lo, hi) = confidence_interval(&pb, 50).unwrap();
        for (a, b) in lo.iter().zip(&hi) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_noise_quantiles_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let n = 5000;
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|x| 1.2 * x + 0.5 + rng.gen_range(-1.0..1.0))
            .collect();
        let x = FeatureMatrix::from_columns(vec![("x".into(), xs.clone())]).unwrap();
        let grid: Vec<f64> = (0..50).map(|i| -2.5 + i as f64 / 10.0).collect();
        let xg = FeatureMatrix::from_columns(vec![("x".into(), grid.clone())]).unwrap();
        let pb = probabilistic_baseline(&x, &y, &ridge_spec(), &xg, &horizon(50), ProbFamily::Backcast)
            .unwrap();
        // Quantiles of U(-1,1): q10 = -0.8, q50 = 0, q90 = +0.8.
        let q10 = pb.track(0.10).unwrap();
        let q50 = pb.track(0.50).unwrap();
        let q90 = pb.track(0.90).unwrap();
        for (i, g) in grid.iter().enumerate() {
            let center = 1.2 * g + 0.5;
            assert!((q50[i] - center).abs() < 0.1, "median off at {g}");
            assert!(((q10[i] - center) + 0.8).abs() < 0.1, "q10 offset {}", q10[i] - center);
            assert!(((q90[i] - center) - 0.8).abs() < 0.1, "q90 offset {}", q90[i] - center);
        }
    }

    #[test]
    fn coverage_of_80_percent_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 6000;
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = xs.iter().map(|x| x + 0.8 * gauss(&mut rng)).collect();
        let x_train = FeatureMatrix::from_columns(vec![("x".into(), xs[..4000].to_vec())]).unwrap();
        let x_test = FeatureMatrix::from_columns(vec![("x".into(), xs[4000..].to_vec())]).unwrap();
        let pb = probabilistic_baseline(
            &x_train,
            &y[..4000],
            &ridge_spec(),
            &x_test,
            &horizon(2000),
            ProbFamily::Backcast,
        )
        .unwrap();
        let (lo, hi) = confidence_interval(&pb, 80).unwrap();
        let covered = y[4000..]
            .iter()
            .zip(lo.iter().zip(&hi))
            .filter(|(yi, (l, h))| **yi >= **l && **yi <= **h)
            .count() as f64
            / 2000.0;
        assert!(
            (covered - 0.80).abs() <= 0.05,
            "80% band covered {covered}"
        );
    }

    #[test]
    fn tracks_never_cross() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|x| x * x + 0.3 * gauss(&mut rng))
            .collect();
        let x = FeatureMatrix::from_columns(vec![("x".into(), xs)]).unwrap();
        let spec = EnsembleSpec::single(LearnerSpec {
            kind: crate::learners::LearnerKind::Mlp {
                hidden: vec![6],
                learning_rate: 0.03,
                epochs: 60,
                seed: 11,
            },
            loss: LossKind::Squared,
        });
        let pb = probabilistic_baseline(&x, &y, &spec, &x, &horizon(n), ProbFamily::Backcast).unwrap();
        for t in 0..pb.len() {
            for k in 1..5 {
                assert!(
                    pb.tracks()[k][t] >= pb.tracks()[k - 1][t],
                    "crossing at t={t} k={k}"
                );
            }
        }
    }

    #[test]
    fn interval_mapping_and_unsupported_level() {
        let ts = horizon(3);
        let tracks = [
            vec![1.0; 3],
            vec![2.0; 3],
            vec![3.0; 3],
            vec![4.0; 3],
            vec![5.0; 3],
        ];
        let pb = ProbabilisticBaseline::new(ProbFamily::Trend, ts, tracks).unwrap();
        let (lo, hi) = confidence_interval(&pb, 50).unwrap();
        assert_eq!((lo[0], hi[0]), (2.0, 4.0));
        let (lo, hi) = confidence_interval(&pb, 80).unwrap();
        assert_eq!((lo[0], hi[0]), (1.0, 5.0));
        assert!(matches!(
            confidence_interval(&pb, 95),
            Err(BaselineError::UnsupportedLevel(95))
        ));
    }

    #[test]
    fn rearrangement_sorts_crossing_inputs() {
        let ts = horizon(2);
        let tracks = [
            vec![5.0, 1.0],
            vec![4.0, 2.0],
            vec![3.0, 3.0],
            vec![2.0, 4.0],
            vec![1.0, 5.0],
        ];
        let pb = ProbabilisticBaseline::new(ProbFamily::Trend, ts, tracks).unwrap();
        assert_eq!(pb.tracks()[0], vec![1.0, 1.0]);
        assert_eq!(pb.tracks()[4], vec![5.0, 5.0]);
    }
}
