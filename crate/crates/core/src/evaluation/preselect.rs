//! Pairing every synthetic image with its single most similar training
//! image by image-level RMSE, ahead of human rating.

use rayon::prelude::*;

use crate::engine::for_each_training_block;
use crate::error::{Error, Result};
use crate::image_metrics::rmse;
use crate::io::{load_entries, Corpus, ImageBundle, LoadRequest};

#[derive(Debug, Clone, PartialEq)]
struct Best {
    training_id: String,
    value: f64,
}

fn better(candidate: &Best, current: &Option<Best>) -> bool {
    match current {
        None => true,
        Some(c) => candidate
            .value
            .total_cmp(&c.value)
            .then_with(|| candidate.training_id.cmp(&c.training_id))
            .is_lt(),
    }
}

fn fold_block(best: &mut [Option<Best>], synthetic: &[ImageBundle], block: &[ImageBundle]) -> Result<()> {
    let found: Vec<Result<Option<Best>>> = synthetic
        .par_iter()
        .map(|s| {
            let sv = s.volume.as_ref().ok_or_else(|| Error::Input {
                id: s.id.clone(),
                reason: "preselection needs a volume".into(),
            })?;
            let mut local: Option<Best> = None;
            for t in block {
                let tv = t.volume.as_ref().ok_or_else(|| Error::Input {
                    id: t.id.clone(),
                    reason: "preselection needs a volume".into(),
                })?;
                let cand = Best {
                    training_id: t.id.clone(),
                    value: rmse(sv, tv)?,
                };
                if better(&cand, &local) {
                    local = Some(cand);
                }
            }
            Ok(local)
        })
        .collect();
    for (slot, f) in best.iter_mut().zip(found) {
        if let Some(cand) = f? {
            if better(&cand, slot) {
                *slot = Some(cand);
            }
        }
    }
    Ok(())
}

/// `(synthetic_id, training_id)` per synthetic image, in input order.
pub fn preselect_in_memory(
    training: &[ImageBundle],
    synthetic: &[ImageBundle],
) -> Result<Vec<(String, String)>> {
    if training.is_empty() {
        return Err(Error::Corpus("training corpus is empty".into()));
    }
    let mut best = vec![None; synthetic.len()];
    fold_block(&mut best, synthetic, training)?;
    Ok(synthetic
        .iter()
        .zip(best)
        .map(|(s, b)| (s.id.clone(), b.expect("training is non-empty").training_id))
        .collect())
}

pub fn preselect_pairs(
    training: &Corpus,
    synthetic: &Corpus,
    memory_budget_mb: usize,
) -> Result<Vec<(String, String)>> {
    if training.is_empty() {
        return Err(Error::Corpus("training corpus is empty".into()));
    }
    let req = LoadRequest::default();
    let synthetic = load_entries(&synthetic.entries, &req)?;
    let mut best = vec![None; synthetic.len()];
    for_each_training_block(training, &req, memory_budget_mb, |block| {
        fold_block(&mut best, &synthetic, block)
    })?;
    Ok(synthetic
        .iter()
        .zip(best)
        .map(|(s, b)| (s.id.clone(), b.expect("training is non-empty").training_id))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Volume3D;

    fn bundle(id: &str, v: &[f64]) -> ImageBundle {
        ImageBundle::from_volume(Volume3D::new(id, [v.len(), 1, 1], [1.0; 3], v.to_vec()).unwrap())
    }

    #[test]
    fn exact_copy_wins() {
        let training = vec![bundle("t1", &[0.0, 0.0]), bundle("t3", &[1.0, 2.0]), bundle("t2", &[5.0, 5.0])];
        let synthetic = vec![bundle("s", &[1.0, 2.0])];
        assert_eq!(
            preselect_in_memory(&training, &synthetic).unwrap(),
            vec![("s".to_string(), "t3".to_string())]
        );
    }

    #[test]
    fn argmin_matches_scalar_oracle() {
        let training = vec![bundle("a", &[3.0]), bundle("b", &[1.5]), bundle("c", &[-0.2])];
        let synthetic = vec![bundle("s1", &[0.0]), bundle("s2", &[2.0]), bundle("s3", &[2.9])];
        let got = preselect_in_memory(&training, &synthetic).unwrap();
        // |0-(-0.2)|=0.2, |2-1.5|=0.5, |2.9-3|=0.1
        let want = [("s1", "c"), ("s2", "b"), ("s3", "a")];
        for ((s, t), (ws, wt)) in got.iter().zip(want) {
            assert_eq!((s.as_str(), t.as_str()), (ws, wt));
        }
    }

    #[test]
    fn ties_pick_smaller_id() {
        let training = vec![bundle("tz", &[1.0]), bundle("ta", &[-1.0])];
        let synthetic = vec![bundle("s", &[0.0])];
        assert_eq!(preselect_in_memory(&training, &synthetic).unwrap()[0].1, "ta");
    }

    #[test]
    fn tie_across_blocks_picks_smaller_id() {
        let mut best = vec![None];
        let synthetic = vec![bundle("s", &[0.0])];
        fold_block(&mut best, &synthetic, &[bundle("tz", &[1.0])]).unwrap();
        fold_block(&mut best, &synthetic, &[bundle("ta", &[-1.0])]).unwrap();
        assert_eq!(best[0].as_ref().unwrap().training_id, "ta");
    }
}
