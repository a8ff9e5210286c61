//! Stratified k-fold cross-validation.
//!
//! Each fold trains on the other folds, choosing its checkpoint on a small
//! stratified validation split carved from them, and is scored on the
//! held-out fold. Scaling is refitted per fold on that fold's training part.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use super::{auc_trapezoid, confusion, mean_std, render_mean_std, roc_points, ConfusionMatrix, RocPoint};
use crate::data::records::group_by_class;
use crate::data::{stratified_split, Class, Preprocessor, RawSample, SplitRatios};
use crate::error::{invalid, Result};
use crate::model::{init_params, ModelConfig, ModelParams};
use crate::rng;
use crate::trainer::{predict, train, EpochRecord, Prediction, TrainConfig};

/// `k` disjoint folds of indices into `labels`, each ascending. Every class
/// is shuffled and dealt round-robin, the dealing position carrying over
/// from one class to the next so that fold sizes differ by at most one.
pub fn stratified_kfold<R: Rng + ?Sized>(labels: &[Class], k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    let groups = group_by_class(labels);
    for (c, g) in groups.iter().enumerate() {
        if g.len() < k {
            return Err(invalid(format!(
                "class {} has {} subjects, fewer than {k} folds",
                Class::from_index(c).expect("two classes"),
                g.len()
            )));
        }
    }
    let mut folds: Vec<Vec<usize>> = alloc::vec![Vec::new(); k];
    let mut next = 0;
    for g in groups {
        let mut members = g;
        members.shuffle(rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub folds: usize,
    /// Hold out a stratified test split before forming folds.
    pub holdout_test: bool,
    pub test_ratio: f64,
    /// Fraction of each fold's training subjects used for checkpoint
    /// selection.
    pub inner_val_ratio: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: 7,
            holdout_test: false,
            test_ratio: 0.15,
            inner_val_ratio: 0.15,
        }
    }
}

/// Which dataset indices each fold holds out, plus the reserved test set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvPlan {
    pub folds: Vec<Vec<usize>>,
    pub test: Vec<usize>,
}

impl CvPlan {
    /// Indices used for training fold `fold` (everything in the other folds).
    pub fn training(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

pub fn cv_plan(labels: &[Class], opts: &CvOptions, seed: u64) -> Result<CvPlan> {
    let mut pool: Vec<usize> = (0..labels.len()).collect();
    let mut test = Vec::new();
    if opts.holdout_test {
        let ratios = SplitRatios {
            train: 1.0 - opts.test_ratio,
            val: 0.0,
            test: opts.test_ratio,
        };
        let split = stratified_split(labels, ratios, &mut rng::derive(seed, &[u64::MAX]))?;
        pool = split.train;
        test = split.test;
    }
    let pool_labels: Vec<Class> = pool.iter().map(|&i| labels[i]).collect();
    let folds = stratified_kfold(&pool_labels, opts.folds, &mut rng::derive(seed, &[u64::MAX - 1]))?
        .into_iter()
        .map(|f| f.into_iter().map(|i| pool[i]).collect())
        .collect();
    Ok(CvPlan { folds, test })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold: usize,
    pub accuracy: f64,
    pub auc: f64,
    pub confusion: ConfusionMatrix,
    pub roc: Vec<RocPoint>,
    pub predictions: Vec<Prediction>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Selected parameters and the scaling fitted on this fold's training
    /// part, enough to reuse the fold's model.
    pub params: ModelParams,
    pub preprocessor: Preprocessor,
}

/// Trains and scores one fold. Its randomness (inner split, initialisation,
/// shuffling, dropout) comes only from `(seed, fold)`.
pub fn run_fold(
    data: &[RawSample],
    plan: &CvPlan,
    fold: usize,
    model: &ModelConfig,
    train_cfg: &TrainConfig,
    opts: &CvOptions,
    seed: u64,
) -> Result<FoldReport> {
    let held_out = plan
        .folds
        .get(fold)
        .ok_or_else(|| invalid(format!("fold {fold} out of range")))?;
    let training = plan.training(fold);
    let mut fold_rng = rng::derive(seed, &[fold as u64]);

    let labels: Vec<Class> = training.iter().map(|&i| data[i].label).collect();
    let inner = stratified_split(
        &labels,
        SplitRatios {
            train: 1.0 - opts.inner_val_ratio,
            val: opts.inner_val_ratio,
            test: 0.0,
        },
        &mut fold_rng,
    )?;
    let pick = |idx: &[usize]| -> Vec<RawSample> { idx.iter().map(|&i| data[training[i]].clone()).collect() };
    let fit_set = pick(&inner.train);
    let val_set = pick(&inner.val);
    let prep = Preprocessor::fit(&fit_set)?;
    let train_samples = prep.apply_all(&fit_set);
    let val_samples = prep.apply_all(&val_set);
    let test_raw: Vec<RawSample> = held_out.iter().map(|&i| data[i].clone()).collect();
    let test_samples = prep.apply_all(&test_raw);

    let init = init_params(model, fold_rng.next_u64())?;
    let cfg = TrainConfig {
        seed: fold_rng.next_u64(),
        ..train_cfg.clone()
    };
    let outcome = train(model, &init, &train_samples, &val_samples, &cfg)?;
    let predictions = predict(&outcome.params, model, &test_samples)?;
    let mut report = score_predictions(fold, predictions, outcome.params, prep)?;
    report.history = outcome.history;
    report.best_epoch = outcome.best_epoch;
    Ok(report)
}

/// Confusion, ROC and AUC for one set of predictions.
pub fn score_predictions(
    fold: usize,
    predictions: Vec<Prediction>,
    params: ModelParams,
    preprocessor: Preprocessor,
) -> Result<FoldReport> {
    let predicted: Vec<Class> = predictions.iter().map(|p| p.predicted).collect();
    let truth: Vec<Class> = predictions.iter().map(|p| p.label).collect();
    let scores: Vec<f64> = predictions.iter().map(|p| p.prob_ad).collect();
    let cm = confusion(&predicted, &truth)?;
    let roc = roc_points(&scores, &truth)?;
    Ok(FoldReport {
        fold,
        accuracy: cm.accuracy(),
        auc: auc_trapezoid(&roc),
        confusion: cm,
        roc,
        predictions,
        history: Vec::new(),
        best_epoch: 0,
        params,
        preprocessor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvSummary {
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub auc_mean: f64,
    pub auc_std: f64,
}

impl CvSummary {
    pub fn from_folds(folds: &[FoldReport]) -> Result<Self> {
        let acc: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
        let auc: Vec<f64> = folds.iter().map(|f| f.auc).collect();
        let (accuracy_mean, accuracy_std) = mean_std(&acc)?;
        let (auc_mean, auc_std) = mean_std(&auc)?;
        Ok(Self {
            accuracy_mean,
            accuracy_std,
            auc_mean,
            auc_std,
        })
    }

    /// Accuracy in percent, `"xx.xx ± yy.yy"`.
    pub fn accuracy_text(&self) -> alloc::string::String {
        render_mean_std(100.0 * self.accuracy_mean, 100.0 * self.accuracy_std)
    }

    /// AUC in percent, `"xx.xx ± yy.yy"`.
    pub fn auc_text(&self) -> alloc::string::String {
        render_mean_std(100.0 * self.auc_mean, 100.0 * self.auc_std)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub plan: CvPlan,
    pub folds: Vec<FoldReport>,
    pub summary: CvSummary,
}

/// Runs every fold in order. The std companion runs [`run_fold`] in
/// parallel instead; results are identical.
pub fn cv_run(
    data: &[RawSample],
    model: &ModelConfig,
    train_cfg: &TrainConfig,
    opts: &CvOptions,
    seed: u64,
) -> Result<CvReport> {
    let labels: Vec<Class> = data.iter().map(|s| s.label).collect();
    let plan = cv_plan(&labels, opts, seed)?;
    let folds = (0..opts.folds)
        .map(|f| run_fold(data, &plan, f, model, train_cfg, opts, seed))
        .collect::<Result<Vec<_>>>()?;
    let summary = CvSummary::from_folds(&folds)?;
    Ok(CvReport { plan, folds, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(cn: usize, ad: usize) -> Vec<Class> {
        let mut l = alloc::vec![Class::Cn; cn];
        l.extend(core::iter::repeat_n(Class::Ad, ad));
        l
    }

    #[test]
    fn fourteen_subjects_seven_folds() {
        let l = labels(7, 7);
        let folds = stratified_kfold(&l, 7, &mut rng::seeded(3)).unwrap();
        assert_eq!(folds.len(), 7);
        for f in &folds {
            assert_eq!(f.len(), 2);
            assert_eq!(f.iter().filter(|&&i| l[i] == Class::Ad).count(), 1);
        }
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..14).collect::<Vec<_>>());
        assert!(stratified_kfold(&l, 1, &mut rng::seeded(3)).is_err());
        assert!(stratified_kfold(&labels(3, 10), 4, &mut rng::seeded(3)).is_err());
    }

    #[test]
    fn odd_class_sizes_stay_balanced() {
        let l = labels(9, 12);
        let folds = stratified_kfold(&l, 4, &mut rng::seeded(1)).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn plan_with_holdout_is_disjoint() {
        let l = labels(20, 20);
        let opts = CvOptions {
            folds: 5,
            holdout_test: true,
            ..CvOptions::default()
        };
        let plan = cv_plan(&l, &opts, 4).unwrap();
        assert_eq!(plan.test.len(), 6);
        let mut all: Vec<usize> = plan.folds.concat();
        all.extend(&plan.test);
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        assert_eq!(plan.training(0).len() + plan.folds[0].len() + 6, 40);
    }
}
