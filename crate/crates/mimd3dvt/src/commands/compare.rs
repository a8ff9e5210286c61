use std::path::PathBuf;

use clap::{Args, ValueEnum};
use mimd_core::metrics::{one_way_anova, t_test};

use crate::error::{usage, Result};
use crate::formats::read_json;
use crate::formats::reports::MetricsJson;

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestKind {
    /// Two-sample pooled-variance t-test.
    Ttest,
    /// One-way ANOVA across two or more runs.
    Anova,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// metrics.json files; each contributes its per-fold accuracies.
    #[arg(long, num_args = 2.., required = true)]
    pub metrics: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = TestKind::Ttest)]
    pub test: TestKind,
}

/// Statistic, degrees of freedom and p-value in a fixed layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub statistic: String,
    pub value: f64,
    pub df: Vec<f64>,
    pub p: f64,
}

impl Comparison {
    pub fn reject(&self) -> bool {
        self.p < ALPHA
    }

    pub fn render(&self) -> String {
        let df: Vec<String> = self.df.iter().map(|d| format!("{d}")).collect();
        let verdict = if self.reject() { "reject" } else { "fail to reject" };
        format!(
            "{} = {:.4}  df = {}  p = {:.6}\n{verdict} H0 at {ALPHA}\n",
            self.statistic,
            self.value,
            df.join(", "),
            self.p
        )
    }
}

pub fn compare(groups: &[Vec<f64>], test: TestKind) -> Result<Comparison> {
    match test {
        TestKind::Ttest => {
            if groups.len() != 2 {
                return Err(usage(format!("the t-test needs exactly two metrics files, got {}", groups.len())));
            }
            match t_test(&groups[0], &groups[1]) {
                Ok(r) => Ok(Comparison {
                    statistic: "t".into(),
                    value: r.t,
                    df: vec![r.df],
                    p: r.p,
                }),
                // both samples constant but with different means
                Err(mimd_core::Error::DegenerateVariance) => {
                    let diff = groups[0][0] - groups[1][0];
                    Ok(Comparison {
                        statistic: "t".into(),
                        value: f64::INFINITY.copysign(diff),
                        df: vec![(groups[0].len() + groups[1].len() - 2) as f64],
                        p: 0.0,
                    })
                }
                Err(e) => Err(usage(e.to_string())),
            }
        }
        TestKind::Anova => {
            let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
            let r = one_way_anova(&refs).map_err(|e| usage(e.to_string()))?;
            Ok(Comparison {
                statistic: "F".into(),
                value: r.f,
                df: vec![r.df_between, r.df_within],
                p: r.p,
            })
        }
    }
}

pub fn run(args: &CompareArgs) -> Result<String> {
    let mut groups = Vec::with_capacity(args.metrics.len());
    let mut text = String::new();
    for path in &args.metrics {
        let m: MetricsJson = read_json(path).map_err(|e| usage(e.to_string()))?;
        let acc = m.accuracies();
        if acc.iter().any(|a| !a.is_finite()) {
            return Err(usage(format!("{}: non-finite accuracy", path.display())));
        }
        let mean = acc.iter().sum::<f64>() / acc.len().max(1) as f64;
        text.push_str(&format!("{}: {} folds, mean accuracy {:.4}\n", path.display(), acc.len(), mean));
        groups.push(acc);
    }
    text.push_str(&compare(&groups, args.test)?.render());
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn separated_constant_groups_reject() {
        let c = compare(&[vec![1.0, 1.0, 1.0], vec![0.5, 0.5, 0.5]], TestKind::Ttest).unwrap();
        assert_eq!(c.value, f64::INFINITY);
        assert!(c.reject());
        assert!(c.render().contains("reject H0 at 0.05"));
    }

    #[test]
    fn identical_groups_do_not_reject() {
        let c = compare(&[vec![0.9, 0.8, 0.7], vec![0.9, 0.8, 0.7]], TestKind::Ttest).unwrap();
        assert!(!c.reject());
        assert!(c.render().contains("fail to reject H0 at 0.05"));
    }

    #[test]
    fn t_test_needs_two_groups() {
        let g = vec![vec![0.9, 0.8]; 3];
        assert!(matches!(compare(&g, TestKind::Ttest), Err(Error::Usage(_))));
        assert!(compare(&g, TestKind::Anova).is_ok());
    }
}
