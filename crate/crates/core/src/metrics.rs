//! Performance and fairness metrics.
//!
//! Group metrics compare the privileged group (`a = 1`) with the protected
//! group (`a = 0`) using plain frequencies. Conditionals that are undefined
//! on the given data return [`Error::NotApplicable`] instead of a silent zero.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{knn_indices, nearest_rank};

/// Default neighbourhood size of the consistency metric.
pub const CON_K: usize = 5;
/// Default quantile of the Lipschitz metric.
pub const LIP_QUANTILE: f64 = 0.99;
/// Above this many rows the report estimates LIP from sampled pairs.
pub const LIP_EXACT_MAX_ROWS: usize = 20_000;
/// Pairs drawn when LIP is sampled.
pub const LIP_SAMPLED_PAIRS: usize = 5_000_000;

fn check_len(name: &str, n: usize, other: usize) -> Result<()> {
    if n == other {
        Ok(())
    } else {
        Err(Error::Shape(format!("{name} has length {other}, expected {n}")))
    }
}

fn ratio(num: usize, den: usize, what: &str) -> Result<f64> {
    if den == 0 {
        Err(Error::NotApplicable(what.to_string()))
    } else {
        Ok(num as f64 / den as f64)
    }
}

/// Confusion counts of one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn of_group(y: &[u8], yhat: &[u8], a: &[u8], group: u8) -> Self {
        let mut c = Confusion::default();
        for ((&t, &p), &g) in y.iter().zip(yhat).zip(a) {
            if g != group {
                continue;
            }
            match (t, p) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (0, _) => c.fp += 1,
                _ => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> Result<f64> {
        ratio(self.tp + self.tn, self.total(), "empty group")
    }

    pub fn tpr(&self) -> Result<f64> {
        ratio(self.tp, self.tp + self.fn_, "no positive labels in group")
    }

    pub fn tnr(&self) -> Result<f64> {
        ratio(self.tn, self.tn + self.fp, "no negative labels in group")
    }

    pub fn fpr(&self) -> Result<f64> {
        ratio(self.fp, self.tn + self.fp, "no negative labels in group")
    }

    pub fn fnr(&self) -> Result<f64> {
        ratio(self.fn_, self.tp + self.fn_, "no positive labels in group")
    }

    /// `P(y = 1 | yhat = 1)` within the group.
    pub fn precision(&self) -> Result<f64> {
        ratio(self.tp, self.tp + self.fp, "no predicted positives in group")
    }
}

fn group_counts(y: &[u8], yhat: &[u8], a: &[u8]) -> Result<[Confusion; 2]> {
    check_len("predictions", y.len(), yhat.len())?;
    check_len("sensitive attribute", y.len(), a.len())?;
    let c = [Confusion::of_group(y, yhat, a, 0), Confusion::of_group(y, yhat, a, 1)];
    for (g, conf) in c.iter().enumerate() {
        if conf.total() == 0 {
            return Err(Error::GroupSupport(format!("group a={g} is empty")));
        }
    }
    Ok(c)
}

fn with_group(r: Result<f64>, g: usize) -> Result<f64> {
    r.map_err(|e| match e {
        Error::NotApplicable(m) => Error::NotApplicable(format!("{m} (a={g})")),
        other => other,
    })
}

pub fn accuracy(y: &[u8], yhat: &[u8]) -> Result<f64> {
    check_len("predictions", y.len(), yhat.len())?;
    let hits = y.iter().zip(yhat).filter(|(t, p)| t == p).count();
    ratio(hits, y.len(), "no observations")
}

/// Mean of the two per-group accuracies.
pub fn balanced_accuracy(y: &[u8], yhat: &[u8], a: &[u8]) -> Result<f64> {
    let [c0, c1] = group_counts(y, yhat, a)?;
    Ok(0.5 * (c0.accuracy()? + c1.accuracy()?))
}

/// `|P(yhat=1 | a=1) - P(yhat=1 | a=0)|`.
pub fn independence(yhat: &[u8], a: &[u8]) -> Result<f64> {
    check_len("sensitive attribute", yhat.len(), a.len())?;
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for (&p, &g) in yhat.iter().zip(a) {
        let g = usize::from(g);
        tot[g] += 1;
        pos[g] += usize::from(p);
    }
    for (g, &t) in tot.iter().enumerate() {
        if t == 0 {
            return Err(Error::GroupSupport(format!("group a={g} is empty")));
        }
    }
    Ok((pos[1] as f64 / tot[1] as f64 - pos[0] as f64 / tot[0] as f64).abs())
}

/// `0.5 |(FPR_1 - FPR_0) + (FNR_1 - FNR_0)|`.
pub fn separation(y: &[u8], yhat: &[u8], a: &[u8]) -> Result<f64> {
    let c = group_counts(y, yhat, a)?;
    let mut fpr = [0.0; 2];
    let mut fnr = [0.0; 2];
    for g in 0..2 {
        fpr[g] = with_group(c[g].fpr(), g)?;
        fnr[g] = with_group(c[g].fnr(), g)?;
    }
    Ok(0.5 * ((fpr[1] - fpr[0]) + (fnr[1] - fnr[0])).abs())
}

/// `|P(y=1 | yhat=1, a=1) - P(y=1 | yhat=1, a=0)|`.
pub fn sufficiency(y: &[u8], yhat: &[u8], a: &[u8]) -> Result<f64> {
    let c = group_counts(y, yhat, a)?;
    let p0 = with_group(c[0].precision(), 0)?;
    let p1 = with_group(c[1].precision(), 1)?;
    Ok((p1 - p0).abs())
}

/// Mean absolute gap between each score and the mean score of its `k`
/// nearest other rows.
pub fn consistency(scores: &[f64], x: &DMatrix<f64>, k: usize) -> Result<f64> {
    check_len("scores", x.nrows(), scores.len())?;
    let nn = knn_indices(x, k)?;
    let total: f64 = nn
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let mean = nb.iter().map(|&j| scores[j]).sum::<f64>() / nb.len() as f64;
            (scores[i] - mean).abs()
        })
        .sum();
    Ok(total / scores.len() as f64)
}

fn pair_quotient(scores: &[f64], rows: &[f64], d: usize, i: usize, j: usize) -> Option<f64> {
    let dist = rows[i * d..(i + 1) * d]
        .iter()
        .zip(&rows[j * d..(j + 1) * d])
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    (dist > 0.0).then(|| (scores[i] - scores[j]).abs() / dist)
}

fn quantile_of(mut values: Vec<f64>, q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::NotApplicable("all points share the same features".into()));
    }
    let rank = nearest_rank(q, values.len());
    let (_, kth, _) = values.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*kth)
}

fn check_lip_args(scores: &[f64], x: &DMatrix<f64>, q: f64) -> Result<()> {
    check_len("scores", x.nrows(), scores.len())?;
    if x.nrows() < 2 {
        return Err(Error::Parameter("LIP needs at least two rows".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Parameter(format!("quantile must lie in (0, 1], got {q}")));
    }
    Ok(())
}

/// Nearest-rank `q`-quantile of `|f(x_i) - f(x_j)| / ||x_i - x_j||` over all
/// pairs with distinct features.
pub fn lipschitz(scores: &[f64], x: &DMatrix<f64>, q: f64) -> Result<f64> {
    check_lip_args(scores, x, q)?;
    let (n, d) = x.shape();
    let rows = x.transpose().as_slice().to_vec();
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            (i + 1..n).filter_map(move |j| pair_quotient(scores, rows, d, i, j))
        })
        .collect();
    quantile_of(values, q)
}

/// [`lipschitz`] estimated from `n_pairs` uniformly drawn pairs.
pub fn lipschitz_sampled(scores: &[f64], x: &DMatrix<f64>, q: f64, n_pairs: usize, seed: u64) -> Result<f64> {
    check_lip_args(scores, x, q)?;
    let (n, d) = x.shape();
    let rows = x.transpose().as_slice().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n - 1);
        let j = if j >= i { j + 1 } else { j };
        if let Some(v) = pair_quotient(scores, &rows, d, i, j) {
            values.push(v);
        }
    }
    quantile_of(values, q)
}

/// Generalized entropy index with `alpha = 2` and its decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyDecomposition {
    pub ent: f64,
    pub within: f64,
    pub between: f64,
}

fn ge2(benefits: impl Iterator<Item = f64>, mu: f64, n: usize) -> f64 {
    benefits.map(|b| (b / mu).powi(2) - 1.0).sum::<f64>() / (2.0 * n as f64)
}

/// Entropy of the benefits `b_i = 1(y_i = yhat_i)`, split into the parts
/// within and between the sensitive groups.
pub fn generalized_entropy(y: &[u8], yhat: &[u8], a: &[u8]) -> Result<EntropyDecomposition> {
    check_len("predictions", y.len(), yhat.len())?;
    check_len("sensitive attribute", y.len(), a.len())?;
    let n = y.len();
    let b: Vec<f64> = y.iter().zip(yhat).map(|(t, p)| f64::from(u8::from(t == p))).collect();
    let mu = b.iter().sum::<f64>() / n as f64;
    if n == 0 || mu == 0.0 {
        return Err(Error::NotApplicable("no correct predictions".into()));
    }
    let ent = ge2(b.iter().copied(), mu, n);

    let mut groups: Vec<u8> = a.to_vec();
    groups.sort_unstable();
    groups.dedup();
    let mut within = 0.0;
    let mut group_mean = [0.0; 256];
    for &g in &groups {
        let bg: Vec<f64> = b.iter().zip(a).filter(|(_, &ag)| ag == g).map(|(v, _)| *v).collect();
        let ng = bg.len();
        let mu_g = bg.iter().sum::<f64>() / ng as f64;
        group_mean[usize::from(g)] = mu_g;
        if mu_g > 0.0 {
            within += (ng as f64 / n as f64) * (mu_g / mu).powi(2) * ge2(bg.into_iter(), mu_g, ng);
        }
    }
    let between = ge2(a.iter().map(|&g| group_mean[usize::from(g)]), mu, n);
    Ok(EntropyDecomposition { ent, within, between })
}

/// All metrics for one set of scored rows.
///
/// Metrics that are undefined on the data are `None`, with the reason in
/// `na_reasons`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub n: usize,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub ind: f64,
    pub sep: Option<f64>,
    pub suf: Option<f64>,
    pub con: f64,
    pub lip: Option<f64>,
    pub ent: Option<f64>,
    pub ent_within: Option<f64>,
    pub ent_between: Option<f64>,
    pub tpr_0: Option<f64>,
    pub tpr_1: Option<f64>,
    pub tnr_0: Option<f64>,
    pub tnr_1: Option<f64>,
    pub fpr_0: Option<f64>,
    pub fpr_1: Option<f64>,
    pub fnr_0: Option<f64>,
    pub fnr_1: Option<f64>,
    pub na_reasons: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub threshold: f64,
    pub con_k: usize,
    pub lip_quantile: f64,
    pub lip_seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            con_k: CON_K,
            lip_quantile: LIP_QUANTILE,
            lip_seed: 0,
        }
    }
}

impl FairnessReport {
    /// Evaluates scores against labels `y`, sensitive values `a` and the
    /// covariates `x` of the same rows.
    pub fn compute(y: &[u8], scores: &[f64], a: &[u8], x: &DMatrix<f64>, opts: &ReportOptions) -> Result<Self> {
        let yhat = crate::model::classify(scores, opts.threshold);
        let c = group_counts(y, &yhat, a)?;
        let mut reasons = Vec::new();
        let mut opt = |name: &str, r: Result<f64>| -> Result<Option<f64>> {
            match r {
                Ok(v) => Ok(Some(v)),
                Err(Error::NotApplicable(m)) => {
                    reasons.push(format!("{name}: {m}"));
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        };
        let sep = opt("sep", separation(y, &yhat, a))?;
        let suf = opt("suf", sufficiency(y, &yhat, a))?;
        let lip = if x.nrows() <= LIP_EXACT_MAX_ROWS {
            lipschitz(scores, x, opts.lip_quantile)
        } else {
            lipschitz_sampled(scores, x, opts.lip_quantile, LIP_SAMPLED_PAIRS, opts.lip_seed)
        };
        let lip = opt("lip", lip)?;
        let (ent, ent_within, ent_between) = match generalized_entropy(y, &yhat, a) {
            Ok(e) => (Some(e.ent), Some(e.within), Some(e.between)),
            Err(Error::NotApplicable(m)) => {
                reasons.push(format!("ent: {m}"));
                (None, None, None)
            }
            Err(e) => return Err(e),
        };
        let rate = |r: Result<f64>| r.ok();
        Ok(Self {
            n: y.len(),
            accuracy: accuracy(y, &yhat)?,
            balanced_accuracy: balanced_accuracy(y, &yhat, a)?,
            ind: independence(&yhat, a)?,
            sep,
            suf,
            con: consistency(scores, x, opts.con_k)?,
            lip,
            ent,
            ent_within,
            ent_between,
            tpr_0: rate(c[0].tpr()),
            tpr_1: rate(c[1].tpr()),
            tnr_0: rate(c[0].tnr()),
            tnr_1: rate(c[1].tnr()),
            fpr_0: rate(c[0].fpr()),
            fpr_1: rate(c[1].fpr()),
            fnr_0: rate(c[0].fnr()),
            fnr_1: rate(c[1].fnr()),
            na_reasons: reasons.join("; "),
        })
    }

    /// Value of a metric by its short name (`acc`, `bacc`, `ind`, `sep`,
    /// `suf`, `con`, `lip`, `ent`).
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "acc" | "accuracy" => Some(self.accuracy),
            "bacc" | "balanced_accuracy" => Some(self.balanced_accuracy),
            "ind" => Some(self.ind),
            "sep" => self.sep,
            "suf" => self.suf,
            "con" => Some(self.con),
            "lip" => self.lip,
            "ent" => self.ent,
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn balanced_accuracy_examples() {
        let a = [1, 1, 0, 0];
        assert_eq!(balanced_accuracy(&[1, 0, 1, 0], &[1, 0, 1, 0], &a).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[1, 0, 1, 0], &[1, 0, 0, 1], &a).unwrap(), 0.5);
        assert_eq!(balanced_accuracy(&[1, 0, 1, 0], &[1, 0, 0, 0], &a).unwrap(), 0.75);
        assert!(matches!(
            balanced_accuracy(&[1, 0], &[1, 0], &[1, 1]),
            Err(Error::GroupSupport(_))
        ));
    }

    #[test]
    fn independence_examples() {
        assert_eq!(independence(&[1, 0, 1, 0], &[1, 1, 0, 0]).unwrap(), 0.0);
        assert_eq!(independence(&[1, 1, 0, 0], &[1, 1, 0, 0]).unwrap(), 1.0);
        let v = independence(&[1, 1, 0, 1, 0, 0], &[1, 1, 1, 0, 0, 0]).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert!(independence(&[1, 0], &[0, 0]).is_err());
    }

    #[test]
    fn separation_examples() {
        let a = [1, 1, 0, 0];
        assert_eq!(separation(&[1, 0, 1, 0], &[1, 0, 1, 0], &a).unwrap(), 0.0);
        assert_eq!(separation(&[1, 0, 1, 0], &[1, 0, 0, 0], &a).unwrap(), 0.5);
        assert_eq!(separation(&[1, 0, 1, 0], &[0, 1, 0, 1], &a).unwrap(), 0.0);
        assert!(matches!(
            separation(&[1, 1, 1, 0], &[1, 1, 1, 0], &a),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn sufficiency_examples() {
        let a = [1, 1, 0, 0];
        assert_eq!(sufficiency(&[1, 0, 1, 0], &[1, 0, 1, 0], &a).unwrap(), 0.0);
        assert_eq!(sufficiency(&[1, 0, 0, 0], &[1, 0, 1, 0], &a).unwrap(), 1.0);
        // group 1: 3 predicted positives, 2 correct; group 0: 2 and 1.
        let y = [1, 1, 0, 1, 0];
        let yhat = [1, 1, 1, 1, 1];
        let a = [1, 1, 1, 0, 0];
        assert!((sufficiency(&y, &yhat, &a).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!(matches!(
            sufficiency(&[1, 0, 1, 0], &[1, 0, 0, 0], &[1, 1, 0, 0]),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn consistency_examples() {
        assert_eq!(consistency(&[0.3; 4], &col(&[0.0, 1.0, 2.0, 3.0]), 2).unwrap(), 0.0);
        assert_eq!(consistency(&[0.0, 1.0], &col(&[0.0, 1.0]), 1).unwrap(), 1.0);
        let v = consistency(&[0.0, 0.5, 1.0], &col(&[0.0, 1.0, 2.0]), 2).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert!(consistency(&[0.0, 1.0], &col(&[0.0, 1.0]), 2).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz(&[0.2; 3], &col(&[0.0, 1.0, 5.0]), 0.99).unwrap(), 0.0);
        assert_eq!(lipschitz(&[0.0, 1.0], &col(&[0.0, 1.0]), 0.99).unwrap(), 1.0);
        assert_eq!(lipschitz(&[0.0, 1.0], &col(&[0.0, 2.0]), 0.99).unwrap(), 0.5);
        assert!(matches!(
            lipschitz(&[0.0, 1.0], &col(&[1.0, 1.0]), 0.99),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn sampled_lipschitz_tracks_exact() {
        let x = DMatrix::from_fn(60, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 + 0.1 * i as f64);
        let s: Vec<f64> = (0..60).map(|i| ((i * 13) % 17) as f64 / 17.0).collect();
        let exact = lipschitz(&s, &x, 0.5).unwrap();
        let est = lipschitz_sampled(&s, &x, 0.5, 200_000, 3).unwrap();
        assert!((exact - est).abs() / exact < 0.05, "{exact} {est}");
    }

    #[test]
    fn entropy_examples() {
        let e = generalized_entropy(&[1, 0, 1], &[1, 0, 1], &[0, 1, 1]).unwrap();
        assert_eq!((e.ent, e.within, e.between), (0.0, 0.0, 0.0));
        let e = generalized_entropy(&[1, 1], &[1, 0], &[0, 1]).unwrap();
        assert!((e.ent - 0.5).abs() < 1e-15);
        let e = generalized_entropy(&[1, 1, 1, 1], &[1, 0, 1, 0], &[0, 0, 1, 1]).unwrap();
        assert!(e.between.abs() < 1e-15);
        assert!((e.within - e.ent).abs() < 1e-15);
        assert!(matches!(
            generalized_entropy(&[1, 0], &[0, 1], &[0, 1]),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn report_marks_undefined_metrics() {
        let x = col(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [1, 0, 1, 0, 1, 1];
        let a = [1, 1, 1, 0, 0, 0];
        let scores = [0.9, 0.1, 0.8, 0.2, 0.3, 0.4];
        let r = FairnessReport::compute(&y, &scores, &a, &x, &ReportOptions {
            con_k: 2,
            ..ReportOptions::default()
        })
        .unwrap();
        assert_eq!(r.suf, None);
        assert!(r.na_reasons.contains("suf"));
        assert!(r.sep.is_some());
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.as_object().unwrap().values().all(|v| !v.is_object()));
    }
}
