use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

/// Agreement between two raters' binary decisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub p_o: f64,
    pub p_e: f64,
    pub kappa: f64,
    pub n: usize,
}

fn check(a: &[Label], b: &[Label]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("decision vector"));
    }
    Ok(())
}

/// Fraction of positions where the two raters decided alike.
pub fn observed_agreement(a: &[Label], b: &[Label]) -> Result<f64> {
    check(a, b)?;
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.len() as f64)
}

/// Chance agreement from the raters' marginal frequencies of the two labels.
pub fn expected_agreement(a: &[Label], b: &[Label]) -> Result<f64> {
    check(a, b)?;
    let n = a.len() as f64;
    let count = |v: &[Label], l: Label| v.iter().filter(|&&x| x == l).count() as f64;
    Ok([Label::Pos, Label::Neg]
        .iter()
        .map(|&l| count(a, l) * count(b, l))
        .sum::<f64>()
        / (n * n))
}

fn kappa_from(p_o: f64, p_e: f64) -> f64 {
    if p_e >= 1.0 {
        // Both raters used a single, identical class.
        if p_o >= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (p_o - p_e) / (1.0 - p_e)
    }
}

/// Cohen's kappa, `(p_o - p_e) / (1 - p_e)`; 1 when `p_e = 1` and the
/// raters agree everywhere, 0 when `p_e = 1` otherwise.
pub fn cohen_kappa(a: &[Label], b: &[Label]) -> Result<f64> {
    Ok(agreement(a, b)?.kappa)
}

pub fn agreement(a: &[Label], b: &[Label]) -> Result<AgreementReport> {
    let p_o = observed_agreement(a, b)?;
    let p_e = expected_agreement(a, b)?;
    Ok(AgreementReport {
        p_o,
        p_e,
        kappa: kappa_from(p_o, p_e),
        n: a.len(),
    })
}

/// Sign of the vote sum; `None` on an even split.
pub fn majority_label(votes: &[Label]) -> Option<Label> {
    let sum: i64 = votes.iter().map(|l| i64::from(l.as_i8())).sum();
    Label::from_sign(sum.signum())
}

/// Turns one rater's direct ratings into comparative decisions on the
/// requested pairs; equal ratings give `None`.
pub fn ratings_to_pairwise(ratings: &HashMap<String, f64>, pairs: &[(String, String)]) -> Result<Vec<Option<Label>>> {
    pairs
        .iter()
        .map(|(i, j)| {
            let get = |id: &String| ratings.get(id).copied().ok_or_else(|| Error::UnknownItem(id.clone()));
            Ok(Label::from_order(get(i)?, get(j)?))
        })
        .collect()
}
