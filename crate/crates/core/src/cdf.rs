use crate::error::{Error, Result};

/// Empirical CDF: the samples sorted ascending, the k-th (1-based) paired
/// with probability k/n. Ties are kept as separate steps.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empirical CDF of an empty sample".into()));
    }
    if let Some(x) = samples.iter().find(|x| x.is_nan()) {
        return Err(Error::InvalidArgument(format!("sample contains {x}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect())
}

/// Smallest sample whose CDF value reaches `q`.
pub fn quantile(cdf: &[(f64, f64)], q: f64) -> Option<f64> {
    cdf.iter().find(|(_, p)| *p >= q).map(|(x, _)| *x)
}
