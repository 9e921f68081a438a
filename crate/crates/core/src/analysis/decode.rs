//! Linear decoding of latents from hidden states, with orthant-held-out
//! cross-validation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::cholesky_solve;

/// Ridge penalty of the decoder fit.
pub const RIDGE_LAMBDA: f64 = 1e-6;
/// Minimum training samples per decoder weight row (`10 (N + 1)`).
pub const MIN_SAMPLES_PER_FEATURE: usize = 10;
pub const DEFAULT_REPEATS: usize = 5;
pub const N_GROUPS: usize = 4;

/// `sum_i [x_i > 0] 2^i`; zero counts as positive.
pub fn quadrant_index(x: &[f64]) -> usize {
    x.iter()
        .enumerate()
        .map(|(i, &v)| if v >= 0.0 { 1 << i } else { 0 })
        .sum()
}

/// Orthant indices grouped by index mod 4.
pub fn fold_groups(d: usize) -> Vec<Vec<usize>> {
    let n = 1usize << d;
    (0..N_GROUPS)
        .map(|g| (0..n).filter(|i| i % N_GROUPS == g).collect())
        .collect()
}

pub fn group_of(x: &[f64]) -> usize {
    quadrant_index(x) % N_GROUPS
}

/// `latents ~ states W + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDecoder {
    /// `N x D`
    pub weights: Array2<f64>,
    pub intercept: Array1<f64>,
}

impl LinearDecoder {
    pub fn predict(&self, states: ArrayView2<f64>) -> Array2<f64> {
        states.dot(&self.weights) + &self.intercept
    }
}

/// Ridge least squares on the rows selected by `train_mask`.
pub fn fit_decoder(states: ArrayView2<f64>, latents: ArrayView2<f64>, train_mask: &[bool]) -> Result<LinearDecoder> {
    let (m, n) = states.dim();
    if latents.nrows() != m || train_mask.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: latents.nrows().min(train_mask.len()),
        });
    }
    let rows: Vec<usize> = (0..m).filter(|&i| train_mask[i]).collect();
    if rows.len() < MIN_SAMPLES_PER_FEATURE * (n + 1) {
        return Err(invalid(format!(
            "decoder needs at least {} training samples, got {}",
            MIN_SAMPLES_PER_FEATURE * (n + 1),
            rows.len()
        )));
    }
    let x = states.select(Axis(0), &rows);
    let y = latents.select(Axis(0), &rows);
    let x_mean = x.mean_axis(Axis(0)).expect("nonempty");
    let y_mean = y.mean_axis(Axis(0)).expect("nonempty");
    let xc = &x - &x_mean;
    let yc = &y - &y_mean;
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let spread = xc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(spread > 1e-12 * scale) {
        return Err(Error::Degenerate("training states are all identical".into()));
    }
    let mut gram = xc.t().dot(&xc);
    for i in 0..n {
        gram[[i, i]] += RIDGE_LAMBDA;
    }
    let rhs = xc.t().dot(&yc);
    let weights =
        cholesky_solve(gram.view(), rhs.view()).ok_or_else(|| Error::Degenerate("normal equations not positive definite".into()))?;
    let intercept = &y_mean - &x_mean.dot(&weights);
    Ok(LinearDecoder { weights, intercept })
}

/// `1 - SSE / (n sum_d var_ref_d)`, pooled over latent dimensions.
pub fn r2_against(pred: ArrayView2<f64>, truth: ArrayView2<f64>, var_ref: &[f64]) -> f64 {
    let n = truth.nrows() as f64;
    let sse: f64 = pred.iter().zip(truth.iter()).map(|(p, t)| (p - t) * (p - t)).sum();
    let sst: f64 = var_ref.iter().sum::<f64>() * n;
    1.0 - sse / sst
}

/// Per-dimension population variance of the columns of `x`.
pub fn column_variance(x: ArrayView2<f64>) -> Vec<f64> {
    x.var_axis(Axis(0), 0.0).to_vec()
}

/// `r^2` against the test split's own variance.
pub fn r2_score(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> f64 {
    r2_against(pred, truth, &column_variance(truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

/// Linear-interpolated percentile (`q` in [0, 100]) of unsorted values.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn percentiles(values: &[f64]) -> Percentiles {
    Percentiles {
        p25: percentile(values, 25.0),
        p50: percentile(values, 50.0),
        p75: percentile(values, 75.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub repeat: usize,
    /// Held-out orthant group.
    pub group: usize,
    pub ood_r2: f64,
    pub id_r2: f64,
    /// The same two scores normalized by the held-out split's own variance.
    pub ood_r2_split: f64,
    pub id_r2_split: f64,
    pub n_test: usize,
}

/// Held-out-orthant decoding results. `r^2` values are normalized by the
/// latent variance of the whole sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub folds: Vec<Fold>,
    pub ood: Percentiles,
    pub id: Percentiles,
}

impl DecodeReport {
    pub fn from_folds(folds: Vec<Fold>) -> Self {
        let ood: Vec<f64> = folds.iter().map(|f| f.ood_r2).collect();
        let id: Vec<f64> = folds.iter().map(|f| f.id_r2).collect();
        Self {
            ood: percentiles(&ood),
            id: percentiles(&id),
            folds,
        }
    }

    pub fn ood_values(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.ood_r2).collect()
    }

    pub fn id_values(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.id_r2).collect()
    }

    /// OOD values of folds whose held-out group is in `groups`.
    pub fn ood_values_in(&self, groups: &[usize]) -> Vec<f64> {
        self.folds
            .iter()
            .filter(|f| groups.contains(&f.group))
            .map(|f| f.ood_r2)
            .collect()
    }

    /// Merges reports of several networks into one fold distribution.
    pub fn merge(reports: &[DecodeReport]) -> Self {
        Self::from_folds(reports.iter().flat_map(|r| r.folds.iter().cloned()).collect())
    }
}

/// Folds for one sample of `(state, latent)` pairs. Samples alternate
/// between a fitting half (even rows) and a testing half (odd rows). For
/// group `g` the OOD decoder is fit on fitting rows outside `g`, the ID
/// decoder on all fitting rows; both are scored on testing rows in `g`.
pub fn decode_folds(states: ArrayView2<f64>, latents: ArrayView2<f64>, repeat: usize) -> Result<Vec<Fold>> {
    let m = states.nrows();
    let d = latents.ncols();
    let groups: Vec<usize> = latents
        .rows()
        .into_iter()
        .map(|r| group_of(r.as_slice().expect("contiguous row")))
        .collect();
    let var_ref = column_variance(latents);
    let fit_all: Vec<bool> = (0..m).map(|i| i % 2 == 0).collect();
    let id_decoder = fit_decoder(states, latents, &fit_all)?;
    let n_groups = if d == 1 { 2 } else { N_GROUPS };
    let mut folds = Vec::with_capacity(n_groups);
    for g in 0..n_groups {
        let test: Vec<usize> = (0..m).filter(|&i| i % 2 == 1 && groups[i] == g).collect();
        if test.is_empty() {
            return Err(invalid(format!("orthant group {g} has no test samples")));
        }
        let fit_out: Vec<bool> = (0..m).map(|i| i % 2 == 0 && groups[i] != g).collect();
        let ood_decoder = fit_decoder(states, latents, &fit_out)?;
        let xs = states.select(Axis(0), &test);
        let ys = latents.select(Axis(0), &test);
        let ood_pred = ood_decoder.predict(xs.view());
        let id_pred = id_decoder.predict(xs.view());
        folds.push(Fold {
            repeat,
            group: g,
            ood_r2: r2_against(ood_pred.view(), ys.view(), &var_ref),
            id_r2: r2_against(id_pred.view(), ys.view(), &var_ref),
            ood_r2_split: r2_score(ood_pred.view(), ys.view()),
            id_r2_split: r2_score(id_pred.view(), ys.view()),
            n_test: test.len(),
        });
    }
    Ok(folds)
}

/// Runs [`decode_folds`] on `repeats` fresh samples from `sample`.
pub fn crossval_ood<F>(mut sample: F, repeats: usize) -> Result<DecodeReport>
where
    F: FnMut(usize) -> Result<(Array2<f64>, Array2<f64>)>,
{
    if repeats == 0 {
        return Err(invalid("crossval needs at least one repeat"));
    }
    let mut folds = Vec::new();
    for rep in 0..repeats {
        let (states, latents) = sample(rep)?;
        folds.extend(decode_folds(states.view(), latents.view(), rep)?);
    }
    Ok(DecodeReport::from_folds(folds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use crate::tasks::sample_latents;
    use rand::Rng as _;

    #[test]
    fn quadrant_indexing() {
        assert_eq!(quadrant_index(&[0.1, 0.1]), 3);
        assert_eq!(quadrant_index(&[-0.1, 0.1]), 2);
        assert_eq!(quadrant_index(&[0.1, -0.1]), 1);
        assert_eq!(quadrant_index(&[-0.1, -0.1]), 0);
        assert_eq!(quadrant_index(&[0.0, -0.1]), 1);
        assert!(fold_groups(2).iter().all(|g| g.len() == 1));
        assert_eq!(fold_groups(3), vec![vec![0, 4], vec![1, 5], vec![2, 6], vec![3, 7]]);
        assert!(fold_groups(4).iter().all(|g| g.len() == 4));
    }

    #[test]
    fn identity_states_decode_perfectly() {
        let x = sample_latents(&mut seed::rng(1), 2, 0.0, 400).unwrap();
        let dec = fit_decoder(x.view(), x.view(), &vec![true; 400]).unwrap();
        assert!((r2_score(dec.predict(x.view()).view(), x.view()) - 1.0).abs() < 1e-9);
        let report = crossval_ood(|_| Ok((x.clone(), x.clone())), 2).unwrap();
        assert_eq!(report.folds.len(), 8);
        assert!(report.folds.iter().all(|f| (f.ood_r2 - 1.0).abs() < 1e-9));
    }

    #[test]
    fn noise_states_do_not_generalize() {
        let x = sample_latents(&mut seed::rng(1), 2, 0.0, 2000).unwrap();
        let mut rng = seed::rng(2);
        let s = Array2::from_shape_fn((2000, 8), |_| rng.random::<f64>());
        let folds = decode_folds(s.view(), x.view(), 0).unwrap();
        assert!(folds.iter().all(|f| f.ood_r2 <= 0.0), "{folds:?}");
    }

    #[test]
    fn degenerate_and_small_designs() {
        let x = sample_latents(&mut seed::rng(1), 2, 0.0, 100).unwrap();
        let flat = Array2::from_elem((100, 3), 0.4);
        assert!(matches!(fit_decoder(flat.view(), x.view(), &vec![true; 100]), Err(Error::Degenerate(_))));
        let small = Array2::from_elem((10, 3), 0.4);
        assert!(fit_decoder(small.view(), x.slice(ndarray::s![..10, ..]), &vec![true; 10]).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 25.0), 2.0);
        assert_eq!(percentile(&[1.0, 2.0], 50.0), 1.5);
    }
}
