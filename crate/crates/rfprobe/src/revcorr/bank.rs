//! Selection of the excitatory/suppressive sub-filter bank from an AWC
//! spectrum, with the AWA filter leading the excitatory side.

use super::{AwaFilter, AwcDecomposition, AwcForm};
use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// Role of a bank filter in the LN cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterRole {
    /// The AWA filter (identity nonlinearity).
    Awa,
    /// An AWC eigenvector on the excitatory side (full-wave rectified).
    Excitatory,
    /// An AWC eigenvector on the suppressive side (full-wave rectified).
    Suppressive,
}

/// One enumerated bank filter.
#[derive(Debug, Clone)]
pub struct BankFilter {
    pub values: ImageTensor,
    pub role: FilterRole,
    /// Eigenvalue for AWC filters; none for the AWA slot.
    pub eigenvalue: Option<f64>,
    /// Whether the eigenvalue sits above the spectral mean (AWC filters;
    /// filters kept on the "wrong" side of the mean stay flagged).
    pub above_mean: Option<bool>,
}

/// The AWA filter plus the selected AWC eigenvector filters.
///
/// Excitatory eigenvectors are ordered by descending eigenvalue,
/// suppressive ones by ascending eigenvalue (most suppressive first). The
/// AWA filter counts as the leading excitatory filter of the cascade.
#[derive(Debug, Clone)]
pub struct SubFilterBank {
    pub awa: AwaFilter,
    pub excitatory: Vec<(ImageTensor, f64)>,
    pub suppressive: Vec<(ImageTensor, f64)>,
    pub mean_eigenvalue: f64,
    pub form: AwcForm,
}

impl SubFilterBank {
    pub fn crop(&self) -> (usize, usize, usize) {
        self.awa.values.shape()
    }

    /// Enumerates the cascade filters in model order:
    /// AWA, excitatory eigenvectors, suppressive eigenvectors.
    pub fn filters(&self) -> Vec<BankFilter> {
        let mut out = Vec::with_capacity(1 + self.excitatory.len() + self.suppressive.len());
        out.push(BankFilter {
            values: self.awa.values.clone(),
            role: FilterRole::Awa,
            eigenvalue: None,
            above_mean: None,
        });
        for (values, lambda) in &self.excitatory {
            out.push(BankFilter {
                values: values.clone(),
                role: FilterRole::Excitatory,
                eigenvalue: Some(*lambda),
                above_mean: Some(*lambda > self.mean_eigenvalue),
            });
        }
        for (values, lambda) in &self.suppressive {
            out.push(BankFilter {
                values: values.clone(),
                role: FilterRole::Suppressive,
                eigenvalue: Some(*lambda),
                above_mean: Some(*lambda > self.mean_eigenvalue),
            });
        }
        out
    }
}

/// Picks the `n_exc` largest-eigenvalue and `n_sup` smallest-eigenvalue
/// eigenvectors from the spectrum and attaches the AWA filter as the
/// leading excitatory filter.
pub fn select_subfilters(
    awa: AwaFilter,
    dec: &AwcDecomposition,
    n_exc: usize,
    n_sup: usize,
    form: AwcForm,
) -> Result<SubFilterBank> {
    let n = dec.eigenvalues.len();
    if n_exc + n_sup > n {
        return Err(Error::Config(format!(
            "cannot select {n_exc}+{n_sup} sub-filters from a {n}-dimensional spectrum"
        )));
    }
    let (h, w, c) = awa.values.shape();
    if h * w * c != n {
        return Err(Error::Shape(format!(
            "AWA crop {h}x{w}x{c} does not match spectrum dimension {n}"
        )));
    }
    let reshape = |v: &[f64]| ImageTensor::new(h, w, c, v.to_vec());

    let mut excitatory = Vec::with_capacity(n_exc);
    for i in 0..n_exc {
        excitatory.push((reshape(&dec.eigenvectors[i])?, dec.eigenvalues[i]));
    }
    let mut suppressive = Vec::with_capacity(n_sup);
    for i in 0..n_sup {
        let idx = n - 1 - i;
        suppressive.push((reshape(&dec.eigenvectors[idx])?, dec.eigenvalues[idx]));
    }
    Ok(SubFilterBank {
        awa,
        excitatory,
        suppressive,
        mean_eigenvalue: dec.mean_eigenvalue,
        form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::revcorr::{eig_sym, SymMatrix};

    fn awa_of_dim(n: usize) -> AwaFilter {
        AwaFilter { values: ImageTensor::zeros(1, n, 1), samples: 10 }
    }

    fn diag_spectrum(values: &[f64]) -> AwcDecomposition {
        let n = values.len();
        let mut m = SymMatrix::zeros(n);
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, *v);
        }
        eig_sym(&m).unwrap()
    }

    #[test]
    fn selection_partitions_a_full_spectrum() {
        let dec = diag_spectrum(&(0..19).map(|i| i as f64).collect::<Vec<_>>());
        let bank = select_subfilters(awa_of_dim(19), &dec, 9, 10, AwcForm::AsWritten).unwrap();
        assert_eq!(bank.excitatory.len(), 9);
        assert_eq!(bank.suppressive.len(), 10);
        let exc_min = bank.excitatory.iter().map(|(_, l)| *l).fold(f64::MAX, f64::min);
        let sup_max = bank.suppressive.iter().map(|(_, l)| *l).fold(f64::MIN, f64::max);
        assert!(exc_min >= sup_max);
        // 9 + 10 = 19 covers everything
        assert_eq!(bank.filters().len(), 20);
    }

    #[test]
    fn descending_pick_takes_leading_indices() {
        let dec = diag_spectrum(&[5.0, 4.0, 3.0, 2.0, 1.0]);
        let bank = select_subfilters(awa_of_dim(5), &dec, 2, 2, AwcForm::AsWritten).unwrap();
        assert_eq!(bank.excitatory[0].1, 5.0);
        assert_eq!(bank.excitatory[1].1, 4.0);
        // suppressive ascending: smallest first
        assert_eq!(bank.suppressive[0].1, 1.0);
        assert_eq!(bank.suppressive[1].1, 2.0);
    }

    #[test]
    fn oversized_request_is_a_config_error() {
        let dec = diag_spectrum(&[3.0, 1.0]);
        assert!(select_subfilters(awa_of_dim(2), &dec, 9, 10, AwcForm::AsWritten).is_err());
    }

    #[test]
    fn flags_record_the_mean_split() {
        let dec = diag_spectrum(&[10.0, 1.0, 1.0, 0.0]);
        // mean = 3.0
        let bank = select_subfilters(awa_of_dim(4), &dec, 2, 2, AwcForm::AsWritten).unwrap();
        let filters = bank.filters();
        assert_eq!(filters[1].above_mean, Some(true)); // λ = 10
        assert_eq!(filters[2].above_mean, Some(false)); // λ = 1, kept but flagged
        assert_eq!(filters[3].above_mean, Some(false));
        assert_eq!(filters[0].above_mean, None); // AWA
    }
}
