use crate::disc::LiftedDisc;
use crate::error::{Error, Result};

/// The scheduled sequence `g_1, g_2, ...` drawn from a finite catalog.
///
/// Block `t = 1, 2, ...` lists the first `min(t, m)` catalog entries, so the
/// sequence starts `a | a b | a b c | a b c | ...` and every entry recurs.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscSchedule {
    pub catalog: Vec<LiftedDisc>,
    /// `indices[j - 1] = i(j)`: the catalog entry used as `g_j`.
    pub indices: Vec<usize>,
}

impl DiscSchedule {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `g_j` for `j >= 1`.
    pub fn disc(&self, j: usize) -> &LiftedDisc {
        &self.catalog[self.indices[j - 1]]
    }

    /// The stages `j` with `g_j = f_i` (the subsequence `n_j` for entry `i`).
    pub fn occurrences(&self, i: usize) -> Vec<usize> {
        self.indices.iter().enumerate().filter(|(_, &k)| k == i).map(|(j, _)| j + 1).collect()
    }
}

/// Catalog index of `g_j` under the block rule.
pub fn schedule_index(j: usize, catalog_len: usize) -> usize {
    assert!(j >= 1 && catalog_len >= 1);
    let mut rest = j - 1;
    let mut t = 1;
    loop {
        let block = t.min(catalog_len);
        if rest < block {
            return rest;
        }
        rest -= block;
        t += 1;
    }
}

pub fn schedule_discs(catalog: &[LiftedDisc], horizon: usize) -> Result<DiscSchedule> {
    if catalog.is_empty() {
        return Err(Error::InvalidParameter("disc catalog is empty".into()));
    }
    if let Some(i) = catalog.iter().position(|d| d.is_constant()) {
        return Err(Error::InvalidParameter(format!("catalog disc {i} is constant")));
    }
    Ok(DiscSchedule {
        catalog: catalog.to_vec(),
        indices: (1..=horizon).map(|j| schedule_index(j, catalog.len())).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn catalog(m: usize) -> Vec<LiftedDisc> {
        (1..=m).map(|k| LiftedDisc::monomial(1.0, Complex64::new(1.0, 0.0), k)).collect()
    }

    #[test]
    fn block_rule() {
        let s = schedule_discs(&catalog(1), 5).unwrap();
        assert_eq!(s.indices, vec![0; 5]);
        let s = schedule_discs(&catalog(2), 6).unwrap();
        assert_eq!(s.indices, vec![0, 0, 1, 0, 1, 0]);
        let s = schedule_discs(&catalog(3), 100).unwrap();
        for i in 0..3 {
            assert!(s.occurrences(i).len() >= 10);
        }
    }

    #[test]
    fn every_entry_recurs_within_linear_window() {
        // after the warm-up blocks each entry appears once every m indices
        for m in 1..=5 {
            for j in 1..=1000 {
                let i = schedule_index(j, m);
                let next = (j + 1..).find(|&l| schedule_index(l, m) == i).unwrap();
                assert!(next - j <= m.max(2) + m);
            }
        }
    }

    #[test]
    fn rejects_constant_entries() {
        let c = LiftedDisc::constant(Complex64::new(0.0, 0.0), 1.0, [Complex64::new(0.0, 0.0); 2], 1).unwrap();
        assert!(schedule_discs(&[c], 3).is_err());
        assert!(schedule_discs(&[], 3).is_err());
    }
}
