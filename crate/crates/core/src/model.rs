//! Structural parameters and the pattern of coefficients fixed at zero.
//!
//! Coefficients are read row-wise: `psi[(i, j)]` (resp. `phi[(i, j)]`) is the
//! weight of variable `j` (resp. lagged variable `j`) in the equation of
//! variable `i`, so a nonzero entry is an edge `j -> i`. Stacked column index
//! `j < p` addresses the Ψ block and `p + j` the Φ block.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Block {
    Psi,
    Phi,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::Psi => write!(f, "Ψ"),
            Block::Phi => write!(f, "Φ"),
        }
    }
}

/// Frozen-zero pattern over the `p × 2p` stacked coefficient matrix `(Ψ, Φ)`.
///
/// Always frozen:
/// * `ψ_ii` (no self contemporaneous effect),
/// * `ψ_0j` (the risk equation has no contemporaneous drivers),
/// * `φ_i0` (the lagged risk parameter drives nothing), except `φ_00` when
///   `allow_pd_self_lag` is set.
///
/// Frozen unless `allow_pd_contemporaneous_out` is set: `ψ_i0` for `i >= 1`,
/// so the risk parameter has no outgoing edge at all.
///
/// Further entries may be frozen by the user; structural entries can only be
/// released through the two flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintMask {
    p: usize,
    user_frozen: Vec<bool>,
    allow_pd_self_lag: bool,
    allow_pd_contemporaneous_out: bool,
}

/// Builds the default mask for `p` variables.
pub fn default_mask(p: usize) -> Result<ConstraintMask> {
    if p < 2 {
        return Err(Error::InvalidConfig(format!("mask needs p >= 2, got {p}")));
    }
    Ok(ConstraintMask {
        p,
        user_frozen: vec![false; 2 * p * p],
        allow_pd_self_lag: false,
        allow_pd_contemporaneous_out: false,
    })
}

/// Returns `mask` with `φ_00` estimable iff `allow`.
pub fn set_pd_self_lag(mask: &ConstraintMask, allow: bool) -> ConstraintMask {
    let mut out = mask.clone();
    out.allow_pd_self_lag = allow;
    out.user_frozen[mask.p] = false;
    out
}

/// Returns `mask` with `ψ_i0` (`i >= 1`) estimable iff `allow`. With `allow`
/// the mask reduces to the three base conditions only.
pub fn set_pd_contemporaneous_out(mask: &ConstraintMask, allow: bool) -> ConstraintMask {
    let mut out = mask.clone();
    out.allow_pd_contemporaneous_out = allow;
    out
}

impl ConstraintMask {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn allow_pd_self_lag(&self) -> bool {
        self.allow_pd_self_lag
    }

    pub fn allow_pd_contemporaneous_out(&self) -> bool {
        self.allow_pd_contemporaneous_out
    }

    /// Whether the entry is fixed by the model structure (not by a user freeze).
    pub fn is_structural(&self, row: usize, col: usize) -> bool {
        let p = self.p;
        if col < p {
            row == col || row == 0 || (col == 0 && !self.allow_pd_contemporaneous_out)
        } else {
            col == p && !(row == 0 && self.allow_pd_self_lag)
        }
    }

    /// `col` indexes the stacked `(Ψ, Φ)` matrix, `0..2p`.
    pub fn is_frozen(&self, row: usize, col: usize) -> bool {
        assert!(row < self.p && col < 2 * self.p, "mask index out of range");
        self.is_structural(row, col) || self.user_frozen[row * 2 * self.p + col]
    }

    /// Freezes one additional stacked coordinate.
    pub fn freeze(&mut self, row: usize, col: usize) -> Result<()> {
        if row >= self.p || col >= 2 * self.p {
            return Err(Error::DimensionMismatch(format!(
                "entry ({row}, {col}) outside a {}x{} mask",
                self.p,
                2 * self.p
            )));
        }
        self.user_frozen[row * 2 * self.p + col] = true;
        Ok(())
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen_entries().len()
    }

    /// Frozen stacked coordinates in row-major order.
    pub fn frozen_entries(&self) -> Vec<(usize, usize)> {
        (0..self.p)
            .flat_map(|i| (0..2 * self.p).map(move |j| (i, j)))
            .filter(|&(i, j)| self.is_frozen(i, j))
            .collect()
    }

    /// Estimable stacked columns of one row, in sweep order.
    pub fn free_columns(&self, row: usize) -> Vec<usize> {
        (0..2 * self.p).filter(|&j| !self.is_frozen(row, j)).collect()
    }

    pub fn to_json(&self) -> MaskJson {
        MaskJson {
            p: self.p,
            frozen: self.frozen_entries().into_iter().map(|(i, j)| [i, j]).collect(),
            allow_pd_self_lag: self.allow_pd_self_lag,
            allow_pd_contemporaneous_out: self.allow_pd_contemporaneous_out,
        }
    }

    pub fn from_json(json: &MaskJson) -> Result<Self> {
        let mut mask = default_mask(json.p)?;
        mask = set_pd_self_lag(&mask, json.allow_pd_self_lag);
        mask = set_pd_contemporaneous_out(&mask, json.allow_pd_contemporaneous_out);
        for &[i, j] in &json.frozen {
            if i >= mask.p || j >= 2 * mask.p || !mask.is_structural(i, j) {
                mask.freeze(i, j)?;
            }
        }
        let listed: std::collections::HashSet<(usize, usize)> =
            json.frozen.iter().map(|&[i, j]| (i, j)).collect();
        for i in 0..mask.p {
            for j in 0..2 * mask.p {
                if mask.is_structural(i, j) && !listed.contains(&(i, j)) {
                    return Err(Error::InvalidConfig(format!(
                        "structural entry ({i}, {j}) cannot be unfrozen"
                    )));
                }
            }
        }
        Ok(mask)
    }
}

/// Serialized form of a [`ConstraintMask`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskJson {
    pub p: usize,
    pub frozen: Vec<[usize; 2]>,
    pub allow_pd_self_lag: bool,
    #[serde(default)]
    pub allow_pd_contemporaneous_out: bool,
}

/// Estimated `(Ψ, Φ, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub psi: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub intercept: DVector<f64>,
}

impl CoefficientSet {
    pub fn zeros(p: usize) -> Self {
        Self {
            psi: DMatrix::zeros(p, p),
            phi: DMatrix::zeros(p, p),
            intercept: DVector::zeros(p),
        }
    }

    pub fn p(&self) -> usize {
        self.psi.nrows()
    }

    /// Stacked accessor: `col < p` reads Ψ, otherwise Φ.
    pub fn theta(&self, row: usize, col: usize) -> f64 {
        let p = self.p();
        if col < p {
            self.psi[(row, col)]
        } else {
            self.phi[(row, col - p)]
        }
    }

    pub fn set_theta(&mut self, row: usize, col: usize, value: f64) {
        let p = self.p();
        if col < p {
            self.psi[(row, col)] = value;
        } else {
            self.phi[(row, col - p)] = value;
        }
    }

    pub fn check_dims(&self) -> Result<()> {
        let p = self.p();
        if self.psi.ncols() != p
            || self.phi.nrows() != p
            || self.phi.ncols() != p
            || self.intercept.len() != p
        {
            return Err(Error::DimensionMismatch(format!(
                "inconsistent coefficient shapes: psi {}x{}, phi {}x{}, intercept {}",
                self.psi.nrows(),
                self.psi.ncols(),
                self.phi.nrows(),
                self.phi.ncols(),
                self.intercept.len()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.psi
            .iter()
            .chain(self.phi.iter())
            .chain(self.intercept.iter())
            .all(|v| v.is_finite())
    }

    pub fn nonzero_count(&self) -> usize {
        self.psi.iter().chain(self.phi.iter()).filter(|v| **v != 0.0).count()
    }

    pub fn l1_norm(&self) -> f64 {
        self.psi.iter().chain(self.phi.iter()).map(|v| v.abs()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub block: Block,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {}) = {:e}", self.block, self.row, self.col, self.value)
    }
}

/// Lists every frozen entry that is not exactly `+0.0`.
pub fn check_coefficients(coeffs: &CoefficientSet, mask: &ConstraintMask) -> Result<Vec<Violation>> {
    coeffs.check_dims()?;
    let p = mask.p();
    if coeffs.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "coefficients for p = {} checked against mask for p = {}",
            coeffs.p(),
            p
        )));
    }
    let mut out = Vec::new();
    for i in 0..p {
        for j in 0..2 * p {
            let v = coeffs.theta(i, j);
            if mask.is_frozen(i, j) && v.to_bits() != 0 {
                let (block, col) = if j < p { (Block::Psi, j) } else { (Block::Phi, j - p) };
                out.push(Violation {
                    block,
                    row: i,
                    col,
                    value: v,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_eq_mask(p: usize) -> ConstraintMask {
        set_pd_contemporaneous_out(&default_mask(p).unwrap(), true)
    }

    #[test]
    fn base_conditions_count() {
        for p in 2..20 {
            assert_eq!(base_eq_mask(p).frozen_count(), 3 * p - 1, "p = {p}");
            let relaxed = set_pd_self_lag(&base_eq_mask(p), true);
            assert_eq!(relaxed.frozen_count(), 3 * p - 2);
        }
        assert_eq!(base_eq_mask(14).frozen_count(), 41);
    }

    #[test]
    fn default_count_includes_risk_outflow() {
        for p in 2..20 {
            assert_eq!(default_mask(p).unwrap().frozen_count(), 4 * p - 2, "p = {p}");
        }
    }

    #[test]
    fn p2_enumeration() {
        let m = base_eq_mask(2);
        assert_eq!(m.frozen_entries(), vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)]);
        // with p = 2 the outflow freeze adds ψ_10
        let d = default_mask(2).unwrap();
        assert_eq!(
            d.frozen_entries(),
            vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]
        );
    }

    #[test]
    fn rejects_small_p() {
        assert!(default_mask(1).is_err());
        assert!(default_mask(0).is_err());
    }

    #[test]
    fn macro_self_lags_free() {
        let m = default_mask(5).unwrap();
        for j in 1..5 {
            assert!(!m.is_frozen(j, 5 + j));
        }
    }

    #[test]
    fn pd_self_lag_toggle() {
        let m = default_mask(3).unwrap();
        let on = set_pd_self_lag(&m, true);
        assert!(!on.is_frozen(0, 3));
        assert!(on.is_frozen(1, 3) && on.is_frozen(2, 3));
        assert_eq!(set_pd_self_lag(&m, false), m);
        assert_eq!(set_pd_self_lag(&on, false), m);
    }

    #[test]
    fn user_freeze_and_json_round_trip() {
        let mut m = set_pd_self_lag(&default_mask(4).unwrap(), true);
        m.freeze(2, 6).unwrap();
        assert!(m.is_frozen(2, 6));
        let back = ConstraintMask::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let text = serde_json::to_string(&m.to_json()).unwrap();
        let parsed: MaskJson = serde_json::from_str(&text).unwrap();
        assert_eq!(ConstraintMask::from_json(&parsed).unwrap(), m);
    }

    #[test]
    fn json_cannot_unfreeze_structural() {
        let mut json = default_mask(3).unwrap().to_json();
        json.frozen.retain(|e| *e != [1, 1]);
        assert!(ConstraintMask::from_json(&json).is_err());
    }

    #[test]
    fn check_examples() {
        let m = default_mask(3).unwrap();
        let mut c = CoefficientSet::zeros(3);
        assert!(check_coefficients(&c, &m).unwrap().is_empty());
        c.psi[(0, 1)] = 0.3;
        let v = check_coefficients(&c, &m).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].block, v[0].row, v[0].col), (Block::Psi, 0, 1));
        let mut c = CoefficientSet::zeros(3);
        c.phi[(2, 0)] = 1e-300;
        assert_eq!(check_coefficients(&c, &m).unwrap().len(), 1);
        assert!(check_coefficients(&CoefficientSet::zeros(4), &m).is_err());
    }
}
