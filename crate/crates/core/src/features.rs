//! Feature functions, uniform bin discretization, indicator cumulants, and
//! the rotation-entanglement ablation.

use serde::{Deserialize, Serialize};

use crate::env::StateId;
use crate::{Error, Result};

/// Absolute snap applied to `value * m` before flooring.
///
/// Grid-derived features sit exactly on bin boundaries (e.g. cell/N with
/// m = N) and IEEE rounding can land an epsilon below the boundary, which
/// would misclassify the value into the left bin and leave whole bins
/// unreachable. Values at least this far inside a bin are unaffected.
const BIN_SNAP: f64 = 1e-9;

/// Uniform discretization of [0,1) into `m` left-closed right-open bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinGrid {
    pub m: usize,
}

impl BinGrid {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "need at least one bin");
        Self { m }
    }

    /// Bin boundaries `j/m` for `j = 0..=m`.
    pub fn boundaries(&self) -> Vec<f64> {
        (0..=self.m).map(|j| j as f64 / self.m as f64).collect()
    }
}

/// 1-based bin index of a value in [0,1): `floor(value * m) + 1`, with
/// boundary values snapped into the right-hand bin.
pub fn bin_index(value: f64, m: usize) -> Result<usize> {
    if !(0.0..1.0).contains(&value) {
        return Err(Error::FeatureOutOfRange { value });
    }
    let raw = (value * m as f64 + BIN_SNAP).floor() as usize;
    Ok(raw.min(m - 1) + 1)
}

/// Snapped left-closed right-open interval membership, consistent with
/// `bin_index`: values within `BIN_SNAP/m`-scale rounding of a boundary are
/// treated as sitting on it.
pub fn in_interval(value: f64, lo: f64, hi: f64) -> bool {
    value >= lo - BIN_SNAP && value < hi - BIN_SNAP
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Disentangled,
    Entangled,
}

/// k feature functions over an enumerable state space, tabulated densely.
///
/// Every value lies in [0,1) for every state; constructors check this.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    state_count: usize,
    k: usize,
    kind: FeatureKind,
    values: Vec<f64>, // state-major, [state * k + feature]
}

impl FeatureMap {
    pub fn from_fn(
        state_count: usize,
        k: usize,
        kind: FeatureKind,
        f: impl Fn(StateId, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(state_count * k);
        for s in 0..state_count {
            for d in 0..k {
                let v = f(StateId(s), d);
                assert!(
                    (0.0..1.0).contains(&v),
                    "feature {d} of state {s} out of [0,1): {v}"
                );
                values.push(v);
            }
        }
        Self {
            state_count,
            k,
            kind,
            values,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    /// Feature vector of one state.
    pub fn eval(&self, state: StateId) -> &[f64] {
        &self.values[state.0 * self.k..(state.0 + 1) * self.k]
    }

    /// 1-based bin of every feature of every state; `[state * k + feature]`.
    pub fn bin_table(&self, grid: &BinGrid) -> Result<Vec<u16>> {
        let mut bins = Vec::with_capacity(self.values.len());
        for &v in &self.values {
            bins.push(bin_index(v, grid.m)? as u16);
        }
        Ok(bins)
    }
}

/// Indicator cumulant vector of one state: entry (i,j) is 1 iff feature i
/// falls in bin j. Exactly one active bin per feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CumulantVector {
    pub k: usize,
    pub m: usize,
    /// 1-based active bin per feature.
    pub active_bins: Vec<usize>,
}

impl CumulantVector {
    /// Flattened 0/1 values of length `k * m`, indexed by `feature * m + (bin - 1)`.
    pub fn values(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.k * self.m];
        for (i, &b) in self.active_bins.iter().enumerate() {
            out[i * self.m + (b - 1)] = 1;
        }
        out
    }

    pub fn get(&self, feature: usize, bin: usize) -> u8 {
        u8::from(self.active_bins[feature] == bin)
    }
}

/// Cumulants of a state under a feature map and bin grid.
pub fn cumulants(
    state: StateId,
    features: &FeatureMap,
    grid: &BinGrid,
) -> Result<CumulantVector> {
    let active_bins = features
        .eval(state)
        .iter()
        .map(|&v| bin_index(v, grid.m))
        .collect::<Result<Vec<_>>>()?;
    Ok(CumulantVector {
        k: features.k(),
        m: grid.m,
        active_bins,
    })
}

/// One plane rotation of the feature space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneRotation {
    /// First feature index of the plane.
    pub i: usize,
    /// Second feature index of the plane.
    pub j: usize,
    pub angle_rad: f64,
}

/// Default maximally-mixing ablation: 45-degree rotations on consecutive
/// feature pairs (0,1), (2,3), ...
pub fn default_rotation(k: usize) -> Vec<PlaneRotation> {
    (0..k / 2)
        .map(|p| PlaneRotation {
            i: 2 * p,
            j: 2 * p + 1,
            angle_rad: std::f64::consts::FRAC_PI_4,
        })
        .collect()
}

/// Entangled variant of a feature map: rotate the centered features by the
/// given plane rotations, then map affinely back into [0,1).
///
/// The affine rescale uses `lo = min(0, min_g)` and `hi = max(1, max_g)` per
/// feature over the enumerated states, so a zero-angle rotation reproduces
/// the input features bit for bit.
pub fn entangle(features: &FeatureMap, rotations: &[PlaneRotation]) -> Result<FeatureMap> {
    let k = features.k();
    for r in rotations {
        if r.i >= k || r.j >= k || r.i == r.j {
            return Err(Error::InvalidRotationPlane {
                i: r.i,
                j: r.j,
                k,
            });
        }
    }
    let state_count = features.state_count();
    let mut rotated = vec![0.0f64; state_count * k];
    for s in 0..state_count {
        let row = &mut rotated[s * k..(s + 1) * k];
        for (d, &v) in features.eval(StateId(s)).iter().enumerate() {
            row[d] = v - 0.5;
        }
        for r in rotations {
            let (c, sn) = (r.angle_rad.cos(), r.angle_rad.sin());
            let (a, b) = (row[r.i], row[r.j]);
            row[r.i] = c * a - sn * b;
            row[r.j] = sn * a + c * b;
        }
        for v in row.iter_mut() {
            *v += 0.5;
        }
    }
    let mut lo = vec![0.0f64; k];
    let mut hi = vec![1.0f64; k];
    for s in 0..state_count {
        for d in 0..k {
            let v = rotated[s * k + d];
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    // inflate the span slightly whenever a value sits on the top edge so the
    // rescaled maximum stays strictly below 1
    for d in 0..k {
        if hi[d] > 1.0 || (hi[d] - lo[d]) <= 0.0 {
            hi[d] = lo[d] + (hi[d] - lo[d]).max(f64::MIN_POSITIVE) * (1.0 + 1e-9);
        }
    }
    Ok(FeatureMap::from_fn(
        state_count,
        k,
        FeatureKind::Entangled,
        |s, d| ((rotated[s.0 * k + d] - lo[d]) / (hi[d] - lo[d])).min(1.0 - 1e-12),
    ))
}
