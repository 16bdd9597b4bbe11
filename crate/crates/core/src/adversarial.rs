//! Basic Iterative Method perturbation distance.
//!
//! Walks a point up the cross-entropy gradient of its own predicted label
//! until the prediction flips, and reports how far it had to travel. Points
//! near the decision boundary flip after a short walk, so the l2 length of
//! the walk is a proxy for boundary distance.

use crate::error::{AlError, Result};
use crate::learner::LearnerSnapshot;
#[allow(unused_imports)] // trait needed by the no_std build only
use crate::math::F64Ext;
use crate::matrix::Matrix;
use alloc::format;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepNorm {
    /// Sign steps: every coordinate moves ±ε.
    LInf,
    /// Normalized-gradient steps of l2 length ε.
    L2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BimConfig {
    pub epsilon_step: f64,
    pub max_steps: usize,
    /// Step rule; the reported distance is l2 in both cases.
    pub norm: StepNorm,
}

impl Default for BimConfig {
    fn default() -> Self {
        BimConfig {
            epsilon_step: 0.05,
            max_steps: 50,
            norm: StepNorm::LInf,
        }
    }
}

impl BimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_step > 0.0) || !self.epsilon_step.is_finite() {
            return Err(AlError::Config(format!(
                "epsilon_step must be positive, got {}",
                self.epsilon_step
            )));
        }
        if self.max_steps == 0 {
            return Err(AlError::Config("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BimOutcome {
    /// ‖x_adv − x‖₂ on flip; +∞ sentinel when the label never changed.
    pub r_norm: f64,
    pub flipped: bool,
    pub steps: usize,
    /// The perturbed point at termination (flip point or last iterate).
    pub x_adv: Vec<f64>,
}

/// Iterate x ← x + ε·step(∂CE(x, ŷ₀)/∂x), where ŷ₀ is the prediction at
/// the start, stopping at the first prediction change or `max_steps`.
pub fn bim_distance(snap: &LearnerSnapshot, x: &[f64], cfg: &BimConfig) -> Result<BimOutcome> {
    cfg.validate()?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(AlError::Config("non-finite input point".into()));
    }
    let as_matrix = |v: &[f64]| Matrix::from_vec(1, v.len(), v.to_vec());
    let y0 = snap.predict(&as_matrix(x)?)?[0];
    let mut cur = x.to_vec();
    for step in 1..=cfg.max_steps {
        let g = snap.input_gradient(&cur, y0)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(AlError::Config("non-finite gradient during BIM walk".into()));
        }
        match cfg.norm {
            StepNorm::LInf => {
                for (c, gv) in cur.iter_mut().zip(g.iter()) {
                    *c += cfg.epsilon_step * gv.signum_or_zero();
                }
            }
            StepNorm::L2 => {
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for (c, gv) in cur.iter_mut().zip(g.iter()) {
                        *c += cfg.epsilon_step * gv / norm;
                    }
                }
            }
        }
        let pred = snap.predict(&as_matrix(&cur)?)?[0];
        if pred != y0 {
            let r: f64 = cur
                .iter()
                .zip(x.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            return Ok(BimOutcome {
                r_norm: r,
                flipped: true,
                steps: step,
                x_adv: cur,
            });
        }
    }
    Ok(BimOutcome {
        r_norm: f64::INFINITY,
        flipped: false,
        steps: cfg.max_steps,
        x_adv: cur,
    })
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    /// signum with sign(0) = 0 so a dead coordinate does not move.
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}
