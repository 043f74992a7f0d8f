use alloc::string::String;
use alloc::vec::Vec;

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::Result;

/// Agreement between tape gradients and central differences for one
/// parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub name: String,
    pub entries: usize,
    pub max_abs_error: f64,
    /// `max |analytic - numeric|` over the block divided by the largest
    /// gradient magnitude in the block (either route).
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub blocks: Vec<BlockError>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.max_rel_error < self.tolerance)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BlockError> {
        self.blocks
            .iter()
            .filter(move |b| b.max_rel_error >= self.tolerance)
    }
}

/// Gradients below this magnitude count as zero when normalizing errors.
const GRAD_FLOOR: f64 = 1e-12;

/// Compares the tape gradient of `loss` with central finite differences
/// `(f(p + h_i) - f(p - h_i)) / 2h_i`, where `h_i = step·max(1, |p_i|)`.
pub fn grad_check<F>(
    store: &ParamStore,
    loss: F,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let out = loss(&mut tape, store)?;
    let analytic = tape.backward(out)?;

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let v = loss(&mut t, s)?;
        Ok(t.value(v).item())
    };

    let mut probe = store.clone();
    let mut blocks = Vec::with_capacity(store.len());
    for (id, param) in store.iter() {
        let n = param.value.len();
        let mut numeric = Vec::with_capacity(n);
        for i in 0..n {
            let original = param.value.data()[i];
            let h = step * original.abs().max(1.0);
            probe.get_mut(id).data_mut()[i] = original + h;
            let plus = eval(&probe)?;
            probe.get_mut(id).data_mut()[i] = original - h;
            let minus = eval(&probe)?;
            probe.get_mut(id).data_mut()[i] = original;
            numeric.push((plus - minus) / (2.0 * h));
        }
        let analytic_block: Vec<f64> = match analytic.get(id) {
            Some(g) => g.data().to_vec(),
            None => alloc::vec![0.0; n],
        };
        let mut max_abs = 0.0f64;
        let mut scale = 0.0f64;
        for (a, num) in analytic_block.iter().zip(&numeric) {
            max_abs = max_abs.max((a - num).abs());
            scale = scale.max(a.abs()).max(num.abs());
        }
        let max_rel = if scale < GRAD_FLOOR {
            if max_abs < GRAD_FLOOR {
                0.0
            } else {
                max_abs / GRAD_FLOOR
            }
        } else {
            max_abs / scale
        };
        blocks.push(BlockError {
            name: param.name.clone(),
            entries: n,
            max_abs_error: max_abs,
            max_rel_error: max_rel,
        });
    }
    Ok(GradCheckReport {
        step,
        tolerance,
        blocks,
    })
}
