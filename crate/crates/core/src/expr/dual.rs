/// Scalar type the evaluator is generic over.
///
/// Every operation is expressed through `chain` / `chain2`, which take the
/// primal result and the partial derivatives of the operation with respect
/// to its operands. Plain `f64` ignores the partials.
pub trait Scalar: Sized + Clone {
    fn from_f64(c: f64) -> Self;
    fn value(&self) -> f64;
    /// True when the scalar carries no derivative information.
    fn is_constant(&self) -> bool;
    fn chain(&self, value: f64, deriv: f64) -> Self;
    fn chain2(a: &Self, b: &Self, value: f64, da: f64, db: f64) -> Self;
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn chain(&self, value: f64, _deriv: f64) -> Self {
        value
    }
    fn chain2(_a: &Self, _b: &Self, value: f64, _da: f64, _db: f64) -> Self {
        value
    }
}

/// Forward-mode dual number with a vector of tangent directions.
///
/// An empty tangent stands for the zero vector, so constants and parameters
/// never allocate. Products `deriv * tangent[i]` with `tangent[i] == 0` are
/// taken to be zero even when `deriv` is infinite (e.g. `sqrt` at 0 along a
/// direction it does not depend on).
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub tangent: Vec<f64>,
}

#[inline]
fn scale(d: f64, t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        d * t
    }
}

impl Dual {
    pub fn constant(value: f64) -> Self {
        Dual { value, tangent: Vec::new() }
    }

    /// Seed variable `index` of `n` directions.
    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        let mut tangent = vec![0.0; n];
        tangent[index] = 1.0;
        Dual { value, tangent }
    }

    /// Tangent padded with zeros to `n` entries.
    pub fn gradient(&self, n: usize) -> Vec<f64> {
        let mut g = self.tangent.clone();
        g.resize(n, 0.0);
        g
    }
}

impl Scalar for Dual {
    fn from_f64(c: f64) -> Self {
        Dual::constant(c)
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn is_constant(&self) -> bool {
        self.tangent.iter().all(|&t| t == 0.0)
    }

    fn chain(&self, value: f64, deriv: f64) -> Self {
        Dual { value, tangent: self.tangent.iter().map(|&t| scale(deriv, t)).collect() }
    }

    fn chain2(a: &Self, b: &Self, value: f64, da: f64, db: f64) -> Self {
        let n = a.tangent.len().max(b.tangent.len());
        let tangent = (0..n)
            .map(|i| {
                let ta = a.tangent.get(i).copied().unwrap_or(0.0);
                let tb = b.tangent.get(i).copied().unwrap_or(0.0);
                scale(da, ta) + scale(db, tb)
            })
            .collect();
        Dual { value, tangent }
    }
}
