use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::Operator;

/// Subsystem slot. The joint space is always ordered (motion, heating ion,
/// cooling ion) with motion as the slowest Kronecker digit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Motion,
    Heating,
    Cooling,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::Motion, Slot::Heating, Slot::Cooling];

    fn index(self) -> usize {
        match self {
            Slot::Motion => 0,
            Slot::Heating => 1,
            Slot::Cooling => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceLayout {
    pub fock_cutoff: usize,
    pub heating_levels: usize,
    pub cooling_levels: usize,
}

impl SpaceLayout {
    pub fn new(fock_cutoff: usize, heating_levels: usize) -> Result<Self> {
        if fock_cutoff < 2 {
            return Err(Error::InvalidDimension(format!(
                "Fock cutoff must be at least 2, got {fock_cutoff}"
            )));
        }
        if heating_levels != 2 && heating_levels != 4 {
            return Err(Error::InvalidDimension(format!(
                "heating ion must have 2 or 4 levels, got {heating_levels}"
            )));
        }
        Ok(SpaceLayout {
            fock_cutoff,
            heating_levels,
            cooling_levels: 2,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.fock_cutoff, self.heating_levels, self.cooling_levels]
    }

    pub fn slot_dim(&self, slot: Slot) -> usize {
        self.dims()[slot.index()]
    }

    /// Joint dimension N × dim_h × dim_c.
    pub fn dim(&self) -> usize {
        self.fock_cutoff * self.internal_dim()
    }

    /// Dimension of the two ions together.
    pub fn internal_dim(&self) -> usize {
        self.heating_levels * self.cooling_levels
    }

    pub fn index(&self, n: usize, h: usize, c: usize) -> usize {
        (n * self.heating_levels + h) * self.cooling_levels + c
    }

    /// Inverse of [`SpaceLayout::index`]: `(n, h, c)`.
    pub fn decompose(&self, idx: usize) -> (usize, usize, usize) {
        let c = idx % self.cooling_levels;
        let rest = idx / self.cooling_levels;
        (rest / self.heating_levels, rest % self.heating_levels, c)
    }
}

/// Embed an operator acting on one subsystem into the joint space.
pub fn embed(op: &Operator, slot: Slot, layout: &SpaceLayout) -> Result<Operator> {
    embed_product(&[(op, slot)], layout)
}

/// Kronecker product of per-slot factors, identity on the slots not listed.
/// Equivalent to multiplying the individual embeddings, at a fraction of the cost.
pub fn embed_product(factors: &[(&Operator, Slot)], layout: &SpaceLayout) -> Result<Operator> {
    let mut per_slot: [Option<Operator>; 3] = [None, None, None];
    for (op, slot) in factors {
        let want = layout.slot_dim(*slot);
        if op.dim() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                found: op.dim(),
            });
        }
        let entry = &mut per_slot[slot.index()];
        *entry = Some(match entry.take() {
            Some(prev) => prev.try_matmul(op)?,
            None => (*op).clone(),
        });
    }
    let mut out: Option<Operator> = None;
    for slot in Slot::ALL {
        let factor = per_slot[slot.index()]
            .take()
            .unwrap_or_else(|| Operator::identity(layout.slot_dim(slot)));
        out = Some(match out {
            None => factor,
            Some(acc) => acc.kron(&factor),
        });
    }
    Ok(out.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{destroy, spin_op, SpinKind};

    #[test]
    fn layout_rejects_bad_levels() {
        assert!(SpaceLayout::new(10, 3).is_err());
        assert!(SpaceLayout::new(1, 2).is_err());
        let l = SpaceLayout::new(10, 4).unwrap();
        assert_eq!(l.dim(), 80);
        let idx = l.index(3, 2, 1);
        assert_eq!(l.decompose(idx), (3, 2, 1));
    }

    #[test]
    fn embedding_identity_gives_identity() {
        let l = SpaceLayout::new(3, 2).unwrap();
        let e = embed(&Operator::identity(2), Slot::Heating, &l).unwrap();
        assert_eq!(e, Operator::identity(12));
    }

    #[test]
    fn different_slots_commute() {
        let l = SpaceLayout::new(4, 2).unwrap();
        let a = embed(&destroy(4).unwrap(), Slot::Motion, &l).unwrap();
        let sm = embed(&spin_op(SpinKind::Minus, 2, (0, 1)).unwrap(), Slot::Heating, &l).unwrap();
        assert!(a.commutator(&sm).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let l = SpaceLayout::new(4, 2).unwrap();
        let r = embed(&destroy(5).unwrap(), Slot::Motion, &l);
        assert!(matches!(r, Err(Error::DimensionMismatch { expected: 4, found: 5 })));
    }
}
