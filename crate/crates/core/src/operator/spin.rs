use crate::error::{Error, Result};
use crate::operator::Operator;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpinKind {
    /// |upper⟩⟨lower|
    Plus,
    /// |lower⟩⟨upper|
    Minus,
    /// |upper⟩⟨upper| − |lower⟩⟨lower|
    Z,
    /// |upper⟩⟨upper|
    Proj,
}

/// Spin operator acting on the `(lower, upper)` pair of a `levels`-level system.
pub fn spin_op(kind: SpinKind, levels: usize, pair: (usize, usize)) -> Result<Operator> {
    let (lower, upper) = pair;
    if levels < 2 {
        return Err(Error::InvalidDimension(format!(
            "spin system needs at least 2 levels, got {levels}"
        )));
    }
    if kind != SpinKind::Proj && lower >= upper {
        return Err(Error::IndexOutOfRange(format!(
            "level pair ({lower}, {upper}) must satisfy lower < upper"
        )));
    }
    if upper >= levels || lower >= levels {
        return Err(Error::IndexOutOfRange(format!(
            "level pair ({lower}, {upper}) outside {levels}-level system"
        )));
    }
    let one = C64::new(1.0, 0.0);
    let mut op = Operator::zeros(levels);
    match kind {
        SpinKind::Plus => op.set(upper, lower, one),
        SpinKind::Minus => op.set(lower, upper, one),
        SpinKind::Z => {
            op.set(upper, upper, one);
            op.set(lower, lower, -one);
        }
        SpinKind::Proj => op.set(upper, upper, one),
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowering_on_qubit() {
        let m = spin_op(SpinKind::Minus, 2, (0, 1)).unwrap();
        assert_eq!(m.get(0, 1), C64::new(1.0, 0.0));
        assert_eq!(m.data().iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn completeness_on_pair() {
        let p = spin_op(SpinKind::Plus, 2, (0, 1)).unwrap();
        let m = spin_op(SpinKind::Minus, 2, (0, 1)).unwrap();
        let sum = &(&p * &m) + &(&m * &p);
        assert_eq!(sum, Operator::identity(2));
        assert_eq!(p, m.adjoint());
    }

    #[test]
    fn projector_on_four_levels() {
        let p = spin_op(SpinKind::Proj, 4, (0, 1)).unwrap();
        assert_eq!(p.get(1, 1), C64::new(1.0, 0.0));
        assert_eq!(p.data().iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn out_of_range_pairs_rejected() {
        assert!(spin_op(SpinKind::Minus, 2, (0, 2)).is_err());
        assert!(spin_op(SpinKind::Z, 4, (2, 1)).is_err());
        assert!(spin_op(SpinKind::Plus, 1, (0, 0)).is_err());
    }
}
