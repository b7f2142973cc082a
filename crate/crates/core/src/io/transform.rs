//! Elementwise marker transforms applied before clustering.

use crate::error::{Error, Result};
use crate::model::DataMatrix;
use crate::real::{cv, Real};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Marker transform: arcsinh(x / cofactor), Box-Cox, or none.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""), rename_all = "kebab-case", tag = "kind")]
pub enum Transform<T: Real> {
    #[default]
    None,
    Arcsinh { cofactor: T },
    BoxCox { lambda: T },
}

impl<T: Real> Transform<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            Transform::Arcsinh { cofactor } if *cofactor <= T::zero() => Err(
                Error::InvalidArgument(format!("arcsinh cofactor must be positive, got {cofactor}")),
            ),
            _ => Ok(()),
        }
    }

    fn apply_one(&self, x: T) -> Result<T> {
        Ok(match *self {
            Transform::None => x,
            Transform::Arcsinh { cofactor } => (x / cofactor).asinh(),
            Transform::BoxCox { lambda } => {
                if lambda == T::zero() {
                    if x <= T::zero() {
                        return Err(Error::Domain(format!(
                            "Box-Cox with lambda = 0 requires positive data, got {x}"
                        )));
                    }
                    x.ln()
                } else {
                    if x <= T::zero() && lambda < T::zero() {
                        return Err(Error::Domain(format!(
                            "Box-Cox with lambda < 0 requires positive data, got {x}"
                        )));
                    }
                    let p = x.powf(lambda);
                    if !p.is_finite() {
                        return Err(Error::Domain(format!(
                            "Box-Cox x^lambda is not finite for x = {x}, lambda = {lambda}"
                        )));
                    }
                    (p - T::one()) / lambda
                }
            }
        })
    }

    fn invert_one(&self, y: T) -> Result<T> {
        Ok(match *self {
            Transform::None => y,
            Transform::Arcsinh { cofactor } => y.sinh() * cofactor,
            Transform::BoxCox { lambda } => {
                if lambda == T::zero() {
                    y.exp()
                } else {
                    let base = lambda * y + T::one();
                    if base <= T::zero() {
                        return Err(Error::Domain(format!(
                            "value {y} outside the Box-Cox image for lambda = {lambda}"
                        )));
                    }
                    base.powf(T::one() / lambda)
                }
            }
        })
    }
}

/// Apply a transform elementwise.
pub fn transform<T: Real>(data: &DataMatrix<T>, spec: Transform<T>) -> Result<DataMatrix<T>> {
    spec.validate()?;
    let mut m = data.values().clone();
    for x in m.iter_mut() {
        *x = spec.apply_one(*x)?;
    }
    DataMatrix::new(m, data.names().to_vec())
}

/// Invert a transform elementwise (bijective on its domain).
pub fn inverse_transform<T: Real>(
    data: &DataMatrix<T>,
    spec: Transform<T>,
) -> Result<DataMatrix<T>> {
    spec.validate()?;
    let mut m = data.values().clone();
    for x in m.iter_mut() {
        *x = spec.invert_one(*x)?;
    }
    DataMatrix::new(m, data.names().to_vec())
}

/// Parse a CLI transform spec: `none`, `arcsinh:COFACTOR`, `boxcox:LAMBDA`.
impl<T: Real> FromStr for Transform<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_num = |v: &str| {
            v.parse::<T>()
                .map_err(|_| Error::Config(format!("transform parameter {v:?} is not numeric")))
        };
        let spec = match s.split_once(':') {
            None => match s {
                "none" => Transform::None,
                "arcsinh" => Transform::Arcsinh { cofactor: cv::<T>(150.0) },
                other => return Err(Error::Config(format!("unknown transform {other:?}"))),
            },
            Some(("arcsinh", v)) => Transform::Arcsinh { cofactor: parse_num(v)? },
            Some(("boxcox", v)) => Transform::BoxCox { lambda: parse_num(v)? },
            Some((other, _)) => {
                return Err(Error::Config(format!("unknown transform {other:?}")))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn data(xs: &[f64]) -> DataMatrix<f64> {
        DataMatrix::new(DMatrix::from_row_slice(xs.len(), 1, xs), vec!["m".into()]).unwrap()
    }

    #[test]
    fn arcsinh_at_zero_and_boxcox_specials() {
        let d = transform(&data(&[0.0, 150.0]), Transform::Arcsinh { cofactor: 150.0 }).unwrap();
        assert_relative_eq!(d.values()[(0, 0)], 0.0);
        assert_relative_eq!(d.values()[(1, 0)], 1.0f64.asinh());

        // lambda = 1: x - 1
        let d = transform(&data(&[3.0, 10.0]), Transform::BoxCox { lambda: 1.0 }).unwrap();
        assert_relative_eq!(d.values()[(0, 0)], 2.0);
        assert_relative_eq!(d.values()[(1, 0)], 9.0);

        // lambda = 0, x = e: 1
        let d = transform(&data(&[std::f64::consts::E]), Transform::BoxCox { lambda: 0.0 })
            .unwrap();
        assert_relative_eq!(d.values()[(0, 0)], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn boxcox_domain_errors() {
        assert!(matches!(
            transform(&data(&[-1.0]), Transform::BoxCox { lambda: 0.0 }),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            transform(&data(&[-1.0]), Transform::BoxCox { lambda: -0.5 }),
            Err(Error::Domain(_))
        ));
        // fractional power of a negative is not representable either
        assert!(transform(&data(&[-1.0]), Transform::BoxCox { lambda: 0.5 }).is_err());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("none".parse::<Transform<f64>>().unwrap(), Transform::None);
        assert_eq!(
            "arcsinh:150".parse::<Transform<f64>>().unwrap(),
            Transform::Arcsinh { cofactor: 150.0 }
        );
        assert_eq!(
            "boxcox:0.5".parse::<Transform<f64>>().unwrap(),
            Transform::BoxCox { lambda: 0.5 }
        );
        assert!("logicle:1".parse::<Transform<f64>>().is_err());
        assert!("arcsinh:-3".parse::<Transform<f64>>().is_err());
    }

    proptest! {
        #[test]
        fn arcsinh_round_trip(x in -1e5f64..1e5, cof in 1e-2f64..1e4) {
            let t = Transform::Arcsinh { cofactor: cof };
            let y = t.apply_one(x).unwrap();
            let back = t.invert_one(y).unwrap();
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
        }

        #[test]
        fn boxcox_round_trip(x in 1e-3f64..1e3, lam in -2.0f64..2.0) {
            let t = Transform::BoxCox { lambda: lam };
            let y = t.apply_one(x).unwrap();
            let back = t.invert_one(y).unwrap();
            prop_assert!((back - x).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }
}
