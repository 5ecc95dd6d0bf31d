//! Force evaluation for each [`FieldSpec`] variant.

use crate::model::{FieldSpec, Vec2};

impl FieldSpec {
    /// x-component of the force at abscissa `x`. Fields never depend on `y`,
    /// velocity or time.
    pub fn force_x(&self, x: f64) -> f64 {
        match *self {
            FieldSpec::Zero => 0.0,
            FieldSpec::HalfPlaneConstant { f0 } => {
                if x >= 0.0 {
                    f0
                } else {
                    0.0
                }
            }
            FieldSpec::BandConstant { f0, delta } => {
                if x.abs() <= delta {
                    f0
                } else {
                    0.0
                }
            }
            FieldSpec::GaussianBand { f0, sigma } => f0 * (-sigma * x * x).exp(),
        }
    }

    /// Abscissa where a particle arriving from the left first meets a
    /// constant-force region. `None` for fields without a sharp boundary.
    pub fn force_onset(&self) -> Option<f64> {
        match *self {
            FieldSpec::HalfPlaneConstant { .. } => Some(0.0),
            FieldSpec::BandConstant { delta, .. } => Some(-delta),
            FieldSpec::Zero | FieldSpec::GaussianBand { .. } => None,
        }
    }

    /// Piecewise-constant description of the field over `[from, to]`:
    /// consecutive `(x_start, x_end, force_x)` intervals. `None` when the
    /// field is not piecewise constant.
    pub fn constant_pieces(&self, from: f64, to: f64) -> Option<Vec<(f64, f64, f64)>> {
        let breaks: Vec<(f64, f64)> = match *self {
            FieldSpec::Zero => vec![],
            FieldSpec::HalfPlaneConstant { f0 } => vec![(0.0, f0)],
            FieldSpec::BandConstant { f0, delta } => vec![(-delta, f0), (delta, 0.0)],
            FieldSpec::GaussianBand { .. } => return None,
        };
        let mut pieces = Vec::new();
        let mut start = from;
        let mut force = self.force_x(f64::NEG_INFINITY);
        for (x, next_force) in breaks {
            if x > start {
                let end = x.min(to);
                if end > start {
                    pieces.push((start, end, force));
                }
                start = end;
            }
            force = next_force;
            if start >= to {
                break;
            }
        }
        if to > start {
            pieces.push((start, to, force));
        }
        Some(pieces)
    }
}

/// Force acting on a particle at `pos`.
pub fn eval_field(spec: &FieldSpec, pos: Vec2) -> Vec2 {
    Vec2::new(spec.force_x(pos.x), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn band_inside_and_outside() {
        let band = FieldSpec::BandConstant {
            f0: -2.0 * PI,
            delta: 0.5,
        };
        assert_eq!(
            eval_field(&band, Vec2::new(0.3, 7.2)),
            Vec2::new(-2.0 * PI, 0.0)
        );
        assert_eq!(eval_field(&band, Vec2::new(0.6, 0.0)), Vec2::ZERO);
    }

    #[test]
    fn gaussian_value() {
        let g = FieldSpec::GaussianBand {
            f0: 1.0,
            sigma: 4.0,
        };
        let f = eval_field(&g, Vec2::new(0.5, 123.0));
        assert!((f.x - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert_eq!(f.y, 0.0);
    }

    #[test]
    fn half_plane_is_closed_at_origin() {
        let h = FieldSpec::HalfPlaneConstant { f0: 1.0 };
        assert_eq!(eval_field(&h, Vec2::new(-0.001, 0.0)), Vec2::ZERO);
        assert_eq!(eval_field(&h, Vec2::new(0.0, 0.0)), Vec2::new(1.0, 0.0));
    }

    #[test]
    fn band_is_closed_at_edges() {
        let band = FieldSpec::BandConstant {
            f0: 3.0,
            delta: 0.5,
        };
        assert_eq!(band.force_x(0.5), 3.0);
        assert_eq!(band.force_x(-0.5), 3.0);
        assert_eq!(band.force_x(0.5000001), 0.0);
    }

    #[test]
    fn pieces_cover_interval() {
        let band = FieldSpec::BandConstant {
            f0: -1.0,
            delta: 0.5,
        };
        assert_eq!(
            band.constant_pieces(-5.0, 10.0).unwrap(),
            vec![(-5.0, -0.5, 0.0), (-0.5, 0.5, -1.0), (0.5, 10.0, 0.0)]
        );
        let half = FieldSpec::HalfPlaneConstant { f0: 2.0 };
        assert_eq!(
            half.constant_pieces(-4.8, 10.0).unwrap(),
            vec![(-4.8, 0.0, 0.0), (0.0, 10.0, 2.0)]
        );
        // Source inside the band, detector inside it too.
        assert_eq!(
            band.constant_pieces(-0.2, 0.3).unwrap(),
            vec![(-0.2, 0.3, -1.0)]
        );
        assert_eq!(
            FieldSpec::Zero.constant_pieces(-1.0, 1.0).unwrap(),
            vec![(-1.0, 1.0, 0.0)]
        );
        assert!(FieldSpec::GaussianBand {
            f0: 1.0,
            sigma: 1.0
        }
        .constant_pieces(-1.0, 1.0)
        .is_none());
    }

    fn any_field() -> impl Strategy<Value = FieldSpec> {
        prop_oneof![
            Just(FieldSpec::Zero),
            (-10.0..10.0f64).prop_map(|f0| FieldSpec::HalfPlaneConstant { f0 }),
            (-10.0..10.0f64, 0.01..3.0f64)
                .prop_map(|(f0, delta)| FieldSpec::BandConstant { f0, delta }),
            (-10.0..10.0f64, 0.01..10.0f64)
                .prop_map(|(f0, sigma)| FieldSpec::GaussianBand { f0, sigma }),
        ]
    }

    proptest! {
        #[test]
        fn independent_of_y(field in any_field(), x in -20.0..20.0f64, y1 in -50.0..50.0f64, y2 in -50.0..50.0f64) {
            prop_assert_eq!(eval_field(&field, Vec2::new(x, y1)), eval_field(&field, Vec2::new(x, y2)));
            prop_assert_eq!(eval_field(&field, Vec2::new(x, y1)).y, 0.0);
        }

        #[test]
        fn gaussian_is_even(f0 in -10.0..10.0f64, sigma in 0.01..10.0f64, x in -5.0..5.0f64) {
            let g = FieldSpec::GaussianBand { f0, sigma };
            prop_assert_eq!(g.force_x(x), g.force_x(-x));
        }
    }
}
