use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector2};
use serde::{Deserialize, Serialize};

use super::model::ArmModel;
use crate::error::{check_dim, Error, Result};

/// Sign of the elbow angle selected by the closed-form inverse kinematics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Elbow {
    /// Positive elbow angle.
    Up,
    /// Negative elbow angle.
    #[default]
    Down,
}

/// End-effector position: sum of link vectors at cumulative angles.
pub fn forward_kinematics(model: &ArmModel, q: &[f64]) -> Result<Vector2<f64>> {
    check_dim("forward kinematics posture", model.n_links(), q.len())?;
    let mut angle = 0.0;
    let mut p = Vector2::zeros();
    for (l, qi) in model.link_lengths().iter().zip(q) {
        angle += qi;
        p += Vector2::new(angle.cos(), angle.sin()) * *l;
    }
    Ok(p)
}

/// Positional Jacobian `d p / d q` of the end effector (2 x n).
pub fn jacobian(model: &ArmModel, q: &[f64]) -> Result<DMatrix<f64>> {
    check_dim("jacobian posture", model.n_links(), q.len())?;
    let n = q.len();
    let mut cumulative = Vec::with_capacity(n);
    let mut angle = 0.0;
    for qi in q {
        angle += qi;
        cumulative.push(angle);
    }
    let mut jac = DMatrix::zeros(2, n);
    // Column j collects every link at or beyond joint j.
    for j in 0..n {
        for (i, l) in model.link_lengths().iter().enumerate().skip(j) {
            jac[(0, j)] -= l * cumulative[i].sin();
            jac[(1, j)] += l * cumulative[i].cos();
        }
    }
    Ok(jac)
}

/// End-effector velocity `J(q) q'`.
pub fn end_effector_velocity(model: &ArmModel, q: &[f64], qdot: &[f64]) -> Result<Vector2<f64>> {
    check_dim("end-effector velocity", model.n_links(), qdot.len())?;
    let jac = jacobian(model, q)?;
    let v = jac * nalgebra::DVector::from_column_slice(qdot);
    Ok(Vector2::new(v[0], v[1]))
}

/// Inner and outer radius of the reachable annulus of a 2-link chain.
pub fn workspace_boundary(model: &ArmModel) -> Result<(f64, f64)> {
    if model.n_links() != 2 {
        return Err(Error::UnsupportedLinkCount(model.n_links()));
    }
    let l = model.link_lengths();
    Ok(((l[0] - l[1]).abs(), l[0] + l[1]))
}

/// Closed-form 2-link inverse kinematics on the requested elbow branch.
/// The shoulder angle is returned in `(-pi, pi]`.
pub fn inverse_kinematics(model: &ArmModel, p: Vector2<f64>, branch: Elbow) -> Result<Vec<f64>> {
    let (r_min, r_max) = workspace_boundary(model)?;
    let (l1, l2) = (model.link_lengths()[0], model.link_lengths()[1]);
    let r = p.norm();
    if !r.is_finite() || r > r_max || r < r_min {
        let deficit = if r > r_max { r - r_max } else { r_min - r };
        return Err(Error::Unreachable {
            x: p.x,
            y: p.y,
            deficit,
        });
    }
    let cos_elbow = ((r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let sin_mag = (1.0 - cos_elbow * cos_elbow).max(0.0).sqrt();
    let sin_elbow = match branch {
        Elbow::Up => sin_mag,
        Elbow::Down => -sin_mag,
    };
    let elbow = sin_elbow.atan2(cos_elbow);
    let shoulder = p.y.atan2(p.x) - (l2 * sin_elbow).atan2(l1 + l2 * cos_elbow);
    Ok(vec![wrap_angle(shoulder), elbow])
}

/// Maps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::ArmModelParams;
    use std::f64::consts::FRAC_PI_2;

    fn arm(l1: f64, l2: f64) -> ArmModel {
        ArmModel::new(ArmModelParams {
            link_lengths: vec![l1, l2],
            link_com_offsets: vec![l1 / 2.0, l2 / 2.0],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn forward_examples() {
        let m = arm(0.30, 0.33);
        let p = forward_kinematics(&m, &[0.0, 0.0]).unwrap();
        assert!((p - Vector2::new(0.63, 0.0)).norm() < 1e-15);
        let p = forward_kinematics(&m, &[FRAC_PI_2, 0.0]).unwrap();
        assert!((p - Vector2::new(0.0, 0.63)).norm() < 1e-15);
        let p = forward_kinematics(&m, &[FRAC_PI_2, -FRAC_PI_2]).unwrap();
        assert!((p - Vector2::new(0.33, 0.30)).norm() < 1e-15);
        assert!(forward_kinematics(&m, &[0.0]).is_err());
    }

    #[test]
    fn inverse_examples() {
        let m = arm(0.30, 0.33);
        for b in [Elbow::Up, Elbow::Down] {
            let q = inverse_kinematics(&m, Vector2::new(0.63, 0.0), b).unwrap();
            assert!(q[0].abs() < 1e-12 && q[1].abs() < 1e-12);
        }
        let q = inverse_kinematics(&m, Vector2::new(0.33, 0.30), Elbow::Down).unwrap();
        assert!((q[0] - FRAC_PI_2).abs() < 1e-12);
        assert!((q[1] + FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn unreachable_reports_deficit() {
        let m = arm(0.30, 0.33);
        match inverse_kinematics(&m, Vector2::new(0.7, 0.0), Elbow::Down) {
            Err(Error::Unreachable { deficit, .. }) => assert!((deficit - 0.07).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        match inverse_kinematics(&m, Vector2::new(0.01, 0.0), Elbow::Up) {
            Err(Error::Unreachable { deficit, .. }) => assert!((deficit - 0.02).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn annulus_radii() {
        let (a, b) = workspace_boundary(&arm(0.30, 0.33)).unwrap();
        assert!((a - 0.03).abs() < 1e-15 && (b - 0.63).abs() < 1e-15);
        assert_eq!(workspace_boundary(&arm(0.5, 0.5)).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = arm(0.30, 0.33);
        let q = [0.3, -1.2];
        let j = jacobian(&m, &q).unwrap();
        let h = 1e-6;
        for c in 0..2 {
            let mut qp = q;
            let mut qm = q;
            qp[c] += h;
            qm[c] -= h;
            let d = (forward_kinematics(&m, &qp).unwrap() - forward_kinematics(&m, &qm).unwrap())
                / (2.0 * h);
            assert!((d[0] - j[(0, c)]).abs() < 1e-9);
            assert!((d[1] - j[(1, c)]).abs() < 1e-9);
        }
    }

    #[test]
    fn wrap_into_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(2.0 * PI + 0.3) - 0.3).abs() < 1e-12);
        assert!((wrap_angle(-0.3) + 0.3).abs() < 1e-15);
    }
}
