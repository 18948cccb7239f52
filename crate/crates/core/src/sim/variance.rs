use super::SimError;
use crate::geometry::{chordal_mean, geodesic_angle, Pose};
use crate::scalar::Real;

/// Dimensionless spread of a pose sequence:
/// `mean |p − p̄|² / L² + mean angle(q, q̄)²`, where `q̄` is the sign-aligned
/// chordal mean and the angle is geodesic.
pub fn pose_variance<T: Real>(window: &[Pose<T>], char_length: T) -> Result<T, SimError> {
    if window.len() < 2 {
        return Err(SimError::WindowTooShort(window.len()));
    }
    if !(char_length > T::zero()) {
        return Err(SimError::NonPositiveLength);
    }
    let n = T::lit(window.len() as f64);
    let mean = window.iter().fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.position) / n;
    let spread = window.iter().fold(T::zero(), |acc, p| acc + (p.position - mean).norm_squared()) / n;
    let quats: Vec<_> = window.iter().map(|p| p.orientation).collect();
    let q_mean = chordal_mean(&quats);
    let angular = quats.iter().fold(T::zero(), |acc, q| {
        let a = geodesic_angle(q, &q_mean);
        acc + a * a
    }) / n;
    Ok(spread / (char_length * char_length) + angular)
}
