//! Small 3-vector helpers shared across modules.

pub type Vec3 = [f64; 3];

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

#[inline]
pub fn dist_sq(a: Vec3, b: Vec3) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}

pub fn mean(points: &[Vec3]) -> Vec3 {
    let mut acc = [0.0; 3];
    for p in points {
        acc = add(acc, *p);
    }
    scale(acc, 1.0 / points.len() as f64)
}

pub fn mean_of(indices: &[usize], points: &[Vec3]) -> Vec3 {
    let mut acc = [0.0; 3];
    for &i in indices {
        acc = add(acc, points[i]);
    }
    scale(acc, 1.0 / indices.len() as f64)
}

/// Angle between two vectors in degrees; inputs need not be unit length.
pub fn angle_deg(a: Vec3, b: Vec3) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let c = (dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

pub fn is_finite(a: Vec3) -> bool {
    a.iter().all(|v| v.is_finite())
}
