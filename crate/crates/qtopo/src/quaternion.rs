//! Quaternion arithmetic and its 4x4 real matrix representation.
//!
//! Everything downstream (spin rotations, eigenstate encodings, the
//! quaternion convolution layer) reduces to the Hamilton product defined
//! here, so the component order `(r, a, b, c)` is fixed once and used
//! everywhere, including serialized data.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// A quaternion `r + a i + b j + c k` with `f64` components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quaternion {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quaternion {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Self = Self::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Self = Self::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Self = Self::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Self = Self::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(r: f64, a: f64, b: f64, c: f64) -> Self {
        Self { r, a, b, c }
    }

    /// Pure quaternion `(0, v)`.
    pub const fn pure(v: [f64; 3]) -> Self {
        Self::new(0.0, v[0], v[1], v[2])
    }

    pub const fn components(self) -> [f64; 4] {
        [self.r, self.a, self.b, self.c]
    }

    pub const fn from_components(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub const fn vector_part(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn is_pure(self) -> bool {
        self.r == 0.0
    }

    pub fn conj(self) -> Self {
        Self::new(self.r, -self.a, -self.b, -self.c)
    }

    pub fn norm_sqr(self) -> f64 {
        self.r * self.r + self.a * self.a + self.b * self.b + self.c * self.c
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn dot(self, other: Self) -> f64 {
        self.r * other.r + self.a * other.a + self.b * other.b + self.c * other.c
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.r * s, self.a * s, self.b * s, self.c * s)
    }

    /// `conj(q) / |q|^2`; the zero quaternion has no inverse.
    pub fn inverse(self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2 == 0.0 {
            return Err(Error::ZeroQuaternion);
        }
        Ok(self.conj().scale(1.0 / n2))
    }

    /// Scale to unit norm; `None` for vectors too short to normalize safely.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n < 1e-12 {
            None
        } else {
            Some(self.scale(1.0 / n))
        }
    }

    /// Rotate a 3-vector by this unit quaternion: `q (0, v) q*`.
    pub fn rotate_vector(self, v: [f64; 3]) -> [f64; 3] {
        debug_assert!((self.norm() - 1.0).abs() < 1e-9);
        (self * Self::pure(v) * self.conj()).vector_part()
    }

    /// The left-multiplication matrix M(q) with `M(q1) column(q2) = column(q1 q2)`.
    pub fn to_matrix(self) -> QuatMatrix {
        let Self { r, a, b, c } = self;
        QuatMatrix([
            [r, -a, -b, -c],
            [a, r, -c, b],
            [b, c, r, -a],
            [c, -b, a, r],
        ])
    }

    /// Reconstruct a quaternion from its matrix representation.
    ///
    /// The components come from the trace identities `r = tr(M)/4`,
    /// `a = -tr(i M)/4`, and so on; the input must then round-trip through
    /// [`Quaternion::to_matrix`] within `1e-12` per entry.
    pub fn from_matrix(m: &QuatMatrix) -> Result<Self> {
        let r = m.trace() / 4.0;
        let a = -Quaternion::I.to_matrix().matmul(m).trace() / 4.0;
        let b = -Quaternion::J.to_matrix().matmul(m).trace() / 4.0;
        let c = -Quaternion::K.to_matrix().matmul(m).trace() / 4.0;
        let q = Self::new(r, a, b, c);
        let deviation = q.to_matrix().max_abs_diff(m);
        if deviation > 1e-12 {
            return Err(Error::MalformedQuatMatrix { deviation });
        }
        Ok(q)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product.
    fn mul(self, q2: Quaternion) -> Quaternion {
        let q1 = self;
        Quaternion::new(
            q1.r * q2.r - q1.a * q2.a - q1.b * q2.b - q1.c * q2.c,
            q1.a * q2.r + q1.r * q2.a - q1.c * q2.b + q1.b * q2.c,
            q1.b * q2.r + q1.c * q2.a + q1.r * q2.b - q1.a * q2.c,
            q1.c * q2.r - q1.b * q2.a + q1.a * q2.b + q1.r * q2.c,
        )
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.r + o.r, self.a + o.a, self.b + o.b, self.c + o.c)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.r - o.r, self.a - o.a, self.b - o.b, self.c - o.c)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.r, -self.a, -self.b, -self.c)
    }
}

/// Row-major 4x4 real matrix representing a quaternion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuatMatrix(pub [[f64; 4]; 4]);

impl QuatMatrix {
    pub const IDENTITY: Self = QuatMatrix([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]);

    pub fn matmul(&self, other: &QuatMatrix) -> QuatMatrix {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        QuatMatrix(out)
    }

    pub fn transpose(&self) -> QuatMatrix {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in self.0.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                out[j][i] = v;
            }
        }
        QuatMatrix(out)
    }

    /// Apply to a column vector of quaternion components.
    pub fn apply(&self, col: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (o, row) in out.iter_mut().zip(&self.0) {
            *o = row.iter().zip(&col).map(|(m, c)| m * c).sum();
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    pub fn max_abs_diff(&self, other: &QuatMatrix) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                d = d.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_quat(rng: &mut impl Rng, scale: f64) -> Quaternion {
        Quaternion::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    fn assert_close(q1: Quaternion, q2: Quaternion, tol: f64) {
        assert!(
            (q1 - q2).norm() <= tol,
            "quaternions differ: {q1:?} vs {q2:?}"
        );
    }

    #[test]
    fn identity_element() {
        let q = Quaternion::new(0.3, -1.25, 2.0, 7.5);
        assert_eq!(Quaternion::ONE * q, q);
        assert_eq!(q * Quaternion::ONE, q);
    }

    #[test]
    fn basis_products() {
        assert_eq!(Quaternion::I * Quaternion::J, Quaternion::K);
        assert_eq!(Quaternion::J * Quaternion::K, Quaternion::I);
        assert_eq!(Quaternion::K * Quaternion::I, Quaternion::J);
        assert_eq!(Quaternion::I * Quaternion::I, -Quaternion::ONE);
    }

    #[test]
    fn product_matches_matrix_representation() {
        // The matrix route is the independent check for the component formula.
        let q1 = Quaternion::new(1.0, 2.0, 3.0, 4.0);
        let q2 = Quaternion::new(5.0, 6.0, 7.0, 8.0);
        let via_matrix = q1.to_matrix().apply(q2.components());
        assert_eq!(Quaternion::from_components(via_matrix), q1 * q2);
        assert_eq!(q1 * q2, Quaternion::new(-60.0, 12.0, 30.0, 24.0));
    }

    #[test]
    fn matrix_equivalence_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let q1 = random_quat(&mut rng, 10.0);
            let q2 = random_quat(&mut rng, 10.0);
            let m = Quaternion::from_components(q1.to_matrix().apply(q2.components()));
            assert_close(m, q1 * q2, 1e-12 * (1.0 + (q1 * q2).norm()));
        }
    }

    #[test]
    fn conjugation_norm_inverse() {
        let q = Quaternion::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(q.conj(), Quaternion::new(1.0, -2.0, -3.0, -4.0));
        assert_eq!(Quaternion::new(3.0, 0.0, 4.0, 0.0).norm(), 5.0);

        // Unit quaternions invert to their conjugate.
        let u = q.normalized().unwrap();
        assert_close(u.inverse().unwrap(), u.conj(), 1e-15);

        assert!(matches!(
            Quaternion::ZERO.inverse(),
            Err(Error::ZeroQuaternion)
        ));
    }

    #[test]
    fn norm_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let q1 = random_quat(&mut rng, 10.0);
            let q2 = random_quat(&mut rng, 10.0);
            let lhs = (q1 * q2).norm();
            let rhs = q1.norm() * q2.norm();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }

    #[test]
    fn product_is_noncommutative_and_associative() {
        assert_eq!(
            Quaternion::I * Quaternion::J,
            -(Quaternion::J * Quaternion::I)
        );

        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let q1 = random_quat(&mut rng, 3.0);
            let q2 = random_quat(&mut rng, 3.0);
            let q3 = random_quat(&mut rng, 3.0);
            let lhs = (q1 * q2) * q3;
            let rhs = q1 * (q2 * q3);
            assert_close(lhs, rhs, 1e-12 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn pure_product_scalar_part_is_negative_dot() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let v1 = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let v2 = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let p = Quaternion::pure(v1) * Quaternion::pure(v2);
            let dot = v1[0] * v2[0] + v1[1] * v2[1] + v1[2] * v2[2];
            assert_eq!(p.r, -dot);
        }
    }

    #[test]
    fn matrix_round_trip_and_structure() {
        assert_eq!(Quaternion::ONE.to_matrix(), QuatMatrix::IDENTITY);

        let q = Quaternion::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(Quaternion::from_matrix(&q.to_matrix()).unwrap(), q);

        // conj corresponds to transpose
        assert_eq!(q.conj().to_matrix(), q.to_matrix().transpose());

        // i j k = -1 in matrix form
        let ijk = Quaternion::I
            .to_matrix()
            .matmul(&Quaternion::J.to_matrix())
            .matmul(&Quaternion::K.to_matrix());
        assert_eq!(ijk, (-Quaternion::ONE).to_matrix());

        let mut bad = q.to_matrix();
        bad.0[0][1] += 1e-6;
        assert!(matches!(
            Quaternion::from_matrix(&bad),
            Err(Error::MalformedQuatMatrix { .. })
        ));
    }

    #[test]
    fn rotation_preserves_length_and_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..100 {
            let q = random_quat(&mut rng, 1.0).normalized().unwrap_or(Quaternion::ONE);
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let w = q.rotate_vector(v);
            let n_v = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let n_w = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
            assert!((n_v - n_w).abs() < 1e-12);
        }
    }
}
