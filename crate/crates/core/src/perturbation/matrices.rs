//! Coefficients of the two second-order recurrences.
//!
//! Writing `v` in terms of `z_N = (x_N, y_N)` turns `L v = m(n - k) / 2N(N-1)`
//! into `B_N z_{N+1} = C_N z_N + D_N z_{N-1} + f_N` for `N >= 4`, with a
//! modified first equation at `N = 3`. Writing `v'` in terms of
//! `z'_N = (x'_N, y'_N)` gives the same shape with primed coefficients and a
//! source that depends on the `y_N`.

use super::linalg::{Mat2, Vec2};
use crate::model::DemographicParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceMatrices {
    pub b: Mat2,
    pub c: Mat2,
    pub d: Mat2,
    pub f: Vec2,
}

/// First-layer coefficients at level `size >= 3`.
pub fn first_layer(size: u32, p: &DemographicParams) -> RecurrenceMatrices {
    assert!(size >= 3, "first layer starts at N = 3");
    let n = f64::from(size);
    let (b, d, c) = (p.b, p.d, p.c);
    let death = d + c * (n - 1.0);
    RecurrenceMatrices {
        b: Mat2::new(
            1.0,
            (2.0 * n * n + 4.0 * n - 3.0) / (n + 1.0),
            2.0 * n * n - 3.0,
            -3.0 / (n + 1.0),
        )
        .scale(b / (2.0 * (n - 1.0) * (n + 1.0))),
        c: Mat2::new(0.0, 1.0 / n, 1.0, 0.0).scale(b + death),
        d: Mat2::new(0.0, (n - 3.0) / (n - 1.0), n - 2.0, 3.0 / (n - 1.0))
            .scale(-death / (n - 1.0)),
        f: Vec2::new(0.0, -1.0 / (2.0 * n * (n - 1.0))),
    }
}

/// The `N = 3` equation after eliminating `z_2`: `(C~_3, f~_3)`.
pub fn first_layer_initial(p: &DemographicParams) -> (Mat2, Vec2) {
    let base = first_layer(3, p);
    let e = p.d + 2.0 * p.c;
    (base.c - Mat2::new(0.0, 0.0, 2.0 * e / 3.0, e), base.f)
}

/// Second-layer coefficients at level `size >= 3`; `y(N)` must give `y_N`
/// for `N = size - 1, size, size + 1` (with `y(2)` the chosen split).
pub fn second_layer<Y: Fn(u32) -> f64>(
    size: u32,
    p: &DemographicParams,
    y: Y,
) -> RecurrenceMatrices {
    assert!(size >= 3, "second layer is indexed from N = 3");
    let n = f64::from(size);
    let (b, d, c) = (p.b, p.d, p.c);
    let death = d + c * (n - 1.0);
    let total = n * (b + d + c * (n - 1.0));
    let (y_lo, y_mid, y_hi) = (y(size - 1), y(size), y(size + 1));
    let up = b / (n - 1.0);
    let f0 = up * (2.0 * n - 1.0) * y_hi / (2.0 * (n + 1.0).powi(2))
        - death * (4.0 * n + 2.0) * y_lo / (2.0 * (n - 1.0).powi(2));
    let f1 = up * (2.0 * n.powi(3) + 3.0 * n * n - 4.0 * n - 1.5) * y_hi
        / (2.0 * (n + 1.0).powi(2))
        - total * (2.0 * n - 1.0) * y_mid / (2.0 * n * n)
        + death * (2.0 * n * n - 7.0 * n + 8.0) * y_lo / (2.0 * (n - 1.0).powi(2));
    RecurrenceMatrices {
        b: Mat2::new(
            2.0 * n * n - 2.0 * n - 1.0,
            -1.0 / (n + 1.0),
            0.5,
            (n * n + n - 1.5) / (n + 1.0),
        )
        .scale(up),
        c: Mat2::new(2.0, 0.0, 0.0, 1.0 / n).scale(total),
        d: Mat2::new(2.0 * n - 2.0, 2.0 / (n - 1.0), 0.0, (n - 2.0) / (n - 1.0)).scale(-death),
        f: Vec2::new(f0, f1),
    }
}

/// The `N = 2` equation `B~'_2 z'_3 = C~'_2 z'_2 + f~'_2`.
pub fn second_layer_initial(x2: f64, y2: f64, x3: f64, y3: f64) -> (Mat2, Mat2, Vec2) {
    (
        Mat2::new(1.0, 3.0, 3.0, 13.0 / 3.0),
        Mat2::new(0.0, 2.0, 2.0, 3.0),
        Vec2::new(x2 - y2 - x3 + 1.5 * y3, 19.0 / 6.0 * y3 - 9.0 / 4.0 * y2),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Mat2, b: Mat2) -> bool {
        a.0.iter()
            .flatten()
            .zip(b.0.iter().flatten())
            .all(|(x, y)| (x - y).abs() <= 1e-14 * (1.0 + y.abs()))
    }

    #[test]
    fn examples() {
        let p = DemographicParams::neutral(1.3, 0.7, 0.4).unwrap();
        let m3 = first_layer(3, &p);
        assert!(close(
            m3.b,
            Mat2::new(1.0, 27.0 / 4.0, 15.0, -0.75).scale(1.3 / 16.0)
        ));
        let m4 = first_layer(4, &p);
        assert!(close(
            m4.c,
            Mat2::new(0.0, 0.25, 1.0, 0.0).scale(1.3 + 0.7 + 3.0 * 0.4)
        ));
        assert_eq!(first_layer(5, &p).f, Vec2::new(0.0, -1.0 / 40.0));
        let (ct, ft) = first_layer_initial(&p);
        let e = 0.7 + 0.8;
        assert!(close(ct, m3.c - Mat2::new(0.0, 0.0, 2.0 / 3.0 * e, e)));
        assert_eq!(ft, m3.f);

        let s3 = second_layer(3, &p, |_| 0.0);
        assert!(close(
            s3.c,
            Mat2::new(2.0, 0.0, 0.0, 1.0 / 3.0).scale(3.0 * (1.3 + 0.7 + 0.8))
        ));
        assert_eq!(s3.f, Vec2::ZERO);
        let (bt, ct, ft) = second_layer_initial(0.0, 0.0, 0.0, 0.0);
        assert_eq!(ct.det(), -4.0);
        assert_eq!(bt, Mat2::new(1.0, 3.0, 3.0, 13.0 / 3.0));
        assert_eq!(ft, Vec2::ZERO);
    }
}
