use crate::matrix::{dot, DenseMatrix, Factorization};

/// Rescales every row whose squared norm exceeds `radius` onto the sphere of squared
/// norm `radius`. This is the Euclidean projection onto `{A : ||A||_{2,inf}^2 <= radius}`.
pub fn project_factor_rows(a: &DenseMatrix, radius: f64) -> DenseMatrix {
    let mut out = a.clone();
    project_rows_in_place(&mut out, radius);
    out
}

pub(crate) fn project_rows_in_place(a: &mut DenseMatrix, radius: f64) {
    for i in 0..a.rows() {
        project_row(a.row_mut(i), radius);
    }
}

#[inline]
pub(crate) fn project_row(row: &mut [f64], radius: f64) {
    let sq = dot(row, row);
    if sq > radius {
        let s = (radius / sq).sqrt();
        row.iter_mut().for_each(|x| *x *= s);
    }
}

/// If `||U V^T||_inf > alpha`, scales both factors by `sqrt(alpha / ||U V^T||_inf)` so the
/// product's largest entry becomes exactly `alpha`. Otherwise returns the input unchanged.
pub fn linf_rescale(f: &Factorization, alpha: f64) -> Factorization {
    let mut out = f.clone();
    linf_rescale_in_place(&mut out, alpha);
    out
}

/// Returns the product's `linf` before rescaling, or infinity (leaving `f` untouched)
/// when the product has overflowed.
pub(crate) fn linf_rescale_in_place(f: &mut Factorization, alpha: f64) -> f64 {
    let product = f.product();
    if !product.is_finite() {
        return f64::INFINITY;
    }
    let linf = product.linf();
    if linf > alpha {
        let s = (alpha / linf).sqrt();
        let (u, v) = f.parts_mut();
        u.scale(s);
        v.scale(s);
    }
    linf
}
