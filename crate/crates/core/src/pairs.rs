use crate::data::Matrix;
use crate::scalar::Scalar;

/// Index pairs `(i, j)`, `i < j`, whose first coordinates differ by at most
/// `reach`; every pair when `reach` is `None`.
pub(crate) fn neighbor_pairs<T: Scalar>(x: &Matrix<T>, reach: Option<T>) -> Vec<(u32, u32)> {
    let n = x.nrows();
    let mut out = Vec::new();
    match reach {
        None => {
            for i in 0..n {
                for j in i + 1..n {
                    out.push((i as u32, j as u32));
                }
            }
        }
        Some(r) => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| x.get(a, 0).partial_cmp(&x.get(b, 0)).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
            for (p, &i) in order.iter().enumerate() {
                let xi = x.get(i, 0);
                for &j in &order[p + 1..] {
                    if x.get(j, 0) - xi > r {
                        break;
                    }
                    out.push((i.min(j) as u32, i.max(j) as u32));
                }
            }
        }
    }
    out
}
