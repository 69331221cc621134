//! Exact non-dominated filtering for two minimized objectives.

/// True when `a` is no worse than `b` in both objectives and better in one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Indices of the non-dominated points, ordered by the first objective
/// (ties by the second, then by index). Exact duplicates are all kept.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .0
            .total_cmp(&points[j].0)
            .then(points[i].1.total_cmp(&points[j].1))
            .then(i.cmp(&j))
    });
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        let p = points[i];
        match front.last() {
            None => front.push(i),
            Some(&k) => {
                let q = points[k];
                if p.1 < q.1 || (p.0 == q.0 && p.1 == q.1) {
                    front.push(i);
                }
            }
        }
    }
    front
}
