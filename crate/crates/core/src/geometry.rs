//! Integer convex hull and polygon area.

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, without
/// collinear points. Consumes and sorts `points`.
pub fn convex_hull(mut points: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    points.sort_unstable();
    points.dedup();
    if points.len() < 3 {
        return points;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(points.len() * 2);
    for &p in &points {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in points.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Twice the signed area of a simple polygon (shoelace formula).
pub fn shoelace_twice_area(polygon: &[(i64, i64)]) -> i64 {
    if polygon.len() < 3 {
        return 0;
    }
    polygon
        .iter()
        .zip(polygon.iter().cycle().skip(1))
        .map(|(a, b)| a.0 * b.1 - b.0 * a.1)
        .sum()
}

/// Area of the convex hull of `points`.
pub fn hull_area(points: Vec<(i64, i64)>) -> f64 {
    shoelace_twice_area(&convex_hull(points)).abs() as f64 / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_with_interior_points() {
        let pts = vec![(0, 0), (2, 0), (2, 2), (0, 2), (1, 1), (1, 0)];
        let hull = convex_hull(pts);
        assert_eq!(hull.len(), 4);
        assert_eq!(hull_area(hull), 4.0);
    }

    #[test]
    fn l_shape_hull() {
        // Corners of an L made of three unit pixels.
        let mut pts = Vec::new();
        for (x, y) in [(0, 0), (1, 0), (0, 1)] {
            pts.extend([(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)]);
        }
        assert_eq!(hull_area(pts), 3.5);
    }

    #[test]
    fn degenerate() {
        assert_eq!(hull_area(vec![(0, 0), (3, 0)]), 0.0);
        assert_eq!(hull_area(vec![(0, 0), (1, 1), (2, 2)]), 0.0);
    }
}
