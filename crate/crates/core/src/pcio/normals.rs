use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{dot3, sub3, KdTree, PcioError, PointCloud, Point3, Result};

pub const DEFAULT_NORMAL_NEIGHBORS: usize = 12;

/// Cloud with estimated normals plus the ids of points whose neighborhood was
/// degenerate (collinear or coincident) and received the default `(0,0,1)`.
#[derive(Debug, Clone)]
pub struct NormalEstimate {
    pub cloud: PointCloud,
    pub degenerate: Vec<usize>,
}

/// PCA plane fit over the `k` nearest neighbors (the point itself included).
///
/// The normal is the eigenvector of the smallest covariance eigenvalue,
/// oriented away from the neighborhood centroid. When the point sits exactly
/// on the centroid side plane the largest-magnitude component is made
/// positive.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalEstimate> {
    let n = cloud.len();
    if k < 3 || k > n {
        return Err(PcioError::KOutOfRange { k, n });
    }
    let tree = KdTree::new(cloud.positions());
    let mut normals = Vec::with_capacity(n);
    let mut degenerate = Vec::new();
    for (i, &p) in cloud.positions().iter().enumerate() {
        let nb = tree.k_nearest(p, k)?;
        match plane_normal(cloud.positions(), p, nb.iter().map(|x| x.0)) {
            Some(normal) => normals.push(normal),
            None => {
                normals.push([0.0, 0.0, 1.0]);
                degenerate.push(i);
            }
        }
    }
    let cloud = cloud.clone().with_normals(normals)?;
    Ok(NormalEstimate { cloud, degenerate })
}

fn plane_normal(
    positions: &[Point3],
    at: Point3,
    neighbors: impl Iterator<Item = usize> + Clone,
) -> Option<Point3> {
    let count = neighbors.clone().count() as f64;
    let mut centroid = [0.0; 3];
    for j in neighbors.clone() {
        for a in 0..3 {
            centroid[a] += positions[j][a];
        }
    }
    let centroid = centroid.map(|c| c / count);
    let mut cov = Matrix3::<f64>::zeros();
    for j in neighbors {
        let d = Vector3::from(sub3(positions[j], centroid));
        cov += d * d.transpose();
    }
    cov /= count;

    let eig = SymmetricEigen::new(cov);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l_mid, l_max) = (eig.eigenvalues[idx[1]], eig.eigenvalues[idx[2]]);
    if l_max <= f64::MIN_POSITIVE || l_mid <= 1e-10 * l_max {
        return None;
    }
    let v = eig.eigenvectors.column(idx[0]);
    let norm = v.norm();
    let mut normal = [v[0] / norm, v[1] / norm, v[2] / norm];

    let away = dot3(normal, sub3(at, centroid));
    let scale = (l_max.sqrt()).max(f64::MIN_POSITIVE);
    let flip = if away.abs() > 1e-12 * scale {
        away < 0.0
    } else {
        let dominant = (0..3)
            .max_by(|&a, &b| normal[a].abs().total_cmp(&normal[b].abs()))
            .unwrap_or(2);
        normal[dominant] < 0.0
    };
    if flip {
        normal = normal.map(|c| -c);
    }
    Some(normal)
}
