//! PCA projection and pair-difference cohesion of embeddings, emitted as
//! plot-ready CSV.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::vector;

/// Intra-category cosine must exceed inter-category cosine by this much for
/// a category to count as separated.
pub const SEPARATION_MARGIN: f64 = 0.05;

const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("geometry: invalid input: {0}")]
    Input(String),
    #[error("geometry: rank deficient: requested {requested} components, usable rank {rank}")]
    RankDeficient { requested: usize, rank: usize },
    #[error("geometry: csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    /// `out_dim` orthonormal vectors of length `dim`, by descending variance.
    pub components: Vec<Vec<f64>>,
    /// One row of `out_dim` coordinates per input vector.
    pub coords: Vec<Vec<f64>>,
    /// Fraction of total variance per component.
    pub explained_variance: Vec<f64>,
    pub mean: Vec<f64>,
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns
/// eigenvalues and the matching eigenvectors as columns of `v` (row-major).
pub fn symmetric_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Projects onto the top `out_dim` principal axes of the mean-centered
/// data. Each component's largest-magnitude entry is positive (first such
/// entry on ties).
pub fn pca_project(vectors: &[Vec<f64>], out_dim: usize) -> Result<Projection, GeometryError> {
    if vectors.len() < 2 {
        return Err(GeometryError::Input("need at least 2 vectors".into()));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(GeometryError::Input("vectors differ in dimension".into()));
    }
    if out_dim == 0 || out_dim > dim {
        return Err(GeometryError::Input(format!("out_dim {out_dim} not in 1..={dim}")));
    }
    if vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(GeometryError::Input("non-finite component".into()));
    }
    let n = vectors.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n).collect();
    let centered: Vec<Vec<f64>> = vectors.iter().map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    let mut cov = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let c = centered.iter().map(|r| r[i] * r[j]).sum::<f64>() / (n - 1.0);
            cov[i][j] = c;
            cov[j][i] = c;
        }
    }
    let (values, vecs) = symmetric_eigen(&cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let tol = total * 1e-12 * dim as f64;
    let rank = values.iter().filter(|&&v| v > tol).count();
    if total <= 0.0 || out_dim > rank {
        return Err(GeometryError::RankDeficient { requested: out_dim, rank });
    }
    let components: Vec<Vec<f64>> = order[..out_dim]
        .iter()
        .map(|&c| {
            let mut u: Vec<f64> = (0..dim).map(|r| vecs[r][c]).collect();
            vector::normalize(&mut u);
            let lead = u.iter().fold(0.0f64, |best, &x| if x.abs() > best.abs() { x } else { best });
            if lead < 0.0 {
                u.iter_mut().for_each(|x| *x = -*x);
            }
            u
        })
        .collect();
    let explained_variance = order[..out_dim].iter().map(|&c| values[c].max(0.0) / total).collect();
    let coords = centered
        .iter()
        .map(|r| components.iter().map(|u| vector::dot(r, u)).collect())
        .collect();
    Ok(Projection {
        components,
        coords,
        explained_variance,
        mean,
    })
}

/// `label,category,x,y` rows from the first two projected coordinates
/// (`y` is 0 for one-dimensional projections).
pub fn projection_csv(labels: &[String], categories: &[String], projection: &Projection) -> Result<String, GeometryError> {
    if labels.len() != projection.coords.len() || categories.len() != labels.len() {
        return Err(GeometryError::Input("labels, categories and points differ in count".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "category", "x", "y"])?;
    for ((l, c), p) in labels.iter().zip(categories).zip(&projection.coords) {
        let y = p.get(1).copied().unwrap_or(0.0);
        w.write_record([l.as_str(), c.as_str(), &p[0].to_string(), &y.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Difference {
    pub category: String,
    /// Position of the pair within its category.
    pub pair: usize,
    /// Unit-normalized `second - first`.
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryCohesion {
    pub category: String,
    /// Mean cosine over unordered pairs of this category's differences.
    pub intra_cosine: f64,
    /// Mean cosine between this category's differences and all others'.
    pub inter_cosine: f64,
    /// Differences kept.
    pub n: usize,
    /// Zero differences dropped.
    pub excluded: usize,
    pub separated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohesionReport {
    pub categories: Vec<CategoryCohesion>,
    pub differences: Vec<Difference>,
    pub excluded: usize,
}

impl CohesionReport {
    /// True when every category is separated by at least the margin.
    pub fn separated(&self) -> bool {
        self.categories.iter().all(|c| c.separated)
    }

    /// `category,intra_cosine,inter_cosine,n` rows.
    pub fn to_csv(&self) -> Result<String, GeometryError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["category", "intra_cosine", "inter_cosine", "n"])?;
        for c in &self.categories {
            w.write_record([c.category.clone(), c.intra_cosine.to_string(), c.inter_cosine.to_string(), c.n.to_string()])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("utf-8"))
    }
}

/// Cohesion of pair-difference vectors per category: pairs related the same
/// way should have differences pointing the same way.
pub fn pair_difference_analysis(
    pairs: &BTreeMap<String, Vec<(Vec<f64>, Vec<f64>)>>,
) -> Result<CohesionReport, GeometryError> {
    if pairs.len() < 2 {
        return Err(GeometryError::Input("need at least 2 categories".into()));
    }
    let dim = pairs.values().flatten().next().map(|p| p.0.len()).unwrap_or(0);
    let mut differences = Vec::new();
    let mut excluded_per: BTreeMap<&str, usize> = BTreeMap::new();
    for (category, list) in pairs {
        if list.len() < 2 {
            return Err(GeometryError::Input(format!("category {category:?} has fewer than 2 pairs")));
        }
        for (i, (a, b)) in list.iter().enumerate() {
            if a.len() != dim || b.len() != dim {
                return Err(GeometryError::Input(format!("category {category:?} pair {i}: dimension mismatch")));
            }
            let d: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - x).collect();
            match vector::normalized(&d) {
                Some(vector) => differences.push(Difference {
                    category: category.clone(),
                    pair: i,
                    vector,
                }),
                None => *excluded_per.entry(category.as_str()).or_insert(0) += 1,
            }
        }
    }
    let mut categories = Vec::new();
    for category in pairs.keys() {
        let own: Vec<&Difference> = differences.iter().filter(|d| &d.category == category).collect();
        let others: Vec<&Difference> = differences.iter().filter(|d| &d.category != category).collect();
        if own.len() < 2 || others.is_empty() {
            return Err(GeometryError::Input(format!(
                "category {category:?} has fewer than 2 non-zero differences or no other category to compare"
            )));
        }
        let mut intra = 0.0;
        let mut count = 0usize;
        for i in 0..own.len() {
            for j in i + 1..own.len() {
                intra += vector::dot(&own[i].vector, &own[j].vector);
                count += 1;
            }
        }
        let intra = intra / count as f64;
        let inter = own
            .iter()
            .flat_map(|a| others.iter().map(move |b| vector::dot(&a.vector, &b.vector)))
            .sum::<f64>()
            / (own.len() * others.len()) as f64;
        categories.push(CategoryCohesion {
            category: category.clone(),
            intra_cosine: intra,
            inter_cosine: inter,
            n: own.len(),
            excluded: excluded_per.get(category.as_str()).copied().unwrap_or(0),
            separated: intra - inter > SEPARATION_MARGIN,
        });
    }
    let excluded = excluded_per.values().sum();
    Ok(CohesionReport {
        categories,
        differences,
        excluded,
    })
}
