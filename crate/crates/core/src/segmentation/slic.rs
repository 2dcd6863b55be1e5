//! Grayscale SLIC superpixels.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Frame, Plane};

#[derive(Debug, Clone, PartialEq)]
pub struct SlicConfig {
    /// Requested cluster count; 0 picks one cluster per 256 px.
    pub clusters: usize,
    pub compactness: f64,
    pub iters: usize,
}

impl Default for SlicConfig {
    fn default() -> Self {
        SlicConfig {
            clusters: 0,
            compactness: 10.0,
            iters: 10,
        }
    }
}

impl SlicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.compactness > 0.0 && self.compactness.is_finite()) {
            return Err(Error::Config("slic.compactness must be positive".into()));
        }
        if self.iters == 0 {
            return Err(Error::Config("slic.iters must be at least 1".into()));
        }
        Ok(())
    }

    /// Cluster count actually requested for a `width x height` image.
    pub fn resolve_clusters(&self, width: usize, height: usize) -> usize {
        if self.clusters == 0 {
            (width * height / 256).max(1)
        } else {
            self.clusters
        }
    }
}

/// Cluster centre: mean intensity and mean position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Center {
    pub intensity: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelMap {
    pub labels: Plane<u32>,
    pub centers: Vec<Center>,
    /// Total squared assignment distance after each assignment pass.
    pub energy: Vec<f64>,
}

impl SuperpixelMap {
    pub fn num_clusters(&self) -> usize {
        self.centers.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.labels.dims()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centers.len()];
        for &l in self.labels.as_slice() {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

struct Metric {
    spatial: f64,
}

impl Metric {
    #[inline]
    fn dist2(&self, c: &Center, v: f64, x: f64, y: f64) -> f64 {
        let di = v - c.intensity;
        let dx = x - c.x;
        let dy = y - c.y;
        di * di + self.spatial * (dx * dx + dy * dy)
    }
}

pub fn slic_segment(
    img: &Frame,
    clusters: usize,
    compactness: f64,
    iters: usize,
) -> Result<SuperpixelMap> {
    let (w, h) = img.dims();
    if w == 0 || h == 0 {
        return Err(Error::invalid("SLIC on an empty image"));
    }
    if clusters == 0 || clusters > w * h {
        return Err(Error::invalid(format!(
            "SLIC cluster count {clusters} outside [1, {}]",
            w * h
        )));
    }
    if !(compactness > 0.0) || iters == 0 {
        return Err(Error::invalid(
            "SLIC needs positive compactness and iterations",
        ));
    }
    let gray = img.to_gray();
    let intensity: Vec<f64> = gray.as_slice().iter().map(|&v| v as f64).collect();
    let step = ((w * h) as f64 / clusters as f64).sqrt();
    let metric = Metric {
        spatial: (compactness / step).powi(2),
    };

    let mut centers = initial_centers(&intensity, w, h, clusters);
    let mut labels = vec![u32::MAX; w * h];
    let mut energy = Vec::with_capacity(iters);
    for _ in 0..iters {
        let e = assign(&intensity, w, &centers, &metric, step, &mut labels);
        energy.push(e);
        update_centers(&intensity, w, &labels, &mut centers);
    }

    let min_size = ((step * step) / 4.0).floor().max(1.0) as usize;
    let labels = enforce_connectivity(&labels, w, h, min_size);
    let labels = Plane::from_vec(w, h, labels)?;
    let centers = final_centers(&intensity, &labels);
    Ok(SuperpixelMap {
        labels,
        centers,
        energy,
    })
}

fn initial_centers(intensity: &[f64], w: usize, h: usize, k: usize) -> Vec<Center> {
    let nx = ((k as f64 * w as f64 / h as f64).sqrt().ceil() as usize).clamp(1, w.min(k));
    let ny = (k / nx).clamp(1, h);
    let grad = |x: usize, y: usize| -> f64 {
        let at = |x: isize, y: isize| {
            intensity
                [(y.clamp(0, h as isize - 1) as usize) * w + x.clamp(0, w as isize - 1) as usize]
        };
        let (x, y) = (x as isize, y as isize);
        let gx = at(x + 1, y) - at(x - 1, y);
        let gy = at(x, y + 1) - at(x, y - 1);
        gx * gx + gy * gy
    };
    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = (((i as f64 + 0.5) * w as f64 / nx as f64) as usize).min(w - 1);
            let cy = (((j as f64 + 0.5) * h as f64 / ny as f64) as usize).min(h - 1);
            let mut best = (grad(cx, cy), cx, cy);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let x = cx as isize + dx;
                    let y = cy as isize + dy;
                    if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                        continue;
                    }
                    let g = grad(x as usize, y as usize);
                    if g < best.0 {
                        best = (g, x as usize, y as usize);
                    }
                }
            }
            let (_, x, y) = best;
            centers.push(Center {
                intensity: intensity[y * w + x],
                x: x as f64,
                y: y as f64,
            });
        }
    }
    centers
}

/// One assignment pass. Candidates are the centres whose `2S x 2S` window
/// covers the pixel plus its current centre, so the energy cannot rise.
/// Returns the total squared distance.
fn assign(
    intensity: &[f64],
    w: usize,
    centers: &[Center],
    metric: &Metric,
    step: f64,
    labels: &mut [u32],
) -> f64 {
    let row_energy: Vec<f64> = labels
        .par_chunks_mut(w)
        .enumerate()
        .map(|(y, row)| {
            let fy = y as f64;
            let mut e = 0.0;
            for (x, label) in row.iter_mut().enumerate() {
                let fx = x as f64;
                let v = intensity[y * w + x];
                let mut best = (f64::INFINITY, u32::MAX);
                if *label != u32::MAX {
                    best = (metric.dist2(&centers[*label as usize], v, fx, fy), *label);
                }
                let mut covered = false;
                for (i, c) in centers.iter().enumerate() {
                    if (c.x - fx).abs() > step || (c.y - fy).abs() > step {
                        continue;
                    }
                    covered = true;
                    let d = metric.dist2(c, v, fx, fy);
                    if d < best.0 || (d == best.0 && (i as u32) < best.1) {
                        best = (d, i as u32);
                    }
                }
                if !covered && best.1 == u32::MAX {
                    for (i, c) in centers.iter().enumerate() {
                        let d = metric.dist2(c, v, fx, fy);
                        if d < best.0 {
                            best = (d, i as u32);
                        }
                    }
                }
                *label = best.1;
                e += best.0;
            }
            e
        })
        .collect();
    row_energy.iter().sum()
}

fn update_centers(intensity: &[f64], w: usize, labels: &[u32], centers: &mut [Center]) {
    let mut acc = vec![[0.0f64; 4]; centers.len()];
    for (i, &l) in labels.iter().enumerate() {
        let a = &mut acc[l as usize];
        a[0] += intensity[i];
        a[1] += (i % w) as f64;
        a[2] += (i / w) as f64;
        a[3] += 1.0;
    }
    for (c, a) in centers.iter_mut().zip(&acc) {
        if a[3] > 0.0 {
            *c = Center {
                intensity: a[0] / a[3],
                x: a[1] / a[3],
                y: a[2] / a[3],
            };
        }
    }
}

fn final_centers(intensity: &[f64], labels: &Plane<u32>) -> Vec<Center> {
    let n = labels
        .as_slice()
        .iter()
        .map(|&l| l as usize + 1)
        .max()
        .unwrap_or(0);
    let mut centers = vec![
        Center {
            intensity: 0.0,
            x: 0.0,
            y: 0.0
        };
        n
    ];
    update_centers(intensity, labels.width(), labels.as_slice(), &mut centers);
    centers
}

/// 4-connected components of equal labels, numbered in raster order of
/// their first pixel.
pub(crate) fn label_components(labels: &[u32], w: usize, h: usize) -> (Vec<usize>, Vec<usize>) {
    let mut comp = vec![usize::MAX; w * h];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let l = labels[start];
        comp[start] = id;
        stack.push(start);
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if comp[j] == usize::MAX && labels[j] == l {
                    comp[j] = id;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        sizes.push(size);
    }
    (comp, sizes)
}

/// Makes every cluster 4-connected: components below `min_size` merge into
/// their largest neighbour, other stray pieces become clusters of their own.
/// Output labels are compact, numbered in raster order.
fn enforce_connectivity(labels: &[u32], w: usize, h: usize, min_size: usize) -> Vec<u32> {
    let (comp, sizes) = label_components(labels, w, h);
    let n = sizes.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &c) in comp.iter().enumerate() {
        members[c].push(i);
    }
    let mut primary = std::collections::HashMap::new();
    for c in 0..n {
        let l = labels[members[c][0]];
        let e = primary.entry(l).or_insert(c);
        if sizes[c] > sizes[*e] {
            *e = c;
        }
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut size = sizes.clone();
    fn root(parent: &mut [usize], mut c: usize) -> usize {
        while parent[c] != c {
            parent[c] = parent[parent[c]];
            c = parent[c];
        }
        c
    }
    for c in 0..n {
        let is_primary = primary[&labels[members[c][0]]] == c;
        if is_primary || sizes[c] >= min_size {
            continue;
        }
        let mut best: Option<usize> = None;
        for &i in &members[c] {
            let (x, y) = (i % w, i / w);
            let mut neighbours = [usize::MAX; 4];
            if x > 0 {
                neighbours[0] = comp[i - 1];
            }
            if x + 1 < w {
                neighbours[1] = comp[i + 1];
            }
            if y > 0 {
                neighbours[2] = comp[i - w];
            }
            if y + 1 < h {
                neighbours[3] = comp[i + w];
            }
            for nb in neighbours {
                if nb == usize::MAX || nb == c {
                    continue;
                }
                let r = root(&mut parent, nb);
                if r == c {
                    continue;
                }
                best = match best {
                    None => Some(r),
                    Some(b) if size[r] > size[b] || (size[r] == size[b] && r < b) => Some(r),
                    keep => keep,
                };
            }
        }
        if let Some(r) = best {
            parent[c] = r;
            size[r] += size[c];
        }
    }
    let mut out_id = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut out = vec![0u32; w * h];
    for i in 0..w * h {
        let r = root(&mut parent, comp[i]);
        if out_id[r] == u32::MAX {
            out_id[r] = next;
            next += 1;
        }
        out[i] = out_id[r];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_single_cluster() {
        let img = Frame::filled(8, 8, 1, 77.0);
        let sp = slic_segment(&img, 1, 10.0, 10).unwrap();
        assert_eq!(sp.num_clusters(), 1);
        assert!(sp.labels.as_slice().iter().all(|&l| l == 0));
    }

    #[test]
    fn constant_image_four_balanced_clusters() {
        let img = Frame::filled(64, 64, 1, 100.0);
        let sp = slic_segment(&img, 4, 10.0, 10).unwrap();
        assert_eq!(sp.num_clusters(), 4);
        for s in sp.sizes() {
            assert!((512..=2048).contains(&s), "size {s}");
        }
    }

    #[test]
    fn two_tones_split_at_column_32() {
        let img = Frame::gray_from_fn(64, 64, |x, _| if x < 32 { 0.0 } else { 200.0 });
        let sp = slic_segment(&img, 2, 10.0, 10).unwrap();
        assert_eq!(sp.num_clusters(), 2);
        for y in 0..64 {
            let row: Vec<u32> = (0..64).map(|x| *sp.labels.get(x, y)).collect();
            let boundary = (1..64).find(|&x| row[x] != row[x - 1]).unwrap();
            assert!((31..=33).contains(&boundary), "row {y} boundary {boundary}");
            assert!((1..64).filter(|&x| row[x] != row[x - 1]).count() == 1);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let img = Frame::filled(4, 4, 1, 0.0);
        assert!(slic_segment(&img, 0, 10.0, 10).is_err());
        assert!(slic_segment(&img, 17, 10.0, 10).is_err());
        assert!(slic_segment(&img, 2, 0.0, 10).is_err());
    }

    #[test]
    fn small_pieces_merge_into_neighbour() {
        // label 1 has a stray single pixel inside label 0
        let mut labels = vec![0u32; 36];
        for y in 0..6 {
            for x in 3..6 {
                labels[y * 6 + x] = 1;
            }
        }
        labels[7] = 1;
        let out = enforce_connectivity(&labels, 6, 6, 2);
        assert_eq!(out[7], out[0]);
        assert_eq!(out.iter().filter(|&&l| l == out[0]).count(), 18);
    }
}
