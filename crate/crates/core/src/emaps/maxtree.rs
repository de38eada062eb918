//! Max-tree construction by union-find flooding and area filtering.

use serde::{Deserialize, Serialize};

use super::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[default]
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }

    pub(crate) fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

pub(crate) fn for_each_neighbor(
    p: usize,
    height: usize,
    width: usize,
    conn: Connectivity,
    mut f: impl FnMut(usize),
) {
    let (r, c) = ((p / width) as isize, (p % width) as isize);
    for &(dr, dc) in conn.offsets() {
        let (nr, nc) = (r + dr, c + dc);
        if nr >= 0 && nc >= 0 && (nr as usize) < height && (nc as usize) < width {
            f(nr as usize * width + nc as usize);
        }
    }
}

/// Component tree of the upper level sets of an 8-bit image.
///
/// Every pixel points to its parent; canonical pixels (one per node) are
/// those whose parent has a different level, or the root.
#[derive(Debug, Clone)]
pub struct MaxTree {
    levels: Vec<u8>,
    parent: Vec<usize>,
    /// Pixels ordered from the highest level to the lowest; parents always
    /// come after their children.
    order: Vec<usize>,
    area: Vec<usize>,
}

fn find_root(zpar: &mut [usize], mut p: usize) -> usize {
    let mut root = p;
    while zpar[root] != root {
        root = zpar[root];
    }
    while zpar[p] != root {
        let next = zpar[p];
        zpar[p] = root;
        p = next;
    }
    root
}

impl MaxTree {
    pub fn build(img: &GrayImage, conn: Connectivity) -> Self {
        let n = img.levels.len();
        let (h, w) = (img.height, img.width);

        // counting sort, decreasing level, stable in raster order
        let mut counts = [0usize; 256];
        for &v in &img.levels {
            counts[v as usize] += 1;
        }
        let mut start = [0usize; 256];
        let mut acc = 0;
        for level in (0..256).rev() {
            start[level] = acc;
            acc += counts[level];
        }
        let mut order = vec![0usize; n];
        for (p, &v) in img.levels.iter().enumerate() {
            order[start[v as usize]] = p;
            start[v as usize] += 1;
        }

        const UNSEEN: usize = usize::MAX;
        let mut parent = vec![UNSEEN; n];
        let mut zpar = vec![UNSEEN; n];
        for &p in &order {
            parent[p] = p;
            zpar[p] = p;
            for_each_neighbor(p, h, w, conn, |q| {
                if zpar[q] != UNSEEN {
                    let r = find_root(&mut zpar, q);
                    if r != p {
                        parent[r] = p;
                        zpar[r] = p;
                    }
                }
            });
        }

        let mut area = vec![1usize; n];
        for &p in &order {
            let q = parent[p];
            if q != p {
                area[q] += area[p];
            }
        }

        // canonicalize: point every pixel at the canonical pixel of its node
        for &p in order.iter().rev() {
            let q = parent[p];
            if img.levels[parent[q]] == img.levels[q] {
                parent[p] = parent[q];
            }
        }

        MaxTree {
            levels: img.levels.clone(),
            parent,
            order,
            area,
        }
    }

    fn is_canonical(&self, p: usize) -> bool {
        let q = self.parent[p];
        q == p || self.levels[q] != self.levels[p]
    }

    /// Number of nodes in the tree.
    pub fn node_count(&self) -> usize {
        (0..self.levels.len()).filter(|&p| self.is_canonical(p)).count()
    }

    /// Area opening: nodes with area below `lambda` take the level of their
    /// nearest ancestor that passes.
    pub fn area_filter(&self, lambda: usize) -> Vec<u8> {
        let n = self.levels.len();
        let mut out = vec![0u8; n];
        for &p in self.order.iter().rev() {
            let q = self.parent[p];
            out[p] = if q == p {
                self.levels[p]
            } else if self.is_canonical(p) {
                if self.area[p] >= lambda {
                    self.levels[p]
                } else {
                    out[q]
                }
            } else {
                out[q]
            };
        }
        out
    }
}
