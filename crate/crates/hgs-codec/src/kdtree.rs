//! Small static kd-tree over 3D points for k-nearest-neighbor queries.

/// Balanced kd-tree built once over an immutable point slice.
pub struct KdTree<'a> {
    points: &'a [[f64; 3]],
    /// Point indices arranged so that each subtree occupies a contiguous range
    /// with its median-split point in the middle.
    order: Vec<u32>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [[f64; 3]]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut tree = KdTree {
            points,
            order: Vec::new(),
        };
        build_range(points, &mut order, 0);
        tree.order = order;
        tree
    }

    /// Squared distances of the `k` nearest neighbors of `query`, excluding
    /// the point with index `exclude` (pass `u32::MAX` to keep all).
    pub fn knn_dist2(&self, query: [f64; 3], k: usize, exclude: u32) -> Vec<f64> {
        let mut heap: Vec<f64> = Vec::with_capacity(k + 1);
        self.search(0, self.order.len(), 0, query, k, exclude, &mut heap);
        heap.sort_by(|a, b| a.partial_cmp(b).unwrap());
        heap
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        lo: usize,
        hi: usize,
        axis: usize,
        query: [f64; 3],
        k: usize,
        exclude: u32,
        heap: &mut Vec<f64>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = self.points[idx as usize];
        if idx != exclude {
            let d2 = dist2(p, query);
            if heap.len() < k {
                heap_push(heap, d2);
            } else if d2 < heap[0] {
                heap_pop(heap);
                heap_push(heap, d2);
            }
        }
        let delta = query[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        let next = (axis + 1) % 3;
        self.search(near.0, near.1, next, query, k, exclude, heap);
        if heap.len() < k || delta * delta < heap[0] {
            self.search(far.0, far.1, next, query, k, exclude, heap);
        }
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn build_range(points: &[[f64; 3]], order: &mut [u32], axis: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .partial_cmp(&points[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let next = (axis + 1) % 3;
    let (left, rest) = order.split_at_mut(mid);
    build_range(points, left, next);
    build_range(points, &mut rest[1..], next);
}

// max-heap on squared distance so the root is the current worst neighbor
fn heap_push(heap: &mut Vec<f64>, d2: f64) {
    heap.push(d2);
    let mut i = heap.len() - 1;
    while i > 0 {
        let parent = (i - 1) / 2;
        if heap[parent] < heap[i] {
            heap.swap(parent, i);
            i = parent;
        } else {
            break;
        }
    }
}

fn heap_pop(heap: &mut Vec<f64>) {
    let last = heap.len() - 1;
    heap.swap(0, last);
    heap.pop();
    let mut i = 0;
    loop {
        let (l, r) = (2 * i + 1, 2 * i + 2);
        let mut largest = i;
        if l < heap.len() && heap[l] > heap[largest] {
            largest = l;
        }
        if r < heap.len() && heap[r] > heap[largest] {
            largest = r;
        }
        if largest == i {
            break;
        }
        heap.swap(i, largest);
        i = largest;
    }
}
