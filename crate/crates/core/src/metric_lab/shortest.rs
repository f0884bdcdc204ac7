//! Multi-source Dijkstra over implicit graphs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) const NO_PRED: usize = usize::MAX;

/// Distances and predecessors from `sources` (`(vertex, initial distance)`).
///
/// `neighbors(v, push)` must call `push(w, length)` for every edge `v -> w`.
pub(crate) fn dijkstra<N>(count: usize, sources: &[(usize, f64)], neighbors: N) -> (Vec<f64>, Vec<usize>)
where
    N: Fn(usize, &mut dyn FnMut(usize, f64)),
{
    let mut dist = vec![f64::INFINITY; count];
    let mut pred = vec![NO_PRED; count];
    let mut heap = BinaryHeap::new();
    for &(v, d) in sources {
        if d < dist[v] {
            dist[v] = d;
            heap.push(Item(d, v));
        }
    }
    while let Some(Item(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        neighbors(v, &mut |w, len| {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                pred[w] = v;
                heap.push(Item(nd, w));
            }
        });
    }
    (dist, pred)
}

/// Vertex sequence ending at `target`, source first.
pub(crate) fn trace(pred: &[usize], target: usize) -> Vec<usize> {
    let mut out = vec![target];
    let mut v = target;
    while pred[v] != NO_PRED {
        v = pred[v];
        out.push(v);
    }
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph() {
        // 0 - 1 - 2 - 3 with unit edges, plus a long shortcut 0 - 3
        let edges = |v: usize, push: &mut dyn FnMut(usize, f64)| {
            if v > 0 {
                push(v - 1, 1.0);
            }
            if v < 3 {
                push(v + 1, 1.0);
            }
            if v == 0 {
                push(3, 5.0);
            }
            if v == 3 {
                push(0, 5.0);
            }
        };
        let (d, p) = dijkstra(4, &[(0, 0.0)], edges);
        assert_eq!(d, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(trace(&p, 3), vec![0, 1, 2, 3]);
        let (d, _) = dijkstra(4, &[(0, 0.0), (3, 0.5)], edges);
        assert_eq!(d, vec![0.0, 1.0, 1.5, 0.5]);
    }
}
