//! Message passing between workers: halo exchange and barriers over
//! interchangeable backends (in-process channels, TCP sockets).
//!
//! All pairwise traffic follows one global schedule: pairs `(min, max)` in
//! lexicographic order, the lower id sending first within a pair. Every
//! worker's local schedule is the restriction of that total order, which makes
//! the exchange deadlock-free even with rendezvous sends; buffered sends only
//! add slack. Received tags must match the expected `(iteration, phase)`
//! exactly, so desynchronized workers fail fast instead of mixing iterations.

pub mod inproc;
pub mod socket;

use crate::error::{CoreError, Result};
use crate::image::Region;
use crate::layout::BlockLayout;

/// Phase ids used inside message tags.
pub const PHASE_BARRIER: u16 = 1;
pub const PHASE_EXCHANGE: u16 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageTag {
    pub iteration: u64,
    pub phase: u16,
}

impl MessageTag {
    pub fn new(iteration: u64, phase: u16) -> Self {
        MessageTag { iteration, phase }
    }
}

/// Point-to-point float64 messaging within a fixed group of workers.
pub trait Transport: Send {
    fn id(&self) -> usize;
    fn n_workers(&self) -> usize;
    fn send(&mut self, to: usize, tag: MessageTag, payload: &[f64]) -> Result<()>;
    fn recv(&mut self, from: usize, tag: MessageTag) -> Result<Vec<f64>>;
    fn bytes_sent(&self) -> u64;
    fn bytes_received(&self) -> u64;
}

/// One halo link of a worker: what to send and what will arrive, both
/// expressed in the worker's local estimate frame.
#[derive(Debug, Clone)]
pub struct HaloLink {
    pub neighbor: usize,
    pub send_region: Region,
    pub recv_region: Region,
}

impl HaloLink {
    pub fn area(&self) -> usize {
        self.send_region.area()
    }
}

/// Per-worker exchange plan derived from the layout's overlap pairs;
/// links are sorted by neighbor id.
#[derive(Debug, Clone)]
pub struct ExchangePlan {
    pub worker: usize,
    pub links: Vec<HaloLink>,
}

impl ExchangePlan {
    pub fn from_layout(layout: &BlockLayout, worker: usize) -> ExchangePlan {
        let mut links = Vec::new();
        for pair in layout.overlap_pairs() {
            if pair.a == worker {
                links.push(HaloLink {
                    neighbor: pair.b,
                    send_region: pair.in_a,
                    recv_region: pair.in_a,
                });
            } else if pair.b == worker {
                links.push(HaloLink {
                    neighbor: pair.a,
                    send_region: pair.in_b,
                    recv_region: pair.in_b,
                });
            }
        }
        links.sort_by_key(|l| l.neighbor);
        ExchangePlan { worker, links }
    }
}

/// Sends one payload per link and returns the matching incoming payloads in
/// link order. Within each pair the lower id sends first; pairs are processed
/// in the global lexicographic order, which is deadlock-free.
pub fn exchange_halos(
    transport: &mut dyn Transport,
    plan: &ExchangePlan,
    tag: MessageTag,
    outgoing: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    if outgoing.len() != plan.links.len() {
        return Err(CoreError::Protocol(format!(
            "exchange got {} payloads for {} links",
            outgoing.len(),
            plan.links.len()
        )));
    }
    let me = transport.id();
    let mut incoming = Vec::with_capacity(plan.links.len());
    for (link, payload) in plan.links.iter().zip(outgoing) {
        let data = if me < link.neighbor {
            transport.send(link.neighbor, tag, payload)?;
            transport.recv(link.neighbor, tag)?
        } else {
            let data = transport.recv(link.neighbor, tag)?;
            transport.send(link.neighbor, tag, payload)?;
            data
        };
        incoming.push(data);
    }
    Ok(incoming)
}

/// Group-wide barrier: pairwise empty-message rendezvous with every other
/// worker. A worker returns only after hearing from all peers, so no worker
/// leaves before the last one has entered.
pub fn barrier(transport: &mut dyn Transport, tag: MessageTag) -> Result<()> {
    let me = transport.id();
    for peer in 0..transport.n_workers() {
        if peer == me {
            continue;
        }
        if me < peer {
            transport.send(peer, tag, &[])?;
            transport.recv(peer, tag)?;
        } else {
            transport.recv(peer, tag)?;
            transport.send(peer, tag, &[])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{build_layout, Regime};

    #[test]
    fn plans_are_pairwise_consistent() {
        let layout = build_layout(48, 48, 3, 3, 5, Regime::SmoothVariant, None).unwrap();
        let plans: Vec<ExchangePlan> = (0..9)
            .map(|w| ExchangePlan::from_layout(&layout, w))
            .collect();
        for plan in &plans {
            for link in &plan.links {
                let back = plans[link.neighbor]
                    .links
                    .iter()
                    .find(|l| l.neighbor == plan.worker)
                    .expect("reverse link");
                assert_eq!(link.area(), back.area());
            }
        }
        // center worker of a 3x3 smooth layout talks to all 8 neighbors
        assert_eq!(plans[4].links.len(), 8);
    }

    #[test]
    fn single_worker_plan_is_empty() {
        let layout = build_layout(32, 32, 1, 1, 5, Regime::SmoothVariant, None).unwrap();
        let plan = ExchangePlan::from_layout(&layout, 0);
        assert!(plan.links.is_empty());
    }
}
