//! A split bearer delivering over a fast terrestrial path and a slow
//! satellite path, with one PDU lost on the way.
//!
//!     cargo run --example pdcp_reordering

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use satmc::config::ms;
use satmc::dataplane::PdcpReceiveEntity;

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    Arrive(u64),
    Timer(u64),
}

fn main() {
    let mut rx = PdcpReceiveEntity::new(ms(40.0), 64);
    let mut heap = BinaryHeap::new();
    for sn in 0..12u64 {
        if sn == 7 {
            continue;
        }
        let sent = ms(sn as f64 * 3.75);
        // every third PDU goes over the satellite
        let delay = if sn % 3 == 1 { ms(13.0) } else { ms(0.5) };
        heap.push(Reverse((sent + delay, Ev::Arrive(sn))));
    }
    while let Some(Reverse((t, ev))) = heap.pop() {
        let out = match ev {
            Ev::Arrive(sn) => {
                print!("{:>8.2} ms  rx SN {sn:<2}", t.as_millis_f64());
                rx.receive(sn, 1500, t)
            }
            Ev::Timer(g) => {
                // a timer restarted since this was armed is ignored
                print!("{:>8.2} ms  timer {g} ", t.as_millis_f64());
                rx.on_timer(g, t)
            }
        };
        let sns: Vec<u64> = out.delivered.iter().map(|d| d.0).collect();
        println!("  deliver {sns:?}  buffered {}", rx.buffered_pdus());
        if let Some((g, at)) = out.start_timer {
            heap.push(Reverse((at, Ev::Timer(g))));
        }
    }
    let c = &rx.counters;
    println!(
        "\ndelivered {} PDUs, skipped {} SN, next expected {}",
        c.delivered_pdus,
        c.skipped_sns,
        rx.next_expected()
    );
}
