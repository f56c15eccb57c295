//! Searches starting weights for the three toy presets on the default
//! two-cloud data and prints, for each epoch budget, the best candidate per
//! regime.
//!
//! ```text
//! cargo run --release --example derive_presets
//! ```
//!
//! A start qualifies for any preset only if pure-lazy ends at 100% training
//! accuracy and cumulative energy obeys pure-lazy <= lazy <= backprop after
//! every presented sample. On top of that:
//!
//! 1. windy vs straight: starts at most 80% correct, pure-lazy travels at
//!    least 0.5; largest ratio of backprop to pure-lazy inefficiency;
//! 2. coinciding paths: all three energies within 2x, largest initial error;
//! 3. accuracy ascent: starts below 100%, pure-lazy climbs to 100% while
//!    backprop, following the loss, ends below it; largest accuracy gap.

use lazyprop::landscape::{accuracy_at, trace_run, Trajectory};
use lazyprop::{make_two_clouds, GateKind, ToyTargets, ToyTaskSpec, TrainConfig};

const MAX_EPOCHS: usize = 16;

fn cumulative(t: &Trajectory) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for p in t.points.windows(2) {
        acc += (p[1][0] - p[0][0]).abs() + (p[1][1] - p[0][1]).abs();
        out.push(acc);
    }
    out
}

fn l1(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).abs() + (a[1] - b[1]).abs()
}

fn main() -> lazyprop::Result<()> {
    let data = make_two_clouds::<f64>(&ToyTaskSpec::default())?;
    let n = data.len();
    let mut cands = Vec::new();
    let steps: Vec<f64> = (0..=24).map(|i| -3.0 + 0.25 * i as f64).collect();
    for &w1 in &steps {
        for &w2 in &steps {
            let w0 = [w1, w2];
            let mut runs = Vec::new();
            for rule in GateKind::ALL {
                let config = TrainConfig {
                    epochs: MAX_EPOCHS,
                    eval_every: n as u64,
                    ..TrainConfig::toy(rule)
                };
                let t = trace_run(&config, &data, w0, ToyTargets::Signed, 0)?;
                let c = cumulative(&t);
                runs.push((t, c));
            }
            cands.push((w0, runs));
        }
    }

    for epochs in 4..=MAX_EPOCHS {
        let end = epochs * n;
        let mut best: [Option<(f64, [f64; 2], String)>; 3] = [None, None, None];
        for (w0, runs) in &cands {
            let (bp, pl, lz) = (&runs[0], &runs[1], &runs[2]);
            let ordered = (1..=end).all(|s| pl.1[s] <= lz.1[s] + 1e-12 && lz.1[s] <= bp.1[s] + 1e-12);
            let pl_end = pl.0.points[end];
            if !ordered || accuracy_at(&data, pl_end) < 1.0 {
                continue;
            }
            let bp_end = bp.0.points[end];
            let (m_bp, m_lz, m_pl) = (bp.1[end], lz.1[end], pl.1[end]);
            let ineff = |m: f64, e: [f64; 2]| m / l1(*w0, e).max(1e-12);
            let acc0 = accuracy_at(&data, *w0);
            let acc_bp = accuracy_at(&data, bp_end);
            let note = format!(
                "M bp/lazy/pure {m_bp:.3}/{m_lz:.3}/{m_pl:.3} acc0 {acc0:.3} acc bp {acc_bp:.3}"
            );
            let mut offer = |slot: usize, score: f64| {
                if best[slot].as_ref().is_none_or(|b| score > b.0) {
                    best[slot] = Some((score, *w0, note.clone()));
                }
            };
            if m_pl >= 0.5 && acc0 <= 0.8 {
                offer(0, ineff(m_bp, bp_end) / ineff(m_pl, pl_end));
            }
            if m_pl > 0.0 && m_bp <= 2.0 * m_pl {
                offer(1, 1.0 - acc0);
            }
            if acc0 < 1.0 && m_pl > 0.0 && acc_bp < 1.0 {
                offer(2, 1.0 - acc_bp);
            }
        }
        println!("epochs {epochs}");
        for (i, b) in best.iter().enumerate() {
            match b {
                Some((score, w, note)) => println!("  preset {}: {:?} score {score:.4}  {note}", i + 1, w),
                None => println!("  preset {}: none", i + 1),
            }
        }
    }
    Ok(())
}
