//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

use blinktrack::activity::{GridId, TileRef};
use blinktrack::correlator::BlinkCandidate;
use blinktrack::detector::{BlinkDetection, DetectorConfig, FaceRegion};

/// Tiles containing a pixel, worked out from the tile sizes directly.
pub fn oracle_tiles(x: u16, y: u16) -> Vec<(u8, u16, u16)> {
    let mut v = vec![(0, y / 15, x / 19)];
    if x >= 9 && y >= 7 {
        let (c, r) = ((x - 9) / 19, (y - 7) / 15);
        if c < 15 && r < 15 {
            v.push((1, r, c));
        }
    }
    v
}

pub fn tile_ref((g, r, c): (u8, u16, u16)) -> TileRef {
    TileRef {
        grid: if g == 0 { GridId::G0 } else { GridId::G1 },
        r,
        c,
    }
}

/// All-pairs reference: each arrival pairs with the best earlier unpaired
/// candidate satisfying every constraint, or waits.
pub fn brute_force(cands: &[BlinkCandidate], faces: &[FaceRegion], cfg: &DetectorConfig, tile_w: f64) -> Vec<BlinkDetection> {
    let mut open: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for (i, e) in cands.iter().enumerate() {
        let mut best: Option<usize> = None;
        let mut best_meta = (1.0, None);
        for &j in &open {
            let o = &cands[j];
            if e.t - o.t >= cfg.dt_max_us || (o.grid, o.r, o.c) == (e.grid, e.r, e.c) {
                continue;
            }
            let (dx, dy) = ((e.x - o.x).abs(), (e.y - o.y).abs());
            if dx <= cfg.min_sep_tiles * tile_w {
                continue;
            }
            let (mx, my) = ((e.x + o.x) / 2.0, (e.y + o.y) / 2.0);
            let face = faces
                .iter()
                .filter(|f| ((mx - f.cx).powi(2) + (my - f.cy).powi(2)).sqrt() <= f.radius * cfg.face_margin)
                .min_by(|a, b| {
                    let da = ((mx - a.cx).powi(2) + (my - a.cy).powi(2)).sqrt();
                    let db = ((mx - b.cx).powi(2) + (my - b.cy).powi(2)).sqrt();
                    da.total_cmp(&db).then(a.id.cmp(&b.id))
                });
            let s = face.map_or(1.0, |f| f.scale);
            if dx >= cfg.dh_max_px * s || dy >= cfg.dv_max_px * s {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => o.score > cands[b].score || (o.score == cands[b].score && o.t < cands[b].t),
            };
            if better {
                best = Some(j);
                best_meta = (s, face.map(|f| f.id));
            }
        }
        match best {
            Some(j) => {
                open.retain(|&k| k != j);
                let o = &cands[j];
                let (l, r) = if o.x <= e.x { ((o.x, o.y), (e.x, e.y)) } else { ((e.x, e.y), (o.x, o.y)) };
                out.push(BlinkDetection {
                    left: l,
                    right: r,
                    t: e.t,
                    scale: best_meta.0,
                    face_id: best_meta.1,
                    pair: [*o, *e],
                });
            }
            None => open.push(i),
        }
    }
    out
}
