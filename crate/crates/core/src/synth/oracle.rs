//! Reference implementation of the character-removal evaluation.
//!
//! Written to be obviously right rather than fast: axis-aligned boxes only,
//! plain arithmetic for areas, and one recursive call per round. It shares
//! no code with `crate::evaluate` or `crate::geometry`; the scenario
//! generator uses it to compute expected results.

/// Axis-aligned box `[left, top, right, bottom]`.
pub type Rect = [f64; 4];

#[derive(Debug, Clone, PartialEq)]
pub struct OracleInstance {
    pub rect: Rect,
    pub text: String,
    pub dont_care: bool,
}

fn area(r: &Rect) -> f64 {
    (r[2] - r[0]) * (r[3] - r[1])
}

fn overlap(a: &Rect, b: &Rect) -> f64 {
    let w = a[2].min(b[2]) - a[0].max(b[0]);
    let h = a[3].min(b[3]) - a[1].max(b[1]);
    if w > 0.0 && h > 0.0 {
        w * h
    } else {
        0.0
    }
}

fn center(r: &Rect) -> (f64, f64) {
    ((r[0] + r[2]) / 2.0, (r[1] + r[3]) / 2.0)
}

// True when box `a` is read before box `b`.
fn before(a: &Rect, b: &Rect) -> bool {
    let (ax, ay) = center(a);
    let (bx, by) = center(b);
    let da = (ax * ax + ay * ay).sqrt();
    let db = (bx * bx + by * by).sqrt();
    if (da - db).abs() > 1e-9 {
        return da < db;
    }
    if (ay - by).abs() > 1e-9 {
        return ay < by;
    }
    if (ax - bx).abs() > 1e-9 {
        return ax < bx;
    }
    false
}

struct Gt {
    rect: Rect,
    text: Vec<char>,
}

struct Det {
    rect: Rect,
    text: Vec<char>,
    used: bool,
}

/// Expected `(removed, gt_chars, det_chars)` for one image.
pub fn evaluate(gts: &[OracleInstance], dets: &[OracleInstance], case_fold: bool) -> (f64, usize, usize) {
    let chars = |s: &str| -> Vec<char> {
        if case_fold {
            s.to_lowercase().chars().collect()
        } else {
            s.chars().collect()
        }
    };

    // Don't-care handling.
    let mut kept_dets = Vec::new();
    for d in dets {
        let mut covered = false;
        for g in gts {
            if g.dont_care && overlap(&g.rect, &d.rect) / area(&d.rect) > 0.5 {
                covered = true;
            }
        }
        if !covered {
            kept_dets.push(Det {
                rect: d.rect,
                text: chars(&d.text),
                used: false,
            });
        }
    }
    let mut kept_gts = Vec::new();
    for g in gts {
        if !g.dont_care {
            kept_gts.push(Gt {
                rect: g.rect,
                text: chars(&g.text),
            });
        }
    }

    let gt_chars = kept_gts.iter().map(|g| g.text.len()).sum();
    let det_chars = kept_dets.iter().map(|d| d.text.len()).sum();
    let removed = run(&mut kept_gts, &mut kept_dets);
    (removed, gt_chars, det_chars)
}

fn run(gts: &mut Vec<Gt>, dets: &mut Vec<Det>) -> f64 {
    // Inspect relations.
    let mut one_to_one = Vec::new();
    let mut one_to_many = Vec::new();
    for gi in 0..gts.len() {
        if gts[gi].text.is_empty() {
            continue;
        }
        let mut hits = Vec::new();
        for di in 0..dets.len() {
            if !dets[di].used && overlap(&gts[gi].rect, &dets[di].rect) > 1e-9 {
                hits.push(di);
            }
        }
        if hits.len() == 1 {
            one_to_one.push((gi, hits[0]));
        } else if hits.len() > 1 {
            one_to_many.push((gi, hits));
        }
    }
    if one_to_one.is_empty() && one_to_many.is_empty() {
        return 0.0;
    }

    let mut removed = 0.0;
    if !one_to_one.is_empty() {
        while !one_to_one.is_empty() {
            let mut k = 0;
            for j in 1..one_to_one.len() {
                if before(&gts[one_to_one[j].0].rect, &gts[one_to_one[k].0].rect) {
                    k = j;
                }
            }
            let (gi, di) = one_to_one.remove(k);
            removed += remove_characters(&mut gts[gi], &mut dets[di], 1.0);
            dets[di].used = true;
        }
    } else {
        removed += handle_one_to_many(gts, dets, one_to_many);
    }
    removed + run(gts, dets)
}

fn handle_one_to_many(gts: &mut [Gt], dets: &mut [Det], groups: Vec<(usize, Vec<usize>)>) -> f64 {
    let mut k = 0;
    for j in 1..groups.len() {
        if before(&gts[groups[j].0].rect, &gts[groups[k].0].rect) {
            k = j;
        }
    }
    let (gi, candidates) = &groups[k];
    let gt_area = area(&gts[*gi].rect);
    let recall = |d: usize| overlap(&gts[*gi].rect, &dets[d].rect) / gt_area;
    let mut best = 0.0;
    for &d in candidates {
        if recall(d) > best {
            best = recall(d);
        }
    }
    let mut chosen: Vec<usize> = Vec::new();
    for &d in candidates {
        if (recall(d) - best).abs() <= 1e-9 {
            chosen.push(d);
        }
    }
    let weight = 1.0 / chosen.len() as f64;
    let mut removed = 0.0;
    while !chosen.is_empty() {
        let mut k = 0;
        for j in 1..chosen.len() {
            if before(&dets[chosen[j]].rect, &dets[chosen[k]].rect) {
                k = j;
            }
        }
        let d = chosen.remove(k);
        removed += remove_characters(&mut gts[*gi], &mut dets[d], weight);
        dets[d].used = true;
    }
    removed
}

fn remove_characters(gt: &mut Gt, det: &mut Det, weight: f64) -> f64 {
    let mut removed = 0.0;
    let mut i = 0;
    while i < det.text.len() {
        let c = det.text[i];
        let mut found = None;
        for (j, &g) in gt.text.iter().enumerate() {
            if g == c {
                found = Some(j);
                break;
            }
        }
        match found {
            Some(j) => {
                gt.text.remove(j);
                det.text.remove(i);
                removed += weight;
            }
            None => i += 1,
        }
    }
    removed
}
